//! Linear jump-diffusion stochastic Schrödinger equation.
//!
//! ```text
//! dψ = -K ψ dt + Σ_k L_k ψ dW_k + Σ_m J_m ψ (dN_m - γ_m dt)
//! K  = iH + ½ (Σ_k L_k* L_k + Σ_m γ_m J_m* J_m)
//! ```
//!
//! Paths are sampled under the reference law: independent Wiener processes
//! and Poisson counters of constant rate `γ_m`, thinned to at most one jump
//! per channel and step. The unnormalized `ψ` carries the likelihood, so
//! `||ψ_t||²` is a martingale with mean `||u||²`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chain::TimeGrid;
use crate::error::{Error, Result};
use crate::linalg::{Operator, StateVector, C64};
use crate::parallel;

/// Largest admissible `γ_max dt`.
pub const MAX_RATE_DT: f64 = 0.1;
/// `||ψ||² / ||u||²` below this counts as a vanished trajectory.
pub const VANISHED_NORM: f64 = 1e-24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpChannel {
    #[serde(rename = "J")]
    pub op: Operator,
    pub rate: f64,
}

impl JumpChannel {
    pub fn new(op: Operator, rate: f64) -> Self {
        Self { op, rate }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdeModel {
    h: Operator,
    diffusive: Vec<Operator>,
    jumps: Vec<JumpChannel>,
    k: Operator,
}

impl SdeModel {
    pub fn build(h: Operator, diffusive: Vec<Operator>, jumps: Vec<JumpChannel>) -> Result<Self> {
        let d = h.dim();
        for op in diffusive.iter().chain(jumps.iter().map(|j| &j.op)) {
            if op.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: op.dim() });
            }
        }
        let residual = h.hermitian_residual();
        if residual > 1e-10 {
            return Err(Error::NotHermitian { residual });
        }
        if let Some(j) = jumps.iter().find(|j| !(j.rate > 0.0 && j.rate.is_finite())) {
            return Err(Error::InvalidModel(format!("jump rate must be positive, got {}", j.rate)));
        }
        let mut dissipator = Operator::zeros(d);
        for l in &diffusive {
            dissipator = &dissipator + &(&l.adjoint() * l);
        }
        for j in &jumps {
            dissipator = &dissipator + &(&j.op.adjoint() * &j.op).scale_real(j.rate);
        }
        let k = &h.scale(C64::new(0.0, 1.0)) + &dissipator.scale_real(0.5);
        Ok(Self { h, diffusive, jumps, k })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.h
    }

    pub fn diffusive(&self) -> &[Operator] {
        &self.diffusive
    }

    pub fn jumps(&self) -> &[JumpChannel] {
        &self.jumps
    }

    pub fn k(&self) -> &Operator {
        &self.k
    }

    /// `||K + K* - Σ L*L - Σ γ J*J||_F`.
    pub fn k_residual(&self) -> f64 {
        let mut r = &self.k + &self.k.adjoint();
        for l in &self.diffusive {
            r = &r - &(&l.adjoint() * l);
        }
        for j in &self.jumps {
            r = &r - &(&j.op.adjoint() * &j.op).scale_real(j.rate);
        }
        r.frobenius_norm()
    }

    pub fn max_rate(&self) -> f64 {
        self.jumps.iter().map(|j| j.rate).fold(0.0, f64::max)
    }

    /// Rejects grids with `γ_max dt > MAX_RATE_DT`.
    pub fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        let value = self.max_rate() * grid.dt;
        if value > MAX_RATE_DT {
            return Err(Error::GridTooCoarse { value, limit: MAX_RATE_DT });
        }
        Ok(())
    }
}

/// Noise consumed by one Euler step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepNoise {
    pub dw: Vec<f64>,
    /// Channels that jumped during the step.
    pub jumps: Vec<usize>,
}

/// One Euler–Maruyama update:
/// `ψ' = ψ - Kψ dt - Σ γ_m J_m ψ dt + Σ L_k ψ dW_k + Σ_{jumped} J_m ψ`.
pub fn step(model: &SdeModel, psi: &StateVector, dt: f64, dw: &[f64], jumps: &[usize]) -> Result<StateVector> {
    if psi.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: psi.dim() });
    }
    if dw.len() != model.diffusive.len() {
        return Err(Error::DimensionMismatch { expected: model.diffusive.len(), found: dw.len() });
    }
    if let Some(&m) = jumps.iter().find(|&&m| m >= model.jumps.len()) {
        return Err(Error::InvalidModel(format!("jump channel {m} does not exist")));
    }
    Ok(StateVector::from_vector(step_raw(model, psi.vector(), dt, dw, jumps)))
}

fn step_raw(model: &SdeModel, psi: &DVector<C64>, dt: f64, dw: &[f64], jumps: &[usize]) -> DVector<C64> {
    let mut next = psi - (model.k.matrix() * psi) * C64::from(dt);
    for (l, &w) in model.diffusive.iter().zip(dw) {
        next += (l.matrix() * psi) * C64::from(w);
    }
    for (m, j) in model.jumps.iter().enumerate() {
        let jpsi = j.op.matrix() * psi;
        next -= &jpsi * C64::from(j.rate * dt);
        if jumps.contains(&m) {
            next += jpsi;
        }
    }
    next
}

/// Constant coefficients of the recorded output
/// `X_i(t) = ∫ c_i ds + Σ_k ∫ a_ik dW_k + Σ_m ∫ φ(g_m) g_im dN_m
///          + Σ_m ∫ g_im / (1 + g_im²) (dN_m - γ_m ds)`, with
/// `φ(z) = |z|² / (1 + |z|²)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub c: Vec<f64>,
    /// `a[i][k]`
    pub a: Vec<Vec<f64>>,
    /// `g[i][m]`
    pub g: Vec<Vec<f64>>,
}

impl OutputConfig {
    pub fn n_outputs(&self) -> usize {
        self.c.len()
    }

    pub fn check(&self, model: &SdeModel) -> Result<()> {
        let d = self.c.len();
        if self.a.len() != d || self.g.len() != d {
            return Err(Error::InvalidModel("output config: c, a and g must have one row per component".into()));
        }
        for (a, g) in self.a.iter().zip(&self.g) {
            if a.len() != model.diffusive.len() || g.len() != model.jumps.len() {
                return Err(Error::InvalidModel("output config row length disagrees with channel counts".into()));
            }
        }
        let finite = self.c.iter().chain(self.a.iter().flatten()).chain(self.g.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidModel("output config has non-finite entries".into()));
        }
        Ok(())
    }

    /// Left-point increment of `X` over one step.
    pub fn increment(&self, dt: f64, noise: &StepNoise, rates: &[f64]) -> Vec<f64> {
        let n_jumps = rates.len();
        let phi: Vec<f64> = (0..n_jumps)
            .map(|m| {
                let norm_sq: f64 = self.g.iter().map(|row| row[m] * row[m]).sum();
                norm_sq / (1.0 + norm_sq)
            })
            .collect();
        (0..self.c.len())
            .map(|i| {
                let mut x = self.c[i] * dt;
                for (a, w) in self.a[i].iter().zip(&noise.dw) {
                    x += a * w;
                }
                for m in 0..n_jumps {
                    let g = self.g[i][m];
                    let dn = if noise.jumps.contains(&m) { 1.0 } else { 0.0 };
                    x += phi[m] * g * dn + g / (1.0 + g * g) * (dn - rates[m] * dt);
                }
                x
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    /// Step during which the jump happened; recorded at `t_{step+1}`.
    pub step: usize,
    pub time: f64,
    pub channel: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub grid: TimeGrid,
    pub psi: Vec<StateVector>,
    pub norm_sq: Vec<f64>,
    /// `dw[k][l]`: increment of `W_l` over step `k`.
    pub dw: Vec<Vec<f64>>,
    pub jumps: Vec<JumpEvent>,
    /// `output_x[k]` is `X(t_k)`.
    pub output_x: Vec<Vec<f64>>,
}

impl TrajectoryRecord {
    pub fn noise(&self, k: usize) -> StepNoise {
        StepNoise {
            dw: self.dw[k].clone(),
            jumps: self.jumps.iter().filter(|e| e.step == k).map(|e| e.channel).collect(),
        }
    }

    pub fn noise_path(&self) -> Vec<StepNoise> {
        (0..self.grid.n_steps).map(|k| self.noise(k)).collect()
    }

    /// Jumps per channel during steps `0..up_to`.
    pub fn jump_counts(&self, n_channels: usize, up_to: usize) -> Vec<usize> {
        let mut counts = vec![0; n_channels];
        for e in self.jumps.iter().filter(|e| e.step < up_to) {
            counts[e.channel] += 1;
        }
        counts
    }
}

fn draw_noise<R: Rng + ?Sized>(model: &SdeModel, dt: f64, rng: &mut R) -> StepNoise {
    let sd = dt.sqrt();
    let dw = (0..model.diffusive.len()).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let jumps = model
        .jumps
        .iter()
        .enumerate()
        .filter_map(|(m, j)| (rng.random::<f64>() < j.rate * dt).then_some(m))
        .collect();
    StepNoise { dw, jumps }
}

/// Samples one path. Per step the generator is consumed in a fixed order:
/// one normal per diffusive channel, then one uniform per jump channel.
pub fn simulate<R: Rng + ?Sized>(
    model: &SdeModel,
    u: &StateVector,
    grid: &TimeGrid,
    output: &OutputConfig,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    model.check_grid(grid)?;
    output.check(model)?;
    if u.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: u.dim() });
    }
    let n = grid.n_steps;
    let rates: Vec<f64> = model.jumps.iter().map(|j| j.rate).collect();
    let mut psi = Vec::with_capacity(n + 1);
    let mut norm_sq = Vec::with_capacity(n + 1);
    let mut dw = Vec::with_capacity(n);
    let mut jumps = Vec::new();
    let mut output_x = Vec::with_capacity(n + 1);
    psi.push(u.clone());
    norm_sq.push(u.norm_sq());
    output_x.push(vec![0.0; output.n_outputs()]);
    for k in 0..n {
        let noise = draw_noise(model, grid.dt, rng);
        let next = StateVector::from_vector(step_raw(model, psi[k].vector(), grid.dt, &noise.dw, &noise.jumps));
        let dx = output.increment(grid.dt, &noise, &rates);
        let x: Vec<f64> = output_x[k].iter().zip(&dx).map(|(a, b)| a + b).collect();
        output_x.push(x);
        norm_sq.push(next.norm_sq());
        psi.push(next);
        for &m in &noise.jumps {
            jumps.push(JumpEvent { step: k, time: grid.time(k + 1), channel: m });
        }
        dw.push(noise.dw);
    }
    Ok(TrajectoryRecord { grid: *grid, psi, norm_sq, dw, jumps, output_x })
}

/// Re-integrates steps `from..to` from `start` with recorded noise. Returns
/// the states at `t_from, ..., t_to`.
pub fn replay(model: &SdeModel, start: &StateVector, dt: f64, noise: &[StepNoise], from: usize, to: usize) -> Result<Vec<StateVector>> {
    if from > to || to > noise.len() {
        return Err(Error::TrajectoryTooShort { needed: to, available: noise.len() });
    }
    let mut out = Vec::with_capacity(to - from + 1);
    out.push(start.clone());
    for k in from..to {
        let next = step(model, &out[k - from], dt, &noise[k].dw, &noise[k].jumps)?;
        out.push(next);
    }
    Ok(out)
}

/// Largest deviation between a one-pass path and restarts at every
/// intermediate grid time under the same noise.
pub fn flow_compose_check<R: Rng + ?Sized>(model: &SdeModel, u: &StateVector, grid: &TimeGrid, rng: &mut R) -> Result<f64> {
    let record = simulate(model, u, grid, &OutputConfig::default(), rng)?;
    let noise = record.noise_path();
    let mut worst: f64 = 0.0;
    for tau in 0..=grid.n_steps {
        let restarted = replay(model, &record.psi[tau], grid.dt, &noise, tau, grid.n_steps)?;
        for (a, b) in restarted.iter().zip(&record.psi[tau..]) {
            worst = worst.max(a.distance(b));
        }
    }
    Ok(worst)
}

/// Matrix of `ψ ↦ ψ_to` over steps `from..to` for a fixed noise path, built
/// column by column from basis vectors.
pub fn evolution_matrix(model: &SdeModel, dt: f64, noise: &[StepNoise], from: usize, to: usize) -> Result<Operator> {
    let d = model.dim();
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        let col = replay(model, &StateVector::basis(d, j), dt, noise, from, to)?.pop().unwrap();
        m.set_column(j, col.vector());
    }
    Operator::from_matrix(m)
}

/// Monte Carlo estimate of `E_P[|ψ_t><ψ_t|]` at every grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleEstimate {
    pub times: Vec<f64>,
    pub mean: Vec<Operator>,
    /// Entrywise standard error, `sqrt(var(Re) + var(Im)) / sqrt(n)`.
    pub std_err: Vec<DMatrix<f64>>,
    pub norm_sq_mean: Vec<f64>,
    pub norm_sq_se: Vec<f64>,
    pub n_traj: usize,
}

impl EnsembleEstimate {
    /// `(<i|ρ_k|i>, standard error)`.
    pub fn population(&self, k: usize, i: usize) -> (f64, f64) {
        (self.mean[k].get(i, i).re, self.std_err[k][(i, i)])
    }
}

struct Moments {
    sum: Vec<DMatrix<C64>>,
    sq_re: Vec<DMatrix<f64>>,
    sq_im: Vec<DMatrix<f64>>,
    norm: Vec<f64>,
    norm_sq: Vec<f64>,
}

impl Moments {
    fn new(points: usize, d: usize) -> Self {
        Self {
            sum: vec![DMatrix::zeros(d, d); points],
            sq_re: vec![DMatrix::zeros(d, d); points],
            sq_im: vec![DMatrix::zeros(d, d); points],
            norm: vec![0.0; points],
            norm_sq: vec![0.0; points],
        }
    }

    fn add_path(&mut self, psi: &[StateVector]) {
        for (k, v) in psi.iter().enumerate() {
            let v = v.vector();
            let rho = v * v.adjoint();
            self.sq_re[k] += rho.map(|z| z.re * z.re);
            self.sq_im[k] += rho.map(|z| z.im * z.im);
            self.sum[k] += rho;
            let n = v.norm_squared();
            self.norm[k] += n;
            self.norm_sq[k] += n * n;
        }
    }

    fn merge(&mut self, other: Moments) {
        for k in 0..self.sum.len() {
            self.sum[k] += &other.sum[k];
            self.sq_re[k] += &other.sq_re[k];
            self.sq_im[k] += &other.sq_im[k];
            self.norm[k] += other.norm[k];
            self.norm_sq[k] += other.norm_sq[k];
        }
    }
}

fn se(sum: f64, sum_sq: f64, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (var / nf).sqrt()
}

/// Parallel ensemble average over `n_traj` paths. Path `i` uses the stream
/// `parallel::trajectory_rng(master_seed, i)`; the result does not depend
/// on `workers`.
pub fn ensemble_state(
    model: &SdeModel,
    u: &StateVector,
    grid: &TimeGrid,
    n_traj: usize,
    master_seed: u64,
    workers: usize,
) -> Result<EnsembleEstimate> {
    if n_traj == 0 {
        return Err(Error::InvalidModel("n_traj must be at least 1".into()));
    }
    model.check_grid(grid)?;
    if u.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: u.dim() });
    }
    let points = grid.n_steps + 1;
    let d = model.dim();
    let no_output = OutputConfig::default();
    let m = parallel::chunked_reduce(
        n_traj,
        workers,
        || Moments::new(points, d),
        |acc, i| {
            let mut rng = parallel::trajectory_rng(master_seed, i as u64);
            let record = simulate(model, u, grid, &no_output, &mut rng).expect("inputs checked above");
            acc.add_path(&record.psi);
        },
        |a, b| a.merge(b),
    )?;
    let nf = n_traj as f64;
    let mut mean = Vec::with_capacity(points);
    let mut std_err = Vec::with_capacity(points);
    for k in 0..points {
        let avg = &m.sum[k] / C64::from(nf);
        std_err.push(DMatrix::from_fn(d, d, |i, j| {
            let s = m.sum[k][(i, j)];
            let re = se(s.re, m.sq_re[k][(i, j)], n_traj);
            let im = se(s.im, m.sq_im[k][(i, j)], n_traj);
            (re * re + im * im).sqrt()
        }));
        mean.push(Operator::from_matrix(avg)?.hermitian_part());
    }
    Ok(EnsembleEstimate {
        times: grid.times(),
        mean,
        std_err,
        norm_sq_mean: m.norm.iter().map(|s| s / nf).collect(),
        norm_sq_se: m.norm.iter().zip(&m.norm_sq).map(|(&s, &q)| se(s, q, n_traj)).collect(),
        n_traj,
    })
}

/// Sample mean and standard error of `f(record)` over `n_traj` paths,
/// seeded and reduced like [`ensemble_state`].
pub fn ensemble_mean<F>(
    model: &SdeModel,
    u: &StateVector,
    grid: &TimeGrid,
    n_traj: usize,
    master_seed: u64,
    workers: usize,
    f: F,
) -> Result<(f64, f64)>
where
    F: Fn(&TrajectoryRecord) -> f64 + Sync + Send,
{
    model.check_grid(grid)?;
    let no_output = OutputConfig::default();
    let (sum, sum_sq) = parallel::chunked_reduce(
        n_traj,
        workers,
        || (0.0, 0.0),
        |acc, i| {
            let mut rng = parallel::trajectory_rng(master_seed, i as u64);
            let v = simulate(model, u, grid, &no_output, &mut rng).map(|r| f(&r)).unwrap_or(f64::NAN);
            acc.0 += v;
            acc.1 += v * v;
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
        },
    )?;
    Ok((sum / n_traj as f64, se(sum, sum_sq, n_traj)))
}

/// Normalized posterior states with their likelihood weights.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedTrajectory {
    /// `(ψ_k / ||ψ_k||, ||ψ_k||²)` up to the first vanished point.
    pub points: Vec<(StateVector, f64)>,
    /// First grid index whose norm vanished, if any.
    pub vanished_at: Option<usize>,
}

pub fn normalized_trajectory(record: &TrajectoryRecord) -> NormalizedTrajectory {
    let floor = VANISHED_NORM * record.norm_sq[0];
    let mut points = Vec::with_capacity(record.psi.len());
    for (k, (psi, &w)) in record.psi.iter().zip(&record.norm_sq).enumerate() {
        if !(w > floor) {
            return NormalizedTrajectory { points, vanished_at: Some(k) };
        }
        points.push((psi.scale(C64::from(1.0 / w.sqrt())), w));
    }
    NormalizedTrajectory { points, vanished_at: None }
}

/// `(1/N) Σ_traj w_k |ψ̂_k><ψ̂_k|` per grid time, plus the number of
/// trajectories excluded for a vanished norm.
pub fn weighted_ensemble(records: &[TrajectoryRecord]) -> Result<(Vec<Operator>, usize)> {
    let first = records.first().ok_or(Error::InvalidModel("no trajectories".into()))?;
    let d = first.psi[0].dim();
    let mut acc = vec![Operator::zeros(d); first.psi.len()];
    let mut excluded = 0;
    for r in records {
        let nt = normalized_trajectory(r);
        if nt.vanished_at.is_some() {
            excluded += 1;
            continue;
        }
        for (k, (psi, w)) in nt.points.iter().enumerate() {
            acc[k] = &acc[k] + &psi.projector().scale_real(*w);
        }
    }
    let n = records.len() as f64;
    Ok((acc.into_iter().map(|a| a.scale_real(1.0 / n)).collect(), excluded))
}
