//! Discrete-time measurement chains.
//!
//! Time runs on a uniform grid `t_k = k dt`. At step `k` (0-based) the kernel
//! receives the full outcome history `x_0 .. x_{k-1}` and returns, for every
//! symbol `a` of a finite alphabet, an operator `V_k(a|h)` and a conditional
//! input probability `p_k(a|h)`. The stochastic evolution operator over
//! steps `from..to` along a record `x` is the ordered product
//! `V_{to-1}(x_{to-1}|..) ... V_from(x_from|..)`, which is a cocycle by
//! construction.
//!
//! Exhaustive checks enumerate `|A|^n` records and are capped at
//! [`ENUMERATION_CAP`]; [`validate_chain`] switches to a Monte Carlo battery
//! above that.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral, trace_distance_ops, DensityOperator, Operator, StateVector, DEGENERACY_TOL};
use crate::report::ValidationReport;

pub const ENUMERATION_CAP: usize = 4096;
pub const STEP_TOL: f64 = 1e-10;
pub const PROB_TOL: f64 = 1e-12;

pub type OutcomeTrajectory = Vec<usize>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub n_steps: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize, dt: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidModel("grid needs at least one step".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidModel(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { n_steps, dt })
    }

    /// Grid covering `(0, t_end]` with `n_steps` steps.
    pub fn spanning(t_end: f64, n_steps: usize) -> Result<Self> {
        Self::new(n_steps, t_end / n_steps as f64)
    }

    /// `t_0 = 0, t_1, ..., t_n`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps)
    }

    /// Same span with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Self {
        Self { n_steps: self.n_steps * factor, dt: self.dt / factor as f64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEntry {
    #[serde(rename = "V")]
    pub op: Operator,
    #[serde(rename = "p")]
    pub prob: f64,
}

impl KernelEntry {
    pub fn new(op: Operator, prob: f64) -> Self {
        Self { op, prob }
    }
}

/// Step kernel provider.
#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    /// Identical entries at every step.
    Repeated(Vec<KernelEntry>),
    /// Entries indexed by step; history is ignored.
    PerStep(Vec<Vec<KernelEntry>>),
    /// Projective measurement in the first basis at step 0; afterwards in
    /// `after_zero` or `after_other` depending on the previous outcome.
    HistoryDependent {
        first: Vec<KernelEntry>,
        after_zero: Vec<KernelEntry>,
        after_other: Vec<KernelEntry>,
    },
}

impl Kernel {
    /// `V(a) = sqrt(n) P_a`, `p(a) = 1/n` for the spectral projectors of `z`.
    pub fn projective(z: &Operator) -> Result<Self> {
        Ok(Self::Repeated(projective_entries(z)?))
    }

    /// `V(a) = sqrt(n) K_a`, `p(a) = 1/n`.
    pub fn kraus_repeated(kraus: &[Operator]) -> Self {
        Self::Repeated(kraus_entries(kraus))
    }

    /// Identity operator with the given classical noise.
    pub fn identity(d: usize, probs: &[f64]) -> Self {
        Self::Repeated(probs.iter().map(|&p| KernelEntry::new(Operator::identity(d), p)).collect())
    }

    /// Qubit demo: Z measurement first, then Z again after outcome 0 and X
    /// after outcome 1.
    pub fn history_dependent_demo() -> Self {
        let z = projective_entries(&Operator::pauli_z()).unwrap();
        let x = projective_entries(&Operator::pauli_x()).unwrap();
        Self::HistoryDependent { first: z.clone(), after_zero: z, after_other: x }
    }

    pub fn entries(&self, step: usize, history: &[usize]) -> &[KernelEntry] {
        match self {
            Self::Repeated(e) => e,
            Self::PerStep(steps) => &steps[step.min(steps.len() - 1)],
            Self::HistoryDependent { first, after_zero, after_other } => match history.last() {
                None => first,
                Some(0) => after_zero,
                Some(_) => after_other,
            },
        }
    }

    pub fn is_history_dependent(&self) -> bool {
        matches!(self, Self::HistoryDependent { .. })
    }

    fn all_entry_sets(&self) -> Vec<&Vec<KernelEntry>> {
        match self {
            Self::Repeated(e) => vec![e],
            Self::PerStep(steps) => steps.iter().collect(),
            Self::HistoryDependent { first, after_zero, after_other } => vec![first, after_zero, after_other],
        }
    }
}

fn projective_entries(z: &Operator) -> Result<Vec<KernelEntry>> {
    let decomposition = spectral(z, DEGENERACY_TOL)?;
    let n = decomposition.len();
    let scale = (n as f64).sqrt();
    Ok(decomposition.projectors.iter().map(|p| KernelEntry::new(p.scale_real(scale), 1.0 / n as f64)).collect())
}

fn kraus_entries(kraus: &[Operator]) -> Vec<KernelEntry> {
    let n = kraus.len();
    let scale = (n as f64).sqrt();
    kraus.iter().map(|k| KernelEntry::new(k.scale_real(scale), 1.0 / n as f64)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainModel {
    grid: TimeGrid,
    kernel: Kernel,
    markov: bool,
    dim: usize,
    alphabet: usize,
}

impl ChainModel {
    /// Shape checks only; numerical consistency is reported by
    /// [`validate_chain`].
    pub fn new(grid: TimeGrid, kernel: Kernel, markov: bool) -> Result<Self> {
        let sets = kernel.all_entry_sets();
        let first = sets.first().and_then(|s| s.first()).ok_or(Error::InvalidModel("kernel has no entries".into()))?;
        let dim = first.op.dim();
        let alphabet = sets[0].len();
        for set in &sets {
            if set.len() != alphabet {
                return Err(Error::InvalidModel("kernel alphabet size varies between steps".into()));
            }
            if let Some(e) = set.iter().find(|e| e.op.dim() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, found: e.op.dim() });
            }
        }
        if let Kernel::PerStep(steps) = &kernel {
            if steps.len() != grid.n_steps {
                return Err(Error::InvalidModel(format!(
                    "per-step kernel has {} steps, grid has {}",
                    steps.len(),
                    grid.n_steps
                )));
            }
        }
        if markov && kernel.is_history_dependent() {
            return Err(Error::InvalidModel("history-dependent kernel declared Markov".into()));
        }
        Ok(Self { grid, kernel, markov, dim, alphabet })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn is_markov(&self) -> bool {
        self.markov
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    pub fn entries(&self, step: usize, history: &[usize]) -> &[KernelEntry] {
        self.kernel.entries(step, history)
    }

    /// Number of records of length `len`, saturating.
    pub fn record_count(&self, len: usize) -> usize {
        (0..len).fold(1usize, |acc, _| acc.saturating_mul(self.alphabet))
    }

    /// All records of length `len` in lexicographic order.
    pub fn enumerate(&self, len: usize) -> Result<Vec<OutcomeTrajectory>> {
        let count = self.record_count(len);
        if count > ENUMERATION_CAP {
            return Err(Error::EnumerationCap { count, cap: ENUMERATION_CAP });
        }
        Ok(enumerate_records(self.alphabet, len))
    }

    fn check_record(&self, x: &[usize], needed: usize) -> Result<()> {
        if x.len() < needed {
            return Err(Error::TrajectoryTooShort { needed, available: x.len() });
        }
        if needed > self.grid.n_steps {
            return Err(Error::TrajectoryTooShort { needed, available: self.grid.n_steps });
        }
        if let Some(&a) = x[..needed].iter().find(|&&a| a >= self.alphabet) {
            return Err(Error::InvalidModel(format!("symbol {a} outside alphabet of size {}", self.alphabet)));
        }
        Ok(())
    }

    /// `V_from^to(x)`; the identity when `from == to`.
    pub fn evolution_operator(&self, x: &[usize], from: usize, to: usize) -> Result<Operator> {
        if from > to {
            return Err(Error::InvalidModel(format!("from_step {from} exceeds to_step {to}")));
        }
        self.check_record(x, to)?;
        let mut v = Operator::identity(self.dim);
        for k in from..to {
            v = &self.entries(k, &x[..k])[x[k]].op * &v;
        }
        Ok(v)
    }

    /// `prod_k p_k(x_k | x_0..x_{k-1})` over steps `from..to`.
    pub fn input_weight(&self, x: &[usize], from: usize, to: usize) -> Result<f64> {
        self.check_record(x, to)?;
        Ok((from..to).map(|k| self.entries(k, &x[..k])[x[k]].prob).product())
    }

    /// Output-law probability of the whole record `x`.
    pub fn trajectory_probability(&self, psi0: &StateVector, x: &[usize]) -> Result<f64> {
        let v = self.evolution_operator(x, 0, x.len())?;
        Ok(v.apply(psi0).norm_sq() * self.input_weight(x, 0, x.len())?)
    }

    /// Unnormalized posterior vectors `phi_k = V_0^k(x) psi0`, `k = 0..len(x)`.
    pub fn posterior_trajectory(&self, psi0: &StateVector, x: &[usize]) -> Result<Vec<StateVector>> {
        self.check_dim(psi0.dim())?;
        self.check_record(x, x.len())?;
        let mut out = Vec::with_capacity(x.len() + 1);
        out.push(psi0.clone());
        for k in 0..x.len() {
            let next = self.entries(k, &x[..k])[x[k]].op.apply(&out[k]);
            out.push(next);
        }
        Ok(out)
    }

    /// Samples a full record from the output law, one step at a time, with
    /// `P(a) = p_k(a|h) ||V_k(a|h) phi||^2 / ||phi||^2`.
    pub fn sample_trajectory<R: Rng + ?Sized>(&self, psi0: &StateVector, rng: &mut R) -> (OutcomeTrajectory, Vec<StateVector>) {
        let mut record = Vec::with_capacity(self.grid.n_steps);
        let mut states = Vec::with_capacity(self.grid.n_steps + 1);
        states.push(psi0.clone());
        for k in 0..self.grid.n_steps {
            let phi = &states[k];
            let norm_sq = phi.norm_sq();
            let candidates: Vec<(StateVector, f64)> = self
                .entries(k, &record)
                .iter()
                .map(|e| {
                    let next = e.op.apply(phi);
                    let w = e.prob * next.norm_sq() / norm_sq;
                    (next, w)
                })
                .collect();
            let total: f64 = candidates.iter().map(|c| c.1).sum();
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut choice = candidates.len() - 1;
            for (a, (_, w)) in candidates.iter().enumerate() {
                acc += w;
                if u < acc {
                    choice = a;
                    break;
                }
            }
            // skip zero-weight symbols that float rounding could land on
            while candidates[choice].1 == 0.0 && choice > 0 {
                choice -= 1;
            }
            record.push(choice);
            states.push(candidates.into_iter().nth(choice).unwrap().0);
        }
        (record, states)
    }

    /// Samples a record from the input measure alone (ignores the state).
    pub fn sample_reference<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> OutcomeTrajectory {
        let mut record = Vec::with_capacity(len);
        for k in 0..len {
            let entries = self.entries(k, &record);
            let u = rng.random::<f64>() * entries.iter().map(|e| e.prob).sum::<f64>();
            let mut acc = 0.0;
            let mut choice = entries.len() - 1;
            for (a, e) in entries.iter().enumerate() {
                acc += e.prob;
                if u < acc {
                    choice = a;
                    break;
                }
            }
            record.push(choice);
        }
        record
    }

    /// `M_0^t(B) = sum_{x in B} V* V prod p` for records of one common length.
    pub fn pov_measure(&self, up_to: usize, subset: &[OutcomeTrajectory]) -> Result<Operator> {
        let mut m = Operator::zeros(self.dim);
        for x in subset {
            if x.len() != up_to {
                return Err(Error::InvalidModel(format!("record of length {} in a set of length {up_to}", x.len())));
            }
            let v = self.evolution_operator(x, 0, up_to)?;
            m = &m + &(&v.adjoint() * &v).scale_real(self.input_weight(x, 0, up_to)?);
        }
        Ok(m)
    }

    /// Largest deviation from the martingale identity
    /// `sum_z V_0^t(yz)* V_0^t(yz) p(z|y) = V_0^tau(y)* V_0^tau(y)` over all
    /// prefixes `y` of length `tau`.
    pub fn compatibility_check(&self, tau: usize, t: usize) -> Result<f64> {
        if tau > t || t > self.grid.n_steps {
            return Err(Error::InvalidModel(format!("need tau <= t <= n, got tau={tau} t={t}")));
        }
        let count = self.record_count(t);
        if count > ENUMERATION_CAP {
            return Err(Error::EnumerationCap { count, cap: ENUMERATION_CAP });
        }
        let mut worst: f64 = 0.0;
        for y in enumerate_records(self.alphabet, tau) {
            let vy = self.evolution_operator(&y, 0, tau)?;
            let target = &vy.adjoint() * &vy;
            let mut sum = Operator::zeros(self.dim);
            for z in enumerate_records(self.alphabet, t - tau) {
                let x: Vec<usize> = y.iter().chain(&z).copied().collect();
                let v = self.evolution_operator(&x, 0, t)?;
                sum = &sum + &(&v.adjoint() * &v).scale_real(self.input_weight(&x, tau, t)?);
            }
            worst = worst.max((&sum - &target).frobenius_norm());
        }
        Ok(worst)
    }

    /// `sum_{x in B} V_from^to(past x) rho V_from^to(past x)* p(x | past)`,
    /// where `B` holds continuations of length `to - from`.
    pub fn conditional_instrument(
        &self,
        past: &[usize],
        from: usize,
        to: usize,
        subset: &[OutcomeTrajectory],
        rho: &Operator,
    ) -> Result<Operator> {
        if past.len() != from {
            return Err(Error::InvalidModel(format!("past has length {}, expected {from}", past.len())));
        }
        if from > to {
            return Err(Error::InvalidModel(format!("from_step {from} exceeds to_step {to}")));
        }
        self.check_dim(rho.dim())?;
        let mut out = Operator::zeros(self.dim);
        let mut full = past.to_vec();
        for x in subset {
            if x.len() != to - from {
                return Err(Error::InvalidModel(format!("continuation of length {} for {} steps", x.len(), to - from)));
            }
            full.truncate(from);
            full.extend_from_slice(x);
            let v = self.evolution_operator(&full, from, to)?;
            out = &out + &v.sandwich(rho).scale_real(self.input_weight(&full, from, to)?);
        }
        Ok(out)
    }

    /// Unconditional instrument `M_0^t(B)[rho]`.
    pub fn instrument(&self, up_to: usize, subset: &[OutcomeTrajectory], rho: &Operator) -> Result<Operator> {
        self.conditional_instrument(&[], 0, up_to, subset, rho)
    }

    /// Dynamical map `M_from^to(Omega)[rho]`, Markov models only.
    pub fn unconditional_map(&self, from: usize, to: usize, rho: &DensityOperator) -> Result<DensityOperator> {
        if !self.markov {
            return Err(Error::NotMarkov("the unconditional map is conditional on the past for this kernel".into()));
        }
        if from > to || to > self.grid.n_steps {
            return Err(Error::InvalidModel(format!("need from <= to <= n, got {from}..{to}")));
        }
        self.check_dim(rho.dim())?;
        let history = vec![0; to];
        let mut state = rho.op().clone();
        for k in from..to {
            state = self
                .entries(k, &history[..k])
                .iter()
                .fold(Operator::zeros(self.dim), |acc, e| &acc + &e.op.sandwich(&state).scale_real(e.prob));
        }
        DensityOperator::new(state.hermitian_part())
    }

    /// `M_0^t(Omega)[rho]` computed by propagating one unnormalized density
    /// operator per prefix, step by step through the conditional
    /// one-step instruments.
    pub fn composed_instrument(&self, up_to: usize, rho: &Operator) -> Result<Operator> {
        let count = self.record_count(up_to);
        if count > ENUMERATION_CAP {
            return Err(Error::EnumerationCap { count, cap: ENUMERATION_CAP });
        }
        let all_symbols: Vec<OutcomeTrajectory> = (0..self.alphabet).map(|a| vec![a]).collect();
        let mut layer: Vec<(OutcomeTrajectory, Operator)> = vec![(Vec::new(), rho.clone())];
        for k in 0..up_to {
            let mut next = Vec::with_capacity(layer.len() * self.alphabet);
            for (prefix, eta) in &layer {
                for symbol in &all_symbols {
                    let out = self.conditional_instrument(prefix, k, k + 1, std::slice::from_ref(symbol), eta)?;
                    let mut p = prefix.clone();
                    p.push(symbol[0]);
                    next.push((p, out));
                }
            }
            layer = next;
        }
        Ok(layer.into_iter().fold(Operator::zeros(self.dim), |acc, (_, eta)| &acc + &eta))
    }

    /// `sum_x |phi_x><phi_x| prod p` over all records of length `up_to`.
    pub fn averaged_posterior(&self, psi0: &StateVector, up_to: usize) -> Result<Operator> {
        let mut acc = Operator::zeros(self.dim);
        for x in self.enumerate(up_to)? {
            let phi = self.evolution_operator(&x, 0, up_to)?.apply(psi0);
            acc = &acc + &phi.projector().scale_real(self.input_weight(&x, 0, up_to)?);
        }
        Ok(acc)
    }

    /// Largest pairwise trace distance between `M_from^to(Omega | past)[rho]`
    /// for the supplied pasts. Zero for Markov kernels.
    pub fn markov_independence_residual(&self, pasts: &[OutcomeTrajectory], from: usize, to: usize, rho: &Operator) -> Result<f64> {
        let all = self.enumerate(to - from)?;
        let outs: Vec<Operator> =
            pasts.iter().map(|p| self.conditional_instrument(p, from, to, &all, rho)).collect::<Result<_>>()?;
        let mut worst: f64 = 0.0;
        for i in 0..outs.len() {
            for j in i + 1..outs.len() {
                worst = worst.max(trace_distance_ops(&outs[i], &outs[j])?);
            }
        }
        Ok(worst)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: d });
        }
        Ok(())
    }
}

pub fn enumerate_records(alphabet: usize, len: usize) -> Vec<OutcomeTrajectory> {
    let mut out = vec![Vec::with_capacity(len)];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..alphabet).map(move |a| {
                    let mut p = prefix.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}

fn step_residuals(entries: &[KernelEntry], d: usize) -> (f64, f64) {
    let prob: f64 = entries.iter().map(|e| e.prob).sum();
    let m = entries.iter().fold(Operator::zeros(d), |acc, e| &acc + &(&e.op.adjoint() * &e.op).scale_real(e.prob));
    ((prob - 1.0).abs(), (&m - &Operator::identity(d)).frobenius_norm())
}

/// Full invariant battery. Exhaustive when `|A|^n <= ENUMERATION_CAP`,
/// Monte Carlo with 3-sigma tolerances otherwise.
pub fn validate_chain<R: Rng + ?Sized>(m: &ChainModel, rng: &mut R) -> ValidationReport {
    if m.record_count(m.n_steps()) <= ENUMERATION_CAP {
        validate_exhaustive(m, rng)
    } else {
        validate_monte_carlo(m, 2000, rng)
    }
}

fn validate_exhaustive<R: Rng + ?Sized>(m: &ChainModel, rng: &mut R) -> ValidationReport {
    let n = m.n_steps();
    let d = m.dim();
    let mut report = ValidationReport { mode: Some("enumeration".into()), checks: Vec::new() };

    let (mut worst_p, mut worst_v) = (0.0f64, 0.0f64);
    for k in 0..n {
        for h in enumerate_records(m.alphabet_size(), k) {
            let (rp, rv) = step_residuals(m.entries(k, &h), d);
            worst_p = worst_p.max(rp);
            worst_v = worst_v.max(rv);
        }
    }
    report.push("step_probability_normalization", worst_p, PROB_TOL);
    report.push("step_operator_normalization", worst_v, STEP_TOL);

    let psi0 = crate::fixtures::random_state(d, rng);
    let rho0 = psi0.projector();
    let mut pov_worst: f64 = 0.0;
    let mut norm_worst: f64 = 0.0;
    let mut cocycle_worst: f64 = 0.0;
    let mut averaging_worst: f64 = 0.0;
    let mut composition_worst: f64 = 0.0;
    let mut boundary_worst: f64 = 0.0;
    for k in 0..=n {
        let records = enumerate_records(m.alphabet_size(), k);
        let pov = m.pov_measure(k, &records).expect("enumerated records are valid");
        pov_worst = pov_worst.max((&pov - &Operator::identity(d)).frobenius_norm());
        let total: f64 = records.iter().map(|x| m.trajectory_probability(&psi0, x).unwrap()).sum();
        norm_worst = norm_worst.max((total - 1.0).abs());
        let averaged = m.averaged_posterior(&psi0, k).unwrap();
        let composed = m.composed_instrument(k, &rho0).unwrap();
        averaging_worst = averaging_worst.max(trace_distance_ops(&averaged, &composed).unwrap());
        if m.is_markov() {
            let map = m.unconditional_map(0, k, &DensityOperator::pure(&psi0).unwrap()).unwrap();
            averaging_worst = averaging_worst.max(trace_distance_ops(&averaged, map.op()).unwrap());
        }
    }
    for x in enumerate_records(m.alphabet_size(), n) {
        for tau in 0..=n {
            boundary_worst = boundary_worst.max((&m.evolution_operator(&x, tau, tau).unwrap() - &Operator::identity(d)).frobenius_norm());
            for s in tau..=n {
                let left = m.evolution_operator(&x, s, n).unwrap();
                let right = m.evolution_operator(&x, tau, s).unwrap();
                let direct = m.evolution_operator(&x, tau, n).unwrap();
                cocycle_worst = cocycle_worst.max((&direct - &(&left * &right)).frobenius_norm());
            }
        }
    }
    let all_n = enumerate_records(m.alphabet_size(), n);
    let direct = m.instrument(n, &all_n, &rho0).unwrap();
    for tau in 0..=n {
        let tail = enumerate_records(m.alphabet_size(), n - tau);
        let mut composed = Operator::zeros(d);
        for y in enumerate_records(m.alphabet_size(), tau) {
            let head = m.instrument(tau, std::slice::from_ref(&y), &rho0).unwrap();
            composed = &composed + &m.conditional_instrument(&y, tau, n, &tail, &head).unwrap();
        }
        composition_worst = composition_worst.max((&direct - &composed).frobenius_norm());
    }
    let mut martingale_worst: f64 = 0.0;
    for t in 0..=n {
        for tau in 0..=t {
            martingale_worst = martingale_worst.max(m.compatibility_check(tau, t).unwrap());
        }
    }

    report.push("pov_normalization", pov_worst, STEP_TOL);
    report.push("posterior_normalization", norm_worst, STEP_TOL);
    report.push("cocycle", cocycle_worst, 1e-13);
    report.push("boundary_identity", boundary_worst, 0.0);
    report.push("martingale_compatibility", martingale_worst, STEP_TOL);
    report.push("instrument_composition", composition_worst, STEP_TOL);
    report.push("posterior_averaging", averaging_worst, STEP_TOL);
    if m.is_markov() {
        let pasts: Vec<OutcomeTrajectory> = (0..4).map(|_| m.sample_reference(1.min(n), rng)).collect();
        if n >= 2 {
            let r = m.markov_independence_residual(&pasts, 1, n, &rho0).unwrap();
            report.push("markov_independence", r, 1e-12);
        }
    }
    report
}

fn validate_monte_carlo<R: Rng + ?Sized>(m: &ChainModel, samples: usize, rng: &mut R) -> ValidationReport {
    let n = m.n_steps();
    let d = m.dim();
    let mut report = ValidationReport { mode: Some("monte-carlo".into()), checks: Vec::new() };
    let psi0 = crate::fixtures::random_state(d, rng);
    let (mut worst_p, mut worst_v, mut cocycle_worst) = (0.0f64, 0.0f64, 0.0f64);
    let mut weights = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = m.sample_reference(n, rng);
        for k in 0..n {
            let (rp, rv) = step_residuals(m.entries(k, &x[..k]), d);
            worst_p = worst_p.max(rp);
            worst_v = worst_v.max(rv);
        }
        let s = rng.random_range(0..=n);
        let direct = m.evolution_operator(&x, 0, n).unwrap();
        let split = &m.evolution_operator(&x, s, n).unwrap() * &m.evolution_operator(&x, 0, s).unwrap();
        cocycle_worst = cocycle_worst.max((&direct - &split).frobenius_norm());
        weights.push(direct.apply(&psi0).norm_sq());
    }
    let mean = weights.iter().sum::<f64>() / samples as f64;
    let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    let se = (var / samples as f64).sqrt();
    report.push("step_probability_normalization", worst_p, PROB_TOL).note("sampled histories");
    report.push("step_operator_normalization", worst_v, STEP_TOL).note("sampled histories");
    report.push("cocycle", cocycle_worst, 1e-13).note("sampled records");
    report.push("likelihood_mean", (mean - 1.0).abs(), 3.0 * se + 1e-12).note(format!("{samples} reference samples, 3 standard errors"));
    report
}
