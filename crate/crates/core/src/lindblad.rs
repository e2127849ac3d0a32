//! Master-equation oracle for the unconditional dynamics.
//!
//! `dρ/dt = -i[H, ρ] + Σ_j r_j (C_j ρ C_j* - ½{C_j* C_j, ρ})`
//!
//! integrated with classical RK4, plus a dense superoperator exponential for
//! cross-checks on small systems.

use nalgebra::{DMatrix, DVector};

use crate::chain::TimeGrid;
use crate::error::{Error, Result};
use crate::linalg::{trace_distance, DensityOperator, Operator, StateVector, C64};
use crate::sde::{self, SdeModel};

/// Largest admissible `h * (2||H|| + 2 Σ r ||C||²)` for one RK4 substep.
pub const MAX_STEP_NORM: f64 = 1.0;
pub const TRACE_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct LindbladGenerator {
    h: Operator,
    collapse: Vec<(Operator, f64)>,
}

impl LindbladGenerator {
    pub fn new(h: Operator, collapse: Vec<(Operator, f64)>) -> Result<Self> {
        let residual = h.hermitian_residual();
        if residual > 1e-10 {
            return Err(Error::NotHermitian { residual });
        }
        for (c, r) in &collapse {
            if c.dim() != h.dim() {
                return Err(Error::DimensionMismatch { expected: h.dim(), found: c.dim() });
            }
            if !(*r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidModel(format!("collapse rate must be nonnegative, got {r}")));
            }
        }
        Ok(Self { h, collapse })
    }

    pub fn zero(d: usize) -> Self {
        Self { h: Operator::zeros(d), collapse: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.h
    }

    pub fn collapse(&self) -> &[(Operator, f64)] {
        &self.collapse
    }

    pub fn apply(&self, rho: &Operator) -> Operator {
        let i = C64::new(0.0, 1.0);
        let mut out = (&(&self.h * rho) - &(rho * &self.h)).scale(-i);
        for (c, r) in &self.collapse {
            let cdc = &c.adjoint() * c;
            let anti = &(&cdc * rho) + &(rho * &cdc);
            out = &out + &(&c.sandwich(rho) - &anti.scale_real(0.5)).scale_real(*r);
        }
        out
    }

    /// Cheap upper bound on the generator norm.
    pub fn norm_bound(&self) -> f64 {
        2.0 * self.h.operator_norm() + self.collapse.iter().map(|(c, r)| 2.0 * r * c.operator_norm().powi(2)).sum::<f64>()
    }

    fn rk4_step(&self, rho: &Operator, h: f64) -> Operator {
        let k1 = self.apply(rho);
        let k2 = self.apply(&(rho + &k1.scale_real(h / 2.0)));
        let k3 = self.apply(&(rho + &k2.scale_real(h / 2.0)));
        let k4 = self.apply(&(rho + &k3.scale_real(h)));
        let incr = &(&(&k1 + &k2.scale_real(2.0)) + &k3.scale_real(2.0)) + &k4;
        rho + &incr.scale_real(h / 6.0)
    }

    /// `ρ(t_k)` for `k = 0..=n`, with `refinement` RK4 substeps per grid step.
    pub fn evolve(&self, rho0: &DensityOperator, grid: &TimeGrid, refinement: usize) -> Result<Vec<DensityOperator>> {
        if rho0.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rho0.dim() });
        }
        let refinement = refinement.max(1);
        let h = grid.dt / refinement as f64;
        let value = h * self.norm_bound();
        if value > MAX_STEP_NORM {
            return Err(Error::GridTooCoarse { value, limit: MAX_STEP_NORM });
        }
        let mut out = Vec::with_capacity(grid.n_steps + 1);
        out.push(rho0.clone());
        let mut rho = rho0.op().clone();
        for _ in 0..grid.n_steps {
            for _ in 0..refinement {
                rho = self.rk4_step(&rho, h);
            }
            out.push(DensityOperator::with_tolerance(rho.clone(), TRACE_TOL, PSD_TOL)?);
        }
        Ok(out)
    }

    /// Trace distance between evolving straight to `t_n` and restarting at
    /// `t_split`.
    pub fn semigroup_check(&self, rho0: &DensityOperator, grid: &TimeGrid, split: usize) -> Result<f64> {
        if split > grid.n_steps {
            return Err(Error::InvalidModel(format!("split step {split} beyond grid of {} steps", grid.n_steps)));
        }
        let direct = self.evolve(rho0, grid, 1)?;
        let mid = direct[split].clone();
        let tail = TimeGrid { n_steps: grid.n_steps - split, dt: grid.dt };
        let restarted = if tail.n_steps == 0 { vec![mid] } else { self.evolve(&mid, &tail, 1)? };
        trace_distance(direct.last().unwrap(), restarted.last().unwrap())
    }

    /// Column-stacked superoperator, `vec(L[ρ]) = S vec(ρ)`.
    pub fn superoperator(&self) -> DMatrix<C64> {
        let d = self.dim();
        let id = DMatrix::<C64>::identity(d, d);
        let h = self.h.matrix();
        let i = C64::new(0.0, 1.0);
        let mut s = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-i);
        for (c, r) in &self.collapse {
            let c = c.matrix();
            let cdc = c.adjoint() * c;
            let term = c.conjugate().kronecker(c) - (id.kronecker(&cdc) + cdc.transpose().kronecker(&id)) * C64::from(0.5);
            s += term * C64::from(*r);
        }
        s
    }

    /// `exp(t S)` applied to `ρ`.
    pub fn propagate_exact(&self, rho: &Operator, t: f64) -> Result<Operator> {
        let d = self.dim();
        let e = (self.superoperator() * C64::from(t)).exp();
        let v = e * DVector::from_column_slice(rho.matrix().as_slice());
        Operator::from_matrix(DMatrix::from_column_slice(d, d, v.as_slice()))
    }

    /// Smallest eigenvalue of the Choi matrix of `exp(t S)`.
    pub fn choi_min_eigenvalue(&self, t: f64) -> Result<f64> {
        let d = self.dim();
        let mut choi = Operator::zeros(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut e = DMatrix::zeros(d, d);
                e[(i, j)] = C64::from(1.0);
                let e = Operator::from_matrix(e)?;
                let image = self.propagate_exact(&e, t)?;
                choi = &choi + &e.kron(&image);
            }
        }
        Ok(choi.hermitian_part().hermitian_eigenvalues()[0])
    }
}

/// Generator of `E[|ψ_t><ψ_t|]` for the linear SSE: diffusive operators
/// `L_k` at rate 1 and jump operators `J_m` at rate `γ_m`, Hamiltonian `H`.
/// The compensator `-γ_m J_m ψ dt` cancels the first-order jump terms, so
/// the collapse operator is `J_m` itself.
pub fn derive_generator(model: &SdeModel) -> Result<LindbladGenerator> {
    let residual = model.k_residual();
    if residual > 1e-10 {
        return Err(Error::InvalidModel(format!("K + K* residual {residual:e}")));
    }
    let collapse = model
        .diffusive()
        .iter()
        .map(|l| (l.clone(), 1.0))
        .chain(model.jumps().iter().map(|j| (j.op.clone(), j.rate)))
        .collect();
    LindbladGenerator::new(model.hamiltonian().clone(), collapse)
}

/// Exact `E[ψ'ψ'*]` after one Euler step from `ψ`, computed from
/// [`sde::step`] itself: jump subsets are enumerated with their Bernoulli
/// probabilities and the Gaussian increments are integrated by the
/// symmetric cubature `±sqrt(n dt) e_k`, which is exact for quadratic
/// integrands.
pub fn one_step_expectation(model: &SdeModel, psi: &StateVector, dt: f64) -> Result<Operator> {
    let n = model.diffusive().len();
    let nodes: Vec<Vec<f64>> = if n == 0 {
        vec![vec![]]
    } else {
        let a = (n as f64 * dt).sqrt();
        (0..n).flat_map(|k| [a, -a].map(|s| (0..n).map(|l| if l == k { s } else { 0.0 }).collect())).collect()
    };
    let m = model.jumps().len();
    if m > 16 {
        return Err(Error::EnumerationCap { count: 1 << m.min(63), cap: 1 << 16 });
    }
    let mut acc = Operator::zeros(model.dim());
    for mask in 0..(1usize << m) {
        let subset: Vec<usize> = (0..m).filter(|b| mask & (1 << b) != 0).collect();
        let p: f64 = model
            .jumps()
            .iter()
            .enumerate()
            .map(|(b, j)| if subset.contains(&b) { j.rate * dt } else { 1.0 - j.rate * dt })
            .product();
        for dw in &nodes {
            let next = sde::step(model, psi, dt, dw, &subset)?;
            acc = &acc + &next.projector().scale_real(p / nodes.len() as f64);
        }
    }
    Ok(acc)
}

/// `||(E[ψ'ψ'*] - ψψ*) / dt - L[ψψ*]||_F`, which is `O(dt)` exactly when
/// `gen` is the generator of the averaged dynamics.
pub fn ito_consistency(model: &SdeModel, gen: &LindbladGenerator, psi: &StateVector, dt: f64) -> Result<f64> {
    let rho = psi.projector();
    let e = one_step_expectation(model, psi, dt)?;
    Ok((&(&e - &rho).scale_real(1.0 / dt) - &gen.apply(&rho)).frobenius_norm())
}
