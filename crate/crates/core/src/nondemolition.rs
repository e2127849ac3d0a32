//! Repeated-interaction measurement model.
//!
//! A system of dimension `d` meets fresh probes of dimension `p`, all
//! prepared in `f`, one per step. Step `k` (1-based) applies
//! `E_k = U_step` on system ⊗ probe `k`, optionally preceded by a coupling
//! `W` on system ⊗ probe `k-1` (the recoupled negative control). The global
//! space is system ⊗ probe_1 ⊗ ... ⊗ probe_n with the system as the most
//! significant factor, and `U(t, τ) = E_t ... E_{τ+1}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::{enumerate_records, ChainModel, Kernel, KernelEntry, TimeGrid, ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::linalg::{commutator_norm, spectral, Operator, SpectralDecomposition, StateVector, C64, DEGENERACY_TOL};
use crate::report::ValidationReport;

pub const DIMENSION_CAP: usize = 4096;
pub const UNITARY_TOL: f64 = 1e-10;
pub const COMMUTATOR_TOL: f64 = 1e-9;
pub const EQUIVALENCE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeChain {
    system_dim: usize,
    probe_dim: usize,
    n_steps: usize,
    f: StateVector,
    step_unitary: Operator,
    recoupling: Option<Operator>,
    probe_observable: Operator,
    probe: SpectralDecomposition,
}

impl ProbeChain {
    pub fn new(
        system_dim: usize,
        probe_dim: usize,
        n_steps: usize,
        f: StateVector,
        step_unitary: Operator,
        probe_observable: Operator,
        recoupling: Option<Operator>,
    ) -> Result<Self> {
        let pair = system_dim * probe_dim;
        if step_unitary.dim() != pair {
            return Err(Error::DimensionMismatch { expected: pair, found: step_unitary.dim() });
        }
        for u in std::iter::once(&step_unitary).chain(recoupling.as_ref()) {
            let residual = u.unitary_residual();
            if residual > UNITARY_TOL {
                return Err(Error::NotUnitary { residual });
            }
        }
        if let Some(w) = &recoupling {
            if w.dim() != pair {
                return Err(Error::DimensionMismatch { expected: pair, found: w.dim() });
            }
        }
        if f.dim() != probe_dim {
            return Err(Error::DimensionMismatch { expected: probe_dim, found: f.dim() });
        }
        if (f.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("probe state has norm {}", f.norm())));
        }
        if probe_observable.dim() != probe_dim {
            return Err(Error::DimensionMismatch { expected: probe_dim, found: probe_observable.dim() });
        }
        let total = (0..n_steps).try_fold(system_dim, |acc, _| acc.checked_mul(probe_dim));
        match total {
            Some(dim) if dim <= DIMENSION_CAP => {}
            _ => {
                return Err(Error::DimensionCap { dim: total.unwrap_or(usize::MAX), cap: DIMENSION_CAP });
            }
        }
        let probe = spectral(&probe_observable, DEGENERACY_TOL)?;
        Ok(Self { system_dim, probe_dim, n_steps, f, step_unitary, recoupling, probe_observable, probe })
    }

    /// `U_step = I`, probe `|0>`, Z-basis readout.
    pub fn identity(n_steps: usize) -> Result<Self> {
        Self::qubit(n_steps, Operator::identity(4), None)
    }

    /// System qubit controls a NOT on the probe.
    pub fn cnot(n_steps: usize) -> Result<Self> {
        Self::qubit(n_steps, cnot(), None)
    }

    /// `U_step = exp(-iθ SWAP) = cos θ I - i sin θ SWAP`.
    pub fn partial_swap(theta: f64, n_steps: usize) -> Result<Self> {
        Self::qubit(n_steps, partial_swap(theta), None)
    }

    /// CNOT steps, each preceded from step 2 on by
    /// `exp(-i π/4 Y ⊗ X)` on the system and the previous probe.
    pub fn recoupling_counterexample(n_steps: usize) -> Result<Self> {
        let yx = Operator::pauli_y().kron(&Operator::pauli_x());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let w = &Operator::identity(4).scale_real(s) - &yx.scale(C64::new(0.0, s));
        Self::qubit(n_steps, cnot(), Some(w))
    }

    fn qubit(n_steps: usize, u: Operator, w: Option<Operator>) -> Result<Self> {
        Self::new(2, 2, n_steps, StateVector::basis(2, 0), u, Operator::pauli_z(), w)
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn probe_dim(&self) -> usize {
        self.probe_dim
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn probe_state(&self) -> &StateVector {
        &self.f
    }

    pub fn step_unitary(&self) -> &Operator {
        &self.step_unitary
    }

    pub fn recoupling(&self) -> Option<&Operator> {
        self.recoupling.as_ref()
    }

    pub fn probe_observable(&self) -> &Operator {
        &self.probe_observable
    }

    pub fn probe_decomposition(&self) -> &SpectralDecomposition {
        &self.probe
    }

    pub fn alphabet_size(&self) -> usize {
        self.probe.len()
    }

    pub fn global_dim(&self) -> usize {
        self.system_dim * self.probe_dim.pow(self.n_steps as u32)
    }

    fn weight(&self, probe: usize) -> usize {
        self.probe_dim.pow((self.n_steps - probe) as u32)
    }

    /// `a` acting on system ⊗ probe `j` (1-based), identity elsewhere.
    pub fn embed_pair(&self, a: &Operator, j: usize) -> Operator {
        let (d, p) = (self.system_dim, self.probe_dim);
        let n = self.global_dim();
        let sys_w = self.weight(0);
        let w = self.weight(j);
        let m = a.matrix();
        let mut g = DMatrix::<C64>::zeros(n, n);
        for col in 0..n {
            let s = col / sys_w;
            let q = (col / w) % p;
            let base = col - s * sys_w - q * w;
            for s2 in 0..d {
                for q2 in 0..p {
                    let v = m[(s2 * p + q2, s * p + q)];
                    if v != C64::from(0.0) {
                        g[(base + s2 * sys_w + q2 * w, col)] = v;
                    }
                }
            }
        }
        Operator::from_matrix(g).unwrap()
    }

    /// `sys ⊗ ops[0] ⊗ ... ⊗ ops[n-1]`.
    fn product(&self, sys: Operator, probes: Vec<Operator>) -> Operator {
        probes.iter().fold(sys, |acc, op| acc.kron(op))
    }

    /// `Z ⊗ I`.
    pub fn system_operator(&self, z: &Operator) -> Result<Operator> {
        if z.dim() != self.system_dim {
            return Err(Error::DimensionMismatch { expected: self.system_dim, found: z.dim() });
        }
        Ok(self.product(z.clone(), vec![Operator::identity(self.probe_dim); self.n_steps]))
    }

    /// Probe observable on probe `k`.
    pub fn probe_operator(&self, k: usize, op: &Operator) -> Operator {
        let probes = (1..=self.n_steps).map(|j| if j == k { op.clone() } else { Operator::identity(self.probe_dim) }).collect();
        self.product(Operator::identity(self.system_dim), probes)
    }

    /// `I ⊗ P_{x_1} ⊗ ... ⊗ P_{x_m} ⊗ I` on the first `x.len()` probes.
    pub fn record_projector(&self, x: &[usize]) -> Operator {
        let probes = (0..self.n_steps)
            .map(|j| match x.get(j) {
                Some(&a) => self.probe.projectors[a].clone(),
                None => Operator::identity(self.probe_dim),
            })
            .collect();
        self.product(Operator::identity(self.system_dim), probes)
    }

    /// Global unitary of step `k`.
    pub fn step_operator(&self, k: usize) -> Operator {
        let e = self.embed_pair(&self.step_unitary, k);
        match &self.recoupling {
            Some(w) if k >= 2 => &e * &self.embed_pair(w, k - 1),
            _ => e,
        }
    }

    /// `U(t, τ) = E_t ... E_{τ+1}`.
    pub fn propagator(&self, t: usize, tau: usize) -> Result<Operator> {
        if tau > t || t > self.n_steps {
            return Err(Error::InvalidModel(format!("need tau <= t <= n, got tau={tau} t={t}")));
        }
        Ok((tau + 1..=t).fold(Operator::identity(self.global_dim()), |acc, k| &self.step_operator(k) * &acc))
    }

    /// `U(t, 0)`.
    pub fn build_global(&self, t: usize) -> Result<Operator> {
        self.propagator(t, 0)
    }

    /// `ψ ⊗ f ⊗ ... ⊗ f`.
    pub fn initial_vector(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dim() != self.system_dim {
            return Err(Error::DimensionMismatch { expected: self.system_dim, found: psi.dim() });
        }
        Ok((0..self.n_steps).fold(psi.clone(), |acc, _| acc.kron(&self.f)))
    }

    /// Heisenberg probe observable `U*(k,0) (I ⊗ Q_R(k)) U(k,0)`.
    pub fn q_heisenberg(&self, k: usize) -> Result<Operator> {
        let u = self.build_global(k)?;
        Ok(u.adjoint().sandwich(&self.probe_operator(k, &self.probe_observable)))
    }

    /// Heisenberg system observable `U*(t,0) (Z ⊗ I) U(t,0)`.
    pub fn z_heisenberg(&self, z: &Operator, t: usize) -> Result<Operator> {
        let u = self.build_global(t)?;
        Ok(u.adjoint().sandwich(&self.system_operator(z)?))
    }

    /// `(||[Q_H(t), Q_H(s)]||, ||[Z_H(t), Q_H(s)]||)`, Frobenius norms.
    pub fn nondemolition_check(&self, z: &Operator, t: usize, s: usize) -> Result<(f64, f64)> {
        if !(t >= s && s >= 1) {
            return Err(Error::InvalidModel(format!("need t >= s >= 1, got t={t} s={s}")));
        }
        let qs = self.q_heisenberg(s)?;
        let r1 = commutator_norm(&self.q_heisenberg(t)?, &qs)?;
        let r2 = commutator_norm(&self.z_heisenberg(z, t)?, &qs)?;
        Ok((r1, r2))
    }

    /// Largest `||[U(t, τ), I ⊗ P_x]||` over records `x` of the probes
    /// measured by time `τ`.
    pub fn commutativity_residual(&self, t: usize, tau: usize) -> Result<f64> {
        let u = self.propagator(t, tau)?;
        let mut worst: f64 = 0.0;
        for x in self.records(tau)? {
            worst = worst.max(commutator_norm(&u, &self.record_projector(&x))?);
        }
        Ok(worst)
    }

    /// Residuals on the vector `ψ ⊗ f ⊗ ... ⊗ f`:
    /// `max_x ||[I ⊗ P_x, U(t, τ)] Ψ||` over records of the first `τ` probes,
    /// and `||U(t, s) Ψ - U(t, τ) U(τ, s) Ψ||`.
    pub fn cocycle_at_vector_check(&self, psi: &StateVector, t: usize, tau: usize, s: usize) -> Result<(f64, f64)> {
        if !(t >= tau && tau >= s && s >= 1) {
            return Err(Error::InvalidModel(format!("need t >= tau >= s >= 1, got {t}, {tau}, {s}")));
        }
        let v = self.initial_vector(psi)?;
        let u = self.propagator(t, tau)?;
        let mut worst: f64 = 0.0;
        for x in self.records(tau)? {
            let c = crate::linalg::commutator(&self.record_projector(&x), &u);
            worst = worst.max(c.apply(&v).norm());
        }
        let direct = self.propagator(t, s)?.apply(&v);
        let split = u.apply(&self.propagator(tau, s)?.apply(&v));
        Ok((worst, direct.distance(&split)))
    }

    fn records(&self, len: usize) -> Result<Vec<Vec<usize>>> {
        let count = (0..len).try_fold(1usize, |acc, _| acc.checked_mul(self.alphabet_size())).unwrap_or(usize::MAX);
        if count > ENUMERATION_CAP {
            return Err(Error::EnumerationCap { count, cap: ENUMERATION_CAP });
        }
        Ok(enumerate_records(self.alphabet_size(), len))
    }

    fn probe_vectors(&self) -> Result<Vec<StateVector>> {
        (0..self.alphabet_size())
            .map(|a| {
                self.probe
                    .rank_one_vector(a)
                    .ok_or(Error::InvalidModel("probe observable has a degenerate eigenvalue".into()))
            })
            .collect()
    }

    /// `(I ⊗ <e|) A (I ⊗ |g>)` on the system.
    fn partial_element(&self, a: &Operator, e: &StateVector, g: &StateVector) -> Operator {
        let (d, p) = (self.system_dim, self.probe_dim);
        let m = a.matrix();
        let out = DMatrix::from_fn(d, d, |i, j| {
            let mut acc = C64::from(0.0);
            for q in 0..p {
                for r in 0..p {
                    acc += e.entries()[q].conj() * m[(i * p + q, j * p + r)] * g.entries()[r];
                }
            }
            acc
        });
        Operator::from_matrix(out).unwrap()
    }

    /// Markov chain with `V(a) = sqrt|A| <e_a|U_step|f>` and `p(a) = 1/|A|`.
    pub fn extract_qsr(&self) -> Result<ChainModel> {
        if self.recoupling.is_some() {
            return Err(Error::InvalidModel("a recoupled chain has no single-step representation".into()));
        }
        let vectors = self.probe_vectors()?;
        let n = vectors.len();
        let scale = (n as f64).sqrt();
        let entries = vectors
            .iter()
            .map(|e| KernelEntry::new(self.partial_element(&self.step_unitary, e, &self.f).scale_real(scale), 1.0 / n as f64))
            .collect();
        ChainModel::new(TimeGrid::new(self.n_steps.max(1), 1.0)?, Kernel::Repeated(entries), true)
    }

    /// Conditioned system vector `(I ⊗ <e_x| ⊗ <f|...) U(n, 0) Ψ` for a record
    /// of the first `x.len()` probes.
    fn global_conditioned(&self, evolved: &StateVector, x: &[usize], vectors: &[StateVector]) -> StateVector {
        let mut bra = vectors[x[0]].clone();
        for j in 1..self.n_steps {
            bra = bra.kron(x.get(j).map(|&a| &vectors[a]).unwrap_or(&self.f));
        }
        let probes = bra.dim();
        let v: Vec<C64> = (0..self.system_dim)
            .map(|s| (0..probes).map(|q| bra.entries()[q].conj() * evolved.entries()[s * probes + q]).sum())
            .collect();
        StateVector::new(v).unwrap()
    }

    /// Largest deviation between the extracted chain and direct Born-rule
    /// enumeration on the dilation, over all records of `n` steps. Chain
    /// vectors carry the factor `|A|^(n/2)` from the uniform convention.
    pub fn equivalence_check(&self, psi0: &StateVector, n: usize) -> Result<f64> {
        if n == 0 || n > self.n_steps {
            return Err(Error::InvalidModel(format!("need 1 <= n <= {}, got {n}", self.n_steps)));
        }
        let chain = self.extract_qsr()?;
        let vectors = self.probe_vectors()?;
        let evolved = self.build_global(n)?.apply(&self.initial_vector(psi0)?);
        let rescale = (self.alphabet_size() as f64).powf(-(n as f64) / 2.0);
        let mut worst: f64 = 0.0;
        for x in self.records(n)? {
            let projected = self.record_projector(&x).apply(&evolved);
            let p_global = projected.norm_sq();
            let p_chain = chain.trajectory_probability(psi0, &x)?;
            let phi_global = self.global_conditioned(&evolved, &x, &vectors);
            let phi_chain = chain.evolution_operator(&x, 0, n)?.apply(psi0).scale(C64::from(rescale));
            worst = worst.max((p_global - p_chain).abs()).max(phi_global.distance(&phi_chain));
            worst = worst.max((phi_global.norm_sq() - p_global).abs());
        }
        Ok(worst)
    }

    /// Probe-only Born probabilities with the system in `rho` and traced
    /// out, against the extracted output law `tr(V ρ V*) ν`. For `U_step = I`
    /// both reduce to `<f, P_x f>`.
    pub fn marginal_law_check(&self, rho: &Operator, n: usize) -> Result<f64> {
        let chain = self.extract_qsr()?;
        let u = self.build_global(n)?;
        let f_all = (0..self.n_steps).fold(Operator::identity(1), |acc, _| acc.kron(&self.f.projector()));
        let global = u.sandwich(&rho.kron(&f_all));
        let mut worst: f64 = 0.0;
        for x in self.records(n)? {
            let born = (&self.record_projector(&x) * &global).trace().re;
            let v = chain.evolution_operator(&x, 0, n)?;
            let law = v.sandwich(rho).trace().re * chain.input_weight(&x, 0, n)?;
            worst = worst.max((born - law).abs());
        }
        Ok(worst)
    }
}

pub fn cnot() -> Operator {
    Operator::from_real(4, &[
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, 1.0, 0.0,
    ])
    .unwrap()
}

pub fn swap() -> Operator {
    Operator::from_real(4, &[
        1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    ])
    .unwrap()
}

pub fn partial_swap(theta: f64) -> Operator {
    &Operator::identity(4).scale_real(theta.cos()) - &swap().scale(C64::new(0.0, theta.sin()))
}

/// Full audit: unitarity, nondemolition commutators over all `t >= s >= 1`,
/// the commutativity relation, the vector form on `ψ ⊗ f...`, and for
/// repeated-interaction chains the extracted chain battery, equivalence and
/// marginal law.
pub fn audit(pc: &ProbeChain, z: &Operator, psi: &StateVector) -> Result<ValidationReport> {
    let n = pc.n_steps();
    let mut report = ValidationReport::new();
    report.push("step_unitarity", pc.step_unitary().unitary_residual(), UNITARY_TOL);
    report.push("probe_state_norm", (pc.probe_state().norm() - 1.0).abs(), 1e-12);
    let completeness = pc.probe_decomposition().projectors.iter().fold(Operator::zeros(pc.probe_dim()), |a, p| &a + p);
    report.push("probe_completeness", (&completeness - &Operator::identity(pc.probe_dim())).frobenius_norm(), 1e-10);
    let mut unitarity: f64 = 0.0;
    for t in 0..=n {
        unitarity = unitarity.max(pc.build_global(t)?.unitary_residual());
    }
    report.push("global_unitarity", unitarity, 1e-9);

    let (mut r1, mut r2, mut r3, mut r81, mut rc) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for t in 1..=n {
        for s in 1..=t {
            let (a, b) = pc.nondemolition_check(z, t, s)?;
            r1 = r1.max(a);
            r2 = r2.max(b);
            r3 = r3.max(pc.commutativity_residual(t, s)?);
            for s0 in 1..=s {
                let (a, b) = pc.cocycle_at_vector_check(psi, t, s, s0)?;
                r81 = r81.max(a);
                rc = rc.max(b);
            }
        }
    }
    report.push("probe_observables_commute", r1, COMMUTATOR_TOL);
    report.push("system_observable_commutes", r2, COMMUTATOR_TOL);
    report.push("propagator_commutes_with_past_records", r3, COMMUTATOR_TOL);
    report.push("propagator_commutes_on_vector", r81, COMMUTATOR_TOL);
    report.push("cocycle_on_vector", rc, 1e-10);

    if pc.recoupling().is_none() && pc.probe_decomposition().ranks().iter().all(|&r| r == 1) {
        let chain = pc.extract_qsr()?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut battery = crate::chain::validate_chain(&chain, &mut rng);
        for c in &mut battery.checks {
            c.name = format!("extracted_{}", c.name);
        }
        report.extend(battery);
        report.push("equivalence", pc.equivalence_check(psi, n)?, EQUIVALENCE_TOL);
        report.push("marginal_law", pc.marginal_law_check(&psi.projector(), n)?, EQUIVALENCE_TOL);
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum StepGenerator {
    Identity,
    Cnot,
    PartialSwap { theta: f64 },
    RecouplingCounterexample,
    Explicit {
        #[serde(rename = "U_step")]
        step_unitary: Operator,
        #[serde(default)]
        recoupling: Option<Operator>,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::validate_chain;
    use crate::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ket(i: usize) -> StateVector {
        StateVector::basis(2, i)
    }

    #[test]
    fn build_global_examples() {
        let pc = ProbeChain::cnot(2).unwrap();
        assert_eq!(pc.build_global(0).unwrap(), Operator::identity(8));
        let id = ProbeChain::identity(3).unwrap();
        for t in 0..=3 {
            assert!((&id.build_global(t).unwrap() - &Operator::identity(16)).frobenius_norm() < 1e-15);
        }
        let pc = ProbeChain::cnot(3).unwrap();
        let u = pc.build_global(2).unwrap();
        assert_eq!(u.dim(), 16);
        assert!(u.unitary_residual() <= 1e-12);
        // |1,0,0,0> -> |1,1,1,0>
        let v = u.apply(&StateVector::basis(16, 8));
        assert!(v.distance(&StateVector::basis(16, 14)) < 1e-15);
        // |0,0,0,0> fixed
        assert!(u.apply(&StateVector::basis(16, 0)).distance(&StateVector::basis(16, 0)) < 1e-15);
    }

    #[test]
    fn dimension_cap() {
        let r = ProbeChain::new(2, 2, 12, ket(0), cnot(), Operator::pauli_z(), None);
        assert!(matches!(r, Err(Error::DimensionCap { .. })));
        assert!(ProbeChain::new(2, 2, 11, ket(0), cnot(), Operator::pauli_z(), None).is_ok());
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(matches!(
            ProbeChain::new(2, 2, 2, ket(0), Operator::pauli_z().kron(&Operator::sigma_minus()), Operator::pauli_z(), None),
            Err(Error::NotUnitary { .. })
        ));
        assert!(ProbeChain::new(2, 2, 2, StateVector::from_real(&[1.0, 1.0]).unwrap(), cnot(), Operator::pauli_z(), None).is_err());
        assert!(ProbeChain::new(2, 2, 2, ket(0), Operator::identity(2), Operator::pauli_z(), None).is_err());
    }

    #[test]
    fn nondemolition_examples() {
        let id = ProbeChain::identity(3).unwrap();
        assert_eq!(id.nondemolition_check(&Operator::pauli_x(), 2, 1).unwrap(), (0.0, 0.0));

        let pc = ProbeChain::cnot(3).unwrap();
        let (r1, r2) = pc.nondemolition_check(&Operator::pauli_x(), 2, 1).unwrap();
        assert!(r1 <= 1e-10 && r2 <= 1e-10);

        let bad = ProbeChain::recoupling_counterexample(3).unwrap();
        let (_, r2) = bad.nondemolition_check(&Operator::pauli_x(), 2, 1).unwrap();
        assert!(r2 > 0.1, "{r2}");
        assert!(pc.nondemolition_check(&Operator::pauli_x(), 1, 2).is_err());
    }

    #[test]
    fn repeated_interactions_satisfy_all_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let chains = [
            ProbeChain::cnot(3).unwrap(),
            ProbeChain::partial_swap(0.3, 3).unwrap(),
            ProbeChain::new(2, 3, 3, fixtures::random_state(3, &mut rng), fixtures::random_unitary(6, &mut rng), fixtures::random_hermitian(3, &mut rng), None)
                .unwrap(),
        ];
        for pc in &chains {
            let z = fixtures::random_hermitian(2, &mut rng);
            let psi = fixtures::random_state(2, &mut rng);
            let report = audit(pc, &z, &psi).unwrap();
            assert!(report.all_passed(), "{report:#?}");
        }
    }

    #[test]
    fn recoupling_violates_all_conditions_together() {
        let pc = ProbeChain::recoupling_counterexample(3).unwrap();
        let mut r1: f64 = 0.0;
        let mut r2: f64 = 0.0;
        for t in 1..=3 {
            for s in 1..=t {
                let (a, b) = pc.nondemolition_check(&Operator::pauli_x(), t, s).unwrap();
                r1 = r1.max(a);
                r2 = r2.max(b);
            }
        }
        assert!(r1 > 0.1 && r2 > 0.1, "{r1} {r2}");
        assert!(pc.commutativity_residual(2, 1).unwrap() > 0.1);
        let (r81, rc) = pc.cocycle_at_vector_check(&ket(0), 2, 1, 1).unwrap();
        assert!(r81 > 0.1, "{r81}");
        assert!(rc <= 1e-12);
        let report = audit(&pc, &Operator::pauli_x(), &ket(0)).unwrap();
        assert!(!report.all_passed());
        assert!(pc.extract_qsr().is_err());
    }

    #[test]
    fn cocycle_examples() {
        let psi = StateVector::plus();
        let (a, b) = ProbeChain::identity(3).unwrap().cocycle_at_vector_check(&psi, 3, 2, 1).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
        let (a, b) = ProbeChain::cnot(3).unwrap().cocycle_at_vector_check(&psi, 3, 2, 1).unwrap();
        assert!(a <= 1e-12 && b <= 1e-12);
    }

    #[test]
    fn extract_examples() {
        let chain = ProbeChain::identity(2).unwrap().extract_qsr().unwrap();
        let e = chain.entries(0, &[]);
        assert!((&e[0].op - &Operator::identity(2).scale_real(2f64.sqrt())).frobenius_norm() < 1e-12);
        assert!(e[1].op.frobenius_norm() < 1e-15);

        let chain = ProbeChain::cnot(2).unwrap().extract_qsr().unwrap();
        let e = chain.entries(0, &[]);
        let s = 2f64.sqrt();
        assert!((&e[0].op - &ket(0).projector().scale_real(s)).frobenius_norm() < 1e-12);
        assert!((&e[1].op - &ket(1).projector().scale_real(s)).frobenius_norm() < 1e-12);

        let chain = ProbeChain::partial_swap(0.1, 3).unwrap().extract_qsr().unwrap();
        let m = chain.entries(0, &[]).iter().fold(Operator::zeros(2), |a, e| &a + &(&e.op.adjoint() * &e.op).scale_real(e.prob));
        assert!((&m - &Operator::identity(2)).frobenius_norm() <= 1e-12);
        assert!(validate_chain(&chain, &mut ChaCha8Rng::seed_from_u64(0)).all_passed());

        let degenerate = ProbeChain::new(2, 3, 1, StateVector::basis(3, 0), Operator::identity(6), Operator::from_real(3, &[1., 0., 0., 0., 1., 0., 0., 0., 0.]).unwrap(), None).unwrap();
        assert!(degenerate.extract_qsr().is_err());
    }

    #[test]
    fn partial_swap_matches_matrix_exponential() {
        let theta = 0.3;
        let generator = swap().scale(C64::new(0.0, -theta));
        let exact = Operator::from_matrix(generator.matrix().clone().exp()).unwrap();
        assert!((&exact - &partial_swap(theta)).frobenius_norm() < 1e-14);
    }

    #[test]
    fn equivalence_examples() {
        assert!(ProbeChain::identity(2).unwrap().equivalence_check(&StateVector::plus(), 2).unwrap() <= 1e-14);

        let pc = ProbeChain::cnot(2).unwrap();
        assert!(pc.equivalence_check(&StateVector::plus(), 2).unwrap() <= 1e-12);
        let chain = pc.extract_qsr().unwrap();
        let probs: Vec<f64> = [[0, 0], [0, 1], [1, 0], [1, 1]].iter().map(|x| chain.trajectory_probability(&StateVector::plus(), x).unwrap()).collect();
        for (p, e) in probs.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((p - e).abs() < 1e-12);
        }

        let pc = ProbeChain::partial_swap(0.3, 3).unwrap();
        let psi = fixtures::random_state(2, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(pc.equivalence_check(&psi, 3).unwrap() <= 1e-10);
        assert!(pc.equivalence_check(&psi, 2).unwrap() <= 1e-10);
    }

    #[test]
    fn marginal_law_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = fixtures::random_density(2, &mut rng);
        for pc in [ProbeChain::identity(3).unwrap(), ProbeChain::partial_swap(0.3, 3).unwrap(), ProbeChain::cnot(3).unwrap()] {
            assert!(pc.marginal_law_check(rho.op(), 3).unwrap() <= 1e-10);
        }
        // no interaction: the law is the probe law <f, P f> alone
        let f = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let pc = ProbeChain::new(2, 2, 1, f, Operator::identity(4), Operator::pauli_z(), None).unwrap();
        let chain = pc.extract_qsr().unwrap();
        assert!((chain.trajectory_probability(&ket(1), &[0]).unwrap() - 0.36).abs() < 1e-12);
        assert!((chain.trajectory_probability(&ket(1), &[1]).unwrap() - 0.64).abs() < 1e-12);
    }

    #[test]
    fn generator_serde() {
        let g: StepGenerator = serde_json::from_str(r#"{"generator":"partial-swap","theta":0.3}"#).unwrap();
        assert!(matches!(g, StepGenerator::PartialSwap { theta } if theta == 0.3));
        let g: StepGenerator = serde_json::from_str(r#"{"generator":"recoupling-counterexample"}"#).unwrap();
        assert!(matches!(g, StepGenerator::RecouplingCounterexample));
    }
}
