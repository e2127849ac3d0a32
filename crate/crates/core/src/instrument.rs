//! Single-shot generalized measurements on a finite outcome set.
//!
//! A [`QsRep`] stores, per transition channel `i`, a weight `alpha_i`, an
//! input probability vector `nu_i` over the outcomes and one evolution
//! operator `V_i(w)` per outcome. Cross-measures between distinct channels
//! are taken to be zero, so each channel is normalized on its own:
//! `sum_w V_i(w)* V_i(w) nu_i(w) = I`.
//!
//! Outcome subsets are passed as slices of outcome indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral, DensityOperator, Operator, StateVector, C64, DEGENERACY_TOL};
use crate::report::ValidationReport;

pub const WEIGHT_TOL: f64 = 1e-12;
pub const NORMALIZATION_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub alpha: f64,
    pub nu: Vec<f64>,
    #[serde(rename = "V")]
    pub ops: Vec<Operator>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQsRep")]
pub struct QsRep {
    outcomes: Vec<String>,
    channels: Vec<Channel>,
    #[serde(skip)]
    dim: usize,
}

#[derive(Deserialize)]
struct RawQsRep {
    outcomes: Vec<String>,
    channels: Vec<Channel>,
}

impl TryFrom<RawQsRep> for QsRep {
    type Error = Error;
    fn try_from(raw: RawQsRep) -> Result<Self> {
        QsRep::new(raw.outcomes, raw.channels)
    }
}

impl QsRep {
    /// Checks shapes only; numerical validity is reported by [`validate_qsr`].
    pub fn new(outcomes: Vec<String>, channels: Vec<Channel>) -> Result<Self> {
        let first = channels.first().ok_or(Error::InvalidModel("QSR needs at least one channel".into()))?;
        if outcomes.is_empty() {
            return Err(Error::InvalidModel("QSR needs at least one outcome".into()));
        }
        let dim = first.ops.first().map(Operator::dim).unwrap_or(0);
        for (i, ch) in channels.iter().enumerate() {
            if ch.nu.len() != outcomes.len() || ch.ops.len() != outcomes.len() {
                return Err(Error::InvalidModel(format!(
                    "channel {i}: expected {} outcome entries, got nu={} V={}",
                    outcomes.len(),
                    ch.nu.len(),
                    ch.ops.len()
                )));
            }
            if let Some(op) = ch.ops.iter().find(|op| op.dim() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, found: op.dim() });
            }
            if !ch.alpha.is_finite() || ch.nu.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!("channel {i}: non-finite weight")));
            }
        }
        Ok(Self { outcomes, channels, dim })
    }

    /// One channel, `alpha = 1`.
    pub fn simple(outcomes: Vec<String>, nu: Vec<f64>, ops: Vec<Operator>) -> Result<Self> {
        Self::new(outcomes, vec![Channel { alpha: 1.0, nu, ops }])
    }

    /// Kraus family `{K_a}` with uniform input measure and `V(a) = sqrt(n) K_a`.
    pub fn from_kraus(kraus: &[Operator]) -> Result<Self> {
        let n = kraus.len();
        let scale = (n as f64).sqrt();
        Self::simple(
            (0..n).map(|a| a.to_string()).collect(),
            vec![1.0 / n as f64; n],
            kraus.iter().map(|k| k.scale_real(scale)).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn is_simple(&self) -> bool {
        self.channels.len() == 1
    }

    pub fn outcome_index(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == label)
    }

    pub fn all_outcomes(&self) -> Vec<usize> {
        (0..self.outcomes.len()).collect()
    }

    /// `V_i(w) -> V_i(w) U` for every channel and outcome.
    pub fn right_multiplied(&self, u: &Operator) -> Self {
        let channels = self
            .channels
            .iter()
            .map(|ch| Channel { alpha: ch.alpha, nu: ch.nu.clone(), ops: ch.ops.iter().map(|v| v * u).collect() })
            .collect();
        Self { outcomes: self.outcomes.clone(), channels, dim: self.dim }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: d });
        }
        Ok(())
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        match subset.iter().find(|&&w| w >= self.outcomes.len()) {
            Some(&w) => Err(Error::InvalidModel(format!("outcome index {w} out of range"))),
            None => Ok(()),
        }
    }

    /// Sum over channels and `w in subset` of `alpha_i nu_i(w) f(i, w)`.
    fn weighted_sum(&self, subset: &[usize], f: impl Fn(&Operator) -> Operator) -> Operator {
        let mut acc = Operator::zeros(self.dim);
        for ch in &self.channels {
            for &w in subset {
                let weight = ch.alpha * ch.nu[w];
                if weight != 0.0 {
                    acc = &acc + &f(&ch.ops[w]).scale_real(weight);
                }
            }
        }
        acc
    }
}

/// Everything a QSR says about one input state.
#[derive(Clone, Debug)]
pub struct InstrumentResult {
    /// `M(Omega)`, the POV measure of the full outcome set.
    pub pov_total: Operator,
    /// `pi(w; rho0)` per outcome.
    pub output_law: Vec<f64>,
    /// Normalized posterior per outcome, `None` where `pi(w) = 0`.
    pub posterior_family: Vec<Option<DensityOperator>>,
    /// `eta_out(w) = sum_i alpha_i nu_i(w) V_i rho0 V_i*`, density with respect
    /// to the counting measure, so `tr eta_out(w) = pi(w)`.
    pub unnormalized_family: Vec<Operator>,
}

/// Weight sum, input measure normalization and the diagonal orthonormality
/// relation for each channel.
pub fn validate_qsr(q: &QsRep) -> ValidationReport {
    let mut report = ValidationReport::new();
    let alpha_sum: f64 = q.channels.iter().map(|c| c.alpha).sum();
    report.push("weight_sum", (alpha_sum - 1.0).abs(), WEIGHT_TOL);
    let min_alpha = q.channels.iter().map(|c| c.alpha).fold(f64::INFINITY, f64::min);
    report.push("weight_positive", (-min_alpha).max(0.0), 0.0);
    if min_alpha <= 0.0 {
        report.checks.last_mut().unwrap().passed = false;
    }
    let id = Operator::identity(q.dim);
    for (i, ch) in q.channels.iter().enumerate() {
        let nu_sum: f64 = ch.nu.iter().sum();
        report.push(format!("measure_normalization[{i}]"), (nu_sum - 1.0).abs(), WEIGHT_TOL);
        let min_nu = ch.nu.iter().copied().fold(f64::INFINITY, f64::min);
        report.push(format!("measure_nonnegative[{i}]"), (-min_nu).max(0.0), 0.0);
        let m = ch
            .ops
            .iter()
            .zip(&ch.nu)
            .fold(Operator::zeros(q.dim), |acc, (v, &nu)| &acc + &(&v.adjoint() * v).scale_real(nu));
        report.push(format!("operator_normalization[{i}]"), (&m - &id).frobenius_norm(), NORMALIZATION_TOL);
    }
    report.push("boundedness", 0.0, 0.0).note("finite outcome set: always bounded");
    report
}

/// Verifies the general orthonormality relations with user-supplied
/// cross-measure densities `table[j][i][w] = q_ji(w)` relative to the
/// probability vector `reference`:
/// `sum_w q_ji(w) nu(w) = delta_ji` and `sum_w V_j* V_i q_ji nu = delta_ij I`.
/// Diagonal densities must reproduce the stored `nu_i = q_ii nu`.
pub fn check_cross_measures(q: &QsRep, reference: &[f64], table: &[Vec<Vec<C64>>]) -> Result<ValidationReport> {
    let n = q.channels.len();
    let n_out = q.n_outcomes();
    if reference.len() != n_out || table.len() != n || table.iter().any(|r| r.len() != n || r.iter().any(|c| c.len() != n_out)) {
        return Err(Error::InvalidModel("cross-measure table has the wrong shape".into()));
    }
    let mut report = ValidationReport::new();
    let id = Operator::identity(q.dim);
    for j in 0..n {
        for i in 0..n {
            let mass: C64 = (0..n_out).map(|w| table[j][i][w] * reference[w]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            report.push(format!("scalar_orthonormality[{j},{i}]"), (mass - target).norm(), WEIGHT_TOL);
            let mut m = Operator::zeros(q.dim);
            for w in 0..n_out {
                let vj = &q.channels[j].ops[w];
                let vi = &q.channels[i].ops[w];
                m = &m + &(&vj.adjoint() * vi).scale(table[j][i][w] * reference[w]);
            }
            let expected = if i == j { id.clone() } else { Operator::zeros(q.dim) };
            report.push(format!("operator_orthonormality[{j},{i}]"), (&m - &expected).frobenius_norm(), NORMALIZATION_TOL);
        }
        let diag: f64 = (0..n_out).map(|w| (table[j][j][w] * reference[w] - q.channels[j].nu[w]).norm()).sum();
        report.push(format!("diagonal_matches_input_measure[{j}]"), diag, WEIGHT_TOL);
    }
    Ok(report)
}

/// POV measure `M(B) = N(B)[I]`.
pub fn pov(q: &QsRep, subset: &[usize]) -> Result<Operator> {
    q.check_subset(subset)?;
    Ok(q.weighted_sum(subset, |v| &v.adjoint() * v))
}

/// Heisenberg-picture instrument `N(B)[Y]`.
pub fn instrument_dual(q: &QsRep, subset: &[usize], y: &Operator) -> Result<Operator> {
    q.check_dim(y.dim())?;
    q.check_subset(subset)?;
    Ok(q.weighted_sum(subset, |v| &(&v.adjoint() * y) * v))
}

/// Schrödinger-picture instrument `M(B)[kappa]`.
pub fn instrument(q: &QsRep, subset: &[usize], kappa: &Operator) -> Result<Operator> {
    q.check_dim(kappa.dim())?;
    q.check_subset(subset)?;
    Ok(q.weighted_sum(subset, |v| v.sandwich(kappa)))
}

/// Probability of `B` and the normalized posterior state given `B`.
pub fn apply_instrument(q: &QsRep, rho0: &DensityOperator, subset: &[usize]) -> Result<(f64, DensityOperator)> {
    let out = instrument(q, subset, rho0.op())?;
    let probability = out.trace().re;
    if probability <= 1e-300 || !probability.is_finite() {
        return Err(Error::NullEvent { probability });
    }
    let posterior = DensityOperator::with_tolerance(out.scale_real(1.0 / probability).hermitian_part(), 1e-10, 1e-10)?;
    Ok((probability, posterior))
}

/// `pi(B; rho0)`; unlike [`apply_instrument`] this is defined for null events.
pub fn probability(q: &QsRep, rho0: &DensityOperator, subset: &[usize]) -> Result<f64> {
    Ok(instrument(q, subset, rho0.op())?.trace().re)
}

pub fn instrument_result(q: &QsRep, rho0: &DensityOperator) -> Result<InstrumentResult> {
    q.check_dim(rho0.dim())?;
    let pov_total = pov(q, &q.all_outcomes())?;
    let unnormalized_family: Vec<Operator> = (0..q.n_outcomes()).map(|w| q.weighted_sum(&[w], |v| v.sandwich(rho0.op()))).collect();
    let output_law: Vec<f64> = unnormalized_family.iter().map(|e| e.trace().re).collect();
    let posterior_family = unnormalized_family
        .iter()
        .zip(&output_law)
        .map(|(e, &p)| if p > 0.0 { DensityOperator::from_unnormalized(e).ok() } else { None })
        .collect();
    Ok(InstrumentResult { pov_total, output_law, posterior_family, unnormalized_family })
}

/// `|tr{kappa N(B)[Y]} - tr{M(B)[kappa] Y}|`.
pub fn duality_check(q: &QsRep, kappa: &Operator, y: &Operator, subset: &[usize]) -> Result<f64> {
    let lhs = (kappa * &instrument_dual(q, subset, y)?).trace();
    let rhs = (&instrument(q, subset, kappa)? * y).trace();
    Ok((lhs - rhs).norm())
}

/// Probability that the posterior pure state at outcome `w` came from
/// channel `i`: `alpha_i q_ii(w) ||V_i(w) psi0||^2`, normalized over channels.
pub fn channel_posterior_prob(q: &QsRep, psi0: &StateVector, outcome: usize) -> Result<Vec<f64>> {
    q.check_dim(psi0.dim())?;
    q.check_subset(&[outcome])?;
    let weights: Vec<f64> =
        q.channels.iter().map(|ch| ch.alpha * ch.nu[outcome] * ch.ops[outcome].apply(psi0).norm_sq()).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::NullEvent { probability: total });
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Projective measurement of a Hermitian observable: one outcome per distinct
/// eigenvalue, uniform input measure over the `n` outcomes and
/// `V(lambda_j) = sqrt(n) P_j`.
pub fn von_neumann_qsr(z: &Operator) -> Result<QsRep> {
    let decomposition = spectral(z, DEGENERACY_TOL)?;
    let n = decomposition.len();
    let scale = (n as f64).sqrt();
    QsRep::simple(
        decomposition.eigenvalues.iter().map(|l| format_eigenvalue(*l)).collect(),
        vec![1.0 / n as f64; n],
        decomposition.projectors.iter().map(|p| p.scale_real(scale)).collect(),
    )
}

fn format_eigenvalue(l: f64) -> String {
    let rounded = (l * 1e9).round() / 1e9;
    if rounded == 0.0 { "0".into() } else { format!("{rounded}") }
}

/// `M(Omega)[rho0]`.
pub fn unconditional_state(q: &QsRep, rho0: &DensityOperator) -> Result<DensityOperator> {
    let out = instrument(q, &q.all_outcomes(), rho0.op())?;
    DensityOperator::new(out.hermitian_part())
}
