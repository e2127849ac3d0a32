//! Dense complex linear algebra on finite-dimensional Hilbert spaces.
//!
//! [`Operator`], [`StateVector`] and [`DensityOperator`] are thin newtypes over
//! `nalgebra` storage. Everything is immutable after construction.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Default grouping tolerance for degenerate eigenvalues.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Bounded operator on a `d`-dimensional Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let d = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::NotSquare { rows: d, cols: bad.len() });
        }
        Self::from_matrix(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    /// Builds an operator from real entries, row-major.
    pub fn from_real(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: entries.len() });
        }
        Self::from_matrix(DMatrix::from_fn(d, d, |i, j| C64::new(entries[i * d + j], 0.0)))
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.0.singular_values().max()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self(&self.0 * C64::new(s, 0.0))
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        StateVector(&self.0 * &v.0)
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        Self(self.0.kronecker(&other.0))
    }

    /// `A ρ A*`.
    pub fn sandwich(&self, rho: &Operator) -> Operator {
        Self(&self.0 * &rho.0 * self.0.adjoint())
    }

    /// `||A - A*||_F`.
    pub fn hermitian_residual(&self) -> f64 {
        (&self.0 - self.0.adjoint()).norm()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol
    }

    /// `||A* A - I||_F`.
    pub fn unitary_residual(&self) -> f64 {
        (self.0.adjoint() * &self.0 - DMatrix::identity(self.dim(), self.dim())).norm()
    }

    /// `(A + A*) / 2`.
    pub fn hermitian_part(&self) -> Operator {
        Self((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.hermitian_part().0).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn outer(a: &StateVector, b: &StateVector) -> Operator {
        Self(&a.0 * b.0.adjoint())
    }

    pub fn pauli_x() -> Self {
        Self(DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]))
    }

    pub fn pauli_y() -> Self {
        Self(DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]))
    }

    pub fn pauli_z() -> Self {
        Self(DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]))
    }

    /// Qubit lowering operator `|0><1|`.
    pub fn sigma_minus() -> Self {
        Self(DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]))
    }

    /// Qubit raising operator `|1><0|`.
    pub fn sigma_plus() -> Self {
        Self::sigma_minus().adjoint()
    }

    fn check_dim(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

impl<'a> Mul<&'a Operator> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a Operator> for &Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a Operator> for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator(-&self.0)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Vector in a `d`-dimensional Hilbert space. Not necessarily normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(DVector<C64>);

impl StateVector {
    pub fn new(entries: Vec<C64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        Ok(Self(DVector::from_vec(entries)))
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_vector(v: DVector<C64>) -> Self {
        Self(v)
    }

    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = DVector::zeros(d);
        v[i] = ONE;
        Self(v)
    }

    pub fn zeros(d: usize) -> Self {
        Self(DVector::zeros(d))
    }

    /// `(|0> + |1>) / sqrt 2`.
    pub fn plus() -> Self {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self(DVector::from_vec(vec![s, s]))
    }

    /// `(|0> - |1>) / sqrt 2`.
    pub fn minus() -> Self {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self(DVector::from_vec(vec![s, -s]))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn entries(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sq() - 1.0).abs() <= 1e-12
    }

    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| Self(&self.0 / C64::new(n, 0.0)))
    }

    /// `<self, other>`, antilinear in `self`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn kron(&self, other: &StateVector) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    pub fn projector(&self) -> Operator {
        Operator::outer(self, self)
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        (&self.0 - &other.0).norm()
    }

    pub fn add_scaled(&mut self, other: &StateVector, s: C64) {
        self.0.axpy(s, &other.0, ONE);
    }
}

impl<'a> Add<&'a StateVector> for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &'a StateVector) -> StateVector {
        StateVector(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a StateVector> for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: &'a StateVector) -> StateVector {
        StateVector(&self.0 - &rhs.0)
    }
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator(Operator);

impl DensityOperator {
    /// Validates with the default 1e-10 tolerance on every invariant.
    pub fn new(op: Operator) -> Result<Self> {
        Self::with_tolerance(op, 1e-10, 1e-10)
    }

    /// `tol` bounds the Hermitian and trace residuals, `psd_tol` the most
    /// negative admissible eigenvalue.
    pub fn with_tolerance(op: Operator, tol: f64, psd_tol: f64) -> Result<Self> {
        let herm = op.hermitian_residual();
        if herm > tol {
            return Err(Error::InvalidDensity(format!("not Hermitian (residual {herm:.3e})")));
        }
        let tr = op.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::InvalidDensity(format!("trace {tr} differs from 1")));
        }
        let min_ev = op.hermitian_eigenvalues()[0];
        if min_ev < -psd_tol {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min_ev:.3e}")));
        }
        Ok(Self(op))
    }

    /// `|psi><psi| / ||psi||^2`.
    pub fn pure(psi: &StateVector) -> Result<Self> {
        let n = psi.normalized().ok_or(Error::InvalidDensity("zero vector".into()))?;
        Ok(Self(n.projector()))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(Operator::identity(d).scale_real(1.0 / d as f64))
    }

    /// Divides a nonzero positive operator by its trace.
    pub fn from_unnormalized(op: &Operator) -> Result<Self> {
        let tr = op.trace().re;
        if tr <= 0.0 {
            return Err(Error::NullEvent { probability: tr });
        }
        Self::new(op.scale_real(1.0 / tr).hermitian_part())
    }

    pub fn op(&self) -> &Operator {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }
}

/// Spectral decomposition `Z = sum_j lambda_j P_j` with eigenvalues in
/// descending order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub projectors: Vec<Operator>,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn reconstruct(&self) -> Operator {
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(Operator::zeros(self.dim()), |acc, (&l, p)| &acc + &p.scale_real(l))
    }

    /// Rank of each projector, rounded from its trace.
    pub fn ranks(&self) -> Vec<usize> {
        self.projectors.iter().map(|p| p.trace().re.round() as usize).collect()
    }

    /// Unit vector spanning a rank-1 projector. The phase is fixed so that
    /// the largest-magnitude component is real and positive.
    pub fn rank_one_vector(&self, j: usize) -> Option<StateVector> {
        let p = &self.projectors[j];
        if (p.trace().re - 1.0).abs() > 1e-8 {
            return None;
        }
        let d = p.dim();
        let col = (0..d).max_by(|&a, &b| p.get(a, a).re.total_cmp(&p.get(b, b).re))?;
        let v: Vec<C64> = (0..d).map(|i| p.get(i, col)).collect();
        StateVector::new(v).ok()?.normalized()
    }
}

pub fn adjoint(a: &Operator) -> Operator {
    a.adjoint()
}

/// `tr(rho Z)`.
pub fn expectation(rho: &DensityOperator, z: &Operator) -> Result<C64> {
    rho.op().check_dim(z)?;
    Ok((rho.op() * z).trace())
}

/// Groups eigenvalues closer than `degeneracy_tol` into a single projector.
pub fn spectral(z: &Operator, degeneracy_tol: f64) -> Result<SpectralDecomposition> {
    let residual = z.hermitian_residual();
    if residual > 1e-10 {
        return Err(Error::NotHermitian { residual });
    }
    let eig = SymmetricEigen::new(z.hermitian_part().into_matrix());
    let d = z.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        let lambda = eig.eigenvalues[idx];
        match groups.last_mut() {
            Some(group) if (eig.eigenvalues[group[0]] - lambda).abs() <= degeneracy_tol => group.push(idx),
            _ => groups.push(vec![idx]),
        }
    }
    let mut eigenvalues = Vec::with_capacity(groups.len());
    let mut projectors = Vec::with_capacity(groups.len());
    for group in &groups {
        let mut p = DMatrix::<C64>::zeros(d, d);
        let mut sum = 0.0;
        for &idx in group {
            let v = eig.eigenvectors.column(idx);
            p += &v * v.adjoint();
            sum += eig.eigenvalues[idx];
        }
        eigenvalues.push(sum / group.len() as f64);
        projectors.push(Operator(p));
    }
    Ok(SpectralDecomposition { eigenvalues, projectors })
}

/// `1/2 * sum of singular values of (a - b)`.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    trace_distance_ops(a.op(), b.op())
}

/// Trace distance between arbitrary operators of equal dimension.
pub fn trace_distance_ops(a: &Operator, b: &Operator) -> Result<f64> {
    a.check_dim(b)?;
    Ok(0.5 * (a - b).matrix().singular_values().sum())
}

/// `||AB - BA||_F`.
pub fn commutator_norm(a: &Operator, b: &Operator) -> Result<f64> {
    a.check_dim(b)?;
    Ok(commutator(a, b).frobenius_norm())
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    &(a * b) - &(b * a)
}

fn c64_pair(z: &C64) -> [f64; 2] {
    [z.re, z.im]
}

impl Serialize for Operator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> =
            (0..self.dim()).map(|i| (0..self.dim()).map(|j| c64_pair(&self.0[(i, j)])).collect()).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let rows: Vec<Vec<C64>> = rows.into_iter().map(|r| r.into_iter().map(|[re, im]| C64::new(re, im)).collect()).collect();
        Operator::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.iter().map(c64_pair).collect::<Vec<_>>().serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<[f64; 2]> = Vec::deserialize(d)?;
        StateVector::new(v.into_iter().map(|[re, im]| C64::new(re, im)).collect()).map_err(serde::de::Error::custom)
    }
}

impl Serialize for DensityOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}
