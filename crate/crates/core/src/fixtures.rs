//! Standard models and random generators shared by the CLI generators,
//! the test suites and the examples in the README.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::instrument::{Channel, QsRep};
use crate::linalg::{DensityOperator, Operator, StateVector, C64};

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `K_0 = [[1,0],[0,sqrt(1-p)]]`, `K_1 = [[0,sqrt p],[0,0]]`.
pub fn amplitude_damping_kraus(p: f64) -> Vec<Operator> {
    vec![
        Operator::from_real(2, &[1.0, 0.0, 0.0, (1.0 - p).sqrt()]).unwrap(),
        Operator::from_real(2, &[0.0, p.sqrt(), 0.0, 0.0]).unwrap(),
    ]
}

/// Two-outcome weak Z measurement of strength `s in [0, 1]`:
/// `K_pm = sqrt((1 pm s Z) / 2)`.
pub fn weak_z_kraus(s: f64) -> Vec<Operator> {
    let k = |sign: f64| {
        let a = ((1.0 + sign * s) / 2.0).sqrt();
        let b = ((1.0 - sign * s) / 2.0).sqrt();
        Operator::from_real(2, &[a, 0.0, 0.0, b]).unwrap()
    };
    vec![k(1.0), k(-1.0)]
}

/// Complex Ginibre matrix.
pub fn random_matrix<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Operator {
    Operator::from_matrix(DMatrix::from_fn(d, d, |_, _| gaussian_c64(rng))).unwrap()
}

pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Operator {
    random_matrix(d, rng).hermitian_part()
}

/// Normalized random vector.
pub fn random_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> StateVector {
    let v = StateVector::new((0..d).map(|_| gaussian_c64(rng)).collect()).unwrap();
    v.normalized().unwrap()
}

/// Full-rank random density operator.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityOperator {
    let a = random_matrix(d, rng);
    let p = &(&a * &a.adjoint()) + &Operator::identity(d).scale_real(1e-3);
    DensityOperator::from_unnormalized(&p).unwrap()
}

/// Random isometry `C^d -> C^(n d)` cut into `n` Kraus blocks.
pub fn random_kraus<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Vec<Operator> {
    let g = DMatrix::from_fn(n * d, d, |_, _| gaussian_c64(rng));
    let q = g.qr().q();
    (0..n)
        .map(|a| Operator::from_matrix(q.rows(a * d, d).into_owned()).unwrap())
        .collect()
}

pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Operator {
    random_kraus(d, 1, rng).pop().unwrap()
}

/// Random valid QSR. Each channel has its own random input measure (entries
/// bounded away from zero) and operators `V_i(w) = K_i(w) / sqrt(nu_i(w))`.
pub fn random_qsr<R: Rng + ?Sized>(d: usize, n_out: usize, n_channels: usize, rng: &mut R) -> QsRep {
    let raw: Vec<f64> = (0..n_channels).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let channels = raw
        .iter()
        .map(|a| {
            let kraus = random_kraus(d, n_out, rng);
            let w: Vec<f64> = (0..n_out).map(|_| rng.random_range(0.2..1.0)).collect();
            let sum: f64 = w.iter().sum();
            let nu: Vec<f64> = w.iter().map(|x| x / sum).collect();
            let ops = kraus.iter().zip(&nu).map(|(k, p)| k.scale_real(1.0 / p.sqrt())).collect();
            Channel { alpha: a / total, nu, ops }
        })
        .collect();
    QsRep::new((0..n_out).map(|w| w.to_string()).collect(), channels).unwrap()
}
