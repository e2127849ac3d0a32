//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line with
//! its residuals and tolerances to stderr (uncaptured), then asserts.
//!
//! Tests share a lock so the timing budgets are measured without
//! interference from the other criteria.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use qsr_core::chain::{validate_chain, ChainModel, Kernel, TimeGrid};
use qsr_core::fixtures::{amplitude_damping_kraus, random_hermitian, random_kraus, random_qsr, random_state, weak_z_kraus};
use qsr_core::instrument::{instrument_result, validate_qsr, von_neumann_qsr};
use qsr_core::lindblad::derive_generator;
use qsr_core::linalg::{trace_distance_ops, DensityOperator, Operator, StateVector};
use qsr_core::nondemolition::ProbeChain;
use qsr_core::report::ValidationReport;
use qsr_core::sde::{ensemble_mean, ensemble_state, flow_compose_check, JumpChannel, SdeModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: u32, passed: bool, detail: String) {
    let line = format!("criterion {n}: {} {detail}\n", if passed { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn worst(report: &ValidationReport, names: &[&str]) -> f64 {
    names
        .iter()
        .map(|n| report.get(n).unwrap_or_else(|| panic!("missing check {n}")).residual)
        .fold(0.0, f64::max)
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn chain_fixtures() -> Vec<(&'static str, ChainModel)> {
    let grid = TimeGrid::new(3, 0.1).unwrap();
    vec![
        ("projective_z", ChainModel::new(grid, Kernel::projective(&Operator::pauli_z()).unwrap(), true).unwrap()),
        ("amplitude_damping", ChainModel::new(grid, Kernel::kraus_repeated(&amplitude_damping_kraus(0.3)), true).unwrap()),
        ("weak_z", ChainModel::new(grid, Kernel::kraus_repeated(&weak_z_kraus(0.4)), true).unwrap()),
        ("history_dependent", ChainModel::new(grid, Kernel::history_dependent_demo(), false).unwrap()),
    ]
}

fn qubit_mixed_model() -> SdeModel {
    let h = Operator::pauli_x().scale_real(0.3);
    let l = Operator::pauli_z().scale_real(0.5f64.sqrt());
    SdeModel::build(h, vec![l], vec![JumpChannel::new(Operator::sigma_minus(), 1.0)]).unwrap()
}

#[test]
fn criterion_01_normalization_suite() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let tol = 1e-10;
    let (mut qsr_worst, mut chain_worst) = (0.0f64, 0.0f64);
    let (mut n_qsr, mut n_chain) = (0, 0);
    for &d in &[2usize, 3] {
        for i in 0..10 {
            let q = random_qsr(d, 2 + i % 3, 1 + i % 2, &mut rng);
            let r = validate_qsr(&q);
            for c in r.checks.iter().filter(|c| c.name.starts_with("measure_normalization") || c.name.starts_with("operator_normalization")) {
                qsr_worst = qsr_worst.max(c.residual);
            }
            n_qsr += 1;

            let steps: Vec<_> = (0..3)
                .map(|_| match Kernel::kraus_repeated(&random_kraus(d, 2 + i % 2, &mut rng)) {
                    Kernel::Repeated(e) => e,
                    _ => unreachable!(),
                })
                .collect();
            let m = ChainModel::new(TimeGrid::new(3, 0.1).unwrap(), Kernel::PerStep(steps), true).unwrap();
            let r = validate_chain(&m, &mut rng);
            chain_worst = chain_worst.max(worst(&r, &["step_probability_normalization", "step_operator_normalization", "pov_normalization"]));
            n_chain += 1;
        }
    }
    let elapsed = start.elapsed();
    let passed = qsr_worst <= tol && chain_worst <= tol && elapsed < Duration::from_secs(10);
    verdict(
        1,
        passed,
        format!(
            "{n_qsr} QSReps worst {qsr_worst:.2e}, {n_chain} chains worst {chain_worst:.2e} (tol {tol:.0e}); {:.2}s (limit 10s)",
            secs(elapsed)
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_02_von_neumann() {
    let _g = serial();
    let q = von_neumann_qsr(&Operator::pauli_z()).unwrap();
    let rho = DensityOperator::pure(&StateVector::plus()).unwrap();
    let res = instrument_result(&q, &rho).unwrap();
    let mut law_err: f64 = 0.0;
    let mut post_err: f64 = 0.0;
    for (label, basis) in [("1", 0usize), ("-1", 1)] {
        let w = q.outcome_index(label).expect("eigenvalue label");
        law_err = law_err.max((res.output_law[w] - 0.5).abs());
        let post = res.posterior_family[w].as_ref().expect("nonzero probability");
        let expected = StateVector::basis(2, basis).projector();
        post_err = post_err.max((post.op() - &expected).frobenius_norm());
    }
    let tol = 1e-12;
    let passed = law_err <= tol && post_err <= tol;
    verdict(2, passed, format!("output law error {law_err:.2e}, posterior error {post_err:.2e} (tol {tol:.0e})"));
    assert!(passed);
}

#[test]
fn criterion_03_chain_battery() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let tol = 1e-10;
    let mut battery: f64 = 0.0;
    let mut paths = 0;
    for (_, m) in chain_fixtures() {
        let r = validate_chain(&m, &mut rng);
        assert_eq!(r.mode.as_deref(), Some("enumeration"));
        battery = battery.max(worst(&r, &["cocycle", "boundary_identity", "martingale_compatibility", "instrument_composition", "posterior_normalization"]));
        paths = paths.max(m.record_count(m.n_steps()));
    }
    let demo = chain_fixtures().pop().unwrap().1;
    let pasts = vec![vec![0], vec![1]];
    let rho = StateVector::basis(2, 0).projector();
    let markov = demo.markov_independence_residual(&pasts, 1, 3, &rho).unwrap();
    let elapsed = start.elapsed();
    let passed = battery <= tol && markov > 1e-3 && elapsed < Duration::from_secs(10);
    verdict(
        3,
        passed,
        format!(
            "battery worst {battery:.2e} over {paths} paths (tol {tol:.0e}); history-dependent Markov residual {markov:.3} (> 1e-3); {:.2}s (limit 10s)",
            secs(elapsed)
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_04_averaging_identity() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let tol = 1e-10;
    let mut dist: f64 = 0.0;
    for (_, m) in chain_fixtures() {
        for _ in 0..3 {
            let psi = random_state(2, &mut rng);
            for k in 0..=m.n_steps() {
                let averaged = m.averaged_posterior(&psi, k).unwrap();
                let composed = m.composed_instrument(k, &psi.projector()).unwrap();
                dist = dist.max(trace_distance_ops(&averaged, &composed).unwrap());
            }
        }
    }
    let passed = dist <= tol;
    verdict(4, passed, format!("max trace distance {dist:.2e} (tol {tol:.0e})"));
    assert!(passed);
}

#[test]
fn criterion_05_sde_martingale() {
    let _g = serial();
    let model = qubit_mixed_model();
    let grid = TimeGrid::new(200, 0.005).unwrap();
    let u = StateVector::basis(2, 1);
    let n_traj = 10_000;
    let final_norm = |r: &qsr_core::sde::TrajectoryRecord| *r.norm_sq.last().unwrap();

    let start = Instant::now();
    let (mean, se) = ensemble_mean(&model, &u, &grid, n_traj, 55, 1, final_norm).unwrap();
    let serial_time = start.elapsed();

    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let scaling = if cores >= 2 {
        let workers = cores.min(4);
        let start = Instant::now();
        let (mean_p, _) = ensemble_mean(&model, &u, &grid, n_traj, 55, workers, final_norm).unwrap();
        let speedup = secs(serial_time) / secs(start.elapsed());
        assert_eq!(mean_p.to_bits(), mean.to_bits());
        Some((workers, speedup))
    } else {
        None
    };

    let dev = (mean - 1.0).abs();
    let mut passed = dev <= 3.0 * se && serial_time < Duration::from_secs(60);
    let scaling_note = match scaling {
        Some((w, s)) => {
            passed &= s >= 0.6 * w as f64;
            format!("speedup {s:.2}x on {w} workers (need >= {:.1}x)", 0.6 * w as f64)
        }
        None => "scaling not measurable: 1 core available".to_string(),
    };
    verdict(
        5,
        passed,
        format!(
            "|mean - 1| = {dev:.2e} vs 3SE = {:.2e} (gamma dt = 0.005, {n_traj} paths); {:.2}s single-threaded (limit 60s); {scaling_note}",
            3.0 * se,
            secs(serial_time)
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_06_unraveling_consistency() {
    let _g = serial();
    let start = Instant::now();
    let gamma = 1.0;
    let model = SdeModel::build(Operator::zeros(2), vec![], vec![JumpChannel::new(Operator::sigma_minus(), gamma)]).unwrap();
    let u = StateVector::basis(2, 1);
    let t_end = 2.0;
    let n_traj = 10_000;
    let mut passed = true;
    let mut biases = Vec::new();
    let mut parts = Vec::new();
    for n_steps in [200usize, 400] {
        let grid = TimeGrid::spanning(t_end, n_steps).unwrap();
        let est = ensemble_state(&model, &u, &grid, n_traj, 66, 0).unwrap();
        let mut worst_excess = f64::NEG_INFINITY;
        let mut bias: f64 = 0.0;
        for (k, &t) in est.times.iter().enumerate() {
            let (p, se) = est.population(k, 1);
            let err = (p - (-gamma * t).exp()).abs();
            let tol = (3.0 * se).max(5.0 * gamma * grid.dt);
            worst_excess = worst_excess.max(err - tol);
            bias = bias.max(err);
        }
        // Full matrix against the RK4 oracle for the derived generator.
        let gen = derive_generator(&model).unwrap();
        let oracle = gen.evolve(&DensityOperator::pure(&u).unwrap(), &grid, 4).unwrap();
        let mut oracle_worst: f64 = 0.0;
        for (k, rho) in oracle.iter().enumerate() {
            let sigma = est.std_err[k].norm();
            let d = trace_distance_ops(&est.mean[k], rho.op()).unwrap();
            oracle_worst = oracle_worst.max(d - (5.0 * gamma * grid.dt + 3.0 * sigma));
        }
        passed &= worst_excess <= 0.0 && oracle_worst <= 0.0;
        parts.push(format!("dt={:.4}: max bias {bias:.3e}, margin {:.3e}", grid.dt, -worst_excess));
        biases.push(bias);
    }
    let ratio = biases[1] / biases[0];
    let elapsed = start.elapsed();
    passed &= (0.4..=0.6).contains(&ratio) && elapsed < Duration::from_secs(120);
    verdict(
        6,
        passed,
        format!("{}; bias ratio dt/2 : dt = {ratio:.3} (first order: 0.4..0.6); {n_traj} paths; {:.2}s (limit 120s)", parts.join("; "), secs(elapsed)),
    );
    assert!(passed);
}

#[test]
fn criterion_07_flow_composition() {
    let _g = serial();
    let start = Instant::now();
    let model = qubit_mixed_model();
    let grid = TimeGrid::new(100, 0.005).unwrap();
    let u = StateVector::plus();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        worst = worst.max(flow_compose_check(&model, &u, &grid, &mut rng).unwrap());
    }
    let elapsed = start.elapsed();
    let tol = 1e-12;
    let passed = worst <= tol && elapsed < Duration::from_secs(10);
    verdict(7, passed, format!("replay residual {worst:.2e} over 100 seeds (tol {tol:.0e}); {:.2}s (limit 10s)", secs(elapsed)));
    assert!(passed);
}

fn nondemolition_residuals(pc: &ProbeChain, z: &Operator, psi: &StateVector) -> f64 {
    let n = pc.n_steps();
    let mut worst: f64 = 0.0;
    for t in 1..=n {
        for s in 1..=t {
            let (r1, r2) = pc.nondemolition_check(z, t, s).unwrap();
            let (r81, _) = pc.cocycle_at_vector_check(psi, t, s, 1).unwrap();
            worst = worst.max(r1).max(r2).max(r81).max(pc.commutativity_residual(t, s).unwrap());
        }
    }
    worst
}

#[test]
fn criterion_08_nondemolition_audit() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let observables = [Operator::pauli_x(), Operator::pauli_y(), random_hermitian(2, &mut rng)];
    let psi = random_state(2, &mut rng);
    let tol = 1e-9;
    let mut good: f64 = 0.0;
    for pc in [ProbeChain::cnot(3).unwrap(), ProbeChain::partial_swap(0.3, 3).unwrap()] {
        for z in &observables {
            good = good.max(nondemolition_residuals(&pc, z, &psi));
        }
    }
    let bad = nondemolition_residuals(&ProbeChain::recoupling_counterexample(3).unwrap(), &observables[0], &psi);
    let elapsed = start.elapsed();
    let passed = good <= tol && bad > 0.1 && elapsed < Duration::from_secs(10);
    verdict(
        8,
        passed,
        format!("cnot/partial-swap worst commutator {good:.2e} (tol {tol:.0e}); recoupling residual {bad:.3} (> 0.1); {:.2}s (limit 10s)", secs(elapsed)),
    );
    assert!(passed);
}

#[test]
fn criterion_09_dilation_equivalence() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let pc = ProbeChain::partial_swap(0.3, 3).unwrap();
    let mut dev: f64 = 0.0;
    let mut states = vec![StateVector::basis(2, 0), StateVector::basis(2, 1), StateVector::plus()];
    states.extend((0..5).map(|_| random_state(2, &mut rng)));
    for psi in &states {
        dev = dev.max(pc.equivalence_check(psi, 3).unwrap());
    }
    let elapsed = start.elapsed();
    let tol = 1e-10;
    let passed = dev <= tol && elapsed < Duration::from_secs(10);
    verdict(
        9,
        passed,
        format!("max deviation {dev:.2e} over all 8 records x {} inputs (tol {tol:.0e}); {:.2}s (limit 10s)", states.len(), secs(elapsed)),
    );
    assert!(passed);
}

fn model_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models").join(name)
}

fn sample_bytes(model: &Path, workers: usize, out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_qsr"))
        .arg("sample")
        .arg(model)
        .args(["--seed", "2024", "--n-traj", "100", "--workers", &workers.to_string(), "--out"])
        .arg(out)
        .status()
        .expect("run qsr");
    assert!(status.success(), "sample exited with {status}");
    std::fs::read(out.join("trajectories.csv")).expect("trajectories.csv")
}

#[test]
fn criterion_10_determinism() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut sizes = Vec::new();
    for name in ["diffusive_jump_sde.json", "amplitude_damping_chain.json"] {
        let model = model_path(name);
        let runs: Vec<Vec<u8>> = [(1usize, "a"), (1, "b"), (8, "c")]
            .iter()
            .map(|&(w, tag)| sample_bytes(&model, w, &dir.path().join(format!("{name}-{tag}"))))
            .collect();
        identical &= runs[0] == runs[1] && runs[0] == runs[2];
        sizes.push(format!("{name}: {} bytes", runs[0].len()));
        let rows = runs[0].split(|&b| b == b'\n').filter(|l| !l.is_empty()).count();
        assert!(rows > 100);
    }
    verdict(10, identical, format!("sample output byte-identical across reruns and 1 vs 8 workers, 100 paths ({})", sizes.join(", ")));
    assert!(identical);
}
