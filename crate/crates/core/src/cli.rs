//! `qsr` command-line front end.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for
//! unreadable or invalid input.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::chain::{validate_chain, ChainModel, TimeGrid};
use crate::error::Error;
use crate::fixtures;
use crate::instrument::{self, QsRep};
use crate::io::{self, ChainDocument, Document, ModelDocument, SdeDocument};
use crate::lindblad::{self, derive_generator};
use crate::linalg::{trace_distance_ops, DensityOperator, Operator, StateVector};
use crate::nondemolition::{self, ProbeChain};
use crate::parallel;
use crate::report::ValidationReport;
use crate::sde::{self, SdeModel};

const DEFAULT_N_TRAJ: usize = 1000;
const SAMPLE_BATCH: usize = 256;
const NON_MARKOV_REFUSAL: &str = "no master-equation oracle for history-dependent kernels";

#[derive(Parser, Debug)]
#[command(name = "qsr", version, about = "Simulate and verify quantum stochastic representations of continuous measurement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the invariant battery for a model file
    Validate(CommonArgs),
    /// Sample trajectories to CSV
    Sample(CommonArgs),
    /// Compare a trajectory ensemble with the master-equation oracle
    Compare(CommonArgs),
    /// Nondemolition audit of a probe-chain model
    Ndcheck(CommonArgs),
    /// Write the chain model extracted from a probe-chain model
    ExtractQsr(CommonArgs),
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Model file (JSON)
    model: PathBuf,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trajectories
    #[arg(long)]
    n_traj: Option<usize>,
    /// Grid step; the end time is kept and the step count recomputed
    #[arg(long)]
    dt: Option<f64>,
    /// Output file (reports) or directory (samples)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores
    #[arg(long)]
    workers: Option<usize>,
}

enum Failure {
    Input(String),
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(format!("i/o error: {e}"))
    }
}

type CmdResult = std::result::Result<(), Failure>;

struct RunConfig {
    seed: u64,
    n_traj: usize,
    workers: usize,
    dt: Option<f64>,
    out: Option<PathBuf>,
    dump_every: usize,
    refinement: usize,
    bias_constant: Option<f64>,
}

impl RunConfig {
    fn resolve(args: &CommonArgs, doc: &Document) -> Result<Self, Failure> {
        let run = &doc.run;
        let n_traj = args.n_traj.or(run.n_traj).unwrap_or(DEFAULT_N_TRAJ);
        if n_traj == 0 {
            return Err(Failure::Input("n_traj must be at least 1".into()));
        }
        if let Some(dt) = args.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Failure::Input(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(Self {
            seed: args.seed.or(run.seed).unwrap_or(0),
            n_traj,
            workers: args.workers.or(run.workers).unwrap_or(0),
            dt: args.dt,
            out: args.out.clone(),
            dump_every: run.dump_every.unwrap_or(0),
            refinement: run.refinement.unwrap_or(1).max(1),
            bias_constant: run.bias_constant,
        })
    }

    fn grid(&self, grid: &TimeGrid) -> Result<TimeGrid, Failure> {
        let grid = TimeGrid::new(grid.n_steps, grid.dt)?;
        Ok(match self.dt {
            Some(dt) => TimeGrid::new(((grid.t_end() / dt).round() as usize).max(1), dt)?,
            None => grid,
        })
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (name, args) = match &cli.command {
        Command::Validate(a) => ("validate", a),
        Command::Sample(a) => ("sample", a),
        Command::Compare(a) => ("compare", a),
        Command::Ndcheck(a) => ("ndcheck", a),
        Command::ExtractQsr(a) => ("extract-qsr", a),
    };
    let outcome = io::load_document(&args.model).map_err(Failure::from).and_then(|doc| {
        let cfg = RunConfig::resolve(args, &doc)?;
        match name {
            "validate" => cmd_validate(&doc, &cfg),
            "sample" => cmd_sample(&doc, &cfg),
            "compare" => cmd_compare(&doc, &cfg),
            "ndcheck" => cmd_ndcheck(&doc, &cfg),
            _ => cmd_extract(&doc, &cfg),
        }
    });
    match outcome {
        Ok(()) => 0,
        Err(Failure::Check) => 1,
        Err(Failure::Input(msg)) => {
            eprintln!("qsr {name}: {msg}");
            2
        }
    }
}

fn kind_name(m: &ModelDocument) -> &'static str {
    match m {
        ModelDocument::Qsr(_) => "qsr",
        ModelDocument::Chain(_) => "chain",
        ModelDocument::Sde(_) => "sde",
        ModelDocument::ProbeChain(_) => "probe-chain",
    }
}

fn emit_json(value: &Value, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize") + "\n";
    match out {
        Some(path) => std::fs::write(path, &text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_report(command: &str, kind: &str, report: &ValidationReport, cfg: &RunConfig) -> CmdResult {
    let passed = report.all_passed();
    emit_json(&json!({ "command": command, "kind": kind, "passed": passed, "report": report }), cfg.out.as_deref())?;
    for c in report.failures() {
        eprintln!("FAILED {}: residual {:.3e} vs tolerance {:.3e}", c.name, c.residual, c.tolerance);
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn default_state(d: usize) -> StateVector {
    StateVector::new(vec![crate::linalg::ONE; d]).unwrap().normalized().unwrap()
}

fn normalized_initial(state: &Option<StateVector>, d: usize) -> Result<StateVector, Failure> {
    match state {
        Some(s) if s.dim() != d => Err(Error::DimensionMismatch { expected: d, found: s.dim() }.into()),
        Some(s) => s.normalized().ok_or(Failure::Input("initial_state is zero".into())),
        None => Ok(default_state(d)),
    }
}

fn cmd_validate(doc: &Document, cfg: &RunConfig) -> CmdResult {
    let kind = kind_name(&doc.model);
    let report = match &doc.model {
        ModelDocument::Qsr(q) => instrument::validate_qsr(&q.qsr),
        ModelDocument::Chain(c) => {
            let mut chain = c.build()?;
            if cfg.dt.is_some() {
                chain = ChainModel::new(cfg.grid(chain.grid())?, chain.kernel().clone(), chain.is_markov())?;
            }
            validate_chain(&chain, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
        }
        ModelDocument::Sde(s) => validate_sde(s, cfg)?,
        ModelDocument::ProbeChain(p) => probe_audit(p, cfg)?,
    };
    emit_report("validate", kind, &report, cfg)
}

fn validate_sde(doc: &SdeDocument, cfg: &RunConfig) -> Result<ValidationReport, Failure> {
    let model = doc.build()?;
    let grid = cfg.grid(&doc.grid)?;
    model.check_grid(&grid)?;
    let u = &doc.initial_state;
    let mut report = ValidationReport::new();
    report.push("k_dissipation_identity", model.k_residual(), 1e-10);

    let gen = derive_generator(&model)?;
    let psi = normalized_initial(&Some(u.clone()), model.dim())?;
    let h = grid.dt.min(1e-3);
    let coarse = lindblad::ito_consistency(&model, &gen, &psi, h)?;
    let fine = lindblad::ito_consistency(&model, &gen, &psi, h / 10.0)?;
    report.push("generator_ito_consistency", fine, 0.2 * coarse + 1e-12).note(format!("residual at dt={h:e} was {coarse:.3e}"));

    let mut flow: f64 = 0.0;
    for i in 0..10 {
        flow = flow.max(sde::flow_compose_check(&model, u, &grid, &mut parallel::trajectory_rng(cfg.seed, i))?);
    }
    report.push("flow_composition", flow, 1e-12);

    let no_output = sde::OutputConfig::default();
    let alpha = crate::linalg::C64::new(0.5, -0.75);
    let a = sde::simulate(&model, u, &grid, &no_output, &mut parallel::trajectory_rng(cfg.seed, 0))?;
    let b = sde::simulate(&model, &u.scale(alpha), &grid, &no_output, &mut parallel::trajectory_rng(cfg.seed, 0))?;
    let linear = a.psi.iter().zip(&b.psi).map(|(x, y)| x.scale(alpha).distance(y)).fold(0.0, f64::max);
    report.push("linearity", linear, 1e-13);
    let v = sde::evolution_matrix(&model, grid.dt, &a.noise_path(), 0, grid.n_steps)?;
    report.push("evolution_operator_identification", v.apply(u).distance(a.psi.last().unwrap()), 1e-12);

    let (mean, se) = sde::ensemble_mean(&model, u, &grid, cfg.n_traj, cfg.seed, cfg.workers, |r| *r.norm_sq.last().unwrap())?;
    report.push("martingale_mean", (mean - u.norm_sq()).abs(), 3.0 * se + 1e-12).note(format!("{} trajectories, 3 standard errors", cfg.n_traj));

    let rho0 = DensityOperator::pure(&psi)?;
    let evolved = gen.evolve(&rho0, &grid, cfg.refinement)?;
    let trace = evolved.iter().map(|r| (r.op().trace().re - 1.0).abs()).fold(0.0, f64::max);
    let herm = evolved.iter().map(|r| r.op().hermitian_residual()).fold(0.0, f64::max);
    report.push("oracle_trace", trace, lindblad::TRACE_TOL);
    report.push("oracle_hermiticity", herm, lindblad::TRACE_TOL);
    report.push("oracle_semigroup", gen.semigroup_check(&rho0, &grid, grid.n_steps / 2)?, 1e-9);
    Ok(report)
}

fn probe_chain(doc: &io::ProbeChainDocument) -> Result<ProbeChain, Failure> {
    Ok(doc.build()?)
}

fn probe_audit(doc: &io::ProbeChainDocument, cfg: &RunConfig) -> Result<ValidationReport, Failure> {
    let pc = probe_chain(doc)?;
    let z = match &doc.system_observable {
        Some(z) => z.clone(),
        None => fixtures::random_hermitian(pc.system_dim(), &mut ChaCha8Rng::seed_from_u64(cfg.seed)),
    };
    let psi = normalized_initial(&doc.initial_state, pc.system_dim())?;
    Ok(nondemolition::audit(&pc, &z, &psi)?)
}

fn cmd_ndcheck(doc: &Document, cfg: &RunConfig) -> CmdResult {
    match &doc.model {
        ModelDocument::ProbeChain(p) => {
            let report = probe_audit(p, cfg)?;
            emit_report("ndcheck", "probe-chain", &report, cfg)
        }
        other => Err(Failure::Input(format!("ndcheck needs a probe-chain model, got {}", kind_name(other)))),
    }
}

fn cmd_extract(doc: &Document, cfg: &RunConfig) -> CmdResult {
    match &doc.model {
        ModelDocument::ProbeChain(p) => {
            let pc = probe_chain(p)?;
            let chain = pc.extract_qsr()?;
            let out = Document {
                schema_version: io::SCHEMA_VERSION,
                model: ModelDocument::Chain(ChainDocument::from_model(&chain, p.initial_state.clone())),
                run: doc.run.clone(),
            };
            emit_json(&serde_json::to_value(&out).expect("documents serialize"), cfg.out.as_deref())
        }
        other => Err(Failure::Input(format!("extract-qsr needs a probe-chain model, got {}", kind_name(other)))),
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Per-trajectory CSV rows and optional JSON-lines state dump.
type Chunk = (String, String);

fn sample_sde(doc: &SdeDocument, cfg: &RunConfig, i: usize, model: &SdeModel, grid: &TimeGrid) -> Result<Chunk, Error> {
    let mut rng = parallel::trajectory_rng(cfg.seed, i as u64);
    let r = sde::simulate(model, &doc.initial_state, grid, &doc.output, &mut rng)?;
    let n_jumps = model.jumps().len();
    let mut csv = String::new();
    let mut dump = String::new();
    for k in 0..=grid.n_steps {
        let _ = write!(csv, "{i},{},{}", fmt_f64(grid.time(k)), fmt_f64(r.norm_sq[k]));
        for x in &r.output_x[k] {
            let _ = write!(csv, ",{}", fmt_f64(*x));
        }
        for m in 0..n_jumps {
            let flag = k > 0 && r.jumps.iter().any(|e| e.step == k - 1 && e.channel == m);
            let _ = write!(csv, ",{}", flag as u8);
        }
        csv.push('\n');
        if cfg.dump_every > 0 && k % cfg.dump_every == 0 {
            let line = json!({ "trajectory_id": i, "step": k, "t": grid.time(k), "psi": r.psi[k] });
            dump.push_str(&line.to_string());
            dump.push('\n');
        }
    }
    Ok((csv, dump))
}

fn sample_chain(chain: &ChainModel, psi0: &StateVector, cfg: &RunConfig, i: usize) -> Chunk {
    let mut rng = parallel::trajectory_rng(cfg.seed, i as u64);
    let (x, states) = chain.sample_trajectory(psi0, &mut rng);
    let mut csv = String::new();
    for (k, phi) in states.iter().enumerate() {
        let outcome = if k == 0 { String::new() } else { x[k - 1].to_string() };
        let _ = writeln!(csv, "{i},{k},{outcome},{}", fmt_f64(phi.norm_sq()));
    }
    (csv, String::new())
}

fn sample_qsr(q: &QsRep, rho: &DensityOperator, cfg: &RunConfig, i: usize) -> Result<Chunk, Error> {
    let mut rng = parallel::trajectory_rng(cfg.seed, i as u64);
    let probs: Vec<f64> = (0..q.n_outcomes()).map(|w| instrument::probability(q, rho, &[w])).collect::<Result<_, _>>()?;
    let u = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut pick = probs.len() - 1;
    for (w, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            pick = w;
            break;
        }
    }
    Ok((format!("{i},{},{}\n", q.outcomes()[pick], fmt_f64(probs[pick])), String::new()))
}

fn cmd_sample(doc: &Document, cfg: &RunConfig) -> CmdResult {
    enum Sampler {
        Sde(SdeModel, TimeGrid),
        Chain(ChainModel, StateVector),
        Qsr(QsRep, DensityOperator),
    }
    let (header, sampler) = match &doc.model {
        ModelDocument::Sde(s) => {
            let model = s.build()?;
            let grid = cfg.grid(&s.grid)?;
            model.check_grid(&grid)?;
            let mut header = "trajectory_id,t,norm_sq".to_string();
            for i in 1..=s.output.n_outputs() {
                let _ = write!(header, ",X_{i}");
            }
            for m in 1..=model.jumps().len() {
                let _ = write!(header, ",jump_{m}");
            }
            (header, Sampler::Sde(model, grid))
        }
        ModelDocument::Chain(c) => {
            let mut chain = c.build()?;
            if cfg.dt.is_some() {
                chain = ChainModel::new(cfg.grid(chain.grid())?, chain.kernel().clone(), chain.is_markov())?;
            }
            let psi = normalized_initial(&c.initial_state, chain.dim())?;
            ("trajectory_id,step,outcome,norm_sq".to_string(), Sampler::Chain(chain, psi))
        }
        ModelDocument::ProbeChain(p) => {
            let chain = probe_chain(p)?.extract_qsr()?;
            let psi = normalized_initial(&p.initial_state, chain.dim())?;
            ("trajectory_id,step,outcome,norm_sq".to_string(), Sampler::Chain(chain, psi))
        }
        ModelDocument::Qsr(q) => {
            let psi = normalized_initial(&q.initial_state, q.qsr.dim())?;
            ("trajectory_id,outcome,probability".to_string(), Sampler::Qsr(q.qsr.clone(), DensityOperator::pure(&psi)?))
        }
    };
    if cfg.dump_every > 0 && cfg.out.is_none() {
        return Err(Failure::Input("dump_every needs --out".into()));
    }
    let (mut csv_out, mut dump_out): (Box<dyn std::io::Write>, Option<Box<dyn std::io::Write>>) = match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let csv = std::io::BufWriter::new(std::fs::File::create(dir.join("trajectories.csv"))?);
            let dump = if cfg.dump_every > 0 && matches!(sampler, Sampler::Sde(..)) {
                Some(Box::new(std::io::BufWriter::new(std::fs::File::create(dir.join("states.jsonl"))?)) as Box<dyn std::io::Write>)
            } else {
                None
            };
            (Box::new(csv), dump)
        }
        None => (Box::new(std::io::BufWriter::new(std::io::stdout().lock())), None),
    };
    writeln!(csv_out, "{header}")?;
    let sde_doc = match &doc.model {
        ModelDocument::Sde(s) => Some(s),
        _ => None,
    };
    let mut start = 0;
    while start < cfg.n_traj {
        let end = (start + SAMPLE_BATCH).min(cfg.n_traj);
        let chunks = parallel::map_ordered(end - start, cfg.workers, |j| {
            let i = start + j;
            match &sampler {
                Sampler::Sde(model, grid) => sample_sde(sde_doc.unwrap(), cfg, i, model, grid),
                Sampler::Chain(chain, psi) => Ok(sample_chain(chain, psi, cfg, i)),
                Sampler::Qsr(q, rho) => sample_qsr(q, rho, cfg, i),
            }
        })?;
        for chunk in chunks {
            let (csv, dump) = chunk?;
            csv_out.write_all(csv.as_bytes())?;
            if let Some(d) = dump_out.as_mut() {
                d.write_all(dump.as_bytes())?;
            }
        }
        start = end;
    }
    csv_out.flush()?;
    if let Some(d) = dump_out.as_mut() {
        d.flush()?;
    }
    Ok(())
}

fn cmd_compare(doc: &Document, cfg: &RunConfig) -> CmdResult {
    match &doc.model {
        ModelDocument::Sde(s) => compare_sde(s, cfg),
        ModelDocument::Chain(c) => {
            let chain = c.build()?;
            let psi = normalized_initial(&c.initial_state, chain.dim())?;
            compare_chain(&chain, &psi, cfg)
        }
        ModelDocument::ProbeChain(p) => {
            let chain = probe_chain(p)?.extract_qsr()?;
            let psi = normalized_initial(&p.initial_state, chain.dim())?;
            compare_chain(&chain, &psi, cfg)
        }
        ModelDocument::Qsr(_) => Err(Failure::Input("compare needs a chain, sde or probe-chain model".into())),
    }
}

fn finish_compare(kind: &str, times: &[f64], rows: Vec<(f64, f64, f64)>, extra: Value, cfg: &RunConfig) -> CmdResult {
    let passed = rows.iter().all(|(d, _, tol)| d <= tol);
    let max_distance = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let mut value = json!({
        "command": "compare",
        "kind": kind,
        "passed": passed,
        "n_traj": cfg.n_traj,
        "seed": cfg.seed,
        "max_distance": max_distance,
        "times": times,
        "trace_distance": rows.iter().map(|r| r.0).collect::<Vec<_>>(),
        "std_err": rows.iter().map(|r| r.1).collect::<Vec<_>>(),
        "tolerance": rows.iter().map(|r| r.2).collect::<Vec<_>>(),
    });
    if let (Value::Object(map), Value::Object(more)) = (&mut value, extra) {
        map.extend(more);
    }
    emit_json(&value, cfg.out.as_deref())?;
    if passed {
        Ok(())
    } else {
        eprintln!("ensemble deviates from the oracle beyond tolerance (max distance {max_distance:.3e})");
        Err(Failure::Check)
    }
}

fn compare_sde(doc: &SdeDocument, cfg: &RunConfig) -> CmdResult {
    let model = doc.build()?;
    let grid = cfg.grid(&doc.grid)?;
    let u = normalized_initial(&Some(doc.initial_state.clone()), model.dim())?;
    let gen = derive_generator(&model)?;
    let oracle = gen.evolve(&DensityOperator::pure(&u)?, &grid, cfg.refinement)?;
    let est = sde::ensemble_state(&model, &u, &grid, cfg.n_traj, cfg.seed, cfg.workers)?;
    let l_scale: f64 = model.diffusive().iter().map(|l| l.operator_norm().powi(2)).sum();
    let h_scale = model.hamiltonian().operator_norm().powi(2) * grid.t_end();
    let c = cfg.bias_constant.unwrap_or(5.0 * (model.max_rate() + l_scale + h_scale));
    let bias = c * grid.dt;
    let rows = (0..=grid.n_steps)
        .map(|k| {
            let d = trace_distance_ops(&est.mean[k], oracle[k].op()).unwrap_or(f64::NAN);
            let sigma = est.std_err[k].norm();
            (d, sigma, bias + 3.0 * sigma + 1e-12)
        })
        .collect();
    let extra = json!({ "dt": grid.dt, "bias_constant": c, "bias_bound": bias, "norm_sq_mean": est.norm_sq_mean });
    finish_compare("sde", &est.times, rows, extra, cfg)
}

/// Physical-law sample average of normalized posteriors against the
/// dynamical map of a Markov chain.
fn compare_chain(chain: &ChainModel, psi0: &StateVector, cfg: &RunConfig) -> CmdResult {
    if !chain.is_markov() {
        return Err(Failure::Input(NON_MARKOV_REFUSAL.into()));
    }
    let n = chain.n_steps();
    let d = chain.dim();
    let rho0 = DensityOperator::pure(psi0)?;
    let oracle: Vec<DensityOperator> = (0..=n).map(|k| chain.unconditional_map(0, k, &rho0)).collect::<Result<_, _>>()?;
    type Acc = (Vec<Operator>, Vec<nalgebra::DMatrix<f64>>);
    let (sum, sq) = parallel::chunked_reduce(
        cfg.n_traj,
        cfg.workers,
        || -> Acc { (vec![Operator::zeros(d); n + 1], vec![nalgebra::DMatrix::zeros(d, d); n + 1]) },
        |acc, i| {
            let mut rng = parallel::trajectory_rng(cfg.seed, i as u64);
            let (_, states) = chain.sample_trajectory(psi0, &mut rng);
            for (k, phi) in states.iter().enumerate() {
                let p = phi.normalized().map(|v| v.projector()).unwrap_or_else(|| Operator::zeros(d));
                acc.1[k] += p.matrix().map(|z| z.norm_sqr());
                acc.0[k] = &acc.0[k] + &p;
            }
        },
        |a, b| {
            for k in 0..a.0.len() {
                a.0[k] = &a.0[k] + &b.0[k];
                a.1[k] += &b.1[k];
            }
        },
    )?;
    let nf = cfg.n_traj as f64;
    let rows = (0..=n)
        .map(|k| {
            let mean = sum[k].scale_real(1.0 / nf);
            let dist = trace_distance_ops(&mean, oracle[k].op()).unwrap_or(f64::NAN);
            let var = nalgebra::DMatrix::from_fn(d, d, |i, j| {
                let m = mean.get(i, j).norm_sqr();
                ((sq[k][(i, j)] / nf - m).max(0.0) / (nf - 1.0).max(1.0)).sqrt()
            });
            let sigma = var.norm();
            (dist, sigma, 3.0 * (d as f64).sqrt() * sigma + 1e-12)
        })
        .collect();
    let times = chain.grid().times();
    finish_compare("chain", &times, rows, json!({}), cfg)
}
