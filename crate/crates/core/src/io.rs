//! Versioned JSON model documents.
//!
//! Every file carries `schema_version` and a `kind` tag
//! (`qsr`, `chain`, `sde`, `probe-chain`), plus an optional `run` section
//! with sampling parameters that command-line flags override.

use serde::{Deserialize, Serialize};

use crate::chain::{ChainModel, Kernel, KernelEntry, TimeGrid};
use crate::error::{Error, Result};
use crate::instrument::QsRep;
use crate::linalg::{Operator, StateVector};
use crate::nondemolition::{cnot, partial_swap, ProbeChain, StepGenerator};
use crate::sde::{JumpChannel, OutputConfig, SdeModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Full-state dump cadence for SDE samples; 0 disables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_every: Option<usize>,
    /// RK4 substeps per grid step for the master-equation oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<usize>,
    /// `C` in the comparison tolerance `C dt + 3σ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_constant: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Document {
    pub schema_version: u32,
    #[serde(flatten)]
    pub model: ModelDocument,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelDocument {
    Qsr(QsrDocument),
    Chain(ChainDocument),
    Sde(SdeDocument),
    ProbeChain(ProbeChainDocument),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QsrDocument {
    pub qsr: QsRep,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<StateVector>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum KernelSpec {
    Projective { observable: Operator },
    KrausRepeated { kraus: Vec<Operator> },
    Identity { dim: usize, probs: Vec<f64> },
    HistoryDependentDemo,
    /// Same entries at every step.
    Repeated { entries: Vec<KernelEntry> },
    /// One entry list per step.
    Explicit { steps: Vec<Vec<KernelEntry>> },
}

impl KernelSpec {
    pub fn build(&self) -> Result<Kernel> {
        Ok(match self {
            Self::Projective { observable } => Kernel::projective(observable)?,
            Self::KrausRepeated { kraus } => Kernel::kraus_repeated(kraus),
            Self::Identity { dim, probs } => Kernel::identity(*dim, probs),
            Self::HistoryDependentDemo => Kernel::history_dependent_demo(),
            Self::Repeated { entries } => Kernel::Repeated(entries.clone()),
            Self::Explicit { steps } => Kernel::PerStep(steps.clone()),
        })
    }

    fn is_history_dependent(&self) -> bool {
        matches!(self, Self::HistoryDependentDemo)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainDocument {
    pub grid: TimeGrid,
    pub kernel: KernelSpec,
    /// Defaults to true for every generator except the history-dependent demo.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markov: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<StateVector>,
}

impl ChainDocument {
    pub fn build(&self) -> Result<ChainModel> {
        let markov = self.markov.unwrap_or(!self.kernel.is_history_dependent());
        let grid = TimeGrid::new(self.grid.n_steps, self.grid.dt)?;
        ChainModel::new(grid, self.kernel.build()?, markov)
    }

    pub fn from_model(m: &ChainModel, initial_state: Option<StateVector>) -> Self {
        let kernel = match m.kernel() {
            Kernel::Repeated(entries) => KernelSpec::Repeated { entries: entries.clone() },
            Kernel::PerStep(steps) => KernelSpec::Explicit { steps: steps.clone() },
            Kernel::HistoryDependent { .. } => KernelSpec::HistoryDependentDemo,
        };
        Self { grid: *m.grid(), kernel, markov: Some(m.is_markov()), initial_state }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdeDocument {
    #[serde(rename = "H")]
    pub h: Operator,
    #[serde(rename = "L", default)]
    pub diffusive: Vec<Operator>,
    #[serde(rename = "J", default)]
    pub jumps: Vec<JumpChannel>,
    #[serde(default)]
    pub output: OutputConfig,
    pub grid: TimeGrid,
    pub initial_state: StateVector,
}

impl SdeDocument {
    pub fn build(&self) -> Result<SdeModel> {
        let m = SdeModel::build(self.h.clone(), self.diffusive.clone(), self.jumps.clone())?;
        self.output.check(&m)?;
        if self.initial_state.dim() != m.dim() {
            return Err(Error::DimensionMismatch { expected: m.dim(), found: self.initial_state.dim() });
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeChainDocument {
    pub system_dim: usize,
    #[serde(default = "default_probe_dim")]
    pub probe_dim: usize,
    pub n_steps: usize,
    pub f: StateVector,
    pub step: StepGenerator,
    /// Defaults to Pauli Z for qubit probes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_observable: Option<Operator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_observable: Option<Operator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<StateVector>,
}

fn default_probe_dim() -> usize {
    2
}

impl ProbeChainDocument {
    pub fn build(&self) -> Result<ProbeChain> {
        let probe_observable = match (&self.probe_observable, self.probe_dim) {
            (Some(q), _) => q.clone(),
            (None, 2) => Operator::pauli_z(),
            (None, _) => return Err(Error::InvalidModel("probe_observable is required unless probe_dim = 2".into())),
        };
        let named = |u: Operator, w: Option<Operator>| -> Result<(Operator, Option<Operator>)> {
            if self.system_dim != 2 || self.probe_dim != 2 {
                return Err(Error::InvalidModel("named step generators need a qubit system and qubit probes".into()));
            }
            Ok((u, w))
        };
        let (u, w) = match &self.step {
            StepGenerator::Identity => (Operator::identity(self.system_dim * self.probe_dim), None),
            StepGenerator::Cnot => named(cnot(), None)?,
            StepGenerator::PartialSwap { theta } => named(partial_swap(*theta), None)?,
            StepGenerator::RecouplingCounterexample => {
                let pc = ProbeChain::recoupling_counterexample(1)?;
                named(pc.step_unitary().clone(), pc.recoupling().cloned())?
            }
            StepGenerator::Explicit { step_unitary, recoupling } => (step_unitary.clone(), recoupling.clone()),
        };
        ProbeChain::new(self.system_dim, self.probe_dim, self.n_steps, self.f.clone(), u, probe_observable, w)
    }
}

/// Parses a document and checks its schema version.
pub fn parse_document(text: &str) -> Result<Document> {
    let doc: Document = serde_json::from_str(text).map_err(|e| Error::Parse(format!("malformed model file: {e}")))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            doc.schema_version
        )));
    }
    Ok(doc)
}

pub fn load_document(path: &std::path::Path) -> Result<Document> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_document(&text)
}
