use std::path::{Path, PathBuf};

use eml_core::builders::{build, hybrid_erasure_set, ProtocolConfig};
use eml_core::fit::{FitForm, FitPoint};
use eml_core::noise::{named_scenario, NoiseRegion, SCENARIO_NAMES};
use eml_core::{Cadence, NoiseParams, PostSelectionPolicy, Scenario};
use serde::Deserialize;

use crate::fail::CliError;

/// Which qubits are erasure qubits.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErasureSelection {
    #[default]
    All,
    None,
    /// The injection ancilla and its two hook partners.
    Hybrid,
    Qubits(Vec<u32>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub form: FitForm,
    pub points: Vec<FitPoint>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: Option<ProtocolConfig>,
    /// Registered scenario name; mutually exclusive with `noise`.
    pub scenario: Option<String>,
    pub noise: Option<NoiseParams>,
    #[serde(default)]
    pub erasure: ErasureSelection,
    #[serde(default)]
    pub cadence: Cadence,
    #[serde(default)]
    pub region: NoiseRegion,
    #[serde(default)]
    pub policy: PostSelectionPolicy,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Input file for `decode` (sample records) and `annotate` (a circuit).
    pub input: Option<PathBuf>,
    /// `(d1, r)` points for `sweep`.
    pub sweep: Option<Vec<(usize, usize)>>,
    pub fit: Option<FitSpec>,
    /// Pair budget for the optional second-order search in `enumerate`.
    pub max_pairs: Option<u64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(CliError::schema)
    }

    pub fn protocol(&self) -> Result<&ProtocolConfig, CliError> {
        self.protocol.as_ref().ok_or_else(|| CliError::field("protocol", "missing protocol section"))
    }

    pub fn noise(&self) -> Result<NoiseParams, CliError> {
        match (&self.scenario, &self.noise) {
            (Some(_), Some(_)) => Err(CliError::field("scenario", "give either `scenario` or `noise`, not both")),
            (Some(name), None) => named_scenario(name).ok_or_else(|| {
                CliError::field("scenario", format!("unknown scenario '{name}'; expected one of {}", SCENARIO_NAMES.join(", ")))
            }),
            (None, Some(n)) => {
                n.validate().map_err(|e| CliError::field("noise", e.to_string()))?;
                Ok(*n)
            }
            (None, None) => Err(CliError::field("noise", "give a `scenario` name or explicit `noise` rates")),
        }
    }

    pub fn scenario_name(&self) -> String {
        self.scenario.clone().unwrap_or_else(|| "custom".into())
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let protocol = self.protocol()?.clone();
        let mut s = Scenario::new(&self.scenario_name(), protocol, self.noise()?);
        s.region = self.region;
        s.cadence = self.cadence;
        s.policy = self.policy;
        s.erasure_qubits = match &self.erasure {
            ErasureSelection::All => None,
            ErasureSelection::None => Some(Vec::new()),
            ErasureSelection::Qubits(q) => Some(q.clone()),
            ErasureSelection::Hybrid => {
                let c = build(&s.protocol)?;
                Some(hybrid_erasure_set(&c)?.into_iter().collect())
            }
        };
        Ok(s)
    }
}
