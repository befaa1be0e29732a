//! Experiment specification files.
//!
//! ```json
//! {"kind": "converge", "seed": 7, "params": {"radius": 40}}
//! ```
//!
//! `params` is specific to the kind; omitted fields take the defaults of the
//! experiment's `Params` struct. `out` is an optional artifact directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Identities,
    SobolevAudit,
    Gamma,
    Series,
    Background,
    Solve,
    Converge,
    Uniqueness,
    #[serde(alias = "sinc")]
    SincAudit,
    Pipeline,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        Self::Identities,
        Self::SobolevAudit,
        Self::Gamma,
        Self::Series,
        Self::Background,
        Self::Solve,
        Self::Converge,
        Self::Uniqueness,
        Self::SincAudit,
        Self::Pipeline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Identities => "identities",
            Self::SobolevAudit => "sobolev_audit",
            Self::Gamma => "gamma",
            Self::Series => "series",
            Self::Background => "background",
            Self::Solve => "solve",
            Self::Converge => "converge",
            Self::Uniqueness => "uniqueness",
            Self::SincAudit => "sinc_audit",
            Self::Pipeline => "pipeline",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = if s == "sinc" { "sinc_audit" } else { s };
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .with_context(|| format!("unknown experiment kind {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default = "empty_params")]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn empty_params() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self {
            kind,
            params: empty_params(),
            seed,
            out: None,
        }
    }

    pub fn with_params(mut self, params: serde_json::Value) -> Self {
        self.params = params;
        self
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Deserializes `params` into an experiment's parameter struct.
    pub fn params<P: serde::de::DeserializeOwned>(&self) -> Result<P> {
        let v = if self.params.is_null() { empty_params() } else { self.params.clone() };
        serde_json::from_value(v).with_context(|| format!("params for {}", self.kind))
    }
}
