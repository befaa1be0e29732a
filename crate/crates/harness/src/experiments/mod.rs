//! One module per experiment kind. Each exposes a `Params` struct (every
//! field defaulted) and `run(&Params, seed, &Artifacts) -> Result<Report>`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};

use crate::report::{Report, Timed};
use crate::spec::{ExperimentKind, ExperimentSpec};

pub mod background;
pub mod converge;
pub mod gamma;
pub mod identities;
pub mod pipeline;
pub mod series;
pub mod sinc;
pub mod sobolev;
pub mod solve;
pub mod uniqueness;

/// Where CSV and JSON artifacts go; `None` discards them.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    dir: Option<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
        })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Creates `name` in the artifact directory, hands it to `f`, and lists it in the report.
    pub fn write(
        &self,
        report: &mut Report,
        name: &str,
        f: impl FnOnce(BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            f(BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))?;
            report.artifact(name);
        }
        Ok(())
    }
}

/// Runs one experiment; `out` overrides the spec's artifact directory.
pub fn run(spec: &ExperimentSpec, out: Option<&Path>) -> Result<Timed> {
    let arts = Artifacts::new(out.or(spec.out.as_deref()))?;
    let seed = spec.seed;
    let start = Instant::now();
    let report = match spec.kind {
        ExperimentKind::Identities => identities::run(&spec.params()?, seed, &arts),
        ExperimentKind::SobolevAudit => sobolev::run(&spec.params()?, seed, &arts),
        ExperimentKind::Gamma => gamma::run(&spec.params()?, seed, &arts),
        ExperimentKind::Series => series::run(&spec.params()?, seed, &arts),
        ExperimentKind::Background => background::run(&spec.params()?, seed, &arts),
        ExperimentKind::Solve => solve::run(&spec.params()?, seed, &arts),
        ExperimentKind::Converge => converge::run(&spec.params()?, seed, &arts),
        ExperimentKind::Uniqueness => uniqueness::run(&spec.params()?, seed, &arts),
        ExperimentKind::SincAudit => sinc::run(&spec.params()?, seed, &arts),
        ExperimentKind::Pipeline => pipeline::run(&spec.params()?, seed, &arts),
    }?;
    Ok(Timed {
        report,
        elapsed: start.elapsed(),
    })
}

/// Least-squares fit of `log e` against `log h`: `(order, R²)`.
pub fn fit_order(hs: &[f64], errs: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = hs.iter().zip(errs).map(|(h, e)| (h.ln(), e.ln())).collect();
    let (slope, _, r2) = mkdv_core::background::fit_slope(&pts);
    (slope, r2)
}

/// `max/min` of a positive sequence.
pub fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::MIN, f64::max);
    let lo = v.iter().copied().fold(f64::MAX, f64::min);
    hi / lo
}
