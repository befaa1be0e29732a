//! Run configuration shared by the solver experiments.
//!
//! ```json
//! {"h": 0.05, "k": 1e-3, "R": 30, "T": 0.25,
//!  "lattice": {"a0": ["1/2"]}, "initial_coeffs": [1.0],
//!  "u0": "builtin:gaussian", "watch": [[0,0],[3,3]]}
//! ```
//!
//! `u0` is `builtin:soliton`, `builtin:gaussian`, `builtin:zero` or
//! `file:<path>` (CSV with header `x,u`, one row per grid node). Builtin shapes
//! read their parameters from `u0_params`.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use mkdv_core::lattice::{build_lattice, default_gamma_min};
use mkdv_core::scheme::{ProbeConfig, ProbeNorm};
use mkdv_core::series::solve_coefficients;
use mkdv_core::smoothstep::Cutoff;
use mkdv_core::{Background, ExponentLattice, Mesh, MeshFunction, Rational, RunConfig, Side};
use serde::{Deserialize, Serialize};

use crate::soliton::Soliton;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    /// Initial exponents, strictly decreasing, as `"p/q"` strings.
    pub a0: Vec<String>,
    #[serde(default)]
    pub gamma_min: Option<String>,
}

impl LatticeSpec {
    pub fn exponents(&self) -> Result<Vec<Rational>> {
        self.a0
            .iter()
            .map(|s| s.parse::<Rational>().with_context(|| format!("exponent {s:?}")))
            .collect()
    }

    pub fn build(&self) -> Result<ExponentLattice> {
        let a0 = self.exponents()?;
        let gm = match &self.gamma_min {
            Some(s) => s.parse::<Rational>().with_context(|| format!("gamma_min {s:?}"))?,
            None => default_gamma_min(&a0).context("empty exponent list")?,
        };
        Ok(build_lattice(&a0, gm)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct U0Params {
    /// Soliton speed.
    pub c: f64,
    /// Gaussian `amplitude · exp(−((x − center)/width)²)`.
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
}

impl Default for U0Params {
    fn default() -> Self {
        Self {
            c: 1.0,
            amplitude: 2.0,
            width: 3.0,
            center: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSpec {
    pub samples: usize,
    pub refine: usize,
    /// Probe every this many steps; 0 probes only before the first step.
    pub every: usize,
    pub threshold: f64,
    pub norm: ProbeNorm,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            samples: 64,
            refine: 4,
            every: 1,
            threshold: 0.5,
            norm: ProbeNorm::Sh,
        }
    }
}

fn default_watch() -> Vec<(usize, usize)> {
    (0..=3).flat_map(|a| (0..=3).map(move |b| (a, b))).collect()
}

fn default_cutoff() -> [f64; 2] {
    [1.0, 2.0]
}

fn default_n_trunc() -> usize {
    2
}

fn default_blowup() -> f64 {
    1e12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub h: f64,
    pub k: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default)]
    pub lattice: Option<LatticeSpec>,
    /// Values of `a_j(0)` for the exponents of `lattice.a0`, in order (plus side).
    #[serde(default)]
    pub initial_coeffs: Vec<f64>,
    /// Same for the `x → −∞` side; omitted means `f ≡ 0` there.
    #[serde(default)]
    pub initial_coeffs_minus: Option<Vec<f64>>,
    /// Last lattice index kept in the background.
    #[serde(default = "default_n_trunc")]
    pub n_trunc: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: [f64; 2],
    pub u0: String,
    #[serde(default)]
    pub u0_params: U0Params,
    #[serde(default = "default_watch")]
    pub watch: Vec<(usize, usize)>,
    #[serde(default)]
    pub probe: ProbeSpec,
    #[serde(default = "default_blowup")]
    pub blowup_threshold: f64,
    /// Coefficient integration steps over `[0, T]`.
    #[serde(default = "default_series_steps")]
    pub series_steps: usize,
}

fn default_series_steps() -> usize {
    4096
}

/// Everything a run needs, built from a [`RunSpec`].
#[derive(Clone, Debug)]
pub struct Setup {
    pub mesh: Mesh<f64>,
    pub background: Background<f64>,
    pub u0: MeshFunction<f64>,
    pub config: RunConfig<f64>,
    /// Exact solution when `u0` is the builtin soliton and `f ≡ 0`.
    pub exact: Option<Soliton>,
}

impl RunSpec {
    /// Soliton run with `f ≡ 0`.
    pub fn soliton(h: f64, k: f64, radius: f64, t_end: f64, c: f64) -> Self {
        Self {
            h,
            k,
            radius,
            t_end,
            lattice: None,
            initial_coeffs: Vec::new(),
            initial_coeffs_minus: None,
            n_trunc: default_n_trunc(),
            cutoff: default_cutoff(),
            u0: "builtin:soliton".into(),
            u0_params: U0Params {
                c,
                ..U0Params::default()
            },
            watch: default_watch(),
            probe: ProbeSpec::default(),
            blowup_threshold: default_blowup(),
            series_steps: default_series_steps(),
        }
    }

    pub fn mesh(&self) -> Result<Mesh<f64>> {
        Ok(Mesh::new(self.h, self.k, self.radius)?)
    }

    pub fn background(&self) -> Result<Background<f64>> {
        let Some(ls) = &self.lattice else {
            return Ok(Background::zero(self.t_end));
        };
        let lat = ls.build()?;
        let a0 = ls.exponents()?;
        let full = |vals: &[f64]| -> Result<Vec<f64>> {
            ensure!(
                vals.len() == a0.len(),
                "{} initial coefficients for {} exponents",
                vals.len(),
                a0.len()
            );
            let mut v = vec![0.0; lat.len()];
            for (b, &c) in a0.iter().zip(vals) {
                v[lat.index_of(*b).context("initial exponent missing from lattice")?] = c;
            }
            Ok(v)
        };
        let dt = self.t_end / self.series_steps.max(1) as f64;
        let plus = solve_coefficients(&lat, Side::Plus, &full(&self.initial_coeffs)?, self.t_end, dt)?;
        let cutoff = Cutoff::new(self.cutoff[0], self.cutoff[1]);
        match &self.initial_coeffs_minus {
            None => Ok(Background::one_sided(plus, self.n_trunc, cutoff)),
            Some(m) => {
                let minus = solve_coefficients(&lat, Side::Minus, &full(m)?, self.t_end, dt)?;
                Ok(Background::new(plus, minus, self.n_trunc, cutoff)?)
            }
        }
    }

    pub fn initial(&self, mesh: Mesh<f64>, base: Option<&Path>) -> Result<(MeshFunction<f64>, Option<Soliton>)> {
        let p = &self.u0_params;
        Ok(match self.u0.as_str() {
            "builtin:soliton" => {
                let s = Soliton::new(p.c)?;
                (s.initial(mesh), Some(s))
            }
            "builtin:gaussian" => {
                ensure!(p.width > 0.0, "gaussian width must be positive");
                let u = MeshFunction::from_fn(mesh, |x| {
                    let z = (x - p.center) / p.width;
                    p.amplitude * (-z * z).exp()
                });
                (u, None)
            }
            "builtin:zero" => (MeshFunction::zeros(mesh), None),
            other => match other.strip_prefix("file:") {
                Some(path) => {
                    let path = match base {
                        Some(b) if Path::new(path).is_relative() => b.join(path),
                        _ => Path::new(path).to_path_buf(),
                    };
                    (read_profile(mesh, &path)?, None)
                }
                None => bail!("unknown u0 {other:?}; expected builtin:<soliton|gaussian|zero> or file:<path>"),
            },
        })
    }

    pub fn run_config(&self) -> RunConfig<f64> {
        let mut cfg = RunConfig::new(self.t_end);
        cfg.watch = self.watch.clone();
        cfg.blowup_threshold = self.blowup_threshold;
        cfg.probe = ProbeConfig {
            samples: self.probe.samples,
            seed: 0,
            refine: self.probe.refine,
            norm: self.probe.norm,
        };
        cfg.probe_threshold = self.probe.threshold;
        cfg.probe_every = self.probe.every;
        cfg
    }

    /// Builds mesh, background, initial data and run settings; `base` resolves relative file paths.
    pub fn setup(&self, seed: u64, base: Option<&Path>) -> Result<Setup> {
        let mesh = self.mesh()?;
        let background = self.background()?;
        let (u0, sol) = self.initial(mesh, base)?;
        let mut config = self.run_config();
        config.probe.seed = seed;
        Ok(Setup {
            mesh,
            exact: sol.filter(|_| background.is_zero()),
            background,
            u0,
            config,
        })
    }
}

/// Reads a `x,u` CSV whose rows are the grid nodes in order.
pub fn read_profile(mesh: Mesh<f64>, path: &Path) -> Result<MeshFunction<f64>> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut vals = Vec::with_capacity(mesh.n_nodes());
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        ensure!(rec.len() >= 2, "row {i}: expected columns x,u");
        let x: f64 = rec[0].trim().parse().with_context(|| format!("row {i}: x"))?;
        let u: f64 = rec[1].trim().parse().with_context(|| format!("row {i}: u"))?;
        ensure!(i < mesh.n_nodes(), "more rows than the {} grid nodes", mesh.n_nodes());
        ensure!(
            (x - mesh.x(i)).abs() <= 1e-9 * (1.0 + x.abs()),
            "row {i}: x = {x} is not grid node {}",
            mesh.x(i)
        );
        vals.push(u);
    }
    ensure!(vals.len() == mesh.n_nodes(), "{} rows for {} grid nodes", vals.len(), mesh.n_nodes());
    Ok(MeshFunction::from_values(mesh, vals)?)
}
