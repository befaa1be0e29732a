//! Refinement study against the travelling-wave solution with `f ≡ 0`.
//!
//! The closed form is first substituted into the equation with high-order
//! differences. Each level then runs the scheme to `T` with the coercivity
//! probe at every step, and the `L²_h` errors at `T` give a fitted order.

use anyhow::Result;
use mkdv_core::extension::ExtendedHistory;
use mkdv_core::{Background, Error as CoreError, Mesh, MeshFunction, RunState};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solve::{execute, PROBE_ANCHOR};
use super::{fit_order, Artifacts};
use crate::config::{ProbeSpec, RunSpec};
use crate::report::Report;
use crate::soliton::Soliton;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub c: f64,
    pub radius: f64,
    pub t_end: f64,
    /// `(h, k)` pairs, coarse to fine.
    pub levels: Vec<(f64, f64)>,
    pub probe: ProbeSpec,
    pub order_range: [f64; 2],
    pub finest_tol: f64,
    pub max_mass_drift: f64,
    /// Minimum error ratio between consecutive levels.
    pub min_step_ratio: f64,
    /// Factor applied to the coarsest `k` for the refusal check.
    pub refusal_factor: f64,
    pub oracle_points: usize,
    pub oracle_tol: f64,
    /// Record third time differences of the extended coarse history.
    pub extension_metric: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            c: 1.0,
            radius: 40.0,
            t_end: 0.5,
            levels: vec![(0.08, 8e-4), (0.04, 4e-4), (0.02, 2e-4)],
            probe: ProbeSpec::default(),
            order_range: [0.8, 1.5],
            finest_tol: 5e-2,
            max_mass_drift: 0.02,
            min_step_ratio: 1.5,
            refusal_factor: 50.0,
            oracle_points: 1000,
            oracle_tol: 1e-8,
            extension_metric: true,
        }
    }
}

struct Level {
    h: f64,
    k: f64,
    error: f64,
    drift: f64,
    min_probe: Option<f64>,
    probed: usize,
    steps: usize,
    third_difference: Option<f64>,
}

fn spec_for(p: &Params, h: f64, k: f64) -> RunSpec {
    let mut s = RunSpec::soliton(h, k, p.radius, p.t_end, p.c);
    s.probe = p.probe.clone();
    s.watch = vec![(0, 0)];
    s
}

fn run_level(p: &Params, sol: Soliton, h: f64, k: f64, seed: u64, coarsest: bool) -> Result<Level, CoreError> {
    let setup = spec_for(p, h, k).setup(seed, None).map_err(|e| CoreError::InvalidArgument(e.to_string()))?;
    let keep = coarsest && p.extension_metric;
    let st = execute(&setup, keep)?;
    let exact = sol.sample(setup.mesh, st.t());
    let error = st.u().sub(&exact)?.l2h_norm();
    let hist = st.history();
    let m0 = hist[0].l2h;
    let drift = hist.iter().map(|r| (r.l2h - m0).abs() / m0).fold(0.0, f64::max);
    let third_difference = if keep {
        Some(ExtendedHistory::new(st.states().to_vec(), k)?.max_time_difference_norm(3))
    } else {
        None
    };
    Ok(Level {
        h,
        k,
        error,
        drift,
        min_probe: st.min_probe(),
        probed: hist.iter().filter(|r| r.probe.is_some()).count(),
        steps: st.total_steps(),
        third_difference,
    })
}

pub fn run(p: &Params, seed: u64, arts: &Artifacts) -> Result<Report> {
    let mut report = Report::new("converge", seed);
    let sol = Soliton::new(p.c)?;

    let residual = sol.verify(p.oracle_points, seed, 20.0 / p.c.sqrt(), p.t_end);
    report.le("soliton_substitution", "w_t + w^2 w_x + w_xxx = 0", residual, p.oracle_tol);
    if !(residual <= p.oracle_tol) {
        report.note("reference solution failed substitution; refinement skipped");
        return Ok(report);
    }

    let results: Vec<Result<Level, CoreError>> = p
        .levels
        .par_iter()
        .enumerate()
        .map(|(i, &(h, k))| run_level(p, sol, h, k, seed, i == 0))
        .collect();
    let mut levels = Vec::new();
    for (r, &(h, k)) in results.into_iter().zip(&p.levels) {
        match r {
            Ok(l) => levels.push(l),
            Err(e) => {
                report.holds(format!("level_completed@h={h},k={k}"), PROBE_ANCHOR, false, e.to_string());
            }
        }
    }
    if levels.len() != p.levels.len() {
        return Ok(report);
    }

    for l in &levels {
        let tag = format!("h={},k={}", l.h, l.k);
        report.metric(format!("error@{tag}"), l.error);
        report.le(format!("mass_drift@{tag}"), "||u(t)||_{L^2} = ||u(0)||_{L^2}", l.drift, p.max_mass_drift);
        match l.min_probe {
            Some(m) => {
                report.ge(format!("min_probe@{tag}"), PROBE_ANCHOR, m, p.probe.threshold);
                report.detail(format!("{} probes over {} steps", l.probed, l.steps));
            }
            None => {
                report.holds(format!("min_probe@{tag}"), PROBE_ANCHOR, false, "no probe recorded");
            }
        }
        if let Some(d) = l.third_difference {
            report.metric(format!("extension_max_dt3@{tag}"), d);
        }
    }
    let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let errs: Vec<f64> = levels.iter().map(|l| l.error).collect();
    let (order, r2) = fit_order(&hs, &errs);
    report.within("fitted_order", "|u_h(T) - u(T)| = O(h + k)", order, p.order_range[0], p.order_range[1]);
    report.detail(format!("R^2 = {r2:.6}"));
    report.metric("fitted_order_r2", r2);
    report.le("finest_error", "|u_h(T) - u(T)| = O(h + k)", errs[errs.len() - 1], p.finest_tol);
    for (i, w) in errs.windows(2).enumerate() {
        report.ge(
            format!("step_ratio.{i}"),
            "|u_h(T) - u(T)| = O(h + k)",
            w[0] / w[1],
            p.min_step_ratio,
        );
    }

    // an oversized step fails the probe before any step is taken
    let (h0, k0) = p.levels[0];
    let big = spec_for(p, h0, k0 * p.refusal_factor);
    let setup = big.setup(seed, None)?;
    let refusal = RunState::start(setup.u0.clone(), &setup.background, setup.config.clone());
    match refusal {
        Err(CoreError::CoercivityViolated { probe, .. }) => {
            report.le("refuses_large_step", PROBE_ANCHOR, probe, p.probe.threshold);
            report.detail(format!("k = {}: run refused at start", k0 * p.refusal_factor));
        }
        Err(e) => {
            report.holds("refuses_large_step", PROBE_ANCHOR, false, format!("unexpected error: {e}"));
        }
        Ok(_) => {
            report.holds("refuses_large_step", PROBE_ANCHOR, false, "run started");
        }
    }

    // zero data stays exactly zero
    let zero_ok: Vec<bool> = p
        .levels
        .par_iter()
        .map(|&(h, k)| -> Result<bool> {
            let mesh = Mesh::new(h, k, p.radius)?;
            let mut cfg = spec_for(p, h, k).run_config();
            cfg.probe_every = 0;
            cfg.probe.norm = mkdv_core::scheme::ProbeNorm::L2h;
            let bg = Background::zero(p.t_end);
            let mut st = RunState::start(MeshFunction::zeros(mesh), &bg, cfg)?;
            st.run(&bg)?;
            Ok(st.u().values().iter().all(|&v| v == 0.0))
        })
        .collect::<Result<_>>()?;
    report.holds(
        "zero_data_zero_error",
        "u_0 = 0 => u_j = 0",
        zero_ok.iter().all(|&b| b),
        format!("{zero_ok:?}"),
    );

    arts.write(&mut report, "convergence.csv", |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["h", "k", "l2h_error", "mass_drift", "min_probe"])?;
        for l in &levels {
            wr.write_record([
                l.h.to_string(),
                l.k.to_string(),
                format!("{:e}", l.error),
                format!("{:e}", l.drift),
                l.min_probe.map(|m| format!("{m:e}")).unwrap_or_default(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_study_has_first_order() {
        let p = Params {
            radius: 32.0,
            t_end: 0.1,
            levels: vec![(0.2, 2e-3), (0.1, 1e-3)],
            probe: ProbeSpec {
                every: 10,
                ..ProbeSpec::default()
            },
            extension_metric: false,
            finest_tol: 1.0,
            ..Params::default()
        };
        let r = run(&p, 0, &Artifacts::none()).unwrap();
        assert!(r.check("soliton_substitution").unwrap().passed());
        assert!(r.check("refuses_large_step").unwrap().passed());
        assert!(r.check("zero_data_zero_error").unwrap().passed());
        assert!(r.metrics["error@h=0.1,k=0.001"].0 < r.metrics["error@h=0.2,k=0.002"].0);
    }
}
