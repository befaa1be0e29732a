//! Cardinal-series smoothing audits.
//!
//! On seeded compact functions: node reproduction, the isometry, the
//! derivative sandwich `(2/π)ʲ‖∂ʲU‖ ≤ ‖D₊ʲu‖ ≤ ‖∂ʲU‖`, and the same sandwich
//! for the weighted data `xᴺu`. On a short solver run: reproduction of the
//! grid by the space-time smoothing of the tapered history, the taper itself,
//! and weighted sup-norms of the smoothed solution.

use anyhow::Result;
use mkdv_core::extension::ExtendedHistory;
use mkdv_core::sampling::{random_compact, CompactSpec};
use mkdv_core::sinc::{
    full_isometry_ratio, isometry_ratio, sinc_derivative_norms, spacetime_smooth, weighted_sinc_norms, SmoothedFunction,
};
use mkdv_core::{Mesh, MeshFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solve::execute;
use super::Artifacts;
use crate::config::RunSpec;
use crate::report::Report;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub functions: usize,
    pub window: usize,
    pub h: f64,
    pub radius: f64,
    pub max_support: usize,
    pub slack: f64,
    pub node_tol: f64,
    /// Short run used for the space-time audit.
    pub run: RunSpec,
    pub window_x: usize,
    pub window_t: usize,
}

impl Default for Params {
    fn default() -> Self {
        let mut run = RunSpec::soliton(0.25, 0.01, 32.0, 0.1, 1.0);
        run.probe.every = 0;
        run.watch = vec![(0, 0)];
        Self {
            functions: 20,
            window: 200,
            h: 0.5,
            radius: 160.0,
            max_support: 20,
            slack: 1e-3,
            node_tol: 1e-12,
            run,
            window_x: 40,
            window_t: 60,
        }
    }
}

const SANDWICH: &str = "(2/pi)^j ||d^j U|| <= ||D+^j u|| <= ||d^j U||";
const ISOMETRY: &str = "||I_h u||_{L^2} = ||u||_{L^2_h}";

#[derive(Default)]
struct Worst {
    node: f64,
    isometry: f64,
    truncated_isometry: f64,
    lower: [f64; 4],
    upper: [f64; 4],
    weighted_upper: f64,
    weighted_lower: f64,
    weighted_isometry: f64,
    unweighted_match: f64,
}

impl Worst {
    fn merge(mut self, o: Worst) -> Worst {
        self.node = self.node.max(o.node);
        self.isometry = self.isometry.max(o.isometry);
        self.truncated_isometry = self.truncated_isometry.max(o.truncated_isometry);
        for j in 0..4 {
            self.lower[j] = self.lower[j].max(o.lower[j]);
            self.upper[j] = self.upper[j].max(o.upper[j]);
        }
        self.weighted_upper = self.weighted_upper.max(o.weighted_upper);
        self.weighted_lower = self.weighted_lower.max(o.weighted_lower);
        self.weighted_isometry = self.weighted_isometry.max(o.weighted_isometry);
        self.unweighted_match = self.unweighted_match.max(o.unweighted_match);
        self
    }
}

fn audit_one(u: &MeshFunction<f64>, window: usize) -> Result<Worst> {
    let c = 2.0 / std::f64::consts::PI;
    let mut w = Worst::default();
    let sf = SmoothedFunction::from_mesh(u, window);
    for (i, &v) in u.values().iter().enumerate() {
        w.node = w.node.max((sf.eval(u.mesh().x(i)) - v).abs());
    }
    w.isometry = (full_isometry_ratio(u, window)? - 1.0).abs();
    w.truncated_isometry = (isometry_ratio(u, window)? - 1.0).abs();
    for j in 1..=3 {
        let (cont, disc) = sinc_derivative_norms(u, j, window)?;
        w.lower[j] = c.powi(j as i32) * cont - disc;
        w.upper[j] = disc - cont;
    }
    for n_weight in 0..=2 {
        let xu = u.poly_weighted(n_weight);
        w.weighted_isometry = w.weighted_isometry.max((full_isometry_ratio(&xu, window)? - 1.0).abs());
        for j in 1..=3 {
            let n = weighted_sinc_norms(u, n_weight, j, window)?;
            let scale = 1.0 + n.discrete;
            // the sandwich applied to the weighted data xᴺu
            w.weighted_upper = w.weighted_upper.max((n.discrete - n.smoothed_weighted) / scale);
            w.weighted_lower = w.weighted_lower.max((c.powi(j as i32) * n.smoothed_weighted - n.discrete) / scale);
            if n_weight == 0 {
                if let Some(wc) = n.weighted_continuum {
                    w.unweighted_match = w.unweighted_match.max((wc - n.smoothed_weighted).abs() / scale);
                }
            }
        }
    }
    Ok(w)
}

pub fn run(p: &Params, seed: u64, arts: &Artifacts) -> Result<Report> {
    let mut report = Report::new("sinc_audit", seed);
    let mesh = Mesh::spatial(p.h, p.radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = CompactSpec {
        margin: mesh.half().saturating_sub(10).max(6),
        ..CompactSpec::signed(p.max_support)
    };
    let samples: Vec<MeshFunction<f64>> = (0..p.functions).map(|_| random_compact(mesh, spec, &mut rng)).collect();
    let worst = samples
        .par_iter()
        .map(|u| audit_one(u, p.window))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(Worst::default(), Worst::merge);

    report.le("node_reproduction", "I_h u (x_n) = u(x_n)", worst.node, p.node_tol);
    report.le("isometry", ISOMETRY, worst.isometry, p.slack);
    report.detail(format!(
        "window quadrature plus closed-form tail; the series cut at W alone deviates by {:.3e}",
        worst.truncated_isometry
    ));
    report.metric("isometry_truncated_series", worst.truncated_isometry);
    for j in 1..=3 {
        report.le(format!("sandwich_lower.j{j}"), SANDWICH, worst.lower[j], p.slack);
        report.le(format!("sandwich_upper.j{j}"), SANDWICH, worst.upper[j], p.slack);
    }
    report.le(
        "weighted_upper",
        "||D+^j (x^N u)|| <= ||d^j I_h(x^N u)||",
        worst.weighted_upper,
        p.slack,
    );
    report.le(
        "weighted_lower",
        "(2/pi)^j ||d^j I_h(x^N u)|| <= ||D+^j (x^N u)||",
        worst.weighted_lower,
        p.slack,
    );
    report.le(
        "weighted_isometry",
        "||I_h(x^N u)||_{L^2} = ||x^N u||_{L^2_h}",
        worst.weighted_isometry,
        p.slack,
    );
    report.le("unweighted_forms_agree", "||d^j (x^0 U)|| = ||d^j I_h(x^0 u)||", worst.unweighted_match, 1e-9);
    report.note(
        "U = I_h u decays like 1/x, so ||d^j (x^N U)|| is infinite for N >= 1; the weighted audit uses I_h(x^N u)",
    );

    // space-time smoothing of a short run
    let setup = p.run.setup(seed, None)?;
    let st = execute(&setup, true)?;
    let k = setup.mesh.k();
    let hist = ExtendedHistory::new(st.states().to_vec(), k)?;
    let sts = spacetime_smooth(&hist, p.window_x, p.window_t);
    let mut repro = 0.0f64;
    let levels = st.states();
    let stride = (levels.len() / 5).max(1);
    for j in (0..levels.len()).step_by(stride) {
        let slice = sts.time_slice(j as f64 * k, 0)?;
        for (a, b) in slice.values().iter().zip(levels[j].values()) {
            repro = repro.max((a - b).abs());
        }
    }
    report.le("spacetime_reproduction", "I u(x_n, t_j) = u_j(x_n)", repro, 1e-10);

    // taper: 1 on [−1, T+1], 0 outside (−2, T+2), original levels untouched
    let (lo, hi) = hist.index_range();
    let t_end = hist.t_end();
    let mut taper_ok = true;
    for j in lo..=hi {
        let t = hist.t(j);
        let phi = hist.phi(j);
        if (t >= -1.0 && t <= t_end + 1.0 && phi != 1.0) || ((t <= -2.0 || t >= t_end + 2.0) && phi != 0.0) {
            taper_ok = false;
        }
        if !(0.0..=1.0).contains(&phi) {
            taper_ok = false;
        }
    }
    let inside_ok = (0..levels.len()).all(|j| hist.at(j as isize).values() == levels[j].values());
    report.holds(
        "taper_invariants",
        "phi = 1 on [-1, T+1], phi = 0 outside (-2, T+2)",
        taper_ok && inside_ok,
        format!("levels {lo}..={hi}"),
    );

    let xs: Vec<f64> = (-8..=8).map(|i| i as f64).collect();
    let ts = [0.0, 0.5 * t_end, t_end];
    for (nw, n, m) in [(0usize, 0usize, 0usize), (1, 1, 0), (2, 3, 0), (1, 0, 1)] {
        let v = sts.weighted_sup(&xs, &ts, nw, n, m)?;
        report.holds(
            format!("weighted_sup_finite.N{nw}n{n}m{m}"),
            "sup |<x>^N d_x^n d_t^m I u| < inf",
            v.is_finite(),
            format!("{v:.6e}"),
        );
        report.metric(format!("weighted_sup.N{nw}n{n}m{m}"), v);
    }

    arts.write(&mut report, "sinc_sample.csv", |w| {
        let sf = SmoothedFunction::from_mesh(&samples[0], p.window);
        let (a, b) = sf.support().unwrap_or((-10.0, 10.0));
        Ok(sf.write_csv(w, a - 5.0, b + 5.0, 400)?)
    })?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_audit_passes() {
        let p = Params {
            functions: 3,
            ..Params::default()
        };
        let r = run(&p, 5, &Artifacts::none()).unwrap();
        assert!(r.passed, "{:#?}", r.failures().collect::<Vec<_>>());
    }
}
