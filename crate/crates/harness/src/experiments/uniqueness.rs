//! Perturbation test for the energy estimate behind uniqueness.
//!
//! Two runs from `u₀` and `u₀ + ε·bump` give `q = v − u`. The growth constant
//! `Ĉ` is assembled from the runs' own sup-norms,
//! `Ĉ = 2‖u_x‖‖u‖ + 2‖u_x‖‖v‖ + 2‖v_x‖‖v‖ + ‖(fu)_x‖ + ‖(fv)_x‖ + ‖(f²)_x‖`,
//! each maximized over the time levels, and `‖q(t)‖²` must stay below
//! `‖q(0)‖² e^{Ĉt}(1 + slack)`.

use anyhow::Result;
use mkdv_core::{Background, MeshFunction};
use serde::{Deserialize, Serialize};

use super::solve::execute;
use super::Artifacts;
use crate::config::{RunSpec, Setup};
use crate::report::Report;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub run: RunSpec,
    pub epsilon: f64,
    pub bump_center: f64,
    pub bump_width: f64,
    pub slack: f64,
    /// Allowed relative deviation of `‖q_{2ε}(T)‖ / ‖q_ε(T)‖` from 2.
    pub linearity_tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        let mut run = RunSpec::soliton(0.02, 1e-3, 30.0, 0.5, 1.0);
        run.probe.every = 0;
        run.watch = vec![(0, 0)];
        Self {
            run,
            epsilon: 1e-6,
            bump_center: 2.0,
            bump_width: 1.0,
            slack: 0.5,
            linearity_tol: 0.1,
        }
    }
}

const ANCHOR: &str = "||q(t)||^2 <= ||q(0)||^2 e^{C t}";

fn perturbed(setup: &Setup, p: &Params, eps: f64) -> Setup {
    let mut s = setup.clone();
    s.u0 = setup.u0.map_with_x(|x, u| {
        let z = (x - p.bump_center) / p.bump_width;
        u + eps * (-z * z).exp()
    });
    s
}

fn trajectory(setup: &Setup) -> Result<Vec<MeshFunction<f64>>> {
    Ok(execute(setup, true)?.states().to_vec())
}

/// `max_j sup|∂ₓ(a_j b_j)|` with `∂ₓ` taken as `D₀`.
fn sup_dx_product(a: &[MeshFunction<f64>], b: &[MeshFunction<f64>]) -> Result<f64> {
    let mut m = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        m = m.max(x.mul(y)?.d_zero().sup_norm());
    }
    Ok(m)
}

fn growth_constant(u: &[MeshFunction<f64>], v: &[MeshFunction<f64>], f: &[MeshFunction<f64>]) -> Result<f64> {
    let sup = |s: &[MeshFunction<f64>]| s.iter().map(|w| w.sup_norm()).fold(0.0, f64::max);
    let sup_x = |s: &[MeshFunction<f64>]| s.iter().map(|w| w.d_zero().sup_norm()).fold(0.0, f64::max);
    let (su, sv, sux, svx) = (sup(u), sup(v), sup_x(u), sup_x(v));
    Ok(2.0 * sux * su + 2.0 * sux * sv + 2.0 * svx * sv
        + sup_dx_product(f, u)?
        + sup_dx_product(f, v)?
        + sup_dx_product(f, f)?)
}

fn background_levels(bg: &Background<f64>, like: &[MeshFunction<f64>], k: f64) -> Result<Vec<MeshFunction<f64>>> {
    like.iter()
        .enumerate()
        .map(|(j, u)| Ok(bg.sample(*u.mesh(), j as f64 * k, 0)?))
        .collect()
}

fn q_norms(u: &[MeshFunction<f64>], v: &[MeshFunction<f64>]) -> Result<Vec<f64>> {
    u.iter().zip(v).map(|(a, b)| Ok(b.sub(a)?.l2h_norm())).collect()
}

pub fn run(p: &Params, seed: u64, arts: &Artifacts) -> Result<Report> {
    let mut report = Report::new("uniqueness", seed);
    let base = p.run.setup(seed, arts.dir())?;
    let k = base.mesh.k();
    let u = trajectory(&base)?;
    let v = trajectory(&perturbed(&base, p, p.epsilon))?;
    let f = background_levels(&base.background, &u, k)?;

    let c_hat = growth_constant(&u, &v, &f)?;
    report.metric("c_hat", c_hat);
    let q = q_norms(&u, &v)?;
    let q0 = q[0] * q[0];
    let worst = q
        .iter()
        .enumerate()
        .map(|(j, &n)| n * n / (q0 * (c_hat * j as f64 * k).exp()))
        .fold(0.0, f64::max);
    report.le("energy_bound", ANCHOR, worst, 1.0 + p.slack);
    report.detail("max_t ||q(t)||^2 / (||q(0)||^2 e^{C t})");

    // ε = 0 reproduces the base run bit for bit
    let z = trajectory(&perturbed(&base, p, 0.0))?;
    let identical = u.iter().zip(&z).all(|(a, b)| a.values() == b.values());
    report.holds("zero_perturbation_exact", "q(0) = 0 => q = 0", identical, "bitwise comparison of every level");

    // linear regime: doubling ε doubles q(T)
    let w = trajectory(&perturbed(&base, p, 2.0 * p.epsilon))?;
    let q2 = q_norms(&u, &w)?;
    let ratio = q2[q2.len() - 1] / q[q.len() - 1];
    report.within(
        "linear_scaling",
        "||q_{2 eps}(T)|| = 2 ||q_eps(T)|| + O(eps^2)",
        ratio,
        2.0 * (1.0 - p.linearity_tol),
        2.0 * (1.0 + p.linearity_tol),
    );

    arts.write(&mut report, "perturbation.csv", |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "q_l2h", "q2_l2h", "bound_l2h"])?;
        for (j, (&a, &b)) in q.iter().zip(&q2).enumerate() {
            let t = j as f64 * k;
            let bound = q[0] * (0.5 * c_hat * t).exp();
            wr.write_record([format!("{t:e}"), format!("{a:e}"), format!("{b:e}"), format!("{bound:e}")])?;
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
    fn coarse_soliton_passes() {
        let mut p = Params::default();
        p.run.h = 0.1;
        p.run.t_end = 0.1;
        let r = run(&p, 0, &Artifacts::none()).unwrap();
        assert!(r.passed, "{:#?}", r.failures().collect::<Vec<_>>());
    }
}
