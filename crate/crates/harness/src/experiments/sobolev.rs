//! h-uniformity of the discrete Sobolev and weight-multiplier constants.
//!
//! A fixed seeded family of smooth packets is sampled at every `h`; the
//! measured ratios must stay within `max_growth` of their finest-grid value,
//! and the sup ratios must sit below the explicit Fourier constant.

use anyhow::Result;
use mkdv_core::identities::{
    centered_weight_bound, sobolev_ratios, sup_sobolev_constant, weight_derivative_constant, weighted_sobolev_ratios,
};
use mkdv_core::sampling::{random_compact, CompactSpec};
use mkdv_core::{Mesh, MeshFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Artifacts;
use crate::report::Report;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Grids for the uniformity checks, coarse to fine.
    pub hs: Vec<f64>,
    pub radius: f64,
    pub functions: usize,
    /// Allowed growth of a ratio from a coarser grid to a finer one.
    pub max_growth: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            hs: vec![0.5, 0.1, 0.02],
            radius: 20.0,
            functions: 6,
            max_growth: 1.25,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Packet {
    amp: f64,
    center: f64,
    width: f64,
    freq: f64,
    phase: f64,
}

impl Packet {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self {
            amp: rng.gen_range(0.5..1.0),
            center: rng.gen_range(-2.0..2.0),
            width: rng.gen_range(1.5..3.0),
            freq: rng.gen_range(0.0..1.0),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        }
    }

    fn sample(&self, mesh: Mesh<f64>) -> MeshFunction<f64> {
        MeshFunction::from_fn(mesh, |x| {
            let z = (x - self.center) / self.width;
            self.amp * (-z * z).exp() * (self.freq * x + self.phase).cos()
        })
    }
}

/// `(name, anchor, value at each h)`.
type Series = (String, &'static str, Vec<f64>);

fn growth_check(report: &mut Report, s: &Series, max_growth: f64) {
    // growth under refinement: finer grid over any coarser one
    let mut worst = 0.0f64;
    for (i, &coarse) in s.2.iter().enumerate() {
        for &fine in &s.2[i + 1..] {
            worst = worst.max(fine / coarse);
        }
    }
    report.le(format!("{}.h_uniform", s.0), s.1, worst, max_growth);
}

pub fn run(p: &Params, seed: u64, arts: &Artifacts) -> Result<Report> {
    let mut report = Report::new("sobolev_audit", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let family: Vec<Packet> = (0..p.functions).map(|_| Packet::draw(&mut rng)).collect();
    let meshes: Vec<Mesh<f64>> = p.hs.iter().map(|&h| Mesh::spatial(h, p.radius)).collect::<Result<_, _>>()?;

    let mut series: Vec<Series> = Vec::new();
    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    const L2: &str = "||D+^k u|| <= C (||u|| + ||D+^n u||)";
    const SUP: &str = "||D+^k u||_inf <= C (||u|| + ||D+^n u||)";
    const WEIGHTED: &str = "||<x>^N D+^j u|| <= C (||<x>^N u|| + ||<x>^N D+^(j+k) u||)";
    for (fi, f) in family.iter().enumerate() {
        for (k, n) in [(1usize, 2usize), (1, 3), (2, 3), (2, 5), (4, 5)] {
            let mut l2 = Vec::new();
            let c = sup_sobolev_constant(k, n);
            for (m, &h) in meshes.iter().zip(&p.hs) {
                let u = f.sample(*m);
                let (a, s) = sobolev_ratios(&u, k, n);
                l2.push(a);
                report.le(format!("sup_sobolev.f{fi}.k{k}n{n}@h={h}"), SUP, s, c);
                rows.push((format!("sobolev.f{fi}.k{k}n{n}"), h, a));
            }
            series.push((format!("sobolev.f{fi}.k{k}n{n}"), L2, l2));
        }
        for (nw, j, k) in [(1usize, 0usize, 1usize), (1, 1, 2), (2, 1, 2), (3, 2, 1)] {
            let v: Vec<f64> = meshes.iter().map(|m| weighted_sobolev_ratios(&f.sample(*m), nw, j, k).0).collect();
            for (&h, &a) in p.hs.iter().zip(&v) {
                rows.push((format!("weighted.f{fi}.N{nw}j{j}k{k}"), h, a));
            }
            series.push((format!("weighted_sobolev.f{fi}.N{nw}j{j}k{k}"), WEIGHTED, v));
        }
    }
    for s in &series {
        growth_check(&mut report, s, p.max_growth);
    }

    // centered vs forward difference under polynomial weights
    const CW: &str = "||<x>^j D0 rho|| <= C ||<x>^j D+ rho||";
    for j in 0..=3usize {
        let bound = 0.5 * (1.0 + 2f64.powi(j as i32));
        for (m, &h) in meshes.iter().zip(&p.hs) {
            let mut worst = 0.0f64;
            for f in &family {
                let c = centered_weight_bound(&f.sample(*m), j);
                worst = worst.max(c.lhs / (c.rhs / (0.5 * (1.0 + (1.0 + h).powi(j as i32)))));
            }
            for _ in 0..20 {
                let r: MeshFunction<f64> = random_compact(*m, CompactSpec::signed(40), &mut rng);
                let c = centered_weight_bound(&r, j);
                if c.rhs > 0.0 {
                    worst = worst.max(c.lhs / (c.rhs / (0.5 * (1.0 + (1.0 + h).powi(j as i32)))));
                }
            }
            report.le(format!("centered_weight.j{j}@h={h}"), CW, worst, bound);
            rows.push((format!("centered_weight.j{j}"), h, worst));
        }
    }

    // multiplier constants of D₊ʲ⟨x⟩ᴺ, meaningful for N ≥ j
    const MULT: &str = "||D+^j <x>^N E^l rho|| <= C ||<x>^(N-j) rho||";
    for nw in 0..=3usize {
        for j in 0..=nw {
            for l in 0..=2usize {
                let v: Vec<f64> = meshes
                    .iter()
                    .map(|m| weight_derivative_constant(*m, nw, j, l))
                    .collect();
                for (&h, &a) in p.hs.iter().zip(&v) {
                    rows.push((format!("multiplier.N{nw}j{j}l{l}"), h, a));
                }
                if v.iter().all(|&a| a > 0.0) {
                    growth_check(&mut report, &(format!("multiplier.N{nw}j{j}l{l}"), MULT, v), p.max_growth);
                }
            }
        }
    }
    report.note("multiplier constants are audited only for N >= j");

    arts.write(&mut report, "sobolev.csv", |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["quantity", "h", "value"])?;
        for (q, h, v) in &rows {
            wr.write_record([q.clone(), h.to_string(), format!("{v:e}")])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    Ok(report)
}
