//! Exponent lattice against an independent enumeration.
//!
//! The oracle lists every `Σ_{p≤k} β_{i_p} − 3l − (k−1)/2 ≥ gamma_min` by
//! counting how often each initial exponent is used, in `num_rational`
//! arithmetic. Resonance tables are rebuilt by scanning all ordered triples.

use std::collections::BTreeSet;

use anyhow::{Context, Result};
use mkdv_core::lattice::{build_lattice, ExponentLattice};
use mkdv_core::Rational;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use super::Artifacts;
use crate::report::Report;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Initial exponent sets, each strictly decreasing.
    pub sets: Vec<Vec<String>>,
    /// `gamma_min = β₀ − depth`.
    pub depth: i64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            sets: vec![vec!["1/2".into()], vec!["0".into()], vec!["1/2".into(), "-1/2".into()]],
            depth: 12,
        }
    }
}

fn r64(r: Rational) -> Rational64 {
    Rational64::new(r.num(), r.den())
}

/// Every lattice value above `lo`, enumerated by multiplicities of each `β`.
pub fn enumerate(a0: &[Rational64], lo: Rational64) -> Result<BTreeSet<Rational64>> {
    let half = Rational64::new(1, 2);
    let one = Rational64::from_integer(1);
    // each extra copy of β shifts the sum by β − 1/2; copies of 1/2 change nothing
    let has_half = a0.contains(&half);
    let drops: Vec<Rational64> = a0.iter().filter(|&&b| b != half).map(|&b| half - b).collect();
    anyhow::ensure!(drops.iter().all(|d| *d > Rational64::from_integer(0)), "exponents above 1/2");
    let caps: Vec<i64> = drops.iter().map(|&d| ((half - lo) / d).floor().to_integer() + 1).collect();
    let mut out = BTreeSet::new();
    let mut counts = vec![0i64; drops.len()];
    loop {
        let used: i64 = counts.iter().sum();
        if used > 0 || has_half {
            let base = half - counts.iter().zip(&drops).map(|(&c, &d)| d * c).sum::<Rational64>();
            let mut v = base;
            while v >= lo {
                out.insert(v);
                v -= one * 3;
            }
        }
        let mut i = 0;
        loop {
            if i == counts.len() {
                return Ok(out);
            }
            counts[i] += 1;
            if counts[i] <= caps[i] {
                break;
            }
            counts[i] = 0;
            i += 1;
        }
    }
}

/// `(triples, linears)` of every index by exhaustive scan.
pub fn scan_resonances(g: &[Rational64]) -> Vec<(Vec<(usize, usize, usize)>, Vec<usize>)> {
    let one = Rational64::from_integer(1);
    let three = Rational64::from_integer(3);
    let n = g.len();
    (0..n)
        .map(|j| {
            let mut t = Vec::new();
            for k in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        if g[k] + g[l] + g[m] - one == g[j] {
                            t.push((k, l, m));
                        }
                    }
                }
            }
            let lin = (0..n).filter(|&p| g[p] - three == g[j]).collect();
            (t, lin)
        })
        .collect()
}

fn label(a0: &[Rational]) -> String {
    let parts: Vec<String> = a0.iter().map(|r| r.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

fn audit(report: &mut Report, a0: &[Rational], lat: &ExponentLattice, lo: Rational) -> Result<()> {
    let name = label(a0);
    let want = enumerate(&a0.iter().map(|&b| r64(b)).collect::<Vec<_>>(), r64(lo))?;
    let got: BTreeSet<Rational64> = lat.gammas().iter().map(|&g| r64(g)).collect();
    let missing = want.difference(&got).count();
    let extra = got.difference(&want).count();
    report.holds(
        format!("closure{name}"),
        "Gamma = { b_i1 + ... + b_ik - 3l - (k-1)/2 }",
        missing == 0 && extra == 0 && got.len() == lat.len(),
        format!("{} exponents, {missing} missing, {extra} extra", lat.len()),
    );
    let g: Vec<Rational64> = lat.gammas().iter().map(|&g| r64(g)).collect();
    let scan = scan_resonances(&g);
    let mut bad = Vec::new();
    for (j, (t, lin)) in scan.iter().enumerate() {
        let mut have = lat.triples(j).to_vec();
        have.sort_unstable();
        if &have != t || lat.linears(j) != lin.as_slice() {
            bad.push(j);
        }
    }
    report.holds(
        format!("resonances{name}"),
        "g_k + g_l + g_m - 1 = g_j, g_p - 3 = g_j",
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} triples scanned", g.len().pow(3) * g.len())
        } else {
            format!("mismatched indices {bad:?}")
        },
    );
    report.metric(format!("size{name}"), lat.len() as f64);
    Ok(())
}

pub fn run(p: &Params, seed: u64, arts: &Artifacts) -> Result<Report> {
    let mut report = Report::new("gamma", seed);
    for (si, set) in p.sets.iter().enumerate() {
        let a0: Vec<Rational> = set
            .iter()
            .map(|s| s.parse::<Rational>().with_context(|| format!("exponent {s:?}")))
            .collect::<Result<_>>()?;
        let lo = a0[0] - Rational::integer(p.depth);
        let lat = build_lattice(&a0, lo)?;
        audit(&mut report, &a0, &lat, lo)?;
        arts.write(&mut report, &format!("lattice_{si}.json"), |mut w| {
            use std::io::Write;
            w.write_all(lat.to_json()?.as_bytes())?;
            w.flush()?;
            Ok(())
        })?;
    }
    Ok(report)
}
