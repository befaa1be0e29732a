//! Exact discrete identities on seeded random compact mesh functions.
//!
//! For every `h` the worst relative violation of each identity over all
//! samples is compared with the tolerance. A sign-flipped summation by parts
//! serves as a negative control, and the weighted dispersive bound is fed a
//! signed `ρ` to show that it reports the violated hypothesis instead of a
//! failure.

use std::collections::BTreeMap;

use anyhow::Result;
use mkdv_core::identities::{
    centered_is_average, centered_product, centered_weight_bound, dispersive_nonnegative, product_rule,
    shift_isometry, summation_by_parts, triple_product_rule, weighted_dispersive_bound, Guarded, IdentityCheck,
};
use mkdv_core::sampling::{random_compact, CompactSpec};
use mkdv_core::{Mesh, MeshFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Artifacts;
use crate::report::Report;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub samples: usize,
    pub hs: Vec<f64>,
    pub radius: f64,
    pub max_support: usize,
    pub tol: f64,
    /// Replace summation by parts with its sign-flipped form (a planted bug).
    pub inject_sign_bug: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            samples: 100,
            hs: vec![0.5, 0.1, 0.02],
            radius: 8.0,
            max_support: 24,
            tol: 1e-12,
            inject_sign_bug: false,
        }
    }
}

/// `(D₊ν, ρ) = +(ν, D₋ρ)`: summation by parts with the sign dropped.
fn sbp_sign_bug(nu: &MeshFunction<f64>, rho: &MeshFunction<f64>) -> Result<IdentityCheck<f64>> {
    let mut c = summation_by_parts(nu, rho)?;
    c.rhs = -c.rhs;
    Ok(c)
}

struct Worst {
    anchor: &'static str,
    value: f64,
}

fn fold(acc: &mut BTreeMap<String, Worst>, key: String, c: &IdentityCheck<f64>) {
    let v = c.relative_violation();
    let e = acc.entry(key).or_insert(Worst {
        anchor: c.anchor,
        value: f64::NEG_INFINITY,
    });
    // NaN is the worst possible outcome
    if v.is_nan() || v > e.value {
        e.value = if v.is_nan() { f64::INFINITY } else { v };
    }
}

pub fn run(p: &Params, seed: u64, arts: &Artifacts) -> Result<Report> {
    let mut report = Report::new("identities", seed);
    let mut rows: Vec<(f64, String, String, f64)> = Vec::new();
    for (hi, &h) in p.hs.iter().enumerate() {
        let mesh = Mesh::spatial(h, p.radius)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(hi as u64));
        let signed = CompactSpec::signed(p.max_support);
        let nonneg = CompactSpec::nonnegative(p.max_support);
        let mut worst: BTreeMap<String, Worst> = BTreeMap::new();
        let mut preconditions = 0usize;
        for _ in 0..p.samples {
            let rho: MeshFunction<f64> = random_compact(mesh, signed, &mut rng);
            let nu: MeshFunction<f64> = random_compact(mesh, signed, &mut rng);
            let xi: MeshFunction<f64> = random_compact(mesh, signed, &mut rng);
            let rho_pos: MeshFunction<f64> = random_compact(mesh, nonneg, &mut rng);

            fold(&mut worst, "shift_isometry".into(), &shift_isometry(&rho));
            let sbp = if p.inject_sign_bug {
                sbp_sign_bug(&nu, &rho)?
            } else {
                summation_by_parts(&nu, &rho)?
            };
            fold(&mut worst, "summation_by_parts".into(), &sbp);
            fold(&mut worst, "centered_is_average".into(), &centered_is_average(&rho));
            for c in dispersive_nonnegative(&rho)? {
                fold(&mut worst, c.name.into(), &c);
            }
            fold(&mut worst, "centered_product".into(), &centered_product(&rho, &nu)?);
            match weighted_dispersive_bound(&rho_pos, &nu)? {
                Guarded::Checked(c) => fold(&mut worst, c.name.into(), &c),
                Guarded::PreconditionViolated { .. } => unreachable!("nonnegative sample"),
            }
            if let Guarded::PreconditionViolated { .. } = weighted_dispersive_bound(&rho, &nu)? {
                preconditions += 1;
            }
            fold(&mut worst, "product_rule".into(), &product_rule(&nu, &rho)?);
            for n in 1..=3 {
                fold(&mut worst, format!("triple_product_rule_n{n}"), &triple_product_rule(&rho, &nu, &xi, n)?);
            }
            for j in 0..=3 {
                fold(&mut worst, format!("centered_weight_bound_j{j}"), &centered_weight_bound(&rho, j));
            }
        }
        for (name, w) in &worst {
            report.le(format!("{name}@h={h}"), w.anchor, w.value, p.tol);
            rows.push((h, name.clone(), w.anchor.to_string(), w.value));
        }
        report.metric(format!("signed_rho_precondition_hits@h={h}"), preconditions as f64);

        // a signed ρ is outside the weighted bound's hypothesis
        let mut rho = random_compact::<f64, _>(mesh, CompactSpec::nonnegative(p.max_support), &mut rng);
        let (lo, _) = rho.support().expect("nonempty support");
        let mut v = rho.values().to_vec();
        v[lo] = -0.5;
        rho = MeshFunction::from_values(mesh, v)?;
        let nu = random_compact::<f64, _>(mesh, signed, &mut rng);
        let anchor = "(rho nu, D+^2 D- nu) >= -1/2 (nu, nu D-^2 D+ rho) + (D0 rho D+ nu, D+ nu) + 1/2 (D- rho D+ nu, D+ nu)";
        match weighted_dispersive_bound(&rho, &nu)? {
            Guarded::PreconditionViolated { name, reason } => {
                report.precondition(format!("{name}.signed_rho@h={h}"), anchor, reason);
            }
            Guarded::Checked(_) => {
                report.holds(
                    format!("weighted_dispersive_bound.signed_rho@h={h}"),
                    anchor,
                    false,
                    "signed rho was not flagged",
                );
            }
        }

        // negative control: the sign-flipped identity must be caught on every sample
        if !p.inject_sign_bug {
            let (mut caught, mut nontrivial) = (0usize, 0usize);
            for _ in 0..p.samples.min(20) {
                let rho: MeshFunction<f64> = random_compact(mesh, signed, &mut rng);
                let nu = rho.shift(2).add(&random_compact(mesh, signed, &mut rng))?;
                let bug = sbp_sign_bug(&nu, &rho)?;
                if bug.lhs == 0.0 && bug.rhs == 0.0 {
                    continue;
                }
                nontrivial += 1;
                if !bug.holds(p.tol) {
                    caught += 1;
                }
            }
            report.holds(
                format!("negative_control.sign_bug_detected@h={h}"),
                "(D+ nu, rho) = -(nu, D- rho)",
                nontrivial > 0 && caught == nontrivial,
                format!("{caught} of {nontrivial} flipped samples flagged"),
            );
        }
    }
    report.note(
        "violation is |lhs - rhs| / scale for identities, (rhs - lhs) / scale for lower bounds and \
         (lhs - rhs) / scale for upper bounds; scale sums the absolute terms",
    );
    arts.write(&mut report, "identities.csv", |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["h", "identity", "anchor", "worst_relative_violation"])?;
        for (h, n, a, v) in &rows {
            wr.write_record([h.to_string(), n.clone(), a.clone(), format!("{v:e}")])?;
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
    fn small_run_passes() {
        let p = Params {
            samples: 10,
            ..Params::default()
        };
        let r = run(&p, 1, &Artifacts::none()).unwrap();
        assert!(r.passed, "{:?}", r.failures().collect::<Vec<_>>());
        assert!(r.checks.iter().any(|c| c.status == crate::report::Status::Precondition));
    }

    #[test]
    fn planted_sign_bug_fails_with_anchor() {
        let p = Params {
            samples: 5,
            hs: vec![0.1],
            inject_sign_bug: true,
            ..Params::default()
        };
        let r = run(&p, 1, &Artifacts::none()).unwrap();
        assert!(!r.passed);
        let f: Vec<_> = r.failures().collect();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].anchor, "(D+ nu, rho) = -(nu, D- rho)");
    }
}
