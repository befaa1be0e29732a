//! Acceptance criteria, one PASS/FAIL line each. Every experiment runs once
//! at its defaults with seed 0; criteria select checks from the reports.

use std::process::ExitCode;
use std::time::Duration;

use mkdv_harness::experiments;
use mkdv_harness::spec::{ExperimentKind, ExperimentSpec};
use mkdv_harness::{Report, Timed};

struct Line {
    passed: bool,
    text: String,
}

fn run(kind: ExperimentKind) -> Timed {
    experiments::run(&ExperimentSpec::new(kind, 0), None).unwrap_or_else(|e| panic!("{kind}: {e:#}"))
}

/// All checks whose name satisfies `pick` pass, and there is at least one.
fn select(r: &Report, pick: impl Fn(&str) -> bool) -> (bool, usize, Vec<String>) {
    let chosen: Vec<_> = r.checks.iter().filter(|c| pick(&c.name)).collect();
    let failed: Vec<String> = chosen.iter().filter(|c| !c.passed()).map(|c| c.to_string()).collect();
    (!chosen.is_empty() && failed.is_empty(), chosen.len(), failed)
}

fn criterion(
    t: &Timed,
    title: &str,
    limit: Option<Duration>,
    pick: impl Fn(&str) -> bool,
    extra: Option<(bool, String)>,
) -> Line {
    let (ok, n, failed) = select(&t.report, pick);
    let secs = t.elapsed.as_secs_f64();
    let in_time = limit.map_or(true, |l| t.elapsed < l);
    let (extra_ok, extra_text) = extra.unwrap_or((true, String::new()));
    let mut text = format!("{title}: {n} checks, {secs:.2} s");
    if let Some(l) = limit {
        text += &format!(" (limit {} s)", l.as_secs());
    }
    if !extra_text.is_empty() {
        text += &format!("; {extra_text}");
    }
    for f in failed {
        text += &format!("\n    {f}");
    }
    Line {
        passed: ok && in_time && extra_ok,
        text,
    }
}

/// Every `min_probe@…` detail reads `"<p> probes over <s> steps"` with `p = s`.
fn probed_every_step(r: &Report) -> (bool, String) {
    let mut parts = Vec::new();
    let mut ok = true;
    let mut levels = 0;
    for c in r.checks.iter().filter(|c| c.name.starts_with("min_probe@")) {
        levels += 1;
        let nums: Vec<usize> = c.detail.split_whitespace().filter_map(|w| w.parse().ok()).collect();
        match nums.as_slice() {
            [p, s] if p == s => parts.push(format!("{p}/{s}")),
            _ => {
                ok = false;
                parts.push(format!("'{}'", c.detail));
            }
        }
    }
    (ok && levels > 0, format!("probed steps {}", parts.join(", ")))
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let identities = run(ExperimentKind::Identities);
    let sinc = run(ExperimentKind::SincAudit);
    let gamma = run(ExperimentKind::Gamma);
    let series = run(ExperimentKind::Series);
    let background = run(ExperimentKind::Background);
    let converge = run(ExperimentKind::Converge);
    let pipeline = run(ExperimentKind::Pipeline);
    let uniqueness = run(ExperimentKind::Uniqueness);

    let lines = [
        criterion(&identities, "identity suite", Some(secs(5)), |_| true, None),
        criterion(
            &sinc,
            "cardinal-series sandwich and isometry",
            Some(secs(30)),
            |n| n.starts_with("sandwich_") || n == "isometry",
            None,
        ),
        criterion(&gamma, "exponent lattice closure", Some(secs(2)), |_| true, None),
        criterion(&series, "leading coefficient closed form", None, |n| n == "closed_form.plus", None),
        criterion(
            &background,
            "residual decay rate",
            None,
            |n| n.starts_with("decay_slope"),
            Some((
                background.report.check("decay_slope_strictly_decreasing@t=0.5").is_some(),
                "monotonicity checked at t = 0.5".into(),
            )),
        ),
        criterion(
            &converge,
            "travelling-wave convergence",
            Some(secs(60)),
            |n| {
                n == "soliton_substitution"
                    || n == "fitted_order"
                    || n == "finest_error"
                    || n.starts_with("mass_drift@")
                    || n.starts_with("level_completed")
            },
            None,
        ),
        criterion(
            &converge,
            "coercivity probe",
            None,
            |n| n.starts_with("min_probe@") || n == "refuses_large_step",
            Some(probed_every_step(&converge.report)),
        ),
        criterion(
            &pipeline,
            "seminorm boundedness",
            None,
            |n| n == "completed" || n == "finite" || n == "watched_growth",
            None,
        ),
        criterion(&uniqueness, "perturbation growth", None, |n| n == "energy_bound" || n == "linear_scaling", None),
        criterion(&pipeline, "large-x amplitude", None, |n| n.starts_with("amplitude@"), None),
    ];

    let mut passed = 0;
    for (i, l) in lines.iter().enumerate() {
        println!("{} {:>2} {}", if l.passed { "PASS" } else { "FAIL" }, i + 1, l.text);
        passed += usize::from(l.passed);
    }
    println!("acceptance: {passed}/{} criteria", lines.len());
    if passed == lines.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
