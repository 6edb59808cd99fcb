//! Acceptance gate over the bundled suite. Prints one line per criterion and
//! exits non-zero when a criterion outside the known deviations fails.

use std::collections::BTreeSet;
use std::process::ExitCode;

use steenlab::report::{CheckRecord, RunReport, Verdict};
use steenlab::scenario::{run_scenarios, RunConfig, RunOptions};

/// Criteria whose failure is an established property of the formulas as
/// printed, not of the implementation.
const KNOWN_DEVIATIONS: &[u32] = &[7, 8];

struct Part {
    label: String,
    worst: f64,
    tolerance: f64,
    count: usize,
}

impl Part {
    fn ok(&self) -> bool {
        self.count > 0 && self.worst <= self.tolerance
    }
}

struct Criterion {
    id: u32,
    title: &'static str,
    parts: Vec<Part>,
}

fn records<'a>(report: &'a RunReport, scenarios: &[&str], check: &str) -> Vec<&'a CheckRecord> {
    report
        .scenarios
        .iter()
        .filter(|s| scenarios.contains(&s.scenario.as_str()))
        .flat_map(|s| s.records.iter())
        .filter(|r| r.check.rsplit('/').next() == Some(check))
        .collect()
}

fn part(report: &RunReport, label: &str, scenarios: &[&str], check: &str, tolerance: f64) -> Part {
    let found = records(report, scenarios, check);
    let worst = found
        .iter()
        .map(|r| match (r.verdict, r.residual) {
            (Verdict::Error, _) | (_, None) => f64::INFINITY,
            (_, Some(v)) if v.is_nan() => f64::INFINITY,
            (_, Some(v)) => v,
        })
        .fold(0.0, f64::max);
    Part {
        label: label.to_string(),
        worst,
        tolerance,
        count: found.len(),
    }
}

fn value(r: &CheckRecord, key: &str) -> f64 {
    r.values.get(key).copied().unwrap_or(f64::NAN)
}

fn single(label: &str, residual: f64, tolerance: f64) -> Part {
    Part {
        label: label.to_string(),
        worst: if residual.is_nan() { f64::INFINITY } else { residual },
        tolerance,
        count: 1,
    }
}

fn evaluate(report: &RunReport, rerun: &RunReport) -> Vec<Criterion> {
    let steen = ["steen-harmonic", "steen-mathieu"];
    let dirac = ["dirac-free", "dirac-constant", "dirac-cos"];
    let all_dirac = ["dirac-free", "dirac-free-grid", "dirac-constant", "dirac-cos", "full-chain-mathieu"];
    let deform = ["deform-free", "deform-constant", "deform-cos"];
    let theorem = ["deform-constant", "deform-cos"];

    let trace_pi = records(report, &["dirac-constant"], "gamma1")
        .into_iter()
        .find(|r| value(r, "re_lambda") == 0.4 && value(r, "im_lambda") == 0.0)
        .map(|r| {
            let g = num_complex::Complex64::new(value(r, "re_gamma1"), value(r, "im_gamma1"));
            (g - 2.0 * std::f64::consts::PI.cosh()).norm()
        })
        .unwrap_or(f64::NAN);

    let paper_ratio = records(report, &["deform-free"], "paper-printed-residual")
        .first()
        .map(|r| (value(r, "ratio") - 1.0).abs())
        .unwrap_or(f64::NAN);

    let crossing = records(report, &["deform-constant"], "singularity")
        .first()
        .map(|r| (value(r, "x") - 1.0).abs())
        .unwrap_or(f64::NAN);

    let identical = if report.to_json() == rerun.to_json() { 0.0 } else { 1.0 };

    vec![
        Criterion {
            id: 1,
            title: "Pinney superposition",
            parts: vec![part(report, "pinney residual", &steen, "pinney-residual", 1e-6)],
        },
        Criterion {
            id: 2,
            title: "third-order invariance",
            parts: vec![
                part(report, "y1 y2", &steen, "cubic-invariance-uv", 1e-6),
                part(report, "z^2", &steen, "cubic-invariance-z2", 1e-6),
            ],
        },
        Criterion {
            id: 3,
            title: "unimodularity",
            parts: vec![
                part(report, "det F", &dirac, "det-F", 1e-9),
                part(report, "det S", &dirac, "det-S", 1e-9),
            ],
        },
        Criterion {
            id: 4,
            title: "analytic trace baseline",
            parts: vec![
                part(report, "q = 0 grid", &["dirac-free-grid"], "gamma1-oracle", 1e-7),
                single("constant q, 2cosh(pi)", trace_pi, 1e-6),
            ],
        },
        Criterion {
            id: 5,
            title: "Novikov equation",
            parts: vec![
                part(report, "commutator", &all_dirac, "novikov-commutator", 1e-6),
                part(report, "entrywise", &all_dirac, "novikov-entrywise", 1e-6),
            ],
        },
        Criterion {
            id: 6,
            title: "gradient identity",
            parts: (0..5)
                .map(|i| {
                    let name = format!("gradient-fd[{i}]");
                    part(report, &name, &deform, &name, 1e-5)
                })
                .collect(),
        },
        Criterion {
            id: 7,
            title: "kernel property",
            parts: vec![
                part(report, "novikov-derived, q = 0", &["deform-free"], "kernel-residual", 1e-6),
                part(report, "novikov-derived, q != 0", &theorem, "kernel-residual", 1e-6),
                single("paper-printed / 3|l| |field|, q = 0", paper_ratio, 0.05),
            ],
        },
        Criterion {
            id: 8,
            title: "theorem pipeline",
            parts: vec![
                part(report, "(i) kernel", &theorem, "kernel-residual", 1e-6),
                part(report, "(ii) proportionality", &theorem, "proportionality", 1e-5),
                part(report, "(iii) off-switch", &theorem, "off-switch", 1e-8),
            ],
        },
        Criterion {
            id: 9,
            title: "deformed-flow consistency",
            parts: vec![
                part(report, "alpha closed form", &deform, "alpha-closed-form", 1e-6),
                single("crossing abscissa", crossing, 1e-6),
            ],
        },
        Criterion {
            id: 10,
            title: "determinism",
            parts: vec![single("byte-identical reports", identical, 0.0)],
        },
    ]
}

fn main() -> ExitCode {
    let config = RunConfig::default_suite();
    let options = RunOptions {
        jobs: None,
        timings: false,
    };
    let report = run_scenarios(&config, &options).expect("default suite runs");
    let rerun = run_scenarios(
        &config,
        &RunOptions {
            jobs: Some(1),
            timings: false,
        },
    )
    .expect("default suite runs");

    let criteria = evaluate(&report, &rerun);
    let mut unexpected = BTreeSet::new();
    for c in &criteria {
        let ok = c.parts.iter().all(Part::ok);
        let known = KNOWN_DEVIATIONS.contains(&c.id);
        let tag = match (ok, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known deviation)",
            (false, false) => "FAIL",
        };
        println!("criterion {:>2} {:<26} {tag}", c.id, c.title);
        for p in &c.parts {
            println!(
                "    {:<4} {:<40} worst {:.3e} tol {:.0e} ({} records)",
                if p.ok() { "ok" } else { "x" },
                p.label,
                p.worst,
                p.tolerance,
                p.count
            );
        }
        if !ok && !known {
            unexpected.insert(c.id);
        }
    }

    // Inside the known deviations only the kernel parts may fail.
    for c in criteria.iter().filter(|c| KNOWN_DEVIATIONS.contains(&c.id)) {
        for p in &c.parts {
            let kernel_nonzero_q = p.label.contains("q != 0") || p.label.starts_with("(i)");
            if !p.ok() && !kernel_nonzero_q {
                unexpected.insert(c.id);
            }
        }
    }

    if unexpected.is_empty() {
        println!("acceptance: all criteria pass except the known kernel deviation (7, 8(i))");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures in {unexpected:?}");
        ExitCode::FAILURE
    }
}
