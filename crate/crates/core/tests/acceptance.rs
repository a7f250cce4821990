//! Acceptance run: one PASS/FAIL line per criterion at the pinned seed.
//!
//! Criterion 7 is known red: the cosh warp is the hyperbolic plane, on which
//! `Υ'' + 2ΥΥ'` vanishes identically, so the Khavkine operator is undefined
//! at every point. It is reported as FAIL and does not fail the target; any
//! other failure does.

use std::process::ExitCode;
use std::time::Instant;

use calabi_core::models::WarpFunction;
use calabi_core::verify::{
    suite_complex, suite_counterexample, suite_cpn_refined, suite_eigen_theorem, suite_identities, suite_khavkine,
    suite_lts, suite_spectrum, Check, RunConfig, SuiteReport, COMPLEX_SPECS, CPN_SPECS, DEFAULT_ORDER, DEFAULT_SEED,
    DEFAULT_TRIALS, EIGEN_SPECS, IDENTITY_CHARTS, LTS_SPECS, SPHERE_SPECS,
};

const KNOWN_RED: [u8; 1] = [7];

struct Criterion<'a> {
    id: u8,
    title: &'static str,
    checks: Vec<(&'a SuiteReport, &'a Check)>,
}

fn pick<'a>(
    reports: &'a [SuiteReport],
    suite: &str,
    specs: Option<&[&str]>,
    names: &[&str],
) -> Vec<(&'a SuiteReport, &'a Check)> {
    reports
        .iter()
        .filter(|r| r.suite == suite && specs.is_none_or(|s| s.contains(&r.spec.as_str())))
        .flat_map(|r| {
            r.checks
                .iter()
                .filter(|c| names.is_empty() || names.iter().any(|n| c.name.contains(n)))
                .map(move |c| (r, c))
        })
        .collect()
}

fn main() -> ExitCode {
    let cfg = RunConfig {
        order: DEFAULT_ORDER,
        tol: None,
        seed: DEFAULT_SEED,
        trials: DEFAULT_TRIALS,
    };
    let start = Instant::now();
    let mut reports: Vec<SuiteReport> = Vec::new();
    let mut run = |r: calabi_core::Result<SuiteReport>| match r {
        Ok(r) => reports.push(r),
        Err(e) => panic!("suite raised an error: {e}"),
    };
    for s in SPHERE_SPECS.iter().chain(&CPN_SPECS) {
        run(suite_spectrum(s, &cfg));
    }
    run(suite_eigen_theorem(&EIGEN_SPECS, &cfg));
    for s in COMPLEX_SPECS {
        run(suite_complex(s, &cfg));
    }
    for c in IDENTITY_CHARTS {
        run(suite_identities(c, &cfg));
    }
    run(suite_khavkine(WarpFunction::Cosh, &cfg));
    run(suite_khavkine(WarpFunction::ExpHalfSquare, &cfg));
    run(suite_counterexample(&cfg));
    run(suite_cpn_refined(1, &cfg));
    run(suite_cpn_refined(2, &cfg));
    run(suite_lts(&LTS_SPECS, &cfg));
    let elapsed = start.elapsed();

    let locally_symmetric: Vec<&str> = IDENTITY_CHARTS.iter().copied().filter(|c| !c.starts_with("warped-")).collect();
    let warped = ["warped-cosh", "warped-exp-half-square"];
    let r = &reports;
    let criteria = [
        Criterion {
            id: 1,
            title: "sphere spectra S2..S6: single eigenvalue 2/(n-1)",
            checks: pick(r, "spectrum", Some(&SPHERE_SPECS), &[]),
        },
        Criterion {
            id: 2,
            title: "CPn spectra n=1..3: {0, 2/(n+1), 2} with trace 2n",
            checks: pick(r, "spectrum", Some(&CPN_SPECS), &[]),
        },
        Criterion {
            id: 3,
            title: "eigenvalue bounds, zero eigenspace = C, Kähler top, H2 mirrored",
            checks: pick(r, "eigen-theorem", None, &[]),
        },
        Criterion {
            id: 4,
            title: "L∘K = 0 over 20 fields x 5 points on 8 specs",
            checks: pick(r, "complex", None, &[]),
        },
        Criterion {
            id: 5,
            title: "prolonged h has exterior derivative [0; C h] on all charts",
            checks: pick(r, "identities", None, &["prolonged h"]),
        },
        Criterion {
            id: 6,
            title: "prolongation curvature, with gradient term on warped charts",
            checks: pick(r, "identities", None, &["prolongation curvature"]),
        },
        Criterion {
            id: 7,
            title: "Khavkine∘K = 0 and J recovery for cosh t and exp(t²/2)",
            checks: pick(r, "khavkine", None, &["Khavkine", "J(K", "precondition"]),
        },
        Criterion {
            id: 8,
            title: "trace(C(K σ)) = -(∇R)σ on warped and locally symmetric charts",
            checks: [
                pick(r, "identities", Some(&locally_symmetric), &["trace(C(K σ))"]),
                pick(r, "identities", Some(&warped), &["trace(C(K σ))"]),
                pick(r, "khavkine", None, &["trace(C(K σ))"]),
            ]
            .concat(),
        },
        Criterion {
            id: 9,
            title: "linearised scalar curvature = -½ trace(C h) on S2, CP1",
            checks: pick(r, "identities", Some(&["S2", "CP1"]), &["ε-coefficient"]),
        },
        Criterion {
            id: 10,
            title: "S2xS1 field outside the Killing range; S3xS1 clean",
            checks: pick(r, "counterexample", None, &[]),
        },
        Criterion {
            id: 11,
            title: "refined trace identity on CP1, CP2",
            checks: pick(r, "refined-cpn", None, &[]),
        },
        Criterion {
            id: 12,
            title: "Lie triple system identity; random tensors rejected",
            checks: pick(r, "lts", None, &[]),
        },
    ];

    let mut unexpected = 0;
    for c in &criteria {
        let failing: Vec<_> = c.checks.iter().filter(|(_, k)| !k.pass).collect();
        let pass = !c.checks.is_empty() && failing.is_empty();
        let detail = match failing.first() {
            Some((r, k)) => format!("{} [{}] {}: value {:.3e}, tol {:.1e}", r.suite, r.spec, k.name, k.value, k.tol),
            None => format!("{} checks", c.checks.len()),
        };
        let known = KNOWN_RED.contains(&c.id);
        println!(
            "{} criterion {:>2}: {} ({detail}){}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.title,
            if !pass && known { " [known red]" } else { "" }
        );
        if !pass && !known {
            unexpected += 1;
        }
    }
    println!("acceptance run took {:.1} s", elapsed.as_secs_f64());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
