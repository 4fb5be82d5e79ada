//! Acceptance run: every criterion at full size, one PASS/FAIL line each.
//!
//! Criteria 1-9 run the library suites; criterion 10 runs the `qmember` binary twice per
//! shipped spec and compares the bytes.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use qmember::suites::{run_suite, SuiteOptions, EXAMPLE_SPECS};

const SEED: u64 = 20_240_611;

const CRITERIA: [(&str, &str); 9] = [
    ("rank-dichotomy", "rank threshold dichotomy, 2 <= d <= 6"),
    ("fidelity-invariance", "fidelity blind subspace dimension and invariance"),
    ("exact-id", "exact identification witness, POVM and lower-bound space"),
    ("negative-minor", "negative 2x2 minor along the exact-identification witness"),
    ("midpoint-convexity", "strict mid-point convexity of the level-set functionals"),
    ("bloch-isometry", "qubit trace norm equals Bloch distance"),
    ("purity", "purity decompositions and the d = 4 witness"),
    ("boundary-criterion", "push to the boundary of the state space"),
    ("outcome-bounds", "rank outcome-count formula and trivial flag"),
];

fn cli_determinism() -> (bool, String) {
    let bin = env!("CARGO_BIN_EXE_qmember");
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("specs");
    let mut runs = 0;
    for (name, _) in EXAMPLE_SPECS {
        let path = dir.join(name);
        let once = || {
            Command::new(bin)
                .args(["analyze", "--seed", "7", "--spec"])
                .arg(&path)
                .output()
                .expect("qmember runs")
        };
        let (a, b) = (once(), once());
        runs += 2;
        if !a.status.success() || !b.status.success() {
            return (false, format!("{name}: exit {:?} / {:?}", a.status.code(), b.status.code()));
        }
        if a.stdout != b.stdout {
            return (false, format!("{name}: output differs between runs"));
        }
    }
    (true, format!("{runs} runs over {} specs, byte-identical", EXAMPLE_SPECS.len()))
}

fn main() {
    let opts = SuiteOptions::new(SEED);
    let mut all = true;
    for (k, (id, what)) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match run_suite(id, &opts) {
            Ok(r) => {
                let mut detail = format!("{} trials, {} failures", r.trials, r.failures);
                if let Some(first) = r.failure_samples.first() {
                    detail.push_str(&format!("; first: {first}"));
                }
                (r.passed, detail)
            }
            Err(e) => (false, format!("suite error: {e}")),
        };
        all &= ok;
        println!(
            "criterion {:>2} [{}] {what}: {detail} ({:.1}s)",
            k + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    let start = Instant::now();
    let (ok, detail) = cli_determinism();
    all &= ok;
    println!(
        "criterion 10 [{}] end-to-end analyze determinism: {detail} ({:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    if !all {
        std::process::exit(1);
    }
}
