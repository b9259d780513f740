//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Run with `cargo test -p cellreach-gateway --test acceptance`.

mod conservatism;
mod endtoend;
mod kinematics;
mod planner;
mod toolbox;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

/// Outcome of one criterion: pass flag plus the measured figures.
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = (&'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 8] = [
    ("toolbox oracle suite", toolbox::run),
    ("kinematics suite", kinematics::run),
    ("occupancy/collision conservatism", conservatism::run),
    ("planner soundness/completeness", planner::run),
    ("task A end-to-end", endtoend::task_a),
    ("task B regression pair", endtoend::task_b),
    ("determinism", endtoend::determinism),
    ("undo integrity", endtoend::undo_integrity),
];

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, f) in CRITERIA {
        if !filter.is_empty() && !filter.iter().any(|w| name.contains(w.as_str())) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Verdict::new(false, format!("panicked: {msg}"))
            });
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {} ({:.1} s)", v.detail, started.elapsed().as_secs_f64());
        if !v.pass {
            failed += 1;
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
