//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the result lines always print.
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p spkadapt-cli --test acceptance -- 1 6 7`.

#[path = "../common/mod.rs"]
mod common;

mod benchmark;
mod cli;
mod frontend;
mod gradients;
mod metric;
mod training;

use std::time::Instant;

/// Outcome of one criterion: pass flag and a one-line summary.
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "gradient oracle", gradients::criterion),
        (2, "reversal identity", training::reversal_identity),
        (3, "step isolation", training::step_isolation),
        (4, "adaptation benefit", benchmark::adaptation_benefit),
        (5, "fusion sanity", benchmark::fusion_sanity),
        (6, "feature frontend", frontend::criterion),
        (7, "metric oracle", metric::criterion),
        (8, "cli determinism", cli::determinism),
        (9, "target-label firewall", cli::firewall),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = match std::panic::catch_unwind(run) {
            Ok(o) => o,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Outcome::new(false, format!("panicked: {}", msg))
            }
        };
        let verdict = if outcome.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {} ({}): {} [{:.1}s] {}",
            id,
            name,
            verdict,
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        if !outcome.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{} acceptance criteria failed", failed);
        std::process::exit(1);
    }
}
