//! One line per acceptance criterion, run with master seed 42.
//!
//! The lines and every individual check go to standard error even when the
//! harness captures output. The last line is the 20-seed false-rejection run
//! at significance 10^-2.

use std::io::Write;

use randset::selftest::{meta_check, run_criterion, Config, CRITERIA, META_RUNS};

const MASTER_SEED: u64 = 42;

/// Writes past the test harness's output capture.
macro_rules! say {
    ($($t:tt)*) => {{
        let mut e = std::io::stderr().lock();
        let _ = writeln!(e, $($t)*);
    }};
}

#[test]
fn acceptance() {
    let cfg = Config::new(MASTER_SEED);
    let mut failed = Vec::new();
    for &(id, _) in CRITERIA.iter() {
        let c = run_criterion(id, &cfg).unwrap_or_else(|e| panic!("criterion {id}: {e}"));
        for r in &c.reports {
            say!("    {}", r.line());
        }
        say!("{}", c.line());
        if !c.pass() {
            failed.push(id);
        }
    }
    let (report, runs) = meta_check(MASTER_SEED, META_RUNS).expect("meta run");
    for r in &runs {
        say!(
            "    seed {:#018x} {} {}",
            r.master_seed,
            if r.pass { "PASS" } else { "FAIL" },
            r.failed.join("; ")
        );
    }
    say!("multi-seed {}", report.line());
    if !report.pass {
        failed.push(0);
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
