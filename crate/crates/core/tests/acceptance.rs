//! Runs every acceptance criterion at its stated tolerance and prints one
//! line per criterion. Exits nonzero if any criterion fails.

use pinch_core::verify::{run_criterion, suite_ids, VerifyOptions};

fn main() {
    let opts = VerifyOptions::default();
    let mut failed = 0;
    let mut total = 0.0;
    for &id in suite_ids("all").expect("suite exists") {
        let r = run_criterion(id, &opts);
        total += r.elapsed_s;
        let status = if r.passed { "PASS" } else { "FAIL" };
        let budget = if r.elapsed_s <= r.budget_s { "" } else { " (over budget)" };
        println!("[{status}] {:>2}. {} ({:.2} s / {:.0} s{budget}): {}", r.id, r.name, r.elapsed_s, r.budget_s, r.detail);
        failed += !r.passed as usize;
    }
    println!("acceptance: {} of 11 criteria passed in {total:.1} s", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
