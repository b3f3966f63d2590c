//! Runs every acceptance criterion and prints one line per criterion.
//! Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use aucteq::report::run_suite;

fn main() -> ExitCode {
    let start = Instant::now();
    let results = run_suite();
    println!("\nacceptance criteria");
    for c in &results {
        println!("{}", c.line());
        for row in c.rows.iter().filter(|r| !r.pass) {
            println!(
                "       {}: computed {:e}, expected {:e}, {:?} within {:e}",
                row.name, row.computed, row.expected, row.check, row.tolerance
            );
        }
    }
    let failed = results.iter().filter(|c| !c.pass).count();
    println!(
        "\n{} of {} criteria passed in {:.1}s\n",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
