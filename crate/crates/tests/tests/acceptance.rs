use std::process::ExitCode;

use fkg::selftest::{run_all, SelftestOptions};

fn main() -> ExitCode {
    let opts = SelftestOptions { seed: 20240611, threads: 0 };
    println!("acceptance: {} criteria, seed {}", fkg::selftest::TITLES.len(), opts.seed);
    let results = run_all(&opts, |r| println!("{}", r.line()));
    let failed: Vec<u32> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
