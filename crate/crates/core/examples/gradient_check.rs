//! Runs the numerical self-checks: feature layers, DFT and gradients.

use cyclocap::selftest;

fn main() {
    let checks = selftest::run_all();
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
    if failed > 0 {
        std::process::exit(5);
    }
}
