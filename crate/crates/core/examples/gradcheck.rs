//! Certifies the analytic physical-layer gradients against central finite
//! differences and prints the per-instance report.
//!
//! cargo run --example gradcheck -- [instances]

use learned_sensing::grad::{certify, CheckGroup, GradCheckOptions};

fn main() -> learned_sensing::Result<()> {
    let instances = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let report = certify(&GradCheckOptions { instances, ..Default::default() })?;
    print!("{}", report.to_csv());
    for group in [CheckGroup::Weights, CheckGroup::Pupil, CheckGroup::EndToEnd] {
        if let Some(max) = report.group_max(group) {
            println!("{:<10} worst relative error {max:.2e}", group.name());
        }
    }
    println!("{}", if report.passed() { "PASS" } else { "FAIL" });
    Ok(())
}
