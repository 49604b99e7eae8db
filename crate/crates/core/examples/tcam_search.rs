//! Search currents of an 8-word TCAM against the mismatch count.

use xbar_mann::device::DeviceParams;
use xbar_mann::harness::experiments::{current_quartiles, tcam_linearity};
use xbar_mann::tcam::TcamConfig;
use xbar_mann::units::MICRO;

fn main() -> xbar_mann::Result<()> {
    let r = tcam_linearity(
        8,
        8,
        100,
        &TcamConfig::default(),
        &DeviceParams::default(),
        3,
    )?;
    println!(
        "slope {:.2} uA/bit, intercept {:.2} uA",
        r.slope / MICRO,
        r.intercept / MICRO
    );
    println!("mismatches  n    q1_uA   median_uA  q3_uA");
    for q in current_quartiles(&r.samples) {
        println!(
            "{:>10}  {:>3}  {:>6.1}  {:>9.1}  {:>6.1}",
            q.mismatches,
            q.n,
            q.q1 / MICRO,
            q.median / MICRO,
            q.q3 / MICRO
        );
    }
    Ok(())
}
