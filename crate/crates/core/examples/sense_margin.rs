//! Worst-case sense margin: closed form against noise-free simulation.

use xbar_mann::harness::experiments::sense_margin_monte_carlo;
use xbar_mann::tcam::{max_word_length, sense_margin_closed_form, SenseMarginParams, TcamConfig};

fn main() -> xbar_mann::Result<()> {
    println!(
        "max word length at r = 100, margin 0.5: {}",
        max_word_length(100.0, 0.5)?
    );
    for (m, k) in [(0, 0), (1, 0), (1, 32), (4, 64)] {
        let p = SenseMarginParams {
            r: 100.0,
            n: 128,
            m,
            k,
        };
        println!(
            "N=128 M={m} K={k}: margin {:.4}",
            sense_margin_closed_form(&p)?
        );
    }
    let checks = sense_margin_monte_carlo(20, 256, &TcamConfig::default(), 4)?;
    let worst = checks
        .iter()
        .map(|c| (c.measured - c.closed_form).abs())
        .fold(0.0, f64::max);
    println!("20 simulated instances, worst deviation {worst:.2e}");
    Ok(())
}
