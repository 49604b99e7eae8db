//! Program devices to a few targets and compare the measured read spread
//! with the fitted fluctuation model.

use xbar_mann::device::{program_target, read_fluctuated, sample_reset_matrix, DeviceParams};
use xbar_mann::rng_from_seed;
use xbar_mann::stats::{mean, quantile, std_dev};
use xbar_mann::units::MICRO;

fn main() -> xbar_mann::Result<()> {
    let p = DeviceParams::default();
    let mut rng = rng_from_seed(1);
    println!("target_us  g0_us   model_sigma_us  read_sigma_us");
    for target in [5.0, 20.0, 50.0, 150.0] {
        let dev = program_target(target * MICRO, &p, &mut rng)?;
        let reads: Vec<f64> = (0..10_000)
            .map(|_| read_fluctuated(&dev, &p, &mut rng))
            .collect();
        println!(
            "{target:>9.1}  {:>6.2}  {:>14.3}  {:>13.3}",
            dev.g0 / MICRO,
            dev.sigma(&p) / MICRO,
            std_dev(&reads) / MICRO
        );
    }

    let reset = sample_reset_matrix(64, 129, &p, &mut rng)?;
    let g: Vec<f64> = reset.iter().map(|d| d.g0 / MICRO).collect();
    println!(
        "RESET 64x129: median {:.2} uS, mean {:.2} uS, p99 {:.2} uS",
        quantile(&g, 0.5),
        mean(&g),
        quantile(&g, 0.99)
    );
    Ok(())
}
