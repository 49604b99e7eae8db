//! Accuracy of LSH and TLSH against a constant read fluctuation.

use xbar_mann::harness::data::{synth, SyntheticSpec};
use xbar_mann::mann::{EpisodeConfig, Pipeline};
use xbar_mann::metrics::{run_fluctuation_sweep, SweepSpec, TaskShape};
use xbar_mann::rng_from_seed;
use xbar_mann::units::MICRO;

fn main() -> xbar_mann::Result<()> {
    let data = synth(&SyntheticSpec::default(), &mut rng_from_seed(1))?;
    let spec = SweepSpec {
        levels: [0.1, 0.5, 1.0].iter().map(|x| x * MICRO).collect(),
        repeats: 30,
        tasks: vec![TaskShape {
            n_way: 25,
            k_shot: 1,
        }],
        ..Default::default()
    };
    let rows = run_fluctuation_sweep(
        &spec,
        &EpisodeConfig::default(),
        &Pipeline::default(),
        &data,
    )?;
    for r in rows {
        println!(
            "sigma {:.1} uS {:?}: {:.3} +/- {:.3}",
            r.level / MICRO,
            r.mode,
            r.mean,
            r.ci95
        );
    }
    Ok(())
}
