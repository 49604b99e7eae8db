//! 5-way 1-shot episodes on synthetic features with crossbar search, the
//! exact-distance oracle and the cosine baseline.

use xbar_mann::harness::data::{synth, SyntheticSpec};
use xbar_mann::mann::{run_task, DistanceMode, EpisodeConfig, Pipeline};
use xbar_mann::rng_from_seed;

fn main() -> xbar_mann::Result<()> {
    let data = synth(&SyntheticSpec::default(), &mut rng_from_seed(1))?;
    let pipe = Pipeline::default();
    for distance in [
        DistanceMode::Crossbar,
        DistanceMode::ExactOracle,
        DistanceMode::CosineBaseline,
    ] {
        let cfg = EpisodeConfig {
            repeats: 50,
            distance,
            ..Default::default()
        };
        let r = run_task(&cfg, &pipe, &data)?;
        println!(
            "{distance:?}: accuracy {:.3} +/- {:.3}, X share {:.2}, search energy {:.2e} J",
            r.accuracy.mean, r.accuracy.ci95, r.mean_x_fraction, r.energy_per_search
        );
    }
    Ok(())
}
