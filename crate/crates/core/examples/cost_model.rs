//! Latency and energy accounting, including search-voltage scaling.

use xbar_mann::harness::data::{synth, SyntheticSpec};
use xbar_mann::mann::{run_task, EpisodeConfig, Pipeline};
use xbar_mann::metrics::CostModel;
use xbar_mann::rng_from_seed;
use xbar_mann::units::{FEMTO, MICRO, NANO};

fn main() -> xbar_mann::Result<()> {
    let cm = CostModel::default();
    println!("CNN latency {:.2} us", cm.cnn_latency() / MICRO);
    println!(
        "search latency {:.1} ns (partitioned)",
        cm.search_latency(true, true) / NANO
    );

    let data = synth(&SyntheticSpec::default(), &mut rng_from_seed(1))?;
    let cfg = EpisodeConfig {
        repeats: 10,
        ..Default::default()
    };
    for v in [0.2, 0.02] {
        let mut pipe = Pipeline::default();
        pipe.tcam.v_search = v;
        let r = run_task(&cfg, &pipe, &data)?;
        println!(
            "V_search {v} V: {:.2} fJ per search, {:.4} fJ per bit",
            r.energy_per_search / FEMTO,
            r.energy_per_bit_per_search / FEMTO
        );
    }
    Ok(())
}
