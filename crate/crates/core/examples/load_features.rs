//! Load feature vectors from CSV (or the binary format) and run episodes.
//!
//! `cargo run --example load_features -- path/to/features.csv`

use std::path::PathBuf;

use xbar_mann::harness::data::{load_features, FeatureFormat};
use xbar_mann::mann::{run_task, EpisodeConfig, Pipeline};

fn main() -> xbar_mann::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/two_class.csv")
        });
    let data = load_features(&path, FeatureFormat::from_path(&path))?;
    println!(
        "{}: {} classes, D = {}, {} vectors",
        path.display(),
        data.n_classes(),
        data.dim(),
        data.len()
    );
    let cfg = EpisodeConfig {
        n_way: data.n_classes().min(5),
        queries_per_class: 1,
        repeats: 20,
        ..Default::default()
    };
    let r = run_task(&cfg, &Pipeline::default(), &data)?;
    println!("{}-way 1-shot accuracy {:.3}", cfg.n_way, r.accuracy.mean);
    Ok(())
}
