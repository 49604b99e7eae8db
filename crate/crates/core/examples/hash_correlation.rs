//! Correlation between cosine distance and signature distance for ideal,
//! hardware LSH and hardware TLSH signatures, plus the unstable-bit count.

use xbar_mann::device::DeviceParams;
use xbar_mann::harness::experiments::{
    hash_correlation, unstable_bits, vector_pairs, CorrelationSpec,
};
use xbar_mann::hashing::HashConfig;
use xbar_mann::rng_from_seed;

fn main() -> xbar_mann::Result<()> {
    let device = DeviceParams::default();
    let hashing = HashConfig::default();
    let spec = CorrelationSpec {
        repeats: 5,
        ..Default::default()
    };
    println!("bits  variant        r(raw)  r(normalized)");
    for row in hash_correlation(&[16, 32, 64, 128], &spec, &hashing, &device)? {
        println!(
            "{:>4}  {:<13}  {:.4}  {:.4}",
            row.bits,
            format!("{:?}", row.variant),
            row.pearson.mean,
            row.pearson_normalized.mean
        );
    }
    let vectors: Vec<Vec<f64>> = vector_pairs(200, 64, &mut rng_from_seed(0))
        .into_iter()
        .map(|p| p.0)
        .collect();
    for u in unstable_bits(&vectors, 50, &hashing, &device, 0)? {
        println!(
            "{:?}: {:.2} flipping bits per vector",
            u.mode, u.mean_flipping
        );
    }
    Ok(())
}
