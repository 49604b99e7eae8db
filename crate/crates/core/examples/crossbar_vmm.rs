//! Map signed weights differentially, split them over 64x64 tiles and
//! compare the noisy VMM against the exact product.

use ndarray::Array2;
use rand::Rng;
use xbar_mann::crossbar::{decode_differential, map_weights_differential, partition, tiled_vmm};
use xbar_mann::device::{program_target, DeviceParams};
use xbar_mann::rng_from_seed;
use xbar_mann::units::MICRO;

fn main() -> xbar_mann::Result<()> {
    let p = DeviceParams::default();
    let mut rng = rng_from_seed(2);
    let (rows, cols) = (100, 20);
    let w = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0));
    let ratio = 100.0 * MICRO;
    let g = map_weights_differential(&w, ratio, &p)?;
    let devices = g.mapv(|t| program_target(t, &p, &mut rng).unwrap());
    let tiles = partition(&devices, 64, 64, &p)?;
    println!(
        "logical {rows}x{} on a {:?} tile grid",
        2 * cols,
        tiles.grid_dims()
    );

    let v: Vec<f64> = (0..rows).map(|_| rng.random_range(-0.2..0.2)).collect();
    let out = tiled_vmm(&tiles, &v, &p, &mut rng)?;
    let got = decode_differential(&out.currents, ratio)?;
    let exact: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| v[i] * w[[i, j]]).sum())
        .collect();
    for (j, (a, b)) in exact.iter().zip(&got).enumerate().take(8) {
        println!("out[{j}] exact {a:+.4}  crossbar {b:+.4}");
    }
    println!("energy {:.3e} J", out.energy);
    Ok(())
}
