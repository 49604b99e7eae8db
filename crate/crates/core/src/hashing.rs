//! Random-projection hashing in the crossbar.
//!
//! Hashing planes are adjacent column pairs of a randomly RESET array: with
//! `B + 1` columns the adjacent-column difference yields `B` signed
//! projections of the input voltage vector. LSH keeps the sign of each
//! projection; TLSH additionally emits the wildcard `X` whenever the
//! current difference is smaller than a threshold.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::crossbar::{adjacent_column_diff, partition, tiled_vmm, TiledMatrix, DEFAULT_ARRAY_DIM};
use crate::device::{sample_reset_matrix, DeviceParams};
use crate::units::MICRO;
use crate::{Error, Result};

pub use crate::stats::pearson;

/// A real-valued feature vector produced by the controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    normalized: bool,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("feature vector has non-finite entries"));
        }
        Ok(Self {
            values,
            normalized: false,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Unit-normalized copy. The zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        let values = if n > 0.0 {
            self.values.iter().map(|v| v / n).collect()
        } else {
            self.values.clone()
        };
        Self {
            values,
            normalized: n > 0.0,
        }
    }
}

/// One ternary digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ternary {
    Zero,
    One,
    X,
}

impl Ternary {
    pub fn as_char(self) -> char {
        match self {
            Ternary::Zero => '0',
            Ternary::One => '1',
            Ternary::X => 'X',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '0' => Some(Ternary::Zero),
            '1' => Some(Ternary::One),
            'X' | 'x' => Some(Ternary::X),
            _ => None,
        }
    }

    pub fn is_x(self) -> bool {
        self == Ternary::X
    }

    /// Bitwise complement; `X` is its own complement.
    pub fn complement(self) -> Self {
        match self {
            Ternary::Zero => Ternary::One,
            Ternary::One => Ternary::Zero,
            Ternary::X => Ternary::X,
        }
    }
}

/// A fixed-length word over `{0, 1, X}`. Serialized as a string such as
/// `"10X1"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TernaryWord(Vec<Ternary>);

impl TernaryWord {
    pub fn new(bits: Vec<Ternary>) -> Self {
        Self(bits)
    }

    pub fn all_x(len: usize) -> Self {
        Self(vec![Ternary::X; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[Ternary] {
        &self.0
    }

    pub fn bits_mut(&mut self) -> &mut [Ternary] {
        &mut self.0
    }

    pub fn count_x(&self) -> usize {
        self.0.iter().filter(|b| b.is_x()).count()
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|b| b.complement()).collect())
    }
}

impl From<Vec<Ternary>> for TernaryWord {
    fn from(v: Vec<Ternary>) -> Self {
        Self(v)
    }
}

impl fmt::Display for TernaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|b| write!(f, "{}", b.as_char()))
    }
}

impl FromStr for TernaryWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| {
                Ternary::from_char(c)
                    .ok_or_else(|| Error::domain(format!("invalid ternary digit `{c}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl Serialize for TernaryWord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TernaryWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ternary Hamming distance: positions where both words are definite and
/// differ.
/// Ternary Hamming distance divided by the number of positions where both
/// words are definite; `0.5` when no position is.
pub fn normalized_ternary_hamming(u: &TernaryWord, w: &TernaryWord) -> Result<f64> {
    let d = ternary_hamming(u, w)?;
    let both = u
        .bits()
        .iter()
        .zip(w.bits())
        .filter(|(a, b)| !a.is_x() && !b.is_x())
        .count();
    Ok(if both == 0 {
        0.5
    } else {
        d as f64 / both as f64
    })
}

pub fn ternary_hamming(u: &TernaryWord, w: &TernaryWord) -> Result<usize> {
    if u.len() != w.len() {
        return Err(Error::Dimension {
            what: "ternary word length",
            expected: u.len(),
            got: w.len(),
        });
    }
    Ok(u.bits()
        .iter()
        .zip(w.bits())
        .filter(|(a, b)| !a.is_x() && !b.is_x() && a != b)
        .count())
}

/// Cosine distance `1 − cos θ`, in [0, 2].
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            what: "cosine vector length",
            expected: a.len(),
            got: b.len(),
        });
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::domain("cosine distance of a zero vector"));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

/// Hashing mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashMode {
    Lsh,
    Tlsh,
}

/// How the TLSH threshold current is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum Threshold {
    /// Fixed threshold current in amperes.
    Fixed { amps: f64 },
    /// `multiplier · σ̄ · v_in_max`, where σ̄ is the mean read σ of the
    /// plane devices.
    SigmaRule { multiplier: f64 },
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Fixed { amps: 4.0 * MICRO }
    }
}

/// Hashing-stage configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HashConfig {
    pub bits: usize,
    pub mode: HashMode,
    pub threshold: Threshold,
    /// Largest input voltage after scaling.
    pub v_in_max: f64,
    pub tile_rows: usize,
    pub tile_cols: usize,
}

impl Default for HashConfig {
    fn default() -> Self {
        Self {
            bits: 128,
            mode: HashMode::Tlsh,
            threshold: Threshold::default(),
            v_in_max: 0.2,
            tile_rows: DEFAULT_ARRAY_DIM,
            tile_cols: DEFAULT_ARRAY_DIM,
        }
    }
}

/// Randomly RESET crossbar columns used as hashing planes.
#[derive(Debug, Clone)]
pub struct HashPlanes {
    pub tiles: TiledMatrix,
    /// Resolved TLSH threshold current (amperes).
    pub i_th: f64,
    pub v_in_max: f64,
}

/// Builds `bits` hashing planes for `dim`-dimensional inputs from a
/// `dim × (bits + 1)` RESET array.
pub fn make_planes<R: Rng + ?Sized>(
    dim: usize,
    cfg: &HashConfig,
    params: &DeviceParams,
    rng: &mut R,
) -> Result<HashPlanes> {
    if dim == 0 || cfg.bits == 0 {
        return Err(Error::domain("hashing needs D >= 1 and B >= 1"));
    }
    let devices = sample_reset_matrix(dim, cfg.bits + 1, params, rng)?;
    let tiles = partition(&devices, cfg.tile_rows, cfg.tile_cols, params)?;
    let i_th = match cfg.threshold {
        Threshold::Fixed { amps } => amps,
        Threshold::SigmaRule { multiplier } => {
            multiplier * tiles.mean_read_sigma(params) * cfg.v_in_max
        }
    };
    if !(i_th >= 0.0) {
        return Err(Error::domain("threshold current must be >= 0"));
    }
    Ok(HashPlanes {
        tiles,
        i_th,
        v_in_max: cfg.v_in_max,
    })
}

impl HashPlanes {
    pub fn dim(&self) -> usize {
        self.tiles.logical_rows()
    }

    pub fn bits(&self) -> usize {
        self.tiles.logical_cols() - 1
    }

    pub fn with_threshold(mut self, i_th: f64) -> Self {
        self.i_th = i_th;
        self
    }
}

/// Scales `f` so that its largest magnitude maps to `v_in_max`. Returns the
/// voltages and the volts-per-unit scale factor (0 for the zero vector).
pub fn feature_to_voltages(f: &[f64], v_in_max: f64) -> (Vec<f64>, f64) {
    let m = f.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if m == 0.0 {
        return (vec![0.0; f.len()], 0.0);
    }
    let scale = v_in_max / m;
    let mut v: Vec<f64> = f.iter().map(|x| x * scale).collect();
    // keep the peak exactly at the ceiling despite rounding
    for (vi, xi) in v.iter_mut().zip(f) {
        if xi.abs() == m {
            *vi = v_in_max.copysign(*xi);
        }
    }
    (v, scale)
}

/// Result of hashing one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HashOutput {
    pub word: TernaryWord,
    /// Adjacent-column current differences, one per plane.
    pub diffs: Vec<f64>,
    pub energy: f64,
}

/// Projects `f` through the planes (one VMM) and returns the plane
/// currents differences.
pub fn project<R: Rng + ?Sized>(
    f: &[f64],
    planes: &HashPlanes,
    params: &DeviceParams,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    if f.len() != planes.dim() {
        return Err(Error::Dimension {
            what: "feature dimension vs hashing rows",
            expected: planes.dim(),
            got: f.len(),
        });
    }
    let (v, _) = feature_to_voltages(f, planes.v_in_max);
    let out = tiled_vmm(&planes.tiles, &v, params, rng)?;
    Ok((adjacent_column_diff(&out.currents)?, out.energy))
}

/// Binarizes current differences; `threshold` > 0 yields TLSH wildcards.
pub fn binarize(diffs: &[f64], threshold: f64) -> TernaryWord {
    diffs
        .iter()
        .map(|&d| {
            if d.abs() < threshold {
                Ternary::X
            } else if d > 0.0 {
                Ternary::One
            } else {
                Ternary::Zero
            }
        })
        .collect::<Vec<_>>()
        .into()
}

pub fn hash<R: Rng + ?Sized>(
    f: &[f64],
    planes: &HashPlanes,
    mode: HashMode,
    params: &DeviceParams,
    rng: &mut R,
) -> Result<HashOutput> {
    let (diffs, energy) = project(f, planes, params, rng)?;
    let threshold = match mode {
        HashMode::Lsh => 0.0,
        HashMode::Tlsh => planes.i_th,
    };
    Ok(HashOutput {
        word: binarize(&diffs, threshold),
        diffs,
        energy,
    })
}

/// Binary LSH signature (no wildcards). A zero difference maps to `0`.
pub fn hash_lsh<R: Rng + ?Sized>(
    f: &[f64],
    planes: &HashPlanes,
    params: &DeviceParams,
    rng: &mut R,
) -> Result<TernaryWord> {
    hash(f, planes, HashMode::Lsh, params, rng).map(|h| h.word)
}

/// Ternary LSH signature.
pub fn hash_tlsh<R: Rng + ?Sized>(
    f: &[f64],
    planes: &HashPlanes,
    params: &DeviceParams,
    rng: &mut R,
) -> Result<TernaryWord> {
    hash(f, planes, HashMode::Tlsh, params, rng).map(|h| h.word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use rand_distr::StandardNormal;

    fn w(s: &str) -> TernaryWord {
        s.parse().unwrap()
    }

    fn gaussian(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..dim).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn ternary_word_text_round_trip() {
        let x = w("10X1x0");
        assert_eq!(x.to_string(), "10X1X0");
        assert_eq!(x.count_x(), 2);
        assert!("10a".parse::<TernaryWord>().is_err());
        let js = serde_json::to_string(&x).unwrap();
        assert_eq!(js, "\"10X1X0\"");
        assert_eq!(serde_json::from_str::<TernaryWord>(&js).unwrap(), x);
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(ternary_hamming(&w("10X"), &w("001")).unwrap(), 1);
        assert_eq!(ternary_hamming(&w("10X1"), &w("10X1")).unwrap(), 0);
        assert!(ternary_hamming(&w("10"), &w("101")).is_err());
    }

    #[test]
    fn hamming_matches_xor_popcount_on_binary_words() {
        let mut rng = rng_from_seed(3);
        for _ in 0..10_000 {
            let a: u64 = rng.random();
            let b: u64 = rng.random();
            let to_word = |x: u64| {
                TernaryWord::new(
                    (0..64)
                        .map(|i| {
                            if x >> i & 1 == 1 {
                                Ternary::One
                            } else {
                                Ternary::Zero
                            }
                        })
                        .collect(),
                )
            };
            assert_eq!(
                ternary_hamming(&to_word(a), &to_word(b)).unwrap(),
                (a ^ b).count_ones() as usize
            );
        }
    }

    #[test]
    fn cosine_examples() {
        let f = [1.0, 2.0, -3.0];
        assert!(cosine_distance(&f, &f).unwrap().abs() < 1e-12);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 5.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine_distance(&[1.0, 0.0], &[-2.0, 0.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn voltage_scaling() {
        let (v, s) = feature_to_voltages(&[0.0; 4], 0.2);
        assert_eq!(v, vec![0.0; 4]);
        assert_eq!(s, 0.0);
        let mut rng = rng_from_seed(1);
        for _ in 0..100 {
            let f = gaussian(64, &mut rng);
            let (v, _) = feature_to_voltages(&f, 0.2);
            let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            assert_eq!(m, 0.2);
        }
    }

    #[test]
    fn plane_shapes() {
        let p = DeviceParams::default();
        let mut rng = rng_from_seed(2);
        let planes = make_planes(64, &HashConfig::default(), &p, &mut rng).unwrap();
        assert_eq!(planes.tiles.logical_cols(), 129);
        assert_eq!(planes.tiles.grid_dims(), (1, 3));
        assert_eq!(planes.bits(), 128);
        let one = make_planes(
            8,
            &HashConfig {
                bits: 1,
                ..Default::default()
            },
            &p,
            &mut rng,
        )
        .unwrap();
        assert_eq!(one.tiles.logical_cols(), 2);
        assert!(make_planes(
            8,
            &HashConfig {
                bits: 0,
                ..Default::default()
            },
            &p,
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn plane_normals_are_sign_symmetric() {
        let p = DeviceParams::default();
        let mut rng = rng_from_seed(4);
        let planes = make_planes(
            100,
            &HashConfig {
                bits: 100,
                ..Default::default()
            },
            &p,
            &mut rng,
        )
        .unwrap();
        let g = planes.tiles.conductances();
        let mut pos = 0usize;
        let mut n = 0usize;
        for row in g.rows() {
            for k in 0..100 {
                if row[k] - row[k + 1] > 0.0 {
                    pos += 1;
                }
                n += 1;
            }
        }
        let frac = pos as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((frac - 0.5).abs() < 3.0 * se, "{frac}");
    }

    #[test]
    fn noise_free_lsh_equals_dense_projection() {
        let p = DeviceParams::noise_free();
        let mut rng = rng_from_seed(5);
        let planes = make_planes(64, &HashConfig::default(), &p, &mut rng).unwrap();
        let g = planes.tiles.conductances();
        for _ in 0..50 {
            let f = gaussian(64, &mut rng);
            let word = hash_lsh(&f, &planes, &p, &mut rng).unwrap();
            for k in 0..128 {
                let proj: f64 = (0..64).map(|i| f[i] * (g[[i, k]] - g[[i, k + 1]])).sum();
                let expect = if proj > 0.0 {
                    Ternary::One
                } else {
                    Ternary::Zero
                };
                assert_eq!(word.bits()[k], expect);
            }
        }
    }

    #[test]
    fn zero_difference_maps_to_zero() {
        assert_eq!(binarize(&[0.0, 1e-9, -1e-9], 0.0).to_string(), "010");
    }

    #[test]
    fn tlsh_threshold_degenerate_cases() {
        let p = DeviceParams::default();
        let mut rng = rng_from_seed(6);
        let planes = make_planes(64, &HashConfig::default(), &p, &mut rng).unwrap();
        let f = gaussian(64, &mut rng);
        let zero = planes.clone().with_threshold(0.0);
        let a = hash_lsh(&f, &zero, &p, &mut rng_from_seed(9)).unwrap();
        let b = hash_tlsh(&f, &zero, &p, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
        let inf = planes.with_threshold(f64::INFINITY);
        assert_eq!(
            hash_tlsh(&f, &inf, &p, &mut rng).unwrap(),
            TernaryWord::all_x(128)
        );
    }

    #[test]
    fn x_count_non_decreasing_in_threshold() {
        let p = DeviceParams::noise_free();
        let mut rng = rng_from_seed(7);
        let planes = make_planes(64, &HashConfig::default(), &p, &mut rng).unwrap();
        let f = gaussian(64, &mut rng);
        let (diffs, _) = project(&f, &planes, &p, &mut rng).unwrap();
        let mut prev = 0;
        for k in 0..50 {
            let c = binarize(&diffs, k as f64 * 0.5 * MICRO).count_x();
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn noise_free_hash_is_scale_invariant() {
        let p = DeviceParams::noise_free();
        let mut rng = rng_from_seed(8);
        let planes = make_planes(64, &HashConfig::default(), &p, &mut rng).unwrap();
        for _ in 0..20 {
            let f = gaussian(64, &mut rng);
            let scaled: Vec<f64> = f.iter().map(|x| x * 3.7).collect();
            assert_eq!(
                hash_tlsh(&f, &planes, &p, &mut rng).unwrap(),
                hash_tlsh(&scaled, &planes, &p, &mut rng).unwrap()
            );
        }
    }

    #[test]
    fn sigma_rule_threshold() {
        let p = DeviceParams::default()
            .with_fluctuation(crate::device::Fluctuation::Constant { sigma: 1e-6 });
        let cfg = HashConfig {
            threshold: Threshold::SigmaRule { multiplier: 5.0 },
            ..Default::default()
        };
        let planes = make_planes(64, &cfg, &p, &mut rng_from_seed(1)).unwrap();
        assert!((planes.i_th - 5.0 * 1e-6 * 0.2).abs() < 1e-15);
    }
}
