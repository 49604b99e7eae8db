//! Experiment drivers behind the CLI subcommands.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::device::DeviceParams;
use crate::harness::data::FeatureDataset;
use crate::hashing::{
    cosine_distance, hash, make_planes, normalized_ternary_hamming, ternary_hamming, HashConfig,
    HashMode, Ternary, TernaryWord,
};
use crate::mann::{run_task, DistanceMode, EpisodeConfig, Pipeline};
use crate::stats::{self, Summary};
use crate::tcam::{nearest, sense_margin_closed_form, SenseMarginParams, TcamArray, TcamConfig};
use crate::{rng_from_seed, Error, Result, SimRng};

fn gaussian(dim: usize, rng: &mut SimRng) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// `n` vector pairs whose angles are uniform on `[0, π]`.
pub fn vector_pairs(n: usize, dim: usize, rng: &mut SimRng) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..n)
        .map(|_| {
            let a = unit(gaussian(dim, rng));
            let r = gaussian(dim, rng);
            let dot: f64 = r.iter().zip(&a).map(|(x, y)| x * y).sum();
            let u = unit(r.iter().zip(&a).map(|(x, y)| x - dot * y).collect());
            let phi = rng.random_range(0.0..std::f64::consts::PI);
            let b = a
                .iter()
                .zip(&u)
                .map(|(x, y)| x * phi.cos() + y * phi.sin())
                .collect();
            (a, b)
        })
        .collect()
}

/// Hashing variant compared in the correlation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HashVariant {
    /// Noise-free reads, LSH.
    Ideal,
    HardwareLsh,
    HardwareTlsh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub bits: usize,
    pub variant: HashVariant,
    /// Against the raw ternary Hamming distance.
    pub pearson: Summary,
    /// Against the distance normalized by co-definite positions.
    pub pearson_normalized: Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationSpec {
    pub pairs: usize,
    pub dim: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for CorrelationSpec {
    fn default() -> Self {
        Self {
            pairs: 500,
            dim: 64,
            repeats: 20,
            seed: 0,
        }
    }
}

/// Pearson correlation between cosine distance and (ternary) Hamming
/// distance of hashed pairs, per bit count and variant. Each repeat draws
/// new planes; the variants share planes and pairs within a repeat.
pub fn hash_correlation(
    bits: &[usize],
    spec: &CorrelationSpec,
    hashing: &HashConfig,
    device: &DeviceParams,
) -> Result<Vec<CorrelationRow>> {
    let pairs = vector_pairs(spec.pairs, spec.dim, &mut rng_from_seed(spec.seed));
    let cos: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| cosine_distance(a, b))
        .collect::<Result<_>>()?;
    let variants = [
        HashVariant::Ideal,
        HashVariant::HardwareLsh,
        HashVariant::HardwareTlsh,
    ];
    let grid: Vec<(usize, usize)> = bits
        .iter()
        .flat_map(|&b| (0..spec.repeats).map(move |r| (b, r)))
        .collect();
    let per: Vec<[(f64, f64); 3]> = grid
        .par_iter()
        .map(|&(b, r)| {
            let mut rng = rng_from_seed(spec.seed ^ ((b as u64) << 32) ^ (r as u64 + 1));
            let cfg = HashConfig {
                bits: b,
                ..*hashing
            };
            let planes = make_planes(spec.dim, &cfg, device, &mut rng)?;
            let mut out = [(0.0, 0.0); 3];
            for (k, v) in variants.iter().enumerate() {
                let (read, mode) = match v {
                    HashVariant::Ideal => (device.without_noise(), HashMode::Lsh),
                    HashVariant::HardwareLsh => (*device, HashMode::Lsh),
                    HashVariant::HardwareTlsh => (*device, HashMode::Tlsh),
                };
                let mut noise = rng_from_seed(spec.seed.wrapping_add(7919 * r as u64 + b as u64));
                let mut raw = Vec::with_capacity(pairs.len());
                let mut norm = Vec::with_capacity(pairs.len());
                for (a, c) in &pairs {
                    let ha = hash(a, &planes, mode, &read, &mut noise)?.word;
                    let hc = hash(c, &planes, mode, &read, &mut noise)?.word;
                    raw.push(ternary_hamming(&ha, &hc)? as f64);
                    norm.push(normalized_ternary_hamming(&ha, &hc)?);
                }
                out[k] = (stats::pearson(&cos, &raw)?, stats::pearson(&cos, &norm)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (bi, &b) in bits.iter().enumerate() {
        let chunk = &per[bi * spec.repeats..(bi + 1) * spec.repeats];
        for (k, v) in variants.iter().enumerate() {
            let raw: Vec<f64> = chunk.iter().map(|x| x[k].0).collect();
            let norm: Vec<f64> = chunk.iter().map(|x| x[k].1).collect();
            rows.push(CorrelationRow {
                bits: b,
                variant: *v,
                pearson: Summary::of(&raw),
                pearson_normalized: Summary::of(&norm),
            });
        }
    }
    Ok(rows)
}

/// Bits that read as both `0` and `1` over repeated hashing of one vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnstableBits {
    pub mode: HashMode,
    pub i_th: f64,
    /// Mean over vectors of bits that took both definite values.
    pub mean_flipping: f64,
    /// Mean over vectors of bits whose value changed at all (X included).
    pub mean_changing: f64,
}

/// Hashes each vector `repeats` times through one fixed plane array.
pub fn unstable_bits(
    vectors: &[Vec<f64>],
    repeats: usize,
    hashing: &HashConfig,
    device: &DeviceParams,
    seed: u64,
) -> Result<Vec<UnstableBits>> {
    let dim = vectors
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::domain("no vectors"))?;
    let planes = make_planes(dim, hashing, device, &mut rng_from_seed(seed))?;
    [HashMode::Lsh, HashMode::Tlsh]
        .into_iter()
        .map(|mode| {
            let counts: Vec<(usize, usize)> = vectors
                .par_iter()
                .enumerate()
                .map(|(i, v)| {
                    let mut rng = rng_from_seed(seed.wrapping_add(1 + i as u64));
                    let mut seen = vec![[false; 3]; hashing.bits];
                    for _ in 0..repeats {
                        let w = hash(v, &planes, mode, device, &mut rng)?.word;
                        for (s, b) in seen.iter_mut().zip(w.bits()) {
                            s[*b as usize] = true;
                        }
                    }
                    let flipping = seen
                        .iter()
                        .filter(|s| s[Ternary::Zero as usize] && s[Ternary::One as usize])
                        .count();
                    let changing = seen
                        .iter()
                        .filter(|s| s.iter().filter(|x| **x).count() > 1)
                        .count();
                    Ok((flipping, changing))
                })
                .collect::<Result<_>>()?;
            let n = counts.len() as f64;
            Ok(UnstableBits {
                mode,
                i_th: if mode == HashMode::Tlsh {
                    planes.i_th
                } else {
                    0.0
                },
                mean_flipping: counts.iter().map(|c| c.0 as f64).sum::<f64>() / n,
                mean_changing: counts.iter().map(|c| c.1 as f64).sum::<f64>() / n,
            })
        })
        .collect()
}

fn random_word(len: usize, p_x: f64, rng: &mut SimRng) -> TernaryWord {
    (0..len)
        .map(|_| {
            if rng.random_bool(p_x) {
                Ternary::X
            } else if rng.random_bool(0.5) {
                Ternary::One
            } else {
                Ternary::Zero
            }
        })
        .collect::<Vec<_>>()
        .into()
}

/// One (query, stored word) current sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearitySample {
    pub mismatches: usize,
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearityResult {
    pub samples: Vec<LinearitySample>,
    /// Least-squares slope of current against mismatch count (A / bit).
    pub slope: f64,
    pub intercept: f64,
}

/// Stores `n_words` random binary words and searches `n_queries` ternary
/// queries. Query `q` is derived from a random stored word by flipping
/// `q mod (word_len + 1)` random bits and wildcarding a random share of the
/// rest, so every mismatch count is represented.
pub fn tcam_linearity(
    word_len: usize,
    n_words: usize,
    n_queries: usize,
    tcam: &TcamConfig,
    device: &DeviceParams,
    seed: u64,
) -> Result<LinearityResult> {
    let mut rng = rng_from_seed(seed);
    let cfg = TcamConfig { word_len, ..*tcam };
    let mut array = TcamArray::new(cfg, *device)?;
    for _ in 0..n_words {
        array.append(&random_word(word_len, 0.0, &mut rng), &mut rng)?;
    }
    let mut samples = Vec::with_capacity(n_words * n_queries);
    for q in 0..n_queries {
        let base = rng.random_range(0..n_words);
        let m = q % (word_len + 1);
        let mut word = array.word(base).clone();
        let flips = sample(&mut rng, word_len, m);
        for i in flips.iter() {
            word.bits_mut()[i] = word.bits()[i].complement();
        }
        let p_x = rng.random_range(0.0..0.5);
        for i in 0..word_len {
            if !flips.iter().any(|f| f == i) && rng.random_bool(p_x) {
                word.bits_mut()[i] = Ternary::X;
            }
        }
        let out = array.search(&word, device, &mut rng)?;
        let dist = array.exact_distances(&word)?;
        samples.extend(
            dist.into_iter()
                .zip(out.currents)
                .map(|(d, c)| LinearitySample {
                    mismatches: d,
                    current: c,
                }),
        );
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.mismatches as f64).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.current).collect();
    let (slope, intercept) = stats::linear_fit(&xs, &ys)?;
    Ok(LinearityResult {
        samples,
        slope,
        intercept,
    })
}

/// Per-mismatch-count current quartiles of a linearity run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurrentQuartiles {
    pub mismatches: usize,
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub fn current_quartiles(samples: &[LinearitySample]) -> Vec<CurrentQuartiles> {
    let max = samples.iter().map(|s| s.mismatches).max().unwrap_or(0);
    (0..=max)
        .filter_map(|m| {
            let cs: Vec<f64> = samples
                .iter()
                .filter(|s| s.mismatches == m)
                .map(|s| s.current)
                .collect();
            (!cs.is_empty()).then(|| CurrentQuartiles {
                mismatches: m,
                n: cs.len(),
                q1: stats::quantile(&cs, 0.25),
                median: stats::quantile(&cs, 0.5),
                q3: stats::quantile(&cs, 0.75),
            })
        })
        .collect()
}

/// Closed-form margin next to the margin measured on a noise-free TCAM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginCheck {
    pub params: SenseMarginParams,
    pub closed_form: f64,
    pub measured: f64,
}

/// Builds the worst case of each instance: the closest word is `M`
/// mismatches away and the runner-up `M + 1`, with `K` query wildcards.
pub fn sense_margin_instance(
    p: &SenseMarginParams,
    tcam: &TcamConfig,
    rng: &mut SimRng,
) -> Result<MarginCheck> {
    if p.m + p.k + 1 > p.n {
        return Err(Error::domain("worst case needs M + K + 1 <= N"));
    }
    let closed_form = sense_margin_closed_form(p)?;
    let cfg = TcamConfig {
        word_len: p.n,
        g_off: tcam.g_on / p.r,
        ..*tcam
    };
    let device = DeviceParams {
        g_max: cfg.g_on,
        ..DeviceParams::noise_free()
    };
    let mut query = random_word(p.n, 0.0, rng);
    let order = sample(rng, p.n, p.n).into_vec();
    for &i in &order[..p.k] {
        query.bits_mut()[i] = Ternary::X;
    }
    let definite = &order[p.k..];
    let derive = |flips: usize, rng: &mut SimRng| {
        let mut w = query.clone();
        for (j, &i) in definite.iter().enumerate() {
            if j < flips {
                w.bits_mut()[i] = w.bits()[i].complement();
            }
        }
        for &i in &order[..p.k] {
            w.bits_mut()[i] = if rng.random_bool(0.5) {
                Ternary::One
            } else {
                Ternary::Zero
            };
        }
        w
    };
    let mut array = TcamArray::new(cfg, device)?;
    let near = derive(p.m, rng);
    let next = derive(p.m + 1, rng);
    array.append(&next, rng)?;
    array.append(&near, rng)?;
    let out = array.search(&query, &device, rng)?;
    let hit = nearest(&out.currents, cfg.lsb_current())?;
    Ok(MarginCheck {
        params: *p,
        closed_form,
        measured: hit.margin,
    })
}

/// Random `(N, M, K)` instances with `r` drawn from `[2, 1000]`.
pub fn sense_margin_monte_carlo(
    n_instances: usize,
    max_n: usize,
    tcam: &TcamConfig,
    seed: u64,
) -> Result<Vec<MarginCheck>> {
    let mut rng = rng_from_seed(seed);
    (0..n_instances)
        .map(|_| {
            let n = rng.random_range(1..=max_n);
            let k = rng.random_range(0..n);
            let m = rng.random_range(0..n - k);
            let r = rng.random_range(2.0..1000.0);
            sense_margin_instance(&SenseMarginParams { r, n, m, k }, tcam, &mut rng)
        })
        .collect()
}

/// Accuracy per bit count for one distance mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BitsRow {
    pub bits: usize,
    pub mode: HashMode,
    pub distance: DistanceMode,
    pub accuracy: Summary,
}

pub fn sweep_bits(
    bits: &[usize],
    modes: &[HashMode],
    cfg: &EpisodeConfig,
    pipe: &Pipeline,
    data: &FeatureDataset,
) -> Result<Vec<BitsRow>> {
    let mut rows = Vec::new();
    for &b in bits {
        for &mode in modes {
            let mut p = pipe.clone();
            p.hashing.bits = b;
            p.hashing.mode = mode;
            p.tcam.word_len = b;
            let r = run_task(cfg, &p, data)?;
            rows.push(BitsRow {
                bits: b,
                mode,
                distance: cfg.distance,
                accuracy: r.accuracy,
            });
        }
    }
    Ok(rows)
}
