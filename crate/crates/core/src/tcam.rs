//! Crossbar ternary content-addressable memory.
//!
//! Every stored word occupies one output line (column). Each ternary bit is
//! stored in a group of cells on consecutive rows, and each query bit
//! drives the matching group of rows. The output current of a column is a
//! linear function of the ternary Hamming distance between the query and
//! the stored word, so the closest match is the column with the smallest
//! current.
//!
//! Two cell layouts are supported:
//!
//! | encoding       | stored `1`      | stored `0`      | stored `X`       | query `1`     | query `0`     | query `X` |
//! |----------------|-----------------|-----------------|------------------|---------------|---------------|-----------|
//! | differential   | (off, on)       | (on, off)       | (off, off)       | (V, 0)        | (0, V)        | (0, 0)    |
//! | three-cell     | (on, off, off)  | (off, on, off)  | (off, off, off)  | (0, V, −V)    | (V, 0, −V)    | (0, 0, 0) |
//!
//! A mismatched bit adds `V·g_on` (differential) or `V·(g_on − g_off)`
//! (three-cell). A matched bit adds `V·g_off` in the differential layout
//! and exactly zero in the three-cell layout, where the third cell is a
//! reference that cancels the off-state leakage.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::crossbar::{WireLoss, DEFAULT_ARRAY_DIM};
use crate::device::{program_target, reprogram, DeviceNoiseSample, DeviceParams, Fluctuation};
use crate::hashing::{Ternary, TernaryWord};
use crate::units::MICRO;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    #[default]
    Differential,
    ThreeCell,
}

impl Encoding {
    pub fn cells_per_bit(self) -> usize {
        match self {
            Encoding::Differential => 2,
            Encoding::ThreeCell => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TcamConfig {
    pub v_search: f64,
    pub g_on: f64,
    pub g_off: f64,
    pub encoding: Encoding,
    /// Word length in ternary bits.
    pub word_len: usize,
    /// Physical array rows; longer words are split over several arrays
    /// whose partial currents are summed.
    pub tile_rows: usize,
    /// Physical array columns (stored words per array).
    pub tile_cols: usize,
    /// Conductance of one sensing LSB, used when the closest-match current
    /// is zero.
    pub lsb_conductance: f64,
    pub wire_loss: WireLoss,
}

impl Default for TcamConfig {
    fn default() -> Self {
        Self {
            v_search: 0.2,
            g_on: 150.0 * MICRO,
            g_off: 0.0,
            encoding: Encoding::Differential,
            word_len: 128,
            tile_rows: DEFAULT_ARRAY_DIM,
            tile_cols: DEFAULT_ARRAY_DIM,
            lsb_conductance: 0.1 * MICRO,
            wire_loss: WireLoss::None,
        }
    }
}

impl TcamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_search > 0.0) {
            return Err(Error::domain("v_search must be > 0"));
        }
        if !(self.g_off >= 0.0 && self.g_on > self.g_off) {
            return Err(Error::domain("require g_on > g_off >= 0"));
        }
        if self.word_len == 0 || self.tile_rows == 0 || self.tile_cols == 0 {
            return Err(Error::domain(
                "word length and tile dimensions must be >= 1",
            ));
        }
        Ok(())
    }

    /// Rows occupied by one stored word.
    pub fn lines(&self) -> usize {
        self.word_len * self.encoding.cells_per_bit()
    }

    /// Current of one sensing LSB.
    pub fn lsb_current(&self) -> f64 {
        self.v_search * self.lsb_conductance
    }

    /// Current added by one mismatched bit in the noise-free limit.
    pub fn mismatch_current(&self) -> f64 {
        match self.encoding {
            Encoding::Differential => self.v_search * self.g_on,
            Encoding::ThreeCell => self.v_search * (self.g_on - self.g_off),
        }
    }

    fn cell_targets(&self, bit: Ternary) -> &'static [Level] {
        use Level::*;
        match (self.encoding, bit) {
            (Encoding::Differential, Ternary::One) => &[Off, On],
            (Encoding::Differential, Ternary::Zero) => &[On, Off],
            (Encoding::Differential, Ternary::X) => &[Off, Off],
            (Encoding::ThreeCell, Ternary::One) => &[On, Off, Off],
            (Encoding::ThreeCell, Ternary::Zero) => &[Off, On, Off],
            (Encoding::ThreeCell, Ternary::X) => &[Off, Off, Off],
        }
    }

    fn line_voltages(&self, bit: Ternary) -> [f64; 3] {
        let v = self.v_search;
        match (self.encoding, bit) {
            (Encoding::Differential, Ternary::One) => [v, 0.0, 0.0],
            (Encoding::Differential, Ternary::Zero) => [0.0, v, 0.0],
            (Encoding::ThreeCell, Ternary::One) => [0.0, v, -v],
            (Encoding::ThreeCell, Ternary::Zero) => [v, 0.0, -v],
            (_, Ternary::X) => [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Level {
    On,
    Off,
}

fn check_len(w: &TernaryWord, cfg: &TcamConfig) -> Result<()> {
    if w.len() != cfg.word_len {
        return Err(Error::Dimension {
            what: "ternary word length vs TCAM word length",
            expected: cfg.word_len,
            got: w.len(),
        });
    }
    Ok(())
}

/// Target conductances of a stored word, `cells_per_bit` per bit.
pub fn encode_word(w: &TernaryWord, cfg: &TcamConfig) -> Result<Vec<f64>> {
    check_len(w, cfg)?;
    Ok(w.bits()
        .iter()
        .flat_map(|&b| cfg.cell_targets(b).iter())
        .map(|l| match l {
            Level::On => cfg.g_on,
            Level::Off => cfg.g_off,
        })
        .collect())
}

/// Search-line voltages of a query, `cells_per_bit` per bit.
pub fn encode_query(q: &TernaryWord, cfg: &TcamConfig) -> Result<Vec<f64>> {
    check_len(q, cfg)?;
    let k = cfg.encoding.cells_per_bit();
    Ok(q.bits()
        .iter()
        .flat_map(|&b| cfg.line_voltages(b).into_iter().take(k))
        .collect())
}

/// Two-cell differential word encoding.
pub fn encode_word_differential(w: &TernaryWord, cfg: &TcamConfig) -> Result<Vec<f64>> {
    encode_word(
        w,
        &TcamConfig {
            encoding: Encoding::Differential,
            ..*cfg
        },
    )
}

/// Two-line differential query encoding.
pub fn encode_query_differential(q: &TernaryWord, cfg: &TcamConfig) -> Result<Vec<f64>> {
    encode_query(
        q,
        &TcamConfig {
            encoding: Encoding::Differential,
            ..*cfg
        },
    )
}

/// Three-cell word encoding.
pub fn encode_word_3cell(w: &TernaryWord, cfg: &TcamConfig) -> Result<Vec<f64>> {
    encode_word(
        w,
        &TcamConfig {
            encoding: Encoding::ThreeCell,
            ..*cfg
        },
    )
}

/// Three-line query encoding.
pub fn encode_query_3cell(q: &TernaryWord, cfg: &TcamConfig) -> Result<Vec<f64>> {
    encode_query(
        q,
        &TcamConfig {
            encoding: Encoding::ThreeCell,
            ..*cfg
        },
    )
}

#[derive(Debug, Clone)]
struct StoredColumn {
    word: TernaryWord,
    devices: Vec<DeviceNoiseSample>,
    fitted_sigma: Vec<f64>,
}

/// Currents of one search and the energy it drew.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutput {
    pub currents: Vec<f64>,
    pub energy: f64,
}

/// A TCAM built from programmed crossbar columns.
#[derive(Debug, Clone)]
pub struct TcamArray {
    cfg: TcamConfig,
    params: DeviceParams,
    columns: Vec<StoredColumn>,
}

impl TcamArray {
    /// An empty array. `params` governs programming error and the frozen
    /// device variation of every cell written later.
    pub fn new(cfg: TcamConfig, params: DeviceParams) -> Result<Self> {
        cfg.validate()?;
        let mut params = params;
        // the array's own levels bound what has to be programmable
        params.g_max = params.g_max.max(cfg.g_on);
        Ok(Self {
            cfg,
            params,
            columns: Vec::new(),
        })
    }

    pub fn config(&self) -> &TcamConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn word(&self, index: usize) -> &TernaryWord {
        &self.columns[index].word
    }

    pub fn words(&self) -> impl Iterator<Item = &TernaryWord> {
        self.columns.iter().map(|c| &c.word)
    }

    /// Programmed conductance map, one row per stored word (`lines()`
    /// columns each).
    pub fn conductance_map(&self) -> ndarray::Array2<f64> {
        let lines = self.cfg.lines();
        let mut out = ndarray::Array2::zeros((self.columns.len(), lines));
        for (mut row, col) in out.rows_mut().into_iter().zip(&self.columns) {
            for (dst, d) in row.iter_mut().zip(&col.devices) {
                *dst = d.g0;
            }
        }
        out
    }

    /// Number of physical arrays along the word (rows) and entry (columns)
    /// directions.
    pub fn grid_dims(&self) -> (usize, usize) {
        (
            self.cfg.lines().div_ceil(self.cfg.tile_rows),
            self.columns.len().max(1).div_ceil(self.cfg.tile_cols),
        )
    }

    /// Whether search results are aggregated across several arrays.
    pub fn is_partitioned(&self) -> bool {
        let (r, c) = self.grid_dims();
        r * c > 1
    }

    /// Writes a new word into the next free column and returns its index.
    pub fn append<R: Rng + ?Sized>(&mut self, w: &TernaryWord, rng: &mut R) -> Result<usize> {
        let targets = encode_word(w, &self.cfg)?;
        let devices = targets
            .iter()
            .map(|&g| program_target(g, &self.params, rng))
            .collect::<Result<Vec<_>>>()?;
        let fitted_sigma = devices
            .iter()
            .map(|d| self.params.fitted_sigma(d.g0, d.per_device_log_sigma))
            .collect();
        self.columns.push(StoredColumn {
            word: w.clone(),
            devices,
            fitted_sigma,
        });
        Ok(self.columns.len() - 1)
    }

    /// Rewrites the stored word at `index`, reprogramming only the cells of
    /// bits that changed. Returns the indices of the changed bits.
    pub fn rewrite<R: Rng + ?Sized>(
        &mut self,
        index: usize,
        w: &TernaryWord,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        check_len(w, &self.cfg)?;
        let k = self.cfg.encoding.cells_per_bit();
        let targets = encode_word(w, &self.cfg)?;
        let params = self.params;
        let col = self
            .columns
            .get_mut(index)
            .ok_or_else(|| Error::domain(format!("no stored word at index {index}")))?;
        let changed: Vec<usize> = (0..w.len())
            .filter(|&b| col.word.bits()[b] != w.bits()[b])
            .collect();
        for &b in &changed {
            for (c, &t) in targets.iter().enumerate().skip(b * k).take(k) {
                reprogram(&mut col.devices[c], t, &params, rng)?;
                col.fitted_sigma[c] =
                    params.fitted_sigma(col.devices[c].g0, col.devices[c].per_device_log_sigma);
            }
        }
        col.word = w.clone();
        Ok(changed)
    }

    /// One search: applies the encoded query to every stored column. Read
    /// noise follows `params` (one draw per driven device).
    pub fn search<R: Rng + ?Sized>(
        &self,
        q: &TernaryWord,
        params: &DeviceParams,
        rng: &mut R,
    ) -> Result<SearchOutput> {
        if self.columns.is_empty() {
            return Err(Error::EmptyBank);
        }
        let v = encode_query(q, &self.cfg)?;
        let driven: Vec<(usize, f64)> = v
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, x)| x != 0.0)
            .collect();
        let mut currents = Vec::with_capacity(self.columns.len());
        let mut energy = 0.0;
        for col in &self.columns {
            let mut i = 0.0;
            for &(line, vi) in &driven {
                let dev = &col.devices[line];
                let sigma = match params.fluctuation {
                    Fluctuation::Fitted => col.fitted_sigma[line],
                    _ => dev.sigma(params),
                };
                let g = if sigma == 0.0 {
                    dev.g0
                } else {
                    let z: f64 = rng.sample(StandardNormal);
                    (dev.g0 + sigma * z).clamp(0.0, self.params.g_max)
                };
                i += vi * g;
                energy += vi * vi * g * params.t_pulse;
            }
            currents.push(i);
        }
        let alpha = self
            .cfg
            .wire_loss
            .attenuation(self.cfg.tile_rows, self.cfg.tile_cols);
        if alpha != 1.0 {
            currents.iter_mut().for_each(|c| *c *= alpha);
        }
        Ok(SearchOutput { currents, energy })
    }

    /// Exact ternary Hamming distance from `q` to every stored word.
    pub fn exact_distances(&self, q: &TernaryWord) -> Result<Vec<usize>> {
        self.columns
            .iter()
            .map(|c| crate::hashing::ternary_hamming(q, &c.word))
            .collect()
    }
}

/// Closest match found by comparing output currents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Nearest {
    pub index: usize,
    /// Empirical sense margin `I1 / I0 − 1`.
    pub margin: f64,
    /// Whether another entry had exactly the same current.
    pub tie: bool,
}

/// Smallest current wins; ties go to the lowest index with margin 0. With a
/// single entry the margin is infinite. A closest-match current at or below
/// `lsb_current` is replaced by `lsb_current` in the margin denominator.
pub fn nearest(currents: &[f64], lsb_current: f64) -> Result<Nearest> {
    let (index, &i0) = currents
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .ok_or(Error::EmptyBank)?;
    let i1 = currents
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != index)
        .map(|(_, &c)| c)
        .min_by(f64::total_cmp);
    let Some(i1) = i1 else {
        return Ok(Nearest {
            index,
            margin: f64::INFINITY,
            tie: false,
        });
    };
    if i1 == i0 {
        return Ok(Nearest {
            index,
            margin: 0.0,
            tie: true,
        });
    }
    let denom = if i0 > lsb_current { i0 } else { lsb_current };
    Ok(Nearest {
        index,
        margin: i1 / denom - 1.0,
        tie: false,
    })
}

/// Inputs of the worst-case sense margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SenseMarginParams {
    /// On/off conductance ratio.
    pub r: f64,
    /// Word length.
    pub n: usize,
    /// Mismatches of the closest match.
    pub m: usize,
    /// Wildcard bits in the query.
    pub k: usize,
}

/// Worst-case margin between the closest and next-closest match.
///
/// * no mismatches, no wildcards: `(r − 1) / N`
/// * `M` mismatches, no wildcards: `1 / (M + N / (r − 1))`
/// * `M` mismatches, `K` wildcards: `1 / (M + (N − K) / (r − 1))`
pub fn sense_margin_closed_form(p: &SenseMarginParams) -> Result<f64> {
    if !(p.r > 1.0) {
        return Err(Error::domain("on/off ratio r must be > 1"));
    }
    if p.m + p.k > p.n {
        return Err(Error::domain("require M + K <= N"));
    }
    let (r, n, m, k) = (p.r, p.n as f64, p.m as f64, p.k as f64);
    Ok(match (p.m, p.k) {
        (0, 0) => (r - 1.0) / n,
        (_, 0) => 1.0 / (m + n / (r - 1.0)),
        _ => 1.0 / (m + (n - k) / (r - 1.0)),
    })
}

/// Longest word whose exact-match margin is at least `beta0`.
pub fn max_word_length(r: f64, beta0: f64) -> Result<usize> {
    if !(r > 1.0) || !(beta0 > 0.0) {
        return Err(Error::domain("require r > 1 and beta0 > 0"));
    }
    Ok(((r - 1.0) / beta0).floor() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::ternary_hamming;
    use crate::rng_from_seed;
    use crate::units::us;

    fn w(s: &str) -> TernaryWord {
        s.parse().unwrap()
    }

    fn cfg(len: usize) -> TcamConfig {
        TcamConfig {
            word_len: len,
            ..Default::default()
        }
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn differential_truth_table_matches_ternary_hamming() {
        let c = cfg(1);
        for a in [Ternary::Zero, Ternary::One, Ternary::X] {
            for b in [Ternary::Zero, Ternary::One, Ternary::X] {
                let sw = TernaryWord::new(vec![a]);
                let qw = TernaryWord::new(vec![b]);
                let i = dot(
                    &encode_word_differential(&sw, &c).unwrap(),
                    &encode_query_differential(&qw, &c).unwrap(),
                );
                let d = ternary_hamming(&sw, &qw).unwrap() as f64;
                assert!((i - d * 30e-6).abs() < 1e-18, "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn x_bits_encode_to_off_cells_and_zero_volts() {
        let c = cfg(1);
        assert_eq!(
            encode_word_differential(&w("X"), &c).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            encode_query_differential(&w("X"), &c).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            encode_query_differential(&w("1"), &c).unwrap(),
            vec![0.2, 0.0]
        );
        assert_eq!(
            encode_query_differential(&w("0"), &c).unwrap(),
            vec![0.0, 0.2]
        );
    }

    #[test]
    fn three_cell_match_is_exactly_zero_with_leaky_off_state() {
        let c = TcamConfig {
            word_len: 1,
            g_off: us(10.0),
            ..Default::default()
        };
        for (s, q, expect) in [
            ("1", "1", 0.0),
            ("0", "0", 0.0),
            ("X", "1", 0.0),
            ("X", "0", 0.0),
            ("1", "X", 0.0),
            ("1", "0", 0.2 * us(140.0)),
            ("0", "1", 0.2 * us(140.0)),
        ] {
            let i = dot(
                &encode_word_3cell(&w(s), &c).unwrap(),
                &encode_query_3cell(&w(q), &c).unwrap(),
            );
            assert!((i - expect).abs() < 1e-18, "{s} {q}: {i}");
        }
        // the two-cell layout leaks V·g_off = 2 µA on a match
        let i = dot(
            &encode_word_differential(&w("1"), &c).unwrap(),
            &encode_query_differential(&w("1"), &c).unwrap(),
        );
        assert!((i - 2e-6).abs() < 1e-18);
    }

    #[test]
    fn three_cell_all_mismatch() {
        let c = TcamConfig {
            word_len: 8,
            encoding: Encoding::ThreeCell,
            ..Default::default()
        };
        let i = dot(
            &encode_word(&w("11111111"), &c).unwrap(),
            &encode_query(&w("00000000"), &c).unwrap(),
        );
        assert!((i - 8.0 * 0.2 * us(150.0)).abs() < 1e-15);
    }

    #[test]
    fn noise_free_search_counts_mismatches() {
        let p = DeviceParams::noise_free();
        let mut arr = TcamArray::new(cfg(8), p).unwrap();
        let mut rng = rng_from_seed(1);
        arr.append(&w("11111111"), &mut rng).unwrap();
        arr.append(&w("11110000"), &mut rng).unwrap();
        arr.append(&w("X1X1X1X1"), &mut rng).unwrap();
        let out = arr.search(&w("11111111"), &p, &mut rng).unwrap();
        assert_eq!(out.currents[0], 0.0);
        assert!((out.currents[1] - 4.0 * 30e-6).abs() < 1e-15);
        assert_eq!(out.currents[2], 0.0);
        let out = arr.search(&TernaryWord::all_x(8), &p, &mut rng).unwrap();
        assert!(out.currents.iter().all(|&c| c == 0.0));
        assert_eq!(out.energy, 0.0);
    }

    #[test]
    fn search_errors() {
        let p = DeviceParams::noise_free();
        let mut arr = TcamArray::new(cfg(4), p).unwrap();
        let mut rng = rng_from_seed(1);
        assert!(matches!(
            arr.search(&w("1111"), &p, &mut rng),
            Err(Error::EmptyBank)
        ));
        arr.append(&w("1010"), &mut rng).unwrap();
        assert!(arr.search(&w("10"), &p, &mut rng).is_err());
        assert!(arr.append(&w("101"), &mut rng).is_err());
    }

    #[test]
    fn rewrite_touches_only_changed_bits() {
        let p = DeviceParams::default();
        let mut arr = TcamArray::new(cfg(4), p).unwrap();
        let mut rng = rng_from_seed(2);
        arr.append(&w("1010"), &mut rng).unwrap();
        let before = arr.conductance_map();
        let changed = arr.rewrite(0, &w("10X1"), &mut rng).unwrap();
        assert_eq!(changed, vec![2, 3]);
        let after = arr.conductance_map();
        for c in 0..4 {
            assert_eq!(before[[0, c]], after[[0, c]]);
        }
        assert_eq!(arr.word(0), &w("10X1"));
        assert!(arr.rewrite(0, &w("10X1"), &mut rng).unwrap().is_empty());
    }

    #[test]
    fn nearest_examples() {
        let n = nearest(&[10e-6, 30e-6, 30e-6], 0.02e-6).unwrap();
        assert_eq!(n.index, 0);
        assert!((n.margin - 2.0).abs() < 1e-12);
        let n = nearest(&[5.0, 3.0, 3.0], 0.0).unwrap();
        assert_eq!((n.index, n.margin, n.tie), (1, 0.0, true));
        assert_eq!(nearest(&[1.0], 0.0).unwrap().margin, f64::INFINITY);
        let n = nearest(&[0.0, 30e-6], 0.02e-6).unwrap();
        assert!((n.margin - (30.0 / 0.02 - 1.0)).abs() < 1e-9);
        assert!(nearest(&[], 0.0).is_err());
    }

    #[test]
    fn closed_form_cases() {
        let p = |r, n, m, k| SenseMarginParams { r, n, m, k };
        assert!((sense_margin_closed_form(&p(100.0, 198, 0, 0)).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(max_word_length(100.0, 0.5).unwrap(), 198);
        assert!(sense_margin_closed_form(&p(1.0, 8, 0, 0)).is_err());
        assert!(sense_margin_closed_form(&p(10.0, 8, 5, 4)).is_err());
        let b2 = sense_margin_closed_form(&p(50.0, 64, 3, 0)).unwrap();
        assert!((b2 - 1.0 / (3.0 + 64.0 / 49.0)).abs() < 1e-15);
        let mut prev = 0.0;
        for k in 0..60 {
            let b = sense_margin_closed_form(&p(50.0, 64, 3, k)).unwrap();
            if k > 0 {
                assert!(b > prev);
            }
            prev = b;
        }
    }

    #[test]
    fn grid_dims_follow_word_length() {
        let p = DeviceParams::noise_free();
        let mut arr = TcamArray::new(cfg(128), p).unwrap();
        let mut rng = rng_from_seed(1);
        for _ in 0..65 {
            arr.append(&TernaryWord::all_x(128), &mut rng).unwrap();
        }
        assert_eq!(arr.grid_dims(), (4, 2));
        assert!(arr.is_partitioned());
    }
}
