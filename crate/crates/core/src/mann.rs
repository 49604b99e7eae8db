//! Memory controller: TCAM-backed nearest-neighbour memory with
//! majority-vote score updates, and N-way K-shot episode execution.
//!
//! Every stored word carries an integer score vector `s`. A new word `a`
//! starts at `s = f(a)` with `f: 1 → +1, 0 → −1, X → 0`. When a support
//! sample with the same label as its nearest entry arrives, `s += f(v)` and
//! the stored word becomes `L(s)` with `L: >0 → 1, 0 → X, <0 → 0`; only the
//! bits whose value changed are reprogrammed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, Fluctuation};
use crate::harness::data::FeatureDataset;
use crate::hashing::{
    self, cosine_distance, make_planes, HashConfig, HashPlanes, Ternary, TernaryWord,
};
use crate::metrics::{CostModel, EnergyBreakdown};
use crate::stats::{self, Summary};
use crate::tcam::{nearest, TcamArray, TcamConfig};
use crate::{Error, Result, SimRng};

/// `f: 1 → +1, 0 → −1, X → 0`.
pub fn map_f(w: &TernaryWord) -> Vec<i32> {
    w.bits()
        .iter()
        .map(|b| match b {
            Ternary::One => 1,
            Ternary::Zero => -1,
            Ternary::X => 0,
        })
        .collect()
}

/// `s + f(v)`.
pub fn update_score(s: &[i32], v: &TernaryWord) -> Result<Vec<i32>> {
    if s.len() != v.len() {
        return Err(Error::Dimension {
            what: "score vector vs word length",
            expected: s.len(),
            got: v.len(),
        });
    }
    Ok(s.iter().zip(map_f(v)).map(|(a, b)| a + b).collect())
}

/// Sign of each score: `>0 → 1`, `0 → X`, `<0 → 0`.
pub fn rebinarize(s: &[i32]) -> TernaryWord {
    s.iter()
        .map(|&x| match x.signum() {
            1 => Ternary::One,
            -1 => Ternary::Zero,
            _ => Ternary::X,
        })
        .collect::<Vec<_>>()
        .into()
}

/// How distances between a query and the stored words are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Noisy TCAM search currents.
    Crossbar,
    /// Exact ternary Hamming distances, noise-free hashing.
    #[serde(alias = "oracle")]
    ExactOracle,
    /// Real-valued prototypes compared by cosine distance; no hashing.
    #[serde(alias = "cosine")]
    CosineBaseline,
}

/// Record of one `learn` call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UpdateEvent {
    /// Whether the nearest entry had the same label and was updated.
    pub matched: bool,
    pub entry: usize,
    /// Bits programmed by this call (every non-X bit on a fresh write).
    pub bits_rewritten: usize,
}

/// Outcome of classifying one query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub label: usize,
    pub entry: usize,
    /// Empirical sense margin of the search.
    pub margin: f64,
    pub tie: bool,
}

/// TCAM-backed memory of ternary words with per-entry score vectors.
#[derive(Debug, Clone)]
pub struct MemoryBank {
    tcam: TcamArray,
    labels: Vec<usize>,
    scores: Vec<Vec<i32>>,
    update_counts: Vec<Vec<u32>>,
    capacity: usize,
    search_energy: f64,
    searches: usize,
    searched_bits: u64,
}

impl MemoryBank {
    pub fn new(tcam: TcamConfig, params: DeviceParams, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::domain("memory capacity must be >= 1"));
        }
        Ok(Self {
            tcam: TcamArray::new(tcam, params)?,
            labels: Vec::new(),
            scores: Vec::new(),
            update_counts: Vec::new(),
            capacity,
            search_energy: 0.0,
            searches: 0,
            searched_bits: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn tcam(&self) -> &TcamArray {
        &self.tcam
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn scores(&self, entry: usize) -> &[i32] {
        &self.scores[entry]
    }

    pub fn word(&self, entry: usize) -> &TernaryWord {
        self.tcam.word(entry)
    }

    /// Per-bit write counters of every entry.
    pub fn update_counts(&self) -> &[Vec<u32>] {
        &self.update_counts
    }

    /// Accumulated TCAM search energy (joules), number of searches and
    /// stored bits compared over all searches.
    pub fn search_totals(&self) -> (f64, usize, u64) {
        (self.search_energy, self.searches, self.searched_bits)
    }

    /// Currents (or their noise-free equivalent in oracle mode) of every
    /// stored entry for `q`.
    pub fn currents(
        &mut self,
        q: &TernaryWord,
        mode: DistanceMode,
        read: &DeviceParams,
        rng: &mut SimRng,
    ) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyBank);
        }
        match mode {
            DistanceMode::Crossbar => {
                let out = self.tcam.search(q, read, rng)?;
                self.search_energy += out.energy;
                self.searches += 1;
                self.searched_bits += (self.len() * q.len()) as u64;
                Ok(out.currents)
            }
            DistanceMode::ExactOracle => {
                let unit = self.tcam.config().mismatch_current();
                Ok(self
                    .tcam
                    .exact_distances(q)?
                    .into_iter()
                    .map(|d| d as f64 * unit)
                    .collect())
            }
            DistanceMode::CosineBaseline => {
                Err(Error::domain("cosine baseline does not use the TCAM bank"))
            }
        }
    }

    /// Finds the nearest entry; updates it when the label agrees,
    /// otherwise writes `sig` to the next free column.
    pub fn learn(
        &mut self,
        sig: &TernaryWord,
        label: usize,
        mode: DistanceMode,
        read: &DeviceParams,
        rng: &mut SimRng,
    ) -> Result<UpdateEvent> {
        if !self.is_empty() {
            let currents = self.currents(sig, mode, read, rng)?;
            let hit = nearest(&currents, self.tcam.config().lsb_current())?;
            if self.labels[hit.index] == label {
                let s = update_score(&self.scores[hit.index], sig)?;
                let changed = self.tcam.rewrite(hit.index, &rebinarize(&s), rng)?;
                for &b in &changed {
                    self.update_counts[hit.index][b] += 1;
                }
                self.scores[hit.index] = s;
                return Ok(UpdateEvent {
                    matched: true,
                    entry: hit.index,
                    bits_rewritten: changed.len(),
                });
            }
        }
        if self.len() >= self.capacity {
            return Err(Error::CapacityExhausted {
                capacity: self.capacity,
            });
        }
        let entry = self.tcam.append(sig, rng)?;
        let counts: Vec<u32> = sig.bits().iter().map(|b| u32::from(!b.is_x())).collect();
        let written = counts.iter().sum::<u32>() as usize;
        self.labels.push(label);
        self.scores.push(map_f(sig));
        self.update_counts.push(counts);
        Ok(UpdateEvent {
            matched: false,
            entry,
            bits_rewritten: written,
        })
    }

    pub fn classify(
        &mut self,
        sig: &TernaryWord,
        mode: DistanceMode,
        read: &DeviceParams,
        rng: &mut SimRng,
    ) -> Result<Classification> {
        let currents = self.currents(sig, mode, read, rng)?;
        let hit = nearest(&currents, self.tcam.config().lsb_current())?;
        Ok(Classification {
            label: self.labels[hit.index],
            entry: hit.index,
            margin: hit.margin,
            tie: hit.tie,
        })
    }

    /// Histogram of per-bit write counts over all entries; index `c` holds
    /// the number of bits written exactly `c` times.
    pub fn update_histogram(&self) -> Vec<u64> {
        let mut hist = Vec::new();
        for &c in self.update_counts.iter().flatten() {
            let c = c as usize;
            if hist.len() <= c {
                hist.resize(c + 1, 0);
            }
            hist[c] += 1;
        }
        hist
    }
}

/// Software baseline: real-valued prototypes compared by cosine distance.
/// A matching sample is folded in as `normalize(key + q)`.
#[derive(Debug, Clone, Default)]
pub struct CosineMemory {
    keys: Vec<Vec<f64>>,
    labels: Vec<usize>,
    capacity: usize,
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

impl CosineMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Index and distance of the closest key, plus the runner-up distance.
    fn closest(&self, q: &[f64]) -> Result<(usize, f64, Option<f64>)> {
        let mut d = self
            .keys
            .iter()
            .map(|k| cosine_distance(k, q))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .enumerate()
            .collect::<Vec<_>>();
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let (i, d0) = *d.first().ok_or(Error::EmptyBank)?;
        Ok((i, d0, d.get(1).map(|x| x.1)))
    }

    pub fn learn(&mut self, q: &[f64], label: usize) -> Result<UpdateEvent> {
        if !self.is_empty() {
            let (i, _, _) = self.closest(q)?;
            if self.labels[i] == label {
                let key = &mut self.keys[i];
                key.iter_mut().zip(q).for_each(|(k, x)| *k += x);
                normalize(key);
                return Ok(UpdateEvent {
                    matched: true,
                    entry: i,
                    bits_rewritten: 0,
                });
            }
        }
        if self.len() >= self.capacity {
            return Err(Error::CapacityExhausted {
                capacity: self.capacity,
            });
        }
        let mut key = q.to_vec();
        normalize(&mut key);
        self.keys.push(key);
        self.labels.push(label);
        Ok(UpdateEvent {
            matched: false,
            entry: self.keys.len() - 1,
            bits_rewritten: 0,
        })
    }

    /// The margin reported is the cosine-distance gap to the runner-up.
    pub fn classify(&self, q: &[f64]) -> Result<Classification> {
        let (i, d0, d1) = self.closest(q)?;
        let margin = d1.map_or(f64::INFINITY, |d1| d1 - d0);
        Ok(Classification {
            label: self.labels[i],
            entry: i,
            margin,
            tie: margin == 0.0,
        })
    }
}

/// Shape and repetition of an N-way K-shot task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub n_way: usize,
    pub k_shot: usize,
    pub queries_per_class: usize,
    /// Number of independent episodes.
    pub repeats: usize,
    /// Memory entries available per episode.
    pub capacity: usize,
    pub distance: DistanceMode,
    /// Keep per-search current traces in the episode logs.
    pub trace: bool,
    /// Base seed; episode `r` derives its streams from `(seed, r)`.
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            n_way: 5,
            k_shot: 1,
            queries_per_class: 5,
            repeats: 100,
            capacity: 256,
            distance: DistanceMode::Crossbar,
            trace: false,
            seed: 0,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_way < 2 {
            return Err(Error::domain("n_way must be >= 2"));
        }
        if self.k_shot < 1 {
            return Err(Error::domain("k_shot must be >= 1"));
        }
        if self.queries_per_class < 1 || self.repeats < 1 {
            return Err(Error::domain("queries_per_class and repeats must be >= 1"));
        }
        if self.capacity < self.n_way {
            return Err(Error::domain(
                "capacity must hold at least one entry per class",
            ));
        }
        Ok(())
    }
}

/// Everything an episode needs besides the task shape.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pipeline {
    pub device: DeviceParams,
    pub hashing: HashConfig,
    pub tcam: TcamConfig,
    pub cost: CostModel,
}

/// One TCAM search as seen by the controller.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchTrace {
    pub query: TernaryWord,
    pub currents: Vec<f64>,
    pub winner: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRecord {
    pub label: usize,
    pub predicted: usize,
    pub margin: f64,
    pub tie: bool,
    /// Exact ternary Hamming distance between the query and the winner
    /// (absent for the cosine baseline).
    pub winner_mismatch: Option<usize>,
    pub x_bits: usize,
}

/// Full log of one episode, written as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Dataset labels of the episode's classes, indexed by episode label.
    pub classes: Vec<String>,
    /// Episode labels of the support samples in presentation order.
    pub support_order: Vec<usize>,
    pub events: Vec<UpdateEvent>,
    pub queries: Vec<QueryRecord>,
    pub accuracy: f64,
    pub energy: EnergyBreakdown,
    pub searches: usize,
    pub searched_bits: u64,
    pub update_histogram: Vec<u64>,
    pub i_th: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<SearchTrace>,
}

/// Aggregate over all episodes of a task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeReport {
    pub config: EpisodeConfig,
    pub pipeline: Pipeline,
    pub accuracy: Summary,
    pub episode_accuracies: Vec<f64>,
    /// Index `c`: bits written exactly `c` times, summed over episodes.
    pub update_histogram: Vec<u64>,
    /// Among written bits, the share written once.
    pub frac_written_once: f64,
    /// Among written bits, the share rewritten more than three times.
    pub frac_rewritten_over_3: f64,
    pub bits_rewritten: u64,
    pub energy: EnergyBreakdown,
    pub searches: usize,
    /// Mean TCAM energy per search (joules).
    pub energy_per_search: f64,
    /// Search energy divided by the stored bits compared (joules).
    pub energy_per_bit_per_search: f64,
    /// Per-query latency: CNN layers plus hashing and search.
    pub latency_per_query: f64,
    pub margin: Summary,
    pub frac_margin_above_2: f64,
    pub mean_winner_mismatch: f64,
    pub ties: usize,
    pub mean_x_fraction: f64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent RNG streams of one episode.
pub struct EpisodeStreams {
    pub data: SimRng,
    pub planes: SimRng,
    pub noise: SimRng,
}

impl EpisodeStreams {
    pub fn new(seed: u64, episode: usize) -> Self {
        let key = splitmix64(seed ^ splitmix64(episode as u64));
        let stream = |s: u64| {
            let mut r = SimRng::seed_from_u64(key);
            r.set_stream(s);
            r
        };
        Self {
            data: stream(0),
            planes: stream(1),
            noise: stream(2),
        }
    }
}

/// Classes with enough vectors, or an error naming the class that is short.
fn eligible_classes<'a>(cfg: &EpisodeConfig, data: &'a FeatureDataset) -> Result<Vec<&'a str>> {
    let needed = cfg.k_shot + cfg.queries_per_class;
    let mut ok = Vec::new();
    let mut short = None;
    for (label, vs) in data.classes() {
        if vs.len() >= needed {
            ok.push(label);
        } else if short.is_none() {
            short = Some((label, vs.len()));
        }
    }
    if ok.len() >= cfg.n_way {
        return Ok(ok);
    }
    Err(match short {
        Some((class, have)) => Error::InsufficientData {
            class: class.to_string(),
            needed,
            have,
        },
        None => Error::domain(format!(
            "dataset has {} classes, {}-way task needs {}",
            data.n_classes(),
            cfg.n_way,
            cfg.n_way
        )),
    })
}

enum Memory {
    Tcam(Box<MemoryBank>),
    Cosine(CosineMemory),
}

/// Runs episode `episode` of the task.
pub fn run_episode(
    cfg: &EpisodeConfig,
    pipe: &Pipeline,
    data: &FeatureDataset,
    episode: usize,
) -> Result<EpisodeLog> {
    let classes = eligible_classes(cfg, data)?;
    run_episode_from(cfg, pipe, data, &classes, episode)
}

fn run_episode_from(
    cfg: &EpisodeConfig,
    pipe: &Pipeline,
    data: &FeatureDataset,
    eligible: &[&str],
    episode: usize,
) -> Result<EpisodeLog> {
    let mut st = EpisodeStreams::new(cfg.seed, episode);
    let picked = rand::seq::index::sample(&mut st.data, eligible.len(), cfg.n_way);
    let classes: Vec<String> = picked.iter().map(|i| eligible[i].to_string()).collect();

    let mut support = Vec::new();
    let mut queries = Vec::new();
    for (label, name) in classes.iter().enumerate() {
        let vs = data.class(name).expect("eligible class exists");
        let idx =
            rand::seq::index::sample(&mut st.data, vs.len(), cfg.k_shot + cfg.queries_per_class);
        for (n, i) in idx.iter().enumerate() {
            let item = (label, vs[i].values());
            if n < cfg.k_shot {
                support.push(item);
            } else {
                queries.push(item);
            }
        }
    }
    support.shuffle(&mut st.data);

    let mut energy = EnergyBreakdown::default();
    let mut events = Vec::with_capacity(support.len());
    let mut records = Vec::with_capacity(queries.len());
    let mut traces = Vec::new();
    let mut i_th = 0.0;

    let mut memory = match cfg.distance {
        DistanceMode::CosineBaseline => Memory::Cosine(CosineMemory::new(cfg.capacity)),
        _ => {
            let tcam = TcamConfig {
                word_len: pipe.hashing.bits,
                ..pipe.tcam
            };
            let program = match cfg.distance {
                DistanceMode::ExactOracle => pipe.device.without_noise(),
                _ => pipe.device,
            };
            Memory::Tcam(Box::new(MemoryBank::new(tcam, program, cfg.capacity)?))
        }
    };
    let read = match cfg.distance {
        DistanceMode::Crossbar => pipe.device,
        _ => pipe.device.with_fluctuation(Fluctuation::Off),
    };
    let planes: Option<HashPlanes> = match cfg.distance {
        DistanceMode::CosineBaseline => None,
        _ => {
            let p = make_planes(data.dim(), &pipe.hashing, &pipe.device, &mut st.planes)?;
            i_th = p.i_th;
            Some(p)
        }
    };
    let sign =
        |f: &[f64], noise: &mut SimRng, energy: &mut EnergyBreakdown| -> Result<TernaryWord> {
            let planes = planes.as_ref().expect("hashing modes have planes");
            let h = hashing::hash(f, planes, pipe.hashing.mode, &read, noise)?;
            energy.hash += h.energy;
            Ok(h.word)
        };

    for &(label, f) in &support {
        let ev = match &mut memory {
            Memory::Cosine(m) => m.learn(f, label)?,
            Memory::Tcam(bank) => {
                let w = sign(f, &mut st.noise, &mut energy)?;
                bank.learn(&w, label, cfg.distance, &read, &mut st.noise)?
            }
        };
        events.push(ev);
    }
    for &(label, f) in &queries {
        let rec = match &mut memory {
            Memory::Cosine(m) => {
                let c = m.classify(f)?;
                QueryRecord {
                    label,
                    predicted: c.label,
                    margin: c.margin,
                    tie: c.tie,
                    winner_mismatch: None,
                    x_bits: 0,
                }
            }
            Memory::Tcam(bank) => {
                let w = sign(f, &mut st.noise, &mut energy)?;
                let c = if cfg.trace {
                    let currents = bank.currents(&w, cfg.distance, &read, &mut st.noise)?;
                    let hit = nearest(&currents, bank.tcam().config().lsb_current())?;
                    traces.push(SearchTrace {
                        query: w.clone(),
                        currents,
                        winner: hit.index,
                    });
                    Classification {
                        label: bank.labels()[hit.index],
                        entry: hit.index,
                        margin: hit.margin,
                        tie: hit.tie,
                    }
                } else {
                    bank.classify(&w, cfg.distance, &read, &mut st.noise)?
                };
                QueryRecord {
                    label,
                    predicted: c.label,
                    margin: c.margin,
                    tie: c.tie,
                    winner_mismatch: Some(hashing::ternary_hamming(&w, bank.word(c.entry))?),
                    x_bits: w.count_x(),
                }
            }
        };
        records.push(rec);
    }

    let (searches, searched_bits, update_histogram) = match &memory {
        Memory::Tcam(bank) => {
            let (e, n, b) = bank.search_totals();
            energy.search += e;
            (n, b, bank.update_histogram())
        }
        Memory::Cosine(_) => (0, 0, Vec::new()),
    };
    let correct = records.iter().filter(|r| r.label == r.predicted).count();
    Ok(EpisodeLog {
        episode,
        classes,
        support_order: support.iter().map(|s| s.0).collect(),
        events,
        accuracy: correct as f64 / records.len() as f64,
        queries: records,
        energy,
        searches,
        searched_bits,
        update_histogram,
        i_th,
        traces,
    })
}

/// Runs all episodes (in parallel, results in episode order) and returns
/// the aggregate report with the per-episode logs.
pub fn run_task_logged(
    cfg: &EpisodeConfig,
    pipe: &Pipeline,
    data: &FeatureDataset,
) -> Result<(EpisodeReport, Vec<EpisodeLog>)> {
    cfg.validate()?;
    pipe.device.validate()?;
    pipe.tcam.validate()?;
    pipe.cost.validate()?;
    let eligible = eligible_classes(cfg, data)?;
    let logs = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| run_episode_from(cfg, pipe, data, &eligible, r))
        .collect::<Result<Vec<_>>>()?;
    Ok((aggregate(cfg, pipe, data.dim(), &logs), logs))
}

pub fn run_task(
    cfg: &EpisodeConfig,
    pipe: &Pipeline,
    data: &FeatureDataset,
) -> Result<EpisodeReport> {
    run_task_logged(cfg, pipe, data).map(|r| r.0)
}

fn aggregate(
    cfg: &EpisodeConfig,
    pipe: &Pipeline,
    dim: usize,
    logs: &[EpisodeLog],
) -> EpisodeReport {
    let accs: Vec<f64> = logs.iter().map(|l| l.accuracy).collect();
    let mut hist: Vec<u64> = Vec::new();
    let mut energy = EnergyBreakdown::default();
    let mut searches = 0;
    let mut searched_bits = 0;
    for l in logs {
        if hist.len() < l.update_histogram.len() {
            hist.resize(l.update_histogram.len(), 0);
        }
        for (h, x) in hist.iter_mut().zip(&l.update_histogram) {
            *h += x;
        }
        energy = energy + l.energy;
        searches += l.searches;
        searched_bits += l.searched_bits;
    }
    let written: u64 = hist.iter().skip(1).sum();
    let once = hist.get(1).copied().unwrap_or(0);
    let over3: u64 = hist.iter().skip(5).sum();
    let share = |n: u64| {
        if written == 0 {
            0.0
        } else {
            n as f64 / written as f64
        }
    };
    let bits_rewritten = logs
        .iter()
        .flat_map(|l| &l.events)
        .map(|e| e.bits_rewritten as u64)
        .sum();

    let queries: Vec<&QueryRecord> = logs.iter().flat_map(|l| &l.queries).collect();
    let margins: Vec<f64> = queries
        .iter()
        .map(|q| q.margin)
        .filter(|m| m.is_finite())
        .collect();
    let above2 = queries.iter().filter(|q| q.margin > 2.0).count();
    let mism: Vec<f64> = queries
        .iter()
        .filter_map(|q| q.winner_mismatch)
        .map(|d| d as f64)
        .collect();
    let bits = pipe.hashing.bits.max(1) as f64;
    let x_frac: Vec<f64> = queries.iter().map(|q| q.x_bits as f64 / bits).collect();

    let hash_partitioned = dim.div_ceil(pipe.hashing.tile_rows)
        * (pipe.hashing.bits + 1).div_ceil(pipe.hashing.tile_cols)
        > 1;
    let tcam_partitioned = (pipe.hashing.bits * pipe.tcam.encoding.cells_per_bit())
        .div_ceil(pipe.tcam.tile_rows)
        * cfg.capacity.div_ceil(pipe.tcam.tile_cols)
        > 1;
    let latency = match cfg.distance {
        DistanceMode::CosineBaseline => pipe.cost.cnn_latency(),
        _ => pipe.cost.cnn_latency() + pipe.cost.search_latency(hash_partitioned, tcam_partitioned),
    };

    EpisodeReport {
        config: *cfg,
        pipeline: pipe.clone(),
        accuracy: Summary::of(&accs),
        episode_accuracies: accs,
        frac_written_once: share(once),
        frac_rewritten_over_3: share(over3),
        update_histogram: hist,
        bits_rewritten,
        energy,
        searches,
        energy_per_search: if searches == 0 {
            0.0
        } else {
            energy.search / searches as f64
        },
        energy_per_bit_per_search: if searched_bits == 0 {
            0.0
        } else {
            energy.search / searched_bits as f64
        },
        latency_per_query: latency,
        margin: Summary::of(&margins),
        frac_margin_above_2: if queries.is_empty() {
            0.0
        } else {
            above2 as f64 / queries.len() as f64
        },
        mean_winner_mismatch: stats::mean(&mism),
        ties: queries.iter().filter(|q| q.tie).count(),
        mean_x_fraction: stats::mean(&x_frac),
    }
}

/// Groups episode accuracies per dataset label, handy for debugging class
/// imbalance in external feature files.
pub fn accuracy_by_class(logs: &[EpisodeLog]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for l in logs {
        for q in &l.queries {
            let e = acc.entry(l.classes[q.label].clone()).or_default();
            e.0 += usize::from(q.label == q.predicted);
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(k, (c, n))| (k, c as f64 / n as f64))
        .collect()
}
