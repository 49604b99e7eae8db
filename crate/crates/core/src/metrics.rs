//! Energy and latency accounting, and the device-fluctuation sweep.
//!
//! Energy counts only the array: `E = Σ V² · G · t_pulse` over every driven
//! device of every applied input vector. Drivers, ADCs and sense amplifiers
//! are not included.

use std::ops::Add;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::Fluctuation;
use crate::harness::data::FeatureDataset;
use crate::hashing::{HashMode, Threshold};
use crate::mann::{run_task, run_task_logged, EpisodeConfig, Pipeline};
use crate::stats::Summary;
use crate::units::{MICRO, NANO};
use crate::{Error, Result};

/// Timing constants of the cost model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    /// One crossbar read.
    pub t_read: f64,
    /// One partial-sum adder stage.
    pub t_adder: f64,
    /// Input pulse width used for energy.
    pub t_pulse: f64,
    /// Input vectors applied per CNN layer for one inference.
    pub cnn_input_counts: Vec<u64>,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            t_read: 10.0 * NANO,
            t_adder: 2.5 * NANO,
            t_pulse: 10.0 * NANO,
            cnn_input_counts: vec![784, 784, 196, 196],
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_read > 0.0 && self.t_adder > 0.0 && self.t_pulse > 0.0) {
            return Err(Error::domain("cost model times must be > 0"));
        }
        Ok(())
    }

    pub fn cnn_latency(&self) -> f64 {
        latency_layers(&self.cnn_input_counts, self)
    }

    /// One array read, plus an adder stage when partial sums from several
    /// arrays have to be combined.
    pub fn stage_latency(&self, partitioned: bool) -> f64 {
        if partitioned {
            self.t_read + self.t_adder
        } else {
            self.t_read
        }
    }

    /// Hashing followed by TCAM search.
    pub fn search_latency(&self, hash_partitioned: bool, tcam_partitioned: bool) -> f64 {
        self.stage_latency(hash_partitioned) + self.stage_latency(tcam_partitioned)
    }
}

/// `t_read · Σ counts`.
pub fn latency_layers(input_vector_counts: &[u64], cm: &CostModel) -> f64 {
    cm.t_read * input_vector_counts.iter().sum::<u64>() as f64
}

/// `Σ_i Σ_j V_ij² · G_j · t_pulse` for input vectors `V_i` applied to the
/// rows of `g`; each row voltage sees every device on its row.
pub fn energy(voltage_sets: &[Vec<f64>], g: &Array2<f64>, t_pulse: f64) -> Result<f64> {
    let row_g: Vec<f64> = g.rows().into_iter().map(|r| r.sum()).collect();
    let mut e = 0.0;
    for v in voltage_sets {
        if v.len() != row_g.len() {
            return Err(Error::Dimension {
                what: "voltage vector length vs conductance rows",
                expected: row_g.len(),
                got: v.len(),
            });
        }
        e += v.iter().zip(&row_g).map(|(x, gs)| x * x * gs).sum::<f64>();
    }
    Ok(e * t_pulse)
}

/// Energy per pipeline stage (joules).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub cnn: f64,
    pub hash: f64,
    pub search: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.cnn + self.hash + self.search
    }
}

impl Add for EnergyBreakdown {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            cnn: self.cnn + o.cnn,
            hash: self.hash + o.hash,
            search: self.search + o.search,
        }
    }
}

/// A task shape inside a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskShape {
    pub n_way: usize,
    pub k_shot: usize,
}

/// Grid of a constant-σ fluctuation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Constant read σ per grid point (siemens), ascending.
    pub levels: Vec<f64>,
    /// TLSH threshold used at each level.
    pub threshold: Threshold,
    /// Median RESET conductance of the hashing planes during the sweep
    /// (siemens). At 1 µS the fitted model gives σ ≈ 0.1 µS, the reference
    /// level of the grid. `None` keeps the device setting.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plane_reset_median: Option<f64>,
    pub repeats: usize,
    pub tasks: Vec<TaskShape>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            levels: [0.001, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0]
                .iter()
                .map(|x| x * 1e-6)
                .collect(),
            threshold: Threshold::SigmaRule { multiplier: 3.0 },
            plane_reset_median: Some(1.0 * MICRO),
            repeats: 200,
            tasks: vec![
                TaskShape {
                    n_way: 5,
                    k_shot: 1,
                },
                TaskShape {
                    n_way: 25,
                    k_shot: 1,
                },
            ],
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.tasks.is_empty() || self.repeats == 0 {
            return Err(Error::domain("sweep needs levels, tasks and repeats >= 1"));
        }
        if matches!(self.plane_reset_median, Some(g) if !(g > 0.0)) {
            return Err(Error::domain("plane RESET median must be > 0"));
        }
        if self.levels.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::domain("fluctuation levels must be >= 0"));
        }
        if self.levels.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::domain("fluctuation levels must be sorted ascending"));
        }
        Ok(())
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Constant σ (siemens).
    pub level: f64,
    pub mode: HashMode,
    pub n_way: usize,
    pub k_shot: usize,
    pub mean: f64,
    pub ci95: f64,
    pub i_th: f64,
    pub episode_accuracies: Vec<f64>,
}

impl SweepRow {
    pub fn find(rows: &[SweepRow], level: f64, mode: HashMode, n_way: usize) -> Option<&SweepRow> {
        rows.iter()
            .find(|r| r.level == level && r.mode == mode && r.n_way == n_way)
    }
}

/// Accuracy per (level, LSH/TLSH, task). Every grid point reuses the same
/// episode seeds, so rows are paired across levels and modes.
pub fn run_fluctuation_sweep(
    spec: &SweepSpec,
    cfg: &EpisodeConfig,
    pipe: &Pipeline,
    data: &FeatureDataset,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut grid = Vec::new();
    for &level in &spec.levels {
        for task in &spec.tasks {
            for mode in [HashMode::Lsh, HashMode::Tlsh] {
                grid.push((level, *task, mode));
            }
        }
    }
    grid.into_par_iter()
        .map(|(level, task, mode)| {
            let mut p = pipe.clone();
            p.device.fluctuation = Fluctuation::Constant { sigma: level };
            if let Some(g) = spec.plane_reset_median {
                p.device.reset_median_g = g;
            }
            p.hashing.mode = mode;
            p.hashing.threshold = spec.threshold;
            let c = EpisodeConfig {
                n_way: task.n_way,
                k_shot: task.k_shot,
                repeats: spec.repeats,
                ..*cfg
            };
            let logs = run_task_logged(&c, &p, data)?.1;
            let accs: Vec<f64> = logs.iter().map(|l| l.accuracy).collect();
            let s = Summary::of(&accs);
            Ok(SweepRow {
                level,
                mode,
                n_way: task.n_way,
                k_shot: task.k_shot,
                mean: s.mean,
                ci95: s.ci95,
                i_th: logs.first().map_or(0.0, |l| l.i_th),
                episode_accuracies: accs,
            })
        })
        .collect()
}

/// Convenience wrapper returning only the mean accuracy of one task.
pub fn task_accuracy(cfg: &EpisodeConfig, pipe: &Pipeline, data: &FeatureDataset) -> Result<f64> {
    run_task(cfg, pipe, data).map(|r| r.accuracy.mean)
}
