//! Command-line front end. The binary only parses arguments and calls
//! [`run`].

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::device::Fluctuation;
use crate::harness::config::RunConfig;
use crate::harness::experiments::{
    current_quartiles, hash_correlation, sense_margin_monte_carlo, sweep_bits, tcam_linearity,
    unstable_bits, vector_pairs, CorrelationSpec,
};
use crate::harness::report::{self, Report};
use crate::hashing::HashMode;
use crate::mann::{run_task_logged, DistanceMode};
use crate::metrics::run_fluctuation_sweep;
use crate::tcam::{max_word_length, sense_margin_closed_form, SenseMarginParams};
use crate::units::MICRO;
use crate::{rng_from_seed, Result};

#[derive(Debug, Parser)]
#[command(
    name = "xbar-mann",
    version,
    about = "Memristor-crossbar few-shot memory simulator"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Lsh,
    Tlsh,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DistanceArg {
    Crossbar,
    Oracle,
    Cosine,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true, env = "XBAR_MANN_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, global = true, value_enum)]
    pub distance: Option<DistanceArg>,
    /// Hashing bits; a comma-separated list for the sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    pub bits: Vec<usize>,
    /// Constant read fluctuation σ in µS, replacing the fitted model.
    #[arg(long, global = true)]
    pub noise_level: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run N-way K-shot episodes and report accuracy, updates and cost.
    RunTask,
    /// Accuracy against constant fluctuation σ for LSH and TLSH.
    SweepFluctuation,
    /// Accuracy against the number of hashing bits.
    SweepBits,
    /// Correlation of Hamming and cosine distance, and unstable bits.
    HashCorrelation,
    /// Search current against mismatch count for 8-bit words.
    TcamLinearity,
    /// Closed-form and simulated sense margins.
    SenseMargin,
    /// Search energy per bit and latency breakdown.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::RunTask => "run-task",
            Command::SweepFluctuation => "sweep-fluctuation",
            Command::SweepBits => "sweep-bits",
            Command::HashCorrelation => "hash-correlation",
            Command::TcamLinearity => "tcam-linearity",
            Command::SenseMargin => "sense-margin",
            Command::Report => "report",
        }
    }
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    if let Some(m) = c.mode {
        cfg.hashing.mode = match m {
            ModeArg::Lsh => HashMode::Lsh,
            ModeArg::Tlsh => HashMode::Tlsh,
        };
    }
    if let Some(d) = c.distance {
        cfg.episode.distance = match d {
            DistanceArg::Crossbar => DistanceMode::Crossbar,
            DistanceArg::Oracle => DistanceMode::ExactOracle,
            DistanceArg::Cosine => DistanceMode::CosineBaseline,
        };
    }
    if let [b] = c.bits[..] {
        cfg.hashing.bits = b;
    }
    if let Some(n) = c.noise_level {
        cfg.device.fluctuation = Fluctuation::Constant { sigma: n * MICRO };
    }
    let cfg = cfg.resolved();
    cfg.validate()?;
    Ok(cfg)
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name)
}

fn wrap<'a, T: serde::Serialize>(cmd: &'a str, cfg: &'a RunConfig, result: T) -> Report<'a, T> {
    Report {
        command: cmd,
        seed: cfg.seed,
        config: cfg,
        result,
    }
}

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = resolve_config(&cli.common)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let cmd = cli.command.name();
    let bits_list = |default: &[usize]| {
        if cli.common.bits.is_empty() {
            default.to_vec()
        } else {
            cli.common.bits.clone()
        }
    };
    let mut written = Vec::new();
    let mut emit = |p: PathBuf| -> PathBuf {
        written.push(p.clone());
        p
    };

    match cli.command {
        Command::RunTask => {
            let data = cfg.data.load()?;
            let (rep, logs) = run_task_logged(&cfg.episode, &cfg.pipeline(), &data)?;
            report::write_json(emit(out(&cfg, "run_task.json")), &wrap(cmd, &cfg, &rep))?;
            report::write_jsonl(emit(out(&cfg, "episodes.jsonl")), &logs)?;
        }
        Command::SweepFluctuation => {
            let data = cfg.data.load()?;
            let rows = run_fluctuation_sweep(&cfg.sweep, &cfg.episode, &cfg.pipeline(), &data)?;
            for t in &cfg.sweep.tasks {
                let name = format!("sweep_{}way_{}shot.csv", t.n_way, t.k_shot);
                let part = report::sweep_table(
                    rows.iter()
                        .filter(|r| r.n_way == t.n_way && r.k_shot == t.k_shot),
                );
                report::write_csv(emit(out(&cfg, &name)), &part)?;
            }
            report::write_json(
                emit(out(&cfg, "sweep_fluctuation.json")),
                &wrap(cmd, &cfg, &rows),
            )?;
        }
        Command::SweepBits => {
            let data = cfg.data.load()?;
            let modes = match cli.common.mode {
                Some(_) => vec![cfg.hashing.mode],
                None => vec![HashMode::Lsh, HashMode::Tlsh],
            };
            let rows = sweep_bits(
                &bits_list(&[32, 64, 128, 256, 512]),
                &modes,
                &cfg.episode,
                &cfg.pipeline(),
                &data,
            )?;
            report::write_csv(
                emit(out(&cfg, "accuracy_vs_bits.csv")),
                &report::bits_table(&rows),
            )?;
            report::write_json(emit(out(&cfg, "sweep_bits.json")), &wrap(cmd, &cfg, &rows))?;
        }
        Command::HashCorrelation => {
            let spec = CorrelationSpec {
                seed: cfg.seed,
                ..Default::default()
            };
            let rows = hash_correlation(
                &bits_list(&[16, 32, 64, 128, 256, 512]),
                &spec,
                &cfg.hashing,
                &cfg.device,
            )?;
            let vectors: Vec<Vec<f64>> =
                vector_pairs(spec.pairs, spec.dim, &mut rng_from_seed(cfg.seed))
                    .into_iter()
                    .map(|p| p.0)
                    .collect();
            let unstable = unstable_bits(&vectors, 100, &cfg.hashing, &cfg.device, cfg.seed)?;
            report::write_csv(
                emit(out(&cfg, "hash_correlation.csv")),
                &report::correlation_table(&rows),
            )?;
            report::write_csv(emit(out(&cfg, "unstable_bits.csv")), &unstable)?;
            #[derive(serde::Serialize)]
            struct R<'a> {
                correlation: &'a [crate::harness::experiments::CorrelationRow],
                unstable_bits: &'a [crate::harness::experiments::UnstableBits],
            }
            let r = R {
                correlation: &rows,
                unstable_bits: &unstable,
            };
            report::write_json(
                emit(out(&cfg, "hash_correlation.json")),
                &wrap(cmd, &cfg, r),
            )?;
        }
        Command::TcamLinearity => {
            let r = tcam_linearity(8, 8, 100, &cfg.tcam, &cfg.device, cfg.seed)?;
            let q = current_quartiles(&r.samples);
            report::write_csv(
                emit(out(&cfg, "tcam_currents.csv")),
                &report::linearity_table(&r.samples),
            )?;
            report::write_csv(
                emit(out(&cfg, "tcam_quartiles.csv")),
                &report::quartile_table(&q),
            )?;
            #[derive(serde::Serialize)]
            struct R<'a> {
                slope_ua_per_bit: f64,
                intercept_ua: f64,
                quartiles: &'a [crate::harness::experiments::CurrentQuartiles],
            }
            let res = R {
                slope_ua_per_bit: r.slope / MICRO,
                intercept_ua: r.intercept / MICRO,
                quartiles: &q,
            };
            report::write_json(
                emit(out(&cfg, "tcam_linearity.json")),
                &wrap(cmd, &cfg, res),
            )?;
        }
        Command::SenseMargin => {
            // an ideal off state has no finite ratio; tabulate at r = 100
            let r = if cfg.tcam.g_off > 0.0 {
                cfg.tcam.g_on / cfg.tcam.g_off
            } else {
                100.0
            };
            let mut closed = Vec::new();
            for n in [8, 16, 32, 64, 128, 198, 256] {
                for (m, k) in [(0, 0), (1, 0), (2, 0), (1, n / 4), (2, n / 2)] {
                    if m + k <= n {
                        let p = SenseMarginParams { r, n, m, k };
                        closed.push((p, sense_margin_closed_form(&p)?));
                    }
                }
            }
            let checks = sense_margin_monte_carlo(100, 256, &cfg.tcam, cfg.seed)?;
            report::write_csv(
                emit(out(&cfg, "sense_margin.csv")),
                &report::margin_table(&checks),
            )?;
            #[derive(serde::Serialize)]
            struct R<'a> {
                r: f64,
                max_word_length_beta_0_5: usize,
                closed_form: Vec<(SenseMarginParams, f64)>,
                monte_carlo: &'a [crate::harness::experiments::MarginCheck],
            }
            let res = R {
                r,
                max_word_length_beta_0_5: max_word_length(r, 0.5)?,
                closed_form: closed,
                monte_carlo: &checks,
            };
            report::write_json(emit(out(&cfg, "sense_margin.json")), &wrap(cmd, &cfg, res))?;
        }
        Command::Report => {
            let data = cfg.data.load()?;
            let mut rows = Vec::new();
            let mut reports = Vec::new();
            for v in [cfg.tcam.v_search, cfg.tcam.v_search / 10.0] {
                let mut pipe = cfg.pipeline();
                pipe.tcam.v_search = v;
                let mut ep = cfg.episode;
                ep.distance = DistanceMode::Crossbar;
                let (rep, _) = run_task_logged(&ep, &pipe, &data)?;
                rows.push(report::search_energy_row(
                    v,
                    pipe.hashing.bits,
                    rep.searches,
                    rep.energy_per_search,
                    rep.energy_per_bit_per_search,
                ));
                reports.push(rep);
            }
            report::write_csv(emit(out(&cfg, "search_energy.csv")), &rows)?;
            #[derive(serde::Serialize)]
            struct R {
                cnn_latency: f64,
                search_latency_partitioned: f64,
                search_latency_single_array: f64,
                reports: Vec<crate::mann::EpisodeReport>,
            }
            let res = R {
                cnn_latency: cfg.cost.cnn_latency(),
                search_latency_partitioned: cfg.cost.search_latency(true, true),
                search_latency_single_array: cfg.cost.search_latency(false, false),
                reports,
            };
            report::write_json(emit(out(&cfg, "report.json")), &wrap(cmd, &cfg, res))?;
        }
    }
    Ok(written)
}

/// Writes the resolved configuration, useful for re-running a report.
pub fn write_resolved_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    std::fs::write(path, cfg.to_toml_string()?)?;
    Ok(())
}
