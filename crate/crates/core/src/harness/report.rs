//! Report writers: pretty JSON documents, JSON lines and flat CSV tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::harness::config::RunConfig;
use crate::harness::experiments::{
    BitsRow, CorrelationRow, CurrentQuartiles, LinearitySample, MarginCheck,
};
use crate::hashing::HashMode;
use crate::mann::DistanceMode;
use crate::metrics::SweepRow;
use crate::units::{FEMTO, MICRO};
use crate::Result;

/// A self-describing output document: the resolved configuration next to
/// the result.
#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub result: T,
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: impl AsRef<Path>,
    rows: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct CorrelationCsv {
    pub bits: usize,
    pub variant: String,
    pub mean_r: f64,
    pub ci95: f64,
    pub mean_r_normalized: f64,
    pub ci95_normalized: f64,
    pub repeats: usize,
}

pub fn correlation_table(rows: &[CorrelationRow]) -> Vec<CorrelationCsv> {
    rows.iter()
        .map(|r| CorrelationCsv {
            bits: r.bits,
            variant: serde_json::to_value(r.variant)
                .unwrap()
                .as_str()
                .unwrap_or_default()
                .to_string(),
            mean_r: r.pearson.mean,
            ci95: r.pearson.ci95,
            mean_r_normalized: r.pearson_normalized.mean,
            ci95_normalized: r.pearson_normalized.ci95,
            repeats: r.pearson.n,
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct LinearityCsv {
    pub mismatches: usize,
    pub current_ua: f64,
}

pub fn linearity_table(samples: &[LinearitySample]) -> Vec<LinearityCsv> {
    samples
        .iter()
        .map(|s| LinearityCsv {
            mismatches: s.mismatches,
            current_ua: s.current / MICRO,
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct QuartileCsv {
    pub mismatches: usize,
    pub n: usize,
    pub q1_ua: f64,
    pub median_ua: f64,
    pub q3_ua: f64,
}

pub fn quartile_table(q: &[CurrentQuartiles]) -> Vec<QuartileCsv> {
    q.iter()
        .map(|q| QuartileCsv {
            mismatches: q.mismatches,
            n: q.n,
            q1_ua: q.q1 / MICRO,
            median_ua: q.median / MICRO,
            q3_ua: q.q3 / MICRO,
        })
        .collect()
}

fn mode_name(m: HashMode) -> &'static str {
    match m {
        HashMode::Lsh => "lsh",
        HashMode::Tlsh => "tlsh",
    }
}

fn distance_name(d: DistanceMode) -> &'static str {
    match d {
        DistanceMode::Crossbar => "crossbar",
        DistanceMode::ExactOracle => "exact_oracle",
        DistanceMode::CosineBaseline => "cosine_baseline",
    }
}

#[derive(Debug, Serialize)]
pub struct SweepCsv {
    pub sigma_us: f64,
    pub mode: &'static str,
    pub n_way: usize,
    pub k_shot: usize,
    pub accuracy: f64,
    pub ci95: f64,
    pub i_th_ua: f64,
    pub repeats: usize,
}

pub fn sweep_table<'a>(rows: impl IntoIterator<Item = &'a SweepRow>) -> Vec<SweepCsv> {
    rows.into_iter()
        .map(|r| SweepCsv {
            sigma_us: r.level / MICRO,
            mode: mode_name(r.mode),
            n_way: r.n_way,
            k_shot: r.k_shot,
            accuracy: r.mean,
            ci95: r.ci95,
            i_th_ua: r.i_th / MICRO,
            repeats: r.episode_accuracies.len(),
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct BitsCsv {
    pub bits: usize,
    pub mode: &'static str,
    pub distance: &'static str,
    pub accuracy: f64,
    pub ci95: f64,
    pub repeats: usize,
}

pub fn bits_table(rows: &[BitsRow]) -> Vec<BitsCsv> {
    rows.iter()
        .map(|r| BitsCsv {
            bits: r.bits,
            mode: mode_name(r.mode),
            distance: distance_name(r.distance),
            accuracy: r.accuracy.mean,
            ci95: r.accuracy.ci95,
            repeats: r.accuracy.n,
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct MarginCsv {
    pub r: f64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub closed_form: f64,
    pub measured: f64,
}

pub fn margin_table(rows: &[MarginCheck]) -> Vec<MarginCsv> {
    rows.iter()
        .map(|c| MarginCsv {
            r: c.params.r,
            n: c.params.n,
            m: c.params.m,
            k: c.params.k,
            closed_form: c.closed_form,
            measured: c.measured,
        })
        .collect()
}

/// One row of the per-bit search energy table.
#[derive(Debug, Serialize)]
pub struct SearchEnergyCsv {
    pub v_search: f64,
    pub bits: usize,
    pub searches: usize,
    pub energy_per_search_fj: f64,
    pub energy_per_bit_per_search_fj: f64,
}

pub fn search_energy_row(
    v_search: f64,
    bits: usize,
    searches: usize,
    energy_per_search: f64,
    energy_per_bit_per_search: f64,
) -> SearchEnergyCsv {
    SearchEnergyCsv {
        v_search,
        bits,
        searches,
        energy_per_search_fj: energy_per_search / FEMTO,
        energy_per_bit_per_search_fj: energy_per_bit_per_search / FEMTO,
    }
}
