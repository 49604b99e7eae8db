//! Feature datasets: file ingestion and synthetic generation.
//!
//! Two interchange layouts are supported.
//!
//! CSV: one vector per line, `label,f1,f2,...,fD`, no header. Lines that are
//! empty or start with `#` are skipped.
//!
//! Binary (all little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic  b"XBFV"
//! 4       4     u32    dimension D
//! 8       4     u32    vector count N
//! 12      4     u32    reserved, must be 0
//! 16      4·D·N f32    vectors, row-major
//! ```
//!
//! Labels for the binary layout live in a sidecar text file next to it
//! (`<path>.labels`), one label per line, N lines.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::hashing::FeatureVector;
use crate::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"XBFV";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    Csv,
    Binary,
}

impl FeatureFormat {
    /// Guesses the format from the file extension (`.csv` is CSV, anything
    /// else binary).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Binary,
        }
    }
}

/// Labelled feature vectors of uniform dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    classes: BTreeMap<String, Vec<FeatureVector>>,
    dim: usize,
    pub provenance: String,
}

impl FeatureDataset {
    pub fn new(
        classes: BTreeMap<String, Vec<FeatureVector>>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let dim = classes
            .values()
            .flat_map(|v| v.first())
            .map(FeatureVector::dim)
            .next()
            .ok_or_else(|| Error::domain("dataset has no vectors"))?;
        for (label, vs) in &classes {
            if vs.is_empty() {
                return Err(Error::domain(format!("class `{label}` has no vectors")));
            }
            if let Some(bad) = vs.iter().find(|v| v.dim() != dim) {
                return Err(Error::Dimension {
                    what: "feature dimension within dataset",
                    expected: dim,
                    got: bad.dim(),
                });
            }
        }
        Ok(Self {
            classes,
            dim,
            provenance: provenance.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> impl Iterator<Item = (&str, &[FeatureVector])> {
        self.classes.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn class(&self, label: &str) -> Option<&[FeatureVector]> {
        self.classes.get(label).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.classes.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows in label order.
    fn rows(&self) -> impl Iterator<Item = (&str, &FeatureVector)> {
        self.classes
            .iter()
            .flat_map(|(k, vs)| vs.iter().map(move |v| (k.as_str(), v)))
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn push(
    classes: &mut BTreeMap<String, Vec<FeatureVector>>,
    dim: &mut Option<usize>,
    label: String,
    values: Vec<f64>,
    path: &Path,
    line: usize,
) -> Result<()> {
    let d = *dim.get_or_insert(values.len());
    if d != values.len() {
        return Err(parse_err(
            path,
            line,
            format!(
                "dimension {} differs from the first row's {d}",
                values.len()
            ),
        ));
    }
    let v = FeatureVector::new(values).map_err(|e| parse_err(path, line, e.to_string()))?;
    classes.entry(label).or_default().push(v);
    Ok(())
}

/// Loads a labelled dataset.
pub fn load_features(path: impl AsRef<Path>, format: FeatureFormat) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let classes = match format {
        FeatureFormat::Csv => read_csv(path)?,
        FeatureFormat::Binary => read_binary(path)?,
    };
    FeatureDataset::new(classes, path.display().to_string())
}

fn read_csv(path: &Path) -> Result<BTreeMap<String, Vec<FeatureVector>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut classes = BTreeMap::new();
    let mut dim = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split(',');
        let label = fields.next().unwrap_or_default().trim().to_string();
        if label.is_empty() {
            return Err(parse_err(path, lineno, "missing label"));
        }
        let values = fields
            .enumerate()
            .map(|(c, f)| {
                f.trim().parse::<f64>().map_err(|e| {
                    parse_err(
                        path,
                        lineno,
                        format!("column {}: {e}: `{}`", c + 2, f.trim()),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(parse_err(path, lineno, "row has a label but no features"));
        }
        push(&mut classes, &mut dim, label, values, path, lineno)?;
    }
    Ok(classes)
}

/// Sidecar label file of a binary feature file.
pub fn labels_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels");
    PathBuf::from(s)
}

fn read_binary(path: &Path) -> Result<BTreeMap<String, Vec<FeatureVector>>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..4] != BINARY_MAGIC {
        return Err(parse_err(path, 0, "missing XBFV header"));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (dim, count, reserved) = (word(4), word(8), word(12));
    if reserved != 0 || dim == 0 {
        return Err(parse_err(path, 0, "invalid header fields"));
    }
    let expected = 16 + 4 * dim * count;
    if bytes.len() != expected {
        return Err(parse_err(
            path,
            0,
            format!(
                "payload is {} bytes, header implies {expected}",
                bytes.len()
            ),
        ));
    }
    let lpath = labels_path(path);
    let labels: Vec<String> = BufReader::new(File::open(&lpath)?)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect();
    if labels.len() != count {
        return Err(parse_err(
            &lpath,
            labels.len(),
            format!("{} labels for {count} vectors", labels.len()),
        ));
    }
    let mut classes = BTreeMap::new();
    let mut d = Some(dim);
    for (n, label) in labels.into_iter().enumerate() {
        let base = 16 + 4 * dim * n;
        let values = (0..dim)
            .map(|k| {
                let o = base + 4 * k;
                f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64
            })
            .collect();
        push(&mut classes, &mut d, label, values, path, n + 1)?;
    }
    Ok(classes)
}

pub fn write_features_csv(ds: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (label, v) in ds.rows() {
        write!(w, "{label}")?;
        for x in v.values() {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the binary layout plus its `.labels` sidecar. Values are stored
/// as f32.
pub fn write_features_binary(ds: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(ds.dim as u32).to_le_bytes())?;
    w.write_all(&(ds.len() as u32).to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    let mut labels = BufWriter::new(File::create(labels_path(path))?);
    for (label, v) in ds.rows() {
        for &x in v.values() {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
        writeln!(labels, "{label}")?;
    }
    w.flush()?;
    labels.flush()?;
    Ok(())
}

/// Parameters of a synthetic class-clustered dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub dim: usize,
    /// Std of the isotropic Gaussian added to the unit prototype before
    /// renormalization.
    pub within_class_noise: f64,
    pub vectors_per_class: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_classes: 659,
            dim: 64,
            within_class_noise: 0.1,
            vectors_per_class: 20,
            seed: 0,
        }
    }
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v
    } else {
        v.into_iter().map(|x| x / n).collect()
    }
}

/// Class prototypes uniform on the unit sphere; each sample is
/// `normalize(prototype + noise · N(0, I))`.
pub fn synth<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<FeatureDataset> {
    if spec.n_classes < 2 || spec.dim == 0 || spec.vectors_per_class == 0 {
        return Err(Error::domain(
            "synthetic data needs >= 2 classes, D >= 1 and >= 1 vector per class",
        ));
    }
    if !(spec.within_class_noise >= 0.0) {
        return Err(Error::domain("within-class noise must be >= 0"));
    }
    let width = spec.n_classes.to_string().len();
    let mut classes = BTreeMap::new();
    for c in 0..spec.n_classes {
        let proto = unit((0..spec.dim).map(|_| rng.sample(StandardNormal)).collect());
        let vs = (0..spec.vectors_per_class)
            .map(|_| {
                let v = if spec.within_class_noise == 0.0 {
                    proto.clone()
                } else {
                    unit(
                        proto
                            .iter()
                            .map(|p| {
                                p + spec.within_class_noise * rng.sample::<f64, _>(StandardNormal)
                            })
                            .collect(),
                    )
                };
                FeatureVector::new(v)
            })
            .collect::<Result<Vec<_>>>()?;
        classes.insert(format!("c{c:0width$}"), vs);
    }
    FeatureDataset::new(
        classes,
        format!(
            "synthetic: {} classes, D={}, noise={}, {} per class, seed={}",
            spec.n_classes, spec.dim, spec.within_class_noise, spec.vectors_per_class, spec.seed
        ),
    )
}
