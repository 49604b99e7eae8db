//! Crossbar arrays: programmed conductance tiles, vector-matrix
//! multiplication with per-read fluctuation, tiling and column readout
//! transforms.

use std::io::{Read, Write};

use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceNoiseSample, DeviceParams, Fluctuation};
use crate::units::MICRO;
use crate::{Error, Result};

/// Physical array bound of the fabricated chip.
pub const DEFAULT_ARRAY_DIM: usize = 64;

/// Tolerance on the row-voltage bound check.
const V_EPS: f64 = 1e-12;

/// First-order wire-resistance model: every output current of a tile is
/// scaled by `alpha = max(0, 1 - per_line * (rows + cols))`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireLoss {
    #[default]
    None,
    Linear {
        per_line: f64,
    },
}

impl WireLoss {
    pub fn attenuation(&self, rows: usize, cols: usize) -> f64 {
        match *self {
            WireLoss::None => 1.0,
            WireLoss::Linear { per_line } => (1.0 - per_line * (rows + cols) as f64).max(0.0),
        }
    }
}

/// Output of one VMM: column currents and the energy drawn from the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct VmmOutput {
    pub currents: Vec<f64>,
    pub energy: f64,
}

/// A programmed crossbar array.
///
/// The fitted read σ of every device is frozen when the tile is built, the
/// same way the physical device's variation is fixed at fabrication.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceTile {
    devices: Array2<DeviceNoiseSample>,
    fitted_sigma: Array2<f64>,
    max_rows: usize,
    max_cols: usize,
    pub wire_loss: WireLoss,
}

impl ConductanceTile {
    /// Builds a tile bounded by the default 64×64 array size.
    pub fn new(devices: Array2<DeviceNoiseSample>, params: &DeviceParams) -> Result<Self> {
        Self::with_bounds(devices, params, DEFAULT_ARRAY_DIM, DEFAULT_ARRAY_DIM)
    }

    pub fn with_bounds(
        devices: Array2<DeviceNoiseSample>,
        params: &DeviceParams,
        max_rows: usize,
        max_cols: usize,
    ) -> Result<Self> {
        let (rows, cols) = devices.dim();
        if rows > max_rows || cols > max_cols {
            return Err(Error::domain(format!(
                "tile {rows}x{cols} exceeds physical bound {max_rows}x{max_cols}"
            )));
        }
        if devices
            .iter()
            .any(|d| !(0.0..=params.g_max).contains(&d.g0))
        {
            return Err(Error::domain("device conductance outside [0, g_max]"));
        }
        let fitted_sigma = devices.mapv(|d| params.fitted_sigma(d.g0, d.per_device_log_sigma));
        Ok(Self {
            devices,
            fitted_sigma,
            max_rows,
            max_cols,
            wire_loss: WireLoss::None,
        })
    }

    /// A tile of nominal devices (no device-to-device offset) at the given
    /// conductances.
    pub fn from_conductances(g: &Array2<f64>, params: &DeviceParams) -> Result<Self> {
        let (r, c) = g.dim();
        Self::with_bounds(
            g.mapv(DeviceNoiseSample::nominal),
            params,
            r.max(1),
            c.max(1),
        )
    }

    pub fn rows(&self) -> usize {
        self.devices.nrows()
    }

    pub fn cols(&self) -> usize {
        self.devices.ncols()
    }

    pub fn max_rows(&self) -> usize {
        self.max_rows
    }

    pub fn max_cols(&self) -> usize {
        self.max_cols
    }

    pub fn devices(&self) -> &Array2<DeviceNoiseSample> {
        &self.devices
    }

    /// Programmed conductances `g0`.
    pub fn conductances(&self) -> Array2<f64> {
        self.devices.mapv(|d| d.g0)
    }

    /// Read σ of every device under `params`' fluctuation mode.
    pub fn read_sigmas(&self, params: &DeviceParams) -> Array2<f64> {
        match params.fluctuation {
            Fluctuation::Fitted => self.fitted_sigma.clone(),
            _ => self.devices.mapv(|d| d.sigma(params)),
        }
    }

    /// Replaces one device. Requires exclusive access, like reprogramming
    /// on hardware.
    pub fn set_device(
        &mut self,
        row: usize,
        col: usize,
        dev: DeviceNoiseSample,
        params: &DeviceParams,
    ) {
        self.fitted_sigma[[row, col]] = params.fitted_sigma(dev.g0, dev.per_device_log_sigma);
        self.devices[[row, col]] = dev;
    }

    #[inline]
    fn sigma_at(&self, row: usize, col: usize, params: &DeviceParams) -> f64 {
        match params.fluctuation {
            Fluctuation::Fitted => self.fitted_sigma[[row, col]],
            _ => self.devices[[row, col]].sigma(params),
        }
    }

    /// Draws one fluctuated read of every device: the conductance matrix
    /// seen by a single VMM.
    pub fn read_matrix<R: Rng + ?Sized>(&self, params: &DeviceParams, rng: &mut R) -> Array2<f64> {
        let mut out = Array2::zeros(self.devices.dim());
        for ((i, j), g) in out.indexed_iter_mut() {
            *g = self.read_one(i, j, params, rng);
        }
        out
    }

    #[inline]
    fn read_one<R: Rng + ?Sized>(
        &self,
        i: usize,
        j: usize,
        params: &DeviceParams,
        rng: &mut R,
    ) -> f64 {
        let g0 = self.devices[[i, j]].g0;
        let sigma = self.sigma_at(i, j, params);
        if sigma == 0.0 {
            g0
        } else {
            let z: f64 = rng.sample(StandardNormal);
            params.clamp(g0 + sigma * z)
        }
    }
}

fn check_voltages(v: &[f64], rows: usize, params: &DeviceParams) -> Result<()> {
    if v.len() != rows {
        return Err(Error::Dimension {
            what: "voltage vector length vs crossbar rows",
            expected: rows,
            got: v.len(),
        });
    }
    if let Some(bad) = v.iter().find(|x| !(x.abs() <= params.v_read + V_EPS)) {
        return Err(Error::domain(format!(
            "row voltage {bad} V exceeds read voltage {} V",
            params.v_read
        )));
    }
    Ok(())
}

/// Applies row voltages `v` to a tile and senses the column currents.
///
/// Each device is read once for this VMM; rows driven at 0 V draw no
/// fluctuation sample since they contribute no current.
pub fn vmm<R: Rng + ?Sized>(
    tile: &ConductanceTile,
    v: &[f64],
    params: &DeviceParams,
    rng: &mut R,
) -> Result<VmmOutput> {
    check_voltages(v, tile.rows(), params)?;
    let cols = tile.cols();
    let mut currents = vec![0.0; cols];
    let mut energy = 0.0;
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        let mut row_g = 0.0;
        for (j, cur) in currents.iter_mut().enumerate() {
            let g = tile.read_one(i, j, params, rng);
            *cur += vi * g;
            row_g += g;
        }
        energy += vi * vi * row_g * params.t_pulse;
    }
    let alpha = tile.wire_loss.attenuation(tile.max_rows, tile.max_cols);
    if alpha != 1.0 {
        currents.iter_mut().for_each(|c| *c *= alpha);
    }
    Ok(VmmOutput { currents, energy })
}

/// VMM against an already-drawn read matrix. Linear in `v`.
pub fn vmm_frozen(read: &Array2<f64>, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != read.nrows() {
        return Err(Error::Dimension {
            what: "voltage vector length vs crossbar rows",
            expected: read.nrows(),
            got: v.len(),
        });
    }
    let mut out = vec![0.0; read.ncols()];
    for (row, &vi) in read.rows().into_iter().zip(v) {
        for (o, g) in out.iter_mut().zip(row.iter()) {
            *o += vi * g;
        }
    }
    Ok(out)
}

/// Adjacent-column method: `out[k] = currents[k] - currents[k + 1]`.
pub fn adjacent_column_diff(currents: &[f64]) -> Result<Vec<f64>> {
    if currents.len() < 2 {
        return Err(Error::domain(
            "adjacent column difference needs at least 2 columns",
        ));
    }
    Ok(currents.windows(2).map(|w| w[0] - w[1]).collect())
}

/// A logical conductance matrix split over a grid of physical tiles.
/// Edge tiles are padded with zero-conductance devices.
#[derive(Debug, Clone, PartialEq)]
pub struct TiledMatrix {
    logical_rows: usize,
    logical_cols: usize,
    tile_h: usize,
    tile_w: usize,
    grid_cols: usize,
    tiles: Vec<ConductanceTile>,
}

/// Splits a device matrix into `tile_h × tile_w` tiles.
pub fn partition(
    devices: &Array2<DeviceNoiseSample>,
    tile_h: usize,
    tile_w: usize,
    params: &DeviceParams,
) -> Result<TiledMatrix> {
    if tile_h == 0 || tile_w == 0 {
        return Err(Error::domain("tile dimensions must be >= 1"));
    }
    let (rows, cols) = devices.dim();
    let grid_rows = rows.div_ceil(tile_h).max(1);
    let grid_cols = cols.div_ceil(tile_w).max(1);
    let mut tiles = Vec::with_capacity(grid_rows * grid_cols);
    for tr in 0..grid_rows {
        for tc in 0..grid_cols {
            let r0 = tr * tile_h;
            let c0 = tc * tile_w;
            let r1 = (r0 + tile_h).min(rows);
            let c1 = (c0 + tile_w).min(cols);
            let mut block = Array2::from_elem((tile_h, tile_w), DeviceNoiseSample::default());
            block
                .slice_mut(s![..r1 - r0, ..c1 - c0])
                .assign(&devices.slice(s![r0..r1, c0..c1]));
            tiles.push(ConductanceTile::with_bounds(block, params, tile_h, tile_w)?);
        }
    }
    Ok(TiledMatrix {
        logical_rows: rows,
        logical_cols: cols,
        tile_h,
        tile_w,
        grid_cols,
        tiles,
    })
}

impl TiledMatrix {
    pub fn logical_rows(&self) -> usize {
        self.logical_rows
    }

    pub fn logical_cols(&self) -> usize {
        self.logical_cols
    }

    pub fn tile_dims(&self) -> (usize, usize) {
        (self.tile_h, self.tile_w)
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        (self.tiles.len() / self.grid_cols, self.grid_cols)
    }

    pub fn tiles(&self) -> &[ConductanceTile] {
        &self.tiles
    }

    /// Whether results must be aggregated across more than one array.
    pub fn is_partitioned(&self) -> bool {
        self.tiles.len() > 1
    }

    pub fn set_wire_loss(&mut self, loss: WireLoss) {
        self.tiles.iter_mut().for_each(|t| t.wire_loss = loss);
    }

    /// Reassembles the logical device matrix, dropping padding.
    pub fn reassemble(&self) -> Array2<DeviceNoiseSample> {
        let mut out = Array2::default((self.logical_rows, self.logical_cols));
        let (grid_rows, grid_cols) = self.grid_dims();
        for tr in 0..grid_rows {
            for tc in 0..grid_cols {
                let tile = &self.tiles[tr * grid_cols + tc];
                let r0 = tr * self.tile_h;
                let c0 = tc * self.tile_w;
                let r1 = (r0 + self.tile_h).min(self.logical_rows);
                let c1 = (c0 + self.tile_w).min(self.logical_cols);
                out.slice_mut(s![r0..r1, c0..c1])
                    .assign(&tile.devices.slice(s![..r1 - r0, ..c1 - c0]));
            }
        }
        out
    }

    pub fn conductances(&self) -> Array2<f64> {
        self.reassemble().mapv(|d| d.g0)
    }

    /// Mean read σ over the logical (unpadded) devices.
    pub fn mean_read_sigma(&self, params: &DeviceParams) -> f64 {
        let devs = self.reassemble();
        let n = devs.len() as f64;
        devs.iter().map(|d| d.sigma(params)).sum::<f64>() / n
    }
}

/// VMM over a tiled matrix: per-tile currents are summed across tile rows
/// for every logical column.
pub fn tiled_vmm<R: Rng + ?Sized>(
    tm: &TiledMatrix,
    v: &[f64],
    params: &DeviceParams,
    rng: &mut R,
) -> Result<VmmOutput> {
    if v.len() != tm.logical_rows {
        return Err(Error::Dimension {
            what: "voltage vector length vs logical rows",
            expected: tm.logical_rows,
            got: v.len(),
        });
    }
    let (grid_rows, grid_cols) = tm.grid_dims();
    let mut currents = vec![0.0; tm.logical_cols];
    let mut energy = 0.0;
    let mut vt = vec![0.0; tm.tile_h];
    for tr in 0..grid_rows {
        let r0 = tr * tm.tile_h;
        let r1 = (r0 + tm.tile_h).min(tm.logical_rows);
        vt.iter_mut().for_each(|x| *x = 0.0);
        vt[..r1 - r0].copy_from_slice(&v[r0..r1]);
        if vt.iter().all(|&x| x == 0.0) {
            continue;
        }
        for tc in 0..grid_cols {
            let out = vmm(&tm.tiles[tr * grid_cols + tc], &vt, params, rng)?;
            energy += out.energy;
            let c0 = tc * tm.tile_w;
            let c1 = (c0 + tm.tile_w).min(tm.logical_cols);
            for (dst, src) in currents[c0..c1].iter_mut().zip(&out.currents) {
                *dst += src;
            }
        }
    }
    Ok(VmmOutput { currents, energy })
}

/// Differential weight mapping. Weight `w[i][j]` becomes the column pair
/// `(2j, 2j+1)` holding `(w·ratio, 0)` for positive and `(0, |w|·ratio)`
/// for negative weights. Rows are inputs.
pub fn map_weights_differential(
    w: &Array2<f64>,
    ratio: f64,
    params: &DeviceParams,
) -> Result<Array2<f64>> {
    let (rows, cols) = w.dim();
    let overflow: Vec<(usize, usize)> = w
        .indexed_iter()
        .filter(|(_, x)| !(x.abs() * ratio <= params.g_max))
        .map(|(ix, _)| ix)
        .collect();
    if !overflow.is_empty() {
        return Err(Error::Overflow { entries: overflow });
    }
    let mut g = Array2::zeros((rows, 2 * cols));
    for ((i, j), &x) in w.indexed_iter() {
        if x > 0.0 {
            g[[i, 2 * j]] = x * ratio;
        } else if x < 0.0 {
            g[[i, 2 * j + 1]] = -x * ratio;
        }
    }
    Ok(g)
}

/// Inverse readout of [`map_weights_differential`]: pairwise column
/// differences divided by the mapping ratio.
pub fn decode_differential(currents: &[f64], ratio: f64) -> Result<Vec<f64>> {
    if !currents.len().is_multiple_of(2) {
        return Err(Error::domain(
            "differential readout needs an even column count",
        ));
    }
    Ok(adjacent_column_diff(currents)?
        .into_iter()
        .step_by(2)
        .map(|d| d / ratio)
        .collect())
}

/// Writes a conductance map as headerless row-major CSV in µS.
pub fn write_conductance_csv<W: Write>(g: &Array2<f64>, out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for row in g.rows() {
        wtr.write_record(row.iter().map(|x| format!("{}", x / MICRO)))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a conductance map written by [`write_conductance_csv`].
pub fn read_conductance_csv<R: Read>(input: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Parse {
                path: "<conductance csv>".into(),
                line: line + 1,
                msg: format!("expected {} columns, found {}", cols.unwrap(), rec.len()),
            });
        }
        for field in rec.iter() {
            let x: f64 = field.trim().parse().map_err(|e| Error::Parse {
                path: "<conductance csv>".into(),
                line: line + 1,
                msg: format!("{e}: `{field}`"),
            })?;
            data.push(x * MICRO);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), data)
        .map_err(|e| Error::domain(e.to_string()))
}
