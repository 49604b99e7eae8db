//! Memristor device model.
//!
//! A programmed device is described by its post-programming conductance
//! `g0` and a frozen device-to-device variation draw. Every read returns
//!
//! ```text
//! G = g0 + exp(a·ln(g0 / 1 µS) + b + d2d) · 1 µS · N(0, 1)
//! ```
//!
//! clamped to `[0, g_max]`, where `d2d = s · N(0, 1)` is drawn once per
//! physical device. Programming is a single Gaussian draw around the target
//! with the write-and-verify tolerance as its standard deviation.
//!
//! Iterative write-and-verify ramps used on the chip (not simulated; the
//! verified end state is what the Gaussian draw represents):
//!
//! | pulse        | start | stop | step  |
//! |--------------|-------|------|-------|
//! | SET          | 1.0 V | 2.5 V| 0.1 V |
//! | RESET        | 0.5 V | 3.5 V| 0.05 V|
//! | SET gate     | 1.0 V | 2.0 V| 0.1 V |
//! | RESET gate   | 5.0 V | 5.5 V| 0.1 V |

use std::path::Path;

use ndarray::Array2;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::units::MICRO;
use crate::{Error, Result};

/// Devices below this conductance are treated as fluctuation-free.
pub const SIGMA_FLOOR_G: f64 = 0.01 * MICRO;

/// How read fluctuation is generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Fluctuation {
    /// Conductance-dependent σ from the log-log fit with frozen
    /// device-to-device spread.
    #[default]
    Fitted,
    /// Every device above [`SIGMA_FLOOR_G`] fluctuates with the same σ
    /// (siemens). Used by the fluctuation sweeps.
    Constant { sigma: f64 },
    /// Reads return `g0` exactly.
    Off,
}

/// Physical constants and fitted noise parameters of the memristor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceParams {
    /// Slope of ln σ against ln g0 (g0 in µS).
    pub fit_a: f64,
    /// Intercept of ln σ against ln g0 (σ in µS).
    pub fit_b: f64,
    /// Log-space device-to-device spread of σ.
    pub d2d_sigma: f64,
    /// Write-and-verify tolerance (siemens), used as the program-error std.
    pub program_tolerance: f64,
    pub g_on: f64,
    pub g_off: f64,
    /// Device ceiling (siemens).
    pub g_max: f64,
    /// Read voltage, also the largest admissible row voltage.
    pub v_read: f64,
    /// Input pulse width used for energy accounting.
    pub t_pulse: f64,
    /// Lowest conductance the RESET process reaches (17 nS at 0.2 V read).
    /// RESET draws never go below it.
    pub reset_state_g: f64,
    /// Median of the post-RESET lognormal conductance distribution.
    pub reset_median_g: f64,
    /// Log-space standard deviation of the post-RESET distribution.
    pub reset_log_sigma: f64,
    pub fluctuation: Fluctuation,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            fit_a: 0.782,
            fit_b: -2.168,
            d2d_sigma: 0.983,
            program_tolerance: 5.0 * MICRO,
            g_on: 150.0 * MICRO,
            g_off: 0.0,
            g_max: 300.0 * MICRO,
            v_read: 0.2,
            t_pulse: 10e-9,
            reset_state_g: 17e-9,
            reset_median_g: 10.0 * MICRO,
            reset_log_sigma: 1.0,
            fluctuation: Fluctuation::Fitted,
        }
    }
}

impl DeviceParams {
    /// Parameters with programming error and read fluctuation disabled.
    pub fn noise_free() -> Self {
        Self::default().without_noise()
    }

    pub fn without_noise(mut self) -> Self {
        self.program_tolerance = 0.0;
        self.fluctuation = Fluctuation::Off;
        self
    }

    pub fn with_fluctuation(mut self, fluctuation: Fluctuation) -> Self {
        self.fluctuation = fluctuation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.fit_a,
            self.fit_b,
            self.d2d_sigma,
            self.program_tolerance,
            self.g_on,
            self.g_off,
            self.g_max,
            self.v_read,
            self.t_pulse,
            self.reset_state_g,
            self.reset_median_g,
            self.reset_log_sigma,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("device parameters must be finite"));
        }
        if self.program_tolerance < 0.0 {
            return Err(Error::domain("program_tolerance must be >= 0"));
        }
        if self.v_read <= 0.0 || self.t_pulse <= 0.0 {
            return Err(Error::domain("v_read and t_pulse must be > 0"));
        }
        if self.g_off < 0.0 || self.g_on <= self.g_off {
            return Err(Error::domain("require g_on > g_off >= 0"));
        }
        if self.g_on > self.g_max {
            return Err(Error::domain("g_on exceeds g_max"));
        }
        if self.reset_state_g < 0.0 || self.reset_median_g <= 0.0 || self.reset_log_sigma < 0.0 {
            return Err(Error::domain("invalid RESET distribution parameters"));
        }
        if let Fluctuation::Constant { sigma } = self.fluctuation {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::domain("constant fluctuation sigma must be >= 0"));
            }
        }
        Ok(())
    }

    /// Parses parameters from a TOML document. Missing keys take defaults,
    /// unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
            path: String::new(),
            msg: e.to_string(),
        })?;
        let params: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Fitted fluctuation std for conductance `g0` and a frozen
    /// device-to-device draw, ignoring the configured [`Fluctuation`] mode.
    pub fn fitted_sigma(&self, g0: f64, per_device_log_sigma: f64) -> f64 {
        if g0 < SIGMA_FLOOR_G {
            return 0.0;
        }
        let g_us = g0 / MICRO;
        (self.fit_a * g_us.ln() + self.fit_b + per_device_log_sigma).exp() * MICRO
    }

    /// Read-fluctuation std for a device under the configured mode.
    pub fn read_sigma(&self, g0: f64, per_device_log_sigma: f64) -> f64 {
        match self.fluctuation {
            Fluctuation::Fitted => self.fitted_sigma(g0, per_device_log_sigma),
            Fluctuation::Constant { sigma } if g0 >= SIGMA_FLOOR_G => sigma,
            Fluctuation::Constant { .. } | Fluctuation::Off => 0.0,
        }
    }

    #[inline]
    pub(crate) fn clamp(&self, g: f64) -> f64 {
        g.clamp(0.0, self.g_max)
    }
}

/// A programmed device: conductance after programming plus its frozen
/// device-to-device variation draw.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviceNoiseSample {
    pub g0: f64,
    pub per_device_log_sigma: f64,
}

impl DeviceNoiseSample {
    /// A device at `g0` with median fluctuation (no device-to-device offset).
    pub fn nominal(g0: f64) -> Self {
        Self {
            g0,
            per_device_log_sigma: 0.0,
        }
    }

    pub fn sigma(&self, params: &DeviceParams) -> f64 {
        params.read_sigma(self.g0, self.per_device_log_sigma)
    }
}

/// Post-programming drift applied to `g0`. No default model is provided.
pub trait RelaxationHook {
    fn relax(&self, g0: f64, rng: &mut dyn RngCore) -> f64;
}

impl<F> RelaxationHook for F
where
    F: Fn(f64, &mut dyn RngCore) -> f64,
{
    fn relax(&self, g0: f64, rng: &mut dyn RngCore) -> f64 {
        self(g0, rng)
    }
}

fn check_target(g_target: f64, params: &DeviceParams) -> Result<()> {
    if !(0.0..=params.g_max).contains(&g_target) {
        return Err(Error::domain(format!(
            "target conductance {g_target:e} S outside [0, {:e}] S",
            params.g_max
        )));
    }
    Ok(())
}

#[inline]
fn program_error<R: Rng + ?Sized>(g_target: f64, params: &DeviceParams, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    params.clamp(g_target + params.program_tolerance * z)
}

/// Programs a fresh device to `g_target` and freezes its variation draw.
pub fn program_target<R: Rng + ?Sized>(
    g_target: f64,
    params: &DeviceParams,
    rng: &mut R,
) -> Result<DeviceNoiseSample> {
    check_target(g_target, params)?;
    let g0 = program_error(g_target, params, rng);
    let d2d: f64 = rng.sample(StandardNormal);
    Ok(DeviceNoiseSample {
        g0,
        per_device_log_sigma: params.d2d_sigma * d2d,
    })
}

/// As [`program_target`], followed by a relaxation hook on `g0`.
pub fn program_target_relaxed<R: RngCore>(
    g_target: f64,
    params: &DeviceParams,
    hook: &dyn RelaxationHook,
    rng: &mut R,
) -> Result<DeviceNoiseSample> {
    let mut dev = program_target(g_target, params, rng)?;
    dev.g0 = params.clamp(hook.relax(dev.g0, rng));
    Ok(dev)
}

/// Reprograms an existing device. The physical device keeps its
/// variation draw; only `g0` changes.
pub fn reprogram<R: Rng + ?Sized>(
    dev: &mut DeviceNoiseSample,
    g_target: f64,
    params: &DeviceParams,
    rng: &mut R,
) -> Result<()> {
    check_target(g_target, params)?;
    dev.g0 = program_error(g_target, params, rng);
    Ok(())
}

/// One fluctuated read of a device.
pub fn read_fluctuated<R: Rng + ?Sized>(
    dev: &DeviceNoiseSample,
    params: &DeviceParams,
    rng: &mut R,
) -> f64 {
    let sigma = dev.sigma(params);
    if sigma == 0.0 {
        return params.clamp(dev.g0);
    }
    let z: f64 = rng.sample(StandardNormal);
    params.clamp(dev.g0 + sigma * z)
}

/// Post-RESET conductances of a `rows × cols` array: independent lognormal
/// draws with median `reset_median_g`, floored at `reset_state_g`.
pub fn sample_reset_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    params: &DeviceParams,
    rng: &mut R,
) -> Result<Array2<DeviceNoiseSample>> {
    if rows == 0 || cols == 0 {
        return Err(Error::domain(
            "reset matrix needs at least one row and column",
        ));
    }
    let dist = LogNormal::new(params.reset_median_g.ln(), params.reset_log_sigma)
        .map_err(|e| Error::domain(e.to_string()))?;
    let mut out = Array2::default((rows, cols));
    for dev in out.iter_mut() {
        let g: f64 = dist.sample(rng);
        let d2d: f64 = rng.sample(StandardNormal);
        *dev = DeviceNoiseSample {
            g0: g.clamp(params.reset_state_g, params.g_max),
            per_device_log_sigma: params.d2d_sigma * d2d,
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use crate::units::us;

    #[test]
    fn defaults_match_fitted_table() {
        let p = DeviceParams::default();
        assert_eq!(p.fit_a, 0.782);
        assert_eq!(p.fit_b, -2.168);
        assert_eq!(p.d2d_sigma, 0.983);
        assert!((p.program_tolerance - us(5.0)).abs() < 1e-18);
        assert!((p.g_on - us(150.0)).abs() < 1e-18);
        p.validate().unwrap();
    }

    #[test]
    fn program_zero_without_tolerance_is_exact() {
        let p = DeviceParams::noise_free();
        let mut rng = rng_from_seed(1);
        let d = program_target(0.0, &p, &mut rng).unwrap();
        assert_eq!(d.g0, 0.0);
    }

    #[test]
    fn program_rejects_out_of_range() {
        let p = DeviceParams::default();
        let mut rng = rng_from_seed(1);
        assert!(program_target(-1e-9, &p, &mut rng).is_err());
        assert!(program_target(p.g_max * 1.01, &p, &mut rng).is_err());
        assert!(program_target(p.g_max, &p, &mut rng).is_ok());
    }

    #[test]
    fn program_error_statistics() {
        let p = DeviceParams::default();
        let mut rng = rng_from_seed(7);
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| program_target(us(100.0), &p, &mut rng).unwrap().g0)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - us(100.0)).abs() < us(0.5), "mean {mean}");
        assert!(
            (var.sqrt() / us(5.0) - 1.0).abs() < 0.10,
            "std {}",
            var.sqrt()
        );
    }

    #[test]
    fn program_at_gon_stays_in_band() {
        let p = DeviceParams::default();
        let mut rng = rng_from_seed(3);
        for _ in 0..1000 {
            let d = program_target(p.g_on, &p, &mut rng).unwrap();
            assert!(d.g0 >= 0.0 && d.g0 <= p.g_max);
        }
    }

    #[test]
    fn zero_conductance_never_fluctuates() {
        let p = DeviceParams::default();
        let mut rng = rng_from_seed(11);
        let dev = DeviceNoiseSample {
            g0: 0.0,
            per_device_log_sigma: 2.0,
        };
        for _ in 0..100 {
            assert_eq!(read_fluctuated(&dev, &p, &mut rng), 0.0);
        }
    }

    #[test]
    fn read_std_matches_closed_form_at_20us() {
        let p = DeviceParams::default();
        let dev = DeviceNoiseSample::nominal(us(20.0));
        let expected = (0.782 * 20f64.ln() - 2.168).exp() * MICRO;
        let mut rng = rng_from_seed(5);
        let n = 100_000;
        let reads: Vec<f64> = (0..n)
            .map(|_| read_fluctuated(&dev, &p, &mut rng))
            .collect();
        let mean = reads.iter().sum::<f64>() / n as f64;
        let sd = (reads.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd / expected - 1.0).abs() < 0.03, "sd {sd} vs {expected}");
    }

    #[test]
    fn sigma_strictly_increasing_in_g0() {
        let p = DeviceParams::default();
        let mut prev = 0.0;
        for k in 1..200 {
            let s = p.fitted_sigma(us(0.05 * k as f64), 0.3);
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn median_sigma_increases_over_states() {
        // 4096 devices at each of 16 states between 5 and 50 µS.
        let p = DeviceParams::default();
        let mut rng = rng_from_seed(9);
        let mut prev = 0.0;
        for k in 0..16 {
            let g = us(5.0 + 3.0 * k as f64);
            let mut sig: Vec<f64> = (0..4096)
                .map(|_| {
                    let d2d: f64 = rng.sample(StandardNormal);
                    p.fitted_sigma(g, p.d2d_sigma * d2d)
                })
                .collect();
            sig.sort_by(f64::total_cmp);
            let median = 0.5 * (sig[2047] + sig[2048]);
            assert!(median > prev);
            prev = median;
        }
    }

    #[test]
    fn clamped_read_fraction_is_small_above_5us() {
        let p = DeviceParams::default();
        let mut rng = rng_from_seed(13);
        let mut clamped = 0usize;
        let mut total = 0usize;
        for g_us in [5.0, 10.0, 20.0, 50.0, 150.0] {
            for _ in 0..2000 {
                let d2d: f64 = rng.sample(StandardNormal);
                let dev = DeviceNoiseSample {
                    g0: us(g_us),
                    per_device_log_sigma: p.d2d_sigma * d2d,
                };
                for _ in 0..10 {
                    let sigma = dev.sigma(&p);
                    let z: f64 = rng.sample(StandardNormal);
                    let raw = dev.g0 + sigma * z;
                    if raw < 0.0 || raw > p.g_max {
                        clamped += 1;
                    }
                    total += 1;
                }
            }
        }
        assert!((clamped as f64 / total as f64) < 0.01, "{clamped}/{total}");
    }

    #[test]
    fn reset_matrix_is_deterministic_and_nonnegative() {
        let p = DeviceParams::default();
        let a = sample_reset_matrix(64, 129, &p, &mut rng_from_seed(42)).unwrap();
        let b = sample_reset_matrix(64, 129, &p, &mut rng_from_seed(42)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|d| d.g0 >= p.reset_state_g && d.g0 <= p.g_max));
    }

    #[test]
    fn reset_matrix_is_right_skewed_near_zero() {
        let p = DeviceParams::default();
        let m = sample_reset_matrix(64, 129, &p, &mut rng_from_seed(1)).unwrap();
        let mut g: Vec<f64> = m.iter().map(|d| d.g0).collect();
        g.sort_by(f64::total_cmp);
        let median = g[g.len() / 2];
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        let p99 = g[g.len() * 99 / 100];
        assert!((median / p.reset_median_g - 1.0).abs() < 0.1);
        assert!(
            mean > median,
            "heavy right tail pushes the mean above the median"
        );
        assert!(p99 > 5.0 * median);
        assert!(median < 0.1 * p.g_on);
    }

    #[test]
    fn adjacent_reset_differences_are_zero_mean() {
        let p = DeviceParams::default();
        let m = sample_reset_matrix(64, 129, &p, &mut rng_from_seed(2)).unwrap();
        let diffs: Vec<f64> = m
            .rows()
            .into_iter()
            .flat_map(|row| {
                row.windows(2)
                    .into_iter()
                    .map(|w| w[0].g0 - w[1].g0)
                    .collect::<Vec<_>>()
            })
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 3.0 * sd / n.sqrt());
    }

    #[test]
    fn reprogram_keeps_variation_draw() {
        let p = DeviceParams::default();
        let mut rng = rng_from_seed(4);
        let mut d = program_target(p.g_on, &p, &mut rng).unwrap();
        let draw = d.per_device_log_sigma;
        reprogram(&mut d, 0.0, &p, &mut rng).unwrap();
        assert_eq!(d.per_device_log_sigma, draw);
        assert!(d.g0 < us(25.0));
    }

    #[test]
    fn relaxation_hook_is_applied() {
        let p = DeviceParams::noise_free();
        let mut rng = rng_from_seed(4);
        let hook = |g: f64, _: &mut dyn RngCore| g * 0.9;
        let d = program_target_relaxed(us(100.0), &p, &hook, &mut rng).unwrap();
        assert!((d.g0 - us(90.0)).abs() < 1e-15);
    }

    #[test]
    fn toml_rejects_unknown_keys_with_path() {
        let err = DeviceParams::from_toml_str("fit_a = 0.8\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let p = DeviceParams::from_toml_str(
            "g_on = 1.2e-4\n[fluctuation]\nmode = \"constant\"\nsigma = 1e-6\n",
        )
        .unwrap();
        assert_eq!(p.fluctuation, Fluctuation::Constant { sigma: 1e-6 });
        assert_eq!(p.fit_a, 0.782);
    }
}
