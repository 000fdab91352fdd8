//! Image-quality measures: FWHM resolution, echo SNR, contrast-to-noise
//! ratio, speckle SNR, SSIM, MSE, PSNR and RMSE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample statistics of a region. `std` is the population standard
/// deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub count: usize,
}

impl RegionStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(RegionStats {
            mean,
            std: var.sqrt(),
            max,
            count: samples.len(),
        })
    }
}

/// Full width at half maximum of a sampled profile. Each half-maximum
/// crossing is the first one met walking outwards from the peak, located by
/// linear interpolation between the bracketing samples.
pub fn fwhm(profile: &[f64], spacing: f64) -> Result<f64> {
    let (peak_idx, peak) =
        profile.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
        );
    if !(peak > 0.0) {
        return Err(Error::invalid("profile", "peak must be positive"));
    }
    let half = peak / 2.0;
    let left = (0..peak_idx)
        .rev()
        .find(|&j| profile[j] <= half)
        .map(|j| j as f64 + (half - profile[j]) / (profile[j + 1] - profile[j]))
        .ok_or(Error::PeakAtBoundary { side: "left" })?;
    let right = (peak_idx + 1..profile.len())
        .find(|&j| profile[j] <= half)
        .map(|j| j as f64 - (half - profile[j]) / (profile[j - 1] - profile[j]))
        .ok_or(Error::PeakAtBoundary { side: "right" })?;
    Ok((right - left) * spacing)
}

/// `20 log10(max(signal) / std(noise))`.
pub fn esnr_db(signal: &RegionStats, noise: &RegionStats) -> Result<f64> {
    if !(noise.std > 0.0) {
        return Err(Error::UndefinedMetric {
            metric: "eSNR",
            reason: "noise standard deviation is zero",
        });
    }
    Ok(20.0 * (signal.max / noise.std).log10())
}

/// `|mu_T - mu_B| / sqrt(sigma_T^2 + sigma_B^2)`.
pub fn cnr(target: &RegionStats, background: &RegionStats) -> Result<f64> {
    let denom = (target.std * target.std + background.std * background.std).sqrt();
    if !(denom > 0.0) {
        return Err(Error::UndefinedMetric {
            metric: "CNR",
            reason: "both regions have zero variance",
        });
    }
    Ok((target.mean - background.mean).abs() / denom)
}

/// `mu / sigma` of a speckle region.
pub fn ssnr(speckle: &RegionStats) -> Result<f64> {
    if !(speckle.std > 0.0) {
        return Err(Error::UndefinedMetric {
            metric: "SSNR",
            reason: "region is constant",
        });
    }
    Ok(speckle.mean / speckle.std)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsimWindow {
    /// Square uniform window of odd side, mean-pooled over all positions
    /// that fit inside the image.
    Uniform(usize),
    /// One evaluation over whole-image statistics.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub dynamic_range: f64,
    pub window: SsimWindow,
}

impl SsimParams {
    pub fn new(dynamic_range: f64, window: SsimWindow) -> Result<Self> {
        if !(dynamic_range > 0.0) {
            return Err(Error::invalid("dynamic_range", "must be positive"));
        }
        if let SsimWindow::Uniform(w) = window {
            if w == 0 || w.is_multiple_of(2) {
                return Err(Error::invalid("window", "side must be odd"));
            }
        }
        Ok(SsimParams { dynamic_range, window })
    }

    pub fn c1(&self) -> f64 {
        (0.01 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (0.03 * self.dynamic_range).powi(2)
    }
}

impl Default for SsimParams {
    /// `L = 255`, 7x7 uniform window.
    fn default() -> Self {
        SsimParams {
            dynamic_range: 255.0,
            window: SsimWindow::Uniform(7),
        }
    }
}

/// Borrowed row-major grayscale image.
#[derive(Debug, Clone, Copy)]
pub struct Gray<'a> {
    pub data: &'a [f64],
    pub width: usize,
    pub height: usize,
}

impl<'a> Gray<'a> {
    pub fn new(data: &'a [f64], width: usize, height: usize) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (data.len(), 1),
            });
        }
        Ok(Gray { data, width, height })
    }

    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

fn check_dims(x: &Gray, y: &Gray) -> Result<()> {
    if x.dims() != y.dims() {
        return Err(Error::DimensionMismatch {
            expected: x.dims(),
            actual: y.dims(),
        });
    }
    Ok(())
}

fn ssim_from_moments(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

pub fn ssim(x: &Gray, y: &Gray, params: &SsimParams) -> Result<f64> {
    check_dims(x, y)?;
    let (c1, c2) = (params.c1(), params.c2());
    match params.window {
        SsimWindow::Global => {
            let n = x.data.len() as f64;
            if x.data.is_empty() {
                return Err(Error::EmptyRegion);
            }
            let mx = x.data.iter().sum::<f64>() / n;
            let my = y.data.iter().sum::<f64>() / n;
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for (a, b) in x.data.iter().zip(y.data) {
                vx += (a - mx) * (a - mx);
                vy += (b - my) * (b - my);
                cxy += (a - mx) * (b - my);
            }
            Ok(ssim_from_moments(mx, my, vx / n, vy / n, cxy / n, c1, c2))
        }
        SsimWindow::Uniform(w) => windowed_ssim(x, y, w, c1, c2),
    }
}

/// Column sums over a band of `w` rows, then a horizontal running sum.
fn windowed_ssim(x: &Gray, y: &Gray, w: usize, c1: f64, c2: f64) -> Result<f64> {
    let (width, height) = x.dims();
    if w == 0 || w.is_multiple_of(2) {
        return Err(Error::invalid("window", "side must be odd"));
    }
    if w > width || w > height {
        return Err(Error::invalid("window", "larger than the image"));
    }
    let n = (w * w) as f64;
    let mut col = vec![[0.0f64; 5]; width];
    let mut total = 0.0;
    let mut windows = 0usize;
    for top in 0..=height - w {
        for (c, acc) in col.iter_mut().enumerate() {
            *acc = [0.0; 5];
            for r in top..top + w {
                let a = x.data[r * width + c];
                let b = y.data[r * width + c];
                acc[0] += a;
                acc[1] += b;
                acc[2] += a * a;
                acc[3] += b * b;
                acc[4] += a * b;
            }
        }
        let mut run = [0.0f64; 5];
        for acc in &col[..w] {
            for k in 0..5 {
                run[k] += acc[k];
            }
        }
        for left in 0..=width - w {
            if left > 0 {
                for k in 0..5 {
                    run[k] += col[left + w - 1][k] - col[left - 1][k];
                }
            }
            let mx = run[0] / n;
            let my = run[1] / n;
            let vx = (run[2] / n - mx * mx).max(0.0);
            let vy = (run[3] / n - my * my).max(0.0);
            let cxy = run[4] / n - mx * my;
            total += ssim_from_moments(mx, my, vx, vy, cxy, c1, c2);
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// Mean squared pixel difference.
pub fn mse(x: &Gray, y: &Gray) -> Result<f64> {
    check_dims(x, y)?;
    if x.data.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let sum: f64 = x.data.iter().zip(y.data).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / x.data.len() as f64)
}

pub fn rmse(x: &Gray, y: &Gray) -> Result<f64> {
    Ok(mse(x, y)?.sqrt())
}

/// PSNR in dB. Identical images have no finite PSNR and are flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn db(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Psnr::Infinite)
    }
}

/// Peak used in the PSNR numerator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsnrPeak {
    /// Fixed dynamic-range ceiling, e.g. 255.
    Ceiling(f64),
    /// Observed maximum of the reference image.
    ObservedMax,
}

/// `20 log10(peak / sqrt(MSE))`, with `y` the reference.
pub fn psnr(x: &Gray, y: &Gray, peak: PsnrPeak) -> Result<Psnr> {
    let err = rmse(x, y)?;
    let peak = match peak {
        PsnrPeak::Ceiling(l) => l,
        PsnrPeak::ObservedMax => y.data.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    if err == 0.0 {
        return Ok(Psnr::Infinite);
    }
    Ok(Psnr::Finite(20.0 * (peak / err).log10()))
}

/// SSIM, PSNR and RMSE of one generated/reference pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub name: String,
    pub ssim: f64,
    pub psnr: Psnr,
    pub rmse: f64,
}

pub fn score_pair(
    name: &str,
    generated: &Gray,
    reference: &Gray,
    ssim_params: &SsimParams,
    peak: PsnrPeak,
) -> Result<PairScore> {
    Ok(PairScore {
        name: name.to_string(),
        ssim: ssim(generated, reference, ssim_params)?,
        psnr: psnr(generated, reference, peak)?,
        rmse: rmse(generated, reference)?,
    })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Aggregate { mean, std: var.sqrt() })
    }
}

/// Per-pair scores plus mean/std of each column. The PSNR aggregate
/// covers finite entries only; `psnr_infinite_count` counts the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub pairs: Vec<PairScore>,
    pub ssim: Option<Aggregate>,
    pub psnr_db: Option<Aggregate>,
    pub psnr_infinite_count: usize,
    pub rmse: Option<Aggregate>,
}

impl ScoreReport {
    pub fn from_pairs(pairs: Vec<PairScore>) -> Self {
        let ssims: Vec<f64> = pairs.iter().map(|p| p.ssim).collect();
        let rmses: Vec<f64> = pairs.iter().map(|p| p.rmse).collect();
        let psnrs: Vec<f64> = pairs
            .iter()
            .filter_map(|p| match p.psnr {
                Psnr::Finite(v) => Some(v),
                Psnr::Infinite => None,
            })
            .collect();
        ScoreReport {
            ssim: Aggregate::of(&ssims),
            psnr_db: Aggregate::of(&psnrs),
            psnr_infinite_count: pairs.len() - psnrs.len(),
            rmse: Aggregate::of(&rmses),
            pairs,
        }
    }
}
