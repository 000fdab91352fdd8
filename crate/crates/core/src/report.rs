//! Per-frame image-quality report: wire resolution and eSNR on the raw RF,
//! CNR and SSNR on the B-mode image.
//!
//! Regions are given in dataset-image pixels (columns = scanlines, rows =
//! depth). RF measurements map image rows onto RF samples with the same
//! endpoint-preserving scale used by the B-mode resampling.

use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{frame_envelope, BModeImage};
use crate::metrics::{cnr, esnr_db, fwhm, ssnr, RegionStats};
use crate::phantom::{region_pixels, ContrastLayout, Position, RegionKind, RegionSpec};
use crate::scanner::{PairedRFFrame, ProbeGeometry, RFFrame};

pub const REGIONS_FORMAT: &str = "eustwin-regions";
pub const REPORT_FORMAT: &str = "eustwin-report";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSet {
    pub format: String,
    pub version: u32,
    pub image_width: usize,
    pub image_height: usize,
    pub regions: Vec<RegionSpec>,
}

impl RegionSet {
    pub fn new(image_width: usize, image_height: usize, regions: Vec<RegionSpec>) -> Self {
        RegionSet {
            format: REGIONS_FORMAT.to_string(),
            version: FORMAT_VERSION,
            image_width,
            image_height,
            regions,
        }
    }

    pub fn of_kind(&self, kind: RegionKind) -> Vec<&RegionSpec> {
        self.regions.iter().filter(|r| r.kind == kind).collect()
    }

    pub fn first(&self, kind: RegionKind) -> Option<&RegionSpec> {
        self.regions.iter().find(|r| r.kind == kind)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: RegionSet = serde_json::from_str(&text)?;
        if set.format != REGIONS_FORMAT || set.version != FORMAT_VERSION {
            return Err(Error::Format {
                what: "regions file",
                reason: format!("unsupported format {} v{}", set.format, set.version),
            });
        }
        Ok(set)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Checks that at least one measurement group is complete and none is
    /// half-specified. Groups: target + noise, homogeneous + background,
    /// speckle.
    pub fn check(&self) -> Result<()> {
        let has = |k| self.first(k).is_some();
        let groups: [&[RegionKind]; 3] = [
            &[RegionKind::Target, RegionKind::Noise],
            &[RegionKind::Homogeneous, RegionKind::Background],
            &[RegionKind::Speckle],
        ];
        let mut missing = Vec::new();
        let mut complete = 0;
        for group in groups {
            let present = group.iter().filter(|&&k| has(k)).count();
            if present == group.len() {
                complete += 1;
            } else if present > 0 {
                missing.extend(group.iter().filter(|&&k| !has(k)));
            }
        }
        if complete == 0 && missing.is_empty() {
            missing.extend(RegionKind::ALL);
        }
        if missing.is_empty() {
            return Ok(());
        }
        let kinds: Vec<String> = missing.iter().map(|k| k.as_str().to_string()).collect();
        Err(Error::MissingRegions {
            kinds: kinds.join(", "),
        })
    }
}

/// Maps physical positions to fractional dataset-image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelMapper {
    pub width: usize,
    pub height: usize,
    pub roi_span_deg: f64,
    pub window_start_m: f64,
    pub depth_m: f64,
}

impl PixelMapper {
    pub fn new(geometry: &ProbeGeometry, sound_speed_m_s: f64, width: usize, height: usize) -> Self {
        let last = (geometry.rf_samples_per_line - 1) as f64;
        PixelMapper {
            width,
            height,
            roi_span_deg: geometry.roi_span_deg,
            window_start_m: geometry.window_start_m,
            depth_m: geometry.sample_depth_m(last, sound_speed_m_s),
        }
    }

    pub fn col_step_deg(&self) -> f64 {
        self.roi_span_deg / (self.width - 1) as f64
    }

    pub fn row_step_m(&self) -> f64 {
        self.depth_m / (self.height - 1) as f64
    }

    /// `(col, row)` of a point.
    pub fn to_pixel(&self, p: Position) -> (f64, f64) {
        let col = (p.angle_deg() + self.roi_span_deg / 2.0) / self.col_step_deg();
        let row = (p.radius_m() - self.window_start_m) / self.row_step_m();
        (col, row)
    }

    /// Rectangle centered on `center` with the given lateral and axial
    /// half-extents in meters, clamped to the image.
    pub fn rect_around(
        &self,
        kind: RegionKind,
        center: Position,
        half_lateral_m: f64,
        half_axial_m: f64,
    ) -> RegionSpec {
        let (col, row) = self.to_pixel(center);
        let half_cols = (half_lateral_m / center.radius_m()).to_degrees() / self.col_step_deg();
        let half_rows = half_axial_m / self.row_step_m();
        let clamp = |v: f64, n: usize| v.round().clamp(0.0, (n - 1) as f64) as usize;
        let c0 = clamp(col - half_cols, self.width);
        let c1 = clamp(col + half_cols, self.width);
        let r0 = clamp(row - half_rows, self.height);
        let r1 = clamp(row + half_rows, self.height);
        RegionSpec::new(kind, c0, r0, c1 - c0 + 1, r1 - r0 + 1)
    }
}

/// Regions for a wire phantom: one target box per wire and a noise band
/// above the first wire.
pub fn wire_regions(mapper: &PixelMapper, wire_depths_m: &[f64], lateral_half_m: f64) -> RegionSet {
    let mut regions: Vec<RegionSpec> = wire_depths_m
        .iter()
        .map(|&d| {
            let center = Position::new(0.0, mapper.window_start_m + d);
            mapper.rect_around(RegionKind::Target, center, lateral_half_m, 1e-3)
        })
        .collect();
    if let Some(&first) = wire_depths_m.first() {
        let rows = ((first - 2e-3) / mapper.row_step_m()).floor().max(1.0) as usize;
        regions.push(RegionSpec::new(RegionKind::Noise, 0, 0, mapper.width, rows));
    }
    RegionSet::new(mapper.width, mapper.height, regions)
}

/// Regions for the contrast phantom: the cyst interior as background, a
/// tissue box of the same size and depth as homogeneous region, and a wider
/// speckle box one millimeter deeper.
pub fn contrast_regions(mapper: &PixelMapper, layout: &ContrastLayout) -> RegionSet {
    let r0 = mapper.window_start_m;
    let depth = r0 + layout.cyst_depth_m;
    let cyst = Position::from_polar(depth, layout.cyst_angle_deg);
    let half = 0.6 * layout.cyst_radius_m;
    let tissue_angle = layout.cyst_angle_deg + 40.0;
    let homogeneous = Position::from_polar(depth, tissue_angle);
    let speckle = Position::from_polar(depth + 1e-3, tissue_angle);
    RegionSet::new(
        mapper.width,
        mapper.height,
        vec![
            mapper.rect_around(RegionKind::Background, cyst, half, half),
            mapper.rect_around(RegionKind::Homogeneous, homogeneous, half, half),
            mapper.rect_around(RegionKind::Speckle, speckle, 2.5e-3, 1e-3),
        ],
    )
}

/// RF sample range covered by image rows `rows`.
pub fn rows_to_samples(rows: Range<usize>, image_rows: usize, samples: usize) -> Range<usize> {
    let k = (samples - 1) as f64 / (image_rows - 1) as f64;
    let start = (rows.start as f64 * k).floor() as usize;
    let end = (((rows.end - 1) as f64 * k).ceil() as usize + 1).min(samples);
    start..end
}

/// Values of a line-major RF-grid array inside an image-space region,
/// line by line.
fn rf_region(
    frame: &RFFrame,
    values: &[f64],
    region: &RegionSpec,
    image_rows: usize,
) -> Result<(Range<usize>, Range<usize>, Vec<f64>)> {
    let (cols, rows) = region.clip(frame.lines, image_rows)?;
    let samples = rows_to_samples(rows, image_rows, frame.samples_per_line);
    let mut out = Vec::with_capacity(cols.len() * samples.len());
    for line in cols.clone() {
        let base = line * frame.samples_per_line;
        out.extend_from_slice(&values[base + samples.start..base + samples.end]);
    }
    Ok((cols, samples, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub peak_line: usize,
    pub peak_sample: usize,
    pub lateral_fwhm_m: f64,
    pub axial_fwhm_m: f64,
    pub esnr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub transducer_id: String,
    pub targets: Vec<TargetMetrics>,
    pub cnr: Option<f64>,
    pub ssnr: Option<f64>,
}

/// Lateral and axial FWHM of the envelope peak inside `region`.
pub fn measure_target(
    frame: &RFFrame,
    envelope: &[f64],
    region: &RegionSpec,
    image_rows: usize,
) -> Result<(usize, usize, f64, f64)> {
    let (cols, samples, _) = rf_region(frame, envelope, region, image_rows)?;
    let n = frame.samples_per_line;
    let mut best = (cols.start, samples.start, f64::NEG_INFINITY);
    for line in cols.clone() {
        for s in samples.clone() {
            let v = envelope[line * n + s];
            if v > best.2 {
                best = (line, s, v);
            }
        }
    }
    let (line, sample, _) = best;
    let axial: Vec<f64> = samples.clone().map(|s| envelope[line * n + s]).collect();
    let axial_fwhm = fwhm(&axial, frame.axial_spacing_m())?;
    let lateral: Vec<f64> = cols.map(|k| envelope[k * n + sample]).collect();
    let radius = frame.window_start_m + sample as f64 * frame.axial_spacing_m();
    let arc = radius * frame.angle_step_deg.to_radians();
    let lateral_fwhm = fwhm(&lateral, arc)?;
    Ok((line, sample, lateral_fwhm, axial_fwhm))
}

/// Metrics of one frame and its B-mode image.
pub fn evaluate_frame(frame: &RFFrame, image: &BModeImage, regions: &RegionSet) -> Result<FrameMetrics> {
    regions.check()?;
    if image.width != frame.lines || (regions.image_width, regions.image_height) != image.dims() {
        return Err(Error::DimensionMismatch {
            expected: (frame.lines, image.height),
            actual: (regions.image_width, regions.image_height),
        });
    }
    let rows = image.height;
    let mut targets = Vec::new();
    if let Some(noise) = regions.first(RegionKind::Noise) {
        let envelope = frame_envelope(frame);
        let (_, _, noise_samples) = rf_region(frame, &frame.data, noise, rows)?;
        let noise_stats = RegionStats::from_samples(&noise_samples)?;
        for target in regions.of_kind(RegionKind::Target) {
            let (peak_line, peak_sample, lateral_fwhm_m, axial_fwhm_m) =
                measure_target(frame, &envelope, target, rows)?;
            let (_, _, raw) = rf_region(frame, &frame.data, target, rows)?;
            let magnitude: Vec<f64> = raw.iter().map(|v| v.abs()).collect();
            let signal = RegionStats::from_samples(&magnitude)?;
            targets.push(TargetMetrics {
                peak_line,
                peak_sample,
                lateral_fwhm_m,
                axial_fwhm_m,
                esnr_db: esnr_db(&signal, &noise_stats)?,
            });
        }
    }
    let stats = |r: &RegionSpec| RegionStats::from_samples(&region_pixels(image, r)?);
    let cnr_value = match (
        regions.first(RegionKind::Homogeneous),
        regions.first(RegionKind::Background),
    ) {
        (Some(h), Some(b)) => Some(cnr(&stats(h)?, &stats(b)?)?),
        _ => None,
    };
    let ssnr_value = match regions.first(RegionKind::Speckle) {
        Some(s) => Some(ssnr(&stats(s)?)?),
        None => None,
    };
    Ok(FrameMetrics {
        transducer_id: frame.transducer_id.clone(),
        targets,
        cnr: cnr_value,
        ssnr: ssnr_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format: String,
    pub version: u32,
    pub seed: Option<u64>,
    pub low: FrameMetrics,
    pub high: FrameMetrics,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn evaluate_pair(
    pair: &PairedRFFrame,
    low: &BModeImage,
    high: &BModeImage,
    regions: &RegionSet,
    seed: Option<u64>,
) -> Result<MetricsReport> {
    Ok(MetricsReport {
        format: REPORT_FORMAT.to_string(),
        version: FORMAT_VERSION,
        seed,
        low: evaluate_frame(&pair.low, low, regions)?,
        high: evaluate_frame(&pair.high, high, regions)?,
    })
}
