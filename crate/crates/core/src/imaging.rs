//! RF frames to B-mode images: analytic-signal envelope, axial resampling
//! onto the 1000-row dataset grid, log compression and fan-shaped scan
//! conversion for display.

use std::f64::consts::PI;
use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::acoustics::{attenuation_factor, Medium, TransducerSpec};
use crate::error::{Error, Result};
use crate::scanner::{ProbeGeometry, RFFrame};

pub const DATASET_COLUMNS: usize = 436;
pub const DATASET_ROWS: usize = 1000;
pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 50.0;
pub const DEFAULT_CEILING: f64 = 255.0;

/// Magnitude of the analytic signal, computed with an FFT Hilbert
/// transform over the whole line.
pub fn envelope(rf_line: &[f64]) -> Vec<f64> {
    let n = rf_line.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = rf_line.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    // Keep DC (and Nyquist for even n), double positive frequencies, drop
    // negative ones.
    let positive_end = n.div_ceil(2);
    for v in &mut buf[1..positive_end] {
        *v *= 2.0;
    }
    for v in &mut buf[n / 2 + 1..] {
        *v = Complex64::new(0.0, 0.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.norm() * scale).collect()
}

/// Envelope of every line of a frame, line-major like the frame.
pub fn frame_envelope(frame: &RFFrame) -> Vec<f64> {
    (0..frame.lines).flat_map(|k| envelope(frame.line(k))).collect()
}

/// Divides a line-major envelope by the round-trip attenuation of `spec`
/// at each sample depth, flattening the mean level over depth.
pub fn compensate_attenuation(envelope: &mut [f64], frame: &RFFrame, spec: &TransducerSpec, medium: &Medium) {
    let gains: Vec<f64> = (0..frame.samples_per_line)
        .map(|s| 1.0 / attenuation_factor(spec, s as f64 * frame.axial_spacing_m(), medium))
        .collect();
    for line in envelope.chunks_mut(frame.samples_per_line) {
        for (v, g) in line.iter_mut().zip(&gains) {
            *v *= g;
        }
    }
}

/// `L * clamp(1 + 20 log10(e / e_max) / DR, 0, 1)` with `e_max` the maximum
/// of `values`. An all-zero input maps to all zeros.
pub fn log_compress(values: &[f64], dynamic_range_db: f64, ceiling: f64) -> Result<Vec<f64>> {
    if !(dynamic_range_db > 0.0) {
        return Err(Error::invalid("dynamic_range_db", "must be positive"));
    }
    if values.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::invalid("envelope", "values must be non-negative"));
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    Ok(compress_with_max(values, max, dynamic_range_db, ceiling))
}

fn compress_with_max(values: &[f64], max: f64, dynamic_range_db: f64, ceiling: f64) -> Vec<f64> {
    if max <= 0.0 {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|&e| {
            if e <= 0.0 {
                return 0.0;
            }
            let db = 20.0 * (e / max).log10();
            ceiling * (1.0 + db / dynamic_range_db).clamp(0.0, 1.0)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageMeta {
    pub transducer_id: String,
    pub dynamic_range_db: f64,
    pub ceiling: f64,
    pub depth_m: f64,
    pub window_start_m: f64,
    pub roi_span_deg: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Row-major image: `width` columns (scanlines) by `height` rows (depth).
#[derive(Debug, Clone, PartialEq)]
pub struct BModeImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    pub meta: ImageMeta,
}

impl BModeImage {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Pixels rounded to 8 bits.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect()
    }

    /// Writes `<stem>.pgm` (binary 8-bit PGM) and `<stem>.json` (metadata).
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_pgm(&dir.join(format!("{stem}.pgm")), self.width, self.height, &self.to_u8())?;
        let meta_path = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&self.meta)?;
        fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))
    }

    /// Reads a PGM; the sidecar is used when present.
    pub fn read(pgm_path: &Path) -> Result<Self> {
        let (width, height, data) = read_pgm(pgm_path)?;
        let meta_path = pgm_path.with_extension("json");
        let meta = if meta_path.exists() {
            let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
            serde_json::from_str(&text)?
        } else {
            ImageMeta {
                transducer_id: String::new(),
                dynamic_range_db: DEFAULT_DYNAMIC_RANGE_DB,
                ceiling: DEFAULT_CEILING,
                depth_m: 0.02,
                window_start_m: 2e-3,
                roi_span_deg: 106.0,
                seed: None,
            }
        };
        Ok(BModeImage {
            width,
            height,
            pixels: data.into_iter().map(f64::from).collect(),
            meta,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    pub low: BModeImage,
    pub high: BModeImage,
}

impl ImagePair {
    pub fn new(low: BModeImage, high: BModeImage) -> Result<Self> {
        if low.dims() != high.dims() {
            return Err(Error::DimensionMismatch {
                expected: low.dims(),
                actual: high.dims(),
            });
        }
        let (a, b) = (&low.meta, &high.meta);
        if a.depth_m != b.depth_m || a.roi_span_deg != b.roi_span_deg || a.window_start_m != b.window_start_m {
            return Err(Error::MisalignedPair(format!(
                "{} / {}",
                a.transducer_id, b.transducer_id
            )));
        }
        Ok(ImagePair { low, high })
    }
}

/// Linear resampling of a line onto `rows` points; first and last samples
/// map onto the first and last rows.
pub fn resample_linear(line: &[f64], rows: usize) -> Vec<f64> {
    let n = line.len();
    if rows == 1 || n == 1 {
        return vec![line[0]; rows];
    }
    let scale = (n - 1) as f64 / (rows - 1) as f64;
    (0..rows)
        .map(|j| {
            if j == rows - 1 {
                return line[n - 1];
            }
            let pos = j as f64 * scale;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if i + 1 >= n {
                line[n - 1]
            } else {
                line[i] * (1.0 - frac) + line[i + 1] * frac
            }
        })
        .collect()
}

/// Envelope detection, resampling to `rows` and log compression against
/// the frame maximum. Output columns are scanlines.
pub fn to_bmode(frame: &RFFrame, rows: usize, dynamic_range_db: f64, ceiling: f64) -> Result<BModeImage> {
    if rows < 2 || frame.samples_per_line < 2 {
        return Err(Error::invalid("rows", "need at least 2 rows and 2 samples"));
    }
    let width = frame.lines;
    let mut linear = vec![0.0; width * rows];
    for k in 0..width {
        let env = resample_linear(&envelope(frame.line(k)), rows);
        for (j, v) in env.into_iter().enumerate() {
            linear[j * width + k] = v;
        }
    }
    let pixels = log_compress(&linear, dynamic_range_db, ceiling)?;
    let depth_m = frame.axial_spacing_m() * (frame.samples_per_line - 1) as f64;
    Ok(BModeImage {
        width,
        height: rows,
        pixels,
        meta: ImageMeta {
            transducer_id: frame.transducer_id.clone(),
            dynamic_range_db,
            ceiling,
            depth_m,
            window_start_m: frame.window_start_m,
            roi_span_deg: frame.angle_step_deg * (frame.lines - 1) as f64,
            seed: None,
        },
    })
}

/// 436 x 1000 dataset image at the default 255 ceiling.
pub fn to_dataset_image(frame: &RFFrame, dynamic_range_db: f64) -> Result<BModeImage> {
    if frame.lines != DATASET_COLUMNS {
        return Err(Error::DimensionMismatch {
            expected: (DATASET_COLUMNS, frame.samples_per_line),
            actual: (frame.lines, frame.samples_per_line),
        });
    }
    to_bmode(frame, DATASET_ROWS, dynamic_range_db, DEFAULT_CEILING)
}

/// Cartesian display raster. Row 0 is nearest the probe; the sector opens
/// downwards and the probe axis sits at `(x = 0, z = 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianImage {
    pub width: usize,
    pub height: usize,
    pub pixel_size_m: f64,
    pub x_min_m: f64,
    pub z_min_m: f64,
    pub pixels: Vec<f64>,
}

impl CartesianImage {
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.x_min_m + (col as f64 + 0.5) * self.pixel_size_m,
            self.z_min_m + (row as f64 + 0.5) * self.pixel_size_m,
        )
    }
}

/// Polar grid coordinates `(column, row)` of a plane point, if it falls
/// inside the imaged sector.
pub fn polar_coords(
    image_dims: (usize, usize),
    geometry: &ProbeGeometry,
    depth_m: f64,
    x_m: f64,
    z_m: f64,
) -> Option<(f64, f64)> {
    let (cols, rows) = image_dims;
    let r = x_m.hypot(z_m);
    let angle = x_m.atan2(z_m).to_degrees();
    let u = (angle + geometry.roi_span_deg / 2.0) / geometry.roi_span_deg * (cols - 1) as f64;
    let v = (r - geometry.window_start_m) / depth_m * (rows - 1) as f64;
    let inside = (0.0..=(cols - 1) as f64).contains(&u) && (0.0..=(rows - 1) as f64).contains(&v);
    inside.then_some((u, v))
}

/// Bilinear polar-to-Cartesian conversion. Pixels outside the sector are 0.
pub fn scan_convert(image: &BModeImage, geometry: &ProbeGeometry, pixel_size_m: f64) -> Result<CartesianImage> {
    if !(pixel_size_m > 0.0) {
        return Err(Error::invalid("pixel_size_m", "must be positive"));
    }
    if image.width < 2 || image.height < 2 {
        return Err(Error::invalid("image", "need at least 2x2 pixels"));
    }
    let depth_m = image.meta.depth_m;
    let r_in = geometry.window_start_m;
    let r_out = r_in + depth_m;
    let half = (geometry.roi_span_deg / 2.0).to_radians();
    let x_max = if half >= PI / 2.0 { r_out } else { r_out * half.sin() };
    let z_min = (r_in * half.cos()).min(r_out * half.cos());
    let width = (2.0 * x_max / pixel_size_m).ceil() as usize;
    let height = ((r_out - z_min) / pixel_size_m).ceil() as usize;
    let mut out = CartesianImage {
        width,
        height,
        pixel_size_m,
        x_min_m: -x_max,
        z_min_m: z_min,
        pixels: vec![0.0; width * height],
    };
    for row in 0..height {
        for col in 0..width {
            let (x, z) = out.pixel_center(row, col);
            let Some((u, v)) = polar_coords(image.dims(), geometry, depth_m, x, z) else {
                continue;
            };
            let c0 = (u.floor() as usize).min(image.width - 2);
            let r0 = (v.floor() as usize).min(image.height - 2);
            let (fu, fv) = (u - c0 as f64, v - r0 as f64);
            let p = |r: usize, c: usize| image.at(r, c);
            out.pixels[row * width + col] = (1.0 - fv) * ((1.0 - fu) * p(r0, c0) + fu * p(r0, c0 + 1))
                + fv * ((1.0 - fu) * p(r0 + 1, c0) + fu * p(r0 + 1, c0 + 1));
        }
    }
    Ok(out)
}

/// Binary (P5) 8-bit PGM with header `P5\n<width> <height> 255\n`.
pub fn encode_pgm(width: usize, height: usize, data: &[u8]) -> Result<Vec<u8>> {
    let mut bytes = Vec::with_capacity(data.len() + 20);
    PnmEncoder::new(&mut bytes)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(data, width as u32, height as u32, ExtendedColorType::L8)?;
    Ok(bytes)
}

pub fn write_pgm(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let bytes = encode_pgm(width, height, data)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::ImageReader::with_format(Cursor::new(bytes), ImageFormat::Pnm).decode()?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        _ => {
            return Err(Error::Format {
                what: "PGM",
                reason: format!("{} is not 8-bit grayscale", path.display()),
            })
        }
    };
    Ok((gray.width() as usize, gray.height() as usize, gray.into_raw()))
}
