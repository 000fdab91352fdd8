//! Rotational dual-element scan geometry and RF synthesis.
//!
//! Both elements fire at the 45° reflector from opposite sides, so they sweep
//! the same plane half a revolution apart. Only the imaging sector is
//! synthesized, and the 180° offset is absorbed by giving both frames the
//! same rays in the same order.
//!
//! Echoes are a first-order superposition: every point source within three
//! lateral beam widths of a ray contributes its reflectivity, the lateral
//! beam weight and the round-trip attenuation, times the pulse delayed by
//! `2 d / c`. Synthesis runs at complex baseband: each echo deposits
//! `a exp(-i 2 pi f0 tau)` on the sample grid (split linearly between the
//! two bracketing samples), the deposits are convolved with the pulse
//! envelope and the carrier is restored. The carrier phase is exact; only
//! the envelope position is interpolated.

use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acoustics::{
    gaussian_by_fwhm, lateral_beam_fwhm, pulse_envelope, Medium, Mount, TransducerSpec, PULSE_TRUNCATION_SIGMAS,
};
use crate::error::{Error, Result};
use crate::phantom::{PhantomDef, Position};
use crate::rng::{line_rng, substream_seed};

/// Point sources are ignored beyond this many lateral FWHM from a ray.
pub const LATERAL_CULL_WIDTHS: f64 = 3.0;

/// Receiver noise standard deviation, in units of the diffuse scatterer
/// reflectivity spread.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeGeometry {
    pub reflector_angle_deg: f64,
    /// Mechanical angle of the sector center. The thick pillar sits at 0°.
    pub roi_center_deg: f64,
    pub roi_span_deg: f64,
    pub scanlines_per_frame: usize,
    pub rf_sample_rate_hz: f64,
    pub rf_samples_per_line: usize,
    pub depth_m: f64,
    /// Radius from the probe axis where the imaging window starts.
    pub window_start_m: f64,
    pub rotation_speed_rpm: f64,
    pub phase_offset_deg: f64,
    pub pillar_angles_deg: Vec<f64>,
    pub pillar_radius_m: f64,
}

impl Default for ProbeGeometry {
    fn default() -> Self {
        let depth_m = 0.02;
        let rf_sample_rate_hz = 100e6;
        ProbeGeometry {
            reflector_angle_deg: 45.0,
            roi_center_deg: 180.0,
            roi_span_deg: 106.0,
            scanlines_per_frame: 436,
            rf_sample_rate_hz,
            rf_samples_per_line: samples_for_depth(depth_m, 1540.0, rf_sample_rate_hz),
            depth_m,
            window_start_m: 2e-3,
            rotation_speed_rpm: 1293.1,
            phase_offset_deg: 180.0,
            pillar_angles_deg: vec![0.0, 90.0, 270.0],
            pillar_radius_m: 7e-3,
        }
    }
}

/// `ceil(2 depth / c * rate)`.
pub fn samples_for_depth(depth_m: f64, sound_speed_m_s: f64, sample_rate_hz: f64) -> usize {
    (2.0 * depth_m / sound_speed_m_s * sample_rate_hz).ceil() as usize
}

impl ProbeGeometry {
    /// One frame per reflector revolution.
    pub fn frame_rate_fps(&self) -> f64 {
        self.rotation_speed_rpm / 60.0
    }

    pub fn line_spacing_deg(&self) -> f64 {
        self.roi_span_deg / (self.scanlines_per_frame - 1) as f64
    }

    pub fn roi_start_deg(&self) -> f64 {
        self.roi_center_deg - self.roi_span_deg / 2.0
    }

    /// Depth along the beam of RF sample `index`.
    pub fn sample_depth_m(&self, index: f64, sound_speed_m_s: f64) -> f64 {
        index * sound_speed_m_s / (2.0 * self.rf_sample_rate_hz)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.roi_span_deg > 0.0 && self.roi_span_deg < 360.0) {
            return Err(Error::invalid("roi_span_deg", "must be in (0, 360)"));
        }
        if self.scanlines_per_frame < 2 {
            return Err(Error::invalid("scanlines_per_frame", "need at least 2"));
        }
        if self.rf_samples_per_line < 2 {
            return Err(Error::invalid("rf_samples_per_line", "need at least 2"));
        }
        if !(self.rf_sample_rate_hz > 0.0) {
            return Err(Error::invalid("rf_sample_rate_hz", "must be positive"));
        }
        if !(self.depth_m > 0.0) {
            return Err(Error::invalid("depth_m", "must be positive"));
        }
        if !(self.window_start_m >= 0.0) {
            return Err(Error::invalid("window_start_m", "must be non-negative"));
        }
        if !(self.rotation_speed_rpm > 0.0) {
            return Err(Error::invalid("rotation_speed_rpm", "must be positive"));
        }
        if self.phase_offset_deg != 180.0 {
            return Err(Error::invalid(
                "phase_offset_deg",
                "dual-element reflector requires 180",
            ));
        }
        let half = self.roi_span_deg / 2.0;
        for &p in &self.pillar_angles_deg {
            let d = (p - self.roi_center_deg).rem_euclid(360.0);
            let d = d.min(360.0 - d);
            if d < half {
                return Err(Error::invalid(
                    "pillar_angles_deg",
                    format!("pillar at {p}° lies inside the imaging sector"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanlineRay {
    pub index: usize,
    /// Mechanical angle in degrees.
    pub angle_deg: f64,
    /// Angle relative to the sector center, in degrees.
    pub sector_angle_deg: f64,
    /// Start of the imaging window on this ray.
    pub origin: Position,
}

impl ScanlineRay {
    pub fn direction(&self) -> (f64, f64) {
        let a = self.sector_angle_deg.to_radians();
        (a.sin(), a.cos())
    }
}

/// Evenly spaced mechanical angles spanning the sector, first and last on
/// the sector edges.
pub fn scanline_angles(geometry: &ProbeGeometry) -> Vec<f64> {
    let n = geometry.scanlines_per_frame;
    let start = geometry.roi_start_deg();
    let step = geometry.line_spacing_deg();
    (0..n)
        .map(|k| {
            if k == n - 1 {
                start + geometry.roi_span_deg
            } else {
                start + k as f64 * step
            }
        })
        .collect()
}

pub fn scanline_rays(geometry: &ProbeGeometry) -> Vec<ScanlineRay> {
    scanline_angles(geometry)
        .into_iter()
        .enumerate()
        .map(|(index, angle_deg)| {
            let sector_angle_deg = angle_deg - geometry.roi_center_deg;
            ScanlineRay {
                index,
                angle_deg,
                sector_angle_deg,
                origin: Position::from_polar(geometry.window_start_m, sector_angle_deg),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct PointSource {
    x: f64,
    z: f64,
    amplitude: f64,
}

/// Per-transducer synthesis state shared by all lines of a frame.
pub struct LineSynthesizer<'a> {
    spec: &'a TransducerSpec,
    medium: Medium,
    sample_rate_hz: f64,
    samples: usize,
    window_start_m: f64,
    sources: Vec<PointSource>,
    envelope: Vec<f64>,
    half: usize,
    max_cull_m: f64,
    max_depth_m: f64,
    min_depth_m: f64,
}

impl<'a> LineSynthesizer<'a> {
    pub fn new(phantom: &PhantomDef, spec: &'a TransducerSpec, geometry: &ProbeGeometry) -> Result<Self> {
        spec.validate()?;
        spec.check_sample_rate(geometry.rf_sample_rate_hz)?;
        let medium = phantom.medium;
        let diffuse_gain =
            (spec.center_frequency_hz / phantom.reference_frequency_hz).powf(phantom.diffuse_frequency_exponent);
        let mut sources: Vec<PointSource> = phantom
            .scatterers
            .iter()
            .map(|s| PointSource {
                x: s.position.x_m,
                z: s.position.z_m,
                amplitude: s.reflectivity * diffuse_gain,
            })
            .collect();
        sources.extend(phantom.wires.iter().map(|w| PointSource {
            x: w.center.x_m,
            z: w.center.z_m,
            amplitude: w.reflectivity,
        }));
        for pillar in &phantom.pillars {
            sources.extend(pillar.surface_points().into_iter().map(|s| PointSource {
                x: s.position.x_m,
                z: s.position.z_m,
                amplitude: s.reflectivity,
            }));
        }
        let envelope = pulse_envelope(spec, geometry.rf_sample_rate_hz);
        let half = envelope.len() / 2;
        let tail_m = PULSE_TRUNCATION_SIGMAS * spec.pulse_sigma_s() * medium.sound_speed_m_s / 2.0;
        let max_depth_m =
            geometry.sample_depth_m((geometry.rf_samples_per_line - 1) as f64, medium.sound_speed_m_s) + tail_m;
        let widest = lateral_beam_fwhm(spec, 0.0, &medium).max(lateral_beam_fwhm(spec, max_depth_m, &medium));
        Ok(LineSynthesizer {
            spec,
            medium,
            sample_rate_hz: geometry.rf_sample_rate_hz,
            samples: geometry.rf_samples_per_line,
            window_start_m: geometry.window_start_m,
            sources,
            envelope,
            half,
            max_cull_m: LATERAL_CULL_WIDTHS * widest,
            max_depth_m,
            min_depth_m: -tail_m,
        })
    }

    /// Noise-free echo line.
    pub fn echo_line(&self, ray: &ScanlineRay) -> Vec<f64> {
        let (ux, uz) = ray.direction();
        let c = self.medium.sound_speed_m_s;
        let f0 = self.spec.center_frequency_hz;
        let fs = self.sample_rate_hz;
        let half = self.half;
        // Attenuation exponent per meter of depth (amplitude, round trip).
        let atten_per_m = -self.medium.attenuation_db_cm_mhz * f0 * 1e-6 * 2.0 * 100.0 / 20.0 * std::f64::consts::LN_10;
        let mut deposits = vec![Complex64::new(0.0, 0.0); self.samples + 2 * half + 2];
        let mut any = false;
        for s in &self.sources {
            let lateral = s.x * uz - s.z * ux;
            if lateral.abs() > self.max_cull_m {
                continue;
            }
            let along = s.x * ux + s.z * uz;
            if along <= 0.0 {
                continue;
            }
            // Time of flight follows the true range; the beam width follows
            // the distance along the ray.
            let depth = s.x.hypot(s.z) - self.window_start_m;
            if depth < self.min_depth_m || depth > self.max_depth_m {
                continue;
            }
            let width = lateral_beam_fwhm(self.spec, along - self.window_start_m, &self.medium);
            if lateral.abs() > LATERAL_CULL_WIDTHS * width {
                continue;
            }
            let weight = s.amplitude * gaussian_by_fwhm(lateral, width) * (atten_per_m * depth.max(0.0)).exp();
            let tau = 2.0 * depth / c;
            let phase = -2.0 * PI * f0 * tau;
            let echo = Complex64::from_polar(weight, phase);
            let pos = tau * fs + half as f64;
            if pos < 0.0 {
                continue;
            }
            let base = pos.floor();
            let frac = pos - base;
            let idx = base as usize;
            deposits[idx] += echo * (1.0 - frac);
            deposits[idx + 1] += echo * frac;
            any = true;
        }
        let mut line = vec![0.0; self.samples];
        if !any {
            return line;
        }
        for (i, out) in line.iter_mut().enumerate() {
            // deposits index j corresponds to sample j - half.
            let window = &deposits[i..i + 2 * half + 1];
            let mut acc = Complex64::new(0.0, 0.0);
            for (d, e) in window.iter().zip(self.envelope.iter().rev()) {
                acc += d * e;
            }
            let t = i as f64 / fs;
            let carrier = Complex64::from_polar(1.0, 2.0 * PI * f0 * t);
            *out = (acc * carrier).re;
        }
        line
    }

    pub fn line(&self, ray: &ScanlineRay, noise_sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut line = self.echo_line(ray);
        if noise_sigma > 0.0 {
            for v in &mut line {
                let n: f64 = rng.sample(StandardNormal);
                *v += noise_sigma * n;
            }
        }
        line
    }
}

/// One RF line: superposed echoes plus white Gaussian noise of standard
/// deviation `noise_sigma` drawn from `rng`.
pub fn synthesize_rf_line(
    phantom: &PhantomDef,
    spec: &TransducerSpec,
    geometry: &ProbeGeometry,
    ray: &ScanlineRay,
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    Ok(LineSynthesizer::new(phantom, spec, geometry)?.line(ray, noise_sigma, rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RFFrame {
    pub transducer_id: String,
    pub lines: usize,
    pub samples_per_line: usize,
    pub sample_rate_hz: f64,
    pub sound_speed_m_s: f64,
    pub window_start_m: f64,
    pub first_angle_deg: f64,
    pub angle_step_deg: f64,
    /// Line-major: `data[line * samples_per_line + sample]`.
    pub data: Vec<f64>,
}

impl RFFrame {
    pub fn line(&self, index: usize) -> &[f64] {
        &self.data[index * self.samples_per_line..(index + 1) * self.samples_per_line]
    }

    pub fn line_angle_deg(&self, index: usize) -> f64 {
        self.first_angle_deg + index as f64 * self.angle_step_deg
    }

    /// Sample spacing along the beam, in meters.
    pub fn axial_spacing_m(&self) -> f64 {
        self.sound_speed_m_s / (2.0 * self.sample_rate_hz)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Simulates every scanline of a frame. Line `k` draws its noise from the
/// ChaCha stream `k` of `seed`.
pub fn simulate_frame(
    phantom: &PhantomDef,
    spec: &TransducerSpec,
    geometry: &ProbeGeometry,
    noise_sigma: f64,
    seed: u64,
) -> Result<RFFrame> {
    geometry.validate()?;
    phantom.validate()?;
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid("noise_sigma", "must be non-negative"));
    }
    let synth = LineSynthesizer::new(phantom, spec, geometry)?;
    let rays = scanline_rays(geometry);
    let lines: Vec<Vec<f64>> = rays
        .par_iter()
        .map(|ray| synth.line(ray, noise_sigma, &mut line_rng(seed, ray.index)))
        .collect();
    Ok(RFFrame {
        transducer_id: spec.id.clone(),
        lines: rays.len(),
        samples_per_line: geometry.rf_samples_per_line,
        sample_rate_hz: geometry.rf_sample_rate_hz,
        sound_speed_m_s: phantom.medium.sound_speed_m_s,
        window_start_m: geometry.window_start_m,
        first_angle_deg: geometry.roi_start_deg(),
        angle_step_deg: geometry.line_spacing_deg(),
        data: lines.concat(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedRFFrame {
    pub low: RFFrame,
    pub high: RFFrame,
    /// Mechanical angle of every line, shared by both frames.
    pub line_angles_deg: Vec<f64>,
}

impl PairedRFFrame {
    pub fn is_aligned(&self) -> bool {
        self.low.lines == self.high.lines
            && self.low.lines == self.line_angles_deg.len()
            && (0..self.low.lines).all(|k| self.low.line_angle_deg(k) == self.high.line_angle_deg(k))
    }
}

/// Simulates both elements over identical rays. Noise draws are
/// independent per frame, seeded from the `low`/`high` substreams of `seed`.
pub fn simulate_pair(
    phantom: &PhantomDef,
    geometry: &ProbeGeometry,
    low: &TransducerSpec,
    high: &TransducerSpec,
    noise_sigma: f64,
    seed: u64,
) -> Result<PairedRFFrame> {
    if low.mount != Mount::Top || high.mount != Mount::Bottom {
        return Err(Error::MountMismatch);
    }
    log::debug!(
        "simulating pair: {} targets, {} lines, seed {seed}",
        phantom.target_count(),
        geometry.scanlines_per_frame
    );
    let low_frame = simulate_frame(phantom, low, geometry, noise_sigma, substream_seed(seed, "low"))?;
    let high_frame = simulate_frame(phantom, high, geometry, noise_sigma, substream_seed(seed, "high"))?;
    Ok(PairedRFFrame {
        low: low_frame,
        high: high_frame,
        line_angles_deg: scanline_angles(geometry),
    })
}

pub const RF_MAGIC: [u8; 4] = *b"EURF";
pub const RF_VERSION: u16 = 1;

impl RFFrame {
    /// Binary layout, all little-endian:
    ///
    /// ```text
    /// offset  size  field
    ///      0     4  magic "EURF"
    ///      4     2  version (u16) = 1
    ///      6     2  transducer id length in bytes (u16)
    ///      8     4  lines (u32)
    ///     12     4  samples per line (u32)
    ///     16     8  sample rate, Hz (f64)
    ///     24     8  sound speed, m/s (f64)
    ///     32     8  window start radius, m (f64)
    ///     40     8  first line angle, degrees (f64)
    ///     48     8  line angle step, degrees (f64)
    ///     56     n  transducer id, UTF-8
    ///   56+n  4*L*S samples (f32), line-major
    /// ```
    pub fn to_bytes(&self) -> Vec<u8> {
        let id = self.transducer_id.as_bytes();
        let mut out = Vec::with_capacity(56 + id.len() + 4 * self.data.len());
        out.extend_from_slice(&RF_MAGIC);
        out.extend_from_slice(&RF_VERSION.to_le_bytes());
        out.extend_from_slice(&(id.len() as u16).to_le_bytes());
        out.extend_from_slice(&(self.lines as u32).to_le_bytes());
        out.extend_from_slice(&(self.samples_per_line as u32).to_le_bytes());
        for v in [
            self.sample_rate_hz,
            self.sound_speed_m_s,
            self.window_start_m,
            self.first_angle_deg,
            self.angle_step_deg,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(id);
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            what: "RF frame",
            reason: reason.to_string(),
        };
        if bytes.len() < 56 || bytes[..4] != RF_MAGIC {
            return Err(bad("missing magic"));
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        if u16_at(4) != RF_VERSION {
            return Err(bad("unsupported version"));
        }
        let id_len = u16_at(6) as usize;
        let lines = u32_at(8) as usize;
        let samples_per_line = u32_at(12) as usize;
        let body = 56 + id_len;
        if bytes.len() != body + 4 * lines * samples_per_line {
            return Err(bad("length does not match header"));
        }
        let transducer_id = std::str::from_utf8(&bytes[56..body])
            .map_err(|_| bad("transducer id is not UTF-8"))?
            .to_string();
        let data = bytes[body..]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Ok(RFFrame {
            transducer_id,
            lines,
            samples_per_line,
            sample_rate_hz: f64_at(16),
            sound_speed_m_s: f64_at(24),
            window_start_m: f64_at(32),
            first_angle_deg: f64_at(40),
            angle_step_deg: f64_at(48),
            data,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{make_wire_phantom, Scatterer};

    #[test]
    fn default_geometry() {
        let g = ProbeGeometry::default();
        g.validate().unwrap();
        assert_eq!(g.rf_samples_per_line, 2598);
        assert!((g.frame_rate_fps() / 21.55 - 1.0).abs() < 0.005);
        let a = scanline_angles(&g);
        assert_eq!(a.len(), 436);
        assert!((a[1] - a[0] - 106.0 / 435.0).abs() < 1e-12);
        assert_eq!(a[435] - a[0], 106.0);
        assert!((a[0] + a[435]) / 2.0 == 180.0);
    }

    #[test]
    fn two_line_geometry() {
        let g = ProbeGeometry {
            scanlines_per_frame: 2,
            ..ProbeGeometry::default()
        };
        assert_eq!(scanline_angles(&g), vec![127.0, 233.0]);
    }

    #[test]
    fn geometry_rejects_bad_values() {
        let g = ProbeGeometry {
            scanlines_per_frame: 1,
            ..Default::default()
        };
        assert!(g.validate().is_err());
        let mut g = ProbeGeometry::default();
        g.pillar_angles_deg.push(170.0);
        assert!(g.validate().is_err());
        let g = ProbeGeometry {
            phase_offset_deg: 90.0,
            ..Default::default()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn empty_phantom_gives_zero_line() {
        let p = make_wire_phantom(&[]).unwrap();
        let g = ProbeGeometry::default();
        let ray = scanline_rays(&g)[200];
        let line = synthesize_rf_line(
            &p,
            &TransducerSpec::high_frequency(),
            &g,
            &ray,
            0.0,
            &mut line_rng(0, 0),
        )
        .unwrap();
        assert!(line.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn undersampling_is_rejected() {
        let p = make_wire_phantom(&[]).unwrap();
        let g = ProbeGeometry {
            rf_sample_rate_hz: 50e6,
            ..ProbeGeometry::default()
        };
        let ray = scanline_rays(&g)[0];
        let r = synthesize_rf_line(
            &p,
            &TransducerSpec::high_frequency(),
            &g,
            &ray,
            0.0,
            &mut line_rng(0, 0),
        );
        assert!(matches!(r, Err(Error::Undersampled { .. })));
    }

    #[test]
    fn doubling_reflectivity_doubles_line() {
        let g = ProbeGeometry::default();
        let ray = scanline_rays(&g)[218];
        let mut p = make_wire_phantom(&[4e-3, 9e-3]).unwrap();
        p.scatterers.push(Scatterer {
            position: Position::new(0.3e-3, 8e-3),
            reflectivity: -0.7,
        });
        let spec = TransducerSpec::low_frequency();
        let a = synthesize_rf_line(&p, &spec, &g, &ray, 0.0, &mut line_rng(1, 1)).unwrap();
        for w in &mut p.wires {
            w.reflectivity *= 2.0;
        }
        for s in &mut p.scatterers {
            s.reflectivity *= 2.0;
        }
        let b = synthesize_rf_line(&p, &spec, &g, &ray, 0.0, &mut line_rng(1, 1)).unwrap();
        assert!(a.iter().any(|&v| v != 0.0));
        assert!(a.iter().zip(&b).all(|(x, y)| 2.0 * x == *y));
    }

    #[test]
    fn mount_mismatch() {
        let p = make_wire_phantom(&[]).unwrap();
        let g = ProbeGeometry::default();
        let lo = TransducerSpec::low_frequency();
        let hi = TransducerSpec::high_frequency();
        assert!(matches!(
            simulate_pair(&p, &g, &hi, &lo, 0.0, 1),
            Err(Error::MountMismatch)
        ));
    }

    #[test]
    fn noise_is_deterministic_and_independent() {
        let p = make_wire_phantom(&[]).unwrap();
        let g = ProbeGeometry {
            scanlines_per_frame: 8,
            ..ProbeGeometry::default()
        };
        let lo = TransducerSpec::low_frequency();
        let hi = TransducerSpec::high_frequency();
        let a = simulate_pair(&p, &g, &lo, &hi, 0.5, 42).unwrap();
        let b = simulate_pair(&p, &g, &lo, &hi, 0.5, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.is_aligned());
        assert_ne!(a.low.data, a.high.data);
        let quiet = simulate_pair(&p, &g, &lo, &hi, 0.0, 42).unwrap();
        assert!(quiet.low.data.iter().chain(&quiet.high.data).all(|&v| v == 0.0));
    }

    #[test]
    fn rf_binary_round_trip() {
        let p = make_wire_phantom(&[6e-3]).unwrap();
        let g = ProbeGeometry {
            scanlines_per_frame: 5,
            ..ProbeGeometry::default()
        };
        let f = simulate_frame(&p, &TransducerSpec::high_frequency(), &g, 0.1, 3).unwrap();
        let bytes = f.to_bytes();
        assert_eq!(&bytes[..4], b"EURF");
        assert_eq!(bytes.len(), 56 + 4 + 4 * 5 * 2598);
        let back = RFFrame::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.transducer_id, "high");
        for (a, b) in f.data.iter().zip(&back.data) {
            assert_eq!(*a as f32, *b as f32);
        }
        assert!(RFFrame::from_bytes(&bytes[..100]).is_err());
    }
}
