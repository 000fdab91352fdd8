//! Transducer and propagation model.
//!
//! Each element is described by its center frequency and −6 dB fractional
//! bandwidth. The emitted pulse is a Gaussian-modulated cosine whose
//! amplitude spectrum is a Gaussian centered on the carrier, so the pulse
//! duration follows in closed form from the bandwidth:
//!
//! ```text
//! sigma_t = 2 sqrt(2 ln 2) / (2 pi * fbw * f0)
//! ```
//!
//! The point spread function is separable: the pulse envelope along the beam
//! times a Gaussian across it, whose width follows a focused-beam model.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full width at half maximum of a unit Gaussian, `2 sqrt(2 ln 2)`.
pub const GAUSSIAN_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Pulse truncation, in units of the envelope sigma.
pub const PULSE_TRUNCATION_SIGMAS: f64 = 4.0;

/// Side of the reflector an element is mounted on. The two sides see the
/// same image plane half a revolution apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mount {
    Top,
    Bottom,
}

impl Mount {
    /// Rotational phase of the beam relative to the top element, in degrees.
    pub fn phase_offset_deg(self) -> f64 {
        match self {
            Mount::Top => 0.0,
            Mount::Bottom => 180.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransducerSpec {
    pub id: String,
    pub center_frequency_hz: f64,
    /// −6 dB fractional bandwidth of the amplitude spectrum.
    pub fractional_bandwidth: f64,
    pub focal_depth_m: f64,
    pub aperture_diameter_m: f64,
    pub mount: Mount,
}

impl TransducerSpec {
    /// 5.1 MHz, 52 % bandwidth element mounted above the reflector.
    pub fn low_frequency() -> Self {
        TransducerSpec {
            id: "low".to_string(),
            center_frequency_hz: 5.1e6,
            fractional_bandwidth: 0.52,
            focal_depth_m: 20e-3,
            aperture_diameter_m: 3e-3,
            mount: Mount::Top,
        }
    }

    /// 18.3 MHz, 51 % bandwidth element mounted below the reflector.
    pub fn high_frequency() -> Self {
        TransducerSpec {
            id: "high".to_string(),
            center_frequency_hz: 18.3e6,
            fractional_bandwidth: 0.51,
            focal_depth_m: 20e-3,
            aperture_diameter_m: 3e-3,
            mount: Mount::Bottom,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_frequency_hz > 0.0 && self.center_frequency_hz.is_finite()) {
            return Err(Error::invalid("center_frequency_hz", "must be positive"));
        }
        if !(self.fractional_bandwidth > 0.0 && self.fractional_bandwidth < 2.0) {
            return Err(Error::invalid(
                "fractional_bandwidth",
                format!("{} is outside (0, 2)", self.fractional_bandwidth),
            ));
        }
        if !(self.focal_depth_m > 0.0 && self.focal_depth_m.is_finite()) {
            return Err(Error::invalid("focal_depth_m", "must be positive"));
        }
        if !(self.aperture_diameter_m > 0.0 && self.aperture_diameter_m.is_finite()) {
            return Err(Error::invalid("aperture_diameter_m", "must be positive"));
        }
        Ok(())
    }

    /// Standard deviation of the Gaussian pulse envelope, in seconds.
    pub fn pulse_sigma_s(&self) -> f64 {
        GAUSSIAN_FWHM_PER_SIGMA / (2.0 * PI * self.fractional_bandwidth * self.center_frequency_hz)
    }

    /// FWHM of the pulse envelope, in seconds.
    pub fn envelope_fwhm_s(&self) -> f64 {
        GAUSSIAN_FWHM_PER_SIGMA * self.pulse_sigma_s()
    }

    pub fn wavelength_m(&self, medium: &Medium) -> f64 {
        medium.sound_speed_m_s / self.center_frequency_hz
    }

    /// Closed-form axial resolution `c * envelope_fwhm / 2`.
    pub fn axial_fwhm_m(&self, medium: &Medium) -> f64 {
        medium.sound_speed_m_s * self.envelope_fwhm_s() / 2.0
    }

    pub fn minimum_sample_rate_hz(&self) -> f64 {
        4.0 * self.center_frequency_hz
    }

    pub fn check_sample_rate(&self, sample_rate_hz: f64) -> Result<()> {
        let required_hz = self.minimum_sample_rate_hz();
        if sample_rate_hz < required_hz {
            return Err(Error::Undersampled {
                sample_rate_hz,
                required_hz,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Medium {
    pub sound_speed_m_s: f64,
    /// Attenuation slope in dB/(cm·MHz).
    pub attenuation_db_cm_mhz: f64,
}

impl Medium {
    pub fn water() -> Self {
        Medium {
            sound_speed_m_s: 1540.0,
            attenuation_db_cm_mhz: 0.0022,
        }
    }

    pub fn tissue() -> Self {
        Medium {
            sound_speed_m_s: 1540.0,
            attenuation_db_cm_mhz: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sound_speed_m_s > 0.0 && self.sound_speed_m_s.is_finite()) {
            return Err(Error::invalid("sound_speed_m_s", "must be positive"));
        }
        if !(self.attenuation_db_cm_mhz >= 0.0 && self.attenuation_db_cm_mhz.is_finite()) {
            return Err(Error::invalid("attenuation_db_cm_mhz", "must be non-negative"));
        }
        Ok(())
    }
}

/// Sampled, peak-normalized transmit pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseWaveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    /// Index of `t = 0`.
    pub t0_index: usize,
}

impl PulseWaveform {
    pub fn time_s(&self, index: usize) -> f64 {
        (index as f64 - self.t0_index as f64) / self.sample_rate_hz
    }
}

/// Samples `exp(-t^2 / 2 sigma^2) cos(2 pi f0 t)` over `±4 sigma`.
pub fn make_pulse(spec: &TransducerSpec, sample_rate_hz: f64) -> Result<PulseWaveform> {
    spec.validate()?;
    spec.check_sample_rate(sample_rate_hz)?;
    let sigma = spec.pulse_sigma_s();
    let f0 = spec.center_frequency_hz;
    let half = (PULSE_TRUNCATION_SIGMAS * sigma * sample_rate_hz).floor() as usize;
    let samples = (0..=2 * half)
        .map(|i| {
            let t = (i as f64 - half as f64) / sample_rate_hz;
            (-t * t / (2.0 * sigma * sigma)).exp() * (2.0 * PI * f0 * t).cos()
        })
        .collect();
    Ok(PulseWaveform {
        samples,
        sample_rate_hz,
        t0_index: half,
    })
}

/// Envelope of [`make_pulse`] on the same sample grid (`±4 sigma`, centered).
pub fn pulse_envelope(spec: &TransducerSpec, sample_rate_hz: f64) -> Vec<f64> {
    let sigma = spec.pulse_sigma_s();
    let half = (PULSE_TRUNCATION_SIGMAS * sigma * sample_rate_hz).floor() as usize;
    (0..=2 * half)
        .map(|i| {
            let t = (i as f64 - half as f64) / sample_rate_hz;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

/// −6 dB fractional bandwidth of a pulse's amplitude spectrum, measured by a
/// zero-padded FFT with linear interpolation of the half-amplitude crossings.
///
/// Returns `(f_low, f_high)` in Hz.
pub fn measure_half_amplitude_band(pulse: &PulseWaveform) -> (f64, f64) {
    let n = (pulse.samples.len() * 64).next_power_of_two().max(1 << 16);
    let mut buf: Vec<Complex64> = pulse.samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm()).collect();
    let (peak_idx, peak) = mag
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
    let half = 0.5 * peak;
    let df = pulse.sample_rate_hz / n as f64;
    let mut lo = 0.0;
    for i in (1..=peak_idx).rev() {
        if mag[i - 1] < half {
            let frac = (mag[i] - half) / (mag[i] - mag[i - 1]);
            lo = (i as f64 - frac) * df;
            break;
        }
    }
    let mut hi = (mag.len() - 1) as f64 * df;
    for i in peak_idx..mag.len() - 1 {
        if mag[i + 1] < half {
            let frac = (mag[i] - half) / (mag[i] - mag[i + 1]);
            hi = (i as f64 + frac) * df;
            break;
        }
    }
    (lo, hi)
}

/// Lateral −6 dB beam width at `depth_m`:
/// `w(z) = w_f sqrt(1 + ((z - F) / F)^2)` with `w_f = lambda F / D`.
pub fn lateral_beam_fwhm(spec: &TransducerSpec, depth_m: f64, medium: &Medium) -> f64 {
    let focal = spec.focal_depth_m;
    let focal_width = spec.wavelength_m(medium) * focal / spec.aperture_diameter_m;
    let rel = (depth_m - focal) / focal;
    focal_width * (1.0 + rel * rel).sqrt()
}

/// Round-trip amplitude loss `10^(-alpha f 2z / 20)`, `f` in MHz and `z` in cm.
pub fn attenuation_factor(spec: &TransducerSpec, depth_m: f64, medium: &Medium) -> f64 {
    let f_mhz = spec.center_frequency_hz * 1e-6;
    let z_cm = depth_m * 100.0;
    10f64.powf(-(medium.attenuation_db_cm_mhz * f_mhz * 2.0 * z_cm) / 20.0)
}

/// Gaussian with the given FWHM, unit peak.
pub(crate) fn gaussian_by_fwhm(x: f64, fwhm: f64) -> f64 {
    (-4.0 * LN_2 * (x / fwhm) * (x / fwhm)).exp()
}

/// Separable PSF amplitude: pulse envelope at `2 * axial / c` times the
/// lateral Gaussian of width [`lateral_beam_fwhm`]. Unity at the origin.
pub fn psf_amplitude(
    spec: &TransducerSpec,
    axial_offset_m: f64,
    lateral_offset_m: f64,
    depth_m: f64,
    medium: &Medium,
) -> f64 {
    let sigma = spec.pulse_sigma_s();
    let t = 2.0 * axial_offset_m / medium.sound_speed_m_s;
    let axial = (-t * t / (2.0 * sigma * sigma)).exp();
    let lateral = gaussian_by_fwhm(lateral_offset_m, lateral_beam_fwhm(spec, depth_m, medium));
    axial * lateral
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn presets_are_valid_and_distinct() {
        let lo = TransducerSpec::low_frequency();
        let hi = TransducerSpec::high_frequency();
        lo.validate().unwrap();
        hi.validate().unwrap();
        assert_ne!(lo.mount, hi.mount);
        assert_eq!(lo.center_frequency_hz, 5.1e6);
        assert_eq!(hi.center_frequency_hz, 18.3e6);
        assert_eq!(Mount::Bottom.phase_offset_deg(), 180.0);
    }

    #[test]
    fn invalid_bandwidth_and_undersampling() {
        let mut spec = TransducerSpec::low_frequency();
        assert!(matches!(make_pulse(&spec, 10e6), Err(Error::Undersampled { .. })));
        spec.fractional_bandwidth = 2.0;
        assert!(matches!(
            make_pulse(&spec, 100e6),
            Err(Error::InvalidParameter {
                field: "fractional_bandwidth",
                ..
            })
        ));
        spec.fractional_bandwidth = 0.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn pulse_peak_is_unity_at_t0() {
        for spec in [TransducerSpec::low_frequency(), TransducerSpec::high_frequency()] {
            let p = make_pulse(&spec, 100e6).unwrap();
            assert_eq!(p.samples[p.t0_index], 1.0);
            let max = p.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            assert!(close(max, 1.0, 1e-12));
            // Truncation tail stays below 1e-3.
            assert!(p.samples[0].abs() < 1e-3);
            let env = pulse_envelope(&spec, 100e6);
            for k in 0..env.len() {
                assert!(close(env[k], env[env.len() - 1 - k], 1e-9));
            }
        }
    }

    #[test]
    fn beam_width_formula() {
        let spec = TransducerSpec::low_frequency();
        let m = Medium::water();
        let wf = m.sound_speed_m_s / spec.center_frequency_hz * spec.focal_depth_m / spec.aperture_diameter_m;
        assert_eq!(lateral_beam_fwhm(&spec, spec.focal_depth_m, &m), wf);
        assert!(close(
            lateral_beam_fwhm(&spec, 2.0 * spec.focal_depth_m, &m),
            wf * 2f64.sqrt(),
            1e-15
        ));
        let hi = TransducerSpec::high_frequency();
        assert!(lateral_beam_fwhm(&hi, hi.focal_depth_m, &m) < lateral_beam_fwhm(&spec, spec.focal_depth_m, &m));
    }

    #[test]
    fn attenuation_values() {
        let lo = TransducerSpec::low_frequency();
        let hi = TransducerSpec::high_frequency();
        let m = Medium::tissue();
        assert_eq!(attenuation_factor(&lo, 0.0, &m), 1.0);
        assert!(close(attenuation_factor(&lo, 0.01, &m), 0.555_904_3, 1e-6));
        assert!(attenuation_factor(&hi, 0.005, &m) < attenuation_factor(&lo, 0.005, &m));
        let mut prev = 1.0;
        for k in 1..50 {
            let a = attenuation_factor(&lo, k as f64 * 1e-3, &m);
            assert!(a < prev);
            prev = a;
        }
    }

    #[test]
    fn psf_half_max_laterally() {
        let spec = TransducerSpec::high_frequency();
        let m = Medium::water();
        assert_eq!(psf_amplitude(&spec, 0.0, 0.0, 0.01, &m), 1.0);
        let w = lateral_beam_fwhm(&spec, 0.01, &m);
        assert!(close(psf_amplitude(&spec, 0.0, w / 2.0, 0.01, &m), 0.5, 1e-6));
        let ax = spec.axial_fwhm_m(&m);
        assert!(close(psf_amplitude(&spec, ax / 2.0, 0.0, 0.01, &m), 0.5, 1e-9));
    }
}
