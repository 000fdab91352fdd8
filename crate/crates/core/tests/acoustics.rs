use std::f64::consts::PI;

use proptest::prelude::*;

use eustwin::acoustics::{
    attenuation_factor, lateral_beam_fwhm, make_pulse, measure_half_amplitude_band, psf_amplitude, Medium,
    TransducerSpec,
};

/// Amplitude spectrum of `samples` at `f`, by direct summation.
fn dtft_mag(samples: &[f64], fs: f64, f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &x) in samples.iter().enumerate() {
        let w = 2.0 * PI * f * n as f64 / fs;
        re += x * w.cos();
        im -= x * w.sin();
    }
    re.hypot(im)
}

/// Half-amplitude crossings found by bisection on the direct spectrum.
fn oracle_band(samples: &[f64], fs: f64, f0: f64) -> (f64, f64) {
    let peak = (0..=2000)
        .map(|i| dtft_mag(samples, fs, f0 * (0.8 + 0.4 * i as f64 / 2000.0)))
        .fold(0.0, f64::max);
    let half = peak / 2.0;
    let bisect = |mut inside: f64, mut outside: f64| {
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if dtft_mag(samples, fs, mid) > half {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        0.5 * (inside + outside)
    };
    (bisect(f0, 0.1 * f0), bisect(f0, 2.5 * f0))
}

/// Half-maximum width of a sampled profile by linear interpolation.
fn oracle_fwhm(profile: &[f64], spacing: f64) -> f64 {
    let peak = profile.iter().cloned().fold(f64::MIN, f64::max);
    let p = profile.iter().position(|&v| v == peak).unwrap();
    let h = peak / 2.0;
    let mut l = p;
    while profile[l - 1] > h {
        l -= 1;
    }
    let mut r = p;
    while profile[r + 1] > h {
        r += 1;
    }
    let left = (l - 1) as f64 + (h - profile[l - 1]) / (profile[l] - profile[l - 1]);
    let right = r as f64 + (profile[r] - h) / (profile[r] - profile[r + 1]);
    (right - left) * spacing
}

/// Envelope by a naive discrete Hilbert transform.
fn naive_envelope(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let spectrum: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let mut acc = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let w = 2.0 * PI * (k * t) as f64 / n as f64;
                acc.0 += v * w.cos();
                acc.1 -= v * w.sin();
            }
            acc
        })
        .collect();
    (0..n)
        .map(|t| {
            let mut acc = (0.0, 0.0);
            for (k, &(re, im)) in spectrum.iter().enumerate() {
                let gain = if k == 0 || 2 * k == n {
                    1.0
                } else if 2 * k < n {
                    2.0
                } else {
                    0.0
                };
                let w = 2.0 * PI * (k * t) as f64 / n as f64;
                acc.0 += gain * (re * w.cos() - im * w.sin());
                acc.1 += gain * (re * w.sin() + im * w.cos());
            }
            acc.0.hypot(acc.1) / n as f64
        })
        .collect()
}

#[test]
fn low_preset_band_edges() {
    let spec = TransducerSpec::low_frequency();
    let pulse = make_pulse(&spec, 100e6).unwrap();
    let (lo, hi) = oracle_band(&pulse.samples, 100e6, spec.center_frequency_hz);
    // Oracle values, frozen.
    assert!((lo - 3.774e6).abs() < 5e3, "oracle lo {lo}");
    assert!((hi - 6.426e6).abs() < 5e3, "oracle hi {hi}");
    let (mlo, mhi) = measure_half_amplitude_band(&pulse);
    assert!((mlo - lo).abs() < 2e3, "{mlo} vs {lo}");
    assert!((mhi - hi).abs() < 2e3, "{mhi} vs {hi}");
}

#[test]
fn fractional_bandwidth_within_two_percent() {
    for spec in [TransducerSpec::low_frequency(), TransducerSpec::high_frequency()] {
        let pulse = make_pulse(&spec, 100e6).unwrap();
        let (lo, hi) = measure_half_amplitude_band(&pulse);
        let fbw = (hi - lo) / spec.center_frequency_hz;
        let rel = (fbw - spec.fractional_bandwidth).abs() / spec.fractional_bandwidth;
        assert!(rel < 0.02, "{}: {fbw}", spec.id);
    }
}

#[test]
fn pulse_peak_is_unity() {
    for spec in [TransducerSpec::low_frequency(), TransducerSpec::high_frequency()] {
        let pulse = make_pulse(&spec, 100e6).unwrap();
        assert_eq!(pulse.samples[pulse.t0_index], 1.0);
        assert_eq!(pulse.time_s(pulse.t0_index), 0.0);
    }
}

#[test]
fn high_preset_envelope_fwhm() {
    let spec = TransducerSpec::high_frequency();
    let sigma = 2.354_820_045 / (2.0 * PI * 0.51 * 18.3e6);
    assert!((spec.pulse_sigma_s() - sigma).abs() / sigma < 1e-9);
    // Finer sampling gives the oracle enough points across the envelope.
    let fs = 1e9;
    let pulse = make_pulse(&spec, fs).unwrap();
    let width = oracle_fwhm(&naive_envelope(&pulse.samples), 1.0 / fs);
    let expected = 2.354_820_045 * sigma;
    assert!((width - expected).abs() / expected < 0.02, "{width} vs {expected}");
}

#[test]
fn envelope_fwhm_recovered_by_imaging_envelope() {
    for spec in [TransducerSpec::low_frequency(), TransducerSpec::high_frequency()] {
        let fs = 400e6;
        let mut padded = vec![0.0; 512];
        padded.extend(make_pulse(&spec, fs).unwrap().samples);
        padded.extend(vec![0.0; 512]);
        let width = oracle_fwhm(&eustwin::imaging::envelope(&padded), 1.0 / fs);
        let expected = spec.envelope_fwhm_s();
        assert!(
            (width - expected).abs() / expected < 0.02,
            "{}: {width} vs {expected}",
            spec.id
        );
    }
}

#[test]
fn beam_width_at_focus_and_ordering() {
    let water = Medium::water();
    let lo = TransducerSpec::low_frequency();
    let hi = TransducerSpec::high_frequency();
    for spec in [&lo, &hi] {
        let wf = spec.wavelength_m(&water) * spec.focal_depth_m / spec.aperture_diameter_m;
        assert_eq!(lateral_beam_fwhm(spec, spec.focal_depth_m, &water), wf);
        let at_2f = lateral_beam_fwhm(spec, 2.0 * spec.focal_depth_m, &water);
        assert!((at_2f - wf * 2f64.sqrt()).abs() < 1e-15);
    }
    assert!(lateral_beam_fwhm(&hi, hi.focal_depth_m, &water) < lateral_beam_fwhm(&lo, lo.focal_depth_m, &water));
    // 1540 / 5.1e6 * 20 / 3 and 1540 / 18.3e6 * 20 / 3, in meters.
    assert!((lateral_beam_fwhm(&lo, 0.02, &water) - 2.013_071_9e-3).abs() < 1e-9);
    assert!((lateral_beam_fwhm(&hi, 0.02, &water) - 5.610_200_4e-4).abs() < 1e-9);
}

#[test]
fn attenuation_reference_value() {
    let lo = TransducerSpec::low_frequency();
    let tissue = Medium::tissue();
    assert_eq!(attenuation_factor(&lo, 0.0, &tissue), 1.0);
    assert!((attenuation_factor(&lo, 0.01, &tissue) - 0.555_904_3).abs() < 1e-6);
}

#[test]
fn psf_axial_fwhm_matches_closed_form() {
    let water = Medium::water();
    for spec in [TransducerSpec::low_frequency(), TransducerSpec::high_frequency()] {
        let step = 1e-7;
        let profile: Vec<f64> = (-10_000..=10_000)
            .map(|i| psf_amplitude(&spec, i as f64 * step, 0.0, spec.focal_depth_m, &water))
            .collect();
        let width = oracle_fwhm(&profile, step);
        let closed = spec.axial_fwhm_m(&water);
        assert!(
            (width - closed).abs() / closed < 0.02,
            "{}: {width} vs {closed}",
            spec.id
        );
    }
    let lo = TransducerSpec::low_frequency();
    let hi = TransducerSpec::high_frequency();
    assert!(hi.axial_fwhm_m(&water) < lo.axial_fwhm_m(&water));
}

#[test]
fn psf_half_max_at_half_width() {
    let water = Medium::water();
    let spec = TransducerSpec::high_frequency();
    for depth in [0.005, 0.01, 0.02] {
        let w = lateral_beam_fwhm(&spec, depth, &water);
        assert_eq!(psf_amplitude(&spec, 0.0, 0.0, depth, &water), 1.0);
        assert!((psf_amplitude(&spec, 0.0, w / 2.0, depth, &water) - 0.5).abs() < 1e-6);
    }
}

proptest! {
    #[test]
    fn attenuation_decreases_with_depth_and_frequency(
        z1 in 1e-4f64..0.05, dz in 1e-5f64..0.05, f in 1e6f64..30e6, df in 1e5f64..10e6,
        alpha in 0.01f64..2.0,
    ) {
        let medium = Medium { sound_speed_m_s: 1540.0, attenuation_db_cm_mhz: alpha };
        let mut a = TransducerSpec::low_frequency();
        a.center_frequency_hz = f;
        let mut b = a.clone();
        b.center_frequency_hz = f + df;
        prop_assert!(attenuation_factor(&a, z1 + dz, &medium) < attenuation_factor(&a, z1, &medium));
        prop_assert!(attenuation_factor(&b, z1, &medium) < attenuation_factor(&a, z1, &medium));
    }

    #[test]
    fn beam_width_minimum_at_focus(z in 1e-4f64..0.06) {
        let water = Medium::water();
        let spec = TransducerSpec::high_frequency();
        prop_assert!(lateral_beam_fwhm(&spec, z, &water) >= lateral_beam_fwhm(&spec, spec.focal_depth_m, &water));
    }
}
