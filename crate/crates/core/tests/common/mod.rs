//! Naive reference implementations used as test oracles. They favor direct
//! transcription of the formulas over speed.

#![allow(dead_code)]

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pop_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

pub fn esnr(signal: &[f64], noise: &[f64]) -> f64 {
    let max = signal.iter().cloned().fold(f64::MIN, f64::max);
    20.0 * (max / pop_std(noise)).log10()
}

pub fn cnr(t: &[f64], b: &[f64]) -> f64 {
    (mean(t) - mean(b)).abs() / (pop_std(t).powi(2) + pop_std(b).powi(2)).sqrt()
}

pub fn ssnr(s: &[f64]) -> f64 {
    mean(s) / pop_std(s)
}

pub fn mse(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64
}

pub fn rmse(x: &[f64], y: &[f64]) -> f64 {
    mse(x, y).sqrt()
}

pub fn psnr(x: &[f64], y: &[f64], peak: f64) -> f64 {
    10.0 * (peak * peak / mse(x, y)).log10()
}

fn ssim_block(x: &[f64], y: &[f64], l: f64) -> f64 {
    let c1 = (0.01 * l).powi(2);
    let c2 = (0.03 * l).powi(2);
    let (mx, my) = (mean(x), mean(y));
    let n = x.len() as f64;
    let vx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n;
    let vy = y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n;
    let cxy = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

pub fn ssim_global(x: &[f64], y: &[f64], l: f64) -> f64 {
    ssim_block(x, y, l)
}

/// Mean of the SSIM of every `w x w` window that fits inside the image.
pub fn ssim_windowed(x: &[f64], y: &[f64], width: usize, height: usize, w: usize, l: f64) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for top in 0..=height - w {
        for left in 0..=width - w {
            let mut bx = Vec::with_capacity(w * w);
            let mut by = Vec::with_capacity(w * w);
            for r in top..top + w {
                for c in left..left + w {
                    bx.push(x[r * width + c]);
                    by.push(y[r * width + c]);
                }
            }
            total += ssim_block(&bx, &by, l);
            count += 1;
        }
    }
    total / count as f64
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Index and value of the largest element.
pub fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .cloned()
        .enumerate()
        .fold((0, f64::MIN), |a, (i, x)| if x > a.1 { (i, x) } else { a })
}

/// Kolmogorov-Smirnov distance between samples and a Rayleigh law whose
/// scale matches the sample mean square.
pub fn ks_rayleigh(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    let ms = v.iter().map(|x| x * x).sum::<f64>() / n;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = 1.0 - (-x * x / ms).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
