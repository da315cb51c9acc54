use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::Trajectory;
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparcParams {
    /// Zero padding to `2^(ceil(log2 n) + pad_level)` points.
    pub pad_level: u32,
    /// Maximum cutoff frequency in Hz.
    pub max_cutoff: f64,
    pub amplitude_threshold: f64,
}

impl Default for SparcParams {
    fn default() -> Self {
        SparcParams {
            pad_level: 4,
            max_cutoff: 10.0,
            amplitude_threshold: 0.05,
        }
    }
}

pub const MIN_SPARC_SAMPLES: usize = 8;

/// Speed magnitudes from forward differences of consecutive samples.
pub fn speed_profile<T: Scalar>(traj: &Trajectory<T>) -> Vec<f64> {
    let x = traj.samples();
    (1..x.nrows())
        .map(|i| {
            x.row(i)
                .iter()
                .zip(x.row(i - 1))
                .map(|(a, b)| (a.f64() - b.f64()).powi(2))
                .sum::<f64>()
                .sqrt()
                / traj.dt()
        })
        .collect()
}

/// Negated arc length of the DC-normalized magnitude spectrum of the speed
/// profile, over the band up to the adaptive cutoff. Frequencies are capped
/// at Nyquist. A motionless trajectory scores 0.
pub fn spectral_arc_length<T: Scalar>(traj: &Trajectory<T>, params: &SparcParams) -> Result<f64> {
    if traj.len() < MIN_SPARC_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "spectral arc length needs at least {MIN_SPARC_SAMPLES} samples, got {}",
            traj.len()
        )));
    }
    let speed = speed_profile(traj);
    let n = speed.len();
    let nfft = 1usize << ((n as f64).log2().ceil() as u32 + params.pad_level);
    let mut buf: Vec<Complex<f64>> = speed.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(nfft, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let dc = buf[0].norm();
    if dc <= 0.0 {
        return Ok(0.0);
    }
    let fs = 1.0 / traj.dt();
    let df = fs / nfft as f64;
    let band = params.max_cutoff.min(fs / 2.0);
    let freqs: Vec<f64> = (0..=nfft / 2).map(|k| k as f64 * df).take_while(|&f| f <= band).collect();
    let mags: Vec<f64> = (0..freqs.len()).map(|k| buf[k].norm() / dc).collect();
    let above: Vec<usize> = (0..mags.len()).filter(|&k| mags[k] >= params.amplitude_threshold).collect();
    let (lo, hi) = match (above.first(), above.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => (lo, hi),
        _ => return Ok(0.0),
    };
    let span = freqs[hi] - freqs[lo];
    let length: f64 = (lo..hi)
        .map(|k| {
            let dfk = (freqs[k + 1] - freqs[k]) / span;
            let dm = mags[k + 1] - mags[k];
            (dfk * dfk + dm * dm).sqrt()
        })
        .sum();
    Ok(-length)
}
