//! Evaluation metrics: coding gain, AM-GM balance, Welch spectra, spectral
//! flatness, autocorrelation and convergence reports.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ChannelOutputs;
use crate::signal::Signal;

/// Subband coding gain report: input variance over the geometric mean of the
/// per-channel error variances, in dB.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodingGainReport {
    pub input_variance: f64,
    pub channel_variances: Vec<f64>,
    /// None when a channel variance is exactly zero (gain is unbounded).
    pub gain_db: Option<f64>,
    pub infinite_gain: bool,
    pub samples_used: usize,
    pub transient_discarded: usize,
}

fn variance(x: impl Iterator<Item = f64> + Clone) -> (f64, usize) {
    let n = x.clone().count();
    if n == 0 {
        return (0.0, 0);
    }
    let mean = x.clone().sum::<f64>() / n as f64;
    let var = x.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (var, n)
}

/// Coding gain over the retained (post-transient) region.
///
/// `discard_fraction` of the leading blocks is dropped from both the input
/// and the channel outputs before the variances are measured.
pub fn coding_gain(
    input: &Signal,
    outputs: &[ChannelOutputs],
    discard_fraction: f64,
) -> Result<CodingGainReport> {
    if outputs.is_empty() {
        return Err(Error::InsufficientData("no output blocks".into()));
    }
    let m = outputs[0].values.len();
    let skip = ((outputs.len() as f64) * discard_fraction).floor() as usize;
    let retained = outputs.len() - skip;
    if retained < 100 {
        return Err(Error::InsufficientData(format!(
            "{} retained blocks; need >= 100",
            retained
        )));
    }
    let mut channel_variances = Vec::with_capacity(m);
    for i in 0..m {
        let (v, _) = variance(outputs[skip..].iter().map(|o| o.values[i]));
        channel_variances.push(v);
    }
    // matching input region: samples consumed by the retained blocks
    let first = skip * m + 1;
    let last = outputs.len() * m;
    let (input_variance, used) = variance(
        (first..=last.min(input.len() - 1)).map(|k| input.get(k as isize)),
    );
    let infinite = channel_variances.iter().any(|v| *v == 0.0);
    let gain_db = if infinite {
        None
    } else {
        let log_geo = channel_variances.iter().map(|v| v.ln()).sum::<f64>() / m as f64;
        Some(10.0 * (input_variance.ln() - log_geo) / std::f64::consts::LN_10)
    };
    Ok(CodingGainReport {
        input_variance,
        channel_variances,
        gain_db,
        infinite_gain: infinite,
        samples_used: used,
        transient_discarded: skip,
    })
}

/// Arithmetic/geometric mean balance of the channel variances; the ratio is 1
/// exactly when all variances are equal (the optimum-gain condition).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmGmReport {
    pub arith_mean: f64,
    pub geo_mean: f64,
    pub ratio: f64,
}

pub fn am_gm_report(variances: &[f64]) -> Result<AmGmReport> {
    if variances.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 variances".into()));
    }
    if variances.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidParameter("negative variance".into()));
    }
    let m = variances.len() as f64;
    let arith = variances.iter().sum::<f64>() / m;
    let geo = (variances.iter().map(|v| v.max(1e-300).ln()).sum::<f64>() / m).exp();
    Ok(AmGmReport {
        arith_mean: arith,
        geo_mean: geo,
        ratio: arith / geo,
    })
}

/// Averaged-periodogram power spectral density estimate on [0, pi].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Normalized frequencies in [0, pi].
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub segment_len: usize,
    pub overlap_fraction: f64,
    pub segments_averaged: usize,
}

/// Welch PSD with a Hann window. The normalization contract: the mean of the
/// one-sided power values equals the signal variance (within estimator
/// scatter), so a unit-variance white input has mean power 1.
pub fn welch_psd(s: &Signal, segment_len: usize, overlap_fraction: f64) -> Result<SpectrumEstimate> {
    if !segment_len.is_power_of_two() || segment_len < 2 {
        return Err(Error::InvalidParameter(format!(
            "segment length {} is not a power of two",
            segment_len
        )));
    }
    if s.len() < segment_len {
        return Err(Error::InsufficientData(format!(
            "signal of {} samples shorter than one segment ({})",
            s.len(),
            segment_len
        )));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::InvalidParameter(format!(
            "overlap {} outside [0, 1)",
            overlap_fraction
        )));
    }
    // symmetric Hann: time reversal of a segment maps the window onto itself
    let window: Vec<f64> = (0..segment_len)
        .map(|k| {
            let x = std::f64::consts::PI * k as f64 / (segment_len - 1) as f64;
            x.sin() * x.sin()
        })
        .collect();
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let hop = ((segment_len as f64) * (1.0 - overlap_fraction)).round().max(1.0) as usize;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(segment_len);
    let bins = segment_len / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut segments = 0usize;
    let mut start = 0usize;
    let data = s.samples();
    while start + segment_len <= data.len() {
        let mut buf: Vec<Complex<f64>> = data[start..start + segment_len]
            .iter()
            .zip(window.iter())
            .map(|(x, w)| Complex::new(x * w, 0.0))
            .collect();
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k].norm_sqr() / win_energy;
        }
        segments += 1;
        start += hop;
    }
    for a in acc.iter_mut() {
        *a /= segments as f64;
    }
    let frequencies = (0..bins)
        .map(|k| std::f64::consts::PI * k as f64 / (segment_len / 2) as f64)
        .collect();
    Ok(SpectrumEstimate {
        frequencies,
        power: acc,
        segment_len,
        overlap_fraction,
        segments_averaged: segments,
    })
}

/// Geometric over arithmetic mean of the PSD bins: 1 for a flat spectrum,
/// near 0 for a line spectrum. Bins are floored at 1e-300.
pub fn spectral_flatness(spec: &SpectrumEstimate) -> f64 {
    let n = spec.power.len() as f64;
    let log_geo = spec
        .power
        .iter()
        .map(|p| p.max(1e-300).ln())
        .sum::<f64>()
        / n;
    let arith = spec.power.iter().sum::<f64>() / n;
    if arith <= 0.0 {
        return 0.0;
    }
    (log_geo.exp() / arith).min(1.0)
}

/// Biased autocorrelation estimates rho(1..max_lag), normalized by lag 0,
/// with the mean removed.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return vec![0.0; max_lag + 1];
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let mut r = vec![0.0; max_lag + 1];
    r[0] = 1.0;
    if c0 == 0.0 {
        return r;
    }
    for (lag, slot) in r.iter_mut().enumerate().skip(1) {
        if lag >= n {
            break;
        }
        let c: f64 = (lag..n)
            .map(|k| (x[k] - mean) * (x[k - lag] - mean))
            .sum();
        *slot = c / c0;
    }
    r
}

/// First index after which every trajectory value stays within
/// `tol_fraction * max(|final|, floor)` of the final value; None when the
/// trajectory never settles.
pub fn convergence_report(trajectory: &[f64], tol_fraction: f64, floor: f64) -> Option<usize> {
    let last = *trajectory.last()?;
    let tol = tol_fraction * last.abs().max(floor);
    let mut idx = trajectory.len();
    for (k, v) in trajectory.iter().enumerate().rev() {
        if (v - last).abs() <= tol {
            idx = k;
        } else {
            break;
        }
    }
    if idx < trajectory.len() {
        Some(idx)
    } else {
        None
    }
}
