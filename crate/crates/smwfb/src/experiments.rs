//! Benchmark experiment runners.
//!
//! Five experiments drive the whitener over synthetic inputs:
//!
//! 1. coding gain of a four-channel bank on two AR(2) inputs,
//! 2. coding gain as the AR pole radius approaches the unit circle,
//! 3. coding gain versus the number of channels,
//! 4. convergence trajectories of the direct-form taps,
//! 5. input/output spectra for the nine colored test signals
//!    (three excitation distributions through minimum-, maximum- and
//!    mixed-phase coloring filters).
//!
//! Runners are deterministic per seed list and return plain summaries; the
//! CLI layers CSV/JSON output on top. Seeds fan out across worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientEstimator;
use crate::error::{Error, Result};
use crate::lattice::{ChannelOutputs, Whitener, WhitenerConfig};
use crate::metrics::{
    am_gm_report, autocorrelation, coding_gain, spectral_flatness, welch_psd, AmGmReport,
    SpectrumEstimate,
};
use crate::signal::{apply_rational_filter, draw_excitation, generate_ar, ArModel, Excitation, Signal};

/// Fraction of leading blocks discarded before variances are measured.
pub const TRANSIENT_DISCARD: f64 = 0.2;

/// Parameters of one experiment run; echoed into every output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: u8,
    pub channels: usize,
    pub order: usize,
    pub rho: f64,
    pub theta: f64,
    pub excitation: Excitation,
    pub samples: usize,
    pub seeds: Vec<u64>,
    pub lambda: f64,
}

impl ExperimentConfig {
    pub fn defaults(experiment: u8) -> Self {
        let pi = std::f64::consts::PI;
        let (channels, order, rho, theta) = match experiment {
            1 => (4, 4, 0.975, pi / 2.8),
            2 => (4, 4, 0.9, pi / 3.0),
            3 => (4, 5, 0.975, pi / 3.0),
            4 => (2, 3, 0.6, pi / 3.0),
            _ => (2, 8, 0.975, pi / 3.0),
        };
        ExperimentConfig {
            experiment,
            channels,
            order,
            rho,
            theta,
            excitation: Excitation::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            samples: 20_000,
            seeds: (1..=10).collect(),
            lambda: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.experiment) {
            return Err(Error::InvalidParameter(format!(
                "experiment id {} outside 1..=5",
                self.experiment
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("need at least one seed".into()));
        }
        if self.samples < 4 * self.channels {
            return Err(Error::InvalidParameter("too few samples".into()));
        }
        Ok(())
    }
}

/// Feed a signal through a fresh whitener: block n consumes
/// x(M(n-1)+1 .. Mn), so the sample at index 0 never enters the bank.
pub fn run_whitener(signal: &Signal, m: usize, order: usize, lambda: f64) -> Result<(Whitener, Vec<ChannelOutputs>)> {
    let cfg = WhitenerConfig::new(m, order).with_forgetting(lambda);
    let mut w = Whitener::new(cfg)?;
    let blocks = (signal.len().saturating_sub(1)) / m;
    let mut outs = Vec::with_capacity(blocks);
    let data = signal.samples();
    for b in 0..blocks {
        outs.push(w.process_block(&data[b * m + 1..(b + 1) * m + 1])?);
    }
    Ok((w, outs))
}

/// Whitener plus coefficient estimator, recording the full-order tap
/// trajectories (one value per block per channel per tap).
#[allow(clippy::type_complexity)]
pub fn run_with_trajectories(
    signal: &Signal,
    m: usize,
    order: usize,
    lambda: f64,
) -> Result<(Vec<ChannelOutputs>, Vec<Vec<Vec<f64>>>, CoefficientEstimator)> {
    let cfg = WhitenerConfig::new(m, order).with_forgetting(lambda);
    let mut w = Whitener::new(cfg)?;
    let mut est = CoefficientEstimator::new(&w);
    let blocks = (signal.len().saturating_sub(1)) / m;
    let mut outs = Vec::with_capacity(blocks);
    let mut traj = vec![vec![Vec::with_capacity(blocks); order]; m];
    let data = signal.samples();
    for b in 0..blocks {
        let chunk = &data[b * m + 1..(b + 1) * m + 1];
        outs.push(w.process_block(chunk)?);
        est.update_coefficients(&w, chunk)?;
        for i in 0..m {
            let h = est.coefficients().h_full(i);
            for (p, traj_ip) in traj[i].iter_mut().enumerate() {
                traj_ip.push(h[p]);
            }
        }
    }
    Ok((outs, traj, est))
}

/// Coding gain of one seeded AR run.
pub fn gain_for_seed(cfg: &ExperimentConfig, theta: f64, rho: f64, seed: u64) -> Result<f64> {
    let model = ArModel::from_poles(rho, theta)?;
    let signal = generate_ar(&model, cfg.excitation, seed, cfg.samples)?;
    let (_, outs) = run_whitener(&signal, cfg.channels, cfg.order, cfg.lambda)?;
    let rep = coding_gain(&signal, &outs, TRANSIENT_DISCARD)?;
    rep.gain_db
        .ok_or_else(|| Error::InvalidParameter("zero channel variance".into()))
}

#[derive(Debug, Clone, Serialize)]
pub struct GainSummary {
    pub label: String,
    pub per_seed: Vec<(u64, f64)>,
    pub mean_db: f64,
}

fn summarize(label: String, per_seed: Vec<(u64, f64)>) -> GainSummary {
    let mean = per_seed.iter().map(|(_, g)| g).sum::<f64>() / per_seed.len() as f64;
    GainSummary {
        label,
        per_seed,
        mean_db: mean,
    }
}

/// Experiment 1: four-channel bank, filter length 8 (lattice order 4),
/// AR(2) poles at 0.975 e^{+-j theta} for theta in {pi/2.8, pi/1.75}.
pub fn experiment1(cfg: &ExperimentConfig) -> Result<Vec<GainSummary>> {
    cfg.validate()?;
    let pi = std::f64::consts::PI;
    [pi / 2.8, pi / 1.75]
        .iter()
        .map(|&theta| {
            let per_seed = cfg
                .seeds
                .par_iter()
                .map(|&s| gain_for_seed(cfg, theta, cfg.rho, s).map(|g| (s, g)))
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize(format!("theta=pi/{:.4}", pi / theta), per_seed))
        })
        .collect()
}

/// Experiment 2: gain as rho sweeps toward the unit circle at theta = pi/3.
pub fn experiment2(cfg: &ExperimentConfig) -> Result<Vec<GainSummary>> {
    cfg.validate()?;
    [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.975, 0.99]
        .iter()
        .map(|&rho| {
            let per_seed = cfg
                .seeds
                .par_iter()
                .map(|&s| gain_for_seed(cfg, cfg.theta, rho, s).map(|g| (s, g)))
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize(format!("rho={}", rho), per_seed))
        })
        .collect()
}

/// Experiment 3: gain versus channel count M = 2..6 at order 5,
/// poles 0.975 e^{+-j pi/3}.
pub fn experiment3(cfg: &ExperimentConfig) -> Result<Vec<GainSummary>> {
    cfg.validate()?;
    (2usize..=6)
        .map(|m| {
            let per_seed = cfg
                .seeds
                .par_iter()
                .map(|&s| {
                    let mut sub = cfg.clone();
                    sub.channels = m;
                    gain_for_seed(&sub, cfg.theta, cfg.rho, s).map(|g| (s, g))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize(format!("M={}", m), per_seed))
        })
        .collect()
}

/// Per-channel AM-GM balance at the experiment-3 operating point.
pub fn experiment3_am_gm(cfg: &ExperimentConfig) -> Result<AmGmReport> {
    let model = ArModel::from_poles(cfg.rho, cfg.theta)?;
    let mut variances = vec![0.0; cfg.channels];
    for &seed in &cfg.seeds {
        let signal = generate_ar(&model, cfg.excitation, seed, cfg.samples)?;
        let (_, outs) = run_whitener(&signal, cfg.channels, cfg.order, cfg.lambda)?;
        let rep = coding_gain(&signal, &outs, TRANSIENT_DISCARD)?;
        for (v, cv) in variances.iter_mut().zip(rep.channel_variances.iter()) {
            *v += cv / cfg.seeds.len() as f64;
        }
    }
    am_gm_report(&variances)
}

/// Experiment 4 result: tap trajectories averaged over seeds, indexed
/// [channel][tap][block].
#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub channels: usize,
    pub order: usize,
    pub blocks: usize,
    pub mean: Vec<Vec<Vec<f64>>>,
}

/// Experiment 4: convergence of the direct-form taps, AR(2) input.
pub fn experiment4(cfg: &ExperimentConfig) -> Result<TrajectorySummary> {
    cfg.validate()?;
    let model = ArModel::from_poles(cfg.rho, cfg.theta)?;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let signal = generate_ar(&model, cfg.excitation, seed, cfg.samples)?;
            let (_, traj, _) = run_with_trajectories(&signal, cfg.channels, cfg.order, cfg.lambda)?;
            Ok(traj)
        })
        .collect::<Result<Vec<_>>>()?;
    let blocks = runs[0][0][0].len();
    let mut mean = vec![vec![vec![0.0; blocks]; cfg.order]; cfg.channels];
    for traj in &runs {
        for i in 0..cfg.channels {
            for p in 0..cfg.order {
                for b in 0..blocks {
                    mean[i][p][b] += traj[i][p][b] / runs.len() as f64;
                }
            }
        }
    }
    Ok(TrajectorySummary {
        channels: cfg.channels,
        order: cfg.order,
        blocks,
        mean,
    })
}

/// The three coloring filters of the whitening experiment, as causal
/// rational transfer functions in ascending powers of z^-1.
pub fn coloring_filter(index: usize) -> (&'static str, Vec<f64>, Vec<f64>) {
    match index {
        0 => (
            "minimum_phase",
            vec![1.0, -0.8461, 0.9506],
            vec![1.0],
        ),
        1 => (
            "maximum_phase",
            vec![0.0, 1.0, -1.2],
            vec![1.0, -0.975, 0.9506],
        ),
        _ => (
            "mixed_phase",
            vec![0.0, 1.0, -2.95, 1.90],
            vec![1.0, -1.775, 1.7306, -0.7605],
        ),
    }
}

/// The three excitation rows of the whitening experiment.
pub fn excitation_row(index: usize) -> (&'static str, Excitation) {
    match index {
        0 => (
            "gaussian",
            Excitation::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
        ),
        1 => ("uniform", Excitation::Uniform { lo: -1.0, hi: 1.0 }),
        _ => ("exponential", Excitation::Exponential { mean: 1.5 }),
    }
}

/// Lattice order used to whiten each coloring filter: the minimum-phase
/// filter has zeros at radius 0.975 whose causal inverse decays slowly, so it
/// needs the longest predictor.
pub fn whitening_order(filter_index: usize) -> usize {
    match filter_index {
        0 => 96,
        1 => 48,
        _ => 64,
    }
}

/// One whitened test signal: flatness and autocorrelation summary plus the
/// spectra for plotting.
#[derive(Debug, Clone, Serialize)]
pub struct WhiteningOutcome {
    pub signal_index: usize,
    pub distribution: String,
    pub filter: String,
    pub order: usize,
    pub input_flatness: f64,
    pub output_flatness: Vec<f64>,
    pub max_abs_autocorr: Vec<f64>,
    #[serde(skip)]
    pub input_spectrum: SpectrumEstimate,
    #[serde(skip)]
    pub output_spectra: Vec<SpectrumEstimate>,
}

/// Build benchmark test signal `index` (1..=9) with the given seed.
pub fn whitening_signal(index: usize, seed: u64, samples: usize) -> Result<(String, String, usize, Signal)> {
    if !(1..=9).contains(&index) {
        return Err(Error::InvalidParameter(format!(
            "signal index {} outside 1..=9",
            index
        )));
    }
    let filter_index = (index - 1) / 3;
    let dist_index = (index - 1) % 3;
    let (fname, num, den) = coloring_filter(filter_index);
    let (dname, exc) = excitation_row(dist_index);
    let e = draw_excitation(exc, seed, samples)?;
    let s = apply_rational_filter(&e, &num, &den)?;
    Ok((dname.to_string(), fname.to_string(), whitening_order(filter_index), s))
}

/// Experiment 5: whiten signal `index` with a two-channel bank and report
/// input/output flatness, autocorrelation and spectra.
pub fn experiment5(index: usize, seed: u64, samples: usize) -> Result<WhiteningOutcome> {
    let (distribution, filter, order, s) = whitening_signal(index, seed, samples)?;
    let m = 2usize;
    let (_, outs) = run_whitener(&s, m, order, 1.0)?;
    let skip = ((outs.len() as f64) * TRANSIENT_DISCARD) as usize;
    let seg = 1024usize;

    let steady_input =
        Signal::from_samples(s.samples()[skip * m + 1..outs.len() * m + 1].to_vec());
    let input_spectrum = welch_psd(&steady_input, seg, 0.5)?;
    let input_flatness = spectral_flatness(&input_spectrum);

    let mut output_flatness = Vec::with_capacity(m);
    let mut output_spectra = Vec::with_capacity(m);
    let mut max_abs_autocorr = Vec::with_capacity(m);
    for i in 0..m {
        let ch: Vec<f64> = outs[skip..].iter().map(|o| o.values[i]).collect();
        let spec = welch_psd(&Signal::from_samples(ch.clone()), seg, 0.5)?;
        output_flatness.push(spectral_flatness(&spec));
        output_spectra.push(spec);
        let r = autocorrelation(&ch, 10);
        max_abs_autocorr.push(r[1..].iter().cloned().fold(0.0, |a: f64, b| a.max(b.abs())));
    }
    Ok(WhiteningOutcome {
        signal_index: index,
        distribution,
        filter,
        order,
        input_flatness,
        output_flatness,
        max_abs_autocorr,
        input_spectrum,
        output_spectra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for id in 1..=5u8 {
            assert!(ExperimentConfig::defaults(id).validate().is_ok());
        }
        assert!(ExperimentConfig::defaults(0).validate().is_err());
    }

    #[test]
    fn whitening_signal_indices() {
        let (d, f, _, s) = whitening_signal(1, 1, 64).unwrap();
        assert_eq!((d.as_str(), f.as_str()), ("gaussian", "minimum_phase"));
        assert_eq!(s.len(), 64);
        let (d, f, _, _) = whitening_signal(6, 1, 64).unwrap();
        assert_eq!((d.as_str(), f.as_str()), ("exponential", "maximum_phase"));
        let (d, f, _, _) = whitening_signal(8, 1, 64).unwrap();
        assert_eq!((d.as_str(), f.as_str()), ("uniform", "mixed_phase"));
        assert!(whitening_signal(0, 1, 64).is_err());
        assert!(whitening_signal(10, 1, 64).is_err());
    }

    #[test]
    fn mixed_phase_filter_is_stable() {
        // denominator roots of the mixed-phase coloring filter stay inside
        // the unit circle even though its zeros do not
        let (_, num, den) = coloring_filter(2);
        let mut imp = vec![0.0; 128];
        imp[0] = 1.0;
        let y = apply_rational_filter(&Signal::from_samples(imp), &num, &den).unwrap();
        assert!(y.samples().iter().all(|v| v.is_finite()));
        // impulse response decays
        let head: f64 = y.samples()[..32].iter().map(|v| v * v).sum();
        let tail: f64 = y.samples()[96..].iter().map(|v| v * v).sum();
        assert!(tail < head);
    }

    #[test]
    fn gain_positive_for_colored_input() {
        let mut cfg = ExperimentConfig::defaults(1);
        cfg.samples = 6000;
        cfg.seeds = vec![3];
        let g = gain_for_seed(&cfg, cfg.theta, cfg.rho, 3).unwrap();
        assert!(g > 5.0, "gain {}", g);
    }

    #[test]
    fn run_whitener_block_count() {
        let s = Signal::from_samples(vec![0.5; 21]);
        let (_, outs) = run_whitener(&s, 4, 2, 1.0).unwrap();
        assert_eq!(outs.len(), 5);
    }
}
