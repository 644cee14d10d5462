//! Command-line driver: verification, benchmark experiments, streaming
//! whitening and coefficient extraction.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use smwfb::coeffs::{assemble_direct_form, CoefficientEstimator};
use smwfb::experiments::{
    experiment1, experiment2, experiment3, experiment3_am_gm, experiment4, experiment5,
    ExperimentConfig, GainSummary,
};
use smwfb::metrics::convergence_report;
use smwfb::verify::{verify_instance, VerifySettings};
use smwfb::{Whitener, WhitenerConfig};

#[derive(Parser)]
#[command(
    name = "smwfb",
    about = "Signal-matched multirate whitening filter bank",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compare every lattice register against the projection oracle.
    Verify {
        #[arg(long = "M", default_value_t = 2)]
        channels: usize,
        #[arg(long = "N", default_value_t = 4)]
        order: usize,
        #[arg(long, default_value_t = 32)]
        blocks: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the JSON report here as well as summarizing on stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Test hook: corrupt a register mid-run; verification must fail.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Run one of the benchmark experiments (1-5) and write CSV/JSON files.
    Experiment {
        #[arg(long)]
        id: u8,
        /// Flat JSON config file; command-line flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "M")]
        channels: Option<usize>,
        #[arg(long = "N")]
        order: Option<usize>,
        #[arg(long)]
        rho: Option<f64>,
        /// Pole angle in radians.
        #[arg(long)]
        theta: Option<f64>,
        /// Number of seeds (base..base+count-1).
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Restrict experiment 5 to one signal index (1-9).
        #[arg(long)]
        signal: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stream samples (stdin or --input) through the bank; emit channel CSV.
    Whiten {
        #[arg(long = "M")]
        channels: usize,
        #[arg(long = "N")]
        order: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dump the final register snapshot as JSON.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Run the estimator over samples and emit direct-form coefficients JSON.
    Coeffs {
        #[arg(long = "M")]
        channels: usize,
        #[arg(long = "N")]
        order: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            2
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32, Box<dyn std::error::Error>> {
    match cli.cmd {
        Cmd::Verify {
            channels,
            order,
            blocks,
            trials,
            seed,
            out,
            inject_fault,
        } => {
            let mut settings = VerifySettings::new(channels, order, blocks, trials, seed);
            settings.inject_fault = inject_fault;
            if let Err(e) = settings.validate() {
                eprintln!("usage error: {}", e);
                return Ok(2);
            }
            let report = verify_instance(&settings)?;
            for q in &report.quantities {
                println!(
                    "{:<12} compared {:>6}  max_abs {:.3e}  max_rel {:.3e}",
                    q.kind, q.compared, q.max_abs_err, q.max_rel_err
                );
            }
            if let Some(path) = out {
                fs::write(&path, serde_json::to_string_pretty(&report)?)?;
            }
            if report.passed {
                println!(
                    "verify: PASS (max normalized error {:.3e})",
                    report.max_norm_err
                );
                Ok(0)
            } else {
                println!(
                    "verify: FAIL at quantity {} (normalized error {:.3e})",
                    report.failing_kind.as_deref().unwrap_or("?"),
                    report.max_norm_err
                );
                Ok(1)
            }
        }
        Cmd::Experiment {
            id,
            config,
            channels,
            order,
            rho,
            theta,
            seeds,
            seed,
            samples,
            lambda,
            signal,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => serde_json::from_str::<ExperimentConfig>(&fs::read_to_string(path)?)?,
                None => ExperimentConfig::defaults(id),
            };
            cfg.experiment = id;
            if let Some(v) = channels {
                cfg.channels = v;
            }
            if let Some(v) = order {
                cfg.order = v;
            }
            if let Some(v) = rho {
                cfg.rho = v;
            }
            if let Some(v) = theta {
                cfg.theta = v;
            }
            if let Some(v) = samples {
                cfg.samples = v;
            }
            if let Some(v) = lambda {
                cfg.lambda = v;
            }
            if let Some(count) = seeds {
                cfg.seeds = (seed..seed + count).collect();
            }
            if let Err(e) = cfg.validate() {
                eprintln!("usage error: {}", e);
                return Ok(2);
            }
            fs::create_dir_all(&out)?;
            run_experiment(&cfg, signal, &out)?;
            Ok(0)
        }
        Cmd::Whiten {
            channels,
            order,
            lambda,
            input,
            out,
            snapshot,
        } => {
            let samples = read_samples(input.as_deref())?;
            let cfg = WhitenerConfig::new(channels, order).with_forgetting(lambda);
            let mut w = Whitener::new(cfg)?;
            let mut writer: Box<dyn Write> = match out {
                Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
                None => Box::new(BufWriter::new(std::io::stdout())),
            };
            write!(writer, "block")?;
            for i in 0..channels {
                write!(writer, ",e{}", i)?;
            }
            writeln!(writer)?;
            for chunk in samples.chunks_exact(channels) {
                let outp = w.process_block(chunk)?;
                write!(writer, "{}", outp.block)?;
                for v in &outp.values {
                    write!(writer, ",{}", v)?;
                }
                writeln!(writer)?;
            }
            writer.flush()?;
            if let Some(path) = snapshot {
                fs::write(
                    &path,
                    serde_json::to_string_pretty(&w.snapshot_registers())?,
                )?;
            }
            Ok(0)
        }
        Cmd::Coeffs {
            channels,
            order,
            lambda,
            input,
            out,
        } => {
            if channels == 0 || order % channels != 0 {
                eprintln!(
                    "usage error: direct form needs N divisible by M (got N={}, M={})",
                    order, channels
                );
                return Ok(2);
            }
            let samples = read_samples(input.as_deref())?;
            let cfg = WhitenerConfig::new(channels, order).with_forgetting(lambda);
            let mut w = Whitener::new(cfg)?;
            let mut est = CoefficientEstimator::new(&w);
            for chunk in samples.chunks_exact(channels) {
                w.process_block(chunk)?;
                est.update_coefficients(&w, chunk)?;
            }
            est.refresh_prefilter()?;
            let fb = assemble_direct_form(est.coefficients())?;
            let json = serde_json::to_string_pretty(&fb)?;
            match out {
                Some(p) => fs::write(p, json)?,
                None => println!("{}", json),
            }
            Ok(0)
        }
    }
}

/// Whitespace/newline separated f64 samples; the first sample becomes x(1).
fn read_samples(path: Option<&Path>) -> Result<Vec<f64>, Box<dyn std::error::Error>> {
    let mut text = String::new();
    match path {
        Some(p) => {
            text = fs::read_to_string(p)?;
        }
        None => {
            std::io::stdin().read_to_string(&mut text)?;
        }
    }
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        out.push(tok.parse::<f64>()?);
    }
    Ok(out)
}

fn config_header(cfg: &ExperimentConfig) -> String {
    format!("# {}", serde_json::to_string(cfg).unwrap())
}

fn write_gain_csv(
    path: &Path,
    cfg: &ExperimentConfig,
    key: &str,
    summaries: &[GainSummary],
) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", config_header(cfg))?;
    writeln!(w, "{},seed,gain_db", key)?;
    for s in summaries {
        for (seed, gain) in &s.per_seed {
            writeln!(w, "{},{},{}", s.label, seed, gain)?;
        }
    }
    w.flush()
}

fn run_experiment(
    cfg: &ExperimentConfig,
    signal: Option<usize>,
    out: &Path,
) -> Result<(), Box<dyn std::error::Error>> {
    match cfg.experiment {
        1 => {
            let sums = experiment1(cfg)?;
            write_gain_csv(&out.join("experiment1_gains.csv"), cfg, "theta", &sums)?;
            let summary = serde_json::json!({ "config": cfg, "results": sums });
            fs::write(
                out.join("experiment1_summary.json"),
                serde_json::to_string_pretty(&summary)?,
            )?;
            for s in &sums {
                println!("experiment 1 {}: mean {:.4} dB", s.label, s.mean_db);
            }
        }
        2 => {
            let sums = experiment2(cfg)?;
            write_gain_csv(&out.join("experiment2_gain_vs_rho.csv"), cfg, "rho", &sums)?;
            let summary = serde_json::json!({ "config": cfg, "results": sums });
            fs::write(
                out.join("experiment2_summary.json"),
                serde_json::to_string_pretty(&summary)?,
            )?;
            for s in &sums {
                println!("experiment 2 {}: mean {:.4} dB", s.label, s.mean_db);
            }
        }
        3 => {
            let sums = experiment3(cfg)?;
            write_gain_csv(
                &out.join("experiment3_gain_vs_channels.csv"),
                cfg,
                "channels",
                &sums,
            )?;
            let amgm = experiment3_am_gm(cfg)?;
            let summary = serde_json::json!({ "config": cfg, "results": sums, "am_gm": amgm });
            fs::write(
                out.join("experiment3_summary.json"),
                serde_json::to_string_pretty(&summary)?,
            )?;
            for s in &sums {
                println!("experiment 3 {}: mean {:.4} dB", s.label, s.mean_db);
            }
            println!("experiment 3 am/gm ratio: {:.4}", amgm.ratio);
        }
        4 => {
            let traj = experiment4(cfg)?;
            let mut w =
                BufWriter::new(fs::File::create(out.join("experiment4_trajectories.csv"))?);
            writeln!(w, "{}", config_header(cfg))?;
            writeln!(w, "block,channel,order,value")?;
            for b in 0..traj.blocks {
                for i in 0..traj.channels {
                    for p in 0..traj.order {
                        writeln!(w, "{},{},{},{}", b + 1, i, p + 1, traj.mean[i][p][b])?;
                    }
                }
            }
            w.flush()?;
            let mut convergence = Vec::new();
            for i in 0..traj.channels {
                let scale = (0..traj.order)
                    .map(|p| traj.mean[i][p].last().copied().unwrap_or(0.0).abs())
                    .fold(0.0f64, f64::max);
                for p in 0..traj.order {
                    let idx = convergence_report(&traj.mean[i][p], 0.05, scale);
                    convergence.push(serde_json::json!({
                        "channel": i, "order": p + 1,
                        "final": traj.mean[i][p].last(),
                        "converged_block": idx,
                    }));
                    println!(
                        "experiment 4 h[{}][{}]: final {:+.4}, within 5% of final by block {:?}",
                        i,
                        p + 1,
                        traj.mean[i][p].last().unwrap(),
                        idx
                    );
                }
            }
            let summary = serde_json::json!({ "config": cfg, "convergence": convergence });
            fs::write(
                out.join("experiment4_summary.json"),
                serde_json::to_string_pretty(&summary)?,
            )?;
        }
        5 => {
            let indices: Vec<usize> = match signal {
                Some(k) => vec![k],
                None => (1..=9).collect(),
            };
            let mut summaries = Vec::new();
            for &idx in &indices {
                let o = experiment5(idx, cfg.seeds[0], cfg.samples.max(1 << 15))?;
                let in_path = out.join(format!("experiment5_signal{}_input_psd.csv", idx));
                let mut w = BufWriter::new(fs::File::create(in_path)?);
                writeln!(w, "{}", config_header(cfg))?;
                writeln!(w, "frequency,power")?;
                for (f, p) in o
                    .input_spectrum
                    .frequencies
                    .iter()
                    .zip(o.input_spectrum.power.iter())
                {
                    writeln!(w, "{},{}", f, p)?;
                }
                w.flush()?;
                let out_path = out.join(format!("experiment5_signal{}_output_psd.csv", idx));
                let mut w = BufWriter::new(fs::File::create(out_path)?);
                writeln!(w, "{}", config_header(cfg))?;
                writeln!(w, "frequency,channel0,channel1")?;
                for k in 0..o.output_spectra[0].frequencies.len() {
                    writeln!(
                        w,
                        "{},{},{}",
                        o.output_spectra[0].frequencies[k],
                        o.output_spectra[0].power[k],
                        o.output_spectra[1].power[k]
                    )?;
                }
                w.flush()?;
                println!(
                    "experiment 5 signal {} ({} through {}): input flatness {:.4}, output {:?}",
                    idx, o.distribution, o.filter, o.input_flatness, o.output_flatness
                );
                summaries.push(o);
            }
            let summary = serde_json::json!({ "config": cfg, "signals": summaries });
            fs::write(
                out.join("experiment5_summary.json"),
                serde_json::to_string_pretty(&summary)?,
            )?;
        }
        other => {
            eprintln!("usage error: invalid experiment id {}", other);
            std::process::exit(2);
        }
    }
    Ok(())
}
