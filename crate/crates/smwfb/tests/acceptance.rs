//! Acceptance suite: one test per acceptance criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see the lines for passing
//! criteria).
//!
//! Criterion 3's pi/2.8 case is left failing on purpose: the reference
//! coding-gain figure for that input exceeds the Yule-Walker prediction
//! bound that any causal least-squares bank is subject to, so the criterion
//! cannot be met by a correct implementation. The test states the analysis
//! and asserts the reference number anyway rather than quietly loosening the
//! check. See the test body for the arithmetic.

use std::time::Instant;

use smwfb::coeffs::CoefficientEstimator;
use smwfb::experiments::{
    experiment1, experiment3, experiment3_am_gm, experiment4, experiment5, ExperimentConfig,
};
use smwfb::lattice::{reference_op_counts, Whitener, WhitenerConfig};
use smwfb::metrics::convergence_report;
use smwfb::oracle::{
    check_inner_product_update, check_pseudo_inverse_update, check_space_identities,
};
use smwfb::signal::{draw_excitation, Excitation};
use smwfb::verify::verify_grid;

fn pass(line: &str) {
    println!("PASS  {}", line);
}

/// Criterion 1: every lattice quantity with a projection definition matches
/// the oracle over M in {2,3,4}, N in 1..=8, 32 blocks, 20 Gaussian trials.
#[test]
fn criterion1_oracle_equivalence() {
    let t0 = Instant::now();
    let orders: Vec<usize> = (1..=8).collect();
    let reports = verify_grid(&[2, 3, 4], &orders, 32, 20, 1).expect("grid runs");
    let elapsed = t0.elapsed();
    let worst = reports
        .iter()
        .map(|r| r.max_norm_err)
        .fold(0.0f64, f64::max);
    for r in &reports {
        assert!(
            r.passed,
            "criterion 1: M={} N={} fails at {:?} (normalized error {:.3e})",
            r.settings.channels, r.settings.order, r.failing_kind, r.max_norm_err
        );
    }
    assert!(
        elapsed.as_secs_f64() <= 30.0,
        "criterion 1: runtime {:?} exceeds 30 s",
        elapsed
    );
    pass(&format!(
        "criterion 1: oracle equivalence over 24 instances, worst normalized error {:.2e}, {:?}",
        worst, elapsed
    ));
}

/// Criterion 2: recursive h taps and the prefilter solve match the dense
/// constrained least-squares solution to 1e-6 relative on the same grid.
#[test]
fn criterion2_coefficient_equivalence() {
    let t0 = Instant::now();
    let orders: Vec<usize> = (1..=8).collect();
    let reports = verify_grid(&[2, 3, 4], &orders, 32, 20, 1).expect("grid runs");
    let elapsed = t0.elapsed();
    let mut worst = 0.0f64;
    for r in &reports {
        for q in &r.quantities {
            if q.kind == "coeff_h" || q.kind == "coeff_a" {
                assert!(
                    q.max_norm_err <= 1.0,
                    "criterion 2: M={} N={} {} off by {:.3e} relative",
                    r.settings.channels,
                    r.settings.order,
                    q.kind,
                    q.max_rel_err
                );
                worst = worst.max(q.max_rel_err);
            }
        }
    }
    assert!(
        elapsed.as_secs_f64() <= 30.0,
        "criterion 2: runtime {:?} exceeds 30 s",
        elapsed
    );
    pass(&format!(
        "criterion 2: coefficient equivalence, worst relative error {:.2e}, {:?}",
        worst, elapsed
    ));
}

/// Yule-Walker variance of a unit-excitation AR(2) with denominator
/// (1, a1, a2); independent oracle for the attainable coding gain.
fn ar2_variance(a1: f64, a2: f64) -> f64 {
    (1.0 + a2) / ((1.0 - a2) * ((1.0 + a2) * (1.0 + a2) - a1 * a1))
}

fn prediction_bound_db(rho: f64, theta: f64) -> f64 {
    let a1 = -2.0 * rho * theta.cos();
    let a2 = rho * rho;
    10.0 * ar2_variance(a1, a2).log10()
}

fn coding_gain_benchmark_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(1);
    cfg.seeds = (1..=10).collect();
    cfg.samples = 20_000;
    cfg
}

/// Criterion 3, theta = pi/1.75 half: mean gain within 1.5 dB of the
/// reference 10.5967 dB.
#[test]
fn criterion3_coding_gain_theta_pi_1_75() {
    let t0 = Instant::now();
    let cfg = coding_gain_benchmark_config();
    let sums = experiment1(&cfg).expect("experiment 1 runs");
    assert!(
        t0.elapsed().as_secs_f64() <= 120.0,
        "criterion 3: runtime {:?} exceeds 2 min",
        t0.elapsed()
    );
    let measured = sums[1].mean_db;
    let reference = 10.5967;
    assert!(
        (measured - reference).abs() <= 1.5,
        "criterion 3 (pi/1.75): measured {:.4} dB vs reference {:.4} dB",
        measured,
        reference
    );
    pass(&format!(
        "criterion 3 (theta=pi/1.75): measured {:.4} dB vs reference {:.4} dB (bound {:.4} dB)",
        measured,
        reference,
        prediction_bound_db(0.975, std::f64::consts::PI / 1.75)
    ));
}

/// Criterion 3, theta = pi/2.8 half, asserted against the reference value.
///
/// This criterion is not attainable by any causal least-squares analysis
/// bank: every channel output is a one-step prediction error over a
/// consecutive sample context, so each channel variance is bounded below by
/// the AR(2) innovation variance and the coding gain by the Yule-Walker
/// ratio sigma_x^2/sigma_w^2 = 11.07 dB for poles 0.975 e^{+-j pi/2.8}. The
/// reference 14.5564 dB exceeds that bound (the same formula reproduces the
/// reference pi/1.75 and pi/3 figures to within 0.4 dB; 14.55 dB would
/// correspond to a pole radius of about 0.9895 at this angle, suggesting a
/// misprint). The measured exact-LS gain sits at the bound, outside the
/// 1.5 dB tolerance, and the test records that honestly.
#[test]
fn criterion3_coding_gain_theta_pi_2_8() {
    let cfg = coding_gain_benchmark_config();
    let sums = experiment1(&cfg).expect("experiment 1 runs");
    let measured = sums[0].mean_db;
    let reference = 14.5564;
    let bound = prediction_bound_db(0.975, std::f64::consts::PI / 2.8);
    println!(
        "criterion 3 (theta=pi/2.8): measured {:.4} dB, reference {:.4} dB, \
         Yule-Walker prediction bound {:.4} dB",
        measured, reference, bound
    );
    assert!(
        (measured - bound).abs() <= 0.5,
        "measured gain {:.4} dB should sit at the prediction bound {:.4} dB",
        measured,
        bound
    );
    assert!(
        (measured - reference).abs() <= 1.5,
        "criterion 3 (pi/2.8): measured {:.4} dB vs reference {:.4} dB; \
         the reference value exceeds the causal prediction bound {:.4} dB \
         (= 10 log10 of the Yule-Walker variance ratio), so no exact \
         least-squares bank can reach it; see notes above",
        measured,
        reference,
        bound
    );
    pass("criterion 3 (theta=pi/2.8)");
}

/// Criterion 4: gain versus channel count at order 5, poles 0.975 e^{+-j pi/3}:
/// each mean within 1.5 dB of 11.8 dB, spread over M at most 1.5 dB.
#[test]
fn criterion4_gain_vs_channel_count() {
    let t0 = Instant::now();
    let mut cfg = ExperimentConfig::defaults(3);
    cfg.seeds = (1..=10).collect();
    cfg.samples = 20_000;
    let sums = experiment3(&cfg).expect("experiment 3 runs");
    let gains: Vec<f64> = sums.iter().map(|s| s.mean_db).collect();
    for (s, g) in sums.iter().zip(gains.iter()) {
        assert!(
            (g - 11.8).abs() <= 1.5,
            "criterion 4: {} mean {:.4} dB outside 11.8 +- 1.5 dB",
            s.label,
            g
        );
    }
    let spread = gains.iter().cloned().fold(f64::MIN, f64::max)
        - gains.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread <= 1.5, "criterion 4: spread {:.4} dB > 1.5 dB", spread);
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() <= 180.0,
        "criterion 4: runtime {:?} exceeds 3 min",
        elapsed
    );
    pass(&format!(
        "criterion 4: gains {:?} dB (spread {:.3} dB), {:?}",
        gains
            .iter()
            .map(|g| (g * 1e4).round() / 1e4)
            .collect::<Vec<_>>(),
        spread,
        elapsed
    ));
}

/// Criterion 5: experiment-4 trajectories (poles 0.6 e^{+-j pi/3}, M=2,
/// order 3) settle within 5% of the final coefficient scale by block 40.
/// Trajectories are averaged over 800 seeds (the criterion requires at least
/// 5); the 5% band uses the channel's largest final tap as the scale so that
/// taps whose limit is zero are measured sensibly.
#[test]
fn criterion5_convergence_by_block_40() {
    let mut cfg = ExperimentConfig::defaults(4);
    cfg.seeds = (1..=800).collect();
    cfg.samples = 400;
    let traj = experiment4(&cfg).expect("experiment 4 runs");
    let mut worst = 0usize;
    for i in 0..traj.channels {
        let scale = (0..traj.order)
            .map(|p| traj.mean[i][p].last().unwrap().abs())
            .fold(0.0f64, f64::max);
        for p in 0..traj.order {
            let idx = convergence_report(&traj.mean[i][p], 0.05, scale)
                .expect("trajectory settles");
            assert!(
                idx <= 40,
                "criterion 5: h[{}][{}] within 5% of final only from block {}",
                i,
                p + 1,
                idx
            );
            worst = worst.max(idx);
        }
    }
    pass(&format!(
        "criterion 5: all h trajectories within 5% of final scale by block {} (limit 40)",
        worst
    ));
}

/// Criterion 6: all nine colored test signals whiten: output flatness at
/// least 0.9 and strictly above the input's, output autocorrelations at lags
/// 1..10 within 0.1.
#[test]
fn criterion6_whitening_all_nine_signals() {
    for idx in 1..=9usize {
        let o = experiment5(idx, 42, 1 << 16).expect("experiment 5 runs");
        for (ch, (flat, rho)) in o
            .output_flatness
            .iter()
            .zip(o.max_abs_autocorr.iter())
            .enumerate()
        {
            assert!(
                *flat >= 0.9,
                "criterion 6: signal {} channel {} flatness {:.4} < 0.9",
                idx,
                ch,
                flat
            );
            assert!(
                *flat > o.input_flatness,
                "criterion 6: signal {} channel {} flatness {:.4} not above input {:.4}",
                idx,
                ch,
                flat,
                o.input_flatness
            );
            assert!(
                *rho <= 0.1,
                "criterion 6: signal {} channel {} max |autocorr| {:.4} > 0.1",
                idx,
                ch,
                rho
            );
        }
    }
    pass("criterion 6: all nine signals whitened (flatness >= 0.9, |autocorr| <= 0.1)");
}

/// Criterion 7: near-equal channel variances at the experiment-3 operating
/// point: arithmetic/geometric mean ratio at most 1.15.
#[test]
fn criterion7_am_gm_near_equality() {
    let mut cfg = ExperimentConfig::defaults(3);
    cfg.seeds = (1..=5).collect();
    cfg.samples = 20_000;
    let rep = experiment3_am_gm(&cfg).expect("am-gm runs");
    assert!(
        rep.ratio <= 1.15,
        "criterion 7: am/gm ratio {:.4} > 1.15",
        rep.ratio
    );
    pass(&format!("criterion 7: am/gm ratio {:.6} (/<= 1.15)", rep.ratio));
}

/// Criterion 8: the appendix identities hold numerically to 1e-10 on 100
/// random instances with dimensions up to 12.
#[test]
fn criterion8_appendix_identities() {
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let dim = 3 + (case % 10); // 3..=12
        let rows = 1 + (case % (dim - 2));
        let rv = |rng: &mut rand_chacha::ChaCha8Rng| {
            DVector::from_fn(dim, |_, _| rng.random::<f64>() - 0.5)
        };
        let nu = rv(&mut rng);
        let w = rv(&mut rng);
        let x = rv(&mut rng);
        let nun = rv(&mut rng);
        let v = DMatrix::from_fn(rows, dim, |_, _| rng.random::<f64>() - 0.5);

        let ip = check_inner_product_update(&nu, &v, &w, &nun).expect("inner product");
        assert!(
            (ip.lhs - ip.rhs).abs() <= 1e-10,
            "criterion 8: inner-product update off by {:.3e}",
            (ip.lhs - ip.rhs).abs()
        );
        worst = worst.max((ip.lhs - ip.rhs).abs());

        let sp = check_space_identities(&nu, &x, &v, &w).expect("space identities");
        assert!(
            sp.max_discrepancy() <= 1e-10,
            "criterion 8: space identity off by {:.3e}",
            sp.max_discrepancy()
        );
        worst = worst.max(sp.max_discrepancy());

        let (lhs, rhs) = check_pseudo_inverse_update(&nu, &v, &x).expect("pinv update");
        let diff = (&lhs - &rhs).norm();
        assert!(
            diff <= 1e-10,
            "criterion 8: pseudo-inverse update off by {:.3e}",
            diff
        );
        worst = worst.max(diff);
    }
    pass(&format!(
        "criterion 8: appendix identities on 100 instances, worst discrepancy {:.2e}",
        worst
    ));
}

/// Criterion 9: instrumented per-block operation counts within a factor 2 of
/// the reference formulas for M in {2,4}, N in {4,8}, and independent of the
/// sample values.
#[test]
fn criterion9_operation_counts() {
    for (m, order) in [(2usize, 4usize), (2, 8), (4, 4), (4, 8)] {
        let blocks = 32;
        let mut measured = Vec::new();
        for seed in [11u64, 99] {
            let raw = draw_excitation(
                Excitation::Gaussian {
                    mean: 0.0,
                    variance: 1.0,
                },
                seed,
                m * blocks,
            )
            .unwrap();
            let mut w = Whitener::new(WhitenerConfig::new(m, order)).unwrap();
            let mut est = CoefficientEstimator::new(&w);
            for b in 0..blocks {
                let chunk = &raw.samples()[b * m..(b + 1) * m];
                w.process_block(chunk).unwrap();
                est.update_coefficients(&w, chunk).unwrap();
            }
            measured.push(w.op_counters());
        }
        assert_eq!(
            measured[0], measured[1],
            "criterion 9: counts depend on data for M={} N={}",
            m, order
        );
        let reference = reference_op_counts(m, order);
        let got = measured[0];
        assert!(
            got.adds * 2 >= reference.adds && got.adds <= reference.adds * 2,
            "criterion 9: M={} N={} adds {} vs reference {}",
            m,
            order,
            got.adds,
            reference.adds
        );
        assert!(
            got.mults * 2 >= reference.mults && got.mults <= reference.mults * 2,
            "criterion 9: M={} N={} mults {} vs reference {}",
            m,
            order,
            got.mults,
            reference.mults
        );
        pass(&format!(
            "criterion 9: M={} N={} adds {}/{} mults {}/{} (measured/reference)",
            m, order, got.adds, reference.adds, got.mults, reference.mults
        ));
    }
}
