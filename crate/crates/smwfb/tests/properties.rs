//! Property tests for the structural invariants: pre-windowing, decimation
//! consistency, projection geometry, gain scale invariance and serialization
//! round trips.

use proptest::prelude::*;

use smwfb::metrics::{am_gm_report, coding_gain};
use smwfb::oracle::residual_projection;
use smwfb::signal::{make_data_vector, Signal};
use smwfb::{ChannelOutputs, Whitener, WhitenerConfig};

fn finite_signal(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prewindowed_negative_index_is_zero(samples in finite_signal(1..40), k in 1isize..100) {
        let s = Signal::from_samples(samples);
        prop_assert_eq!(s.get(-k), 0.0);
    }

    #[test]
    fn decimation_consistency(
        samples in finite_signal(8..80),
        m in 1usize..5,
        i_raw in 0usize..4,
    ) {
        let s = Signal::from_samples(samples);
        let i = i_raw % m;
        let n = (s.len() - 1 + i) / m;
        let v = make_data_vector(&s, m, i, n).unwrap();
        for (idx, e) in v.entries().iter().enumerate() {
            let j = idx + 1;
            prop_assert_eq!(*e, s.get((j * m) as isize - i as isize));
        }
    }

    #[test]
    fn projection_pythagoras_and_orthogonality(
        data in prop::collection::vec(-10.0f64..10.0, 18),
    ) {
        let nu = nalgebra::DVector::from_row_slice(&data[..6]);
        let v = nalgebra::DMatrix::from_row_slice(2, 6, &data[6..]);
        let res = residual_projection(&nu, &v).unwrap();
        // residual orthogonal to every row
        for r in 0..2 {
            let row = v.row(r).transpose();
            let ip = res.residual.dot(&row).abs();
            prop_assert!(ip <= 1e-9 * res.residual.norm().max(1e-12) * row.norm().max(1e-12) + 1e-12);
        }
        // norm decomposition
        let proj = &nu - &res.residual;
        let total = nu.dot(&nu);
        let parts = proj.dot(&proj) + res.residual.dot(&res.residual);
        prop_assert!((total - parts).abs() <= 1e-9 * total.max(1.0));
        // applying the projection twice changes nothing
        let twice = residual_projection(&res.residual, &v).unwrap();
        prop_assert!((&twice.residual - &res.residual).norm() <= 1e-9 * res.residual.norm().max(1e-12));
    }

    #[test]
    fn am_gm_ratio_at_least_one(vars in prop::collection::vec(1e-6f64..1e3, 2..8)) {
        let rep = am_gm_report(&vars).unwrap();
        prop_assert!(rep.ratio >= 1.0 - 1e-12);
        // equality only when all variances agree
        let spread = vars.iter().cloned().fold(f64::MIN, f64::max)
            - vars.iter().cloned().fold(f64::MAX, f64::min);
        if spread > 1e-3 {
            prop_assert!(rep.ratio > 1.0);
        }
    }

    #[test]
    fn coding_gain_scale_invariant(
        samples in finite_signal(420..460),
        alpha in prop_oneof![Just(0.1f64), Just(10.0), 0.5f64..2.0],
    ) {
        let outputs: Vec<ChannelOutputs> = samples
            .chunks_exact(2)
            .enumerate()
            .map(|(b, c)| ChannelOutputs { block: b + 1, values: vec![c[0], c[1] + 0.1] })
            .collect();
        prop_assume!(outputs.len() >= 100);
        let scaled_outputs: Vec<ChannelOutputs> = outputs
            .iter()
            .map(|o| ChannelOutputs {
                block: o.block,
                values: o.values.iter().map(|v| alpha * v).collect(),
            })
            .collect();
        let mut sig = vec![0.0];
        sig.extend_from_slice(&samples);
        let input = Signal::from_samples(sig.clone());
        let scaled_input = Signal::from_samples(sig.iter().map(|v| alpha * v).collect());
        let a = coding_gain(&input, &outputs, 0.0).unwrap();
        let b = coding_gain(&scaled_input, &scaled_outputs, 0.0).unwrap();
        if let (Some(ga), Some(gb)) = (a.gain_db, b.gain_db) {
            prop_assert!((ga - gb).abs() <= 1e-10, "{} vs {}", ga, gb);
        }
    }

    #[test]
    fn lattice_output_scales_linearly(
        samples in finite_signal(24..25),
        alpha in prop_oneof![Just(0.1f64), Just(10.0)],
    ) {
        let mut w1 = Whitener::new(WhitenerConfig::new(2, 2)).unwrap();
        let mut w2 = Whitener::new(WhitenerConfig::new(2, 2)).unwrap();
        for chunk in samples.chunks_exact(2) {
            let scaled = [alpha * chunk[0], alpha * chunk[1]];
            let a = w1.process_block(chunk).unwrap();
            let b = w2.process_block(&scaled).unwrap();
            for (x, y) in a.values.iter().zip(b.values.iter()) {
                prop_assert!((alpha * x - y).abs() <= 1e-8 * y.abs().max(alpha));
            }
        }
    }

    #[test]
    fn signal_serialization_round_trips(samples in finite_signal(0..50)) {
        let s = Signal::from_samples(samples);
        let mut csv = Vec::new();
        s.write_csv(&mut csv).unwrap();
        prop_assert_eq!(&Signal::read_csv(&csv[..]).unwrap(), &s);
        let mut bin = Vec::new();
        s.write_binary(&mut bin).unwrap();
        prop_assert_eq!(&Signal::read_binary(&bin).unwrap(), &s);
    }
}
