use cyclosense::caf::{classical_ca, delay_product_matrix};
use cyclosense::detector::{
    chi2_threshold, estimate_covariance, quadratic_statistic, smoothed_cyclic_spectrum, tdt_statistic,
    SpectralWindow, TestVector,
};
use cyclosense::signal::{add_awgn, generate_signal};
use cyclosense::sparse::{
    build_mask, build_symmetry_dictionary, hades_estimate, somp_estimate, undersample, MeasurementOperator,
};
use cyclosense::{SampleRecord, SensingConfig, SignalModel};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn record(values: &[(f64, f64)]) -> SampleRecord {
    SampleRecord::new(values.iter().map(|&(r, i)| Complex64::new(r, i)).collect(), 0)
}

fn samples(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
}

fn sparse_problem(seed: u64, snr: f64, c_r: f64) -> (cyclosense::DelayProductMatrix, MeasurementOperator) {
    let cfg = SensingConfig { n: 256, m_avail: 128, delays: vec![1, 2, 3, 4], c_r };
    let x = generate_signal(&SignalModel::bpsk(8), 256, seed).unwrap();
    let x = add_awgn(&x, snr, seed + 1).unwrap();
    let p = delay_product_matrix(&x, &cfg.delays).unwrap();
    let mask = build_mask(&cfg, seed + 2).unwrap();
    (undersample(&p, &mask).unwrap(), MeasurementOperator::new(mask))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn somp_residuals_never_grow(seed in 0u64..10_000, snr in -6.0f64..10.0, iters in 1usize..10) {
        let (p_u, op) = sparse_problem(seed, snr, 0.15);
        let state = somp_estimate(&p_u, &op, iters).unwrap();
        for w in state.residual_history.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                prop_assert!(*b <= *a * (1.0 + 1e-9) + 1e-12);
            }
        }
        prop_assert!(state.support.len() <= iters);
        let mut sorted = state.support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), state.support.len());
    }

    #[test]
    fn estimates_vanish_off_support(seed in 0u64..10_000, snr in -6.0f64..10.0) {
        let (p_u, op) = sparse_problem(seed, snr, 0.15);
        let dicts = vec![build_symmetry_dictionary(256).unwrap(); 4];
        for state in [somp_estimate(&p_u, &op, 6).unwrap(), hades_estimate(&p_u, &op, 2, &dicts).unwrap()] {
            for col in &state.estimate.columns {
                for (k, v) in col.iter().enumerate() {
                    if !state.support.contains(&k) {
                        prop_assert_eq!(*v, Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn hades_support_grows_by_words(seed in 0u64..10_000, snr in -6.0f64..10.0, iters in 1usize..4) {
        let (p_u, op) = sparse_problem(seed, snr, 0.15);
        let dicts = vec![build_symmetry_dictionary(256).unwrap(); 4];
        let state = hades_estimate(&p_u, &op, iters, &dicts).unwrap();
        prop_assert_eq!(state.support[0], 0);
        prop_assert!(state.support.len() <= 1 + 2 * iters);
        for &k in &state.support[1..] {
            prop_assert!(state.support.contains(&((256 - k) % 256)));
        }
    }

    #[test]
    fn operator_reproduces_products(values in samples(64), c_r in 0.05f64..0.5, seed in any::<u64>()) {
        let x = record(&values);
        let cfg = SensingConfig { n: 64, m_avail: 32, delays: vec![1, 3], c_r };
        let mask = build_mask(&cfg, seed).unwrap();
        let direct = undersample(&delay_product_matrix(&x, &cfg.delays).unwrap(), &mask).unwrap();
        let via = MeasurementOperator::new(mask).apply(&classical_ca(&x, &cfg.delays).unwrap()).unwrap();
        for (a, b) in direct.columns.iter().flatten().zip(via.columns.iter().flatten()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn rectangular_smoothing_matches_loop(values in samples(64), k in 0i64..64, half in 0usize..6, conj in any::<bool>()) {
        let x = record(&values);
        let ca = classical_ca(&x, &[1, 2]).unwrap();
        let len = 2 * half + 1;
        let got = smoothed_cyclic_spectrum(&ca, k, 0, 1, conj, &SpectralWindow::rectangular(len).unwrap()).unwrap();
        let mut want = Complex64::new(0.0, 0.0);
        for s in -(half as i64)..=half as i64 {
            let row = |r: i64| r.rem_euclid(64) as usize;
            want += if conj {
                ca.columns[1][row(k + s)].conj() * ca.columns[0][row(k + s)]
            } else {
                ca.columns[1][row(k - s)] * ca.columns[0][row(k + s)]
            };
        }
        want /= 64.0 * len as f64;
        prop_assert!((got - want).norm() <= 1e-12 * want.norm().max(1e-6));
    }

    #[test]
    fn covariance_is_symmetric_and_statistic_nonnegative(values in samples(128), k in 1usize..64) {
        let x = record(&values);
        let ca = classical_ca(&x, &[1, 2, 3, 4]).unwrap();
        let window = SpectralWindow::kaiser(15, 10.0).unwrap();
        let cov = estimate_covariance(&ca, k, &window).unwrap();
        let m = &cov.matrix;
        prop_assert_eq!(m.nrows(), 8);
        prop_assert!((m - m.transpose()).norm() == 0.0);
        let t = tdt_statistic(&ca, k, &window).unwrap();
        prop_assert!(t.statistic >= 0.0 && t.statistic.is_finite());
        prop_assert_eq!(t.dof, 8);
    }

    #[test]
    fn statistic_is_scale_invariant(values in samples(128), k in 1usize..64, gain in 0.01f64..100.0) {
        let x = record(&values);
        let window = SpectralWindow::kaiser(15, 10.0).unwrap();
        let a = tdt_statistic(&classical_ca(&x, &[1, 2]).unwrap(), k, &window).unwrap();
        let b = tdt_statistic(&classical_ca(&x.scaled(gain), &[1, 2]).unwrap(), k, &window).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() <= 1e-6 * a.statistic.max(1.0));
    }

    #[test]
    fn quadratic_form_is_nonnegative(entries in prop::collection::vec(-2.0f64..2.0, 16), r in prop::collection::vec(-5.0f64..5.0, 4)) {
        let b = DMatrix::from_vec(4, 4, entries);
        let sigma = &b * b.transpose();
        let (t, _) = quadratic_statistic(&TestVector { values: r }, &sigma, 100).unwrap();
        prop_assert!(t >= 0.0 && t.is_finite());
    }

    #[test]
    fn threshold_is_monotone(p1 in 1e-4f64..0.99, p2 in 1e-4f64..0.99, dof in 1usize..20) {
        let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
        prop_assert!(chi2_threshold(lo, dof).unwrap() >= chi2_threshold(hi, dof).unwrap());
        prop_assert!(chi2_threshold(lo, dof + 1).unwrap() > chi2_threshold(lo, dof).unwrap());
    }
}
