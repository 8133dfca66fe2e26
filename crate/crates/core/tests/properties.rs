use kan_aft::bspline::{basis_all, make_grid, SplineFunction};
use kan_aft::data::SurvivalDataset;
use kan_aft::metrics::{c_index, concordance_counts};
use kan_aft::survival::{censoring_km, inverse_g_integral, kaplan_meier, km_eval, Side};
use kan_aft::trainers::transform_times;
use proptest::prelude::*;

fn brute_force_counts(times: &[f64], events: &[bool], pred: &[f64]) -> (u64, u64, u64) {
    let (mut comparable, mut concordant, mut tied) = (0, 0, 0);
    for i in 0..times.len() {
        for j in 0..times.len() {
            if times[i] < times[j] && events[i] {
                comparable += 1;
                if pred[i] < pred[j] {
                    concordant += 1;
                } else if pred[i] == pred[j] {
                    tied += 1;
                }
            }
        }
    }
    (comparable, concordant, tied)
}

/// Small integer-valued times and predictions so that ties actually occur.
fn survival_instance(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>, Vec<f64>)> {
    (2..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(1u8..6, n).prop_map(|v| v.into_iter().map(f64::from).collect()),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(0u8..5, n).prop_map(|v| v.into_iter().map(f64::from).collect()),
        )
    })
}

fn censored_dataset() -> impl Strategy<Value = SurvivalDataset> {
    (5usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(0.01f64..20.0, n),
            prop::collection::vec(prop::bool::weighted(0.6), n),
        )
            .prop_filter_map("needs one event and one censoring", |(times, mut events)| {
                events[0] = true;
                if events.iter().all(|e| *e) {
                    events[1] = false;
                }
                let covs = times.iter().map(|t| vec![*t]).collect();
                SurvivalDataset::new(times, events, covs, vec!["x".into()]).ok()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn c_index_matches_pair_oracle((t, e, p) in survival_instance(8)) {
        let (comparable, concordant, tied) = brute_force_counts(&t, &e, &p);
        let counts = concordance_counts(&t, &e, &p).unwrap();
        prop_assert_eq!(counts.comparable, comparable);
        prop_assert_eq!(counts.concordant, concordant);
        prop_assert_eq!(counts.tied_predictions, tied);
        if comparable > 0 {
            let oracle = (2 * concordant + tied) as f64 / (2 * comparable) as f64;
            prop_assert_eq!(c_index(&t, &e, &p).unwrap(), oracle);
        }
    }

    #[test]
    fn c_index_is_invariant_under_monotone_maps((t, e, p) in survival_instance(8)) {
        prop_assume!(brute_force_counts(&t, &e, &p).0 > 0);
        let base = c_index(&t, &e, &p).unwrap();
        let mapped: Vec<f64> = p.iter().map(|v| (0.7 * v).exp() + 3.0).collect();
        prop_assert_eq!(c_index(&t, &e, &mapped).unwrap(), base);
        let t_mapped: Vec<f64> = t.iter().map(|v| v.ln()).collect();
        prop_assert_eq!(c_index(&t_mapped, &e, &p).unwrap(), base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn c_index_of_reciprocal_predictions_is_complementary(
        t in prop::collection::vec(0.1f64..10.0, 3..40),
        seed in any::<u64>(),
    ) {
        let n = t.len();
        let e: Vec<bool> = (0..n).map(|i| (seed >> (i % 64)) & 1 == 1 || i == 0).collect();
        let p: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 + (seed % 7) as f64 * 0.01).collect();
        prop_assume!(brute_force_counts(&t, &e, &p).0 > 0);
        let inv: Vec<f64> = p.iter().map(|v| 1.0 / v).collect();
        let sum = c_index(&t, &e, &p).unwrap() + c_index(&t, &e, &inv).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn km_is_monotone_and_mass_sums_to_one((t, e, _) in survival_instance(10)) {
        prop_assume!(e.iter().any(|x| *x));
        let curve = kaplan_meier(&t, &e).unwrap();
        let mut prev = 1.0;
        for s in &curve.survival_probs {
            prop_assert!(*s <= prev && *s >= 0.0);
            prev = *s;
        }
        let total: f64 = curve.masses().iter().sum::<f64>() + curve.tail_mass();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for x in [0.5, 1.0, 2.5, 5.0, 7.0] {
            let right = km_eval(&curve, x, Side::Right).unwrap();
            let left = km_eval(&curve, x, Side::Left).unwrap();
            prop_assert!(right <= left);
        }
    }

    #[test]
    fn inverse_integral_matches_riemann_oracle(
        ticks in prop::collection::vec((1u32..1000, prop::bool::weighted(0.5)), 3..60),
    ) {
        // times on a 0.01 lattice inside [0, 10] plus a final event, so G > 0 on [0, 10]
        // and every jump lands on a boundary of the 1e-4 Riemann cells
        let mut times: Vec<f64> = ticks.iter().map(|(k, _)| f64::from(*k) * 0.01).collect();
        let mut events: Vec<bool> = ticks.iter().map(|(_, e)| *e).collect();
        times.push(10.5);
        events.push(true);
        let g = censoring_km(&times, &events).unwrap();
        let upper = 10.0;
        let exact = inverse_g_integral(&g, upper).unwrap();
        let steps = 100_000;
        let h = upper / steps as f64;
        let mut riemann = 0.0;
        for k in 0..steps {
            let u = (k as f64 + 0.5) * h;
            riemann += h / km_eval(&g, u, Side::Left).unwrap();
        }
        prop_assert!((exact - riemann).abs() <= 1e-6 * exact, "exact {exact} riemann {riemann}");
    }

    #[test]
    fn transformed_times_are_non_negative(data in censored_dataset()) {
        let (t_star, alpha) = transform_times(&data).unwrap();
        prop_assert!(alpha >= 0.0);
        for v in t_star {
            prop_assert!(v >= -1e-9, "T* = {v}");
        }
    }

    #[test]
    fn spline_bases_partition_unity(lo in -5.0f64..5.0, width in 0.1f64..10.0, g in 1usize..12, k in 0usize..6, u in 0.0f64..=1.0) {
        let kv = make_grid(lo, lo + width, g, k).unwrap();
        let x = lo + u * width;
        let sum: f64 = basis_all(&kv, x).unwrap().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spline_derivative_matches_finite_difference(
        coefs in prop::collection::vec(-3.0f64..3.0, 12),
        g in 2usize..8,
        k in 1usize..5,
        u in 0.02f64..0.98,
    ) {
        let kv = make_grid(-2.0, 2.0, g, k).unwrap();
        let f = SplineFunction::new(kv.clone(), coefs[..kv.basis_count()].to_vec()).unwrap();
        let x = -2.0 + 4.0 * u;
        let h = 1e-6;
        let fd = (f.eval(x + h).unwrap() - f.eval(x - h).unwrap()) / (2.0 * h);
        let d = f.deriv_x(x).unwrap();
        // the derivative of a degree-1 spline jumps at knots; stay clear of them
        let spacing = 4.0 / g as f64;
        let dist = ((x + 2.0) / spacing - ((x + 2.0) / spacing).round()).abs() * spacing;
        prop_assume!(k > 1 || dist > 1e-5);
        prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0), "fd {fd} analytic {d}");
    }
}
