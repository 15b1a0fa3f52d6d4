use proptest::prelude::*;

use qem::data::{expand_grouped, parse_interval_csv, serialize_interval_csv, GroupedRow};
use qem::dist::truncated_quantile;
use qem::engine::{monte_carlo_matrix, quantile_grid, quantile_matrix};
use qem::weibull_root::{g_of_beta, ShapeEquationInputs, DEFAULT_TOL};
use qem::{run_fit, Dataset, FitConfig, FitResult, GridScheme, IntervalObservation, ModelKind, ModelParams};

fn observation() -> impl Strategy<Value = IntervalObservation> {
    (0.0f64..50.0, 0.0f64..20.0, 0u8..4).prop_map(|(a, w, shape)| match shape {
        0 => IntervalObservation::exact(a),
        1 => IntervalObservation::right_censored(a),
        2 => IntervalObservation::new(0.0, a + 0.01),
        _ => IntervalObservation::new(a, a + w + 0.01),
    }
    .unwrap())
}

fn dataset() -> impl Strategy<Value = Dataset> {
    prop::collection::vec(observation(), 1..30).prop_map(|mut obs| {
        obs.push(IntervalObservation::exact(1.5).unwrap());
        obs.push(IntervalObservation::exact(4.0).unwrap());
        Dataset::new(obs).unwrap()
    })
}

fn params() -> impl Strategy<Value = ModelParams> {
    let pos = || (-1.5f64..1.5).prop_map(|e| 10f64.powf(e));
    prop_oneof![
        pos().prop_map(|r| ModelParams::exponential(r).unwrap()),
        (-10.0f64..10.0, pos()).prop_map(|(m, s)| ModelParams::normal(m, s).unwrap()),
        (-10.0f64..10.0, pos()).prop_map(|(m, s)| ModelParams::laplace(m, s).unwrap()),
        pos().prop_map(|s| ModelParams::rayleigh(s).unwrap()),
        (pos(), 0.3f64..5.0).prop_map(|(r, b)| ModelParams::weibull(r, b).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 128,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn interval_csv_round_trips(ds in dataset()) {
        let text = serialize_interval_csv(&ds);
        let back = parse_interval_csv(&text).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(serialize_interval_csv(&back), text);
    }

    #[test]
    fn grouped_rows_expand_to_their_counts(counts in prop::collection::vec(1u64..20, 1..8)) {
        let rows: Vec<GroupedRow> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| GroupedRow::new(i as f64, i as f64 + 1.0, c).unwrap())
            .collect();
        let ds = expand_grouped(&rows).unwrap();
        prop_assert_eq!(ds.len() as u64, counts.iter().sum::<u64>());
        prop_assert_eq!(ds.iter().filter(|o| o.lower() == 0.0).count() as u64, counts[0]);
    }

    #[test]
    fn truncated_quantiles_are_monotone_and_bounded(p in params(), u in 0.001f64..0.95, w in 0.01f64..0.99) {
        let lower = if p.kind().nonnegative_support() { 0.0 } else { f64::NEG_INFINITY };
        let a = p.model().quantile_within(lower, f64::INFINITY, u).unwrap();
        let b = p.model().quantile_within(lower, f64::INFINITY, u + w * (1.0 - u)).unwrap();
        prop_assume!(b > a);
        let obs = IntervalObservation::new(a, b).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..50 {
            let z = truncated_quantile(&p, &obs, k as f64 / 50.0).unwrap();
            prop_assert!(a <= z && z <= b, "{} outside [{}, {}]", z, a, b);
            prop_assert!(z >= prev);
            prev = z;
        }
    }

    #[test]
    fn quantile_rows_stay_inside_intervals(p in params(), ds in dataset(), k in 1usize..64) {
        let shifted = if p.kind().nonnegative_support() { ds } else {
            Dataset::new(ds.iter().map(|o| {
                let upper = if o.upper().is_finite() { o.upper() - 25.0 } else { o.upper() };
                IntervalObservation::new(o.lower() - 25.0, upper).unwrap()
            }).collect()).unwrap()
        };
        let grid = quantile_grid(k, GridScheme::Midpoint);
        if let Ok(m) = quantile_matrix(&p, &shifted, &grid) {
            for (obs, row) in shifted.iter().zip(m.iter_rows()) {
                for z in row {
                    prop_assert!(obs.lower() <= *z && *z <= obs.upper());
                }
                prop_assert!(row.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn em_loglik_never_decreases(ds in dataset(), normal in any::<bool>()) {
        let (kind, start) = if normal {
            (ModelKind::Normal, ModelParams::normal(10.0, 20.0).unwrap())
        } else {
            (ModelKind::Exponential, ModelParams::exponential(0.05).unwrap())
        };
        let config = FitConfig::with_strategy("em").eps(1e-9).max_iterations(100).initial(start);
        let res = run_fit(kind, &ds, &config).unwrap();
        for w in res.loglik_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn mcem_is_reproducible_for_a_seed(ds in dataset(), seed in any::<u64>(), k in 1usize..50) {
        let p = ModelParams::exponential(0.2).unwrap();
        let a = monte_carlo_matrix(&p, &ds, k, seed, 3).unwrap();
        let b = monte_carlo_matrix(&p, &ds, k, seed, 3).unwrap();
        prop_assert_eq!(a.values(), b.values());
        let config = FitConfig::with_strategy("mcem").k(k).seed(seed).max_iterations(5);
        let r1 = run_fit(ModelKind::Weibull, &ds, &config).ok();
        let r2 = run_fit(ModelKind::Weibull, &ds, &config).ok();
        prop_assert_eq!(r1, r2);
    }

    #[test]
    fn fit_results_round_trip_through_json(ds in dataset(), k in 2usize..40) {
        let config = FitConfig::with_strategy("qem")
            .k(k)
            .max_iterations(4)
            .initial(ModelParams::rayleigh(20.0).unwrap());
        let res = run_fit(ModelKind::Rayleigh, &ds, &config).unwrap();
        let json = serde_json::to_string(&res).unwrap();
        let back: FitResult = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &res);
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    #[test]
    fn weibull_root_sits_in_its_bracket(q in prop::collection::vec(1e-3f64..1e3, 2..100)) {
        let eq = ShapeEquationInputs::new(&q).unwrap();
        let (lo, hi) = eq.beta_bounds().unwrap();
        let beta = eq.solve_beta(DEFAULT_TOL).unwrap();
        prop_assert!(lo <= beta && beta <= hi);
        prop_assert!(g_of_beta(lo) - eq.h(lo) >= 0.0);
        prop_assert!(g_of_beta(hi) - eq.h(hi) <= 0.0);
    }

    #[test]
    fn shrinking_intervals_approach_the_density(p in params(), u in 0.05f64..0.95) {
        let lower = if p.kind().nonnegative_support() { 0.0 } else { f64::NEG_INFINITY };
        let a = p.model().quantile_within(lower, f64::INFINITY, u).unwrap();
        let w = 1e-6 * p.model().typical_scale().1;
        let gap = (p.model().ln_mass(a, a + w) - w.ln() - p.ln_pdf(a)).abs();
        prop_assert!(gap < 1e-4, "gap {}", gap);
    }
}
