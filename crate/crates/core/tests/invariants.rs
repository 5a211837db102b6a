use std::f64::consts::PI;

use fluctuon::analysis::{dft, h_neg_norm, idft};
use fluctuon::coefficients::model_case;
use fluctuon::experiments::{make_schedule, moser_bound};
use fluctuon::noise::{build_basis, closed_form_sums, enumerate_modes};
use fluctuon::ou::build_ou;
use fluctuon::report::CsvTable;
use fluctuon::solver::{cfl_dt, PathState, Stepper};
use fluctuon::stats::Proportion;
use fluctuon::{Grid, GridField, Rho0Spec, SolverConfig};
use proptest::prelude::*;

fn field(grid: Grid, a: f64, b: f64, k: f64) -> GridField {
    GridField::from_fn(grid, |x| a + b * (2.0 * PI * k * x[0]).sin() * (2.0 * PI * x[1]).cos())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn per_step_mass_drift(
        d in 1usize..=2,
        m in prop::sample::select(vec![1.0, 2.0, 3.0]),
        eps in 0.0f64..1e-2,
        a in 0.5f64..1.5,
        frac in 0.0f64..0.4,
        seed in any::<u64>(),
    ) {
        let n = if d == 1 { 32 } else { 16 };
        let grid = Grid::new(d, n).unwrap();
        let c = model_case(m).unwrap();
        let model = build_basis(d, 2, n).unwrap();
        let rho0 = field(grid, a, frac * a, 2.0);
        let mut cfg = SolverConfig::new(d, n, 1.0, 1.0, eps, Rho0Spec::Field(rho0.clone()));
        cfg.dt = cfl_dt(&cfg, &c, model.norms().f1, a * (1.0 + frac)).unwrap();
        let mut state = PathState::new(rho0);
        let mut stepper = Stepper::new(&cfg, &c, &model).unwrap();
        let mut stream = fluctuon::IncrementStream::new(seed, 0, fluctuon::rng::Lane::Increments);
        for j in 0..40u64 {
            let before = state.rho.integral();
            let inc = fluctuon::noise::sample_increments(&model, cfg.dt, &mut stream, j).unwrap();
            stepper.step(&mut state, &inc).unwrap();
            let drift = (state.rho.integral() - before).abs() / before;
            prop_assert!(drift <= 1e-12, "step {j}: drift {drift:e}");
        }
    }

    #[test]
    fn cutoff_modes_are_prefixes(d in 1usize..=2, m in 0usize..6) {
        let small = enumerate_modes(d, m);
        let big = enumerate_modes(d, m + 1);
        prop_assert_eq!(&big[..small.len()], &small[..]);
        let f1 = closed_form_sums(d, m as f64).f1;
        prop_assert_eq!(f1, ((2 * m + 1) as f64).powi(d as i32));
    }

    #[test]
    fn dft_round_trip_and_parseval(vals in prop::collection::vec(-5.0f64..5.0, 16)) {
        let grid = Grid::new(1, 16).unwrap();
        let f = GridField::from_vec(grid, vals).unwrap();
        let s = dft(&f);
        let back = idft(&s);
        for (x, y) in f.as_slice().iter().zip(back.as_slice()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let energy: f64 = s.as_slice().iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((energy - f.l2_norm().powi(2)).abs() < 1e-9 * (1.0 + energy));
        prop_assert!(s.conjugate_asymmetry() < 1e-12);
    }

    #[test]
    fn negative_norm_decreases_with_beta(vals in prop::collection::vec(-1.0f64..1.0, 32), b in 0.0f64..2.0) {
        let grid = Grid::new(1, 32).unwrap();
        let s = dft(&GridField::from_vec(grid, vals).unwrap());
        prop_assert!(h_neg_norm(&s, b + 0.5) <= h_neg_norm(&s, b) + 1e-15);
    }

    #[test]
    fn wilson_interval_brackets_estimate(trials in 1usize..500, frac in 0.0f64..=1.0) {
        let k = (frac * trials as f64).round() as usize;
        let p = Proportion::wilson(k, trials);
        prop_assert!(0.0 <= p.ci_lo && p.ci_lo <= p.estimate && p.estimate <= p.ci_hi && p.ci_hi <= 1.0);
    }

    #[test]
    fn cutoffs_grow_as_noise_shrinks(e0 in 1e-3f64..0.5, factor in 2.0f64..20.0, gamma in 0.01f64..0.16) {
        let eps = [e0, e0 / factor, e0 / (factor * factor)];
        if let Ok(s) = make_schedule(1, &eps, gamma) {
            prop_assert!(s.rows.windows(2).all(|w| w[1].cutoff >= w[0].cutoff));
            prop_assert!(gamma * 3.0 < 0.5);
        }
    }

    #[test]
    fn moser_bound_increases_with_r(x in -50.0f64..5.0, dx in 0.01f64..5.0) {
        prop_assert!(moser_bound(1, 1.0, 0.5, x) <= moser_bound(1, 1.0, 0.5, x + dx));
    }

    #[test]
    fn stability_limit_shrinks_with_noise(e1 in 0.0f64..0.05, e2 in 0.0f64..0.05) {
        let c = model_case(1.0).unwrap();
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let mk = |e| SolverConfig::new(1, 64, 1.0, 1.0, e, Rho0Spec::Constant(1.0));
        let a = cfl_dt(&mk(lo), &c, 5.0, 1.0).unwrap();
        let b = cfl_dt(&mk(hi), &c, 5.0, 1.0).unwrap();
        prop_assert!(b <= a);
    }

    #[test]
    fn ou_variance_grows_to_stationary(k in 1usize..200, dt in 1e-5f64..1e-2, i in 1usize..8) {
        let c = model_case(2.0).unwrap();
        let model = build_basis(1, 8, 36).unwrap();
        let sys = build_ou(&c, 1.0, &model, 8).unwrap();
        let a = sys.variance_after(i, k, dt);
        let b = sys.variance_after(i, k + 1, dt);
        prop_assert!(a <= b * (1.0 + 1e-12));
        // dt Σ_j e^{-a j dt} = dt/(e^{a dt} − 1) ≤ 1/a
        prop_assert!(a <= sys.stationary_variance(i) * (1.0 + 1e-12));
    }

    #[test]
    fn csv_round_trip(vals in prop::collection::vec(prop::num::f64::NORMAL, 1..20)) {
        let text = format!(
            "# fluctuon-csv v1\n# kind=moser\n# config_hash=ab\n# seed=3\nx\n{}\n",
            vals.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join("\n")
        );
        let t = CsvTable::parse(&text).unwrap();
        prop_assert_eq!(t.column("x").unwrap(), vals.clone());
        prop_assert_eq!(t.to_csv_string(), text);
    }
}
