use proptest::prelude::*;

use fracblow::exponents::{
    critical_exponent_scalar, system_dimension_bound, system_estimate_exponents, Mode, Orders,
    ParamSet, SystemParamSet,
};
use fracblow::fraclap::{Field, SpaceGrid, Spectral};
use fracblow::fracops::{
    caputo_left, caputo_right, rl_integral, rl_right_integral, FracOrder, TimeGrid, TimeSeries,
};
use fracblow::identities::{check_ibp, relative_series_residual};
use fracblow::solver::{default_space, run, DataSpec, SimConfig, Status};
use fracblow::testfn::bump;

fn series(n: usize, f: impl Fn(f64) -> f64) -> TimeSeries {
    TimeSeries::from_fn(TimeGrid::new(1.0, n).unwrap(), f)
}

fn max_diff(a: &TimeSeries, b: &TimeSeries) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn strict_orders() -> impl Strategy<Value = Orders> {
    (
        prop::array::uniform3(0.05f64..0.95),
        prop::array::uniform2(0.05f64..0.95),
    )
        .prop_filter_map("distinct orders", |(mut a, mut s)| {
            a.sort_by(f64::total_cmp);
            s.sort_by(f64::total_cmp);
            let distinct = a[1] - a[0] > 1e-3 && a[2] - a[1] > 1e-3 && s[1] - s[0] > 1e-3;
            distinct.then_some(Orders {
                alpha1: a[2],
                alpha2: a[1],
                gamma: a[0],
                sigma: s[0],
                delta: s[1],
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn integral_is_linear(mu in 0.05f64..=1.0, a in -3.0f64..3.0, b in -3.0f64..3.0, k in 0.5f64..4.0) {
        let f = series(256, |t| t.sin() * k);
        let g = series(256, |t| (t * t + 1.0).ln());
        let lhs = rl_integral(&f.combine(a, &g, b).unwrap(), mu).unwrap();
        let rhs = rl_integral(&f, mu).unwrap().combine(a, &rl_integral(&g, mu).unwrap(), b).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-12 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn integrals_compose(a in 0.05f64..0.5, b in 0.05f64..0.5) {
        let f = series(2048, |t| 1.0 + t);
        let twice = rl_integral(&rl_integral(&f, b).unwrap(), a).unwrap();
        let once = rl_integral(&f, a + b).unwrap();
        let r = relative_series_residual(&twice, &once).unwrap();
        prop_assert!(r <= 2e-2, "{r}");
    }

    #[test]
    fn right_integral_is_the_reflected_left_one(mu in 0.05f64..=1.0, c in 0.1f64..3.0) {
        let f = series(300, |t| (c * t).cos() + t);
        let right = rl_right_integral(&f, mu).unwrap();
        let left = rl_integral(&f.reflect(), mu).unwrap().reflect();
        prop_assert!(max_diff(&right, &left) <= 1e-12 * (1.0 + left.max_abs()));
    }

    #[test]
    fn caputo_annihilates_constants(alpha in 0.05f64..0.95, c in -10.0f64..10.0) {
        let order = FracOrder::new(alpha).unwrap();
        let f = series(200, |_| c);
        prop_assert!(caputo_left(&f, order).unwrap().max_abs() <= 1e-12 * c.abs());
        prop_assert!(caputo_right(&f, order).unwrap().max_abs() <= 1e-12 * c.abs());
    }

    #[test]
    fn symbol_is_nonnegative_with_zero_mean_mode(s in 0.05f64..1.0, dim in 1usize..=2, half in 2.0f64..20.0) {
        let sp = Spectral::new(SpaceGrid::new(dim, half, 16).unwrap());
        let sym = sp.symbol(s);
        prop_assert_eq!(sym[0], 0.0);
        prop_assert!(sym.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn spectral_operator_is_self_adjoint(s in 0.05f64..1.0, shift in -2.0f64..2.0) {
        let grid = SpaceGrid::new(1, 8.0, 128).unwrap();
        let f = Field::from_fn(grid, |x| bump((x[0] - shift).abs() / 2.0));
        let g = Field::from_fn(grid, |x| (-x[0] * x[0]).exp() * (1.0 + x[0]));
        let sp = Spectral::new(grid);
        let lhs = sp.apply(&f, s).unwrap().inner(&g).unwrap();
        let rhs = f.inner(&sp.apply(&g, s).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn threshold_monotone_in_dimension_and_sigma(
        orders in strict_orders(),
        dim in 1usize..4,
        ds in 0.0f64..0.5,
    ) {
        let base = critical_exponent_scalar(dim, orders.alpha1, orders.gamma, orders.sigma).unwrap().value;
        let higher_dim = critical_exponent_scalar(dim + 1, orders.alpha1, orders.gamma, orders.sigma).unwrap().value;
        prop_assert!(higher_dim <= base);
        let s2 = (orders.sigma + ds).min(0.99);
        let larger_sigma = critical_exponent_scalar(dim, orders.alpha1, orders.gamma, s2).unwrap().value;
        prop_assert!(larger_sigma >= base);
    }

    #[test]
    fn system_bound_matches_estimate_exponents(
        first in strict_orders(),
        second in strict_orders(),
        p in 1.1f64..6.0,
        q in 1.1f64..6.0,
        dim in 0.1f64..12.0,
    ) {
        let s = SystemParamSet::new(first, second, p, q, 1, Mode::Strict).unwrap();
        let bound = system_dimension_bound(&s);
        let (l1, l2) = system_estimate_exponents(&s, dim);
        let margin = 1e-6 * (1.0 + dim);
        if (dim - bound.first_branch).abs() > margin {
            prop_assert_eq!(dim < bound.first_branch, l1 < 0.0);
        }
        if (dim - bound.second_branch).abs() > margin {
            prop_assert_eq!(dim < bound.second_branch, l2 < 0.0);
        }
    }

    #[test]
    fn bump_stays_in_unit_interval(r in -5.0f64..5.0) {
        let v = bump(r.abs());
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn discrete_parts_formula_is_exact_for_constants(alpha in 0.05f64..0.95, c in -5.0f64..5.0, eta in 2i32..9) {
        let order = FracOrder::new(alpha).unwrap();
        let r = check_ibp(move |_| c, move |t| (1.0 - t).powi(eta), 1.0, order, &[256]).unwrap();
        prop_assert_eq!(r.final_residual(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn zero_data_stays_zero(orders in strict_orders(), p in 1.1f64..5.0) {
        let ps = ParamSet::new(orders, p, 1, Mode::Strict).unwrap();
        let mut cfg = SimConfig::new(ps, default_space(1, 1.0, 32).unwrap(), TimeGrid::new(1.0, 50).unwrap(), DataSpec::zero());
        cfg.snapshot_every = Some(10);
        let r = run(&cfg).unwrap();
        prop_assert_eq!(r.status, Status::Completed);
        prop_assert!(r.sup_norms.iter().all(|&v| v == 0.0));
        prop_assert!(r.snapshots.iter().all(|(_, f)| f.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn linear_runs_stay_bounded(orders in strict_orders(), amplitude in 0.1f64..10.0) {
        let ps = ParamSet::new(orders, 2.0, 1, Mode::Strict).unwrap();
        let mut cfg = SimConfig::new(ps, default_space(1, 1.0, 32).unwrap(), TimeGrid::new(3.0, 150).unwrap(), DataSpec::bump(amplitude, 1.0));
        cfg.nonlinearity = false;
        let r = run(&cfg).unwrap();
        prop_assert_eq!(r.status, Status::Completed);
        let peak = r.sup_norms.iter().cloned().fold(0.0, f64::max);
        prop_assert!(peak.is_finite() && peak < 100.0 * amplitude);
    }
}
