//! Residual checks for the fractional-calculus identities and for the weak
//! formulation of the damped equation.
//!
//! Every check evaluates both sides of an identity by quadrature and reports
//! the relative residual `|lhs - rhs| / max(|lhs|, |rhs|, 1e-30)`. For
//! pointwise identities the maximum is taken over the middle 90% of nodes,
//! away from the endpoint singularities of the discrete operators.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exponents::ParamSet;
use crate::fraclap::{Field, Spectral};
use crate::fracops::{
    caputo_left, caputo_right, power_rule, right_derivative_any, rl_integral, rl_right_integral,
    FracOrder, Side, TimeGrid, TimeSeries,
};
use crate::testfn::{phi2, time_factor_integral, TestFunctionParams};

const FLOOR: f64 = 1e-30;
/// Residuals at or below this level are rounding noise.
pub const ROUNDING_FLOOR: f64 = 1e-13;
const MIDDLE: f64 = 0.9;

/// Relative residuals of one identity over a ladder of grid sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub name: String,
    pub sizes: Vec<usize>,
    pub residuals: Vec<f64>,
    /// Fitted decay rate: minus the least-squares slope of `log₂ residual`
    /// against `log₂ n`. Infinite when every residual is at rounding level.
    pub slope: f64,
}

impl ResidualReport {
    pub fn new(name: impl Into<String>, sizes: Vec<usize>, residuals: Vec<f64>) -> Self {
        let slope = fitted_slope(&sizes, &residuals);
        ResidualReport {
            name: name.into(),
            sizes,
            residuals,
            slope,
        }
    }

    /// Residual at the finest grid.
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }

    /// Residuals never grow under refinement, ignoring rounding noise.
    pub fn is_decreasing(&self) -> bool {
        self.residuals
            .windows(2)
            .all(|w| w[1] <= w[0] || w[1] <= ROUNDING_FLOOR)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.final_residual() <= tol
    }
}

fn fitted_slope(sizes: &[usize], residuals: &[f64]) -> f64 {
    if residuals.iter().all(|&r| r <= ROUNDING_FLOOR) {
        return f64::INFINITY;
    }
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .zip(residuals)
        .filter(|(_, &r)| r > 0.0 && r.is_finite())
        .map(|(&n, &r)| ((n as f64).log2(), r.log2()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}

/// `|a - b| / max(|a|, |b|, 1e-30)`.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FLOOR)
}

/// Maximum pointwise difference over the middle 90% of nodes, relative to
/// the larger of the two maxima there.
pub fn relative_series_residual(lhs: &TimeSeries, rhs: &TimeSeries) -> Result<f64> {
    if lhs.grid() != rhs.grid() {
        return Err(Error::Geometry("series live on different grids".into()));
    }
    let range = lhs.grid().middle_indices(MIDDLE);
    let (l, r) = (&lhs.values()[range.clone()], &rhs.values()[range]);
    let diff = l
        .iter()
        .zip(r)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = l
        .iter()
        .chain(r)
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(FLOOR);
    let res = diff / scale;
    if res.is_finite() {
        Ok(res)
    } else {
        Err(Error::Integration("non-finite residual".into()))
    }
}

fn ladder<F>(name: &str, sizes: &[usize], mut at: F) -> Result<ResidualReport>
where
    F: FnMut(usize) -> Result<f64>,
{
    let residuals = sizes.iter().map(|&n| at(n)).collect::<Result<Vec<_>>>()?;
    Ok(ResidualReport::new(name, sizes.to_vec(), residuals))
}

/// Default grid ladder `n ∈ {2^10, 2^11, 2^12}`.
pub const DEFAULT_SIZES: [usize; 3] = [1 << 10, 1 << 11, 1 << 12];

/// Integration by parts
/// `∫ g D^α_{0|t} f = ∫ (f - f(0)) D^α_{t|T} g` for `g(T) = 0`, on one grid.
pub fn ibp_residual(f: &TimeSeries, g: &TimeSeries, alpha: FracOrder) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::Geometry("f and g live on different grids".into()));
    }
    let last = *g.values().last().expect("grid has nodes");
    if last.abs() > 1e-12 * g.max_abs().max(1.0) {
        return Err(Error::Hypothesis(format!("g(T) = {last} must vanish")));
    }
    let lhs = g.mul(&caputo_left(f, alpha)?)?.trapezoid();
    let f0 = f.values()[0];
    let rhs = f.map(|v| v - f0).mul(&caputo_right(g, alpha)?)?.trapezoid();
    Ok(relative_difference(lhs, rhs))
}

/// [`ibp_residual`] over a ladder of grids on `[0, horizon]`.
pub fn check_ibp(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    horizon: f64,
    alpha: FracOrder,
    sizes: &[usize],
) -> Result<ResidualReport> {
    ladder("integration by parts", sizes, |n| {
        let grid = TimeGrid::new(horizon, n)?;
        ibp_residual(
            &TimeSeries::from_fn(grid, &f),
            &TimeSeries::from_fn(grid, &g),
            alpha,
        )
    })
}

/// Right integral of any positive order, composing unit steps above 1.
pub fn right_integral_any(f: &TimeSeries, order: f64) -> Result<TimeSeries> {
    if !(order > 0.0) {
        return Err(Error::Order {
            value: order,
            reason: "integral order must be positive".into(),
        });
    }
    let mut out = f.clone();
    let mut left = order;
    while left > 1.0 {
        out = rl_right_integral(&out, 1.0)?;
        left -= 1.0;
    }
    rl_right_integral(&out, left)
}

/// `D^p_{t|T} I^q_{t|T} f = D^{p-q}_{t|T} f` for `p >= q > 0`.
pub fn composition_int_residual(f: &TimeSeries, p: f64, q: f64) -> Result<f64> {
    if !(q > 0.0) || p < q {
        return Err(Error::Hypothesis(format!(
            "composition needs p >= q > 0, got p = {p}, q = {q}"
        )));
    }
    let lhs = right_derivative_any(&right_integral_any(f, q)?, p)?;
    let rhs = right_derivative_any(f, p - q)?;
    relative_series_residual(&lhs, &rhs)
}

pub fn check_composition_int(
    f: impl Fn(f64) -> f64,
    horizon: f64,
    p: f64,
    q: f64,
    sizes: &[usize],
) -> Result<ResidualReport> {
    ladder("derivative of integral", sizes, |n| {
        let grid = TimeGrid::new(horizon, n)?;
        composition_int_residual(&TimeSeries::from_fn(grid, &f), p, q)
    })
}

/// Estimated order of the zero of `f` at `t = T` from the last three nodes;
/// `∞` when `f` vanishes identically there.
pub fn terminal_zero_order(f: &TimeSeries) -> f64 {
    let v = f.values();
    let n = v.len() - 1;
    let scale = f.max_abs().max(FLOOR);
    if v[n].abs() > 1e-12 * scale {
        return 0.0;
    }
    let (a, b) = (v[n - 1].abs(), v[n - 2].abs());
    if a == 0.0 && b == 0.0 {
        return f64::INFINITY;
    }
    (b / a).log2()
}

/// `D^p_{t|T} D^q_{t|T} f = D^{p+q}_{t|T} f`, valid when every terminal
/// boundary term vanishes. Inputs without a zero of order at least 2 at `T`
/// are refused.
pub fn composition_derivs_residual(f: &TimeSeries, p: f64, q: f64) -> Result<f64> {
    if !(p >= 0.0 && q >= 0.0 && p + q < 2.0) {
        return Err(Error::Hypothesis(format!(
            "orders must be nonnegative with p + q < 2, got p = {p}, q = {q}"
        )));
    }
    let zero = terminal_zero_order(f);
    if zero < 1.9 {
        return Err(Error::Unsupported(format!(
            "terminal boundary terms do not vanish: estimated zero order at T is {zero:.3}"
        )));
    }
    let lhs = right_derivative_any(&right_derivative_any(f, q)?, p)?;
    let rhs = right_derivative_any(f, p + q)?;
    relative_series_residual(&lhs, &rhs)
}

pub fn check_composition_derivs(
    f: impl Fn(f64) -> f64,
    horizon: f64,
    p: f64,
    q: f64,
    sizes: &[usize],
) -> Result<ResidualReport> {
    ladder("derivative of derivative", sizes, |n| {
        let grid = TimeGrid::new(horizon, n)?;
        composition_derivs_residual(&TimeSeries::from_fn(grid, &f), p, q)
    })
}

/// `Σ c_i (1 - t/T)^{e_i}`, a smooth input with closed-form right
/// derivatives and integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalPowerSum {
    pub horizon: f64,
    pub terms: Vec<(f64, f64)>,
}

impl TerminalPowerSum {
    pub fn eval(&self, t: f64) -> f64 {
        let s = (1.0 - t / self.horizon).max(0.0);
        self.terms.iter().map(|&(c, e)| c * s.powf(e)).sum()
    }

    pub fn sample(&self, grid: TimeGrid) -> TimeSeries {
        TimeSeries::from_fn(grid, |t| self.eval(t))
    }

    pub fn min_exponent(&self) -> f64 {
        self.terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min)
    }

    /// `D^θ_{t|T}` term by term through the power rule.
    pub fn right_derivative_closed(&self, order: f64, grid: TimeGrid) -> Result<TimeSeries> {
        let mut out = vec![0.0; grid.len()];
        for &(c, e) in &self.terms {
            let rule = power_rule(e, order, Side::Right)?;
            for (slot, t) in out.iter_mut().zip(grid.nodes()) {
                *slot += c * rule.eval(t, self.horizon);
            }
        }
        TimeSeries::new(grid, out)
    }

    /// `(1 - t/T)^η · P(t)` with `η ∈ [2, 6]` and `P` a random polynomial of
    /// degree at most 3 with `P(0) ∈ [0.5, 1.5]`, expanded in `s = 1 - t/T`.
    pub fn random<R: Rng>(rng: &mut R, horizon: f64) -> Self {
        let eta: f64 = rng.gen_range(2.0..=6.0);
        let degree = rng.gen_range(0..=3usize);
        let mut coef = vec![rng.gen_range(0.5..=1.5)];
        for _ in 0..degree {
            coef.push(rng.gen_range(-1.0..=1.0));
        }
        // P(t) = Σ a_k τ^k with τ = 1 - s; expand (1 - s)^k binomially.
        let mut in_s = vec![0.0; degree + 1];
        for (k, &a) in coef.iter().enumerate() {
            let mut binom = 1.0;
            for j in 0..=k {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                in_s[j] += a * sign * binom;
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        let terms = in_s
            .into_iter()
            .enumerate()
            .filter(|(_, c)| *c != 0.0)
            .map(|(j, c)| (c, eta + j as f64))
            .collect();
        TerminalPowerSum { horizon, terms }
    }
}

/// Spatial snapshots of a solution on the nodes of a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    pub time: TimeGrid,
    pub fields: Vec<Field>,
}

impl FieldSeries {
    pub fn new(time: TimeGrid, fields: Vec<Field>) -> Result<Self> {
        if fields.len() != time.len() {
            return Err(Error::Geometry(format!(
                "{} snapshots for {} time nodes",
                fields.len(),
                time.len()
            )));
        }
        if let Some(first) = fields.first() {
            if fields.iter().any(|f| f.grid() != first.grid()) {
                return Err(Error::Geometry("snapshots on different space grids".into()));
            }
        }
        Ok(FieldSeries { time, fields })
    }

    /// Restriction to the first `steps` cells.
    pub fn truncate(&self, steps: usize) -> Result<Self> {
        if steps > self.time.steps() {
            return Err(Error::Geometry(format!(
                "cannot keep {steps} of {} steps",
                self.time.steps()
            )));
        }
        let time = TimeGrid::new(self.time.node(steps), steps)?;
        FieldSeries::new(time, self.fields[..=steps].to_vec())
    }

    /// Every `factor`-th snapshot.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.time.steps() % factor != 0 {
            return Err(Error::Geometry(format!(
                "{} steps are not divisible by {factor}",
                self.time.steps()
            )));
        }
        let time = TimeGrid::new(self.time.horizon(), self.time.steps() / factor)?;
        let fields = self.fields.iter().step_by(factor).cloned().collect();
        FieldSeries::new(time, fields)
    }
}

/// Both sides of the weak formulation tested against
/// `φ = D^{1-γ}_{t|T}(φ₁ φ₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakFormReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Inertia, elastic and damping terms on the left; nonlinear source and
    /// initial-velocity terms on the right.
    pub terms: [f64; 5],
}

/// Evaluates the weak formulation for a sampled solution with `u(0) = 0`.
///
/// Left side: `∫ u D^{1+α₁}φ + ∫ u (-Δ)^σ φ + ∫ u (-Δ)^δ D^{α₂} φ`.
/// Right side: `∫ I^{1-γ}_{0|t}|u|^p φ + ∫ u₁ I^{1-α₁}_{t|T}φ(0)`.
/// Time factors of `φ` come from the power rule, the fractional Laplacians
/// of `φ₂` from the spectral multiplier on the solution's grid.
pub fn weak_form_residual(
    u: &FieldSeries,
    u1: &Field,
    params: &ParamSet,
    tf: &TestFunctionParams,
) -> Result<WeakFormReport> {
    let grid = *u1.grid();
    if u.fields.iter().any(|f| *f.grid() != grid) {
        return Err(Error::Geometry(
            "solution and initial velocity on different space grids".into(),
        ));
    }
    let horizon = u.time.horizon();
    if (horizon - tf.horizon()).abs() > 1e-9 * horizon {
        return Err(Error::Geometry(format!(
            "solution horizon {horizon} differs from test-function horizon {}",
            tf.horizon()
        )));
    }
    if u.fields[0].sup_norm() != 0.0 {
        return Err(Error::Hypothesis("u(0) must vanish".into()));
    }
    let (a1, a2, g) = (params.alpha1(), params.alpha2(), params.gamma());
    let eta = tf.eta();
    let time = u.time;
    let factor = |order: f64| -> Result<TimeSeries> {
        Ok(power_rule(eta, order, Side::Right)?.sample(&time))
    };
    let inertia_t = factor(2.0 + a1 - g)?;
    let damping_t = factor(1.0 + a2 - g)?;
    let base_t = factor(1.0 - g)?;

    let phi2 = phi2(&grid, horizon, tf.theta(), tf.b())?;
    let spectral = Spectral::new(grid);
    let lap_sigma = spectral.apply(&phi2, params.sigma())?;
    let lap_delta = spectral.apply(&phi2, params.delta())?;

    let project = |w: &Field| -> Result<TimeSeries> {
        let vals = u
            .fields
            .iter()
            .map(|f| f.inner(w))
            .collect::<Result<Vec<_>>>()?;
        TimeSeries::new(time, vals)
    };
    let mass = project(&phi2)?;
    let elastic = project(&lap_sigma)?;
    let damping = project(&lap_delta)?;
    let p = params.p();
    let power = TimeSeries::new(
        time,
        u.fields
            .iter()
            .map(|f| f.map(|v| v.abs().powf(p)).inner(&phi2))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let source = rl_integral(&power, 1.0 - g)?;

    let terms = [
        mass.mul(&inertia_t)?.trapezoid(),
        elastic.mul(&base_t)?.trapezoid(),
        damping.mul(&damping_t)?.trapezoid(),
        source.mul(&base_t)?.trapezoid(),
        u1.inner(&phi2)? * time_factor_integral(eta, 1.0 + a1 - g, horizon)?,
    ];
    let lhs = terms[0] + terms[1] + terms[2];
    let rhs = terms[3] + terms[4];
    if !(lhs.is_finite() && rhs.is_finite()) {
        return Err(Error::Integration(
            "weak-form quadrature is not finite".into(),
        ));
    }
    Ok(WeakFormReport {
        lhs,
        rhs,
        residual: relative_difference(lhs, rhs),
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::{Mode, Orders};
    use crate::fraclap::SpaceGrid;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn phi1(eta: f64) -> impl Fn(f64) -> f64 {
        move |t| (1.0 - t).max(0.0).powf(eta)
    }

    #[test]
    fn slope_fit() {
        let r = ResidualReport::new("x", vec![4, 8, 16], vec![1.0, 0.25, 0.0625]);
        assert_relative_eq!(r.slope, 2.0, max_relative = 1e-12);
        assert!(r.is_decreasing());
        let z = ResidualReport::new("z", vec![4, 8], vec![0.0, 0.0]);
        assert_eq!(z.slope, f64::INFINITY);
    }

    #[test]
    fn ibp_square_against_phi1() {
        let a = FracOrder::new(0.5).unwrap();
        let r = check_ibp(|t| t * t, phi1(4.0), 1.0, a, &DEFAULT_SIZES).unwrap();
        // L1 on both sides with the trapezoid rule is a discrete adjoint pair
        assert!(r.final_residual() <= ROUNDING_FLOOR, "{r:?}");
        assert!(r.slope > 0.0);
    }

    #[test]
    fn ibp_constant_is_exact() {
        let a = FracOrder::new(0.3).unwrap();
        let r = check_ibp(|_| 2.5, phi1(3.0), 1.0, a, &[64, 128]).unwrap();
        assert!(r.residuals.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ibp_requires_terminal_zero() {
        let a = FracOrder::new(0.5).unwrap();
        let e = check_ibp(|t| t, |_| 1.0, 1.0, a, &[64]).unwrap_err();
        assert!(matches!(e, Error::Hypothesis(_)));
    }

    #[test]
    fn ibp_near_unit_order_matches_classical() {
        // ∫ g f' = -∫ f g' for f = t, g = (1-t)^2: both equal 1/3.
        let a = FracOrder::new(0.999).unwrap();
        let r = check_ibp(|t| t, phi1(2.0), 1.0, a, &[1 << 12]).unwrap();
        assert!(r.final_residual() < 5e-3);
    }

    #[test]
    fn composition_int_cases() {
        let r = check_composition_int(phi1(4.0), 1.0, 0.9, 0.4, &DEFAULT_SIZES).unwrap();
        assert!(r.final_residual() <= 0.02, "{r:?}");
        let same = check_composition_int(phi1(4.0), 1.0, 0.6, 0.6, &[1 << 10]).unwrap();
        assert!(same.final_residual() < 5e-3);
        let unit = check_composition_int(phi1(4.0), 1.0, 1.0, 0.5, &[1 << 12]).unwrap();
        assert!(unit.final_residual() <= 0.02);
        assert!(matches!(
            check_composition_int(phi1(4.0), 1.0, 0.3, 0.5, &[64]),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn composition_derivs_cases() {
        let r = check_composition_derivs(phi1(8.0), 1.0, 0.4, 0.4, &DEFAULT_SIZES).unwrap();
        assert!(r.final_residual() <= 0.02, "{r:?}");
        let id = check_composition_derivs(phi1(8.0), 1.0, 0.0, 0.7, &[1 << 10]).unwrap();
        assert_eq!(id.final_residual(), 0.0);
        let unit = check_composition_derivs(phi1(8.0), 1.0, 0.3, 0.7, &[1 << 12]).unwrap();
        assert!(unit.final_residual() <= 0.02);
        assert!(matches!(
            check_composition_derivs(|t| 1.0 - t, 1.0, 0.3, 0.3, &[64]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn terminal_power_sum_matches_its_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let f = TerminalPowerSum::random(&mut rng, 2.0);
            assert!(f.min_exponent() >= 2.0);
            assert!(f.eval(2.0).abs() < 1e-14);
            assert!((0.5..=1.5).contains(&f.eval(0.0)));
        }
        let f = TerminalPowerSum {
            horizon: 1.0,
            terms: vec![(1.0, 3.0), (-2.0, 4.0)],
        };
        let grid = TimeGrid::new(1.0, 1 << 12).unwrap();
        let numeric = right_derivative_any(&f.sample(grid), 0.6).unwrap();
        let closed = f.right_derivative_closed(0.6, grid).unwrap();
        assert!(relative_series_residual(&numeric, &closed).unwrap() < 1e-2);
    }

    fn weak_params() -> (ParamSet, TestFunctionParams, SpaceGrid) {
        let orders = Orders {
            alpha1: 0.5,
            alpha2: 0.3,
            gamma: 0.25,
            sigma: 0.5,
            delta: 0.7,
        };
        let ps = ParamSet::new(orders, 2.0, 1, Mode::Strict).unwrap();
        let tf = TestFunctionParams::for_params(&ps, 1.0, 1.0).unwrap();
        (ps, tf, SpaceGrid::new(1, 8.0, 64).unwrap())
    }

    #[test]
    fn weak_form_of_zero() {
        let (ps, tf, g) = weak_params();
        let time = TimeGrid::new(1.0, 16).unwrap();
        let u = FieldSeries::new(time, vec![Field::zeros(g); 17]).unwrap();
        let r = weak_form_residual(&u, &Field::zeros(g), &ps, &tf).unwrap();
        assert_eq!((r.lhs, r.rhs, r.residual), (0.0, 0.0, 0.0));
    }

    #[test]
    fn weak_form_rejects_mismatches() {
        let (ps, tf, g) = weak_params();
        let time = TimeGrid::new(2.0, 16).unwrap();
        let u = FieldSeries::new(time, vec![Field::zeros(g); 17]).unwrap();
        assert!(matches!(
            weak_form_residual(&u, &Field::zeros(g), &ps, &tf),
            Err(Error::Geometry(_))
        ));
        assert!(FieldSeries::new(time, vec![Field::zeros(g); 3]).is_err());
    }

    #[test]
    fn field_series_views() {
        let g = SpaceGrid::new(1, 1.0, 8).unwrap();
        let time = TimeGrid::new(1.0, 8).unwrap();
        let fields = (0..9).map(|k| Field::zeros(g).map(|_| k as f64)).collect();
        let s = FieldSeries::new(time, fields).unwrap();
        let c = s.coarsen(2).unwrap();
        assert_eq!(c.fields.len(), 5);
        assert_eq!(c.fields[4].values()[0], 8.0);
        let t = s.truncate(4).unwrap();
        assert_eq!(t.time.horizon(), 0.5);
        assert!(s.coarsen(3).is_err());
    }
}
