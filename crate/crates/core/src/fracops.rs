//! Fractional integrals and derivatives on uniform time grids.
//!
//! Left operators act from `t = 0`; right operators act toward the horizon
//! `T` and are obtained from the left ones by exact time reflection
//! `t -> T - t`. With the convention `D^θ_{t|T} = (-d/dt)^n I^{n-θ}_{t|T}`
//! the reflection carries no sign, so the discrete right operators are the
//! reflected left operators node for node.
//!
//! Quadratures:
//! * integrals use the left-endpoint product rectangle rule, the kernel
//!   `(t - τ)^{μ-1} / Γ(μ)` being integrated exactly over every cell;
//! * Caputo derivatives use the L1 scheme (piecewise-linear interpolant);
//! * Riemann–Liouville derivatives of order in `(0, 1)` are the exact
//!   derivatives of the piecewise-linear interpolant (L1 plus the
//!   `f(0) t^{-θ} / Γ(1-θ)` start term), and orders in `(1, 2)` add one
//!   finite difference on top of the order `θ - 1` result.

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};

/// A fractional order in `(0, 2)`, excluding the integer `1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 2.0) {
            return Err(Error::Order {
                value,
                reason: "must lie in (0, 2)".into(),
            });
        }
        if value == 1.0 {
            return Err(Error::Order {
                value,
                reason: "integer order; use classical differences".into(),
            });
        }
        Ok(FracOrder(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Uniform grid `t_j = j h`, `j = 0..=n`, on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Geometry(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(Error::Geometry(format!(
                "need at least 2 steps, got {steps}"
            )));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.steps {
            self.horizon
        } else {
            j as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |j| self.node(j))
    }

    /// Indices of the nodes in the middle `fraction` of the interval.
    pub fn middle_indices(&self, fraction: f64) -> std::ops::RangeInclusive<usize> {
        let margin = 0.5 * (1.0 - fraction) * self.horizon;
        let h = self.step();
        let lo = (margin / h).ceil() as usize;
        let hi = ((self.horizon - margin) / h).floor() as usize;
        lo..=hi.min(self.steps)
    }
}

/// Samples of a function of time on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Geometry(format!(
                "{} samples for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(TimeSeries { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        TimeSeries { grid, values }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        TimeSeries {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// The series of `f(T - t)`.
    pub fn reflect(&self) -> TimeSeries {
        let mut values = self.values.clone();
        values.reverse();
        TimeSeries {
            grid: self.grid,
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &TimeSeries, b: f64) -> Result<TimeSeries> {
        self.check_same_grid(other)?;
        Ok(TimeSeries {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn mul(&self, other: &TimeSeries) -> Result<TimeSeries> {
        self.check_same_grid(other)?;
        Ok(TimeSeries {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x * y)
                .collect(),
        })
    }

    /// Composite trapezoid rule over `[0, T]`.
    pub fn trapezoid(&self) -> f64 {
        let h = self.grid.step();
        let n = self.values.len();
        let inner: f64 = self.values[1..n - 1].iter().sum();
        h * (inner + 0.5 * (self.values[0] + self.values[n - 1]))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_same_grid(&self, other: &TimeSeries) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Geometry(
                "time series live on different grids".into(),
            ));
        }
        Ok(())
    }
}

fn require_finite(f: &TimeSeries) -> Result<()> {
    if let Some(j) = f.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite sample at node {j}")));
    }
    Ok(())
}

/// Product-rectangle weights `h^μ/Γ(μ+1) ((m+1)^μ - m^μ)`, `m = 0..len`.
pub fn rectangle_weights(mu: f64, h: f64, len: usize) -> Vec<f64> {
    let scale = h.powf(mu) / gamma(mu + 1.0);
    (0..len)
        .map(|m| {
            let m = m as f64;
            scale * ((m + 1.0).powf(mu) - m.powf(mu))
        })
        .collect()
}

/// L1 weights `b_m = (m+1)^{1-α} - m^{1-α}`, `m = 0..len`.
pub fn l1_weights(alpha: f64, len: usize) -> Vec<f64> {
    let e = 1.0 - alpha;
    (0..len)
        .map(|m| {
            let m = m as f64;
            (m + 1.0).powf(e) - m.powf(e)
        })
        .collect()
}

/// Left Riemann–Liouville integral `I^μ_{0|t} f` for `μ ∈ (0, 1]`.
///
/// Cell `[t_k, t_{k+1}]` carries the value `f(t_k)`; node 0 is 0.
pub fn rl_integral(f: &TimeSeries, mu: f64) -> Result<TimeSeries> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::Order {
            value: mu,
            reason: "integral order must lie in (0, 1]".into(),
        });
    }
    require_finite(f)?;
    let n = f.grid.steps();
    let w = rectangle_weights(mu, f.grid.step(), n);
    let fv = &f.values;
    let mut out = vec![0.0; n + 1];
    for (j, slot) in out.iter_mut().enumerate().skip(1) {
        *slot = (0..j).map(|k| w[j - 1 - k] * fv[k]).sum();
    }
    TimeSeries::new(f.grid, out)
}

/// Right Riemann–Liouville integral `I^μ_{t|T} f`.
pub fn rl_right_integral(f: &TimeSeries, mu: f64) -> Result<TimeSeries> {
    Ok(rl_integral(&f.reflect(), mu)?.reflect())
}

fn l1_sums(f: &[f64], alpha: f64, h: f64) -> Vec<f64> {
    let n = f.len() - 1;
    let b = l1_weights(alpha, n);
    let scale = h.powf(-alpha) / gamma(2.0 - alpha);
    let diffs: Vec<f64> = f.windows(2).map(|w| w[1] - w[0]).collect();
    let mut out = vec![0.0; n + 1];
    for (j, slot) in out.iter_mut().enumerate().skip(1) {
        let s: f64 = (0..j).map(|k| b[j - k - 1] * diffs[k]).sum();
        *slot = scale * s;
    }
    out
}

/// Left Caputo derivative by the L1 scheme, `α ∈ (0, 1)`.
pub fn caputo_left(f: &TimeSeries, alpha: FracOrder) -> Result<TimeSeries> {
    let a = alpha.value();
    if a >= 1.0 {
        return Err(Error::Order {
            value: a,
            reason: "Caputo order must lie in (0, 1)".into(),
        });
    }
    require_finite(f)?;
    TimeSeries::new(f.grid, l1_sums(&f.values, a, f.grid.step()))
}

/// Right Caputo derivative, the reflected [`caputo_left`].
pub fn caputo_right(f: &TimeSeries, alpha: FracOrder) -> Result<TimeSeries> {
    Ok(caputo_left(&f.reflect(), alpha)?.reflect())
}

fn rl_left_unit(f: &TimeSeries, theta: f64) -> Vec<f64> {
    let h = f.grid.step();
    let mut out = l1_sums(&f.values, theta, h);
    let f0 = f.values[0];
    if f0 != 0.0 {
        let c = f0 / gamma(1.0 - theta);
        out[0] = f0.signum() * f64::INFINITY;
        for (j, slot) in out.iter_mut().enumerate().skip(1) {
            *slot += c * f.grid.node(j).powf(-theta);
        }
    }
    out
}

/// Second-order finite-difference derivative with one-sided ends.
pub(crate) fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    for j in 1..n - 1 {
        d[j] = (values[j + 1] - values[j - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    d
}

/// Left Riemann–Liouville derivative `D^θ_{0|t} f`, `θ ∈ (0, 2) \ {1}`.
///
/// When `f(0) != 0` the value at node 0 is the signed infinity of the
/// interpolant's exact derivative.
pub fn rl_left_derivative(f: &TimeSeries, theta: FracOrder) -> Result<TimeSeries> {
    require_finite(f)?;
    let t = theta.value();
    let values = if t < 1.0 {
        rl_left_unit(f, t)
    } else {
        let inner = rl_left_unit(f, t - 1.0);
        derivative(&inner, f.grid.step())
    };
    TimeSeries::new(f.grid, values)
}

/// Right Riemann–Liouville derivative `D^θ_{t|T} f`, the reflected
/// [`rl_left_derivative`].
pub fn rl_right_derivative(f: &TimeSeries, theta: FracOrder) -> Result<TimeSeries> {
    Ok(rl_left_derivative(&f.reflect(), theta)?.reflect())
}

/// Right derivative accepting any order in `[0, 2)`, with the integer cases
/// handled classically (`D^0 = id`, `D^1_{t|T} = -d/dt`).
pub fn right_derivative_any(f: &TimeSeries, order: f64) -> Result<TimeSeries> {
    if order == 0.0 {
        return Ok(f.clone());
    }
    if order == 1.0 {
        require_finite(f)?;
        let d = derivative(&f.values, f.grid.step());
        return TimeSeries::new(f.grid, d.into_iter().map(|v| -v).collect());
    }
    rl_right_derivative(f, FracOrder::new(order)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Closed form of a fractional derivative of a power function.
///
/// Left: `D^θ_{0|t} t^β = c t^{β-θ}`. Right:
/// `D^θ_{t|T} (1 - t/T)^β = c T^{-θ} (1 - t/T)^{β-θ}`, with
/// `c = Γ(β+1) / Γ(β+1-θ)` in both cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRule {
    pub coefficient: f64,
    pub exponent: f64,
    pub order: f64,
    pub side: Side,
}

impl PowerRule {
    pub fn eval(&self, t: f64, horizon: f64) -> f64 {
        match self.side {
            Side::Left => self.coefficient * t.powf(self.exponent),
            Side::Right => {
                let s = (1.0 - t / horizon).max(0.0);
                self.coefficient * horizon.powf(-self.order) * s.powf(self.exponent)
            }
        }
    }

    pub fn sample(&self, grid: &TimeGrid) -> TimeSeries {
        let horizon = grid.horizon();
        TimeSeries::from_fn(*grid, |t| self.eval(t, horizon))
    }
}

/// `Γ(β+1) / Γ(β+1-θ)`, evaluated through log-gamma.
pub fn gamma_ratio(beta: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        return 1.0;
    }
    (ln_gamma(beta + 1.0) - ln_gamma(beta + 1.0 - theta)).exp()
}

pub fn power_rule(beta: f64, theta: f64, side: Side) -> Result<PowerRule> {
    if !(beta >= 0.0) || !(theta >= 0.0) {
        return Err(Error::Parameter(format!(
            "power rule needs beta >= 0 and theta >= 0, got beta = {beta}, theta = {theta}"
        )));
    }
    if beta - theta <= -1.0 {
        return Err(Error::Singularity { beta, theta });
    }
    Ok(PowerRule {
        coefficient: gamma_ratio(beta, theta),
        exponent: beta - theta,
        order: theta,
        side,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn frac_order_rejects_integers_and_range() {
        assert!(FracOrder::new(1.0).is_err());
        assert!(FracOrder::new(0.0).is_err());
        assert!(FracOrder::new(2.0).is_err());
        assert!(FracOrder::new(f64::NAN).is_err());
        assert!(FracOrder::new(1.5).is_ok());
    }

    #[test]
    fn grid_nodes_hit_the_horizon() {
        let g = TimeGrid::new(3.0, 7).unwrap();
        assert_eq!(g.node(7), 3.0);
        assert_eq!(g.len(), 8);
        assert!(TimeGrid::new(1.0, 1).is_err());
    }

    #[test]
    fn unit_order_integral_is_the_classical_integral() {
        let g = grid(64);
        let one = TimeSeries::from_fn(g, |_| 1.0);
        let out = rl_integral(&one, 1.0).unwrap();
        for (j, v) in out.values().iter().enumerate() {
            assert_relative_eq!(*v, g.node(j), epsilon = 1e-12);
        }
    }

    #[test]
    fn half_integral_of_one() {
        let g = grid(256);
        let one = TimeSeries::from_fn(g, |_| 1.0);
        let out = rl_integral(&one, 0.5).unwrap();
        // t^{1/2}/Γ(3/2) = 2/√π at t = 1
        let expected = 2.0 / std::f64::consts::PI.sqrt();
        assert_relative_eq!(out.values()[256], expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 1.1283791670955126, max_relative = 1e-15);
    }

    #[test]
    fn integral_is_linear() {
        let g = grid(100);
        let f = TimeSeries::from_fn(g, |t| t.sin());
        let k = TimeSeries::from_fn(g, |t| (2.0 * t).exp());
        let lhs = rl_integral(&f.combine(2.0, &k, -3.0).unwrap(), 0.4).unwrap();
        let rhs = rl_integral(&f, 0.4)
            .unwrap()
            .combine(2.0, &rl_integral(&k, 0.4).unwrap(), -3.0)
            .unwrap();
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn integral_rejects_non_finite() {
        let g = grid(4);
        let f = TimeSeries::new(g, vec![0.0, 1.0, f64::NAN, 1.0, 0.0]).unwrap();
        assert!(matches!(rl_integral(&f, 0.5), Err(Error::Input(_))));
        assert!(matches!(rl_integral(&f, 1.5), Err(Error::Order { .. })));
    }

    #[test]
    fn caputo_kills_constants() {
        let g = grid(50);
        let c = TimeSeries::from_fn(g, |_| 3.7);
        let out = caputo_left(&c, FracOrder::new(0.3).unwrap()).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
        let out = caputo_right(&c, FracOrder::new(0.3).unwrap()).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn caputo_of_linear_function_is_exact() {
        // L1 is exact on piecewise-linear data: D^{1/2} t = t^{1/2}/Γ(3/2).
        let g = grid(128);
        let f = TimeSeries::from_fn(g, |t| t);
        let out = caputo_left(&f, FracOrder::new(0.5).unwrap()).unwrap();
        assert_relative_eq!(out.values()[128], 1.1283791670955126, max_relative = 1e-12);
    }

    #[test]
    fn caputo_of_square_matches_power_rule() {
        let g = grid(4096);
        let f = TimeSeries::from_fn(g, |t| t * t);
        let out = caputo_left(&f, FracOrder::new(0.3).unwrap()).unwrap();
        let rule = power_rule(2.0, 0.3, Side::Left).unwrap();
        for j in g.middle_indices(0.9) {
            let exact = rule.eval(g.node(j), 1.0);
            assert_relative_eq!(out.values()[j], exact, max_relative = 1e-2);
        }
        // Γ(3)/Γ(2.7) cross-check against the raw gamma function
        assert_relative_eq!(rule.coefficient, 2.0 / gamma(2.7), max_relative = 1e-12);
    }

    #[test]
    fn caputo_rejects_orders_above_one() {
        let g = grid(8);
        let f = TimeSeries::zeros(g);
        assert!(caputo_left(&f, FracOrder::new(1.5).unwrap()).is_err());
    }

    #[test]
    fn right_derivative_of_phi1_at_origin() {
        let n = 1 << 14;
        let g = grid(n);
        let f = TimeSeries::from_fn(g, |t| (1.0 - t).powi(2));
        let out = rl_right_derivative(&f, FracOrder::new(0.5).unwrap()).unwrap();
        let exact = 2.0 / gamma(2.5);
        assert_relative_eq!(exact, 1.5045055561, max_relative = 1e-9);
        assert_relative_eq!(out.values()[0], exact, max_relative = 1e-3);
    }

    #[test]
    fn right_derivative_of_zero_is_zero() {
        let g = grid(32);
        let out = rl_right_derivative(&TimeSeries::zeros(g), FracOrder::new(1.4).unwrap()).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn right_operators_are_reflected_left_operators() {
        let g = grid(200);
        let f = TimeSeries::from_fn(g, |t| (1.0 - t).powi(3) * (1.0 + t));
        for theta in [0.3, 0.8, 1.4] {
            let th = FracOrder::new(theta).unwrap();
            let right = rl_right_derivative(&f, th).unwrap();
            let left = rl_left_derivative(&f.reflect(), th).unwrap();
            for j in 0..=200 {
                assert_eq!(right.values()[j], left.values()[200 - j]);
            }
        }
    }

    #[test]
    fn caputo_right_of_linear_decay() {
        let g = grid(512);
        let f = TimeSeries::from_fn(g, |t| 1.0 - t);
        let out = caputo_right(&f, FracOrder::new(0.5).unwrap()).unwrap();
        assert_relative_eq!(out.values()[0], 1.1283791670955126, max_relative = 1e-12);
    }

    #[test]
    fn caputo_right_equals_rl_right_when_terminal_value_vanishes() {
        let g = grid(1024);
        let f = TimeSeries::from_fn(g, |t| (1.0 - t) * (2.0 + t.cos()));
        let a = FracOrder::new(0.6).unwrap();
        let c = caputo_right(&f, a).unwrap();
        let r = rl_right_derivative(&f, a).unwrap();
        for j in 0..1024 {
            assert_relative_eq!(c.values()[j], r.values()[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn power_rule_limits() {
        let id = power_rule(3.0, 0.0, Side::Left).unwrap();
        assert_eq!(id.coefficient, 1.0);
        assert_eq!(id.exponent, 3.0);
        let d1 = power_rule(1.0, 1.0, Side::Left).unwrap();
        assert_relative_eq!(d1.coefficient, 1.0, max_relative = 1e-12);
        assert_eq!(d1.exponent, 0.0);
        assert!(matches!(
            power_rule(0.2, 1.5, Side::Right),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn unit_order_right_derivative_is_minus_classical() {
        let g = grid(400);
        let f = TimeSeries::from_fn(g, |t| (1.0 - t).powi(4));
        let d = right_derivative_any(&f, 1.0).unwrap();
        for j in 1..400 {
            let t = g.node(j);
            assert_relative_eq!(d.values()[j], 4.0 * (1.0 - t).powi(3), epsilon = 1e-4);
        }
    }
}
