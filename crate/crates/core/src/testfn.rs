//! Test functions of the nonexistence argument.
//!
//! `φ₁(t) = (1 - t/T)^η` on `[0, T]` carries the time dependence and
//! `φ₂(x) = ψ(|x| B / T^{θ/2})` the space dependence, with `ψ` the smooth
//! bump of radius 2 returned by [`bump`].
//!
//! Closed forms use the power-rule constant `Γ(η+1)/Γ(η+1-θ)`; every one of
//! them has a quadrature counterpart built on [`crate::fracops`] so the
//! constant is checked rather than assumed.

use crate::error::{Error, Result};
use crate::exponents::{conjugate, ParamSet};
use crate::fraclap::{Field, SpaceGrid, Spectral};
use crate::fracops::{gamma_ratio, power_rule, right_derivative_any, Side, TimeGrid, TimeSeries};

/// `ψ(r) = exp(1 - 1/(1 - (r/2)²))` for `r < 2`, else 0; `ψ(0) = 1`.
pub fn bump(r: f64) -> f64 {
    let q = 0.5 * r;
    let d = 1.0 - q * q;
    if d <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / d).exp()
    }
}

/// Parameters of `φ₁ φ₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunctionParams {
    eta: f64,
    horizon: f64,
    theta: f64,
    b: f64,
    p: f64,
}

impl TestFunctionParams {
    pub fn new(eta: f64, horizon: f64, theta: f64, b: f64, p: f64) -> Result<Self> {
        if !(eta >= 2.0) {
            return Err(Error::Parameter(format!("η = {eta} must be at least 2")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Parameter(format!("T = {horizon} must be positive")));
        }
        if !(theta > 0.0) {
            return Err(Error::Parameter(format!("θ = {theta} must be positive")));
        }
        if !(b >= 1.0) || (b > 1.0 && b >= horizon) {
            return Err(Error::Parameter(format!(
                "B = {b} must satisfy 1 <= B < T (B = 1 is always allowed)"
            )));
        }
        if !(p > 1.0) {
            return Err(Error::Parameter(format!("p = {p} must exceed 1")));
        }
        Ok(TestFunctionParams {
            eta,
            horizon,
            theta,
            b,
            p,
        })
    }

    /// Default choice for a parameter set: `θ = (α₁+1)/σ` and
    /// `η = max(8, ⌈p'(2+α₁-γ)⌉ + 2)`.
    pub fn for_params(params: &ParamSet, horizon: f64, b: f64) -> Result<Self> {
        TestFunctionParams::new(default_eta(params), horizon, params.theta(), b, params.p())
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn p_conj(&self) -> f64 {
        conjugate(self.p)
    }

    /// Radius scale `T^{θ/2} / B` of `φ₂`.
    pub fn spatial_scale(&self) -> f64 {
        self.horizon.powf(0.5 * self.theta) / self.b
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        TestFunctionParams::new(self.eta, horizon, self.theta, self.b, self.p)
    }

    /// Requires `η > p' θ_max - 1` for the largest order `θ_max` in use.
    pub fn check_max_order(&self, theta_max: f64) -> Result<()> {
        let bound = self.p_conj() * theta_max - 1.0;
        if self.eta > bound {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "η = {} must exceed p'θ_max - 1 = {bound}",
                self.eta
            )))
        }
    }
}

pub fn default_eta(params: &ParamSet) -> f64 {
    let need = (params.p_conj() * (2.0 + params.alpha1() - params.gamma())).ceil() + 2.0;
    need.max(8.0)
}

/// Dimensionless coordinates `τ = t/T`, `ξ = |x| / T^{θ/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledPoint {
    pub tau: f64,
    pub xi: f64,
}

impl ScaledPoint {
    pub fn new(t: f64, radius: f64, horizon: f64, theta: f64) -> Result<Self> {
        if !(0.0..=horizon).contains(&t) || radius < 0.0 {
            return Err(Error::Parameter(format!(
                "point (t = {t}, |x| = {radius}) outside [0, T] x [0, ∞)"
            )));
        }
        Ok(ScaledPoint {
            tau: t / horizon,
            xi: radius / horizon.powf(0.5 * theta),
        })
    }
}

fn time_grid(tf: &TestFunctionParams, steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(tf.horizon, steps)
}

/// `φ₁` sampled on `steps` cells of `[0, T]`.
pub fn phi1(tf: &TestFunctionParams, steps: usize) -> Result<TimeSeries> {
    let grid = time_grid(tf, steps)?;
    let (eta, t_end) = (tf.eta, tf.horizon);
    Ok(TimeSeries::from_fn(grid, |t| {
        (1.0 - t / t_end).max(0.0).powf(eta)
    }))
}

/// `D^θ_{t|T} φ₁ = Γ(η+1)/Γ(η+1-θ) T^{-θ} (1 - t/T)^{η-θ}` for any `θ >= 0`.
pub fn phi1_right_derivative_closed(
    tf: &TestFunctionParams,
    order: f64,
    steps: usize,
) -> Result<TimeSeries> {
    let rule = power_rule(tf.eta, order, Side::Right)?;
    Ok(rule.sample(&time_grid(tf, steps)?))
}

/// `∫₀^T D^θ φ₁ dt = Γ(η+1) / (Γ(η+1-θ)(η-θ+1)) T^{1-θ}`.
pub fn time_factor_integral(eta: f64, order: f64, horizon: f64) -> Result<f64> {
    if eta - order <= -1.0 {
        return Err(Error::Parameter(format!(
            "∫ D^θ φ₁ diverges for η = {eta}, θ = {order}"
        )));
    }
    Ok(gamma_ratio(eta, order) / (eta - order + 1.0) * horizon.powf(1.0 - order))
}

/// Trapezoid rule applied to the numerical right derivative of `φ₁`.
pub fn time_factor_integral_quadrature(
    eta: f64,
    order: f64,
    horizon: f64,
    steps: usize,
) -> Result<f64> {
    time_factor_integral(eta, order, horizon)?;
    let tf = TestFunctionParams::new(eta.max(2.0), horizon, 1.0, 1.0, 2.0)?;
    let f = phi1(&TestFunctionParams { eta, ..tf }, steps)?;
    Ok(right_derivative_any(&f, order)?.trapezoid())
}

/// `∫₀^T φ₁^{-p'/p} |D^θ φ₁|^{p'} dt = [Γ(η+1)/Γ(η+1-θ)]^{p'} / (η - p'θ + 1) T^{1-p'θ}`.
pub fn weighted_time_factor_integral(eta: f64, order: f64, p: f64, horizon: f64) -> Result<f64> {
    let pc = conjugate(p);
    if eta <= pc * order - 1.0 {
        return Err(Error::Parameter(format!(
            "∫ φ₁^(-p'/p)|D^θ φ₁|^p' diverges: η = {eta} <= p'θ - 1 = {}",
            pc * order - 1.0
        )));
    }
    Ok(
        gamma_ratio(eta, order).powf(pc) / (eta - pc * order + 1.0)
            * horizon.powf(1.0 - pc * order),
    )
}

fn weighted_power_integral(phi: &TimeSeries, deriv: &TimeSeries, p: f64) -> f64 {
    let pc = conjugate(p);
    let w = pc / p;
    let integrand: Vec<f64> = phi
        .values()
        .iter()
        .zip(deriv.values())
        .map(|(&f, &d)| {
            if f > 0.0 {
                f.powf(-w) * d.abs().powf(pc)
            } else {
                0.0
            }
        })
        .collect();
    TimeSeries::new(*phi.grid(), integrand)
        .expect("same grid")
        .trapezoid()
}

/// Quadrature counterpart of [`weighted_time_factor_integral`] using the numerical
/// right derivative.
pub fn weighted_time_factor_integral_quadrature(
    eta: f64,
    order: f64,
    p: f64,
    horizon: f64,
    steps: usize,
) -> Result<f64> {
    weighted_time_factor_integral(eta, order, p, horizon)?;
    let tf = TestFunctionParams::new(eta.max(2.0), horizon, 1.0, 1.0, 2.0)?;
    let f = phi1(&TestFunctionParams { eta, ..tf }, steps)?;
    let d = right_derivative_any(&f, order)?;
    Ok(weighted_power_integral(&f, &d, p))
}

/// Same integral with the closed-form derivative sampled on the grid.
pub fn weighted_time_factor_integral_sampled(
    eta: f64,
    order: f64,
    p: f64,
    horizon: f64,
    steps: usize,
) -> Result<f64> {
    weighted_time_factor_integral(eta, order, p, horizon)?;
    let tf = TestFunctionParams::new(eta.max(2.0), horizon, 1.0, 1.0, 2.0)?;
    let tf = TestFunctionParams { eta, ..tf };
    let f = phi1(&tf, steps)?;
    let d = phi1_right_derivative_closed(&tf, order, steps)?;
    Ok(weighted_power_integral(&f, &d, p))
}

/// `φ₂(x) = ψ(|x| / (B^{-1} T^{θ/2}))` on `grid`.
pub fn phi2(grid: &SpaceGrid, horizon: f64, theta: f64, b: f64) -> Result<Field> {
    let scale = horizon.powf(0.5 * theta) / b;
    if 2.0 * scale > grid.half_length() {
        return Err(Error::Geometry(format!(
            "support radius {} exceeds the box half-length {}",
            2.0 * scale,
            grid.half_length()
        )));
    }
    Ok(Field::from_fn(*grid, |x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        bump(r / scale)
    }))
}

/// Measured and predicted `T`-exponents of the three terms bounding
/// `∫|u|^p φ₁φ₂` after Young's inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingProbe {
    pub horizons: [f64; 2],
    /// `log₂(term(2T)/term(T))` for the `D^{2+α₁-γ}`, damping and
    /// `(-Δ)^σ` terms.
    pub measured: [f64; 3],
    /// `-p'(2+α₁-γ)+θN/2+1`, `-p'(θδ+1+α₂-γ)+θN/2+1`, `-p'(θσ+1-γ)+θN/2+1`.
    pub predicted: [f64; 3],
}

/// Resolution of [`scaling_exponent_probe`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub time_steps: usize,
    /// Grid points per spatial scale `T^{θ/2}` at the smaller horizon.
    pub points_per_scale: usize,
    /// Box half-length in units of the larger spatial scale. Periodic images
    /// bias the nonlocal terms by `O(box_factor^{-2})`.
    pub box_factor: f64,
    /// The ratio terms are integrated over `|x| <= ratio_radius · T^{θ/2}`,
    /// where `φ₂ > 0`.
    pub ratio_radius: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            time_steps: 1 << 12,
            points_per_scale: 32,
            box_factor: 32.0,
            ratio_radius: 1.5,
        }
    }
}

/// Evaluates the three space-time integrals at `T` and `2T` and returns
/// their measured log₂-ratios.
pub fn scaling_exponent_probe(
    params: &ParamSet,
    horizon: f64,
    cfg: &ProbeConfig,
) -> Result<ScalingProbe> {
    let dim = params.dim();
    if dim > 2 {
        return Err(Error::Unsupported(format!(
            "scaling probe supports N = 1, 2, got {dim}"
        )));
    }
    let (a1, a2, g) = (params.alpha1(), params.alpha2(), params.gamma());
    let (sg, dl) = (params.sigma(), params.delta());
    let theta = params.theta();
    let p = params.p();
    let pc = params.p_conj();
    let orders = [2.0 + a1 - g, 1.0 + a2 - g, 1.0 - g];
    let n = dim as f64;
    let predicted = [
        -pc * orders[0] + theta * n / 2.0 + 1.0,
        -pc * (theta * dl + orders[1]) + theta * n / 2.0 + 1.0,
        -pc * (theta * sg + orders[2]) + theta * n / 2.0 + 1.0,
    ];

    let horizons = [horizon, 2.0 * horizon];
    let small = horizon.powf(0.5 * theta);
    let large = (2.0 * horizon).powf(0.5 * theta);
    let half_length = cfg.box_factor * large;
    let wanted = (2.0 * half_length / small * cfg.points_per_scale as f64).ceil() as usize;
    let points = wanted.next_power_of_two().max(8);
    let grid = SpaceGrid::new(dim, half_length, points)?;
    let spectral = Spectral::new(grid);

    let mut terms = [[0.0; 3]; 2];
    for (slot, &t_end) in terms.iter_mut().zip(&horizons) {
        let tf = TestFunctionParams::new(default_eta(params), t_end, theta, 1.0, p)?;
        tf.check_max_order(orders[0])?;
        let phi = phi1(&tf, cfg.time_steps)?;
        let mut time = [0.0; 3];
        for (k, &ord) in orders.iter().enumerate() {
            let d = phi1_right_derivative_closed(&tf, ord, cfg.time_steps)?;
            time[k] = weighted_power_integral(&phi, &d, p);
        }

        let scale = tf.spatial_scale();
        let phi2 = phi2(&grid, t_end, theta, 1.0)?;
        let mass = phi2.integral();
        let ratio_term = |lap: &Field| -> f64 {
            let vol = grid.cell_volume();
            (0..grid.len())
                .filter(|&i| grid.radius(i) <= cfg.ratio_radius * scale)
                .map(|i| {
                    let v = phi2.values()[i];
                    v.powf(-pc / p) * lap.values()[i].abs().powf(pc)
                })
                .sum::<f64>()
                * vol
        };
        let lap_delta = spectral.apply(&phi2, dl)?;
        let lap_sigma = spectral.apply(&phi2, sg)?;
        let space = [mass, ratio_term(&lap_delta), ratio_term(&lap_sigma)];
        for k in 0..3 {
            slot[k] = time[k] * space[k];
        }
    }

    let mut measured = [0.0; 3];
    for k in 0..3 {
        let m = (terms[1][k] / terms[0][k]).log2();
        if !m.is_finite() {
            return Err(Error::Integration(format!(
                "term {} produced a non-finite ratio",
                k + 1
            )));
        }
        measured[k] = m;
    }
    Ok(ScalingProbe {
        horizons,
        measured,
        predicted,
    })
}
