//! Experiment orchestration behind the command-line tool: the verification
//! suite, exponent queries, single simulations and parameter sweeps.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::exponents::{
    critical_exponent, global_decay_exponent, local_nonexistence_exponent, system_dimension_bound,
    t_natural, Mode, Orders, ParamSet, SystemParamSet,
};
use crate::fraclap::{
    bump_power_check, cross_method_1d, BumpPowerConfig, QuadratureConfig, SpaceGrid,
};
use crate::fracops::{gamma_ratio, right_derivative_any, FracOrder, TimeGrid};
use crate::identities::{
    check_composition_derivs, check_composition_int, check_ibp, relative_series_residual,
    TerminalPowerSum, DEFAULT_SIZES,
};
use crate::solver::{run, run_system, DataSpec, SimConfig, SimResult, Status, SystemConfig};
use crate::testfn::{
    bump, phi1, scaling_exponent_probe, time_factor_integral, weighted_time_factor_integral,
    ProbeConfig, TestFunctionParams,
};

/// Orders and powers as read from a config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub alpha1: f64,
    pub alpha2: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub delta: f64,
    pub p: f64,
    pub dim: usize,
    pub mode: Mode,
    /// Radius `R` of the lifespan bound.
    pub radius: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection {
            alpha1: 0.5,
            alpha2: 0.3,
            gamma: 0.25,
            sigma: 0.5,
            delta: 0.7,
            p: 2.0,
            dim: 1,
            mode: Mode::Strict,
            radius: 1.0,
        }
    }
}

impl ParamsSection {
    pub fn orders(&self) -> Orders {
        Orders {
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            gamma: self.gamma,
            sigma: self.sigma,
            delta: self.delta,
        }
    }

    pub fn param_set(&self) -> Result<ParamSet> {
        ParamSet::new(self.orders(), self.p, self.dim, self.mode)
    }
}

/// Two blocks of the coupled system.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub first: Orders,
    pub second: Orders,
    pub p: f64,
    pub q: f64,
    pub dim: usize,
    pub mode: Mode,
}

impl Default for SystemSection {
    fn default() -> Self {
        let o = ParamsSection::default().orders();
        SystemSection {
            first: o,
            second: o,
            p: 2.0,
            q: 2.0,
            dim: 1,
            mode: Mode::Strict,
        }
    }
}

impl SystemSection {
    pub fn param_set(&self) -> Result<SystemParamSet> {
        SystemParamSet::new(self.first, self.second, self.p, self.q, self.dim, self.mode)
    }

    pub fn with_powers(&self, p: f64, q: f64) -> Result<SystemParamSet> {
        SystemParamSet::new(self.first, self.second, p, q, self.dim, self.mode)
    }
}

/// Grid, data and stopping rule of a simulation.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub amplitude: f64,
    pub width: f64,
    /// Amplitude of `v₁` in system runs.
    pub amplitude_v: f64,
    pub points: usize,
    /// Box half-length; defaults to 20 widths.
    pub half_length: Option<f64>,
    pub horizon: f64,
    pub step: f64,
    pub threshold: f64,
    pub nonlinearity: bool,
    pub enforce_hypotheses: bool,
    pub snapshot_every: Option<usize>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            amplitude: 1.0,
            width: 1.0,
            amplitude_v: 1.0,
            points: 256,
            half_length: None,
            horizon: 50.0,
            step: 1e-2,
            threshold: crate::solver::DEFAULT_THRESHOLD,
            nonlinearity: true,
            enforce_hypotheses: true,
            snapshot_every: None,
        }
    }
}

impl SimulationSection {
    pub fn space(&self, dim: usize) -> Result<SpaceGrid> {
        SpaceGrid::new(
            dim,
            self.half_length.unwrap_or(20.0 * self.width),
            self.points,
        )
    }

    pub fn time(&self) -> Result<TimeGrid> {
        if !(self.step > 0.0 && self.horizon > 0.0) {
            return Err(Error::Parameter("horizon and step must be positive".into()));
        }
        let steps = (self.horizon / self.step).round() as usize;
        if ((steps as f64) * self.step - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::Parameter(format!(
                "horizon {} is not a multiple of the step {}",
                self.horizon, self.step
            )));
        }
        TimeGrid::new(self.horizon, steps)
    }

    pub fn scalar_config(&self, params: ParamSet) -> Result<SimConfig> {
        let mut cfg = SimConfig::new(
            params,
            self.space(params.dim())?,
            self.time()?,
            DataSpec::bump(self.amplitude, self.width),
        );
        cfg.threshold = self.threshold;
        cfg.nonlinearity = self.nonlinearity;
        cfg.enforce_hypotheses = self.enforce_hypotheses;
        cfg.snapshot_every = self.snapshot_every;
        Ok(cfg)
    }

    pub fn system_config(&self, params: SystemParamSet) -> Result<SystemConfig> {
        let mut cfg = SystemConfig::new(
            params,
            self.space(params.dim())?,
            self.time()?,
            DataSpec::bump(self.amplitude, self.width),
            DataSpec::bump(self.amplitude_v, self.width),
        );
        cfg.threshold = self.threshold;
        cfg.source_u = self.nonlinearity;
        cfg.source_v = self.nonlinearity;
        cfg.enforce_hypotheses = self.enforce_hypotheses;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub p_values: Vec<f64>,
    /// `(p, q)` pairs of a system sweep.
    pub pairs: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Replaces every per-check tolerance.
    pub tol: Option<f64>,
    pub seed: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { tol: None, seed: 7 }
    }
}

/// Contents of a config file, one table per concern.
#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub params: ParamsSection,
    pub system: SystemSection,
    pub simulation: SimulationSection,
    pub sweep: SweepSection,
    pub verify: VerifySection,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Input(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> std::io::Result<std::result::Result<Self, Error>> {
        Ok(ExperimentSpec::from_toml(&std::fs::read_to_string(path)?))
    }
}

/// Sweep values must exceed 1 and increase strictly.
pub fn validate_p_list(values: &[f64]) -> Result<()> {
    for &p in values {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Parameter(format!(
                "sweep value p = {p} must be a finite value > 1"
            )));
        }
    }
    for w in values.windows(2) {
        if w[1] == w[0] {
            return Err(Error::Parameter(format!(
                "duplicate sweep value p = {}",
                w[0]
            )));
        }
        if w[1] < w[0] {
            return Err(Error::Parameter(format!(
                "sweep values must be ascending: {} after {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

/// `%.12g`-style formatting; non-finite values print as `inf`, `-inf`, `nan`.
pub fn format_g12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn opt_g12(x: Option<f64>) -> String {
    x.map(format_g12).unwrap_or_default()
}

/// Outcome of one check of the verification suite.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub slope: Option<f64>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = write!(
                out,
                "[{}] {} residual={} tol={}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                format_g12(c.residual),
                format_g12(c.tol)
            );
            if let Some(s) = c.slope {
                let _ = write!(out, " slope={}", format_g12(s));
            }
            if !c.detail.is_empty() {
                let _ = write!(out, " ({})", c.detail);
            }
            out.push('\n');
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(
            out,
            "summary: {} checks, {} failed",
            self.checks.len(),
            failed
        );
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub tol_override: Option<f64>,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tol_override: None,
            seed: 7,
        }
    }
}

fn outcome(name: &str, residual: Result<(f64, Option<f64>, String)>, tol: f64) -> CheckOutcome {
    match residual {
        Ok((r, slope, detail)) => CheckOutcome {
            name: name.into(),
            residual: r,
            tol,
            slope,
            passed: r <= tol && slope.is_none_or(|s| s > 0.0),
            detail,
        },
        Err(e) => CheckOutcome {
            name: name.into(),
            residual: f64::NAN,
            tol,
            slope: None,
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Power-rule check of the right derivative of `φ₁` (`η = 8`, `θ = 0.7`,
/// `T = 1`, `n = 2^12`) against `coefficient(η, θ) T^{-θ}(1 - t/T)^{η-θ}`.
///
/// Returns the relative residual over the middle 90% of nodes.
pub fn phi1_derivative_residual(
    coefficient: &dyn Fn(f64, f64) -> f64,
    steps: usize,
) -> Result<f64> {
    let (eta, theta) = (8.0, 0.7);
    let tf = TestFunctionParams::new(eta, 1.0, 1.0, 1.0, 2.0)?;
    let f = phi1(&tf, steps)?;
    let numeric = right_derivative_any(&f, theta)?;
    let c = coefficient(eta, theta);
    let closed = f.map(|v| c * v.powf((eta - theta) / eta));
    relative_series_residual(&numeric, &closed)
}

/// [`phi1_derivative_residual`] as a suite check, with an injectable constant.
pub fn phi1_derivative_check(coefficient: &dyn Fn(f64, f64) -> f64, tol: f64) -> CheckOutcome {
    outcome(
        "power rule for the right derivative of φ₁",
        phi1_derivative_residual(coefficient, 1 << 12).map(|r| (r, None, String::new())),
        tol,
    )
}

/// Maximum residual over seeded random smooth inputs, paired with the
/// smallest fitted slope.
fn random_identity(seed: u64, count: usize, derivs: bool) -> Result<(f64, Option<f64>, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut min_slope) = (0.0f64, f64::INFINITY);
    for _ in 0..count {
        let f = TerminalPowerSum::random(&mut rng, 1.0);
        let report = if derivs {
            let p = rand::Rng::gen_range(&mut rng, 0.1..0.9);
            let q = rand::Rng::gen_range(&mut rng, 0.1..0.9);
            check_composition_derivs(|t| f.eval(t), 1.0, p, q, &DEFAULT_SIZES)?
        } else {
            let p = rand::Rng::gen_range(&mut rng, 0.2..0.95);
            let q = rand::Rng::gen_range(&mut rng, 0.05..p);
            check_composition_int(|t| f.eval(t), 1.0, p, q, &DEFAULT_SIZES)?
        };
        worst = worst.max(report.final_residual());
        min_slope = min_slope.min(report.slope);
    }
    Ok((worst, Some(min_slope), format!("{count} seeded inputs")))
}

/// Worst deviation of the measured `T`-exponents of both integrals of the
/// time test function from `1 - θ` and `1 - p'θ`, at a fixed step of
/// `1 / steps_per_unit` (the grid at `2T` has twice the nodes).
pub fn time_factor_scaling_deviation(steps_per_unit: usize) -> Result<f64> {
    let (eta, p) = (8.0, 2.0);
    let pc = crate::exponents::conjugate(p);
    let mut worst = 0.0f64;
    for order in [0.5, 1.3] {
        let steps = |t: f64| (t * steps_per_unit as f64).round() as usize;
        let one = |t: f64| crate::testfn::time_factor_integral_quadrature(eta, order, t, steps(t));
        let two = |t: f64| {
            crate::testfn::weighted_time_factor_integral_quadrature(eta, order, p, t, steps(t))
        };
        let e1 = (one(2.0)? / one(1.0)?).log2();
        let e2 = (two(2.0)? / two(1.0)?).log2();
        worst = worst
            .max((e1 - (1.0 - order)).abs())
            .max((e2 - (1.0 - pc * order)).abs());
    }
    Ok(worst)
}

/// Maximum relative difference between the spectral and singular-integral
/// fractional Laplacian of the bump (`N = 1`, `s = 0.5`, `M = 512`).
pub fn cross_method_deviation() -> Result<f64> {
    let grid = SpaceGrid::new(1, 32.0, 512)?;
    let samples = cross_method_1d(
        &bump,
        0.5,
        &grid,
        &[0.0, 0.5, 1.0, 1.5],
        &QuadratureConfig::default(),
    )?;
    Ok(samples
        .iter()
        .map(|s| s.relative_difference())
        .fold(0.0, f64::max))
}

/// Relative change of `C₁`, `C₂` when the quadrature is refined.
pub fn bump_power_stability(p: f64) -> Result<(f64, String)> {
    let psi = |x: &[f64]| bump(x[0].abs());
    let base = BumpPowerConfig::default();
    let fine = BumpPowerConfig {
        quadrature: base.quadrature.refined(),
        ..base.clone()
    };
    let a = bump_power_check(&psi, 1, 0.5, p, &base)?;
    let b = bump_power_check(&psi, 1, 0.5, p, &fine)?;
    let change = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1e-30);
    let worst = change(a.c1_estimate, b.c1_estimate).max(change(a.c2_estimate, b.c2_estimate));
    let finite = a.c1_estimate.is_finite() && a.c2_estimate.is_finite();
    if !finite {
        return Err(Error::Integration(
            "bump power constants are not finite".into(),
        ));
    }
    Ok((
        worst,
        format!(
            "C1={} C2={} c2_bounded_near_edge={}",
            format_g12(a.c1_estimate),
            format_g12(a.c2_estimate),
            a.c2_bounded
        ),
    ))
}

/// Worst deviation of the exponent calculators from hand-computed values.
pub fn exponent_table_deviation() -> Result<f64> {
    let o = |a1, a2, g, s, d| Orders {
        alpha1: a1,
        alpha2: a2,
        gamma: g,
        sigma: s,
        delta: d,
    };
    let scalar = |orders: Orders, p: f64| ParamSet::new(orders, p, 1, Mode::Permissive);
    let mut dev = 0.0f64;
    let mut cmp = |got: f64, want: f64| {
        let d = if got.is_infinite() && want.is_infinite() && got.signum() == want.signum() {
            0.0
        } else {
            (got - want).abs()
        };
        dev = dev.max(d);
    };
    cmp(
        critical_exponent(&scalar(o(0.5, 0.3, 0.25, 0.5, 0.7), 2.0)?)?.value,
        10.0,
    );
    cmp(
        critical_exponent(&scalar(o(0.5, 0.3, 0.25, 0.6, 0.7), 2.0)?)?.value,
        f64::INFINITY,
    );
    cmp(
        critical_exponent(&scalar(o(0.9, 0.3, 0.1, 0.9, 0.95), 2.0)?)?.value,
        f64::INFINITY,
    );
    let sys = SystemParamSet::new(
        o(0.5, 0.3, 0.25, 0.5, 0.7),
        o(0.5, 0.3, 0.25, 0.5, 0.7),
        2.0,
        2.0,
        1,
        Mode::Strict,
    )?;
    cmp(system_dimension_bound(&sys).max, 7.0 / 3.0);
    let ps = scalar(o(0.5, 0.3, 0.25, 0.5, 0.7), 2.0)?;
    cmp(local_nonexistence_exponent(&ps), -3.25);
    cmp(global_decay_exponent(&ps), 1.4 / 1.5 * 3.25);
    let ps5 = scalar(o(0.5, 0.3, 0.25, 0.5, 0.7), 5.0)?;
    cmp(t_natural(&ps5, 1.0)?, 5f64.powf(1.0 / 1.875));
    Ok(dev)
}

/// `|measured - predicted|` for the dominant term of the scaling probe.
pub fn scaling_probe_deviation(params: &ParamSet) -> Result<(f64, String)> {
    let probe = scaling_exponent_probe(params, 1.0, &ProbeConfig::default())?;
    Ok((
        (probe.measured[0] - probe.predicted[0]).abs(),
        format!(
            "measured={} predicted={}",
            format_g12(probe.measured[0]),
            format_g12(probe.predicted[0])
        ),
    ))
}

/// Runs every registered identity, scaling and bound check.
pub fn verify_all(opts: &VerifyOptions) -> VerifyReport {
    let tol = |default: f64| opts.tol_override.unwrap_or(default);
    let plain = |r: Result<f64>| r.map(|v| (v, None, String::new()));
    let mut checks = Vec::new();

    checks.push(phi1_derivative_check(&gamma_ratio, tol(0.01)));
    checks.push(outcome(
        "integration by parts",
        FracOrder::new(0.5).and_then(|a| {
            let r = check_ibp(|t| t * t, |t| (1.0 - t).powi(4), 1.0, a, &DEFAULT_SIZES)?;
            Ok((
                r.final_residual(),
                None,
                format!("slope={}", format_g12(r.slope)),
            ))
        }),
        tol(0.01),
    ));
    checks.push(outcome(
        "integral composition (random inputs)",
        random_identity(opts.seed, 20, false),
        tol(0.02),
    ));
    checks.push(outcome(
        "derivative composition (random inputs)",
        random_identity(opts.seed.wrapping_add(1), 20, true),
        tol(0.02),
    ));
    checks.push(outcome(
        "time test-function scaling",
        plain(time_factor_scaling_deviation(1 << 12)),
        tol(0.02),
    ));
    checks.push(outcome(
        "closed-form time integrals",
        plain((|| {
            let a = time_factor_integral(8.0, 0.5, 2.0)?;
            let b = crate::testfn::time_factor_integral_quadrature(8.0, 0.5, 2.0, 1 << 12)?;
            let c = weighted_time_factor_integral(8.0, 1.3, 2.0, 2.0)?;
            let d = crate::testfn::weighted_time_factor_integral_quadrature(
                8.0,
                1.3,
                2.0,
                2.0,
                1 << 12,
            )?;
            Ok(crate::identities::relative_difference(a, b)
                .max(crate::identities::relative_difference(c, d)))
        })()),
        tol(0.01),
    ));
    checks.push(outcome(
        "fractional Laplacian cross-method",
        plain(cross_method_deviation()),
        tol(0.02),
    ));
    checks.push(outcome(
        "bump constants under refinement",
        bump_power_stability(2.0).map(|(v, d)| (v, None, d)),
        tol(0.10),
    ));
    checks.push(outcome(
        "exponent table",
        plain(exponent_table_deviation()),
        tol(1e-12),
    ));
    checks.push(outcome(
        "scaling probe, dominant term",
        ParamsSection::default()
            .param_set()
            .and_then(|ps| scaling_probe_deviation(&ps))
            .map(|(v, d)| (v, None, d)),
        tol(0.05),
    ));
    VerifyReport { checks }
}

/// Structured `key = value` report of every threshold for a scalar set.
pub fn exponent_query(section: &ParamsSection) -> Result<String> {
    let ps = section.param_set()?;
    let mut out = String::new();
    let o = ps.orders();
    let _ = writeln!(out, "[inputs]");
    for (k, v) in [
        ("alpha1", o.alpha1),
        ("alpha2", o.alpha2),
        ("gamma", o.gamma),
        ("sigma", o.sigma),
        ("delta", o.delta),
        ("p", ps.p()),
        ("radius", section.radius),
    ] {
        let _ = writeln!(out, "{k} = {}", format_g12(v));
    }
    let _ = writeln!(out, "dim = {}", ps.dim());
    let _ = writeln!(out, "mode = {}", mode_name(ps.mode()));
    let _ = writeln!(out, "[results]");
    let pstar = critical_exponent(&ps)?;
    let _ = writeln!(out, "p_star = {}", format_g12(pstar.value));
    let _ = writeln!(
        out,
        "p_star_denominator = {}",
        format_g12(pstar.denominator)
    );
    let _ = writeln!(out, "critical = {}", pstar.critical);
    if let Some(note) = &pstar.side_condition {
        let _ = writeln!(out, "side_condition = \"{note}\"");
    }
    let _ = writeln!(out, "blowup_guaranteed = {}", ps.p() <= pstar.value);
    let _ = writeln!(
        out,
        "local_nonexistence_exponent = {}",
        format_g12(local_nonexistence_exponent(&ps))
    );
    let _ = writeln!(
        out,
        "decay_exponent = {}",
        format_g12(global_decay_exponent(&ps))
    );
    match t_natural(&ps, section.radius) {
        Ok(t) => {
            let _ = writeln!(out, "t_natural = {}", format_g12(t));
        }
        Err(Error::NoInteriorMinimum { base }) => {
            let _ = writeln!(out, "t_natural = none");
            let _ = writeln!(
                out,
                "t_natural_note = \"no interior minimum: base {} is not positive\"",
                format_g12(base)
            );
        }
        Err(e) => return Err(e),
    }
    Ok(out)
}

/// Structured report of the dimension bound for the coupled system.
pub fn system_exponent_query(section: &SystemSection) -> Result<String> {
    let s = section.param_set()?;
    let mut out = String::new();
    let _ = writeln!(out, "[inputs]");
    for (name, b) in [("first", s.first()), ("second", s.second())] {
        for (k, v) in [
            ("alpha1", b.alpha1),
            ("alpha2", b.alpha2),
            ("gamma", b.gamma),
            ("sigma", b.sigma),
            ("delta", b.delta),
        ] {
            let _ = writeln!(out, "{name}.{k} = {}", format_g12(v));
        }
    }
    let _ = writeln!(out, "p = {}", format_g12(s.p()));
    let _ = writeln!(out, "q = {}", format_g12(s.q()));
    let _ = writeln!(out, "dim = {}", s.dim());
    let _ = writeln!(out, "mode = {}", mode_name(s.mode()));
    let b = system_dimension_bound(&s);
    let _ = writeln!(out, "[results]");
    let _ = writeln!(out, "n_bound = {}", format_g12(b.max));
    let _ = writeln!(out, "n_bound_first_branch = {}", format_g12(b.first_branch));
    let _ = writeln!(
        out,
        "n_bound_second_branch = {}",
        format_g12(b.second_branch)
    );
    let _ = writeln!(out, "blowup_guaranteed = {}", (s.dim() as f64) < b.max);
    Ok(out)
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Strict => "strict",
        Mode::Permissive => "permissive",
    }
}

/// Outcome of one run inside a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum RowOutcome {
    Ran {
        status: Status,
        blowup_time: Option<f64>,
        final_supnorm: f64,
    },
    Failed(String),
}

impl RowOutcome {
    fn from_result(r: Result<SimResult>) -> Self {
        match r {
            Ok(res) => RowOutcome::Ran {
                status: res.status,
                blowup_time: res.blowup_time,
                final_supnorm: res.final_supnorm(),
            },
            Err(e) => RowOutcome::Failed(e.to_string()),
        }
    }

    fn cells(&self) -> [String; 3] {
        match self {
            RowOutcome::Ran {
                status,
                blowup_time,
                final_supnorm,
            } => [
                status.to_string(),
                opt_g12(*blowup_time),
                format_g12(*final_supnorm),
            ],
            RowOutcome::Failed(_) => ["Error".into(), String::new(), String::new()],
        }
    }

    pub fn status(&self) -> Option<Status> {
        match self {
            RowOutcome::Ran { status, .. } => Some(*status),
            RowOutcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub p_star: f64,
    pub outcome: RowOutcome,
}

pub const SWEEP_HEADER: &str = "p,p_star,status,blowup_time,final_supnorm";

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Parameter("--jobs must be at least 1".into()));
        }
        b = b.num_threads(j);
    }
    b.build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))
}

/// Runs the scalar simulation for every `p` with identical data; rows come
/// back ordered by `p`.
pub fn sweep_p(
    spec: &ExperimentSpec,
    p_values: &[f64],
    jobs: Option<usize>,
) -> Result<Vec<SweepRow>> {
    validate_p_list(p_values)?;
    let base = spec.params.param_set()?;
    let sets = p_values
        .iter()
        .map(|&p| base.with_p(p))
        .collect::<Result<Vec<_>>>()?;
    let configs = sets
        .iter()
        .map(|ps| spec.simulation.scalar_config(*ps))
        .collect::<Result<Vec<_>>>()?;
    let p_star = critical_exponent(&base)?.value;
    let outcomes: Vec<RowOutcome> = pool(jobs)?.install(|| {
        configs
            .par_iter()
            .map(|c| RowOutcome::from_result(run(c)))
            .collect()
    });
    Ok(p_values
        .iter()
        .zip(outcomes)
        .map(|(&p, outcome)| SweepRow { p, p_star, outcome })
        .collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let [s, t, f] = r.outcome.cells();
        let _ = writeln!(
            out,
            "{},{},{s},{t},{f}",
            format_g12(r.p),
            format_g12(r.p_star)
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSweepRow {
    pub p: f64,
    pub q: f64,
    pub n_bound: f64,
    pub outcome: std::result::Result<crate::solver::SystemResult, String>,
}

pub const SYSTEM_SWEEP_HEADER: &str =
    "p,q,n_bound,status,blowup_time,final_supnorm_u,final_supnorm_v";

/// Coupled runs for every `(p, q)` pair, ordered as given.
pub fn system_sweep(
    spec: &ExperimentSpec,
    pairs: &[[f64; 2]],
    jobs: Option<usize>,
) -> Result<Vec<SystemSweepRow>> {
    let sets = pairs
        .iter()
        .map(|&[p, q]| spec.system.with_powers(p, q))
        .collect::<Result<Vec<_>>>()?;
    let configs = sets
        .iter()
        .map(|s| spec.simulation.system_config(*s))
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<_> = pool(jobs)?.install(|| {
        configs
            .par_iter()
            .map(|c| run_system(c).map_err(|e| e.to_string()))
            .collect()
    });
    Ok(pairs
        .iter()
        .zip(sets.iter().zip(results))
        .map(|(&[p, q], (s, outcome))| SystemSweepRow {
            p,
            q,
            n_bound: system_dimension_bound(s).max,
            outcome,
        })
        .collect())
}

pub fn system_sweep_csv(rows: &[SystemSweepRow]) -> String {
    let mut out = format!("{SYSTEM_SWEEP_HEADER}\n");
    for r in rows {
        let head = format!(
            "{},{},{}",
            format_g12(r.p),
            format_g12(r.q),
            format_g12(r.n_bound)
        );
        match &r.outcome {
            Ok(res) => {
                let _ = writeln!(
                    out,
                    "{head},{},{},{},{}",
                    res.status,
                    opt_g12(res.blowup_time),
                    format_g12(res.u.final_supnorm()),
                    format_g12(res.v.final_supnorm())
                );
            }
            Err(_) => {
                let _ = writeln!(out, "{head},Error,,,");
            }
        }
    }
    out
}

/// `t,supnorm` rows of a run.
pub fn trace_csv(res: &SimResult) -> String {
    let mut out = String::from("t,supnorm\n");
    for (j, v) in res.sup_norms.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{}",
            format_g12(j as f64 * res.step),
            format_g12(*v)
        );
    }
    out
}

/// Snapshot table: a metadata comment, then one row `t,u_0,..,u_{M^d-1}`
/// per stored field in row-major grid order.
pub fn snapshots_csv(res: &SimResult, grid: &SpaceGrid) -> String {
    let mut out = format!(
        "# dim={} points={} half_length={} spacing={} order=row-major\n",
        grid.dim(),
        grid.points(),
        format_g12(grid.half_length()),
        format_g12(grid.spacing())
    );
    for (t, f) in &res.snapshots {
        out.push_str(&format_g12(*t));
        for v in f.values() {
            out.push(',');
            out.push_str(&format_g12(*v));
        }
        out.push('\n');
    }
    out
}

/// Summary of a single run.
pub fn simulation_summary(res: &SimResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "status = {}", res.status);
    let _ = writeln!(out, "steps = {}", res.steps_taken());
    let _ = writeln!(out, "final_time = {}", format_g12(res.final_time()));
    let _ = writeln!(
        out,
        "blowup_time = {}",
        res.blowup_time
            .map(format_g12)
            .unwrap_or_else(|| "none".into())
    );
    if let Some(t) = res.diverged_at {
        let _ = writeln!(out, "diverged_at = {}", format_g12(t));
    }
    let _ = writeln!(out, "final_supnorm = {}", format_g12(res.final_supnorm()));
    out
}
