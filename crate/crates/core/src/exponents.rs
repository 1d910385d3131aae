//! Closed-form thresholds: the critical power `p*`, the dimension bound of
//! the coupled system, and the exponents of the necessary conditions for
//! local and global existence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which ordering constraints a parameter set must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `0 < γ < α₂ < α₁ < 1` and `0 < σ < δ < 1`.
    #[default]
    Strict,
    /// Every order individually in `(0, 1)`.
    Permissive,
}

/// Fractional orders of one equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orders {
    pub alpha1: f64,
    pub alpha2: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub delta: f64,
}

impl Orders {
    pub fn validate(&self, mode: Mode) -> Result<()> {
        self.validate_named(mode, ["α₁", "α₂", "γ", "σ", "δ"])
    }

    fn validate_named(&self, mode: Mode, names: [&str; 5]) -> Result<()> {
        let vals = [self.alpha1, self.alpha2, self.gamma, self.sigma, self.delta];
        for (v, name) in vals.iter().zip(names) {
            if !(*v > 0.0 && *v < 1.0) {
                return Err(Error::Parameter(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if mode == Mode::Strict {
            let [a1, a2, g, s, d] = names;
            if !(self.gamma < self.alpha2 && self.alpha2 < self.alpha1) {
                return Err(Error::Parameter(format!(
                    "strict ordering violated: 0<{g}<{a2}<{a1}<1 ({g}={}, {a2}={}, {a1}={})",
                    self.gamma, self.alpha2, self.alpha1
                )));
            }
            if !(self.sigma < self.delta) {
                return Err(Error::Parameter(format!(
                    "strict ordering violated: 0<{s}<{d}<1 ({s}={}, {d}={})",
                    self.sigma, self.delta
                )));
            }
        }
        Ok(())
    }

    /// `θ = (α₁ + 1) / σ`.
    pub fn theta(&self) -> f64 {
        (self.alpha1 + 1.0) / self.sigma
    }
}

/// Conjugate exponent `p' = p/(p-1)`, with `p = ∞` giving 1.
pub fn conjugate(p: f64) -> f64 {
    1.0 / (1.0 - 1.0 / p)
}

/// Orders, power and dimension of the scalar problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSet {
    orders: Orders,
    p: f64,
    dim: usize,
    mode: Mode,
}

impl ParamSet {
    pub fn new(orders: Orders, p: f64, dim: usize, mode: Mode) -> Result<Self> {
        orders.validate(mode)?;
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Parameter(format!(
                "p = {p} must be a finite value > 1"
            )));
        }
        if dim == 0 {
            return Err(Error::Parameter("dimension N must be at least 1".into()));
        }
        Ok(ParamSet {
            orders,
            p,
            dim,
            mode,
        })
    }

    pub fn orders(&self) -> &Orders {
        &self.orders
    }

    pub fn alpha1(&self) -> f64 {
        self.orders.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.orders.alpha2
    }

    pub fn gamma(&self) -> f64 {
        self.orders.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.orders.sigma
    }

    pub fn delta(&self) -> f64 {
        self.orders.delta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn p_conj(&self) -> f64 {
        conjugate(self.p)
    }

    pub fn theta(&self) -> f64 {
        self.orders.theta()
    }

    /// Same orders and dimension with another power.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        ParamSet::new(self.orders, p, self.dim, self.mode)
    }
}

/// A threshold that may be `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    /// `+∞` when the positive part of the denominator vanishes.
    pub value: f64,
    /// The raw denominator before taking the positive part.
    pub denominator: f64,
    /// `p` equals the threshold (relative tolerance 1e-12).
    pub critical: bool,
    /// Extra condition used only inside the critical-case argument.
    pub side_condition: Option<String>,
}

impl ExponentReport {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Parameter(format!("{name} = {v} must lie in (0, 1)")));
    }
    Ok(())
}

/// `p* = 2(2+α₁-γ) / (θN + 2γ - 2α₁ - 2)₊ + 1`, `θ = (α₁+1)/σ`.
pub fn critical_exponent_scalar(
    dim: usize,
    alpha1: f64,
    gamma: f64,
    sigma: f64,
) -> Result<ExponentReport> {
    check_unit("α₁", alpha1)?;
    check_unit("γ", gamma)?;
    check_unit("σ", sigma)?;
    if dim == 0 {
        return Err(Error::Parameter("dimension N must be at least 1".into()));
    }
    let theta = (alpha1 + 1.0) / sigma;
    let denominator = theta * dim as f64 + 2.0 * gamma - 2.0 * alpha1 - 2.0;
    let value = if denominator > 0.0 {
        2.0 * (2.0 + alpha1 - gamma) / denominator + 1.0
    } else {
        f64::INFINITY
    };
    Ok(ExponentReport {
        value,
        denominator,
        critical: false,
        side_condition: None,
    })
}

/// [`critical_exponent_scalar`] for a parameter set, flagging `p = p*`.
pub fn critical_exponent(params: &ParamSet) -> Result<ExponentReport> {
    let mut report = critical_exponent_scalar(
        params.dim(),
        params.alpha1(),
        params.gamma(),
        params.sigma(),
    )?;
    if report.is_finite() && (params.p() - report.value).abs() <= 1e-12 * report.value {
        report.critical = true;
        let n = params.dim() as f64;
        let gap = n - 2.0 * params.sigma();
        let note = if gap > 0.0 {
            let bound = n / gap;
            format!(
                "critical case: the argument additionally uses p > N/(N-2σ) = {bound}; {}",
                if params.p() > bound {
                    "satisfied"
                } else {
                    "NOT satisfied"
                }
            )
        } else {
            "critical case: the argument additionally uses p > N/(N-2σ), undefined for N <= 2σ"
                .into()
        };
        report.side_condition = Some(note);
    }
    Ok(report)
}

/// Orders of one equation of the coupled system.
pub type SystemBlock = Orders;

/// Parameters of the coupled system; `first` drives `u` (source `|v|^p`),
/// `second` drives `v` (source `|u|^q`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParamSet {
    first: SystemBlock,
    second: SystemBlock,
    p: f64,
    q: f64,
    dim: usize,
    mode: Mode,
}

impl SystemParamSet {
    pub fn new(
        first: SystemBlock,
        second: SystemBlock,
        p: f64,
        q: f64,
        dim: usize,
        mode: Mode,
    ) -> Result<Self> {
        first.validate_named(mode, ["α₁", "α₂", "γ₁", "σ₁", "δ₁"])?;
        second.validate_named(mode, ["β₁", "β₂", "γ₂", "σ₂", "δ₂"])?;
        for (name, v) in [("p", p), ("q", q)] {
            if !(v > 1.0 && v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "{name} = {v} must be a finite value > 1"
                )));
            }
        }
        if dim == 0 {
            return Err(Error::Parameter("dimension N must be at least 1".into()));
        }
        Ok(SystemParamSet {
            first,
            second,
            p,
            q,
            dim,
            mode,
        })
    }

    pub fn first(&self) -> &SystemBlock {
        &self.first
    }

    pub fn second(&self) -> &SystemBlock {
        &self.second
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn theta1(&self) -> f64 {
        self.first.theta()
    }

    pub fn theta2(&self) -> f64 {
        self.second.theta()
    }

    /// The same system with the equations (and powers) exchanged.
    pub fn swapped(&self) -> Self {
        SystemParamSet {
            first: self.second,
            second: self.first,
            p: self.q,
            q: self.p,
            dim: self.dim,
            mode: self.mode,
        }
    }
}

/// Both branches of the dimension bound and their maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionBound {
    pub first_branch: f64,
    pub second_branch: f64,
    pub max: f64,
}

/// Blow-up is guaranteed for `N < max{first_branch, second_branch}`.
pub fn system_dimension_bound(s: &SystemParamSet) -> DimensionBound {
    let (a1, g1, s1) = (s.first.alpha1, s.first.gamma, s.first.sigma);
    let (b1, g2, s2) = (s.second.alpha1, s.second.gamma, s.second.sigma);
    let (p, q) = (s.p, s.q);
    let (pc, qc) = (conjugate(p), conjugate(q));
    let first = ((2.0 + b1 - g2) + 1.0 / p + q * (1.0 + a1 - g1))
        / ((b1 + 1.0) / (2.0 * pc * s2) + (a1 + 1.0) * q / (2.0 * qc * s1));
    let second = ((2.0 + a1 - g1) + 1.0 / q + p * (1.0 + b1 - g2))
        / ((a1 + 1.0) / (2.0 * qc * s1) + (b1 + 1.0) * p / (2.0 * pc * s2));
    DimensionBound {
        first_branch: first,
        second_branch: second,
        max: first.max(second),
    }
}

/// The exponents `(l₁, l₂)` of `T` in the a-priori estimates of the system
/// at dimension `dim`; blow-up follows when one of them is negative.
pub fn system_estimate_exponents(s: &SystemParamSet, dim: f64) -> (f64, f64) {
    let (a1, g1) = (s.first.alpha1, s.first.gamma);
    let (b1, g2) = (s.second.alpha1, s.second.gamma);
    let (pc, qc) = (conjugate(s.p), conjugate(s.q));
    let (t1, t2) = (s.theta1(), s.theta2());
    let l1 = (-(2.0 + b1 - g2) + (t2 * dim / 2.0 + 1.0) / pc) / s.q - (2.0 + a1 - g1)
        + (t1 * dim / 2.0 + 1.0) / qc;
    let l2 = (-(2.0 + a1 - g1) + (t1 * dim / 2.0 + 1.0) / qc) / s.p - (2.0 + b1 - g2)
        + (t2 * dim / 2.0 + 1.0) / pc;
    (l1, l2)
}

/// Exponent of `T` in `inf u₁ <= C T^{-p'(2+α₁-γ) + (1+α₁-γ)}`.
pub fn local_nonexistence_exponent(params: &ParamSet) -> f64 {
    let (a1, g) = (params.alpha1(), params.gamma());
    -params.p_conj() * (2.0 + a1 - g) + (1.0 + a1 - g)
}

/// Spatial decay rate `(2δ/(1+α₁)) [p'(2+α₁-γ) - (1+α₁-γ)]` of `u₁`.
pub fn global_decay_exponent(params: &ParamSet) -> f64 {
    let (a1, g, d) = (params.alpha1(), params.gamma(), params.delta());
    2.0 * d / (1.0 + a1) * (params.p_conj() * (2.0 + a1 - g) - (1.0 + a1 - g))
}

/// Horizon `T♮` minimising the lifespan bound at radius `r`.
pub fn t_natural(params: &ParamSet, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Parameter(format!("radius R = {r} must be positive")));
    }
    let (a1, g, d) = (params.alpha1(), params.gamma(), params.delta());
    let pc = params.p_conj();
    let base = (1.0 + a1 - g) - pc * (1.0 - g);
    if !(base > 0.0) {
        return Err(Error::NoInteriorMinimum { base });
    }
    let ratio = (pc * (2.0 + a1 - g) - (1.0 + a1 - g)) / base;
    Ok(ratio.powf(1.0 / (pc * (1.0 + a1))) * r.powf(2.0 * d / (1.0 + a1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn orders(a1: f64, a2: f64, g: f64, s: f64, d: f64) -> Orders {
        Orders {
            alpha1: a1,
            alpha2: a2,
            gamma: g,
            sigma: s,
            delta: d,
        }
    }

    #[test]
    fn strict_mode_names_the_violated_chain() {
        let err =
            ParamSet::new(orders(0.5, 0.3, 0.25, 0.8, 0.7), 2.0, 1, Mode::Strict).unwrap_err();
        assert!(err.to_string().contains("0<σ<δ<1"), "{err}");
        let err =
            ParamSet::new(orders(0.5, 0.6, 0.25, 0.5, 0.7), 2.0, 1, Mode::Strict).unwrap_err();
        assert!(err.to_string().contains("0<γ<α₂<α₁<1"), "{err}");
        assert!(ParamSet::new(orders(0.5, 0.6, 0.25, 0.8, 0.7), 2.0, 1, Mode::Permissive).is_ok());
        assert!(ParamSet::new(orders(0.5, 0.3, 0.25, 0.5, 0.7), 1.0, 1, Mode::Strict).is_err());
    }

    #[test]
    fn derived_quantities() {
        let ps = ParamSet::new(orders(0.5, 0.3, 0.25, 0.5, 0.7), 2.0, 1, Mode::Strict).unwrap();
        assert_eq!(ps.p_conj(), 2.0);
        assert_eq!(ps.theta(), 3.0);
        assert_eq!(conjugate(f64::INFINITY), 1.0);
    }

    #[test]
    fn critical_flag_and_side_condition() {
        let ps = ParamSet::new(orders(0.5, 0.3, 0.25, 0.5, 0.7), 10.0, 1, Mode::Strict).unwrap();
        let r = critical_exponent(&ps).unwrap();
        assert!(r.critical);
        assert!(r.side_condition.unwrap().contains("N/(N-2σ)"));
        let ps = ps.with_p(3.0).unwrap();
        assert!(!critical_exponent(&ps).unwrap().critical);
    }

    #[test]
    fn t_natural_scales_as_power_of_radius() {
        let ps = ParamSet::new(orders(0.5, 0.3, 0.25, 0.5, 0.7), 5.0, 1, Mode::Strict).unwrap();
        let r1 = t_natural(&ps, 1.0).unwrap();
        let r2 = t_natural(&ps, 2.0).unwrap();
        assert_relative_eq!(r2 / r1, 2f64.powf(1.4 / 1.5), max_relative = 1e-12);
    }

    #[test]
    fn swapping_blocks_swaps_branches() {
        let s = SystemParamSet::new(
            orders(0.6, 0.4, 0.2, 0.3, 0.5),
            orders(0.8, 0.5, 0.1, 0.6, 0.9),
            2.5,
            1.7,
            2,
            Mode::Strict,
        )
        .unwrap();
        let a = system_dimension_bound(&s);
        let b = system_dimension_bound(&s.swapped());
        assert_relative_eq!(a.first_branch, b.second_branch, max_relative = 1e-14);
        assert_relative_eq!(a.second_branch, b.first_branch, max_relative = 1e-14);
        assert_relative_eq!(a.max, b.max, max_relative = 1e-14);
    }

    #[test]
    fn system_validation_names_blocks() {
        let err = SystemParamSet::new(
            orders(0.6, 0.4, 0.2, 0.3, 0.5),
            orders(0.8, 0.5, 0.1, 0.9, 0.6),
            2.0,
            2.0,
            1,
            Mode::Strict,
        )
        .unwrap_err();
        assert!(err.to_string().contains("0<σ₂<δ₂<1"), "{err}");
    }
}
