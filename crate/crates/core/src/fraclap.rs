//! The fractional Laplacian `(-Δ)^s`.
//!
//! Two independent realisations are provided: a Fourier multiplier with
//! symbol `|k|^{2s}` on a periodic box, and a direct quadrature of the
//! singular integral
//!
//! ```text
//! (C(N,s)/2) ∫ (2ψ(x) - ψ(x+y) - ψ(x-y)) / |y|^{N+2s} dy
//! ```
//!
//! on `R^N`. The normalising constant is fixed so that both have the same
//! symbol.

use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Periodic box `[-L, L)^d` with `M` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrid {
    dim: usize,
    half_length: f64,
    points: usize,
}

impl SpaceGrid {
    pub fn new(dim: usize, half_length: f64, points: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Geometry(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::Geometry(format!(
                "half-length must be positive, got {half_length}"
            )));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::Geometry(format!(
                "points per axis must be a power of two >= 8, got {points}"
            )));
        }
        Ok(SpaceGrid {
            dim,
            half_length,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    /// Total number of nodes, `M^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of node `i` along one axis; node `M/2` sits at the origin.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing()
    }

    /// Index of the node at the origin.
    pub fn center_index(&self) -> usize {
        let c = self.points / 2;
        if self.dim == 1 {
            c
        } else {
            c * self.points + c
        }
    }

    /// Coordinates of the flattened (row-major) node `idx`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.coord(idx), 0.0]
        } else {
            [self.coord(idx / self.points), self.coord(idx % self.points)]
        }
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let [a, b] = self.point(idx);
        a.hypot(b)
    }

    /// Angular wavenumber of FFT bin `m` along one axis.
    pub fn wavenumber(&self, m: usize) -> f64 {
        let m = m as i64;
        let half = (self.points / 2) as i64;
        let signed = if m < half { m } else { m - self.points as i64 };
        std::f64::consts::PI * signed as f64 / self.half_length
    }

    /// `|k|^2` for every flattened mode, in FFT order.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        let m = self.points;
        let k: Vec<f64> = (0..m).map(|i| self.wavenumber(i)).collect();
        if self.dim == 1 {
            k.iter().map(|v| v * v).collect()
        } else {
            let mut out = Vec::with_capacity(m * m);
            for a in &k {
                for b in &k {
                    out.push(a * a + b * b);
                }
            }
            out
        }
    }
}

/// Real samples on a [`SpaceGrid`], row-major in two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: SpaceGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: SpaceGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Geometry(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: SpaceGrid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: SpaceGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f(&p[..grid.dim()])
            })
            .collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Riemann sum `Σ f dx^d`; spectrally accurate for periodic data.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn inner(&self, other: &Field) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Geometry("fields live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }
}

/// Cached FFT plans and wavenumbers for one grid.
///
/// The plans are shared `Arc`s and the struct holds no mutable state, so a
/// single instance can be used from several threads.
#[derive(Clone)]
pub struct Spectral {
    grid: SpaceGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k_sq: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: SpaceGrid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.points());
        let inverse = planner.plan_fft_inverse(grid.points());
        Spectral {
            grid,
            forward,
            inverse,
            k_sq: grid.wavenumber_sq(),
        }
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    /// `|k|^2` per mode, FFT order.
    pub fn wavenumber_sq(&self) -> &[f64] {
        &self.k_sq
    }

    /// Multiplier `|k|^{2s}` per mode; the zero mode maps to 0.
    pub fn symbol(&self, s: f64) -> Vec<f64> {
        self.k_sq
            .iter()
            .map(|&k2| if k2 == 0.0 { 0.0 } else { k2.powf(s) })
            .collect()
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.grid.points();
        plan.process(buf);
        if self.grid.dim() == 2 {
            transpose(buf, m);
            plan.process(buf);
            transpose(buf, m);
        }
    }

    /// Unnormalised forward transform of real data.
    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        buf
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.forward);
    }

    /// Inverse transform including the `1/M^d` normalisation.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    /// Real part of the normalised inverse transform.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.inverse_in_place(&mut spectrum);
        spectrum.into_iter().map(|c| c.re).collect()
    }

    /// `(-Δ)^s f` by the Fourier multiplier, `s ∈ (0, 1]`.
    pub fn apply(&self, f: &Field, s: f64) -> Result<Field> {
        check_spectral_order(s)?;
        if f.grid != self.grid {
            return Err(Error::Geometry(
                "field grid differs from the transform grid".into(),
            ));
        }
        let mut spec = self.forward_real(&f.values);
        for (c, &k2) in spec.iter_mut().zip(&self.k_sq) {
            *c *= if k2 == 0.0 { 0.0 } else { k2.powf(s) };
        }
        Field::new(self.grid, self.inverse_real(spec))
    }
}

fn transpose(buf: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in i + 1..m {
            buf.swap(i * m + j, j * m + i);
        }
    }
}

fn check_spectral_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Order {
            value: s,
            reason: "fractional Laplacian order must lie in (0, 1]".into(),
        });
    }
    Ok(())
}

/// `(-Δ)^s f` on the periodic grid of `f`.
pub fn apply_spectral(f: &Field, s: f64) -> Result<Field> {
    Spectral::new(*f.grid()).apply(f, s)
}

/// `C(N,s) = 4^s Γ(N/2+s) / (π^{N/2} |Γ(-s)|)`.
pub fn normalization_constant(dim: usize, s: f64) -> Result<f64> {
    if dim == 0 {
        return Err(Error::Parameter("dimension must be at least 1".into()));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Order {
            value: s,
            reason: "singular-integral order must lie in (0, 1)".into(),
        });
    }
    let n = dim as f64;
    Ok(4f64.powf(s) * gamma(0.5 * n + s) / (std::f64::consts::PI.powf(0.5 * n) * gamma(-s).abs()))
}

/// Surface measure of the unit sphere `S^{N-1}` for `N ∈ {1, 2}`.
fn sphere_measure(dim: usize) -> f64 {
    if dim == 1 {
        2.0
    } else {
        2.0 * std::f64::consts::PI
    }
}

/// Resolution of [`apply_singular_integral`].
///
/// `|y| < r_inner` uses the second-order Taylor expansion of the second
/// difference, `r_inner <= |y| <= r_cut` composite Gauss–Legendre panels
/// (geometrically graded up to `|y| = 1`, then at most `max_panel` wide),
/// and `|y| > r_cut` assumes `ψ(x ± y)` has decayed to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    pub r_inner: f64,
    pub r_cut: f64,
    pub max_panel: f64,
    pub graded_panels: usize,
    pub order: usize,
    pub angular_points: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            r_inner: 1e-2,
            r_cut: 64.0,
            max_panel: 0.25,
            graded_panels: 24,
            order: 8,
            angular_points: 64,
        }
    }
}

impl QuadratureConfig {
    /// Twice the resolution in every direction.
    pub fn refined(&self) -> Self {
        QuadratureConfig {
            r_inner: self.r_inner * 0.5,
            r_cut: self.r_cut,
            max_panel: self.max_panel * 0.5,
            graded_panels: self.graded_panels * 2,
            order: self.order,
            angular_points: self.angular_points * 2,
        }
    }

    fn panels(&self) -> Vec<(f64, f64)> {
        let mut edges = Vec::new();
        let knee = 1.0f64.max(self.r_inner);
        let ratio = (knee / self.r_inner).powf(1.0 / self.graded_panels as f64);
        let mut r = self.r_inner;
        edges.push(r);
        if knee > self.r_inner {
            for _ in 0..self.graded_panels {
                r *= ratio;
                edges.push(r);
            }
        }
        let rest = (self.r_cut - knee).max(0.0);
        let count = (rest / self.max_panel).ceil() as usize;
        for i in 1..=count {
            edges.push(knee + rest * i as f64 / count as f64);
        }
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Direct quadrature of the singular-integral form of `(-Δ)^s ψ(x)`.
///
/// `x.len()` sets the dimension (1 or 2).
pub fn apply_singular_integral(
    psi: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    s: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let dim = x.len();
    if dim != 1 && dim != 2 {
        return Err(Error::Geometry(format!(
            "singular integral supports N = 1, 2, got {dim}"
        )));
    }
    let c = normalization_constant(dim, s)?;
    let centre = psi(x);
    let shifted = |dir: &[f64], r: f64, sign: f64| -> f64 {
        let mut p = [0.0; 2];
        for i in 0..dim {
            p[i] = x[i] + sign * r * dir[i];
        }
        psi(&p[..dim])
    };

    // Laplacian by fourth-order central differences.
    let e = 0.25 * cfg.r_inner;
    let mut laplacian = 0.0;
    for axis in 0..dim {
        let mut dir = [0.0; 2];
        dir[axis] = 1.0;
        let f = |k: f64| shifted(&dir, k * e, 1.0);
        laplacian +=
            (-f(2.0) + 16.0 * f(1.0) - 30.0 * centre + 16.0 * f(-1.0) - f(-2.0)) / (12.0 * e * e);
    }
    let sphere = sphere_measure(dim);
    let inner =
        -laplacian / dim as f64 * sphere * cfg.r_inner.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);

    // Spherical mean of the second difference at radius r, times |S^{N-1}|.
    let directions: Vec<[f64; 2]> = if dim == 1 {
        vec![[1.0, 0.0]]
    } else {
        let n = cfg.angular_points;
        (0..n)
            .map(|i| {
                let a = std::f64::consts::PI * i as f64 / n as f64;
                [a.cos(), a.sin()]
            })
            .collect()
    };
    let angular = |r: f64| -> f64 {
        let sum: f64 = directions
            .iter()
            .map(|d| 2.0 * centre - shifted(d, r, 1.0) - shifted(d, r, -1.0))
            .sum();
        sum * sphere / directions.len() as f64
    };

    let order = NonZeroUsize::new(cfg.order.max(1)).expect("nonzero");
    let rule = GaussLegendre::new(order);
    let direct: f64 = cfg
        .panels()
        .iter()
        .map(|&(a, b)| rule.integrate(a, b, |r| angular(r) * r.powf(-1.0 - 2.0 * s)))
        .sum();

    let tail = 2.0 * centre * sphere * cfg.r_cut.powf(-2.0 * s) / (2.0 * s);

    let total = 0.5 * c * (inner + direct + tail);
    if !total.is_finite() {
        return Err(Error::Integration(format!(
            "non-finite accumulation at x = {x:?} (inner {inner}, direct {direct}, tail {tail})"
        )));
    }
    Ok(total)
}

/// Spectral and singular-integral values of `(-Δ)^s ψ` at one probe point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossMethodSample {
    pub x: f64,
    pub spectral: f64,
    pub direct: f64,
}

impl CrossMethodSample {
    pub fn relative_difference(&self) -> f64 {
        (self.spectral - self.direct).abs() / self.spectral.abs().max(self.direct.abs()).max(1e-30)
    }
}

/// Evaluates `(-Δ)^s` of the radial profile `ψ(|x|)` in one dimension by
/// both methods at grid nodes nearest to `probes`.
pub fn cross_method_1d(
    psi: &dyn Fn(f64) -> f64,
    s: f64,
    grid: &SpaceGrid,
    probes: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<CrossMethodSample>> {
    if grid.dim() != 1 {
        return Err(Error::Geometry(
            "cross-method comparison runs in one dimension".into(),
        ));
    }
    let f = Field::from_fn(*grid, |x| psi(x[0].abs()));
    let spectral = apply_spectral(&f, s)?;
    let radial = |x: &[f64]| psi(x[0].abs());
    probes
        .iter()
        .map(|&x| {
            let i = ((x + grid.half_length()) / grid.spacing()).round();
            if !(0.0..grid.points() as f64).contains(&i) {
                return Err(Error::Geometry(format!("probe {x} lies outside the box")));
            }
            let i = i as usize;
            let node = grid.coord(i);
            Ok(CrossMethodSample {
                x: node,
                spectral: spectral.values()[i],
                direct: apply_singular_integral(&radial, &[node], s, cfg)?,
            })
        })
        .collect()
}

/// Probe radii for [`bump_power_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct BumpPowerConfig {
    /// Radii entering the decay constant `C1`.
    pub decay_radii: Vec<f64>,
    /// Radii entering the ratio constant `C2`; only radii with `ψ > 0` count.
    pub ratio_radii: Vec<f64>,
    pub quadrature: QuadratureConfig,
}

impl Default for BumpPowerConfig {
    fn default() -> Self {
        BumpPowerConfig {
            decay_radii: vec![0.5, 1.0, 1.5, 2.5, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0],
            ratio_radii: vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
            quadrature: QuadratureConfig::default(),
        }
    }
}

/// Estimates of the two constants bounding `(-Δ)^s ψ` for a bump `ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpPowerReport {
    pub s: f64,
    pub p: f64,
    /// `max |(-Δ)^s ψ(ξ)| |ξ|^{N+2s}` over the decay radii.
    pub c1_estimate: f64,
    /// `max |(-Δ)^s ψ / ψ^{1/p}|^{p/(p-1)}` over the ratio radii.
    pub c2_estimate: f64,
    pub probe_radii: Vec<f64>,
    /// Radius beyond which `ψ` vanishes on the sampled axis.
    pub support_radius: f64,
    /// `C1` stays within a factor 2 when the decay radii are extended outward.
    pub c1_bounded: bool,
    /// `C2` stays within a factor 2 when ratio radii approach the support edge.
    pub c2_bounded: bool,
}

fn radial_point(r: f64) -> [f64; 2] {
    [r, 0.0]
}

/// Checks the hypotheses on `ψ` (positive at the origin, non-negative,
/// compactly supported, radially non-increasing beyond `|ξ| = 1`) and
/// estimates the constants `C1`, `C2`.
pub fn bump_power_check(
    psi: &dyn Fn(&[f64]) -> f64,
    dim: usize,
    s: f64,
    p: f64,
    cfg: &BumpPowerConfig,
) -> Result<BumpPowerReport> {
    if !(p > 1.0) {
        return Err(Error::Parameter(format!("p must exceed 1, got {p}")));
    }
    if dim != 1 && dim != 2 {
        return Err(Error::Geometry(format!(
            "bump power check supports N = 1, 2, got {dim}"
        )));
    }
    let eval_r = |r: f64| {
        let pt = radial_point(r);
        psi(&pt[..dim])
    };

    // Hypotheses, sampled along the first axis and its negative.
    let origin = eval_r(0.0);
    if !(origin > 0.0) {
        return Err(Error::Hypothesis("ψ must be positive at the origin".into()));
    }
    let far = cfg.quadrature.r_cut;
    let samples = 4096;
    let mut support = None;
    let mut prev = f64::INFINITY;
    for i in 0..=samples {
        let r = far * i as f64 / samples as f64;
        let v = eval_r(r).max(eval_r(-r));
        if v < 0.0 || eval_r(r) < 0.0 || eval_r(-r) < 0.0 {
            return Err(Error::Hypothesis(format!("ψ is negative at radius {r}")));
        }
        if r > 1.0 && v > prev * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::Hypothesis(format!("ψ increases at radius {r} > 1")));
        }
        if r >= 1.0 {
            prev = v;
        }
        if v == 0.0 && support.is_none() {
            support = Some(r);
        }
        if v > 0.0 && support.is_some() {
            return Err(Error::Hypothesis(format!("ψ reappears at radius {r}")));
        }
    }
    let support_radius = support.ok_or_else(|| {
        Error::Hypothesis(format!("ψ is not compactly supported within radius {far}"))
    })?;

    let p_conj = p / (p - 1.0);
    let lap = |r: f64| -> Result<f64> {
        let pt = radial_point(r);
        apply_singular_integral(psi, &pt[..dim], s, &cfg.quadrature)
    };
    let c1_over = |radii: &[f64]| -> Result<f64> {
        let mut best = 0.0f64;
        for &r in radii {
            best = best.max(lap(r)?.abs() * r.powf(dim as f64 + 2.0 * s));
        }
        Ok(best)
    };
    let c2_over = |radii: &[f64]| -> Result<f64> {
        let mut best = 0.0f64;
        for &r in radii {
            let v = eval_r(r);
            if v > 0.0 {
                best = best.max((lap(r)?.abs() / v.powf(1.0 / p)).powf(p_conj));
            }
        }
        Ok(best)
    };

    let c1 = c1_over(&cfg.decay_radii)?;
    let c2 = c2_over(&cfg.ratio_radii)?;

    let r_max = cfg.decay_radii.iter().cloned().fold(0.0, f64::max);
    let outer: Vec<f64> = [1.5, 2.0, 3.0]
        .iter()
        .map(|f| f * r_max)
        .filter(|&r| r < 0.5 * cfg.quadrature.r_cut)
        .collect();
    let c1_ext = c1.max(c1_over(&outer)?);
    let edge: Vec<f64> = (2..=6)
        .map(|k| support_radius * (1.0 - 0.5f64.powi(k)))
        .collect();
    let c2_ext = c2.max(c2_over(&edge)?);

    Ok(BumpPowerReport {
        s,
        p,
        c1_estimate: c1,
        c2_estimate: c2,
        probe_radii: cfg.decay_radii.clone(),
        support_radius,
        c1_bounded: c1_ext <= 2.0 * c1,
        c2_bounded: c2_ext <= 2.0 * c2,
    })
}
