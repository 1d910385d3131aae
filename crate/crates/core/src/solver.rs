//! Spectral time stepper for the damped time–space fractional equation
//!
//! ```text
//! D^{1+α₁}u + (-Δ)^σ u + (-Δ)^δ D^{α₂}u = I^{1-γ}|u|^p,  u(0) = u₀, u_t(0) = u₁
//! ```
//!
//! and for its two-component version with cross-coupled sources.
//!
//! The equation is advanced as the first-order system `u_t = v`,
//! `D^{α₁}v = -(-Δ)^σ u - (-Δ)^δ I^{1-α₂}v + I^{1-γ}|u|^p` (Caputo
//! derivatives throughout). Per Fourier mode:
//! * `D^{α₁}v` uses the L1 scheme with the current-step weight implicit;
//! * `I^{1-α₂}v` uses the right-endpoint product rectangle, current weight
//!   implicit;
//! * `u_n = u_{n-1} + h v_n`, so the elastic term is implicit too;
//! * the source `I^{1-γ}|u|^p` is explicit (left-endpoint product rectangle
//!   over `u_0 .. u_{n-1}`) and is formed in physical space.
//!
//! Each step therefore solves one scalar equation per mode. Only the
//! velocity history is stored; the L1 and damping memories are both
//! weighted sums over it.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::exponents::{Orders, ParamSet, SystemParamSet};
use crate::fraclap::{Field, SpaceGrid, Spectral};
use crate::fracops::{l1_weights, rectangle_weights, TimeGrid, TimeSeries};
use crate::identities::FieldSeries;
use crate::testfn::bump;
use num_complex::Complex64;

/// `A ψ(|x - c| / w)` with `ψ` the canonical bump of radius 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataSpec {
    pub amplitude: f64,
    pub width: f64,
    pub center: [f64; 2],
}

impl DataSpec {
    pub fn bump(amplitude: f64, width: f64) -> Self {
        DataSpec {
            amplitude,
            width,
            center: [0.0; 2],
        }
    }

    pub fn zero() -> Self {
        DataSpec::bump(0.0, 1.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DataSpec {
            amplitude: self.amplitude * factor,
            ..*self
        }
    }

    pub fn sample(&self, grid: &SpaceGrid) -> Result<Field> {
        if !(self.width > 0.0 && self.width.is_finite() && self.amplitude.is_finite()) {
            return Err(Error::Parameter(format!(
                "data needs a finite amplitude and positive width, got A = {}, w = {}",
                self.amplitude, self.width
            )));
        }
        let (a, w, c) = (self.amplitude, self.width, self.center);
        Ok(Field::from_fn(*grid, |x| {
            let r2: f64 = x.iter().zip(&c).map(|(xi, ci)| (xi - ci).powi(2)).sum();
            a * bump(r2.sqrt() / w)
        }))
    }
}

/// Periodic box of half-length `20 w` for data of width `w`.
pub fn default_space(dim: usize, width: f64, points: usize) -> Result<SpaceGrid> {
    SpaceGrid::new(dim, 20.0 * width, points)
}

/// Scalar run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: ParamSet,
    pub space: SpaceGrid,
    pub time: TimeGrid,
    pub u1: DataSpec,
    /// `None` is `u₀ = 0`.
    pub u0: Option<DataSpec>,
    pub threshold: f64,
    pub nonlinearity: bool,
    /// Enforces the blow-up data hypotheses `u₀ = 0`, `u₁ >= 0`.
    pub enforce_hypotheses: bool,
    /// Keep every `k`-th solution field.
    pub snapshot_every: Option<usize>,
}

impl SimConfig {
    pub fn new(params: ParamSet, space: SpaceGrid, time: TimeGrid, u1: DataSpec) -> Self {
        SimConfig {
            params,
            space,
            time,
            u1,
            u0: None,
            threshold: DEFAULT_THRESHOLD,
            nonlinearity: true,
            enforce_hypotheses: true,
            snapshot_every: None,
        }
    }

    fn validate(&self) -> Result<(Field, Field)> {
        let u1 = self.u1.sample(&self.space)?;
        let u0 = match &self.u0 {
            Some(d) => d.sample(&self.space)?,
            None => Field::zeros(self.space),
        };
        if self.enforce_hypotheses {
            if u0.sup_norm() != 0.0 {
                return Err(Error::Hypothesis("data hypotheses require u₀ = 0".into()));
            }
            if self.u1.amplitude < 0.0 {
                return Err(Error::Hypothesis("data hypotheses require u₁ >= 0".into()));
            }
        }
        check_threshold(self.threshold, &[&u0])?;
        if self.snapshot_every == Some(0) {
            return Err(Error::Parameter(
                "snapshot interval must be positive".into(),
            ));
        }
        Ok((u0, u1))
    }
}

pub const DEFAULT_THRESHOLD: f64 = 1e8;

fn check_threshold(threshold: f64, initial: &[&Field]) -> Result<()> {
    let start = initial.iter().map(|f| f.sup_norm()).fold(0.0, f64::max);
    if !(threshold > start && threshold.is_finite()) {
        return Err(Error::Parameter(format!(
            "threshold {threshold} must be finite and exceed the initial sup-norm {start}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Completed,
    BlowUp,
    Diverged,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Completed => "Completed",
            Status::BlowUp => "BlowUp",
            Status::Diverged => "Diverged",
        })
    }
}

/// Outcome of a scalar run, or of one component of a system run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub step: f64,
    /// `sup |u(t_j)|` for every node reached, starting at `t = 0`.
    pub sup_norms: Vec<f64>,
    pub status: Status,
    pub blowup_time: Option<f64>,
    pub diverged_at: Option<f64>,
    pub snapshots: Vec<(f64, Field)>,
}

impl SimResult {
    pub fn steps_taken(&self) -> usize {
        self.sup_norms.len() - 1
    }

    pub fn final_time(&self) -> f64 {
        self.steps_taken() as f64 * self.step
    }

    pub fn final_supnorm(&self) -> f64 {
        *self.sup_norms.last().expect("trace starts at t = 0")
    }

    /// The sup-norm history on the grid of the nodes reached.
    pub fn trace(&self) -> Result<TimeSeries> {
        let steps = self.steps_taken();
        if steps < 2 {
            return Err(Error::Geometry(format!("only {steps} steps were taken")));
        }
        TimeSeries::new(
            TimeGrid::new(self.final_time(), steps)?,
            self.sup_norms.clone(),
        )
    }

    /// Snapshots as a [`FieldSeries`]; requires a snapshot interval of 1.
    pub fn field_series(&self) -> Result<FieldSeries> {
        let steps = self.steps_taken();
        if self.snapshots.len() != steps + 1 {
            return Err(Error::Geometry(
                "field series needs a snapshot at every step".into(),
            ));
        }
        FieldSeries::new(
            TimeGrid::new(self.final_time(), steps)?,
            self.snapshots.iter().map(|s| s.1.clone()).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Crossing,
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupEvent {
    pub time: f64,
    pub index: usize,
    pub kind: EventKind,
}

/// First threshold crossing of a sup-norm trace, with the crossing time
/// interpolated linearly between nodes. A non-finite sample reports its
/// node time as [`EventKind::NonFinite`].
pub fn detect_blowup(trace: &TimeSeries, threshold: f64) -> Option<BlowupEvent> {
    detect_in(trace.values(), trace.grid().step(), threshold)
}

fn detect_in(values: &[f64], h: f64, threshold: f64) -> Option<BlowupEvent> {
    for (j, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Some(BlowupEvent {
                time: j as f64 * h,
                index: j,
                kind: EventKind::NonFinite,
            });
        }
        if v >= threshold {
            let time = if j == 0 {
                0.0
            } else {
                let prev = values[j - 1];
                let frac = ((threshold - prev) / (v - prev)).clamp(0.0, 1.0);
                (j as f64 - 1.0 + frac) * h
            };
            return Some(BlowupEvent {
                time,
                index: j,
                kind: EventKind::Crossing,
            });
        }
    }
    None
}

/// `I^{1-γ}_{0|t}|u|^p` at node `t_index` from the fields at nodes
/// `0 .. t_index - 1`, by the left-endpoint product rectangle rule.
pub fn nonlocal_source(
    history: &[Field],
    gamma: f64,
    p: f64,
    t_index: usize,
    h: f64,
) -> Result<Field> {
    if !(p > 1.0) {
        return Err(Error::Parameter(format!("p = {p} must exceed 1")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Order {
            value: gamma,
            reason: "γ must lie in (0, 1)".into(),
        });
    }
    if history.len() < t_index || history.is_empty() {
        return Err(Error::Geometry(format!(
            "history has {} fields, node {t_index} needs {t_index}",
            history.len()
        )));
    }
    let grid = *history[0].grid();
    let w = rectangle_weights(1.0 - gamma, h, t_index);
    let mut out = vec![0.0; grid.len()];
    for (k, field) in history[..t_index].iter().enumerate() {
        let wk = w[t_index - 1 - k];
        for (o, &u) in out.iter_mut().zip(field.values()) {
            *o += wk * u.abs().powf(p);
        }
    }
    Field::new(grid, out)
}

/// Linear memory of one component: implicit per-channel update of
/// `(u, v)` with the stored velocity history.
struct LinearMemory {
    h: f64,
    a: f64,
    l1: Vec<f64>,
    damp: Vec<f64>,
    lam_sigma: Vec<f64>,
    lam_delta: Vec<f64>,
    denom: Vec<f64>,
    channels: usize,
    history: Vec<f64>,
    u: Vec<f64>,
    scratch_h: Vec<f64>,
    scratch_s: Vec<f64>,
    coef_h: Vec<f64>,
    coef_s: Vec<f64>,
}

impl LinearMemory {
    fn new(
        orders: &Orders,
        h: f64,
        steps: usize,
        lam_sigma: Vec<f64>,
        lam_delta: Vec<f64>,
        u0: Vec<f64>,
        v0: Vec<f64>,
    ) -> Self {
        let channels = u0.len();
        let a = h.powf(-orders.alpha1) / gamma(2.0 - orders.alpha1);
        let damp = rectangle_weights(1.0 - orders.alpha2, h, steps + 1);
        let denom = lam_sigma
            .iter()
            .zip(&lam_delta)
            .map(|(ls, ld)| a + ls * h + ld * damp[0])
            .collect();
        let mut history = Vec::with_capacity(channels * 1024.min(steps + 1));
        history.extend_from_slice(&v0);
        LinearMemory {
            h,
            a,
            l1: l1_weights(orders.alpha1, steps + 1),
            damp,
            lam_sigma,
            lam_delta,
            denom,
            channels,
            history,
            u: u0,
            scratch_h: vec![0.0; channels],
            scratch_s: vec![0.0; channels],
            coef_h: Vec::with_capacity(steps + 1),
            coef_s: Vec::with_capacity(steps + 1),
        }
    }

    /// Advances to node `n` (the history holds nodes `0 .. n-1`).
    fn advance(&mut self, n: usize, forcing: Option<&[f64]>) {
        let b = &self.l1;
        // L1 memory: Σ_{k<n-1} b_{n-1-k}(v_{k+1} - v_k) = Σ_k coef_h[k] v_k.
        self.coef_h.clear();
        self.coef_s.clear();
        for k in 0..n {
            let up = if k >= 1 { b[n - k] } else { 0.0 };
            let down = if k + 2 <= n { b[n - 1 - k] } else { 0.0 };
            self.coef_h.push(up - down);
            self.coef_s
                .push(if k >= 1 { self.damp[n - k] } else { 0.0 });
        }
        self.scratch_h.iter_mut().for_each(|x| *x = 0.0);
        self.scratch_s.iter_mut().for_each(|x| *x = 0.0);
        let c = self.channels;
        for k in 0..n {
            let (ch, cs) = (self.coef_h[k], self.coef_s[k]);
            let row = &self.history[k * c..(k + 1) * c];
            for ((hh, ss), &v) in self
                .scratch_h
                .iter_mut()
                .zip(self.scratch_s.iter_mut())
                .zip(row)
            {
                *hh += ch * v;
                *ss += cs * v;
            }
        }
        let prev = (n - 1) * c;
        let mut next = vec![0.0; c];
        for i in 0..c {
            let v_prev = self.history[prev + i];
            let mut num = self.a * (v_prev - self.scratch_h[i])
                - self.lam_sigma[i] * self.u[i]
                - self.lam_delta[i] * self.scratch_s[i];
            if let Some(f) = forcing {
                num += f[i];
            }
            let v = num / self.denom[i];
            next[i] = v;
            self.u[i] += self.h * v;
        }
        self.history.extend_from_slice(&next);
    }
}

/// Independent half of a Hermitian spectrum and the mirror map that
/// restores the rest.
struct HalfSpectrum {
    modes: Vec<usize>,
    mirrors: Vec<(usize, usize)>,
    len: usize,
}

impl HalfSpectrum {
    fn new(grid: &SpaceGrid) -> Self {
        let m = grid.points();
        let half = m / 2;
        let mut modes = Vec::new();
        let mut mirrors = Vec::new();
        if grid.dim() == 1 {
            modes.extend(0..=half);
            mirrors.extend((half + 1..m).map(|j| (j, m - j)));
        } else {
            for i in 0..m {
                for j in 0..m {
                    if j <= half {
                        modes.push(i * m + j);
                    } else {
                        mirrors.push((i * m + j, ((m - i) % m) * m + (m - j)));
                    }
                }
            }
        }
        HalfSpectrum {
            modes,
            mirrors,
            len: grid.len(),
        }
    }

    /// Interleaved `(re, im)` channels.
    fn gather(&self, full: &[Complex64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.modes.len());
        for &m in &self.modes {
            out.push(full[m].re);
            out.push(full[m].im);
        }
        out
    }

    fn scatter(&self, channels: &[f64]) -> Vec<Complex64> {
        let mut full = vec![Complex64::new(0.0, 0.0); self.len];
        for (k, &m) in self.modes.iter().enumerate() {
            full[m] = Complex64::new(channels[2 * k], channels[2 * k + 1]);
        }
        for &(dst, src) in &self.mirrors {
            full[dst] = full[src].conj();
        }
        full
    }

    fn per_channel(&self, per_mode: &[f64]) -> Vec<f64> {
        self.modes
            .iter()
            .flat_map(|&m| [per_mode[m], per_mode[m]])
            .collect()
    }
}

/// One equation of a (possibly coupled) run.
struct Component {
    orders: Orders,
    /// Exponent of the source `|w|^power` feeding this equation.
    power: f64,
    /// Index of the component `w` inside the source.
    source: usize,
    coupled: bool,
    u0: Field,
    u1: Field,
}

struct EngineOutput {
    sup_norms: Vec<Vec<f64>>,
    snapshots: Vec<Vec<(f64, Field)>>,
    stop: Option<(usize, BlowupEvent)>,
}

fn run_engine(
    space: &SpaceGrid,
    time: &TimeGrid,
    comps: &[Component],
    threshold: f64,
    snapshot_every: Option<usize>,
) -> Result<EngineOutput> {
    let spectral = Spectral::new(*space);
    let half = HalfSpectrum::new(space);
    let h = time.step();
    let steps = time.steps();
    let nonlinear = comps.iter().any(|c| c.coupled);

    let mut memories = Vec::with_capacity(comps.len());
    let mut source_weights = Vec::with_capacity(comps.len());
    for c in comps {
        let lam_s = half.per_channel(&spectral.symbol(c.orders.sigma));
        let lam_d = half.per_channel(&spectral.symbol(c.orders.delta));
        let u0 = half.gather(&spectral.forward_real(c.u0.values()));
        let v0 = half.gather(&spectral.forward_real(c.u1.values()));
        memories.push(LinearMemory::new(&c.orders, h, steps, lam_s, lam_d, u0, v0));
        source_weights.push(rectangle_weights(1.0 - c.orders.gamma, h, steps));
    }

    let points = space.len();
    let mut physical: Vec<Vec<f64>> = comps.iter().map(|c| c.u0.values().to_vec()).collect();
    let mut source_hist: Vec<Vec<f64>> = vec![Vec::new(); comps.len()];
    let push_sources = |hist: &mut [Vec<f64>], physical: &[Vec<f64>]| {
        for (i, c) in comps.iter().enumerate() {
            if c.coupled {
                hist[i].extend(physical[c.source].iter().map(|u| u.abs().powf(c.power)));
            }
        }
    };
    push_sources(&mut source_hist, &physical);

    let sup = |v: &[f64]| {
        v.iter().fold(
            0.0f64,
            |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) },
        )
    };
    let mut sup_norms: Vec<Vec<f64>> = physical.iter().map(|p| vec![sup(p)]).collect();
    let mut snapshots: Vec<Vec<(f64, Field)>> = vec![Vec::new(); comps.len()];
    let take_snapshot = |n: usize| snapshot_every.is_some_and(|k| n % k == 0);
    if take_snapshot(0) {
        for (i, c) in comps.iter().enumerate() {
            snapshots[i].push((0.0, c.u0.clone()));
        }
    }

    let mut accum = vec![0.0; points];
    for n in 1..=steps {
        for (i, c) in comps.iter().enumerate() {
            let forcing = if c.coupled {
                let w = &source_weights[i];
                accum.iter_mut().for_each(|x| *x = 0.0);
                for k in 0..n {
                    let wk = w[n - 1 - k];
                    let row = &source_hist[i][k * points..(k + 1) * points];
                    for (a, &s) in accum.iter_mut().zip(row) {
                        *a += wk * s;
                    }
                }
                Some(half.gather(&spectral.forward_real(&accum)))
            } else {
                None
            };
            memories[i].advance(n, forcing.as_deref());
        }
        for (i, mem) in memories.iter().enumerate() {
            physical[i] = spectral.inverse_real(half.scatter(&mem.u));
            sup_norms[i].push(sup(&physical[i]));
        }
        push_sources(&mut source_hist, &physical);
        if take_snapshot(n) {
            for i in 0..comps.len() {
                snapshots[i].push((time.node(n), Field::new(*space, physical[i].clone())?));
            }
        }

        let mut stop: Option<(usize, BlowupEvent)> = None;
        for (i, trace) in sup_norms.iter().enumerate() {
            if let Some(ev) = detect_in(&trace[n - 1..], h, threshold) {
                let ev = BlowupEvent {
                    time: ev.time + (n - 1) as f64 * h,
                    index: n,
                    ..ev
                };
                let better = match stop {
                    None => true,
                    Some((_, s)) => {
                        (ev.kind == EventKind::NonFinite && s.kind != EventKind::NonFinite)
                            || (ev.kind == s.kind && ev.time < s.time)
                    }
                };
                if better {
                    stop = Some((i, ev));
                }
            }
        }
        if let Some(s) = stop {
            return Ok(EngineOutput {
                sup_norms,
                snapshots,
                stop: Some(s),
            });
        }
        if !nonlinear && n >= 2 {
            for trace in &sup_norms {
                let (before, now) = (trace[n - 1], trace[n]);
                if before > 0.0 && now > 10.0 * before {
                    return Err(Error::StepSize {
                        time: time.node(n),
                        factor: now / before,
                    });
                }
            }
        }
    }
    Ok(EngineOutput {
        sup_norms,
        snapshots,
        stop: None,
    })
}

fn component_result(
    h: f64,
    sup_norms: Vec<f64>,
    snapshots: Vec<(f64, Field)>,
    stop: Option<BlowupEvent>,
) -> SimResult {
    let (status, blowup_time, diverged_at) = match stop {
        None => (Status::Completed, None, None),
        Some(ev) if ev.kind == EventKind::NonFinite => (Status::Diverged, None, Some(ev.time)),
        Some(ev) => (Status::BlowUp, Some(ev.time), None),
    };
    SimResult {
        step: h,
        sup_norms,
        status,
        blowup_time,
        diverged_at,
        snapshots,
    }
}

/// Advances the scalar equation until blow-up, divergence or the horizon.
pub fn run(config: &SimConfig) -> Result<SimResult> {
    let (u0, u1) = config.validate()?;
    let comp = Component {
        orders: *config.params.orders(),
        power: config.params.p(),
        source: 0,
        coupled: config.nonlinearity,
        u0,
        u1,
    };
    let out = run_engine(
        &config.space,
        &config.time,
        &[comp],
        config.threshold,
        config.snapshot_every,
    )?;
    let EngineOutput {
        mut sup_norms,
        mut snapshots,
        stop,
    } = out;
    Ok(component_result(
        config.time.step(),
        sup_norms.remove(0),
        snapshots.remove(0),
        stop.map(|s| s.1),
    ))
}

/// Two-component configuration: `u` is driven by `|v|^p`, `v` by `|u|^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub params: SystemParamSet,
    pub space: SpaceGrid,
    pub time: TimeGrid,
    pub u1: DataSpec,
    pub v1: DataSpec,
    pub threshold: f64,
    /// Source `I^{1-γ₁}|v|^p` in the `u` equation.
    pub source_u: bool,
    /// Source `I^{1-γ₂}|u|^q` in the `v` equation.
    pub source_v: bool,
    pub enforce_hypotheses: bool,
}

impl SystemConfig {
    pub fn new(
        params: SystemParamSet,
        space: SpaceGrid,
        time: TimeGrid,
        u1: DataSpec,
        v1: DataSpec,
    ) -> Self {
        SystemConfig {
            params,
            space,
            time,
            u1,
            v1,
            threshold: DEFAULT_THRESHOLD,
            source_u: true,
            source_v: true,
            enforce_hypotheses: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemResult {
    pub u: SimResult,
    pub v: SimResult,
    /// Status of the pair: a blow-up of either component stops both.
    pub status: Status,
    pub blowup_time: Option<f64>,
}

pub fn run_system(config: &SystemConfig) -> Result<SystemResult> {
    if config.enforce_hypotheses && (config.u1.amplitude < 0.0 || config.v1.amplitude < 0.0) {
        return Err(Error::Hypothesis(
            "data hypotheses require u₁, v₁ >= 0".into(),
        ));
    }
    let zero = Field::zeros(config.space);
    check_threshold(config.threshold, &[&zero])?;
    let s = &config.params;
    let comps = [
        Component {
            orders: *s.first(),
            power: s.p(),
            source: 1,
            coupled: config.source_u,
            u0: zero.clone(),
            u1: config.u1.sample(&config.space)?,
        },
        Component {
            orders: *s.second(),
            power: s.q(),
            source: 0,
            coupled: config.source_v,
            u0: zero.clone(),
            u1: config.v1.sample(&config.space)?,
        },
    ];
    let out = run_engine(&config.space, &config.time, &comps, config.threshold, None)?;
    let h = config.time.step();
    let mut norms = out.sup_norms.into_iter();
    let (nu, nv) = (
        norms.next().expect("two components"),
        norms.next().expect("two components"),
    );
    let ev = out.stop.map(|s| s.1);
    let u = component_result(
        h,
        nu,
        Vec::new(),
        ev.filter(|_| out.stop.is_some_and(|s| s.0 == 0)),
    );
    let v = component_result(
        h,
        nv,
        Vec::new(),
        ev.filter(|_| out.stop.is_some_and(|s| s.0 == 1)),
    );
    let pair = component_result(h, vec![0.0], Vec::new(), ev);
    Ok(SystemResult {
        u,
        v,
        status: pair.status,
        blowup_time: pair.blowup_time,
    })
}

/// The linear mode equation
/// `D^{1+α₁}y + λ_σ y + λ_δ D^{α₂}y = 0`, `y(0) = y₀`, `y'(0) = y₁`,
/// advanced by the scalar scheme; returns `y` on the grid.
pub fn mode_reference(
    orders: &Orders,
    lambda_sigma: f64,
    lambda_delta: f64,
    y0: f64,
    y1: f64,
    time: TimeGrid,
) -> Result<TimeSeries> {
    if lambda_sigma < 0.0 || lambda_delta < 0.0 {
        return Err(Error::Parameter(
            "mode multipliers must be nonnegative".into(),
        ));
    }
    let mut mem = LinearMemory::new(
        orders,
        time.step(),
        time.steps(),
        vec![lambda_sigma],
        vec![lambda_delta],
        vec![y0],
        vec![y1],
    );
    let mut out = Vec::with_capacity(time.len());
    out.push(y0);
    for n in 1..=time.steps() {
        mem.advance(n, None);
        out.push(mem.u[0]);
    }
    TimeSeries::new(time, out)
}

/// Doubles the initial-velocity amplitude until the run blows up, at most
/// `max_doublings` times. Returns the amplitude and the blow-up run.
pub fn tune_amplitude(config: &SimConfig, max_doublings: usize) -> Result<(f64, SimResult)> {
    let mut cfg = config.clone();
    for _ in 0..=max_doublings {
        let res = run(&cfg)?;
        if res.status == Status::BlowUp {
            return Ok((cfg.u1.amplitude, res));
        }
        cfg.u1 = cfg.u1.scaled(2.0);
    }
    Err(Error::Unsupported(format!(
        "no blow-up before t = {} after {max_doublings} doublings (last amplitude {})",
        config.time.horizon(),
        cfg.u1.amplitude / 2.0
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::Mode;
    use approx::assert_relative_eq;

    fn orders() -> Orders {
        Orders {
            alpha1: 0.5,
            alpha2: 0.3,
            gamma: 0.25,
            sigma: 0.5,
            delta: 0.7,
        }
    }

    fn config(steps: usize, horizon: f64, amplitude: f64) -> SimConfig {
        let ps = ParamSet::new(orders(), 2.0, 1, Mode::Strict).unwrap();
        let space = default_space(1, 1.0, 64).unwrap();
        SimConfig::new(
            ps,
            space,
            TimeGrid::new(horizon, steps).unwrap(),
            DataSpec::bump(amplitude, 1.0),
        )
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let res = run(&config(50, 1.0, 0.0)).unwrap();
        assert_eq!(res.status, Status::Completed);
        assert!(res.sup_norms.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn detect_interpolates() {
        let grid = TimeGrid::new(3.0, 3).unwrap();
        let t = TimeSeries::new(grid, vec![0.0, 1.0, 3.0, 5.0]).unwrap();
        let ev = detect_blowup(&t, 2.0).unwrap();
        assert_relative_eq!(ev.time, 1.5);
        assert_eq!(ev.kind, EventKind::Crossing);
        assert!(detect_blowup(&t, 10.0).is_none());
        let nan = TimeSeries::new(grid, vec![0.0, 1.0, f64::NAN, 5.0]);
        assert!(
            nan.is_err() || detect_blowup(&nan.unwrap(), 2.0).unwrap().kind == EventKind::NonFinite
        );
        assert_eq!(
            detect_in(&[0.0, 1.0, f64::NAN], 0.5, 2.0).unwrap().time,
            1.0
        );
    }

    #[test]
    fn source_of_constant_history() {
        let g = SpaceGrid::new(1, 1.0, 8).unwrap();
        let c = Field::zeros(g).map(|_| -1.5);
        let hist = vec![c; 11];
        let s = nonlocal_source(&hist, 0.25, 2.0, 10, 0.1).unwrap();
        let expected = 2.25 * 1f64.powf(0.75) / gamma(1.75);
        for &v in s.values() {
            assert_relative_eq!(v, expected, max_relative = 1e-12);
        }
        assert!(nonlocal_source(&hist, 0.25, 1.0, 10, 0.1).is_err());
        let near_identity = nonlocal_source(&hist, 1.0 - 1e-12, 2.0, 10, 0.1).unwrap();
        assert_relative_eq!(near_identity.values()[0], 2.25, max_relative = 1e-9);
    }

    #[test]
    fn mode_reference_without_forces_is_linear_motion() {
        let y = mode_reference(
            &orders(),
            0.0,
            0.0,
            1.0,
            2.0,
            TimeGrid::new(1.0, 100).unwrap(),
        )
        .unwrap();
        for (j, t) in y.grid().nodes().enumerate() {
            assert_relative_eq!(y.values()[j], 1.0 + 2.0 * t, max_relative = 1e-12);
        }
    }

    #[test]
    fn mode_reference_self_converges() {
        let o = orders();
        let coarse =
            mode_reference(&o, 2.0, 1.5, 0.0, 1.0, TimeGrid::new(4.0, 400).unwrap()).unwrap();
        let fine =
            mode_reference(&o, 2.0, 1.5, 0.0, 1.0, TimeGrid::new(4.0, 3200).unwrap()).unwrap();
        let scale = fine.max_abs();
        for j in 0..=400 {
            assert!((coarse.values()[j] - fine.values()[8 * j]).abs() < 0.02 * scale);
        }
    }

    #[test]
    fn single_mode_matches_reference() {
        let space = SpaceGrid::new(1, std::f64::consts::PI, 32).unwrap();
        let time = TimeGrid::new(2.0, 200).unwrap();
        // cos(3x) excites the single wavenumber 3
        let comp = Component {
            orders: orders(),
            power: 2.0,
            source: 0,
            coupled: false,
            u0: Field::zeros(space),
            u1: Field::from_fn(space, |x| (3.0 * x[0]).cos()),
        };
        let out = run_engine(&space, &time, &[comp], 1e8, None).unwrap();
        let reference =
            mode_reference(&orders(), 3f64.powf(1.0), 3f64.powf(1.4), 0.0, 1.0, time).unwrap();
        for (a, b) in out.sup_norms[0].iter().zip(reference.values()) {
            assert!((a - b.abs()).abs() < 1e-10);
        }
    }

    #[test]
    fn half_spectrum_round_trip() {
        for dim in [1, 2] {
            let g = SpaceGrid::new(dim, 3.0, 16).unwrap();
            let sp = Spectral::new(g);
            let f = Field::from_fn(g, |x| {
                (x[0] - 0.3).sin() + x.iter().map(|v| v * v).sum::<f64>().cos()
            });
            let half = HalfSpectrum::new(&g);
            let back = sp.inverse_real(half.scatter(&half.gather(&sp.forward_real(f.values()))));
            for (a, b) in back.iter().zip(f.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn enforce_hypotheses_checks_data() {
        let mut cfg = config(10, 1.0, -1.0);
        assert!(matches!(run(&cfg), Err(Error::Hypothesis(_))));
        cfg.u1 = DataSpec::bump(1.0, 1.0);
        cfg.u0 = Some(DataSpec::bump(1.0, 1.0));
        assert!(matches!(run(&cfg), Err(Error::Hypothesis(_))));
        cfg.enforce_hypotheses = false;
        cfg.threshold = 0.5;
        assert!(matches!(run(&cfg), Err(Error::Parameter(_))));
    }

    #[test]
    fn large_data_blows_up() {
        let res = run(&config(400, 4.0, 50.0)).unwrap();
        assert_eq!(res.status, Status::BlowUp);
        let t = res.blowup_time.unwrap();
        assert!(t > 0.0 && t <= 4.0);
        assert!(res.final_supnorm() >= DEFAULT_THRESHOLD);
    }

    #[test]
    fn symmetric_system_has_equal_components() {
        let s = SystemParamSet::new(orders(), orders(), 2.0, 2.0, 1, Mode::Strict).unwrap();
        let space = default_space(1, 1.0, 64).unwrap();
        let cfg = SystemConfig::new(
            s,
            space,
            TimeGrid::new(1.0, 100).unwrap(),
            DataSpec::bump(3.0, 1.0),
            DataSpec::bump(3.0, 1.0),
        );
        let r = run_system(&cfg).unwrap();
        assert_eq!(r.u.sup_norms, r.v.sup_norms);
    }
}
