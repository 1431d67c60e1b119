//! Intensity functions and the deterministic information quantities between
//! two of them.
//!
//! An [`IntensityModel`] is a non-negative rate `λ(t)` on `t ≥ 0`. On a window
//! `[0, T]` it factors as `λ(t) = τ·p(t)` with `τ = ∫₀ᵀ λ` the expected event
//! count and `p` a probability density ([`ShapeDecomposition`]). Divergences
//! between shapes ([`kl_divergence`], [`kl_variation`]) and the Bhattacharyya
//! exponent are evaluated by adaptive quadrature.

use std::cell::Cell;
use std::f64::consts::{FRAC_PI_4, PI};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Shapes (and intensities) below this value are treated as vanishing.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// Default grid size for [`verify_bounds`].
pub const DEFAULT_BOUNDS_GRID: usize = 100_000;

const HARMONIC_OFFSET: f64 = 1.6;
const HARMONIC_AMP2: f64 = 0.5;

fn harmonic_freq1() -> f64 {
    PI / (4.0 * 3f64.sqrt())
}

fn harmonic_freq2() -> f64 {
    PI / (3.0 * 2f64.sqrt())
}

/// A piecewise-linear rate read from a table of `(t, λ(t))` pairs.
///
/// Outside the tabulated range the rate is held at the nearest endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    times: Vec<f64>,
    rates: Vec<f64>,
    /// `cumulative[i] = ∫_{times[0]}^{times[i]} λ`.
    cumulative: Vec<f64>,
}

impl Tabulated {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("tabulated intensity needs at least one point"));
        }
        let (times, rates): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if times.iter().chain(&rates).any(|v| !v.is_finite()) {
            return Err(Error::invalid("tabulated intensity contains non-finite values"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("tabulated grid must be strictly increasing in t"));
        }
        if let Some(r) = rates.iter().find(|&&r| r < 0.0) {
            return Err(Error::invalid(format!("tabulated rate {r} is negative")));
        }
        let mut cumulative = Vec::with_capacity(times.len());
        cumulative.push(0.0);
        for i in 1..times.len() {
            let seg = 0.5 * (rates[i] + rates[i - 1]) * (times[i] - times[i - 1]);
            cumulative.push(cumulative[i - 1] + seg);
        }
        Ok(Self {
            times,
            rates,
            cumulative,
        })
    }

    /// Read a two-column CSV with a header row (`t,lambda`).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut points = Vec::new();
        for record in reader.deserialize::<(f64, f64)>() {
            points.push(record?);
        }
        Self::new(points)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.rates.iter().copied())
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.rates[0];
        }
        if t >= self.times[n - 1] {
            return self.rates[n - 1];
        }
        let i = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        self.rates[i - 1] * (1.0 - w) + self.rates[i] * w
    }

    /// `∫_{times[0]}^{x} λ`, negative for `x` before the first node.
    fn primitive(&self, x: f64) -> f64 {
        let n = self.times.len();
        if x <= self.times[0] {
            return (x - self.times[0]) * self.rates[0];
        }
        if x >= self.times[n - 1] {
            return self.cumulative[n - 1] + (x - self.times[n - 1]) * self.rates[n - 1];
        }
        let i = self.times.partition_point(|&v| v <= x);
        let t0 = self.times[i - 1];
        let r0 = self.rates[i - 1];
        let rx = self.eval(x);
        self.cumulative[i - 1] + 0.5 * (r0 + rx) * (x - t0)
    }
}

/// A deterministic intensity function `λ(t)`, `t ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum IntensityModel {
    /// Constant rate.
    Homogeneous {
        rate: f64,
    },
    /// `1.6 + cos(πt/(4√3) + φ) + 0.5·cos(πt/(3√2) + π/4 + φ)`.
    Harmonic {
        phase: f64,
    },
    /// `a·exp(-b(t - 0.5)²)`.
    GaussianBump {
        amplitude: f64,
        width: f64,
    },
    /// `μ·λ_base(t)`.
    Scaled {
        base: Box<IntensityModel>,
        factor: f64,
    },
    Tabulated(Tabulated),
}

impl IntensityModel {
    pub fn homogeneous(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::invalid(format!(
                "homogeneous rate {rate} must be finite and >= 0"
            )));
        }
        Ok(Self::Homogeneous { rate })
    }

    pub fn harmonic(phase: f64) -> Result<Self> {
        if !phase.is_finite() {
            return Err(Error::invalid("harmonic phase must be finite"));
        }
        Ok(Self::Harmonic { phase })
    }

    pub fn gaussian_bump(amplitude: f64, width: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0 && width.is_finite() && width > 0.0) {
            return Err(Error::invalid(format!(
                "gaussian bump needs amplitude > 0 and width > 0 (got {amplitude}, {width})"
            )));
        }
        Ok(Self::GaussianBump { amplitude, width })
    }

    pub fn scaled(base: IntensityModel, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid(format!("scale factor {factor} must be > 0")));
        }
        Ok(Self::Scaled {
            base: Box::new(base),
            factor,
        })
    }

    /// `λ(t)`; rejects negative `t`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        Ok(self.rate(t))
    }

    /// `λ(t)` without argument checking.
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            Self::Homogeneous { rate } => *rate,
            Self::Harmonic { phase } => {
                HARMONIC_OFFSET
                    + (harmonic_freq1() * t + phase).cos()
                    + HARMONIC_AMP2 * (harmonic_freq2() * t + FRAC_PI_4 + phase).cos()
            }
            Self::GaussianBump { amplitude, width } => {
                let d = t - 0.5;
                amplitude * (-width * d * d).exp()
            }
            Self::Scaled { base, factor } => factor * base.rate(t),
            Self::Tabulated(tab) => tab.eval(t),
        }
    }

    /// `log λ(t)`, computed without underflow where the variant allows it.
    pub fn log_rate(&self, t: f64) -> f64 {
        match self {
            Self::GaussianBump { amplitude, width } => {
                let d = t - 0.5;
                amplitude.ln() - width * d * d
            }
            Self::Scaled { base, factor } => factor.ln() + base.log_rate(t),
            _ => self.rate(t).ln(),
        }
    }

    /// `∫ₐᵇ λ(u) du`; requires `0 ≤ a ≤ b`.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        if a < 0.0 || a.is_nan() {
            return Err(Error::NegativeTime(a));
        }
        if b < a || b.is_nan() {
            return Err(Error::invalid(format!("integration bounds reversed: [{a}, {b}]")));
        }
        Ok(self.mass(a, b))
    }

    /// Closed-form `∫ₐᵇ λ` without argument checking.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        match self {
            Self::Homogeneous { rate } => rate * (b - a),
            Self::Harmonic { phase } => {
                let (w1, w2) = (harmonic_freq1(), harmonic_freq2());
                let prim = |t: f64| {
                    HARMONIC_OFFSET * t
                        + (w1 * t + phase).sin() / w1
                        + HARMONIC_AMP2 * (w2 * t + FRAC_PI_4 + phase).sin() / w2
                };
                prim(b) - prim(a)
            }
            Self::GaussianBump { amplitude, width } => {
                let s = width.sqrt();
                let (lo, hi) = (s * (a - 0.5), s * (b - 0.5));
                // erfc keeps the difference accurate in the right tail.
                let diff = if lo >= 0.0 {
                    libm::erfc(lo) - libm::erfc(hi)
                } else if hi <= 0.0 {
                    libm::erfc(-hi) - libm::erfc(-lo)
                } else {
                    libm::erf(hi) - libm::erf(lo)
                };
                0.5 * amplitude * (PI / width).sqrt() * diff
            }
            Self::Scaled { base, factor } => factor * base.mass(a, b),
            Self::Tabulated(tab) => tab.primitive(b) - tab.primitive(a),
        }
    }

    /// `∫ₐᵇ λ` by adaptive quadrature, independent of the closed forms.
    pub fn mass_numeric(&self, a: f64, b: f64) -> f64 {
        match self {
            // Piecewise linear: integrate panel by panel so every kink is a node.
            Self::Tabulated(tab) => {
                let mut nodes = vec![a];
                nodes.extend(tab.times.iter().copied().filter(|&t| t > a && t < b));
                nodes.push(b);
                nodes
                    .windows(2)
                    .map(|w| quad::integrate(|t| self.rate(t), w[0], w[1]))
                    .sum()
            }
            _ => quad::integrate_panels(|t| self.rate(t), a, b, panel_count(a, b)),
        }
    }

    /// Points where the maximum or a kink of `λ` may sit; added to bound grids.
    fn critical_points(&self) -> Vec<f64> {
        match self {
            Self::GaussianBump { .. } => vec![0.5],
            Self::Scaled { base, .. } => base.critical_points(),
            Self::Tabulated(tab) => tab.times.clone(),
            _ => Vec::new(),
        }
    }

    /// Intensity factor and shape density on `[0, T]`.
    pub fn shape_decompose(&self, window: f64) -> Result<ShapeDecomposition> {
        ShapeDecomposition::new(self.clone(), window)
    }
}

pub(crate) fn panel_count(a: f64, b: f64) -> usize {
    ((b - a).ceil() as usize).clamp(1, 4096)
}

/// `λ(t) = τ·p(t)` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeDecomposition {
    tau: f64,
    window: f64,
    model: IntensityModel,
}

impl ShapeDecomposition {
    pub fn new(model: IntensityModel, window: f64) -> Result<Self> {
        if !(window.is_finite() && window > 0.0) {
            return Err(Error::invalid(format!("window T = {window} must be positive")));
        }
        let tau = model.mass(0.0, window);
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::DegenerateClass(format!(
                "intensity has total mass {tau} on [0, {window}]; shape cannot be normalized"
            )));
        }
        Ok(Self { tau, window, model })
    }

    /// Expected event count on the window.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn model(&self) -> &IntensityModel {
        &self.model
    }

    /// `p(t) = λ(t)/τ`.
    pub fn shape(&self, t: f64) -> f64 {
        self.model.rate(t) / self.tau
    }

    pub fn log_shape(&self, t: f64) -> f64 {
        self.model.log_rate(t) - self.tau.ln()
    }
}

/// Result of a grid scan of `λ` over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityBounds {
    /// Grid minimum.
    pub delta: f64,
    /// Grid maximum (including known critical points).
    pub c: f64,
    /// `(1/T)∫₀ᵀ λ`.
    pub d_hat: f64,
}

impl IntensityBounds {
    /// Whether the rate stays bounded away from zero (`δ > 1e-12`).
    pub fn a1_holds(&self) -> bool {
        self.delta > POSITIVITY_FLOOR && self.c.is_finite()
    }

    /// Bounds covering both of two intensities.
    pub fn union(&self, other: &Self) -> Self {
        Self {
            delta: self.delta.min(other.delta),
            c: self.c.max(other.c),
            d_hat: 0.5 * (self.d_hat + other.d_hat),
        }
    }

    /// `u = log(C/δ)`.
    pub fn log_span(&self) -> f64 {
        (self.c / self.delta).ln()
    }
}

/// Scan `λ` on a uniform grid of `grid_points` over `[0, T]`.
///
/// A vanishing minimum is reported through [`IntensityBounds::a1_holds`]
/// rather than as an error.
pub fn verify_bounds(model: &IntensityModel, window: f64, grid_points: usize) -> Result<IntensityBounds> {
    if grid_points < 2 {
        return Err(Error::invalid("verify_bounds needs at least 2 grid points"));
    }
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::invalid(format!("window T = {window} must be positive")));
    }
    let step = window / (grid_points - 1) as f64;
    let extra = model
        .critical_points()
        .into_iter()
        .filter(|&t| (0.0..=window).contains(&t));
    let (lo, hi) = (0..grid_points)
        .map(|i| if i + 1 == grid_points { window } else { i as f64 * step })
        .chain(extra)
        .map(|t| model.rate(t))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(IntensityBounds {
        delta: lo,
        c: hi,
        d_hat: model.mass(0.0, window) / window,
    })
}

const GUARD_GRID: usize = 2001;

fn check_positive(p: &ShapeDecomposition, q: &ShapeDecomposition) -> Result<()> {
    if p.window != q.window {
        return Err(Error::WindowMismatch {
            train: q.window,
            rule: p.window,
        });
    }
    let step = p.window / (GUARD_GRID - 1) as f64;
    for i in 0..GUARD_GRID {
        let t = i as f64 * step;
        for (name, s) in [("p", p), ("q", q)] {
            let v = s.shape(t);
            if v.is_nan() || v < POSITIVITY_FLOOR {
                return Err(Error::AssumptionViolation {
                    t,
                    detail: format!("shape {name} = {v:e} below {POSITIVITY_FLOOR:e}"),
                });
            }
        }
    }
    Ok(())
}

fn guarded_integral<F: Fn(f64) -> f64>(p: &ShapeDecomposition, q: &ShapeDecomposition, f: F) -> Result<f64> {
    check_positive(p, q)?;
    let bad = Cell::new(None);
    let value = quad::integrate_panels(
        |t| {
            if p.shape(t) < POSITIVITY_FLOOR || q.shape(t) < POSITIVITY_FLOOR {
                bad.set(Some(t));
                return 0.0;
            }
            f(t)
        },
        0.0,
        p.window,
        panel_count(0.0, p.window),
    );
    match bad.get() {
        Some(t) => Err(Error::AssumptionViolation {
            t,
            detail: "shape density below floor inside quadrature".into(),
        }),
        None => Ok(value),
    }
}

/// `K_T(p‖q) = ∫₀ᵀ log(p/q)·p`.
pub fn kl_divergence(p: &ShapeDecomposition, q: &ShapeDecomposition) -> Result<f64> {
    guarded_integral(p, q, |t| p.shape(t) * (p.log_shape(t) - q.log_shape(t)))
}

/// `V_T(p‖q) = ∫₀ᵀ log²(p/q)·p`.
pub fn kl_variation(p: &ShapeDecomposition, q: &ShapeDecomposition) -> Result<f64> {
    guarded_integral(p, q, |t| {
        let r = p.log_shape(t) - q.log_shape(t);
        p.shape(t) * r * r
    })
}

/// `β(T) = ∫₀ᵀ [½λ₁ + ½λ₂ − √(λ₁λ₂)]`.
pub fn bhattacharyya_exponent(l1: &IntensityModel, l2: &IntensityModel, window: f64) -> Result<f64> {
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::invalid(format!("window T = {window} must be positive")));
    }
    let value = quad::integrate_panels(
        |t| {
            let (a, b) = (l1.rate(t), l2.rate(t));
            // (√a − √b)²/2, the cancellation-free form of the integrand.
            let d = a.sqrt() - b.sqrt();
            0.5 * d * d
        },
        0.0,
        window,
        panel_count(0.0, window),
    );
    Ok(value.max(0.0))
}

/// `√(π₁π₂)·exp(−β)`.
pub fn bhattacharyya_bound(priors: (f64, f64), beta: f64) -> f64 {
    (priors.0 * priors.1).sqrt() * (-beta).exp()
}

/// Config-file form of an intensity: the key names the variant, the table
/// carries its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum IntensitySpec {
    Homogeneous {
        rate: f64,
    },
    /// Phase given as a multiple of π.
    Harmonic {
        phase_over_pi: f64,
    },
    GaussianBump {
        amplitude: f64,
        width: f64,
    },
    Scaled {
        base: Box<IntensitySpec>,
        factor: f64,
    },
    /// Two-column CSV `t,lambda` with a header row.
    Tabulated {
        path: PathBuf,
    },
}

impl IntensitySpec {
    pub fn build(&self) -> Result<IntensityModel> {
        match self {
            Self::Homogeneous { rate } => IntensityModel::homogeneous(*rate),
            Self::Harmonic { phase_over_pi } => IntensityModel::harmonic(phase_over_pi * PI),
            Self::GaussianBump { amplitude, width } => IntensityModel::gaussian_bump(*amplitude, *width),
            Self::Scaled { base, factor } => IntensityModel::scaled(base.build()?, *factor),
            Self::Tabulated { path } => Ok(IntensityModel::Tabulated(Tabulated::from_csv(path)?)),
        }
    }
}
