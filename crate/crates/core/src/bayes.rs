//! The optimal Bayes rule for two Poisson classes, its threshold and
//! variance theory, risk bounds, and Monte Carlo risk estimation.
//!
//! With `g = log(λ₁/λ₂)`, a train `x = (t₁, …, t_N)` is assigned to ω₁ iff
//! `Σ g(tᵢ) ≥ γ` where `γ = τ₁ − τ₂ + log(π₂/π₁)`. Equivalently, in terms of
//! the shape densities, `W = Σ log(p₁/p₂)(tᵢ) ≥ η = γ + N·log(τ₂/τ₁)`.
//! Ties go to ω₁ in every form.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::intensity::{
    bhattacharyya_bound, bhattacharyya_exponent, kl_divergence, panel_count, verify_bounds, IntensityBounds,
    IntensityModel, ShapeDecomposition, DEFAULT_BOUNDS_GRID,
};
use crate::quad;
use crate::rng::{self, Purpose};
use crate::simulate::{validate_priors, Label, LabeledSource, SpikeTrain};

/// Log-domain clamp used by the product form before exponentiating.
pub const PRODUCT_LOG_CLAMP: f64 = 700.0;

/// Both class intensities, priors and window, with derived constants.
#[derive(Debug, Clone)]
pub struct BayesRule {
    shapes: [ShapeDecomposition; 2],
    priors: (f64, f64),
    window: f64,
    gamma: f64,
}

impl BayesRule {
    pub fn new(l1: IntensityModel, l2: IntensityModel, priors: (f64, f64), window: f64) -> Result<Self> {
        validate_priors(priors)?;
        let s1 = ShapeDecomposition::new(l1, window)?;
        let s2 = ShapeDecomposition::new(l2, window)?;
        let gamma = s1.tau() - s2.tau() + (priors.1 / priors.0).ln();
        Ok(Self {
            shapes: [s1, s2],
            priors,
            window,
            gamma,
        })
    }

    /// The same classes and priors on a different window.
    pub fn with_window(&self, window: f64) -> Result<Self> {
        Self::new(
            self.model(Label::Omega1).clone(),
            self.model(Label::Omega2).clone(),
            self.priors,
            window,
        )
    }

    pub fn model(&self, label: Label) -> &IntensityModel {
        self.shapes[label.index()].model()
    }

    pub fn shape(&self, label: Label) -> &ShapeDecomposition {
        &self.shapes[label.index()]
    }

    pub fn tau(&self, label: Label) -> f64 {
        self.shapes[label.index()].tau()
    }

    pub fn priors(&self) -> (f64, f64) {
        self.priors
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// `γ = τ₁ − τ₂ + log(π₂/π₁)`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `log(π₂/π₁)`.
    pub fn kappa(&self) -> f64 {
        (self.priors.1 / self.priors.0).ln()
    }

    /// `g(t) = log(λ₁(t)/λ₂(t))`, unchecked.
    pub fn log_ratio(&self, t: f64) -> f64 {
        self.model(Label::Omega1).log_rate(t) - self.model(Label::Omega2).log_rate(t)
    }

    fn check_window(&self, x: &SpikeTrain) -> Result<()> {
        if x.window() != self.window {
            return Err(Error::WindowMismatch {
                train: x.window(),
                rule: self.window,
            });
        }
        Ok(())
    }

    /// `Σ g(tᵢ)`, rejecting events where either rate vanishes.
    pub fn log_likelihood_ratio(&self, x: &SpikeTrain) -> Result<f64> {
        self.check_window(x)?;
        let mut sum = 0.0;
        for &t in x.times() {
            let (a, b) = (
                self.model(Label::Omega1).log_rate(t),
                self.model(Label::Omega2).log_rate(t),
            );
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::AssumptionViolation {
                    t,
                    detail: format!("class intensity vanishes at an event (log rates {a}, {b})"),
                });
            }
            sum += a - b;
        }
        Ok(sum)
    }

    /// Log form: ω₁ iff `Σ g(tᵢ) ≥ γ`.
    pub fn decide(&self, x: &SpikeTrain) -> Result<Label> {
        let s = self.log_likelihood_ratio(x)?;
        Ok(if s >= self.gamma { Label::Omega1 } else { Label::Omega2 })
    }

    /// `(W, η)` with `W = Σ log(p₁/p₂)(tᵢ)` and `η = γ + N·log(τ₂/τ₁)`.
    pub fn decision_statistic(&self, x: &SpikeTrain) -> Result<(f64, f64)> {
        self.check_window(x)?;
        let (s1, s2) = (&self.shapes[0], &self.shapes[1]);
        let mut w = 0.0;
        for &t in x.times() {
            let (a, b) = (s1.log_shape(t), s2.log_shape(t));
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::AssumptionViolation {
                    t,
                    detail: format!("class shape vanishes at an event (log shapes {a}, {b})"),
                });
            }
            w += a - b;
        }
        let n = x.count() as f64;
        let eta = s1.tau() - s2.tau() + n * (s2.tau() / s1.tau()).ln() + self.kappa();
        Ok((w, eta))
    }

    /// Shape form: ω₁ iff `W ≥ η`.
    pub fn decide_shape_form(&self, x: &SpikeTrain) -> Result<Label> {
        let (w, eta) = self.decision_statistic(x)?;
        Ok(if w >= eta { Label::Omega1 } else { Label::Omega2 })
    }

    /// Likelihood ratio `Π λ₁/λ₂ · exp(−∫(λ₁ − λ₂))`, computed as the
    /// exponential of its clamped logarithm.
    pub fn likelihood_ratio(&self, x: &SpikeTrain) -> Result<f64> {
        let log = self.log_likelihood_ratio(x)? - (self.tau(Label::Omega1) - self.tau(Label::Omega2));
        Ok(log.clamp(-PRODUCT_LOG_CLAMP, PRODUCT_LOG_CLAMP).exp())
    }

    /// Product form: ω₁ iff the likelihood ratio is `≥ π₂/π₁`.
    pub fn decide_product_form(&self, x: &SpikeTrain) -> Result<Label> {
        let r = self.likelihood_ratio(x)?;
        Ok(if r >= self.priors.1 / self.priors.0 {
            Label::Omega1
        } else {
            Label::Omega2
        })
    }

    /// `∫₀ᵀ g·λ_class`.
    pub fn drift(&self, class: Label) -> f64 {
        let m = self.model(class);
        quad::integrate_panels(
            |t| self.log_ratio(t) * m.rate(t),
            0.0,
            self.window,
            panel_count(0.0, self.window),
        )
    }

    /// `Var U_T = ∫₀ᵀ g²·λ_class`.
    pub fn martingale_variance(&self, class: Label) -> f64 {
        let m = self.model(class);
        quad::integrate_panels(
            |t| {
                let g = self.log_ratio(t);
                g * g * m.rate(t)
            },
            0.0,
            self.window,
            panel_count(0.0, self.window),
        )
    }

    /// Threshold `α_T` for trains from `class`:
    /// `τ₁ − τ₂ + log(τ₂/τ₁)·τ_class + ∫ log(p₂/p₁)·λ_class`.
    pub fn alpha(&self, class: Label) -> f64 {
        let (s1, s2) = (&self.shapes[0], &self.shapes[1]);
        let m = self.model(class);
        let cross = quad::integrate_panels(
            |t| (s2.log_shape(t) - s1.log_shape(t)) * m.rate(t),
            0.0,
            self.window,
            panel_count(0.0, self.window),
        );
        s1.tau() - s2.tau() + (s2.tau() / s1.tau()).ln() * self.tau(class) + cross
    }

    /// `U_T = Σ g(tᵢ) − ∫₀ᵀ g·λ_class` for a given drift.
    pub fn martingale_term(&self, x: &SpikeTrain, drift: f64) -> Result<f64> {
        Ok(self.log_likelihood_ratio(x)? - drift)
    }
}

/// Per-class part of [`TheoreticalRiskReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassTheory {
    /// Threshold `α_T`.
    pub alpha: f64,
    /// Sandwich interval for `α_T`; absent when the KL divergence is undefined.
    pub alpha_interval: Option<(f64, f64)>,
    /// Whether `α_T` lies in its interval (within 1e-8 relative).
    pub alpha_in_interval: Option<bool>,
    /// `Var U_T = ∫ g²λ_class`.
    pub variance: f64,
    /// `θ_T = Var U_T / T`.
    pub theta: f64,
    /// `ε_T = (α_T + κ)/T`.
    pub epsilon: f64,
    /// Chebyshev constant `θ_T/ε_T²` (`a_T` for ω₁, `b_T` for ω₂).
    pub chebyshev_constant: Option<f64>,
    /// Exponential constant `ε_T²/(2θ_T + u|ε_T|)` (`A_T` / `B_T`).
    pub exponential_constant: Option<f64>,
}

/// Deterministic risk theory for one [`BayesRule`].
#[derive(Debug, Clone, PartialEq)]
pub struct TheoreticalRiskReport {
    pub window: f64,
    pub priors: (f64, f64),
    pub tau: (f64, f64),
    pub a1_holds: bool,
    /// `u = log(C/δ)`; absent when A1 fails.
    pub u: Option<f64>,
    /// Caller-supplied linear-growth constant.
    pub d: f64,
    pub classes: [ClassTheory; 2],
    /// `(1/d)·(log(C/δ)/log(δ/C))²`.
    pub c1: Option<f64>,
    /// `(d/3)·(log(δ/C)/log(C/δ))²`.
    pub c2: Option<f64>,
    /// `(π₁a_T + π₂b_T)/T`.
    pub chebyshev_bound: Option<f64>,
    /// `π₁e^{−A_T T} + π₂e^{−B_T T}`.
    pub exponential_bound: Option<f64>,
    pub bhattacharyya_exponent: f64,
    pub bhattacharyya_bound: f64,
}

impl TheoreticalRiskReport {
    pub fn class(&self, label: Label) -> &ClassTheory {
        &self.classes[label.index()]
    }

    /// Long-format rows `(T, quantity, value, class, seed)`.
    pub fn rows(&self, seed: Option<u64>) -> Vec<QuantityRow> {
        let t = self.window;
        let row = |q: &str, v: f64, c: Option<Label>| QuantityRow {
            t,
            quantity: q.to_string(),
            value: v,
            class: c,
            seed,
        };
        let mut out = vec![
            row("tau", self.tau.0, Some(Label::Omega1)),
            row("tau", self.tau.1, Some(Label::Omega2)),
        ];
        for label in Label::BOTH {
            let c = self.class(label);
            out.push(row("alpha", c.alpha, Some(label)));
            if let Some((lo, hi)) = c.alpha_interval {
                out.push(row("alpha_lower", lo, Some(label)));
                out.push(row("alpha_upper", hi, Some(label)));
            }
            out.push(row("variance", c.variance, Some(label)));
            out.push(row("theta", c.theta, Some(label)));
            out.push(row("epsilon", c.epsilon, Some(label)));
            if let Some(v) = c.chebyshev_constant {
                out.push(row("chebyshev_constant", v, Some(label)));
            }
            if let Some(v) = c.exponential_constant {
                out.push(row("exponential_constant", v, Some(label)));
            }
        }
        let optional = [
            ("u", self.u),
            ("c1", self.c1),
            ("c2", self.c2),
            ("chebyshev_bound", self.chebyshev_bound),
            ("exponential_bound", self.exponential_bound),
        ];
        out.push(row("d", self.d, None));
        for (q, v) in optional {
            if let Some(v) = v {
                out.push(row(q, v, None));
            }
        }
        out.push(row("bhattacharyya_exponent", self.bhattacharyya_exponent, None));
        out.push(row("bhattacharyya_bound", self.bhattacharyya_bound, None));
        out
    }
}

fn kl_or_none(p: &ShapeDecomposition, q: &ShapeDecomposition) -> Option<f64> {
    kl_divergence(p, q).ok()
}

/// Evaluate thresholds, variances and bounds for `rule`.
///
/// `bounds` supplies `(δ, C)` covering both intensities; bound fields are
/// `None` when `δ` is not positive or when `ε_T = 0`.
pub fn theoretical_report(rule: &BayesRule, bounds: &IntensityBounds, d: f64) -> Result<TheoreticalRiskReport> {
    let window = rule.window;
    let (t1, t2) = (rule.tau(Label::Omega1), rule.tau(Label::Omega2));
    let a1 = bounds.a1_holds();
    let u = a1.then(|| bounds.log_span());
    let kappa = rule.kappa();
    let (s1, s2) = (rule.shape(Label::Omega1), rule.shape(Label::Omega2));

    let class_theory = |label: Label| -> ClassTheory {
        let alpha = rule.alpha(label);
        let alpha_interval = match label {
            Label::Omega1 => kl_or_none(s1, s2).map(|k| (-(t1 - t2).powi(2) / t2 - t1 * k, -t1 * k)),
            Label::Omega2 => kl_or_none(s2, s1).map(|k| (t2 * k, (t1 - t2).powi(2) / t1 + t2 * k)),
        };
        let alpha_in_interval = alpha_interval.map(|(lo, hi)| {
            let tol = 1e-8 * alpha.abs().max(1.0);
            lo - tol <= alpha && alpha <= hi + tol
        });
        let variance = rule.martingale_variance(label);
        let theta = variance / window;
        let epsilon = (alpha + kappa) / window;
        let usable = a1 && epsilon != 0.0;
        ClassTheory {
            alpha,
            alpha_interval,
            alpha_in_interval,
            variance,
            theta,
            epsilon,
            chebyshev_constant: usable.then(|| theta / (epsilon * epsilon)),
            exponential_constant: match u {
                Some(u) if usable => Some(epsilon * epsilon / (2.0 * theta + u * epsilon.abs())),
                _ => None,
            },
        }
    };
    let classes = [class_theory(Label::Omega1), class_theory(Label::Omega2)];

    // A bound on a class's error only applies when its ε_T points away from
    // that class (ω₁ errs when U_T < α_T + κ, which needs ε_T < 0).
    let oriented = classes[0].epsilon < 0.0 && classes[1].epsilon > 0.0;
    let (p1, p2) = rule.priors;
    let chebyshev_bound = match (classes[0].chebyshev_constant, classes[1].chebyshev_constant) {
        (Some(a), Some(b)) if oriented => Some((p1 * a + p2 * b) / window),
        _ => None,
    };
    let exponential_bound = match (classes[0].exponential_constant, classes[1].exponential_constant) {
        (Some(a), Some(b)) if oriented => Some(p1 * (-a * window).exp() + p2 * (-b * window).exp()),
        _ => None,
    };

    let (c1, c2) = match u {
        Some(_) if bounds.c > bounds.delta => {
            let up = (bounds.c / bounds.delta).ln();
            let down = (bounds.delta / bounds.c).ln();
            (Some((up / down).powi(2) / d), Some(d / 3.0 * (down / up).powi(2)))
        }
        _ => (None, None),
    };

    let beta = bhattacharyya_exponent(rule.model(Label::Omega1), rule.model(Label::Omega2), window)?;
    Ok(TheoreticalRiskReport {
        window,
        priors: rule.priors,
        tau: (t1, t2),
        a1_holds: a1,
        u,
        d,
        classes,
        c1,
        c2,
        chebyshev_bound,
        exponential_bound,
        bhattacharyya_exponent: beta,
        bhattacharyya_bound: bhattacharyya_bound(rule.priors, beta),
    })
}

/// Bounds covering both class intensities on the rule's window.
pub fn rule_bounds(rule: &BayesRule) -> Result<IntensityBounds> {
    let b1 = verify_bounds(rule.model(Label::Omega1), rule.window, DEFAULT_BOUNDS_GRID)?;
    let b2 = verify_bounds(rule.model(Label::Omega2), rule.window, DEFAULT_BOUNDS_GRID)?;
    Ok(b1.union(&b2))
}

/// Monte Carlo misclassification estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub mean: f64,
    pub std_error: f64,
    pub runs: usize,
    pub n_test: usize,
    pub seed: u64,
    pub per_run: Vec<f64>,
}

impl RiskReport {
    /// Aggregate per-run error fractions. With one run the binomial
    /// standard error of that run is reported.
    pub fn from_runs(per_run: Vec<f64>, n_test: usize, seed: u64) -> Self {
        let runs = per_run.len();
        let mean = per_run.iter().sum::<f64>() / runs as f64;
        let std_error = if runs > 1 {
            let var = per_run.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
            (var / runs as f64).sqrt()
        } else {
            (mean * (1.0 - mean) / n_test as f64).sqrt()
        };
        Self {
            mean,
            std_error,
            runs,
            n_test,
            seed,
            per_run,
        }
    }
}

pub(crate) fn check_mc_sizes(n_test: usize, runs: usize) -> Result<()> {
    if n_test == 0 || runs == 0 {
        return Err(Error::invalid(format!(
            "n_test = {n_test} and runs = {runs} must both be at least 1"
        )));
    }
    Ok(())
}

/// Test-set seed for run `run` under `master`.
pub fn test_seed(master: u64, run: usize) -> u64 {
    rng::derive_seed(master, &[Purpose::Test as u64, run as u64])
}

/// Estimate the Bayes risk from `runs` independent test sets of `n_test`.
pub fn estimate_bayes_risk(rule: &BayesRule, n_test: usize, runs: usize, seed: u64) -> Result<RiskReport> {
    check_mc_sizes(n_test, runs)?;
    let source = LabeledSource::new(
        rule.model(Label::Omega1),
        rule.model(Label::Omega2),
        rule.priors,
        rule.window,
    )?;
    let mut per_run = Vec::with_capacity(runs);
    for run in 0..runs {
        let s = test_seed(seed, run);
        let errors = (0..n_test as u64)
            .into_par_iter()
            .map(|i| {
                let sample = source.draw(&mut rng::stream(s, i));
                Ok(usize::from(rule.decide(&sample.train)? != sample.label))
            })
            .collect::<Result<Vec<usize>>>()?
            .into_iter()
            .sum::<usize>();
        per_run.push(errors as f64 / n_test as f64);
    }
    Ok(RiskReport::from_runs(per_run, n_test, seed))
}

/// One row of [`lln_diagnostic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlnRow {
    pub window: f64,
    pub epsilon: f64,
    /// Monte Carlo mean of `|U_T/T|`.
    pub mean_abs: f64,
    /// Fraction of replicates with `|U_T/T| ≥ ε`.
    pub tail_frequency: f64,
    /// `2·exp(−Tε²/(2θ_T + uε))`.
    pub tail_bound: f64,
    pub replicates: usize,
}

/// Law-of-large-numbers diagnostic for `U_T/T` under trains from `class`.
///
/// `epsilon = None` uses, at each `T`, the midpoint of the two classes'
/// `|ε_T|`.
pub fn lln_diagnostic(
    rule: &BayesRule,
    class: Label,
    t_grid: &[f64],
    replicates: usize,
    seed: u64,
    epsilon: Option<f64>,
) -> Result<Vec<LlnRow>> {
    if t_grid.is_empty() || replicates == 0 {
        return Err(Error::invalid(
            "lln_diagnostic needs a nonempty T grid and at least one replicate",
        ));
    }
    let mut rows = Vec::with_capacity(t_grid.len());
    for (k, &window) in t_grid.iter().enumerate() {
        let r = rule.with_window(window)?;
        let bounds = rule_bounds(&r)?;
        let variance = r.martingale_variance(class);
        let theta = variance / window;
        let eps = match epsilon {
            Some(e) => e,
            None => {
                let e1 = ((r.alpha(Label::Omega1) + r.kappa()) / window).abs();
                let e2 = ((r.alpha(Label::Omega2) + r.kappa()) / window).abs();
                0.5 * (e1 + e2)
            }
        };
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!(
                "lln_diagnostic threshold ε = {eps} must be positive"
            )));
        }
        let u = if bounds.a1_holds() {
            bounds.log_span()
        } else {
            f64::INFINITY
        };
        // Zero variance means g = 0 wherever events occur, so U_T ≡ 0.
        let tail_bound = if variance == 0.0 {
            0.0
        } else {
            (2.0 * (-window * eps * eps / (2.0 * theta + u * eps)).exp()).min(2.0)
        };

        let drift = r.drift(class);
        let sampler = LabeledSource::new(r.model(Label::Omega1), r.model(Label::Omega2), r.priors, window)?;
        let sampler = sampler.sampler(class);
        let s = rng::derive_seed(seed, &[Purpose::Replicate as u64, class.index() as u64, k as u64]);
        let values = (0..replicates as u64)
            .into_par_iter()
            .map(|i| {
                let x = sampler.sample(&mut rng::stream(s, i));
                Ok((r.martingale_term(&x, drift)? / window).abs())
            })
            .collect::<Result<Vec<f64>>>()?;
        let n = values.len() as f64;
        rows.push(LlnRow {
            window,
            epsilon: eps,
            mean_abs: values.iter().sum::<f64>() / n,
            tail_frequency: values.iter().filter(|&&v| v >= eps).count() as f64 / n,
            tail_bound,
            replicates,
        });
    }
    Ok(rows)
}

/// Long-format quantity row `(T, quantity, value, class, seed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantityRow {
    pub t: f64,
    pub quantity: String,
    pub value: f64,
    pub class: Option<Label>,
    pub seed: Option<u64>,
}

impl QuantityRow {
    pub fn from_risk(window: f64, name: &str, report: &RiskReport) -> Vec<QuantityRow> {
        let row = |q: String, v: f64| QuantityRow {
            t: window,
            quantity: q,
            value: v,
            class: None,
            seed: Some(report.seed),
        };
        vec![
            row(name.to_string(), report.mean),
            row(format!("{name}_std_error"), report.std_error),
            row("runs".into(), report.runs as f64),
            row("n_test".into(), report.n_test as f64),
        ]
    }

    pub fn from_lln(class: Label, seed: u64, rows: &[LlnRow]) -> Vec<QuantityRow> {
        rows.iter()
            .flat_map(|r| {
                [
                    ("epsilon", r.epsilon),
                    ("mean_abs_u_over_t", r.mean_abs),
                    ("tail_frequency", r.tail_frequency),
                    ("tail_bound", r.tail_bound),
                ]
                .map(|(q, v)| QuantityRow {
                    t: r.window,
                    quantity: q.into(),
                    value: v,
                    class: Some(class),
                    seed: Some(seed),
                })
            })
            .collect()
    }
}

/// Write rows with header `T,quantity,value,class,seed`.
pub fn write_quantity_csv(path: &Path, rows: &[QuantityRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["T", "quantity", "value", "class", "seed"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.quantity.clone(),
            r.value.to_string(),
            r.class.map(|c| c.to_string()).unwrap_or_default(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::kl_variation;
    use crate::simulate::sample_poisson;
    use std::f64::consts::PI;

    fn hom(r: f64) -> IntensityModel {
        IntensityModel::homogeneous(r).unwrap()
    }

    fn train(times: Vec<f64>, window: f64) -> SpikeTrain {
        SpikeTrain::new(times, window).unwrap()
    }

    #[test]
    fn homogeneous_threshold_on_count() {
        let rule = BayesRule::new(hom(2.0), hom(1.0), (0.5, 0.5), 5.0).unwrap();
        let x7 = train((1..=7).map(|i| i as f64 * 0.5).collect(), 5.0);
        let x8 = train((1..=8).map(|i| i as f64 * 0.5).collect(), 5.0);
        assert!((rule.log_likelihood_ratio(&x7).unwrap() - 7.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(rule.decide(&x7).unwrap(), Label::Omega2);
        assert_eq!(rule.decide(&x8).unwrap(), Label::Omega1);
    }

    #[test]
    fn identical_classes_tie_to_first() {
        let g = IntensityModel::harmonic(PI / 16.0).unwrap();
        let rule = BayesRule::new(g.clone(), g.clone(), (0.5, 0.5), 10.0).unwrap();
        for seed in 0..20 {
            let x = sample_poisson(&g, 10.0, seed).unwrap();
            assert_eq!(rule.log_likelihood_ratio(&x).unwrap(), 0.0);
            assert_eq!(rule.decide(&x).unwrap(), Label::Omega1);
        }
    }

    #[test]
    fn empty_train_favors_sparser_class() {
        let rule = BayesRule::new(hom(1.0), hom(2.0), (0.5, 0.5), 3.0).unwrap();
        let x = SpikeTrain::empty(3.0).unwrap();
        assert_eq!(rule.decide(&x).unwrap(), Label::Omega1);
        assert_eq!(rule.decide_shape_form(&x).unwrap(), Label::Omega1);
        assert_eq!(rule.decide_product_form(&x).unwrap(), Label::Omega1);
    }

    #[test]
    fn window_mismatch_and_vanishing_rate_rejected() {
        let rule = BayesRule::new(hom(1.0), hom(2.0), (0.5, 0.5), 3.0).unwrap();
        let x = train(vec![1.0], 4.0);
        assert!(matches!(rule.decide(&x), Err(Error::WindowMismatch { .. })));

        let silent = crate::intensity::Tabulated::new(vec![(0.0, 1.0), (2.0, 1.0), (2.5, 0.0), (3.0, 0.0)]).unwrap();
        let rule = BayesRule::new(hom(1.0), IntensityModel::Tabulated(silent), (0.5, 0.5), 3.0).unwrap();
        let far = train(vec![2.9], 3.0);
        assert!(matches!(rule.decide(&far), Err(Error::AssumptionViolation { .. })));
    }

    #[test]
    fn scaled_pair_has_zero_shape_statistic() {
        let base = IntensityModel::harmonic(PI / 8.0).unwrap();
        let rule = BayesRule::new(
            base.clone(),
            IntensityModel::scaled(base.clone(), 4.0).unwrap(),
            (0.5, 0.5),
            10.0,
        )
        .unwrap();
        let x = sample_poisson(&base, 10.0, 3).unwrap();
        let (w, _) = rule.decision_statistic(&x).unwrap();
        assert!(w.abs() < 1e-12);
    }

    #[test]
    fn example_one_variance_and_limits() {
        let l1 = hom(2.0);
        let rule = BayesRule::new(l1.clone(), IntensityModel::scaled(l1, 4.0).unwrap(), (0.5, 0.5), 10.0).unwrap();
        let v1 = rule.martingale_variance(Label::Omega1);
        let v2 = rule.martingale_variance(Label::Omega2);
        let l4 = 4f64.ln().powi(2);
        assert!((v1 - 20.0 * l4).abs() < 1e-8);
        assert!((v2 - 80.0 * l4).abs() < 1e-8);
        assert!((v1 / 10.0 - 3.8436).abs() < 1e-4);
    }

    #[test]
    fn identical_classes_report() {
        let g = IntensityModel::harmonic(PI / 4.0).unwrap();
        let rule = BayesRule::new(g.clone(), g, (0.5, 0.5), 10.0).unwrap();
        let rep = theoretical_report(&rule, &rule_bounds(&rule).unwrap(), 1.6).unwrap();
        for c in &rep.classes {
            assert!(c.alpha.abs() < 1e-12);
            assert_eq!(c.variance, 0.0);
            assert!(c.chebyshev_constant.is_none());
        }
        assert!((rep.bhattacharyya_bound - 0.5).abs() < 1e-15);
    }

    #[test]
    fn alpha_matches_kl_forms() {
        let rule = BayesRule::new(
            IntensityModel::harmonic(PI / 16.0).unwrap(),
            IntensityModel::harmonic(PI / 4.0).unwrap(),
            (0.4, 0.6),
            10.0,
        )
        .unwrap();
        let (s1, s2) = (rule.shape(Label::Omega1), rule.shape(Label::Omega2));
        let (t1, t2) = (s1.tau(), s2.tau());
        let k12 = kl_divergence(s1, s2).unwrap();
        let k21 = kl_divergence(s2, s1).unwrap();
        let a1 = t1 - t2 + t1 * (t2 / t1).ln() - t1 * k12;
        let a2 = t1 - t2 + t2 * (t2 / t1).ln() + t2 * k21;
        assert!((rule.alpha(Label::Omega1) - a1).abs() < 1e-8);
        assert!((rule.alpha(Label::Omega2) - a2).abs() < 1e-8);

        // Var U_T = τ₁[V + 2 log(τ₁/τ₂) K + log²(τ₁/τ₂)] for class ω₁.
        let v12 = kl_variation(s1, s2).unwrap();
        let r = (t1 / t2).ln();
        let oracle = t1 * (v12 + 2.0 * r * k12 + r * r);
        assert!((rule.martingale_variance(Label::Omega1) - oracle).abs() < 1e-7);

        let rep = theoretical_report(&rule, &rule_bounds(&rule).unwrap(), 1.6).unwrap();
        assert_eq!(rep.class(Label::Omega1).alpha_in_interval, Some(true));
        assert_eq!(rep.class(Label::Omega2).alpha_in_interval, Some(true));
    }

    #[test]
    fn asymptotic_constants_unsimplified() {
        let rule = BayesRule::new(hom(2.0), hom(8.0), (0.5, 0.5), 10.0).unwrap();
        let bounds = IntensityBounds {
            delta: 0.1,
            c: 3.1,
            d_hat: 1.6,
        };
        let rep = theoretical_report(&rule, &bounds, 1.6).unwrap();
        assert!((rep.c2.unwrap() - 1.6 / 3.0).abs() < 1e-12);
        assert!((rep.c1.unwrap() - 1.0 / 1.6).abs() < 1e-12);
    }

    #[test]
    fn bump_report_marks_bounds_unavailable() {
        let rule = BayesRule::new(
            IntensityModel::gaussian_bump(300.0, 20.0).unwrap(),
            IntensityModel::gaussian_bump(600.0, 40.0).unwrap(),
            (0.5, 0.5),
            2.0,
        )
        .unwrap();
        let bounds = rule_bounds(&rule).unwrap();
        assert!(!bounds.a1_holds());
        let rep = theoretical_report(&rule, &bounds, bounds.d_hat).unwrap();
        assert!(rep.chebyshev_bound.is_none() && rep.exponential_bound.is_none());
        assert!(rep.class(Label::Omega1).alpha_interval.is_none());
    }

    #[test]
    fn degenerate_risk_is_half() {
        let g = hom(1.5);
        let rule = BayesRule::new(g.clone(), g, (0.5, 0.5), 4.0).unwrap();
        let rep = estimate_bayes_risk(&rule, 4000, 3, 11).unwrap();
        assert!((rep.mean - 0.5).abs() < 4.0 * rep.std_error.max(0.5 / (12000f64).sqrt()));
    }

    #[test]
    fn lln_identical_classes_is_zero() {
        let g = IntensityModel::harmonic(0.3).unwrap();
        let rule = BayesRule::new(g.clone(), g, (0.5, 0.5), 5.0).unwrap();
        let rows = lln_diagnostic(&rule, Label::Omega1, &[5.0, 20.0], 200, 1, Some(0.1)).unwrap();
        for r in rows {
            assert_eq!((r.mean_abs, r.tail_frequency, r.tail_bound), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn quantity_csv_has_schema() {
        let rule = BayesRule::new(hom(1.0), hom(2.0), (0.5, 0.5), 3.0).unwrap();
        let rep = theoretical_report(&rule, &rule_bounds(&rule).unwrap(), 1.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_quantity_csv(&path, &rep.rows(Some(9))).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("T,quantity,value,class,seed\n"));
        assert!(text.contains("3,alpha,"));
    }
}
