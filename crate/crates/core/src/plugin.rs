//! The empirical plug-in rule and its Monte Carlo risk, paired with the
//! Bayes rule on the same test draws.
//!
//! A train is assigned to ω₁ iff
//! `Σ log(p̂₁/p̂₂)(tᵢ) ≥ τ̂₁ − τ̂₂ + N·log(τ̂₂/τ̂₁) + log(L₂/L₁)`,
//! with both densities clipped below at [`DENSITY_CLIP`].

use std::path::Path;

use rayon::prelude::*;

use crate::bayes::{check_mc_sizes, test_seed, BayesRule, RiskReport};
use crate::error::{Error, Result};
use crate::intensity::{IntensityModel, ShapeDecomposition};
use crate::kernel::{fit, select_bandwidth_cv, ClassEstimate, KernelFamily, KernelShapeEstimate, TabulatedShape};
use crate::rng::{self, Purpose};
use crate::simulate::{generate_from_source, validate_priors, Label, LabeledSource, SpikeTrain, TrainingSet};

/// Lower clip for shape densities inside the log-ratio.
pub const DENSITY_CLIP: f64 = 1e-12;

/// Training sets drawn before giving up on getting two samples per class.
pub const MAX_TRAINING_DRAWS: u64 = 1000;

/// Anything that can be evaluated as a shape density on the window.
pub trait ShapeDensity: Sync {
    fn density(&self, t: f64) -> f64;
}

impl ShapeDensity for ClassEstimate {
    fn density(&self, t: f64) -> f64 {
        self.shape_density(t)
    }
}

impl ShapeDensity for TabulatedShape {
    fn density(&self, t: f64) -> f64 {
        self.shape_density(t)
    }
}

impl ShapeDensity for ShapeDecomposition {
    fn density(&self, t: f64) -> f64 {
        self.shape(t)
    }
}

/// Plug-in rule over any pair of shape densities.
#[derive(Debug, Clone)]
pub struct PluginClassifier<S> {
    shapes: [S; 2],
    tau: (f64, f64),
    priors: (f64, f64),
    window: f64,
}

impl<S: ShapeDensity> PluginClassifier<S> {
    pub fn new(shapes: [S; 2], tau: (f64, f64), priors: (f64, f64), window: f64) -> Result<Self> {
        if !(tau.0 > 0.0 && tau.1 > 0.0 && tau.0.is_finite() && tau.1.is_finite()) {
            return Err(Error::DegenerateClass(format!(
                "intensity factors ({}, {}) must both be positive",
                tau.0, tau.1
            )));
        }
        validate_priors(priors)?;
        Ok(Self {
            shapes,
            tau,
            priors,
            window,
        })
    }

    pub fn tau(&self) -> (f64, f64) {
        self.tau
    }

    pub fn priors(&self) -> (f64, f64) {
        self.priors
    }

    pub fn shapes(&self) -> &[S; 2] {
        &self.shapes
    }

    /// `(Ŵ, η̂)`.
    pub fn statistic(&self, x: &SpikeTrain) -> Result<(f64, f64)> {
        if x.window() != self.window {
            return Err(Error::WindowMismatch {
                train: x.window(),
                rule: self.window,
            });
        }
        let w: f64 = x
            .times()
            .iter()
            .map(|&t| {
                let a = self.shapes[0].density(t).max(DENSITY_CLIP);
                let b = self.shapes[1].density(t).max(DENSITY_CLIP);
                a.ln() - b.ln()
            })
            .sum();
        let (t1, t2) = self.tau;
        let n = x.count() as f64;
        let eta = t1 - t2 + n * (t2 / t1).ln() + (self.priors.1 / self.priors.0).ln();
        Ok((w, eta))
    }

    /// ω₁ iff `Ŵ ≥ η̂`.
    pub fn classify(&self, x: &SpikeTrain) -> Result<Label> {
        let (w, eta) = self.statistic(x)?;
        Ok(if w >= eta { Label::Omega1 } else { Label::Omega2 })
    }
}

fn empirical_priors(est: &KernelShapeEstimate) -> (f64, f64) {
    let (l1, l2) = (est.classes[0].trains() as f64, est.classes[1].trains() as f64);
    (l1 / (l1 + l2), l2 / (l1 + l2))
}

impl PluginClassifier<ClassEstimate> {
    /// Plug-in rule with priors `L₁/L`, `L₂/L`.
    pub fn from_estimate(est: &KernelShapeEstimate) -> Result<Self> {
        let [c1, c2] = est.classes.clone();
        let tau = (c1.tau_hat(), c2.tau_hat());
        Self::new([c1, c2], tau, empirical_priors(est), est.window)
    }
}

impl PluginClassifier<TabulatedShape> {
    /// As [`PluginClassifier::from_estimate`], with interpolated densities.
    pub fn from_estimate_tabulated(est: &KernelShapeEstimate) -> Result<Self> {
        let tau = (est.classes[0].tau_hat(), est.classes[1].tau_hat());
        let shapes = [est.classes[0].tabulate(), est.classes[1].tabulate()];
        Self::new(shapes, tau, empirical_priors(est), est.window)
    }
}

impl PluginClassifier<ShapeDecomposition> {
    /// The rule with true shapes, factors and priors substituted.
    pub fn from_truth(rule: &BayesRule) -> Result<Self> {
        let shapes = [rule.shape(Label::Omega1).clone(), rule.shape(Label::Omega2).clone()];
        Self::new(
            shapes,
            (rule.tau(Label::Omega1), rule.tau(Label::Omega2)),
            rule.priors(),
            rule.window(),
        )
    }
}

/// Inputs of [`estimate_plugin_risk`].
#[derive(Debug, Clone)]
pub struct PluginRiskSetup {
    pub lambda1: IntensityModel,
    pub lambda2: IntensityModel,
    pub priors: (f64, f64),
    /// Training set size `L`.
    pub l_train: usize,
    pub window: f64,
    pub family: KernelFamily,
    pub bandwidth_grid: Vec<f64>,
    pub folds: usize,
    pub n_test: usize,
    pub runs: usize,
    pub seed: u64,
}

/// One run of [`estimate_plugin_risk`].
#[derive(Debug, Clone, PartialEq)]
pub struct PluginRun {
    pub run: usize,
    pub plugin_risk: f64,
    pub bayes_risk: f64,
    /// Fraction of test trains on which both rules agree.
    pub agreement: f64,
    pub bandwidths: (f64, f64),
    pub boundary: (bool, bool),
    pub class_counts: (usize, usize),
    /// Training sets discarded for having a class with fewer than 2 samples.
    pub redraws: u64,
}

/// Paired plug-in and Bayes risk estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct PluginRiskReport {
    pub window: f64,
    pub l_train: usize,
    pub plugin: RiskReport,
    pub bayes: RiskReport,
    pub runs: Vec<PluginRun>,
}

impl PluginRiskReport {
    pub fn mean_agreement(&self) -> f64 {
        self.runs.iter().map(|r| r.agreement).sum::<f64>() / self.runs.len() as f64
    }

    pub fn mean_bandwidths(&self) -> (f64, f64) {
        let n = self.runs.len() as f64;
        (
            self.runs.iter().map(|r| r.bandwidths.0).sum::<f64>() / n,
            self.runs.iter().map(|r| r.bandwidths.1).sum::<f64>() / n,
        )
    }

    /// Mean of per-run `plugin − bayes` and its standard error.
    pub fn excess_risk(&self) -> (f64, f64) {
        let d: Vec<f64> = self.runs.iter().map(|r| r.plugin_risk - r.bayes_risk).collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let se = if d.len() > 1 {
            (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        (mean, se)
    }
}

/// Training set for `run`, redrawn until both classes have two samples.
pub fn training_set_for_run(
    source: &LabeledSource,
    l_train: usize,
    master: u64,
    run: usize,
) -> Result<(TrainingSet, u64)> {
    for attempt in 0..MAX_TRAINING_DRAWS {
        let seed = rng::derive_seed(master, &[Purpose::Training as u64, run as u64, attempt]);
        let set = generate_from_source(source, l_train, seed)?;
        if Label::BOTH.iter().all(|&c| set.class_count(c) >= 2) {
            return Ok((set, attempt));
        }
    }
    Err(Error::DegenerateClass(format!(
        "no training set of size {l_train} with two samples per class after {MAX_TRAINING_DRAWS} draws"
    )))
}

/// Fit a plug-in rule for `run`: CV bandwidth per class, then aggregate.
pub fn fit_run(
    set: &TrainingSet,
    family: KernelFamily,
    grid: &[f64],
    folds: usize,
    master: u64,
    run: usize,
) -> Result<(KernelShapeEstimate, [crate::kernel::CvSelection; 2])> {
    let cv_seed = rng::derive_seed(master, &[Purpose::CrossValidation as u64, run as u64]);
    let select = |c: Label| select_bandwidth_cv(set, c, family, grid, folds.min(set.class_count(c)), cv_seed);
    let s1 = select(Label::Omega1)?;
    let s2 = select(Label::Omega2)?;
    let est = fit(set, family, (s1.bandwidth, s2.bandwidth))?;
    Ok((est, [s1, s2]))
}

/// Monte Carlo plug-in risk with the Bayes risk on the same test trains.
///
/// Seeds depend on the master seed and run index only, so different
/// windows or training sizes share random numbers.
pub fn estimate_plugin_risk(setup: &PluginRiskSetup) -> Result<PluginRiskReport> {
    check_mc_sizes(setup.n_test, setup.runs)?;
    if setup.l_train < 4 {
        return Err(Error::invalid(format!(
            "training set size L = {} is too small for two samples per class",
            setup.l_train
        )));
    }
    let source = LabeledSource::new(&setup.lambda1, &setup.lambda2, setup.priors, setup.window)?;
    let bayes = BayesRule::new(setup.lambda1.clone(), setup.lambda2.clone(), setup.priors, setup.window)?;

    let mut runs = Vec::with_capacity(setup.runs);
    for run in 0..setup.runs {
        let (set, redraws) = training_set_for_run(&source, setup.l_train, setup.seed, run)?;
        let (est, sel) = fit_run(&set, setup.family, &setup.bandwidth_grid, setup.folds, setup.seed, run)?;
        let plugin = PluginClassifier::from_estimate_tabulated(&est)?;
        let s = test_seed(setup.seed, run);
        let outcomes = (0..setup.n_test as u64)
            .into_par_iter()
            .map(|i| {
                let sample = source.draw(&mut rng::stream(s, i));
                let p = plugin.classify(&sample.train)?;
                let b = bayes.decide(&sample.train)?;
                Ok((p != sample.label, b != sample.label, p == b))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = setup.n_test as f64;
        let count = |f: fn(&(bool, bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / n;
        runs.push(PluginRun {
            run,
            plugin_risk: count(|o| o.0),
            bayes_risk: count(|o| o.1),
            agreement: count(|o| o.2),
            bandwidths: (sel[0].bandwidth, sel[1].bandwidth),
            boundary: (sel[0].at_boundary, sel[1].at_boundary),
            class_counts: (set.class_count(Label::Omega1), set.class_count(Label::Omega2)),
            redraws,
        });
    }
    Ok(PluginRiskReport {
        window: setup.window,
        l_train: setup.l_train,
        plugin: RiskReport::from_runs(runs.iter().map(|r| r.plugin_risk).collect(), setup.n_test, setup.seed),
        bayes: RiskReport::from_runs(runs.iter().map(|r| r.bayes_risk).collect(), setup.n_test, setup.seed),
        runs,
    })
}

/// Rows `(config_id, rule, T, L, run, risk, n_test, seed, h1, h2)`.
pub fn write_risk_csv(path: &Path, config_id: &str, reports: &[PluginRiskReport]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "config_id",
        "rule",
        "T",
        "L",
        "run",
        "risk",
        "n_test",
        "seed",
        "h1",
        "h2",
    ])?;
    for rep in reports {
        for r in &rep.runs {
            let common = |rule: &str, risk: f64, h: (String, String)| {
                [
                    config_id.to_string(),
                    rule.to_string(),
                    rep.window.to_string(),
                    rep.l_train.to_string(),
                    r.run.to_string(),
                    risk.to_string(),
                    rep.plugin.n_test.to_string(),
                    rep.plugin.seed.to_string(),
                    h.0,
                    h.1,
                ]
            };
            w.write_record(common("bayes", r.bayes_risk, (String::new(), String::new())))?;
            w.write_record(common(
                "plugin",
                r.plugin_risk,
                (r.bandwidths.0.to_string(), r.bandwidths.1.to_string()),
            ))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::sample_poisson;
    use std::f64::consts::PI;

    fn harmonic(phi: f64) -> IntensityModel {
        IntensityModel::harmonic(phi).unwrap()
    }

    #[test]
    fn truth_plugin_matches_bayes() {
        let rule = BayesRule::new(harmonic(PI / 16.0), harmonic(PI / 4.0), (0.3, 0.7), 10.0).unwrap();
        let plugin = PluginClassifier::from_truth(&rule).unwrap();
        for seed in 0..500 {
            let m = if seed % 2 == 0 {
                rule.model(Label::Omega1)
            } else {
                rule.model(Label::Omega2)
            };
            let x = sample_poisson(m, 10.0, seed).unwrap();
            assert_eq!(plugin.classify(&x).unwrap(), rule.decide(&x).unwrap());
        }
    }

    #[test]
    fn empty_train_uses_threshold_only() {
        let rule = BayesRule::new(harmonic(0.0), harmonic(1.0), (0.5, 0.5), 10.0).unwrap();
        let plugin = PluginClassifier::from_truth(&rule).unwrap();
        let x = SpikeTrain::empty(10.0).unwrap();
        let (w, eta) = plugin.statistic(&x).unwrap();
        assert_eq!(w, 0.0);
        let (t1, t2) = plugin.tau();
        assert_eq!(eta, t1 - t2);
    }

    #[test]
    fn zero_factor_rejected() {
        let rule = BayesRule::new(harmonic(0.0), harmonic(1.0), (0.5, 0.5), 10.0).unwrap();
        let shapes = [rule.shape(Label::Omega1).clone(), rule.shape(Label::Omega2).clone()];
        assert!(PluginClassifier::new(shapes, (0.0, 1.0), (0.5, 0.5), 10.0).is_err());
    }

    #[test]
    fn small_plugin_run_is_sane_and_deterministic() {
        let setup = PluginRiskSetup {
            lambda1: harmonic(PI / 16.0),
            lambda2: harmonic(PI),
            priors: (0.5, 0.5),
            l_train: 40,
            window: 10.0,
            family: KernelFamily::Gaussian,
            bandwidth_grid: crate::kernel::default_bandwidth_grid(),
            folds: 5,
            n_test: 500,
            runs: 2,
            seed: 13,
        };
        let a = estimate_plugin_risk(&setup).unwrap();
        let b = estimate_plugin_risk(&setup).unwrap();
        assert_eq!(a, b);
        assert!(a.plugin.mean < 0.5 && a.bayes.mean < 0.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("risk.csv");
        write_risk_csv(&path, "cfg", &[a]).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 1 + 4);
    }
}
