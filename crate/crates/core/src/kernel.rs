//! Kernel estimates of intensities and shape densities, their exact mean and
//! variance, and cross-validated bandwidth selection.
//!
//! For one train the intensity estimate is `λ̂(t) = Σ K_h(t − tₗ)` with
//! `K_h(u) = K(u/h)/h`, and the shape estimate is `λ̂/N` (the zero function
//! when `N = 0`). A class estimate averages these over its `Lᵢ` training
//! trains, empty ones included in the count.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intensity::IntensityModel;
use crate::quad;
use crate::rng;
use crate::simulate::{Label, SpikeTrain, TrainingSet};

/// Floor applied to held-out densities before taking logs in CV.
pub const CV_DENSITY_FLOOR: f64 = 1e-300;

/// Gaussian support is truncated at this many bandwidths in quadrature.
const GAUSSIAN_QUAD_RADIUS: f64 = 10.0;

/// Extra bandwidths past the nearest event that a Gaussian sum visits.
const GAUSSIAN_SUM_MARGIN: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `¾(1 − u²)` on `|u| ≤ 1`.
    Epanechnikov,
    /// Standard normal density.
    Gaussian,
}

impl KernelFamily {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            KernelFamily::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            KernelFamily::Gaussian => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
        }
    }

    /// `∫ K²`.
    pub fn square_integral(self) -> f64 {
        match self {
            KernelFamily::Epanechnikov => 0.6,
            KernelFamily::Gaussian => 1.0 / (2.0 * PI.sqrt()),
        }
    }

    /// Support half-width in units of `h`, or `None` if unbounded.
    pub fn support(self) -> Option<f64> {
        match self {
            KernelFamily::Epanechnikov => Some(1.0),
            KernelFamily::Gaussian => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            "gaussian" => Ok(KernelFamily::Gaussian),
            other => Err(Error::invalid(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// A kernel family with a positive bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    h: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid(format!("bandwidth h = {h} must be positive")));
        }
        Ok(Self { family, h })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    /// `K_h(u) = K(u/h)/h`.
    pub fn scaled(&self, u: f64) -> f64 {
        self.family.eval(u / self.h) / self.h
    }

    /// Radius outside which quadrature ignores the kernel.
    fn quad_radius(&self) -> f64 {
        self.family.support().unwrap_or(GAUSSIAN_QUAD_RADIUS) * self.h
    }
}

/// `λ̂(t) = Σₗ K_h(t − tₗ)` for one train.
pub fn single_intensity_estimate(x: &SpikeTrain, k: &KernelSpec, t: f64) -> f64 {
    x.times().iter().map(|&e| k.scaled(t - e)).sum()
}

/// `λ̂(t)/N`, zero for an empty train.
pub fn single_shape_estimate(x: &SpikeTrain, k: &KernelSpec, t: f64) -> f64 {
    if x.count() == 0 {
        0.0
    } else {
        single_intensity_estimate(x, k, t) / x.count() as f64
    }
}

/// Aggregated kernel estimate for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEstimate {
    kernel: KernelSpec,
    /// All training events of the class, sorted.
    events: Vec<f64>,
    /// `1/N_j` for the train each event came from, aligned with `events`.
    weights: Vec<f64>,
    trains: usize,
    tau_hat: f64,
    window: f64,
}

impl ClassEstimate {
    pub fn new<'a, I>(trains: I, kernel: KernelSpec) -> Result<Self>
    where
        I: IntoIterator<Item = &'a SpikeTrain>,
    {
        let mut pooled = Vec::new();
        let mut count = 0usize;
        let mut window = None;
        for x in trains {
            match window {
                None => window = Some(x.window()),
                Some(w) if w != x.window() => return Err(Error::invalid("class trains must share the window")),
                _ => {}
            }
            count += 1;
            let w = 1.0 / x.count().max(1) as f64;
            pooled.extend(x.times().iter().map(|&t| (t, w)));
        }
        let window = window.ok_or_else(|| Error::DegenerateClass("class has no training samples".into()))?;
        pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
        let tau_hat = pooled.len() as f64 / count as f64;
        let (events, weights) = pooled.into_iter().unzip();
        Ok(Self {
            kernel,
            events,
            weights,
            trains: count,
            tau_hat,
            window,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn bandwidth(&self) -> f64 {
        self.kernel.h
    }

    /// `τ̂ᵢ`, the mean event count.
    pub fn tau_hat(&self) -> f64 {
        self.tau_hat
    }

    /// `Lᵢ`.
    pub fn trains(&self) -> usize {
        self.trains
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// Index range of events that contribute at `t`.
    fn active(&self, t: f64) -> std::ops::Range<usize> {
        let radius = match self.kernel.family.support() {
            Some(s) => s * self.kernel.h,
            None => {
                let i = self.events.partition_point(|&e| e < t);
                let left = i.checked_sub(1).map(|j| t - self.events[j]);
                let right = self.events.get(i).map(|&e| e - t);
                let nearest = match (left, right) {
                    (Some(a), Some(b)) => a.min(b),
                    (Some(a), None) => a,
                    (None, Some(b)) => b,
                    (None, None) => return 0..0,
                };
                nearest + GAUSSIAN_SUM_MARGIN * self.kernel.h
            }
        };
        let lo = self.events.partition_point(|&e| e < t - radius);
        let hi = self.events.partition_point(|&e| e <= t + radius);
        lo..hi
    }

    /// `p̂ᵢ(t) = (1/Lᵢ) Σ_j λ̂_j(t)/N_j`.
    pub fn shape_density(&self, t: f64) -> f64 {
        let r = self.active(t);
        let s: f64 = self.events[r.clone()]
            .iter()
            .zip(&self.weights[r])
            .map(|(&e, &w)| w * self.kernel.scaled(t - e))
            .sum();
        s / self.trains as f64
    }

    /// `λ̂ᵢ(t) = (1/Lᵢ) Σ_j λ̂_j(t)`.
    pub fn intensity(&self, t: f64) -> f64 {
        let r = self.active(t);
        let s: f64 = self.events[r].iter().map(|&e| self.kernel.scaled(t - e)).sum();
        s / self.trains as f64
    }

    /// `p̂ᵢ'(t)` for the Gaussian kernel.
    fn gaussian_shape_slope(&self, t: f64) -> f64 {
        let h = self.kernel.h;
        let r = self.active(t);
        let s: f64 = self.events[r.clone()]
            .iter()
            .zip(&self.weights[r])
            .map(|(&e, &w)| {
                let u = t - e;
                -w * u / (h * h) * self.kernel.scaled(u)
            })
            .sum();
        s / self.trains as f64
    }

    /// Lookup-table version of [`ClassEstimate::shape_density`].
    ///
    /// Gaussian estimates are interpolated with cubic Hermite splines on
    /// `log p̂` at spacing `h/16`; cells touching an underflowed node, and all
    /// Epanechnikov estimates, are evaluated exactly.
    pub fn tabulate(&self) -> TabulatedShape {
        if self.kernel.family != KernelFamily::Gaussian {
            return TabulatedShape {
                exact: self.clone(),
                step: 0.0,
                log_p: Vec::new(),
                slope: Vec::new(),
            };
        }
        let cells = ((self.window / (self.kernel.h / 16.0)).ceil() as usize).max(1);
        let step = self.window / cells as f64;
        let (log_p, slope): (Vec<f64>, Vec<f64>) = (0..=cells)
            .into_par_iter()
            .map(|i| {
                let t = if i == cells { self.window } else { i as f64 * step };
                let p = self.shape_density(t);
                (p.ln(), self.gaussian_shape_slope(t) / p)
            })
            .unzip();
        TabulatedShape {
            exact: self.clone(),
            step,
            log_p,
            slope,
        }
    }
}

/// Interpolated shape estimate, see [`ClassEstimate::tabulate`].
#[derive(Debug, Clone)]
pub struct TabulatedShape {
    exact: ClassEstimate,
    step: f64,
    log_p: Vec<f64>,
    slope: Vec<f64>,
}

impl TabulatedShape {
    pub fn estimate(&self) -> &ClassEstimate {
        &self.exact
    }

    pub fn shape_density(&self, t: f64) -> f64 {
        if self.log_p.is_empty() || !(0.0..=self.exact.window).contains(&t) {
            return self.exact.shape_density(t);
        }
        let cells = self.log_p.len() - 1;
        let i = ((t / self.step) as usize).min(cells - 1);
        let (y0, y1) = (self.log_p[i], self.log_p[i + 1]);
        let (d0, d1) = (self.slope[i], self.slope[i + 1]);
        if !(y0.is_finite() && y1.is_finite() && d0.is_finite() && d1.is_finite()) {
            return self.exact.shape_density(t);
        }
        let s = (t - i as f64 * self.step) / self.step;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        (h00 * y0 + h10 * self.step * d0 + h01 * y1 + h11 * self.step * d1).exp()
    }
}

/// Both class estimates from one training set.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelShapeEstimate {
    pub classes: [ClassEstimate; 2],
    pub window: f64,
    pub family: KernelFamily,
}

impl KernelShapeEstimate {
    pub fn class(&self, label: Label) -> &ClassEstimate {
        &self.classes[label.index()]
    }

    /// Rows `(class, t, p_hat, tau_hat, h)` on `grid_points` uniform points.
    pub fn write_csv(&self, path: &Path, grid_points: usize) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["class", "t_grid", "p_hat", "tau_hat", "h"])?;
        let n = grid_points.max(2);
        for label in Label::BOTH {
            let c = self.class(label);
            for i in 0..n {
                let t = self.window * i as f64 / (n - 1) as f64;
                w.write_record([
                    label.to_string(),
                    t.to_string(),
                    c.shape_density(t).to_string(),
                    c.tau_hat().to_string(),
                    c.bandwidth().to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Fit both classes with bandwidths `(h₁, h₂)`.
pub fn fit(data: &TrainingSet, family: KernelFamily, bandwidths: (f64, f64)) -> Result<KernelShapeEstimate> {
    let mut classes = Vec::with_capacity(2);
    for (label, h) in Label::BOTH.into_iter().zip([bandwidths.0, bandwidths.1]) {
        if data.class_count(label) == 0 {
            return Err(Error::DegenerateClass(format!("class {label} has no training samples")));
        }
        classes.push(ClassEstimate::new(
            data.class_trains(label),
            KernelSpec::new(family, h)?,
        )?);
    }
    let c2 = classes.pop().expect("two classes");
    let c1 = classes.pop().expect("two classes");
    Ok(KernelShapeEstimate {
        classes: [c1, c2],
        window: data.window(),
        family,
    })
}

fn check_point(t: f64, window: f64) -> Result<()> {
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::invalid(format!("window T = {window} must be positive")));
    }
    if !(0.0..=window).contains(&t) {
        return Err(Error::invalid(format!("t = {t} lies outside [0, {window}]")));
    }
    Ok(())
}

/// `∫₀ᵀ f(s)·λ(s) ds` over the kernel's reach around `t`, split at `t`.
fn kernel_quadrature<F: Fn(f64) -> f64>(f: F, k: &KernelSpec, t: f64, window: f64) -> f64 {
    let r = k.quad_radius();
    let (lo, hi) = ((t - r).max(0.0), (t + r).min(window));
    let tol = quad::DEFAULT_TOL;
    quad::adaptive_simpson(&f, lo, t, tol, quad::DEFAULT_MAX_DEPTH)
        + quad::adaptive_simpson(&f, t, hi, tol, quad::DEFAULT_MAX_DEPTH)
}

/// `E λ̂(t) = ∫₀ᵀ K_h(t − s)·λ(s) ds`.
pub fn expected_estimate(model: &IntensityModel, k: &KernelSpec, t: f64, window: f64) -> Result<f64> {
    check_point(t, window)?;
    Ok(kernel_quadrature(|s| k.scaled(t - s) * model.rate(s), k, t, window))
}

/// Variance of the class-aggregated `λ̂(t)` over `L` trains:
/// `(1/(Lh))·∫₀ᵀ h⁻¹K²((t − s)/h)·λ(s) ds`.
pub fn variance_estimate(model: &IntensityModel, k: &KernelSpec, t: f64, trains: usize, window: f64) -> Result<f64> {
    check_point(t, window)?;
    if trains == 0 {
        return Err(Error::invalid("variance_estimate needs L >= 1"));
    }
    let h = k.h;
    let integral = kernel_quadrature(
        |s| {
            let kv = k.family.eval((t - s) / h);
            kv * kv / h * model.rate(s)
        },
        k,
        t,
        window,
    );
    Ok(integral / (trains as f64 * h))
}

/// Ten log-spaced bandwidths on `[0.1, 10]`.
pub fn default_bandwidth_grid() -> Vec<f64> {
    (0..10).map(|k| 10f64.powf(-1.0 + 2.0 * k as f64 / 9.0)).collect()
}

/// One `(h, fold)` cell of a CV trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvTraceRow {
    pub h: f64,
    pub fold: usize,
    pub log_likelihood: f64,
    /// Held-out events in the fold.
    pub events: usize,
    /// Held-out events whose density fell below the floor.
    pub clipped: usize,
}

/// Outcome of [`select_bandwidth_cv`].
#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    pub bandwidth: f64,
    /// The selected bandwidth is the smallest or largest grid point.
    pub at_boundary: bool,
    /// Summed held-out log-likelihood per grid point, in grid order;
    /// `None` for disqualified points.
    pub scores: Vec<(f64, Option<f64>)>,
    pub trace: Vec<CvTraceRow>,
}

impl CvSelection {
    /// Rows `(h, fold, log_likelihood)`.
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["h", "fold", "log_likelihood"])?;
        for r in &self.trace {
            w.write_record([r.h.to_string(), r.fold.to_string(), r.log_likelihood.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Select `hᵢ` maximizing the held-out log-likelihood of the class shape
/// estimate. Samples are shuffled with `seed` and dealt round-robin into
/// `folds` folds; ties go to the smaller bandwidth.
pub fn select_bandwidth_cv(
    data: &TrainingSet,
    class: Label,
    family: KernelFamily,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvSelection> {
    if grid.is_empty() {
        return Err(Error::CrossValidation("bandwidth grid is empty".into()));
    }
    for &h in grid {
        KernelSpec::new(family, h)?;
    }
    let trains: Vec<&SpikeTrain> = data.class_trains(class).collect();
    if folds < 2 || trains.len() < folds {
        return Err(Error::CrossValidation(format!(
            "class {class} has {} samples; {folds}-fold CV needs at least max(folds, 2)",
            trains.len()
        )));
    }
    let (lo, hi) = grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| {
        (lo.min(h), hi.max(h))
    });
    if grid.len() == 1 {
        return Ok(CvSelection {
            bandwidth: grid[0],
            at_boundary: false,
            scores: vec![(grid[0], None)],
            trace: Vec::new(),
        });
    }

    let mut order: Vec<usize> = (0..trains.len()).collect();
    order.shuffle(&mut rng::stream(seed, class.index() as u64));
    let mut fold_of = vec![0usize; trains.len()];
    for (pos, &idx) in order.iter().enumerate() {
        fold_of[idx] = pos % folds;
    }

    let cells: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..folds).map(move |f| (g, f))).collect();
    let trace: Vec<CvTraceRow> = cells
        .par_iter()
        .map(|&(g, f)| {
            let h = grid[g];
            let kernel = KernelSpec::new(family, h)?;
            let fit_on = trains.iter().zip(&fold_of).filter(|(_, &k)| k != f).map(|(x, _)| *x);
            let est = ClassEstimate::new(fit_on, kernel)?.tabulate();
            let (mut ll, mut events, mut clipped) = (0.0, 0usize, 0usize);
            for x in trains.iter().zip(&fold_of).filter(|(_, &k)| k == f).map(|(x, _)| *x) {
                for &t in x.times() {
                    let p = est.shape_density(t);
                    events += 1;
                    if p.is_nan() || p < CV_DENSITY_FLOOR {
                        clipped += 1;
                    }
                    ll += p.max(CV_DENSITY_FLOOR).ln();
                }
            }
            Ok(CvTraceRow {
                h,
                fold: f,
                log_likelihood: ll,
                events,
                clipped,
            })
        })
        .collect::<Result<_>>()?;

    let scores: Vec<(f64, Option<f64>)> = grid
        .iter()
        .enumerate()
        .map(|(g, &h)| {
            let rows = &trace[g * folds..(g + 1) * folds];
            let all_clipped = rows.iter().all(|r| r.events > 0 && r.clipped == r.events);
            (h, (!all_clipped).then(|| rows.iter().map(|r| r.log_likelihood).sum()))
        })
        .collect();
    let best = scores
        .iter()
        .filter_map(|&(h, s)| s.map(|s| (h, s)))
        .fold(None::<(f64, f64)>, |best, (h, s)| match best {
            Some((bh, bs)) if bs > s || (bs == s && bh <= h) => Some((bh, bs)),
            _ => Some((h, s)),
        })
        .ok_or_else(|| {
            Error::CrossValidation(format!(
                "every bandwidth leaves all held-out events of class {class} uncovered"
            ))
        })?;
    Ok(CvSelection {
        bandwidth: best.0,
        at_boundary: best.0 == lo || best.0 == hi,
        scores,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{generate_training_set, LabeledSample};

    fn epa(h: f64) -> KernelSpec {
        KernelSpec::new(KernelFamily::Epanechnikov, h).unwrap()
    }

    fn set_of(trains: Vec<Vec<f64>>, labels: Vec<Label>, window: f64) -> TrainingSet {
        let samples = trains
            .into_iter()
            .zip(labels)
            .map(|(t, label)| LabeledSample {
                train: SpikeTrain::new(t, window).unwrap(),
                label,
            })
            .collect();
        TrainingSet::new(samples, window).unwrap()
    }

    #[test]
    fn single_sample_examples() {
        let x = SpikeTrain::new(vec![1.0], 5.0).unwrap();
        assert!((single_intensity_estimate(&x, &epa(0.5), 1.0) - 1.5).abs() < 1e-15);
        assert_eq!(single_intensity_estimate(&x, &epa(0.5), 1.6), 0.0);
        let e = SpikeTrain::empty(5.0).unwrap();
        assert_eq!(single_intensity_estimate(&e, &epa(0.5), 2.0), 0.0);
        assert_eq!(single_shape_estimate(&e, &epa(0.5), 2.0), 0.0);
        assert!(KernelSpec::new(KernelFamily::Gaussian, 0.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Gaussian, -1.0).is_err());
    }

    #[test]
    fn kernels_integrate_to_one() {
        for fam in [KernelFamily::Epanechnikov, KernelFamily::Gaussian] {
            let m = quad::integrate(|u| fam.eval(u), -12.0, 12.0);
            let m2 = quad::integrate(|u| fam.eval(u).powi(2), -12.0, 12.0);
            assert!((m - 1.0).abs() < 1e-9, "{fam:?}");
            assert!((m2 - fam.square_integral()).abs() < 1e-9, "{fam:?}");
        }
    }

    #[test]
    fn single_shape_mass_is_one_inside_window() {
        let x = SpikeTrain::new(vec![1.2, 3.3, 3.4, 8.0], 10.0).unwrap();
        let k = epa(0.7);
        let pieces = [0.0, 0.5, 1.9, 2.6, 4.1, 7.3, 8.7, 10.0];
        let mass: f64 = pieces
            .windows(2)
            .map(|w| quad::integrate(|t| single_shape_estimate(&x, &k, t), w[0], w[1]))
            .sum();
        assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn aggregation_matches_definition() {
        let trains = vec![
            vec![1.0, 2.0, 3.0],
            vec![2.5, 4.0, 5.0, 6.0, 7.0],
            vec![],
            vec![0.5, 1.5, 2.5, 3.5],
        ];
        let labels = vec![Label::Omega1; 4];
        let mut all = trains.clone();
        all.push(vec![4.0]);
        let mut all_labels = labels.clone();
        all_labels.push(Label::Omega2);
        let set = set_of(all, all_labels, 8.0);
        let est = fit(&set, KernelFamily::Gaussian, (0.4, 0.4)).unwrap();
        let c = est.class(Label::Omega1);
        assert_eq!(c.trains(), 4);
        assert!((c.tau_hat() - 3.0).abs() < 1e-15);
        let k = KernelSpec::new(KernelFamily::Gaussian, 0.4).unwrap();
        for t in [0.0, 1.3, 4.4, 8.0] {
            let direct: f64 = trains
                .iter()
                .map(|v| single_shape_estimate(&SpikeTrain::new(v.clone(), 8.0).unwrap(), &k, t))
                .sum::<f64>()
                / 4.0;
            assert!((c.shape_density(t) - direct).abs() < 1e-15 * direct.max(1.0));
        }
    }

    #[test]
    fn identical_trains_reproduce_single_estimate() {
        let v = vec![0.7, 2.2, 5.1];
        let set = set_of(vec![v.clone(); 5], vec![Label::Omega2; 5], 6.0);
        let k = epa(0.8);
        let c = ClassEstimate::new(set.class_trains(Label::Omega2), k).unwrap();
        let x = SpikeTrain::new(v, 6.0).unwrap();
        for t in [0.5, 2.0, 2.9, 5.5] {
            assert!((c.shape_density(t) - single_shape_estimate(&x, &k, t)).abs() < 1e-14);
        }
    }

    #[test]
    fn missing_class_rejected() {
        let set = set_of(vec![vec![1.0]], vec![Label::Omega1], 2.0);
        assert!(matches!(
            fit(&set, KernelFamily::Gaussian, (0.5, 0.5)),
            Err(Error::DegenerateClass(_))
        ));
    }

    #[test]
    fn expected_estimate_interior_and_boundary() {
        let m = IntensityModel::homogeneous(3.0).unwrap();
        let k = epa(0.5);
        assert!((expected_estimate(&m, &k, 5.0, 10.0).unwrap() - 3.0).abs() < 1e-12);
        assert!((expected_estimate(&m, &k, 0.0, 10.0).unwrap() - 1.5).abs() < 1e-12);
        assert!(expected_estimate(&m, &k, 11.0, 10.0).is_err());
    }

    #[test]
    fn variance_closed_form_and_scaling() {
        let m = IntensityModel::homogeneous(3.0).unwrap();
        let k = epa(0.5);
        let v = variance_estimate(&m, &k, 5.0, 100, 10.0).unwrap();
        assert!((v - 0.6 * 3.0 / (100.0 * 0.5)).abs() < 1e-12);
        let v10 = variance_estimate(&m, &k, 5.0, 1000, 10.0).unwrap();
        assert!((v / v10 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn default_grid_is_log_spaced() {
        let g = default_bandwidth_grid();
        assert_eq!(g.len(), 10);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[9] - 10.0).abs() < 1e-12);
        let r = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-12));
    }

    #[test]
    fn cv_single_point_and_errors() {
        let g = IntensityModel::harmonic(0.2).unwrap();
        let set = generate_training_set(&g, &g, (0.5, 0.5), 30, 10.0, 2).unwrap();
        let sel = select_bandwidth_cv(&set, Label::Omega1, KernelFamily::Gaussian, &[0.7], 5, 1).unwrap();
        assert_eq!(sel.bandwidth, 0.7);
        assert!(select_bandwidth_cv(&set, Label::Omega1, KernelFamily::Gaussian, &[], 5, 1).is_err());
        assert!(select_bandwidth_cv(&set, Label::Omega1, KernelFamily::Gaussian, &[0.5, 1.0], 100, 1).is_err());
    }

    #[test]
    fn cv_is_deterministic_and_traces_every_cell() {
        let g = IntensityModel::harmonic(0.2).unwrap();
        let set = generate_training_set(&g, &g, (0.5, 0.5), 60, 10.0, 8).unwrap();
        let grid = default_bandwidth_grid();
        let a = select_bandwidth_cv(&set, Label::Omega2, KernelFamily::Gaussian, &grid, 5, 3).unwrap();
        let b = select_bandwidth_cv(&set, Label::Omega2, KernelFamily::Gaussian, &grid, 5, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.len(), 50);
        assert!(grid.contains(&a.bandwidth));
    }

    #[test]
    fn gaussian_table_tracks_exact_estimate() {
        let g = IntensityModel::harmonic(0.5).unwrap();
        let set = generate_training_set(&g, &g, (0.5, 0.5), 80, 10.0, 21).unwrap();
        let est = fit(&set, KernelFamily::Gaussian, (0.3, 1.7)).unwrap();
        for c in &est.classes {
            let table = c.tabulate();
            for i in 0..=997 {
                let t = 10.0 * i as f64 / 997.0;
                let (a, b) = (table.shape_density(t), c.shape_density(t));
                assert!((a - b).abs() <= 1e-6 * b, "t = {t}: {a} vs {b}");
            }
        }
    }
}
