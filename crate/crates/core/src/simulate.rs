//! Spike-train sampling by thinning, and labeled training sets.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intensity::{verify_bounds, IntensityModel, DEFAULT_BOUNDS_GRID};
use crate::rng;

/// Smallest admissible class prior.
pub const PRIOR_FLOOR: f64 = 1e-6;

/// Margin applied to the grid maximum when choosing the thinning rate.
pub const DOMINATION_MARGIN: f64 = 1.001;

/// Class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Omega1,
    Omega2,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::Omega1, Label::Omega2];

    pub fn index(self) -> usize {
        match self {
            Label::Omega1 => 0,
            Label::Omega2 => 1,
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Omega1 => Label::Omega2,
            Label::Omega2 => Label::Omega1,
        }
    }

    /// `1` or `2`.
    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Label::Omega1),
            2 => Ok(Label::Omega2),
            _ => Err(Error::invalid(format!("class label {n} is not 1 or 2"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Check that `(π₁, π₂)` is a proper, non-degenerate prior.
pub fn validate_priors(priors: (f64, f64)) -> Result<()> {
    let (p1, p2) = priors;
    if !(p1.is_finite() && p2.is_finite()) || (p1 + p2 - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("priors ({p1}, {p2}) must sum to 1")));
    }
    if p1.min(p2) < PRIOR_FLOOR {
        return Err(Error::invalid(format!(
            "priors ({p1}, {p2}) fall below the floor {PRIOR_FLOOR:e}"
        )));
    }
    Ok(())
}

/// One realization `[t₁, …, t_N; N]` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    times: Vec<f64>,
    window: f64,
}

impl SpikeTrain {
    /// Requires `0 < t₁ < … < t_N ≤ T`.
    pub fn new(times: Vec<f64>, window: f64) -> Result<Self> {
        if !(window.is_finite() && window > 0.0) {
            return Err(Error::invalid(format!("window T = {window} must be positive")));
        }
        if let Some(&first) = times.first() {
            if first.is_nan() || first <= 0.0 {
                return Err(Error::invalid(format!("event time {first} is not positive")));
            }
        }
        if let Some(&last) = times.last() {
            if last.is_nan() || last > window {
                return Err(Error::invalid(format!("event time {last} exceeds window {window}")));
            }
        }
        if times.windows(2).any(|w| w[1].is_nan() || w[1] <= w[0]) {
            return Err(Error::invalid("event times must be strictly increasing"));
        }
        Ok(Self { times, window })
    }

    pub fn empty(window: f64) -> Result<Self> {
        Self::new(Vec::new(), window)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn count(&self) -> usize {
        self.times.len()
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// Number of events in `(a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        let lo = self.times.partition_point(|&t| t <= a);
        let hi = self.times.partition_point(|&t| t <= b);
        hi.saturating_sub(lo)
    }
}

/// Lewis–Shedler thinning sampler for one intensity on a fixed window.
#[derive(Debug, Clone)]
pub struct PoissonSampler {
    model: IntensityModel,
    window: f64,
    dominating_rate: f64,
}

impl PoissonSampler {
    pub fn new(model: IntensityModel, window: f64) -> Result<Self> {
        let bounds = verify_bounds(&model, window, DEFAULT_BOUNDS_GRID)?;
        if !bounds.c.is_finite() {
            return Err(Error::Unbounded(window));
        }
        Ok(Self {
            model,
            window,
            dominating_rate: bounds.c * DOMINATION_MARGIN,
        })
    }

    pub fn model(&self) -> &IntensityModel {
        &self.model
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn dominating_rate(&self) -> f64 {
        self.dominating_rate
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SpikeTrain {
        let mut times = Vec::new();
        if self.dominating_rate > 0.0 {
            let gaps = Exp::new(self.dominating_rate).expect("dominating rate is positive and finite");
            let mut t = 0.0_f64;
            loop {
                t += gaps.sample(rng);
                if t > self.window {
                    break;
                }
                let u: f64 = rng.random();
                if u * self.dominating_rate < self.model.rate(t) {
                    // Ties at floating-point resolution: nudge forward one ulp.
                    let last = times.last().copied().unwrap_or(0.0);
                    let accepted = if t > last { t } else { last.next_up() };
                    if accepted > self.window {
                        break;
                    }
                    times.push(accepted);
                    t = accepted;
                }
            }
        }
        SpikeTrain {
            times,
            window: self.window,
        }
    }
}

/// Draw one train from `model` on `[0, T]` using stream 0 of `seed`.
pub fn sample_poisson(model: &IntensityModel, window: f64, seed: u64) -> Result<SpikeTrain> {
    let sampler = PoissonSampler::new(model.clone(), window)?;
    Ok(sampler.sample(&mut rng::stream(seed, 0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub train: SpikeTrain,
    pub label: Label,
}

/// Draws `(X, Y)` pairs: label from the priors, train from that class.
#[derive(Debug, Clone)]
pub struct LabeledSource {
    samplers: [PoissonSampler; 2],
    priors: (f64, f64),
}

impl LabeledSource {
    pub fn new(l1: &IntensityModel, l2: &IntensityModel, priors: (f64, f64), window: f64) -> Result<Self> {
        validate_priors(priors)?;
        Ok(Self {
            samplers: [
                PoissonSampler::new(l1.clone(), window)?,
                PoissonSampler::new(l2.clone(), window)?,
            ],
            priors,
        })
    }

    pub fn priors(&self) -> (f64, f64) {
        self.priors
    }

    pub fn window(&self) -> f64 {
        self.samplers[0].window
    }

    pub fn sampler(&self, label: Label) -> &PoissonSampler {
        &self.samplers[label.index()]
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> LabeledSample {
        let u: f64 = rng.random();
        let label = if u < self.priors.0 {
            Label::Omega1
        } else {
            Label::Omega2
        };
        LabeledSample {
            train: self.samplers[label.index()].sample(rng),
            label,
        }
    }

    /// `n` samples; sample `i` uses stream `i` of `seed`.
    pub fn draw_many(&self, n: usize, seed: u64) -> Vec<LabeledSample> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| self.draw(&mut rng::stream(seed, i)))
            .collect()
    }
}

/// A learning sequence `D_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    samples: Vec<LabeledSample>,
    window: f64,
    seed: Option<u64>,
    priors: Option<(f64, f64)>,
}

impl TrainingSet {
    pub fn new(samples: Vec<LabeledSample>, window: f64) -> Result<Self> {
        if samples.iter().any(|s| s.train.window != window) {
            return Err(Error::invalid("all training samples must share the window"));
        }
        Ok(Self {
            samples,
            window,
            seed: None,
            priors: None,
        })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Priors used to generate the set, when known.
    pub fn priors(&self) -> Option<(f64, f64)> {
        self.priors
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn class_trains(&self, label: Label) -> impl Iterator<Item = &SpikeTrain> + '_ {
        self.samples.iter().filter(move |s| s.label == label).map(|s| &s.train)
    }

    /// Write events as `sample_id,label,event_time` and the per-sample
    /// manifest as `sample_id,label,count,T,L,seed`.
    pub fn write_csv(&self, events: &Path, manifest: &Path) -> Result<()> {
        let mut ev = csv_writer(events)?;
        ev.write_record(["sample_id", "label", "event_time"])?;
        for (id, s) in self.samples.iter().enumerate() {
            for t in s.train.times() {
                ev.write_record([id.to_string(), s.label.to_string(), t.to_string()])?;
            }
        }
        ev.flush().map_err(|e| Error::io(events, e))?;

        let mut mf = csv_writer(manifest)?;
        mf.write_record(["sample_id", "label", "count", "T", "L", "seed"])?;
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_default();
        for (id, s) in self.samples.iter().enumerate() {
            mf.write_record([
                id.to_string(),
                s.label.to_string(),
                s.train.count().to_string(),
                self.window.to_string(),
                self.samples.len().to_string(),
                seed.clone(),
            ])?;
        }
        mf.flush().map_err(|e| Error::io(manifest, e))?;
        Ok(())
    }

    /// Inverse of [`TrainingSet::write_csv`].
    pub fn read_csv(events: &Path, manifest: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct ManifestRow {
            sample_id: usize,
            label: u8,
            count: usize,
            #[serde(rename = "T")]
            window: f64,
            #[serde(rename = "L")]
            total: usize,
            seed: Option<u64>,
        }
        #[derive(Deserialize)]
        struct EventRow {
            sample_id: usize,
            label: u8,
            event_time: f64,
        }

        let mut rows = Vec::new();
        for r in csv::Reader::from_path(manifest)?.deserialize::<ManifestRow>() {
            rows.push(r?);
        }
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("manifest lists no samples"))?;
        let (window, total, seed) = (first.window, first.total, first.seed);
        if rows.len() != total {
            return Err(Error::invalid(format!(
                "manifest declares L = {total} but lists {}",
                rows.len()
            )));
        }
        let mut times: Vec<Vec<f64>> = vec![Vec::new(); total];
        let mut labels = Vec::with_capacity(total);
        for (i, r) in rows.iter().enumerate() {
            if r.sample_id != i || r.window != window || r.total != total || r.seed != seed {
                return Err(Error::invalid(format!("manifest row {i} is inconsistent")));
            }
            labels.push(Label::from_number(r.label)?);
        }
        for r in csv::Reader::from_path(events)?.deserialize::<EventRow>() {
            let r = r?;
            let slot = times
                .get_mut(r.sample_id)
                .ok_or_else(|| Error::invalid(format!("event for unknown sample {}", r.sample_id)))?;
            if Label::from_number(r.label)? != labels[r.sample_id] {
                return Err(Error::invalid(format!("label mismatch for sample {}", r.sample_id)));
            }
            slot.push(r.event_time);
        }
        let mut samples = Vec::with_capacity(total);
        for ((t, label), row) in times.into_iter().zip(labels).zip(&rows) {
            if t.len() != row.count {
                return Err(Error::invalid(format!(
                    "sample {} has {} events, manifest says {}",
                    row.sample_id,
                    t.len(),
                    row.count
                )));
            }
            samples.push(LabeledSample {
                train: SpikeTrain::new(t, window)?,
                label,
            });
        }
        let mut set = Self::new(samples, window)?;
        set.seed = seed;
        Ok(set)
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Draw `L` labeled samples; sample `j` uses stream `j` of `seed`.
pub fn generate_training_set(
    l1: &IntensityModel,
    l2: &IntensityModel,
    priors: (f64, f64),
    total: usize,
    window: f64,
    seed: u64,
) -> Result<TrainingSet> {
    let source = LabeledSource::new(l1, l2, priors, window)?;
    generate_from_source(&source, total, seed)
}

pub fn generate_from_source(source: &LabeledSource, total: usize, seed: u64) -> Result<TrainingSet> {
    if total == 0 {
        return Err(Error::invalid("training set size L must be at least 1"));
    }
    let mut set = TrainingSet::new(source.draw_many(total, seed), source.window())?;
    set.seed = Some(seed);
    set.priors = Some(source.priors());
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn train_invariants_enforced() {
        assert!(SpikeTrain::new(vec![0.0, 1.0], 2.0).is_err());
        assert!(SpikeTrain::new(vec![1.0, 1.0], 2.0).is_err());
        assert!(SpikeTrain::new(vec![1.0, 2.5], 2.0).is_err());
        assert!(SpikeTrain::new(vec![0.5, 2.0], 2.0).is_ok());
        let e = SpikeTrain::empty(3.0).unwrap();
        assert_eq!(e.count(), 0);
    }

    #[test]
    fn zero_rate_gives_empty_train() {
        let z = IntensityModel::homogeneous(0.0).unwrap();
        let x = sample_poisson(&z, 10.0, 5).unwrap();
        assert_eq!(x.count(), 0);
    }

    #[test]
    fn samples_are_valid_and_reproducible() {
        let g = IntensityModel::harmonic(PI / 16.0).unwrap();
        let a = sample_poisson(&g, 10.0, 99).unwrap();
        let b = sample_poisson(&g, 10.0, 99).unwrap();
        assert_eq!(a, b);
        SpikeTrain::new(a.times().to_vec(), 10.0).unwrap();
    }

    #[test]
    fn homogeneous_count_moments() {
        let sampler = PoissonSampler::new(IntensityModel::homogeneous(2.0).unwrap(), 10.0).unwrap();
        let n = 10_000;
        let counts: Vec<f64> = (0..n)
            .map(|i| sampler.sample(&mut rng::stream(17, i)).count() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((mean - 20.0).abs() < 4.0 * (20.0f64 / n as f64).sqrt(), "mean {mean}");
        assert!((var - 20.0).abs() < 0.05 * 20.0, "var {var}");
    }

    #[test]
    fn priors_validated() {
        let h = IntensityModel::homogeneous(1.0).unwrap();
        assert!(generate_training_set(&h, &h, (1.0 - 1e-9, 1e-9), 10, 1.0, 0).is_err());
        assert!(generate_training_set(&h, &h, (0.6, 0.6), 10, 1.0, 0).is_err());
        assert!(generate_training_set(&h, &h, (0.5, 0.5), 0, 1.0, 0).is_err());
        let one = generate_training_set(&h, &h, (0.5, 0.5), 1, 1.0, 0).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn balanced_priors_give_binomial_counts() {
        // Binomial oracle: |L1 - 100| < 4·√50 except with probability ~6e-5.
        let h = IntensityModel::homogeneous(1.0).unwrap();
        let mut outside = 0;
        for seed in 0..50 {
            let set = generate_training_set(&h, &h, (0.5, 0.5), 200, 1.0, seed).unwrap();
            assert_eq!(set.class_count(Label::Omega1) + set.class_count(Label::Omega2), 200);
            if (set.class_count(Label::Omega1) as f64 - 100.0).abs() >= 4.0 * 50f64.sqrt() {
                outside += 1;
            }
        }
        assert_eq!(outside, 0);
    }

    #[test]
    fn csv_round_trip_keeps_empty_trains() {
        let g = IntensityModel::homogeneous(0.3).unwrap();
        let set = generate_training_set(&g, &g, (0.5, 0.5), 30, 2.0, 4).unwrap();
        assert!(set.samples().iter().any(|s| s.train.count() == 0));
        let dir = tempfile::tempdir().unwrap();
        let (ev, mf) = (dir.path().join("ev.csv"), dir.path().join("mf.csv"));
        set.write_csv(&ev, &mf).unwrap();
        let back = TrainingSet::read_csv(&ev, &mf).unwrap();
        assert_eq!(back.samples(), set.samples());
        assert_eq!(back.seed(), Some(4));
    }
}
