use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::bayes::{estimate_bayes_risk, BayesRule};
use crate::error::{Error, Result};
use crate::intensity::{bhattacharyya_bound, bhattacharyya_exponent, IntensityModel};
use crate::plugin::{estimate_plugin_risk, fit_run, training_set_for_run, PluginRiskReport, PluginRiskSetup};
use crate::simulate::LabeledSource;

use super::config::{ExperimentConfig, FigureId};

/// One long-format figure row.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureRow {
    pub series: String,
    pub t: f64,
    pub l: Option<usize>,
    pub h: Option<f64>,
    pub quantity: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub runs: usize,
    pub n_test: usize,
}

/// Rows of one figure plus the provenance stamped on each.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    pub figure: FigureId,
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<FigureRow>,
}

pub const FIGURE_COLUMNS: [&str; 12] = [
    "figure",
    "series",
    "T",
    "L",
    "h",
    "quantity",
    "value",
    "std_error",
    "runs",
    "n_test",
    "seed",
    "config_hash",
];

impl FigureTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(FIGURE_COLUMNS)?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                self.figure.to_string(),
                r.series.clone(),
                r.t.to_string(),
                opt(r.l.map(|l| l.to_string())),
                opt(r.h.map(|h| h.to_string())),
                r.quantity.clone(),
                r.value.to_string(),
                opt(r.std_error.map(|s| s.to_string())),
                r.runs.to_string(),
                r.n_test.to_string(),
                self.seed.to_string(),
                self.config_hash.clone(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Rows matching a series and quantity, in insertion order.
    pub fn select<'a>(&'a self, series: &'a str, quantity: &'a str) -> impl Iterator<Item = &'a FigureRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.series == series && r.quantity == quantity)
    }
}

fn phi_label(pair: [f64; 2]) -> String {
    format!("phi1={}pi,phi2={}pi", pair[0], pair[1])
}

fn harmonic_pair(pair: [f64; 2]) -> Result<(IntensityModel, IntensityModel)> {
    Ok((
        IntensityModel::harmonic(pair[0] * PI)?,
        IntensityModel::harmonic(pair[1] * PI)?,
    ))
}

struct Emitter<'a> {
    config: &'a ExperimentConfig,
    rows: Vec<FigureRow>,
}

impl Emitter<'_> {
    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, series: &str, t: f64, l: Option<usize>, h: Option<f64>, q: &str, v: f64, se: Option<f64>) {
        self.rows.push(FigureRow {
            series: series.to_string(),
            t,
            l,
            h,
            quantity: q.to_string(),
            value: v,
            std_error: se,
            runs: self.config.runs,
            n_test: self.config.n_test,
        });
    }

    fn bayes_point(&mut self, series: &str, l1: &IntensityModel, l2: &IntensityModel, t: f64) -> Result<()> {
        let c = self.config;
        let rule = BayesRule::new(l1.clone(), l2.clone(), c.priors(), t)?;
        let risk = estimate_bayes_risk(&rule, c.n_test, c.runs, c.seed)?;
        let beta = bhattacharyya_exponent(l1, l2, t)?;
        self.push(series, t, None, None, "bayes_risk", risk.mean, Some(risk.std_error));
        self.push(
            series,
            t,
            None,
            None,
            "bhattacharyya_bound",
            bhattacharyya_bound(c.priors(), beta),
            None,
        );
        Ok(())
    }

    fn plugin_point(
        &mut self,
        series: &str,
        l1: &IntensityModel,
        l2: &IntensityModel,
        l: usize,
        t: f64,
    ) -> Result<PluginRiskReport> {
        let c = self.config;
        let rep = estimate_plugin_risk(&PluginRiskSetup {
            lambda1: l1.clone(),
            lambda2: l2.clone(),
            priors: c.priors(),
            l_train: l,
            window: t,
            family: c.kernel,
            bandwidth_grid: c.bandwidth_grid.clone(),
            folds: c.folds,
            n_test: c.n_test,
            runs: c.runs,
            seed: c.seed,
        })?;
        let (gap, gap_se) = rep.excess_risk();
        self.push(
            series,
            t,
            Some(l),
            None,
            "plugin_risk",
            rep.plugin.mean,
            Some(rep.plugin.std_error),
        );
        self.push(
            series,
            t,
            Some(l),
            None,
            "paired_bayes_risk",
            rep.bayes.mean,
            Some(rep.bayes.std_error),
        );
        self.push(series, t, Some(l), None, "excess_risk", gap, Some(gap_se));
        self.push(series, t, Some(l), None, "agreement", rep.mean_agreement(), None);
        Ok(rep)
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Compute one figure's table.
pub fn figure(id: FigureId, config: &ExperimentConfig) -> Result<FigureTable> {
    config.validate()?;
    let mut e = Emitter {
        config,
        rows: Vec::new(),
    };
    let (l1, l2) = config.models()?;
    match id {
        FigureId::BayesRiskVsT => {
            for &pair in &config.phi_pairs {
                let (a, b) = harmonic_pair(pair)?;
                let series = phi_label(pair);
                for &t in &config.t_grid {
                    e.bayes_point(&series, &a, &b, t)?;
                }
            }
        }
        FigureId::RiskVsTByL | FigureId::GaussianFailure => {
            for &l in &config.l_grid {
                let series = format!("L={l}");
                for &t in &config.t_grid {
                    e.plugin_point(&series, &l1, &l2, l, t)?;
                }
            }
            for &t in &config.t_grid {
                e.bayes_point("bayes", &l1, &l2, t)?;
            }
        }
        FigureId::BandwidthVsT => bandwidth_rows(&mut e, &l1, &l2)?,
        FigureId::RiskVsLByPhi => {
            let t = config.t_window;
            for &pair in &config.phi_pairs {
                let (a, b) = harmonic_pair(pair)?;
                let series = phi_label(pair);
                for &l in &config.l_grid {
                    e.plugin_point(&series, &a, &b, l, t)?;
                }
                e.bayes_point(&series, &a, &b, t)?;
            }
        }
    }
    Ok(FigureTable {
        figure: id,
        seed: config.seed,
        config_hash: config.hash(),
        rows: e.rows,
    })
}

/// Mean selected bandwidths per (L, T), and the held-out log-likelihood
/// per event against `h` at the configured window.
fn bandwidth_rows(e: &mut Emitter<'_>, l1: &IntensityModel, l2: &IntensityModel) -> Result<()> {
    let c = e.config;
    let mut windows = c.t_grid.clone();
    if !windows.contains(&c.t_window) {
        windows.push(c.t_window);
    }
    for &l in &c.l_grid {
        let series = format!("L={l}");
        for &t in &windows {
            let source = LabeledSource::new(l1, l2, c.priors(), t)?;
            let mut h = [Vec::new(), Vec::new()];
            let mut curve = vec![0.0; c.bandwidth_grid.len()];
            for run in 0..c.runs {
                let (set, _) = training_set_for_run(&source, l, c.seed, run)?;
                let (_, sel) = fit_run(&set, c.kernel, &c.bandwidth_grid, c.folds, c.seed, run)?;
                for k in 0..2 {
                    h[k].push(sel[k].bandwidth);
                }
                let events: usize = sel[0]
                    .trace
                    .iter()
                    .filter(|r| r.h == sel[0].trace[0].h)
                    .map(|r| r.events)
                    .sum();
                for (g, &(_, score)) in sel[0].scores.iter().enumerate() {
                    curve[g] += score.unwrap_or(f64::NEG_INFINITY) / events.max(1) as f64 / c.runs as f64;
                }
            }
            if c.t_grid.contains(&t) {
                for (k, q) in ["h1_mean", "h2_mean"].into_iter().enumerate() {
                    let (m, se) = mean_se(&h[k]);
                    e.push(&series, t, Some(l), None, q, m, Some(se));
                }
            }
            if t == c.t_window {
                for (g, &hv) in c.bandwidth_grid.iter().enumerate() {
                    e.push(
                        &series,
                        t,
                        Some(l),
                        Some(hv),
                        "cv_log_likelihood_per_event",
                        curve[g],
                        None,
                    );
                }
            }
        }
    }
    Ok(())
}

/// Compute a figure and write `<out_dir>/<id>.csv`.
pub fn write_figure(id: FigureId, config: &ExperimentConfig) -> Result<(PathBuf, FigureTable)> {
    let table = figure(id, config)?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let path = config.out_dir.join(format!("{id}.csv"));
    table.write_csv(&path)?;
    Ok((path, table))
}
