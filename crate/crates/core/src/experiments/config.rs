use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::intensity::{IntensityModel, IntensitySpec};
use crate::kernel::{default_bandwidth_grid, KernelFamily};
use crate::simulate::validate_priors;

/// Figures the harness can regenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    BayesRiskVsT,
    RiskVsTByL,
    BandwidthVsT,
    RiskVsLByPhi,
    GaussianFailure,
}

impl FigureId {
    pub const ALL: [FigureId; 5] = [
        FigureId::BayesRiskVsT,
        FigureId::RiskVsTByL,
        FigureId::BandwidthVsT,
        FigureId::RiskVsLByPhi,
        FigureId::GaussianFailure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureId::BayesRiskVsT => "bayes-risk-vs-T",
            FigureId::RiskVsTByL => "risk-vs-T-by-L",
            FigureId::BandwidthVsT => "bandwidth-vs-T",
            FigureId::RiskVsLByPhi => "risk-vs-L-by-phi",
            FigureId::GaussianFailure => "gaussian-failure",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL.into_iter().find(|f| f.as_str() == s).ok_or_else(|| {
            let known: Vec<&str> = FigureId::ALL.iter().map(|f| f.as_str()).collect();
            Error::config(
                "figure",
                format!("unknown figure id `{s}` (known: {})", known.join(", ")),
            )
        })
    }
}

/// One experiment's parameters. Unknown keys are rejected when parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lambda1: IntensitySpec,
    pub lambda2: IntensitySpec,
    pub priors: [f64; 2],
    /// Window for single-window commands and L sweeps.
    pub t_window: f64,
    pub t_grid: Vec<f64>,
    /// Training size for single-L commands.
    pub l_train: usize,
    pub l_grid: Vec<usize>,
    pub kernel: KernelFamily,
    pub bandwidth_grid: Vec<f64>,
    pub folds: usize,
    pub n_test: usize,
    pub runs: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Harmonic phase pairs `(φ₁, φ₂)` in multiples of π.
    pub phi_pairs: Vec<[f64; 2]>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            lambda1: IntensitySpec::Harmonic { phase_over_pi: 0.0625 },
            lambda2: IntensitySpec::Harmonic { phase_over_pi: 0.25 },
            priors: [0.5, 0.5],
            t_window: 10.0,
            t_grid: (1..=20).map(f64::from).collect(),
            l_train: 200,
            l_grid: vec![10, 20, 50, 100, 200],
            kernel: KernelFamily::Gaussian,
            bandwidth_grid: default_bandwidth_grid(),
            folds: 5,
            n_test: 10_000,
            runs: 10,
            seed: 1,
            out_dir: PathBuf::from("out"),
            phi_pairs: vec![[0.0625, 0.125], [0.0625, 0.25], [0.0625, 1.0]],
        }
    }
}

impl ExperimentConfig {
    /// Defaults, adjusted for a figure when one is given.
    pub fn preset(figure: Option<FigureId>) -> Self {
        let mut c = Self::default();
        if figure == Some(FigureId::GaussianFailure) {
            c.lambda1 = IntensitySpec::GaussianBump {
                amplitude: 300.0,
                width: 20.0,
            };
            c.lambda2 = IntensitySpec::GaussianBump {
                amplitude: 600.0,
                width: 40.0,
            };
            c.t_grid = (1..=8).map(|k| 0.25 * f64::from(k)).collect();
            c.l_grid = vec![10, 50, 200];
        }
        c
    }

    /// Preset, then the file's keys, then `overrides`, then validation.
    pub fn resolve(figure: Option<FigureId>, file: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let preset = toml::Table::try_from(Self::preset(figure)).map_err(|e| Error::config("preset", e.to_string()))?;
        let mut table = preset;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let user: toml::Table = text
                .parse()
                .map_err(|e: toml::de::Error| Error::config(path.display().to_string(), e.message().to_string()))?;
            for (k, v) in user {
                table.insert(k, v);
            }
        }
        for (k, v) in overrides {
            table.insert(k.clone(), v.clone());
        }
        let config: Self = table.try_into().map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "config".to_string());
            Error::config(field, msg)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("{v} must be positive and finite")))
            }
        };
        validate_priors((self.priors[0], self.priors[1])).map_err(|e| Error::config("priors", e.to_string()))?;
        positive("t_window", self.t_window)?;
        if self.t_grid.is_empty() {
            return Err(Error::config("t_grid", "grid is empty"));
        }
        for &t in &self.t_grid {
            positive("t_grid", t)?;
        }
        if self.l_grid.is_empty() {
            return Err(Error::config("l_grid", "grid is empty"));
        }
        for (field, l) in self
            .l_grid
            .iter()
            .map(|&l| ("l_grid", l))
            .chain([("l_train", self.l_train)])
        {
            if l < 4 {
                return Err(Error::config(field, format!("training size {l} is below 4")));
            }
        }
        if self.bandwidth_grid.is_empty() {
            return Err(Error::config("bandwidth_grid", "grid is empty"));
        }
        for &h in &self.bandwidth_grid {
            positive("bandwidth_grid", h)?;
        }
        if self.folds < 2 {
            return Err(Error::config("folds", "need at least 2 folds"));
        }
        if self.n_test == 0 {
            return Err(Error::config("n_test", "must be at least 1"));
        }
        if self.runs == 0 {
            return Err(Error::config("runs", "must be at least 1"));
        }
        if self.phi_pairs.is_empty() {
            return Err(Error::config("phi_pairs", "list is empty"));
        }
        if self.phi_pairs.iter().flatten().any(|p| !p.is_finite()) {
            return Err(Error::config("phi_pairs", "phases must be finite"));
        }
        self.lambda1
            .build()
            .map_err(|e| Error::config("lambda1", e.to_string()))?;
        self.lambda2
            .build()
            .map_err(|e| Error::config("lambda2", e.to_string()))?;
        Ok(())
    }

    pub fn models(&self) -> Result<(IntensityModel, IntensityModel)> {
        Ok((self.lambda1.build()?, self.lambda2.build()?))
    }

    pub fn priors(&self) -> (f64, f64) {
        (self.priors[0], self.priors[1])
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form,
    /// with the output directory left out.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.out_dir = PathBuf::new();
        let text = toml::to_string(&canon).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
