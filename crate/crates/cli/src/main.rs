use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spikeclass::bayes::{estimate_bayes_risk, rule_bounds, theoretical_report, write_quantity_csv, QuantityRow};
use spikeclass::experiments::{validate, write_figure, ExperimentConfig, FigureId};
use spikeclass::kernel::select_bandwidth_cv;
use spikeclass::plugin::{estimate_plugin_risk, write_risk_csv, PluginRiskSetup};
use spikeclass::rng::{derive_seed, Purpose};
use spikeclass::simulate::generate_training_set;
use spikeclass::{BayesRule, Error, Label};

/// Bayes and kernel plug-in classification experiments for spike trains.
#[derive(Parser, Debug)]
#[command(name = "spikeclass", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML experiment config; keys override the built-in preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV outputs.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Observation window for single-window commands.
    #[arg(long, global = true)]
    t_window: Option<f64>,
    /// Comma-separated window grid.
    #[arg(long, global = true, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    /// Training set size for single-L commands.
    #[arg(long, global = true)]
    l_train: Option<usize>,
    /// Comma-separated training size grid.
    #[arg(long, global = true, value_delimiter = ',')]
    l_grid: Option<Vec<u64>>,
    /// Kernel family: gaussian or epanechnikov.
    #[arg(long, global = true)]
    kernel: Option<String>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Test trains per run.
    #[arg(long, global = true)]
    n_test: Option<usize>,
    /// Independent runs.
    #[arg(long, global = true)]
    runs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a labeled training set and write events plus manifest CSVs.
    Simulate,
    /// Monte Carlo Bayes risk and risk theory over the window grid.
    BayesRisk,
    /// Paired plug-in and Bayes risk at the configured window and size.
    PluginRisk,
    /// Cross-validated bandwidth traces for both classes.
    BandwidthScan,
    /// Regenerate one figure table.
    Figure {
        /// bayes-risk-vs-T, risk-vs-T-by-L, bandwidth-vs-T, risk-vs-L-by-phi or gaussian-failure.
        id: String,
    },
    /// Run the oracle suite; exits 1 if any check fails.
    Validate,
}

enum Failure {
    Config(String),
    Validation,
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn overrides(g: &Global) -> Vec<(String, toml::Value)> {
    use toml::Value;
    let mut o = Vec::new();
    let mut put = |k: &str, v: Value| o.push((k.to_string(), v));
    if let Some(v) = g.seed {
        // Seeds above i64::MAX do not fit a TOML integer; wrap into its range.
        put("seed", Value::Integer(v as i64));
    }
    if let Some(v) = &g.out_dir {
        put("out_dir", Value::String(v.display().to_string()));
    }
    if let Some(v) = g.t_window {
        put("t_window", Value::Float(v));
    }
    if let Some(v) = &g.t_grid {
        put("t_grid", Value::Array(v.iter().map(|&x| Value::Float(x)).collect()));
    }
    if let Some(v) = g.l_train {
        put("l_train", Value::Integer(v as i64));
    }
    if let Some(v) = &g.l_grid {
        put(
            "l_grid",
            Value::Array(v.iter().map(|&x| Value::Integer(x as i64)).collect()),
        );
    }
    if let Some(v) = &g.kernel {
        put("kernel", Value::String(v.clone()));
    }
    for (k, v) in [("folds", g.folds), ("n_test", g.n_test), ("runs", g.runs)] {
        if let Some(v) = v {
            put(k, Value::Integer(v as i64));
        }
    }
    o
}

fn prepare_out_dir(c: &ExperimentConfig) -> Result<(), Failure> {
    std::fs::create_dir_all(&c.out_dir)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", c.out_dir.display())))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let figure = match &cli.command {
        Command::Figure { id } => Some(id.parse::<FigureId>()?),
        _ => None,
    };
    let config = ExperimentConfig::resolve(figure, cli.global.config.as_deref(), &overrides(&cli.global))?;
    let (l1, l2) = config.models()?;
    match &cli.command {
        Command::Simulate => {
            prepare_out_dir(&config)?;
            let set = generate_training_set(&l1, &l2, config.priors(), config.l_train, config.t_window, config.seed)?;
            let (ev, mf) = (config.out_dir.join("events.csv"), config.out_dir.join("manifest.csv"));
            set.write_csv(&ev, &mf)?;
            println!(
                "wrote {} samples (L1 = {}, L2 = {}) to {} and {}",
                set.len(),
                set.class_count(Label::Omega1),
                set.class_count(Label::Omega2),
                ev.display(),
                mf.display()
            );
        }
        Command::BayesRisk => {
            prepare_out_dir(&config)?;
            let mut rows = Vec::new();
            for &t in &config.t_grid {
                let rule = BayesRule::new(l1.clone(), l2.clone(), config.priors(), t)?;
                let bounds = rule_bounds(&rule)?;
                let theory = theoretical_report(&rule, &bounds, bounds.d_hat)?;
                let risk = estimate_bayes_risk(&rule, config.n_test, config.runs, config.seed)?;
                println!(
                    "T = {t}: Bayes risk {:.4} ± {:.4}, Bhattacharyya bound {:.4}",
                    risk.mean, risk.std_error, theory.bhattacharyya_bound
                );
                rows.extend(QuantityRow::from_risk(t, "bayes_risk", &risk));
                rows.extend(theory.rows(Some(config.seed)));
            }
            let path = config.out_dir.join("bayes-risk.csv");
            write_quantity_csv(&path, &rows)?;
            println!("wrote {}", path.display());
        }
        Command::PluginRisk => {
            prepare_out_dir(&config)?;
            let rep = estimate_plugin_risk(&PluginRiskSetup {
                lambda1: l1,
                lambda2: l2,
                priors: config.priors(),
                l_train: config.l_train,
                window: config.t_window,
                family: config.kernel,
                bandwidth_grid: config.bandwidth_grid.clone(),
                folds: config.folds,
                n_test: config.n_test,
                runs: config.runs,
                seed: config.seed,
            })?;
            let path = config.out_dir.join("plugin-risk.csv");
            write_risk_csv(&path, &config.hash(), std::slice::from_ref(&rep))?;
            println!(
                "plug-in risk {:.4} ± {:.4}, paired Bayes risk {:.4} ± {:.4}, agreement {:.3}",
                rep.plugin.mean,
                rep.plugin.std_error,
                rep.bayes.mean,
                rep.bayes.std_error,
                rep.mean_agreement()
            );
            println!("wrote {}", path.display());
        }
        Command::BandwidthScan => {
            prepare_out_dir(&config)?;
            let set = generate_training_set(&l1, &l2, config.priors(), config.l_train, config.t_window, config.seed)?;
            let cv_seed = derive_seed(config.seed, &[Purpose::CrossValidation as u64]);
            let mut h = [0.0; 2];
            for label in Label::BOTH {
                let folds = config.folds.min(set.class_count(label));
                let sel = select_bandwidth_cv(&set, label, config.kernel, &config.bandwidth_grid, folds, cv_seed)?;
                let path = config.out_dir.join(format!("cv-trace-class{label}.csv"));
                sel.write_trace_csv(&path)?;
                h[label.index()] = sel.bandwidth;
                println!(
                    "class {label}: h = {}{} ({})",
                    sel.bandwidth,
                    if sel.at_boundary { " at grid boundary" } else { "" },
                    path.display()
                );
            }
            let est = spikeclass::kernel::fit(&set, config.kernel, (h[0], h[1]))?;
            let path = config.out_dir.join("kernel-estimate.csv");
            est.write_csv(&path, 501)?;
            println!("wrote {}", path.display());
        }
        Command::Figure { .. } => {
            let id = figure.expect("parsed above");
            let (path, table) = write_figure(id, &config)?;
            println!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        Command::Validate => {
            prepare_out_dir(&config)?;
            let report = validate(&config)?;
            for c in &report.checks {
                println!("{:<24} {:<4} {}", c.name, c.status, c.detail);
            }
            let path = config.out_dir.join("validation.csv");
            report.write_csv(&path)?;
            println!("wrote {}", path.display());
            if !report.passed() {
                return Err(Failure::Validation);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => {
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
