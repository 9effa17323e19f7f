use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use riss_core::analytics::Eta;
use riss_core::distribution::QuantileConvention;
use riss_experiments::calibrate::{curve_error, doa_calibrate, reference_curves, refit, sigma_grid};
use riss_experiments::config::{ScenarioConfig, SweepVariable};
use riss_experiments::figures::{reproduce, FigureOptions};
use riss_experiments::output::{to_csv_string, write_csv, Method, ResultRow};
use riss_experiments::plan::plan_power;
use riss_experiments::scenario::{analyze, run_scenario};

#[derive(Parser)]
#[command(name = "riss", version, about = "RISS-assisted WPCN analysis and simulation")]
struct Cli {
    /// Scenario file (TOML). Defaults to the reference setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory. Without it results go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form values and bounds, no sampling.
    Analyze,
    /// Monte Carlo at the configured point, ignoring any sweep.
    Simulate,
    /// Closed form and Monte Carlo over the configured sweep.
    Sweep {
        /// Overrides `sweep.variable`, e.g. `kappa_h`.
        #[arg(long)]
        variable: Option<String>,
        /// Overrides `sweep.values`, comma separated.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Figure data sets: fig3 .. fig10, or `all`.
    Reproduce {
        #[arg(long)]
        figure: String,
    },
    /// Transmit power meeting an energy outage target.
    PlanPower {
        #[arg(long, allow_hyphen_values = true)]
        threshold_dbm: f64,
        #[arg(long)]
        p_out: f64,
        /// Match the threshold to the `1 - p_out` quantile instead.
        #[arg(long)]
        literal: bool,
    },
    /// Error statistics of the L-array angle estimator.
    DoaCalibrate {
        #[arg(long, value_delimiter = ',', default_value = "7,13,19")]
        na: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,10")]
        kappa: Vec<f64>,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        snr_db: f64,
    },
    /// Refits the angle-to-phase rates against Monte Carlo curves.
    FitEta {
        /// Number of deviations in [0, 0.05] rad.
        #[arg(long, default_value_t = 11)]
        points: usize,
    },
}

fn load(cli: &Cli) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::from_path(p).with_context(|| format!("loading {}", p.display()))?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.mc.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.mc.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, name: &str, rows: &[ResultRow]) -> anyhow::Result<()> {
    match out {
        Some(dir) => {
            let path = dir.join(format!("{name}.csv"));
            write_csv(&path, rows)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", to_csv_string(rows)?),
    }
    Ok(())
}

fn parse_variable(name: &str) -> anyhow::Result<SweepVariable> {
    let probe = format!("[sweep]\nvariable = \"{name}\"\nvalues = []\n");
    match ScenarioConfig::from_toml_str(&probe) {
        Ok(c) => Ok(c.sweep.variable.expect("variable parsed")),
        Err(_) => bail!("unknown sweep variable `{name}`"),
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Analyze => {
            let cfg = load(&cli)?;
            emit(out, &format!("{}_analysis", cfg.id), &analyze(&cfg)?)?;
        }
        Command::Simulate => {
            let mut cfg = load(&cli)?;
            cfg.sweep = Default::default();
            emit(out, &cfg.id, &run_scenario(&cfg)?)?;
        }
        Command::Sweep { variable, values } => {
            let mut cfg = load(&cli)?;
            if let Some(v) = variable {
                cfg.sweep.variable = Some(parse_variable(v)?);
            }
            if let Some(v) = values {
                cfg.sweep.values = v.clone();
            }
            if cfg.sweep.variable.is_none() || cfg.sweep.values.is_empty() {
                bail!("sweep needs a variable and at least one value");
            }
            cfg.validate()?;
            emit(out, &cfg.id, &run_scenario(&cfg)?)?;
        }
        Command::Reproduce { figure } => {
            let opts = FigureOptions {
                trials: cli.trials.unwrap_or(FigureOptions::default().trials),
                seed: cli.seed.unwrap_or(FigureOptions::default().seed),
            };
            let dir = out.unwrap_or(Path::new("results"));
            for p in reproduce(figure, &opts, dir)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::PlanPower {
            threshold_dbm,
            p_out,
            literal,
        } => {
            let cfg = load(&cli)?;
            let convention = if *literal {
                QuantileConvention::Literal
            } else {
                QuantileConvention::OutageQuantile
            };
            print!("{}", plan_power(&cfg, *threshold_dbm, *p_out, convention)?);
        }
        Command::DoaCalibrate { na, kappa, snr_db } => {
            let trials = cli.trials.unwrap_or(2000);
            let seed = cli.seed.unwrap_or(1);
            emit(out, "doa_calibrate", &doa_calibrate(na, kappa, *snr_db, trials, seed)?)?;
        }
        Command::FitEta { points } => {
            let trials = cli.trials.unwrap_or(20_000);
            let seed = cli.seed.unwrap_or(1);
            let (siso, miso) = reference_curves(&sigma_grid(*points), trials, seed)?;
            let fit = refit(&siso, &miso)?;
            let reference = Eta::default();
            let mut rows = Vec::new();
            for (metric, value) in [
                ("eta_u", fit.eta.u),
                ("eta_v", fit.eta.v),
                ("eta_z", fit.eta.z),
                ("residual_siso", fit.residual_siso),
                ("residual_miso", fit.residual_miso),
                ("mean_rel_error_siso_fitted", curve_error(&siso, fit.eta)?),
                ("mean_rel_error_miso_fitted", curve_error(&miso, fit.eta)?),
                ("mean_rel_error_siso_reference", curve_error(&siso, reference)?),
                ("mean_rel_error_miso_reference", curve_error(&miso, reference)?),
            ] {
                let mut row = ResultRow::new("fit_eta", metric, value, Method::ClosedForm);
                row.n_trials = Some(trials);
                row.seed = Some(seed);
                rows.push(row);
            }
            for f in &fit.flags {
                eprintln!("warning: {f:?}");
            }
            emit(out, "fit_eta", &rows)?;
        }
    }
    Ok(())
}
