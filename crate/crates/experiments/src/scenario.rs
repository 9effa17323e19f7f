//! Runs a configured scenario: closed forms, bounds and Monte Carlo.
//!
//! Metric units: energies and harvested power in watts, spectral
//! efficiency in bit/s/Hz.

use std::path::{Path, PathBuf};

use riss_core::analytics::{
    energy_bounds, expected_energy_doa_error, expected_energy_perfect, expected_energy_phase_error, se_upper_bound,
};
use riss_core::beamforming::AltOptConfig;
use riss_core::distribution::{ergodic_se_from, gamma_params_doa, gamma_params_perfect, GammaParams};
use riss_core::geometry::SystemParams;
use riss_core::montecarlo::{mc_energy, mc_ergodic_se, mc_fullcsi, nonlinear_harvest, pilot_overhead_factor, McStats};

use crate::config::{ErrorKind, ErrorsSection, Metric, ScenarioConfig};
use crate::error::Result;
use crate::output::{write_csv, Method, ResultRow, FLAG_CI_EXCLUDES};

/// Closed-form mean energy for the configured error model.
pub fn closed_form_energy(params: &SystemParams, errors: &ErrorsSection) -> Result<f64> {
    Ok(match errors.kind {
        ErrorKind::None => expected_energy_perfect(params),
        ErrorKind::Phase => expected_energy_phase_error(params, &errors.model())?,
        ErrorKind::Angle => expected_energy_doa_error(params, &errors.model())?,
    })
}

/// Moment-matched energy law for the configured error model, if it exists.
pub fn energy_law(params: &SystemParams, errors: &ErrorsSection) -> Option<GammaParams> {
    match errors.kind {
        ErrorKind::None => gamma_params_perfect(params).ok(),
        ErrorKind::Phase => gamma_params_doa(params, &errors.model()).ok(),
        ErrorKind::Angle => gamma_params_doa(params, &errors.model().phase_equivalent()).ok(),
    }
}

/// Closed-form ergodic SE. A degenerate energy law (pure LoS, no errors)
/// makes the energy deterministic, where the bound is exact.
fn closed_form_se(params: &SystemParams, errors: &ErrorsSection) -> Result<Option<f64>> {
    match energy_law(params, errors) {
        Some(g) => Ok(Some(ergodic_se_from(
            params,
            &g,
            params.p_i_watts,
            params.noise_sigma2_watts,
        )?)),
        None if errors.kind == ErrorKind::None => Ok(Some(se_upper_bound(params)?)),
        None => Ok(None),
    }
}

struct Point<'a> {
    cfg: &'a ScenarioConfig,
    variable: &'a str,
    value: Option<f64>,
}

impl Point<'_> {
    fn row(&self, metric: &str, value: f64, method: Method) -> ResultRow {
        ResultRow::new(&self.cfg.id, metric, value, method).at(self.variable, self.value)
    }

    fn mc_row(&self, metric: &str, s: &McStats, paired: Option<f64>, method: Method) -> ResultRow {
        let row = self
            .row(metric, s.mean, method)
            .sampled((s.ci_low, s.ci_high), s.n, self.cfg.mc.seed);
        match paired {
            Some(x) if !s.contains(x) => row.flagged(FLAG_CI_EXCLUDES),
            _ => row,
        }
    }
}

fn run_point(point: &Point<'_>, rows: &mut Vec<ResultRow>) -> Result<()> {
    let cfg = point.cfg;
    let params = cfg.params()?;
    for metric in &cfg.metrics {
        match metric {
            Metric::Energy => {
                let cf = closed_form_energy(&params, &cfg.errors)?;
                let mc = mc_energy(&params, &cfg.mc_config(false))?;
                let (lower, upper) = energy_bounds(&params);
                rows.push(point.row("energy", cf, Method::ClosedForm));
                rows.push(point.mc_row("energy", &mc, Some(cf), Method::MonteCarlo));
                rows.push(point.row("energy_lower_bound", lower, Method::Bound));
                rows.push(point.row("energy_upper_bound", upper, Method::Bound));
            }
            Metric::Se => {
                let cf = closed_form_se(&params, &cfg.errors)?;
                let mc = mc_ergodic_se(&params, &cfg.mc_config(false))?;
                if let Some(v) = cf {
                    rows.push(point.row("se", v, Method::ClosedForm));
                }
                rows.push(point.mc_row("se", &mc, cf, Method::MonteCarlo));
                rows.push(point.row("se_upper_bound", se_upper_bound(&params)?, Method::Bound));
            }
            Metric::FullCsi => {
                let cmp = mc_fullcsi(&params, &cfg.mc_config(false), &AltOptConfig::default())?;
                let factor = pilot_overhead_factor(params.n_passive(), cfg.pilot.t_c)?;
                let f = &cmp.full_csi;
                let with_pilots = McStats {
                    mean: f.mean * factor,
                    ci_low: f.ci_low * factor,
                    ci_high: f.ci_high * factor,
                    ..f.clone()
                };
                rows.push(point.mc_row("energy_proposed", &cmp.proposed, None, Method::MonteCarlo));
                rows.push(point.mc_row("energy_full_csi", f, None, Method::Baseline));
                rows.push(point.mc_row("energy_full_csi_pilot", &with_pilots, None, Method::Baseline));
            }
            Metric::Harvest => {
                let hm = cfg.harvest.model();
                let mc = mc_energy(&params, &cfg.mc_config(true))?;
                let harvested = mc
                    .samples
                    .expect("samples requested")
                    .into_iter()
                    .map(|e| nonlinear_harvest(e, &hm))
                    .collect::<riss_core::Result<Vec<_>>>()?;
                let s = McStats::from_samples(harvested, false);
                rows.push(point.mc_row("harvested_power", &s, None, Method::MonteCarlo));
            }
        }
    }
    Ok(())
}

/// All rows of a scenario, sweep points in configuration order.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    match cfg.sweep.variable {
        Some(var) if !cfg.sweep.values.is_empty() => {
            for &v in &cfg.sweep.values {
                let c = cfg.with_sweep(var, v)?;
                let point = Point {
                    cfg: &c,
                    variable: var.name(),
                    value: Some(v),
                };
                run_point(&point, &mut rows)?;
            }
        }
        _ => run_point(
            &Point {
                cfg,
                variable: "",
                value: None,
            },
            &mut rows,
        )?,
    }
    Ok(rows)
}

/// Runs the scenario and writes `<out_dir>/<id>.csv`.
pub fn run_scenario_to(cfg: &ScenarioConfig, out_dir: &Path) -> Result<PathBuf> {
    let rows = run_scenario(cfg)?;
    let path = out_dir.join(format!("{}.csv", cfg.id));
    write_csv(&path, &rows)?;
    Ok(path)
}

/// Closed-form rows only, no sampling.
pub fn analyze(cfg: &ScenarioConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut one = |c: &ScenarioConfig, variable: &str, value: Option<f64>| -> Result<()> {
        let params = c.params()?;
        let point = Point {
            cfg: c,
            variable,
            value,
        };
        let (lower, upper) = energy_bounds(&params);
        rows.push(point.row("energy", closed_form_energy(&params, &c.errors)?, Method::ClosedForm));
        rows.push(point.row("energy_lower_bound", lower, Method::Bound));
        rows.push(point.row("energy_upper_bound", upper, Method::Bound));
        if let Some(se) = closed_form_se(&params, &c.errors)? {
            rows.push(point.row("se", se, Method::ClosedForm));
        }
        rows.push(point.row("se_upper_bound", se_upper_bound(&params)?, Method::Bound));
        if let Some(g) = energy_law(&params, &c.errors) {
            rows.push(point.row("gamma_alpha", g.alpha, Method::ClosedForm));
            rows.push(point.row("gamma_beta", g.beta, Method::ClosedForm));
        }
        Ok(())
    };
    match cfg.sweep.variable {
        Some(var) if !cfg.sweep.values.is_empty() => {
            for &v in &cfg.sweep.values {
                one(&cfg.with_sweep(var, v)?, var.name(), Some(v))?;
            }
        }
        _ => one(cfg, "", None)?,
    }
    Ok(rows)
}
