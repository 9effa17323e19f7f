//! Desk-scale recipes for the figure data sets.
//!
//! Each recipe fixes the reference setup and sweeps the parameter its
//! figure varies. Ranges the figures leave open are chosen here and are
//! easy to change by running the same sweep through a scenario file.

use std::path::{Path, PathBuf};

use riss_core::analytics::DoaErrorModel;
use riss_core::beamforming::AltOptConfig;
use riss_core::distribution::{
    gamma_params_doa, gamma_params_perfect, required_transmit_power_with, QuantileConvention,
};
use riss_core::geometry::SystemParams;
use riss_core::montecarlo::{
    mc_energy, mc_fullcsi, nonlinear_harvest, wilson_interval, ErrorInjection, McConfig, McStats,
};

use crate::calibrate::doa_calibrate;
use crate::config::{ErrorKind, Metric, ScenarioConfig, SweepVariable};
use crate::error::{ExperimentError, Result};
use crate::output::{write_csv, Method, ResultRow};
use crate::scenario::run_scenario;

pub const FIGURES: [&str; 8] = ["fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureOptions {
    pub trials: usize,
    pub seed: u64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self { trials: 2000, seed: 1 }
    }
}

fn base(id: String, opts: &FigureOptions) -> ScenarioConfig {
    let mut c = ScenarioConfig {
        id,
        ..ScenarioConfig::default()
    };
    c.mc.trials = opts.trials;
    c.mc.seed = opts.seed;
    c
}

fn sweep(mut c: ScenarioConfig, var: SweepVariable, values: &[f64], metrics: &[Metric]) -> ScenarioConfig {
    c.sweep.variable = Some(var);
    c.sweep.values = values.to_vec();
    c.metrics = metrics.to_vec();
    c
}

fn kappa_tag(k: f64) -> String {
    if k.is_infinite() {
        "inf".into()
    } else {
        format!("{k}")
    }
}

/// DOA error statistics over the number of active elements and `κ`.
fn fig3(opts: &FigureOptions) -> Result<Vec<ResultRow>> {
    doa_calibrate(&[7, 13, 19], &[1.0, 10.0], 10.0, opts.trials.max(100), opts.seed)
}

/// Energy under angle-domain errors, single and four antennas, `κ = 10`.
fn fig4(opts: &FigureOptions) -> Result<Vec<ResultRow>> {
    let sigmas: Vec<f64> = (0..=10).map(|i| 0.005 * i as f64).collect();
    let mut rows = Vec::new();
    for m in [1usize, 4] {
        let mut c = base(format!("fig4_m{m}"), opts);
        c.geometry.m = m;
        c.channel.kappa_h = 10.0;
        c.channel.kappa_g = 10.0;
        c.errors.kind = ErrorKind::Angle;
        rows.extend(run_scenario(&sweep(
            c,
            SweepVariable::SigmaDoa,
            &sigmas,
            &[Metric::Energy],
        ))?);
    }
    Ok(rows)
}

/// Energy and spectral efficiency against `κ_h`.
fn fig5(opts: &FigureOptions) -> Result<Vec<ResultRow>> {
    let kappas: Vec<f64> = (0..=10).map(f64::from).collect();
    let mut rows = Vec::new();
    for kg in [0.0, 1.0, 10.0] {
        for m in [1usize, 4] {
            let mut c = base(format!("fig5_kg{kg}_m{m}"), opts);
            c.geometry.m = m;
            c.channel.kappa_g = kg;
            rows.extend(run_scenario(&sweep(
                c,
                SweepVariable::KappaH,
                &kappas,
                &[Metric::Energy, Metric::Se],
            ))?);
        }
    }
    Ok(rows)
}

const DISTANCES: [f64; 9] = [4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0];
const KAPPAS: [f64; 4] = [0.0, 1.0, 10.0, f64::INFINITY];

/// Harvested power through the logistic circuit against HAP distance.
fn fig6(opts: &FigureOptions) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for k in KAPPAS {
        let mut c = base(format!("fig6_kappa{}", kappa_tag(k)), opts);
        c.channel.kappa_h = k;
        c.channel.kappa_g = k;
        let hm = c.harvest.model();
        for d in DISTANCES {
            let point = c.with_sweep(SweepVariable::DHapRissM, d)?;
            let cmp = mc_fullcsi(&point.params()?, &point.mc_config(true), &AltOptConfig::default())?;
            for (metric, stats, method) in [
                ("harvested_power_proposed", &cmp.proposed, Method::MonteCarlo),
                ("harvested_power_full_csi", &cmp.full_csi, Method::Baseline),
            ] {
                let h = stats
                    .samples
                    .as_ref()
                    .expect("samples requested")
                    .iter()
                    .map(|e| nonlinear_harvest(*e, &hm))
                    .collect::<riss_core::Result<Vec<_>>>()?;
                let s = McStats::from_samples(h, false);
                rows.push(
                    ResultRow::new(&c.id, metric, s.mean, method)
                        .at("d_hap_riss_m", Some(d))
                        .sampled((s.ci_low, s.ci_high), s.n, opts.seed),
                );
            }
        }
    }
    Ok(rows)
}

/// Proposed design against the full-CSI baseline over HAP distance.
fn fig7(opts: &FigureOptions) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for k in KAPPAS {
        let mut c = base(format!("fig7_kappa{}", kappa_tag(k)), opts);
        c.channel.kappa_h = k;
        c.channel.kappa_g = k;
        rows.extend(run_scenario(&sweep(
            c,
            SweepVariable::DHapRissM,
            &DISTANCES,
            &[Metric::FullCsi],
        ))?);
    }
    Ok(rows)
}

/// Surface size sweep with the pilot cost of the full-CSI baseline.
fn fig8(opts: &FigureOptions) -> Result<Vec<ResultRow>> {
    let sides: Vec<f64> = (4..=15).map(f64::from).collect();
    let mut rows = Vec::new();
    for k in [1.0, 10.0] {
        let mut c = base(format!("fig8_kappa{k}"), opts);
        c.channel.kappa_h = k;
        c.channel.kappa_g = k;
        rows.extend(run_scenario(&sweep(
            c,
            SweepVariable::NSide,
            &sides,
            &[Metric::FullCsi],
        ))?);
    }
    Ok(rows)
}

fn outage_rows(
    id: &str,
    params: &SystemParams,
    law: impl Fn(f64) -> f64,
    injection: ErrorInjection,
    thresholds_dbm: &[f64],
    opts: &FigureOptions,
    rows: &mut Vec<ResultRow>,
) -> Result<()> {
    let mc = McConfig {
        n_trials: opts.trials,
        seed: opts.seed,
        error_injection: injection,
        keep_samples: true,
    };
    let samples = mc_energy(params, &mc)?.samples.expect("samples requested");
    for &t in thresholds_dbm {
        let tw = riss_core::dbm_to_watts(t);
        let below = samples.iter().filter(|e| **e < tw).count();
        rows.push(ResultRow::new(id, "outage", law(tw), Method::ClosedForm).at("threshold_dbm", Some(t)));
        let p = below as f64 / samples.len() as f64;
        let ci = wilson_interval(below, samples.len());
        let mut row = ResultRow::new(id, "outage", p, Method::MonteCarlo)
            .at("threshold_dbm", Some(t))
            .sampled(ci, samples.len(), opts.seed);
        if law(tw) < ci.0 || law(tw) > ci.1 {
            row = row.flagged(crate::output::FLAG_CI_EXCLUDES);
        }
        rows.push(row);
    }
    Ok(())
}

/// Outage against the energy threshold, `κ = 10`.
fn fig9(opts: &FigureOptions) -> Result<Vec<ResultRow>> {
    let thresholds: Vec<f64> = (0..=12).map(|i| -30.0 + i as f64).collect();
    let mut rows = Vec::new();
    for (m, side) in [(1usize, 10usize), (4, 6), (4, 10)] {
        let mut c = base(format!("fig9_m{m}_n{}", side * side), opts);
        c.geometry.m = m;
        c.geometry.nx = side;
        c.geometry.ny = side;
        c.channel.kappa_h = 10.0;
        c.channel.kappa_g = 10.0;
        let params = c.params()?;
        let g = gamma_params_perfect(&params)?;
        outage_rows(
            &c.id,
            &params,
            |t| g.cdf(t),
            ErrorInjection::None,
            &thresholds,
            opts,
            &mut rows,
        )?;
    }
    for (tag, sigma) in [("0.01pi", 0.01), ("0.015pi", 0.015)] {
        let mut c = base(format!("fig9_doa{tag}"), opts);
        c.channel.kappa_h = 10.0;
        c.channel.kappa_g = 10.0;
        let params = c.params()?;
        let err = DoaErrorModel::uniform_phase(sigma * std::f64::consts::PI);
        let g = gamma_params_doa(&params, &err)?;
        outage_rows(
            &c.id,
            &params,
            |t| g.cdf(t),
            ErrorInjection::Phase(err),
            &thresholds,
            opts,
            &mut rows,
        )?;
    }
    Ok(rows)
}

/// Required transmit power against the outage target, `κ_G = 10`,
/// `T = −22 dBm`, with a Monte Carlo check of the achieved outage.
fn fig10(opts: &FigureOptions) -> Result<Vec<ResultRow>> {
    let t_dbm = -22.0;
    let t = riss_core::dbm_to_watts(t_dbm);
    let mut rows = Vec::new();
    for (m, side, kh) in [(4usize, 10usize, 10.0), (1, 10, 10.0), (4, 6, 10.0), (4, 10, 1.0)] {
        let mut c = base(format!("fig10_m{m}_n{}_kh{kh}", side * side), opts);
        c.geometry.m = m;
        c.geometry.nx = side;
        c.geometry.ny = side;
        c.channel.kappa_h = kh;
        c.channel.kappa_g = 10.0;
        let params = c.params()?;
        for p_out in [0.1, 0.05, 0.01, 0.001] {
            let plan = required_transmit_power_with(&params, t, p_out, QuantileConvention::OutageQuantile)?;
            let dbm = riss_core::to_db(plan.power_watts) + 30.0;
            rows.push(ResultRow::new(&c.id, "required_power_dbm", dbm, Method::ClosedForm).at("p_out", Some(p_out)));
            let scaled = SystemParams {
                p_e_watts: plan.power_watts,
                ..params.clone()
            };
            let mc = McConfig {
                n_trials: opts.trials,
                seed: opts.seed,
                error_injection: ErrorInjection::None,
                keep_samples: true,
            };
            let e = mc_energy(&scaled, &mc)?.samples.expect("samples requested");
            let below = e.iter().filter(|x| **x < t).count();
            rows.push(
                ResultRow::new(
                    &c.id,
                    "outage_at_required_power",
                    below as f64 / e.len() as f64,
                    Method::MonteCarlo,
                )
                .at("p_out", Some(p_out))
                .sampled(wilson_interval(below, e.len()), e.len(), opts.seed),
            );
        }
    }
    Ok(rows)
}

/// Rows of one figure.
pub fn figure_rows(id: &str, opts: &FigureOptions) -> Result<Vec<ResultRow>> {
    match id {
        "fig3" => fig3(opts),
        "fig4" => fig4(opts),
        "fig5" => fig5(opts),
        "fig6" => fig6(opts),
        "fig7" => fig7(opts),
        "fig8" => fig8(opts),
        "fig9" => fig9(opts),
        "fig10" => fig10(opts),
        other => Err(ExperimentError::UnknownFigure(other.to_string())),
    }
}

/// Writes `<out_dir>/<id>.csv` for one figure, or for every figure when
/// `id` is `all`.
pub fn reproduce(id: &str, opts: &FigureOptions, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let ids: Vec<&str> = if id == "all" { FIGURES.to_vec() } else { vec![id] };
    let mut paths = Vec::new();
    for fig in ids {
        let rows = figure_rows(fig, opts)?;
        let path = out_dir.join(format!("{fig}.csv"));
        write_csv(&path, &rows)?;
        paths.push(path);
    }
    Ok(paths)
}
