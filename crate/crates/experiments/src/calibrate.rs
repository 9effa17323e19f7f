//! DOA error statistics and refitting of the angle-to-phase rates.

use std::f64::consts::FRAC_PI_3;

use riss_core::analytics::{expected_energy_doa_error, DoaErrorModel, Eta};
use riss_core::doa::{collect_error_stats, fit_eta, DoaTrialConfig, EtaCurve, EtaCurvePoint, EtaFit, EtaSearch};
use riss_core::geometry::{ArrayGeometry, SystemParams};
use riss_core::montecarlo::{mc_energy, ErrorInjection, McConfig};

use crate::error::Result;
use crate::output::{Method, ResultRow};

/// Error statistics of the L-array estimator over `na` and `κ`.
pub fn doa_calibrate(
    na_values: &[usize],
    kappas: &[f64],
    snr_db: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &kappa in kappas {
        let id = format!("doa_kappa{kappa}");
        for &na in na_values {
            let geometry = ArrayGeometry::new(4, 10, 10, na)?;
            let cfg = DoaTrialConfig {
                kappa,
                snr_db,
                n_trials: trials,
                seed,
                ..DoaTrialConfig::default()
            };
            let s = collect_error_stats(&geometry, &cfg)?;
            let n = s.n();
            let metrics = [
                ("error_mean_u", s.mean.0),
                ("error_mean_v", s.mean.1),
                ("error_std_u", s.std.0),
                ("error_std_v", s.std.1),
                ("ks_normal_u", s.ks.0),
                ("ks_normal_v", s.ks.1),
            ];
            for (metric, value) in metrics {
                let mut row = ResultRow::new(&id, metric, value, Method::MonteCarlo).at("na", Some(na as f64));
                row.n_trials = Some(n);
                row.seed = Some(seed);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Monte Carlo energy curve over angle-domain deviations applied equally
/// to every angle, with random true directions in `[-π/3, π/3]`.
pub fn eta_curve(params: &SystemParams, sigmas: &[f64], trials: usize, seed: u64) -> Result<EtaCurve> {
    let mut points = Vec::with_capacity(sigmas.len());
    for &s in sigmas {
        let err = DoaErrorModel::angle(s, s, s);
        let mc = McConfig {
            n_trials: trials,
            seed,
            error_injection: ErrorInjection::Angle {
                model: err,
                angle_range: (-FRAC_PI_3, FRAC_PI_3),
            },
            keep_samples: false,
        };
        points.push(EtaCurvePoint {
            err,
            energy: mc_energy(params, &mc)?.mean,
        });
    }
    Ok(EtaCurve {
        params: params.clone(),
        points,
    })
}

/// Single- and four-antenna curves at `N = 100`, `κ = 10`.
pub fn reference_curves(sigmas: &[f64], trials: usize, seed: u64) -> Result<(EtaCurve, EtaCurve)> {
    let base = SystemParams {
        kappa_g: 10.0,
        kappa_h: 10.0,
        ..SystemParams::default()
    };
    let siso = SystemParams {
        geometry: ArrayGeometry::new(1, 10, 10, 0)?,
        ..base.clone()
    };
    let miso = SystemParams {
        geometry: ArrayGeometry::new(4, 10, 10, 0)?,
        ..base
    };
    Ok((
        eta_curve(&siso, sigmas, trials, seed)?,
        eta_curve(&miso, sigmas, trials, seed)?,
    ))
}

/// `σ ∈ [0, 0.05]` rad in `k` even steps.
pub fn sigma_grid(k: usize) -> Vec<f64> {
    (0..k).map(|i| 0.05 * i as f64 / (k - 1).max(1) as f64).collect()
}

/// Mean relative error of the closed form with rates `eta` over a curve.
pub fn curve_error(curve: &EtaCurve, eta: Eta) -> Result<f64> {
    let mut acc = 0.0;
    for p in &curve.points {
        let e = expected_energy_doa_error(&curve.params, &DoaErrorModel { eta, ..p.err })?;
        acc += (e / p.energy - 1.0).abs();
    }
    Ok(acc / curve.points.len() as f64)
}

pub fn refit(siso: &EtaCurve, miso: &EtaCurve) -> Result<EtaFit> {
    Ok(fit_eta(siso, miso, &EtaSearch::default(), expected_energy_doa_error)?)
}
