use riss_core::analytics::{expected_energy_doa_error, DoaErrorModel, Eta};
use riss_core::geometry::SystemParams;
use riss_core::to_db;
use riss_experiments::calibrate::{curve_error, eta_curve, sigma_grid};
use riss_experiments::config::{Metric, ScenarioConfig, SweepVariable};
use riss_experiments::figures::{figure_rows, reproduce, FigureOptions};
use riss_experiments::output::{Method, ResultRow, FLAG_CI_EXCLUDES};
use riss_experiments::scenario::{run_scenario, run_scenario_to};
use riss_experiments::ExperimentError;

fn value(rows: &[ResultRow], id: &str, metric: &str, method: Method, at: f64) -> f64 {
    rows.iter()
        .find(|r| r.scenario_id == id && r.metric == metric && r.method == method && r.sweep_value == Some(at))
        .unwrap_or_else(|| panic!("missing {id} {metric} at {at}"))
        .value
}

#[test]
fn default_energy_pairs_closed_form_with_mc() {
    let cfg = ScenarioConfig::default();
    let rows = run_scenario(&cfg).unwrap();
    let rho = cfg.params().unwrap().cascade_loss();
    let cf = rows
        .iter()
        .find(|r| r.metric == "energy" && r.method == Method::ClosedForm)
        .unwrap();
    assert!((cf.value / (10150.0 * rho) - 1.0).abs() < 1e-12);
    let mc = rows
        .iter()
        .find(|r| r.metric == "energy" && r.method == Method::MonteCarlo)
        .unwrap();
    assert!(mc.ci_low.unwrap() <= cf.value && cf.value <= mc.ci_high.unwrap());
    assert_eq!(mc.flag, "");
    assert_eq!(mc.n_trials, Some(10_000));
    assert!(rows
        .iter()
        .all(|r| r.sweep_variable.is_empty() && r.sweep_value.is_none()));
}

#[test]
fn multi_antenna_gain_tracks_kappa_g() {
    let kappas = [0.0, 1.0, 3.0, 10.0];
    let mut rows = Vec::new();
    for kg in [0.0, 1.0] {
        for m in [1usize, 4] {
            let mut c = ScenarioConfig {
                id: format!("kg{kg}_m{m}"),
                ..ScenarioConfig::default()
            };
            c.geometry.m = m;
            c.channel.kappa_g = kg;
            c.mc.trials = 2000;
            c.sweep.variable = Some(SweepVariable::KappaH);
            c.sweep.values = kappas.to_vec();
            rows.extend(run_scenario(&c).unwrap());
        }
    }
    for kh in kappas {
        let gap = |kg: f64| {
            to_db(
                value(&rows, &format!("kg{kg}_m4"), "energy", Method::ClosedForm, kh)
                    / value(&rows, &format!("kg{kg}_m1"), "energy", Method::ClosedForm, kh),
            )
        };
        assert!(gap(0.0).abs() < 1e-9, "kh={kh}");
        if kh >= 3.0 {
            assert!((gap(1.0) - 6.02).abs() < 0.2, "kh={kh}: {}", gap(1.0));
        }
    }
}

#[test]
fn flags_mark_intervals_that_miss() {
    let mut cfg = ScenarioConfig::default();
    cfg.mc.trials = 20_000;
    cfg.channel.kappa_h = 10.0;
    cfg.channel.kappa_g = 10.0;
    cfg.metrics = vec![Metric::Energy, Metric::Se];
    let rows = run_scenario(&cfg).unwrap();
    assert!(rows.iter().all(|r| r.flag.is_empty()));

    // a closed form with the wrong rates should be caught
    cfg.errors.kind = riss_experiments::config::ErrorKind::Angle;
    cfg.errors.sigma_doa_h = 0.05;
    cfg.errors.sigma_doa_g = 0.05;
    cfg.errors.sigma_doa_p = 0.05;
    cfg.errors.eta_u = 0.1;
    cfg.errors.eta_v = 0.1;
    cfg.metrics = vec![Metric::Energy];
    let rows = run_scenario(&cfg).unwrap();
    let mc = rows.iter().find(|r| r.method == Method::MonteCarlo).unwrap();
    assert_eq!(mc.flag, FLAG_CI_EXCLUDES);
}

#[test]
fn config_file_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[mc]\ntrials = -3\n").unwrap();
    let err = ScenarioConfig::from_path(&path).unwrap_err();
    assert!(
        matches!(&err, ExperimentError::Config { path, .. } if path == "mc.trials"),
        "{err}"
    );

    std::fs::write(&path, "[errors]\nkind = \"sometimes\"\n").unwrap();
    let err = ScenarioConfig::from_path(&path).unwrap_err();
    assert!(err.to_string().contains("errors.kind"), "{err}");

    std::fs::write(&path, "[channel]\nkappa_h = -1.0\n").unwrap();
    assert!(ScenarioConfig::from_path(&path).is_err());
}

#[test]
fn csv_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig {
        id: "repro".into(),
        ..ScenarioConfig::default()
    };
    cfg.mc.trials = 500;
    cfg.metrics = vec![Metric::Energy, Metric::Harvest];
    cfg.sweep.variable = Some(SweepVariable::PEDbm);
    cfg.sweep.values = vec![20.0, 30.0];
    let a = std::fs::read(run_scenario_to(&cfg, &dir.path().join("a")).unwrap()).unwrap();
    let b = std::fs::read(run_scenario_to(&cfg, &dir.path().join("b")).unwrap()).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text
        .starts_with("scenario_id,sweep_variable,sweep_value,metric,value,ci_low,ci_high,n_trials,seed,method,flag\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 5);
}

#[test]
fn unknown_figure_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let err = reproduce("fig2", &FigureOptions::default(), dir.path()).unwrap_err();
    assert!(matches!(err, ExperimentError::UnknownFigure(_)));
}

#[test]
fn pilot_cost_gives_full_csi_an_interior_optimum() {
    let rows = figure_rows("fig8", &FigureOptions { trials: 40, seed: 3 }).unwrap();
    let curve: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.scenario_id == "fig8_kappa10" && r.metric == "energy_full_csi_pilot")
        .map(|r| (r.sweep_value.unwrap(), r.value))
        .collect();
    let (best, _) = curve
        .iter()
        .copied()
        .fold((0.0, f64::MIN), |acc, p| if p.1 > acc.1 { p } else { acc });
    let first = curve.first().unwrap().0;
    let last = curve.last().unwrap().0;
    assert!(best > first && best < last, "optimum at side {best}");
    let side = last;
    let proposed = value(&rows, "fig8_kappa10", "energy_proposed", Method::MonteCarlo, side);
    let full = value(&rows, "fig8_kappa10", "energy_full_csi_pilot", Method::Baseline, side);
    assert!(proposed > full);
}

#[test]
fn required_power_rises_as_outage_target_shrinks() {
    let rows = figure_rows("fig10", &FigureOptions { trials: 200, seed: 2 }).unwrap();
    let ids: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.scenario_id.as_str()).collect();
    for id in ids {
        let p: Vec<f64> = [0.1, 0.05, 0.01, 0.001]
            .iter()
            .map(|&q| value(&rows, id, "required_power_dbm", Method::ClosedForm, q))
            .collect();
        assert!(p.windows(2).all(|w| w[1] > w[0]), "{id}: {p:?}");
    }
}

#[test]
fn reference_rates_reproduce_mc_curves() {
    let base = SystemParams {
        kappa_g: 10.0,
        kappa_h: 10.0,
        ..SystemParams::default()
    };
    let sigmas = sigma_grid(6);
    let curve = eta_curve(&base, &sigmas, 4000, 12).unwrap();
    let err = curve_error(&curve, Eta::default()).unwrap();
    assert!(err < 0.05, "mean relative error {err}");

    let worst = expected_energy_doa_error(&base, &DoaErrorModel::angle(0.05, 0.05, 0.05)).unwrap();
    let last = curve.points.last().unwrap().energy;
    assert!((worst / last - 1.0).abs() < 0.1, "{worst} vs {last}");
}
