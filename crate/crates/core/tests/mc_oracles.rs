//! Monte Carlo cross-checks of the closed forms.

use riss_core::analytics::{
    energy_variance_perfect, expected_energy_doa_error, expected_energy_perfect, expected_energy_phase_error,
    gaussian_dirichlet_sum, gaussian_dirichlet_sum4, se_upper_bound, DoaErrorModel,
};
use riss_core::distribution::{ergodic_se, gamma_params_doa, gamma_params_perfect};
use riss_core::doa::ks_distance;
use riss_core::geometry::{ArrayGeometry, PathLossModel, SystemParams};
use riss_core::montecarlo::{mc_energy, mc_ergodic_se, ErrorInjection, McConfig};
use riss_core::rng::{substream, StreamRole};
use riss_core::C64;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::{FRAC_PI_3, PI};

fn params(m: usize, nx: usize, ny: usize, k: f64) -> SystemParams {
    SystemParams {
        geometry: ArrayGeometry::new(m, nx, ny, 0).unwrap(),
        kappa_g: k,
        kappa_h: k,
        ..SystemParams::default()
    }
}

fn unit_loss(mut p: SystemParams) -> SystemParams {
    p.pathloss = PathLossModel {
        ref_loss_db: 0.0,
        exponent: 0.0,
        ..PathLossModel::default()
    };
    p
}

/// Standard error of the sample variance from the fourth central moment.
fn variance_std_error(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    (m2 * n / (n - 1.0), ((m4 - m2 * m2) / n).sqrt())
}

#[test]
fn mean_energy_matches_closed_form_within_one_percent() {
    let p = unit_loss(params(4, 10, 10, 1.0));
    let s = mc_energy(
        &p,
        &McConfig {
            n_trials: 100_000,
            seed: 11,
            ..McConfig::default()
        },
    )
    .unwrap();
    assert!((s.mean / 10150.0 - 1.0).abs() < 0.01, "{}", s.mean);
    assert!(s.contains(expected_energy_perfect(&p)) || (s.mean - 10150.0).abs() < 3.0 * s.std_error);
}

#[test]
fn energy_variance_matches_exact_expression() {
    for (m, side, k) in [(4, 10, 1.0), (2, 6, 0.0), (4, 6, 10.0), (3, 5, 0.5)] {
        let p = unit_loss(params(m, side, side, k));
        let s = mc_energy(
            &p,
            &McConfig {
                n_trials: 100_000,
                seed: 3,
                keep_samples: true,
                ..McConfig::default()
            },
        )
        .unwrap();
        let (var, se) = variance_std_error(s.samples.as_ref().unwrap());
        let exact = energy_variance_perfect(&p);
        assert!(
            (var - exact).abs() < 3.0 * se,
            "m={m} side={side} k={k}: {var} vs {exact} (se {se})"
        );
    }
}

#[test]
fn rayleigh_cascade_shape() {
    // |Σ_n h_n g_n|² with i.i.d. CN(0,1) factors
    let n = 100;
    let trials = 100_000;
    let mut x = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let mut r = substream(8, t, StreamRole::ChannelH);
        let s: C64 = (0..n)
            .map(|_| riss_core::rng::cscg(&mut r) * riss_core::rng::cscg(&mut r))
            .sum();
        x.push(s.norm_sqr());
    }
    let (var, _) = variance_std_error(&x);
    let mean = x.iter().sum::<f64>() / trials as f64;
    let alpha_mc = mean * mean / var;
    let g = gamma_params_perfect(&params(1, 10, 10, 0.0)).unwrap();
    assert!((g.alpha - 100.0 / 102.0).abs() < 1e-12);
    assert!((alpha_mc - g.alpha).abs() < 0.03, "{alpha_mc}");
}

#[test]
fn dirichlet_sums_match_sampled_moments() {
    let mut rng = substream(21, 0, StreamRole::PhaseErrors);
    for case in 0..20u64 {
        let sigma = rng.random_range(0.0..PI / 4.0);
        let n = rng.random_range(2..=16usize);
        let normal = Normal::new(0.0, sigma.max(1e-300)).unwrap();
        let mut r = substream(22, case, StreamRole::PhaseErrors);
        let trials = 50_000;
        let (mut s2, mut s2sq, mut s4, mut s4sq) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..trials {
            let xi: f64 = if sigma == 0.0 { 0.0 } else { normal.sample(&mut r) };
            let a: C64 = (0..n).map(|m| C64::from_polar(1.0, m as f64 * xi)).sum();
            let p2 = a.norm_sqr();
            s2 += p2;
            s2sq += p2 * p2;
            s4 += p2 * p2;
            s4sq += p2.powi(4);
        }
        let tf = trials as f64;
        let (m2, m4) = (s2 / tf, s4 / tf);
        let se2 = ((s2sq / tf - m2 * m2) / tf).sqrt();
        let se4 = ((s4sq / tf - m4 * m4) / tf).sqrt();
        let a2 = gaussian_dirichlet_sum(sigma * sigma, n);
        let a4 = gaussian_dirichlet_sum4(sigma * sigma, n);
        assert!((m2 - a2).abs() <= 3.0 * se2 + 1e-9 * a2, "case {case}: {m2} vs {a2}");
        assert!((m4 - a4).abs() <= 3.0 * se4 + 1e-9 * a4, "case {case}: {m4} vs {a4}");
    }
}

#[test]
fn phase_error_mean_matches_simulation() {
    let p = unit_loss(params(1, 8, 8, 3.0));
    let mut err = DoaErrorModel::uniform_phase(0.05 * PI);
    err.sigma_gz = 0.0;
    let mc = McConfig {
        n_trials: 100_000,
        seed: 5,
        error_injection: ErrorInjection::Phase(err),
        ..McConfig::default()
    };
    let s = mc_energy(&p, &mc).unwrap();
    let e = expected_energy_phase_error(&p, &err).unwrap();
    assert!((s.mean / e - 1.0).abs() < 0.02, "{} vs {e}", s.mean);

    let p4 = unit_loss(params(4, 6, 6, 2.0));
    let err = DoaErrorModel::uniform_phase(0.1);
    let s = mc_energy(
        &p4,
        &McConfig {
            error_injection: ErrorInjection::Phase(err),
            ..mc
        },
    )
    .unwrap();
    let e = expected_energy_phase_error(&p4, &err).unwrap();
    assert!((s.mean - e).abs() < 4.0 * s.std_error, "{} vs {e}", s.mean);
}

#[test]
fn angle_error_model_tracks_simulation() {
    let p = unit_loss(params(4, 10, 10, 10.0));
    let err = DoaErrorModel::angle(0.02, 0.02, 0.02);
    let mc = McConfig {
        n_trials: 40_000,
        seed: 6,
        error_injection: ErrorInjection::Angle {
            model: err,
            angle_range: (-FRAC_PI_3, FRAC_PI_3),
        },
        ..McConfig::default()
    };
    let s = mc_energy(&p, &mc).unwrap();
    let e = expected_energy_doa_error(&p, &err).unwrap();
    assert!((s.mean / e - 1.0).abs() < 0.05, "{} vs {e}", s.mean);
}

#[test]
fn gamma_fits_pass_ks() {
    for side in [6, 10] {
        let p = params(4, side, side, 10.0);
        let g = gamma_params_perfect(&p).unwrap();
        let s = mc_energy(
            &p,
            &McConfig {
                n_trials: 100_000,
                seed: 7,
                keep_samples: true,
                ..McConfig::default()
            },
        )
        .unwrap();
        let ks = ks_distance(s.samples.as_ref().unwrap(), |x| g.cdf(x));
        assert!(ks < 0.05, "N={} ks={ks}", side * side);
    }
    let p = params(4, 10, 10, 10.0);
    let err = DoaErrorModel::uniform_phase(0.01 * PI);
    let g = gamma_params_doa(&p, &err).unwrap();
    let s = mc_energy(
        &p,
        &McConfig {
            n_trials: 100_000,
            seed: 7,
            keep_samples: true,
            error_injection: ErrorInjection::Phase(err),
        },
    )
    .unwrap();
    let ks = ks_distance(s.samples.as_ref().unwrap(), |x| g.cdf(x));
    assert!(ks < 0.05, "ks={ks}");
}

#[test]
fn ergodic_se_matches_simulation_and_bound() {
    let p = params(4, 10, 10, 10.0);
    let se = ergodic_se(&p, p.p_i_watts, p.noise_sigma2_watts).unwrap();
    let mc = mc_ergodic_se(
        &p,
        &McConfig {
            n_trials: 50_000,
            seed: 9,
            ..McConfig::default()
        },
    )
    .unwrap();
    let bound = se_upper_bound(&p).unwrap();
    assert!((se / mc.mean - 1.0).abs() < 0.01, "{se} vs {}", mc.mean);
    assert!(se <= bound && mc.mean <= bound);
    assert!(bound - mc.mean < 0.1);
}
