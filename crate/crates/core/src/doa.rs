//! L-array snapshot synthesis, per-arm ROOT-MUSIC, error statistics and the
//! staged fit of the angle-error rates `η`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analytics::{DoaErrorModel, Eta};
use crate::error::{invalid, Error, Result};
use crate::geometry::{
    angles_to_phases, rician_weights, wrap_phase, AngleSet, ArrayGeometry, SpatialPhases, SystemParams,
};
use crate::rng::{cscg, substream, StreamRole};
use crate::C64;

/// Samples of the two sensing arms; rows are snapshots, columns elements
/// (the shared corner is column 0 of both arms).
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub x_arm: DMatrix<C64>,
    pub y_arm: DMatrix<C64>,
    pub true_phases: SpatialPhases,
    pub snr_db: f64,
}

/// Snapshots of one block-fading user channel seen by the active L-array.
///
/// The channel is drawn once per set; every snapshot multiplies it by a
/// random unit-modulus symbol and adds CSCG noise. `snr_db` is the LoS power
/// per element over the noise power; `+∞` gives noiseless samples and
/// `kappa = ∞` pure LoS.
pub fn synth_snapshots<R: Rng + ?Sized>(
    geometry: &ArrayGeometry,
    true_angles: &AngleSet,
    kappa: f64,
    snr_db: f64,
    n_snapshots: usize,
    rng: &mut R,
) -> Result<SnapshotSet> {
    let (lx, ly) = geometry.l_array_arms().ok_or(Error::NoActiveElements)?;
    if !(kappa > 0.0) {
        return Err(invalid(
            "kappa",
            "snapshot SNR is defined on the LoS power; need kappa > 0",
        ));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(invalid("snr_db", "must be a number above -inf"));
    }
    if n_snapshots == 0 {
        return Err(invalid("n_snapshots", "need at least one snapshot"));
    }
    let phases = angles_to_phases(true_angles);
    let (a_los, a_nlos) = rician_weights(kappa);
    let noise_std = if snr_db == f64::INFINITY {
        0.0
    } else {
        a_los / 10f64.powf(snr_db / 20.0)
    };
    let positions = geometry.active_positions();
    let channel: Vec<C64> = positions
        .iter()
        .map(|&(ix, iy)| {
            let los = C64::from_polar(a_los, ix as f64 * phases.u + iy as f64 * phases.v);
            los + cscg(rng) * a_nlos
        })
        .collect();
    let mut x_arm = DMatrix::zeros(n_snapshots, lx);
    let mut y_arm = DMatrix::zeros(n_snapshots, ly);
    // positions: x arm (ix, 0) for ix < lx, then y arm (0, iy) for 1 ≤ iy < ly
    for t in 0..n_snapshots {
        let symbol = C64::from_polar(1.0, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        let samples: Vec<C64> = channel.iter().map(|c| c * symbol + cscg(rng) * noise_std).collect();
        for ix in 0..lx {
            x_arm[(t, ix)] = samples[ix];
        }
        y_arm[(t, 0)] = samples[0];
        for iy in 1..ly {
            y_arm[(t, iy)] = samples[lx + iy - 1];
        }
    }
    Ok(SnapshotSet {
        x_arm,
        y_arm,
        true_phases: phases,
        snr_db,
    })
}

/// Forward–backward averaged sample covariance of the arm samples.
fn fb_covariance(arm: &DMatrix<C64>) -> DMatrix<C64> {
    let t = arm.nrows() as f64;
    let l = arm.ncols();
    let r = arm.transpose() * arm.conjugate() / C64::from(t);
    DMatrix::from_fn(l, l, |i, j| (r[(i, j)] + r[(l - 1 - i, l - 1 - j)].conj()) * 0.5)
}

/// Roots of `Σ_j poly[j] z^j` from the companion-matrix eigenvalues.
fn poly_roots(poly: &[C64]) -> Result<Vec<C64>> {
    let scale = poly.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut deg = poly.len() - 1;
    while deg > 0 && poly[deg].norm() <= 1e-14 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Err(Error::DegenerateCovariance("noise-subspace polynomial is constant"));
    }
    let lead = poly[deg];
    let companion = DMatrix::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -poly[deg - 1 - j] / lead
        } else if i == j + 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Schur::new(companion)
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .ok_or(Error::DegenerateCovariance("companion matrix did not triangularize"))
}

/// Single-source ROOT-MUSIC on one uniform linear arm.
///
/// Returns the phase increment in `[-π, π]` of the root inside the unit
/// circle that lies closest to it.
pub fn root_music_arm(arm_samples: &DMatrix<C64>) -> Result<f64> {
    let l = arm_samples.ncols();
    if l < 2 {
        return Err(invalid("arm_samples", "arm needs at least two elements"));
    }
    if arm_samples.nrows() == 0 {
        return Err(invalid("arm_samples", "need at least one snapshot"));
    }
    let r = fb_covariance(arm_samples);
    let power: f64 = (0..l).map(|i| r[(i, i)].re).sum();
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::DegenerateCovariance("all samples are zero"));
    }
    let eig = SymmetricEigen::new(r);
    let top = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty spectrum");
    let v: DVector<C64> = eig.eigenvectors.column(top).into_owned();
    // noise projector I - v vᴴ
    let proj = DMatrix::<C64>::identity(l, l) - &v * v.adjoint();
    // P(z) = Σ_k c_k z^{k+l-1}, c_k = Σ_i C_{i,i+k}
    let mut poly = vec![C64::new(0.0, 0.0); 2 * l - 1];
    for i in 0..l {
        for j in 0..l {
            poly[j + l - 1 - i] += proj[(i, j)];
        }
    }
    let roots = poly_roots(&poly)?;
    let inside = roots.iter().filter(|z| z.norm() <= 1.0 + 1e-9);
    let best = inside
        .chain(roots.iter())
        .min_by(|a, b| (a.norm() - 1.0).abs().total_cmp(&(b.norm() - 1.0).abs()))
        .expect("polynomial has roots");
    Ok(best.arg())
}

/// `(u, v)` from the x and y arms; `z` is left at zero.
pub fn estimate_doa_2d(snapshots: &SnapshotSet) -> Result<SpatialPhases> {
    Ok(SpatialPhases::new(
        root_music_arm(&snapshots.x_arm)?,
        root_music_arm(&snapshots.y_arm)?,
        0.0,
    ))
}

/// Phase-estimation errors over random directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    /// `(ξ_u, ξ_v)` per trial, wrapped to `[-π, π]`.
    pub samples: Vec<(f64, f64)>,
    pub mean: (f64, f64),
    pub std: (f64, f64),
    /// Kolmogorov–Smirnov distance to the moment-fitted normal, per axis.
    pub ks: (f64, f64),
}

impl ErrorStats {
    pub fn from_samples(samples: Vec<(f64, f64)>) -> Self {
        let u: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let v: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let (mu, su, ku) = moments_and_ks(&u);
        let (mv, sv, kv) = moments_and_ks(&v);
        Self {
            samples,
            mean: (mu, mv),
            std: (su, sv),
            ks: (ku, kv),
        }
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }
}

fn moments_and_ks(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let std = var.sqrt();
    (mean, std, ks_normal(x, mean, std))
}

/// Two-sided KS distance between the sample and `N(mean, std²)`.
pub fn ks_normal(x: &[f64], mean: f64, std: f64) -> f64 {
    let Ok(normal) = Normal::new(mean, std) else {
        return 0.0;
    };
    ks_distance(x, |v| normal.cdf(v))
}

/// Two-sided KS distance between the sample and a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(x: &[f64], cdf: F) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Settings for [`collect_error_stats`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoaTrialConfig {
    pub kappa: f64,
    pub snr_db: f64,
    /// True `φ` and `ϑ` are drawn uniformly from this interval.
    pub angle_range: (f64, f64),
    pub n_trials: usize,
    pub n_snapshots: usize,
    pub seed: u64,
}

impl Default for DoaTrialConfig {
    fn default() -> Self {
        Self {
            kappa: 10.0,
            snr_db: 10.0,
            angle_range: (-std::f64::consts::FRAC_PI_3, std::f64::consts::FRAC_PI_3),
            n_trials: 2000,
            n_snapshots: 64,
            seed: 1,
        }
    }
}

/// Runs `n_trials` independent estimates and gathers the `(u, v)` errors.
pub fn collect_error_stats(geometry: &ArrayGeometry, cfg: &DoaTrialConfig) -> Result<ErrorStats> {
    if cfg.n_trials < 100 {
        return Err(invalid("n_trials", "need at least 100 trials"));
    }
    let (lo, hi) = cfg.angle_range;
    if !(lo < hi) {
        return Err(invalid("angle_range", "empty interval"));
    }
    let samples = (0..cfg.n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut ar = substream(cfg.seed, t, StreamRole::TrueAngles);
            let angles = AngleSet::new(ar.random_range(lo..hi), ar.random_range(lo..hi), 0.0)?;
            let mut sr = substream(cfg.seed, t, StreamRole::Snapshots);
            let set = synth_snapshots(geometry, &angles, cfg.kappa, cfg.snr_db, cfg.n_snapshots, &mut sr)?;
            let est = estimate_doa_2d(&set)?;
            Ok((
                wrap_phase(est.u - set.true_phases.u),
                wrap_phase(est.v - set.true_phases.v),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorStats::from_samples(samples))
}

/// One Monte Carlo energy point at known angle-domain error deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaCurvePoint {
    pub err: DoaErrorModel,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaCurve {
    pub params: SystemParams,
    pub points: Vec<EtaCurvePoint>,
}

/// Search box and resolution for [`fit_eta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSearch {
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub z_range: (f64, f64),
    /// Grid points per axis at every level.
    pub points: usize,
    /// Zoom levels after the coarse pass.
    pub refinements: usize,
}

impl Default for EtaSearch {
    fn default() -> Self {
        Self {
            u_range: (0.05, 10.0),
            v_range: (0.05, 10.0),
            z_range: (0.05, 10.0),
            points: 41,
            refinements: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitFlag {
    /// The minimizer sits on the edge of the search box.
    Boundary(&'static str),
    /// The residual is flat around the minimizer.
    Plateau(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaFit {
    pub eta: Eta,
    /// Mean squared relative error of the single-antenna stage.
    pub residual_siso: f64,
    /// Mean squared relative error of the multi-antenna stage.
    pub residual_miso: f64,
    pub flags: Vec<FitFlag>,
}

fn residual<F>(curve: &EtaCurve, eta: Eta, model: &F) -> Result<f64>
where
    F: Fn(&SystemParams, &DoaErrorModel) -> Result<f64>,
{
    let mut acc = 0.0;
    for p in &curve.points {
        let err = DoaErrorModel { eta, ..p.err };
        let e = model(&curve.params, &err)?;
        acc += ((e - p.energy) / p.energy).powi(2);
    }
    Ok(acc / curve.points.len() as f64)
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Staged least-squares grid search.
///
/// The single-antenna curve fixes `(η_u, η_v)` by a 2D coarse-to-fine search;
/// those values are then frozen while a 1D search over the multi-antenna
/// curve fixes `η_z`. On a square surface `η_u` and `η_v` are
/// interchangeable, so the search is restricted to `η_u ≥ η_v`.
pub fn fit_eta<F>(siso: &EtaCurve, miso: &EtaCurve, search: &EtaSearch, model: F) -> Result<EtaFit>
where
    F: Fn(&SystemParams, &DoaErrorModel) -> Result<f64>,
{
    if siso.points.is_empty() || miso.points.is_empty() {
        return Err(invalid("mc_curves", "both stages need at least one point"));
    }
    if siso.points.iter().chain(&miso.points).any(|p| !(p.energy > 0.0)) {
        return Err(invalid("mc_curves", "energies must be positive"));
    }
    if search.points < 3 {
        return Err(invalid("points", "need at least 3 grid points per axis"));
    }
    for (name, (lo, hi)) in [
        ("u_range", search.u_range),
        ("v_range", search.v_range),
        ("z_range", search.z_range),
    ] {
        if !(lo > 0.0 && hi > lo) {
            return Err(invalid(name, "search interval must be positive and non-empty"));
        }
    }
    let square = siso.params.geometry.nx == siso.params.geometry.ny;
    let mut flags = Vec::new();

    // stage 1: (η_u, η_v)
    let (mut ul, mut uh) = search.u_range;
    let (mut vl, mut vh) = search.v_range;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut step = (0.0, 0.0);
    for _ in 0..=search.refinements {
        let us = grid(ul, uh, search.points);
        let vs = grid(vl, vh, search.points);
        for &u in &us {
            for &v in &vs {
                if square && u < v {
                    continue;
                }
                let r = residual(siso, Eta { u, v, z: 1.0 }, &model)?;
                if r < best.0 {
                    best = (r, u, v);
                }
            }
        }
        step = (
            (uh - ul) / (search.points - 1) as f64,
            (vh - vl) / (search.points - 1) as f64,
        );
        ul = (best.1 - 2.0 * step.0).max(search.u_range.0);
        uh = (best.1 + 2.0 * step.0).min(search.u_range.1);
        vl = (best.2 - 2.0 * step.1).max(search.v_range.0);
        vh = (best.2 + 2.0 * step.1).min(search.v_range.1);
    }
    let (res_siso, eta_u, eta_v) = best;
    if near_edge(eta_u, search.u_range, step.0) {
        flags.push(FitFlag::Boundary("eta_u"));
    }
    if near_edge(eta_v, search.v_range, step.1) {
        flags.push(FitFlag::Boundary("eta_v"));
    }
    let cu = |u: f64| u.clamp(search.u_range.0, search.u_range.1);
    let cv = |v: f64| v.clamp(search.v_range.0, search.v_range.1);
    let around = [
        (cu(eta_u + step.0), eta_v),
        (cu(eta_u - step.0), eta_v),
        (eta_u, cv(eta_v + step.1)),
        (eta_u, cv(eta_v - step.1)),
    ];
    let mut flat = true;
    for (u, v) in around {
        let r = residual(siso, Eta { u, v, z: 1.0 }, &model)?;
        flat &= (r - res_siso).abs() <= 1e-12 * res_siso.max(1e-300);
    }
    if flat {
        flags.push(FitFlag::Plateau("eta_u/eta_v"));
    }

    // stage 2: η_z with (η_u, η_v) frozen
    let (mut zl, mut zh) = search.z_range;
    let mut best_z = (f64::INFINITY, 0.0);
    let mut zstep = 0.0;
    for _ in 0..=search.refinements {
        for z in grid(zl, zh, search.points) {
            let r = residual(miso, Eta { u: eta_u, v: eta_v, z }, &model)?;
            if r < best_z.0 {
                best_z = (r, z);
            }
        }
        zstep = (zh - zl) / (search.points - 1) as f64;
        zl = (best_z.1 - 2.0 * zstep).max(search.z_range.0);
        zh = (best_z.1 + 2.0 * zstep).min(search.z_range.1);
    }
    let (res_miso, eta_z) = best_z;
    if near_edge(eta_z, search.z_range, zstep) {
        flags.push(FitFlag::Boundary("eta_z"));
    }
    let eta = Eta {
        u: eta_u,
        v: eta_v,
        z: eta_z,
    };
    let cz = |z: f64| z.clamp(search.z_range.0, search.z_range.1);
    let r_up = residual(
        miso,
        Eta {
            z: cz(eta_z + zstep),
            ..eta
        },
        &model,
    )?;
    let r_dn = residual(
        miso,
        Eta {
            z: cz(eta_z - zstep),
            ..eta
        },
        &model,
    )?;
    if (r_up - res_miso).abs() <= 1e-12 * res_miso.max(1e-300)
        && (r_dn - res_miso).abs() <= 1e-12 * res_miso.max(1e-300)
    {
        flags.push(FitFlag::Plateau("eta_z"));
    }
    Ok(EtaFit {
        eta,
        residual_siso: res_siso,
        residual_miso: res_miso,
        flags,
    })
}

fn near_edge(x: f64, range: (f64, f64), step: f64) -> bool {
    x - range.0 < 0.5 * step || range.1 - x < 0.5 * step
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::expected_energy_doa_error;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn geom(na: usize) -> ArrayGeometry {
        ArrayGeometry::new(4, 10, 10, na).unwrap()
    }

    fn noiseless_arm(u: f64, len: usize) -> DMatrix<C64> {
        DMatrix::from_fn(3, len, |t, l| C64::from_polar(1.0, l as f64 * u + t as f64))
    }

    #[test]
    fn noiseless_arm_is_exact() {
        for u in [0.3 * PI, 0.0, -2.9, 3.1, 1e-3] {
            let est = root_music_arm(&noiseless_arm(u, 10)).unwrap();
            assert!(wrap_phase(est - u).abs() < 1e-6, "u={u} est={est}");
        }
        let est = root_music_arm(&noiseless_arm(0.7, 2)).unwrap();
        assert!((est - 0.7).abs() < 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            root_music_arm(&DMatrix::zeros(4, 5)),
            Err(Error::DegenerateCovariance(_))
        ));
        assert!(root_music_arm(&DMatrix::zeros(4, 1)).is_err());
        let mut rng = substream(0, 0, StreamRole::Snapshots);
        let a = AngleSet::new(0.2, 0.1, 0.0).unwrap();
        assert_eq!(
            synth_snapshots(&geom(0), &a, 1.0, 10.0, 4, &mut rng).unwrap_err(),
            Error::NoActiveElements
        );
        assert!(synth_snapshots(&geom(7), &a, 0.0, 10.0, 4, &mut rng).is_err());
    }

    #[test]
    fn noiseless_los_snapshot_is_steering() {
        let g = geom(7);
        let a = AngleSet::new(0.4, -0.3, 0.0).unwrap();
        let mut rng = substream(3, 0, StreamRole::Snapshots);
        let set = synth_snapshots(&g, &a, f64::INFINITY, f64::INFINITY, 1, &mut rng).unwrap();
        let ph = angles_to_phases(&a);
        let s = set.x_arm[(0, 0)];
        assert!((s.norm() - 1.0).abs() < 1e-12);
        for ix in 0..4 {
            assert!((set.x_arm[(0, ix)] - s * C64::from_polar(1.0, ix as f64 * ph.u)).norm() < 1e-12);
        }
        for iy in 0..4 {
            assert!((set.y_arm[(0, iy)] - s * C64::from_polar(1.0, iy as f64 * ph.v)).norm() < 1e-12);
        }
        let est = estimate_doa_2d(&set).unwrap();
        assert!(wrap_phase(est.u - ph.u).abs() < 1e-6);
        assert!(wrap_phase(est.v - ph.v).abs() < 1e-6);
    }

    #[test]
    fn low_snr_is_noise_dominated() {
        let g = geom(19);
        let a = AngleSet::new(0.4, -0.3, 0.0).unwrap();
        let mut rng = substream(4, 0, StreamRole::Snapshots);
        let set = synth_snapshots(&g, &a, 10.0, -60.0, 400, &mut rng).unwrap();
        let p = set.x_arm.norm_squared() / set.x_arm.len() as f64;
        let want = (10.0 / 11.0) * 1e6;
        assert!((p / want - 1.0).abs() < 0.05, "{p}");
    }

    #[test]
    fn more_elements_and_los_reduce_error() {
        let base = DoaTrialConfig {
            n_trials: 400,
            ..DoaTrialConfig::default()
        };
        let s7 = collect_error_stats(&geom(7), &base).unwrap();
        let s19 = collect_error_stats(&geom(19), &base).unwrap();
        assert!(s19.std.0 < s7.std.0 && s19.std.1 < s7.std.1);
        let k1 = collect_error_stats(&geom(7), &DoaTrialConfig { kappa: 1.0, ..base }).unwrap();
        assert!(k1.std.0 > s7.std.0 && k1.std.1 > s7.std.1);
        assert_eq!(s7.n(), 400);
    }

    #[test]
    fn noiseless_stats_vanish() {
        let cfg = DoaTrialConfig {
            kappa: f64::INFINITY,
            snr_db: f64::INFINITY,
            n_trials: 100,
            n_snapshots: 2,
            ..DoaTrialConfig::default()
        };
        let s = collect_error_stats(&geom(7), &cfg).unwrap();
        assert!(s.std.0 < 1e-6 && s.std.1 < 1e-6);
    }

    #[test]
    fn ks_distance_examples() {
        assert!((ks_distance(&[0.5], |x| x) - 0.5).abs() < 1e-15);
        let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_distance(&grid, |x| x) <= 0.0005 + 1e-12);
    }

    fn curve(m: usize, eta: Eta, sigmas: &[f64], z_only: bool) -> EtaCurve {
        let params = SystemParams {
            geometry: ArrayGeometry::new(m, 10, 10, 0).unwrap(),
            kappa_g: 10.0,
            kappa_h: 10.0,
            ..SystemParams::default()
        };
        let points = sigmas
            .iter()
            .map(|&s| {
                let mut err = if z_only {
                    DoaErrorModel::angle(0.0, 0.0, s)
                } else {
                    DoaErrorModel::angle(s, s, 0.0)
                };
                err.eta = eta;
                EtaCurvePoint {
                    err,
                    energy: expected_energy_doa_error(&params, &err).unwrap(),
                }
            })
            .collect();
        EtaCurve { params, points }
    }

    #[test]
    fn fit_recovers_generating_constants() {
        let truth = Eta::default();
        let sig: Vec<f64> = (1..=10).map(|i| 0.005 * i as f64).collect();
        let fit = fit_eta(
            &curve(1, truth, &sig, false),
            &curve(4, truth, &sig, true),
            &EtaSearch::default(),
            expected_energy_doa_error,
        )
        .unwrap();
        assert!((fit.eta.u - truth.u).abs() < 1e-2, "{:?}", fit);
        assert!((fit.eta.v - truth.v).abs() < 1e-2, "{:?}", fit);
        assert!((fit.eta.z - truth.z).abs() < 1e-3, "{:?}", fit);
        assert!(fit.flags.is_empty(), "{:?}", fit.flags);
    }

    #[test]
    fn fit_flags_uninformative_curves() {
        let sig = [0.0, 0.0];
        let fit = fit_eta(
            &curve(1, Eta::default(), &sig, false),
            &curve(4, Eta::default(), &sig, true),
            &EtaSearch {
                points: 5,
                refinements: 1,
                ..EtaSearch::default()
            },
            expected_energy_doa_error,
        )
        .unwrap();
        assert!(fit.flags.iter().any(|f| matches!(f, FitFlag::Plateau(_))));
    }

    #[test]
    fn siso_stage_feeds_miso_stage() {
        // η_z only enters through the HAP sum, so the first stage must be
        // unaffected by the multi-antenna curve.
        let sig: Vec<f64> = (1..=6).map(|i| 0.008 * i as f64).collect();
        let siso = curve(1, Eta::default(), &sig, false);
        let a = fit_eta(
            &siso,
            &curve(
                4,
                Eta {
                    z: 1.0,
                    ..Eta::default()
                },
                &sig,
                true,
            ),
            &EtaSearch::default(),
            expected_energy_doa_error,
        )
        .unwrap();
        let b = fit_eta(
            &siso,
            &curve(
                4,
                Eta {
                    z: 5.0,
                    ..Eta::default()
                },
                &sig,
                true,
            ),
            &EtaSearch::default(),
            expected_energy_doa_error,
        )
        .unwrap();
        assert_eq!((a.eta.u, a.eta.v), (b.eta.u, b.eta.v));
        assert!(a.eta.z < b.eta.z);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn noiseless_estimation_exact(phi in -1.4f64..1.4, theta in -1.4f64..1.4, na in prop::sample::select(vec![3usize, 5, 7, 19])) {
            let a = AngleSet::new(phi, theta, 0.0).unwrap();
            let mut rng = substream(5, 0, StreamRole::Snapshots);
            let set = synth_snapshots(&geom(na), &a, f64::INFINITY, f64::INFINITY, 4, &mut rng).unwrap();
            let est = estimate_doa_2d(&set).unwrap();
            prop_assert!(wrap_phase(est.u - set.true_phases.u).abs() < 1e-6);
            prop_assert!(wrap_phase(est.v - set.true_phases.v).abs() < 1e-6);
            prop_assert!(est.u.abs() <= PI && est.v.abs() <= PI);
        }
    }
}
