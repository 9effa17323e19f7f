//! Reproducible Monte Carlo trials, non-linear harvesting, pilot-overhead
//! accounting and a frame-level protocol simulation.
//!
//! Trials run in parallel but every trial draws from its own keyed
//! substreams and results are reduced in trial order, so aggregates do not
//! depend on the number of threads.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::analytics::DoaErrorModel;
use crate::beamforming::{
    angle_mrc_combiner, fading_averaged_energy, fullcsi_alternating_opt, mrt_precoder, received_energy_instant,
    riss_phase_design, uplink_snr_instant, AltOptConfig, Precoder, RissPhaseConfig,
};
use crate::error::{invalid, Result};
use crate::geometry::{
    angles_to_phases, los_g, los_h, synth_rician_split, AngleSet, ChannelRealization, SpatialPhases, SystemParams,
};
use crate::rng::{substream, StreamRole};

const Z95: f64 = 1.959_963_984_540_054;

/// How direction knowledge is corrupted in each trial.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ErrorInjection {
    #[default]
    None,
    /// Gaussian errors added directly to the estimated `u`, `v`, `z`.
    Phase(DoaErrorModel),
    /// True angles drawn uniformly from `angle_range` every trial; Gaussian
    /// errors added to the angles before converting to phases.
    Angle {
        model: DoaErrorModel,
        angle_range: (f64, f64),
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_trials: usize,
    pub seed: u64,
    pub error_injection: ErrorInjection,
    /// Keep every per-trial value in [`McStats::samples`].
    pub keep_samples: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_trials: 10_000,
            seed: 1,
            error_injection: ErrorInjection::None,
            keep_samples: false,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(invalid("n_trials", "need at least one trial"));
        }
        match &self.error_injection {
            ErrorInjection::None => Ok(()),
            ErrorInjection::Phase(m) => m.validate(),
            ErrorInjection::Angle { model, angle_range } => {
                model.validate()?;
                AngleSet::new(angle_range.0, angle_range.1, 0.0)?;
                if !(angle_range.0 < angle_range.1) {
                    return Err(invalid("angle_range", "empty interval"));
                }
                Ok(())
            }
        }
    }
}

/// Sample mean with a 95% normal-approximation interval.
#[derive(Debug, Clone, PartialEq)]
pub struct McStats {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub samples: Option<Vec<f64>>,
}

impl McStats {
    pub fn from_samples(samples: Vec<f64>, keep: bool) -> Self {
        let n = samples.len();
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let variance = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        let std_error = (variance / nf).sqrt();
        Self {
            mean,
            variance,
            std_error,
            ci_low: mean - Z95 * std_error,
            ci_high: mean + Z95 * std_error,
            n,
            samples: keep.then_some(samples),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Everything one trial needs: the true channel and the design built from
/// the (possibly corrupted) direction estimates.
#[derive(Debug, Clone)]
pub struct TrialContext {
    pub trial: u64,
    pub params: SystemParams,
    pub channel: ChannelRealization,
    pub est_user: SpatialPhases,
    pub est_hap: SpatialPhases,
    pub phases: RissPhaseConfig,
    pub precoder: Precoder,
}

fn gauss<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("validated deviation").sample(rng)
}

/// Builds trial `t`.
pub fn trial_context(params: &SystemParams, mc: &McConfig, t: u64) -> Result<TrialContext> {
    let mut params = params.clone();
    let (est_user, est_hap) = match &mc.error_injection {
        ErrorInjection::None => (params.user_phases(), params.hap_phases()),
        ErrorInjection::Phase(e) => {
            let mut r = substream(mc.seed, t, StreamRole::PhaseErrors);
            let (u, g) = (params.user_phases(), params.hap_phases());
            let user = SpatialPhases::new(u.u + gauss(&mut r, e.sigma_hu), u.v + gauss(&mut r, e.sigma_hv), u.z);
            let hap = SpatialPhases::new(
                g.u + gauss(&mut r, e.sigma_gu),
                g.v + gauss(&mut r, e.sigma_gv),
                g.z + gauss(&mut r, e.sigma_gz),
            );
            (user, hap)
        }
        ErrorInjection::Angle { model, angle_range } => {
            let mut a = substream(mc.seed, t, StreamRole::TrueAngles);
            let (lo, hi) = *angle_range;
            let mut draw = || a.random_range(lo..hi);
            params.hap_angles = AngleSet {
                phi: draw(),
                theta: draw(),
                varpi: draw(),
            };
            params.user_angles = AngleSet {
                phi: draw(),
                theta: draw(),
                varpi: 0.0,
            };
            let mut r = substream(mc.seed, t, StreamRole::AngleErrors);
            let hap = AngleSet {
                phi: params.hap_angles.phi + gauss(&mut r, model.sigma_doa_g),
                theta: params.hap_angles.theta + gauss(&mut r, model.sigma_doa_g),
                varpi: params.hap_angles.varpi + gauss(&mut r, model.sigma_doa_p),
            };
            let user = AngleSet {
                phi: params.user_angles.phi + gauss(&mut r, model.sigma_doa_h),
                theta: params.user_angles.theta + gauss(&mut r, model.sigma_doa_h),
                varpi: 0.0,
            };
            (angles_to_phases(&user), angles_to_phases(&hap))
        }
    };
    let channel = synth_rician_split(
        &params,
        &mut substream(mc.seed, t, StreamRole::ChannelG),
        &mut substream(mc.seed, t, StreamRole::ChannelH),
    );
    let phases = riss_phase_design(&est_user, &est_hap, &params.geometry);
    let precoder = mrt_precoder(est_hap.z, params.geometry.m_antennas, params.p_e_watts)?;
    Ok(TrialContext {
        trial: t,
        params,
        channel,
        est_user,
        est_hap,
        phases,
        precoder,
    })
}

/// Evaluates `f` on every trial, in parallel, returning values in trial
/// order.
pub fn run_trials<F>(params: &SystemParams, mc: &McConfig, f: F) -> Result<Vec<f64>>
where
    F: Fn(&TrialContext) -> Result<f64> + Sync,
{
    params.validate()?;
    mc.validate()?;
    (0..mc.n_trials as u64)
        .into_par_iter()
        .map(|t| f(&trial_context(params, mc, t)?))
        .collect()
}

/// Received downlink energy statistics.
pub fn mc_energy(params: &SystemParams, mc: &McConfig) -> Result<McStats> {
    let cascade = params.cascade_loss();
    let samples = run_trials(params, mc, |c| {
        received_energy_instant(&c.channel, &c.phases, &c.precoder, cascade)
    })?;
    Ok(McStats::from_samples(samples, mc.keep_samples))
}

/// Empirical outage with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageStats {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let low = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if successes == n { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

/// Fraction of trials whose energy at transmit power `p_watts` falls below
/// `t_thre`.
pub fn mc_outage(params: &SystemParams, p_watts: f64, t_thre: f64, mc: &McConfig) -> Result<OutageStats> {
    if !(t_thre >= 0.0) {
        return Err(invalid("t_thre", "threshold must be non-negative"));
    }
    let scaled = SystemParams {
        p_e_watts: p_watts,
        ..params.clone()
    };
    let energies = mc_energy(
        &scaled,
        &McConfig {
            keep_samples: true,
            ..*mc
        },
    )?
    .samples
    .expect("samples requested");
    let below = energies.iter().filter(|e| **e < t_thre).count();
    let (ci_low, ci_high) = wilson_interval(below, energies.len());
    Ok(OutageStats {
        p_hat: below as f64 / energies.len() as f64,
        ci_low,
        ci_high,
        n: energies.len(),
    })
}

/// Uplink spectral efficiency `log2(1 + SNR)` with the angle-matched
/// combiner.
pub fn mc_ergodic_se(params: &SystemParams, mc: &McConfig) -> Result<McStats> {
    if !(params.noise_sigma2_watts > 0.0) {
        return Err(invalid("noise_sigma2_watts", "noise power must be positive"));
    }
    let cascade = params.cascade_loss();
    let samples = run_trials(params, mc, |c| {
        let comb = angle_mrc_combiner(c.est_hap.z, c.params.geometry.m_antennas)?;
        let snr = uplink_snr_instant(
            &c.channel,
            &c.phases,
            &comb,
            c.params.p_i_watts,
            c.params.noise_sigma2_watts,
            cascade,
        )?;
        Ok(snr.ln_1p() / std::f64::consts::LN_2)
    })?;
    Ok(McStats::from_samples(samples, mc.keep_samples))
}

/// Angle-driven design against the perfect-CSI baseline on shared
/// realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct FullCsiComparison {
    pub proposed: McStats,
    pub full_csi: McStats,
    /// Trials where the baseline fell below the angle-driven design.
    pub dominance_violations: usize,
    /// Trials that hit the iteration cap.
    pub unconverged: usize,
}

pub fn mc_fullcsi(params: &SystemParams, mc: &McConfig, alt: &AltOptConfig) -> Result<FullCsiComparison> {
    params.validate()?;
    mc.validate()?;
    let cascade = params.cascade_loss();
    let pairs = (0..mc.n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let c = trial_context(params, mc, t)?;
            let doa = received_energy_instant(&c.channel, &c.phases, &c.precoder, cascade)?;
            let full = fullcsi_alternating_opt(&c.channel, &c.phases, c.params.p_e_watts, cascade, alt)?;
            Ok((doa, full.energy, full.converged))
        })
        .collect::<Result<Vec<_>>>()?;
    let dominance_violations = pairs.iter().filter(|p| p.1 < p.0 * (1.0 - 1e-12)).count();
    let unconverged = pairs.iter().filter(|p| !p.2).count();
    Ok(FullCsiComparison {
        proposed: McStats::from_samples(pairs.iter().map(|p| p.0).collect(), mc.keep_samples),
        full_csi: McStats::from_samples(pairs.iter().map(|p| p.1).collect(), mc.keep_samples),
        dominance_violations,
        unconverged,
    })
}

/// Logistic energy-harvesting circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvestModel {
    /// Saturation output power in watts.
    pub me: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for HarvestModel {
    fn default() -> Self {
        Self {
            me: 0.02337,
            a: 132.8,
            b: 0.01181,
        }
    }
}

impl HarvestModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.me > 0.0) || !(self.a > 0.0) || !self.b.is_finite() {
            return Err(invalid("harvest", "need me > 0, a > 0 and finite b"));
        }
        Ok(())
    }
}

/// `Φ(P) = (M_e / (1 + e^{-a(P-b)}) - M_e Ω) / (1 - Ω)`, `Ω = 1/(1 + e^{ab})`.
pub fn nonlinear_harvest(p_in: f64, hm: &HarvestModel) -> Result<f64> {
    hm.validate()?;
    if !(p_in >= 0.0) {
        return Err(invalid("p_in", "input power must be non-negative"));
    }
    let omega = 1.0 / (1.0 + (hm.a * hm.b).exp());
    let logistic = hm.me / (1.0 + (-hm.a * (p_in - hm.b)).exp());
    Ok(((logistic - hm.me * omega) / (1.0 - omega)).max(0.0))
}

/// Which scheme pays for channel estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Angle sensing on the active elements; no pilot time.
    Proposed,
    /// `N + 1` pilot symbols out of every coherence block.
    FullCsi,
}

/// `(t_c - n - 1) / t_c`.
pub fn pilot_overhead_factor(n: usize, t_c: usize) -> Result<f64> {
    if n + 1 >= t_c {
        return Err(invalid(
            "n",
            format!("{} pilots leave no time in a block of {t_c}", n + 1),
        ));
    }
    Ok((t_c - n - 1) as f64 / t_c as f64)
}

pub fn apply_pilot_overhead(value: f64, n: usize, t_c: usize, scheme: Scheme) -> Result<f64> {
    let factor = pilot_overhead_factor(n, t_c)?;
    Ok(match scheme {
        Scheme::Proposed => value,
        Scheme::FullCsi => value * factor,
    })
}

/// Per-frame Gaussian random walk of the true angles, in radians per frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftModel {
    pub user_sigma: f64,
    pub hap_sigma: f64,
}

/// Order of the two links inside a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkOrder {
    #[default]
    UplinkFirst,
    DownlinkFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConfig {
    pub k_users: usize,
    pub n_frames: usize,
    pub drift: DriftModel,
    pub order: LinkOrder,
    pub seed: u64,
}

/// Angle knowledge held by each node, with the frame it was last updated.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameState {
    pub frame: usize,
    pub k_users: usize,
    /// `(ϖ_G, stamp)` at the HAP.
    pub hap_varpi: (f64, usize),
    /// `((φ_G, ϑ_G), stamp)` at the surface.
    pub riss_hap: ((f64, f64), usize),
    /// `((φ_h, ϑ_h), stamp)` per user at the surface.
    pub riss_users: Vec<((f64, f64), usize)>,
}

/// One simulated frame. Energies and SNRs are averaged over the small-scale
/// fading for the design in force, so only angle staleness shows up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub user: usize,
    pub downlink_energy: f64,
    pub uplink_snr: f64,
    /// Age in frames of the HAP-side angles used on the uplink.
    pub uplink_hap_age: usize,
    /// Age in frames of the user angles used on the downlink.
    pub downlink_user_age: usize,
}

fn los_realization(params: &SystemParams, hap: &AngleSet, user: &AngleSet) -> ChannelRealization {
    let g = &params.geometry;
    let (n, m) = (g.n_passive(), g.m_antennas);
    ChannelRealization::from_parts(
        los_g(g, &angles_to_phases(hap)),
        DMatrix::zeros(n, m),
        los_h(g, &angles_to_phases(user)),
        DVector::zeros(n),
        params.kappa_g,
        params.kappa_h,
    )
}

/// Round-robin frames over `k_users`, frame `p` serving user `p mod K`.
///
/// Uplink-first (the protocol): the surface reflects with fresh user angles
/// and HAP angles stamped `p-K-1`, the HAP combines with `ϖ_G` stamped
/// `p-K-1` and then refreshes it; the downlink uses only fresh angles.
/// Downlink-first swaps the links: the downlink sees the user angles from
/// that user's previous frame and the stale `ϖ_G`.
pub fn simulate_frames(params: &SystemParams, cfg: &FrameConfig) -> Result<(Vec<FrameRecord>, FrameState)> {
    params.validate()?;
    if cfg.k_users == 0 {
        return Err(invalid("k_users", "need at least one user"));
    }
    for s in [cfg.drift.user_sigma, cfg.drift.hap_sigma] {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(invalid("drift", "deviations must be finite and non-negative"));
        }
    }
    let k = cfg.k_users;
    let mut hap_truth = Vec::with_capacity(cfg.n_frames);
    let mut user_truth = vec![Vec::with_capacity(cfg.n_frames); k];
    let (mut hap, mut users) = (params.hap_angles, vec![params.user_angles; k]);
    for p in 0..cfg.n_frames {
        if p > 0 {
            let mut r = substream(cfg.seed, p as u64, StreamRole::Drift);
            hap.phi += gauss(&mut r, cfg.drift.hap_sigma);
            hap.theta += gauss(&mut r, cfg.drift.hap_sigma);
            hap.varpi += gauss(&mut r, cfg.drift.hap_sigma);
            for u in users.iter_mut() {
                u.phi += gauss(&mut r, cfg.drift.user_sigma);
                u.theta += gauss(&mut r, cfg.drift.user_sigma);
            }
        }
        hap_truth.push(hap);
        for (i, u) in users.iter().enumerate() {
            user_truth[i].push(*u);
        }
    }

    let cascade = params.cascade_loss();
    let m = params.geometry.m_antennas;
    let snr_scale = params.p_i_watts / params.noise_sigma2_watts;
    let evaluate = |truth_hap: &AngleSet,
                    truth_user: &AngleSet,
                    riss_hap: &AngleSet,
                    riss_user: &AngleSet,
                    varpi: f64,
                    power: f64|
     -> Result<f64> {
        let real = los_realization(params, truth_hap, truth_user);
        let est_hap = angles_to_phases(riss_hap);
        let theta = riss_phase_design(&angles_to_phases(riss_user), &est_hap, &params.geometry);
        let z = angles_to_phases(&AngleSet { varpi, ..*riss_hap }).z;
        let w = mrt_precoder(z, m, power)?;
        fading_averaged_energy(&real, &theta, &w, cascade)
    };

    let mut state = FrameState {
        frame: 0,
        k_users: k,
        hap_varpi: (params.hap_angles.varpi, 0),
        riss_hap: ((params.hap_angles.phi, params.hap_angles.theta), 0),
        riss_users: vec![((params.user_angles.phi, params.user_angles.theta), 0); k],
    };
    let mut records = Vec::with_capacity(cfg.n_frames);
    for p in 0..cfg.n_frames {
        let user = p % k;
        let stale = p.saturating_sub(k + 1);
        let prev_user = p.saturating_sub(k);
        let th = hap_truth[p];
        let tu = user_truth[user][p];
        let (downlink_energy, uplink_snr, uplink_hap_age, downlink_user_age) = match cfg.order {
            LinkOrder::UplinkFirst => {
                // uplink: fresh user angles, HAP angles from frame p-K-1
                let up = evaluate(&th, &tu, &hap_truth[stale], &tu, hap_truth[stale].varpi, 1.0)? * snr_scale;
                let down = evaluate(&th, &tu, &th, &tu, th.varpi, params.p_e_watts)?;
                (down, up, p - stale, 0)
            }
            LinkOrder::DownlinkFirst => {
                // downlink: surface senses the HAP now, but the user was last
                // heard in its previous frame and ϖ_G is still stale
                let old_user = user_truth[user][prev_user];
                let down = evaluate(&th, &tu, &th, &old_user, hap_truth[stale].varpi, params.p_e_watts)?;
                let up = evaluate(&th, &tu, &th, &tu, hap_truth[stale].varpi, 1.0)? * snr_scale;
                (down, up, p - stale, p - prev_user)
            }
        };
        state.frame = p;
        state.hap_varpi = (th.varpi, p);
        state.riss_hap = ((th.phi, th.theta), p);
        state.riss_users[user] = ((tu.phi, tu.theta), p);
        records.push(FrameRecord {
            frame: p,
            user,
            downlink_energy,
            uplink_snr,
            uplink_hap_age,
            downlink_user_age,
        });
    }
    Ok((records, state))
}
