//! Closed-form expected energy, spectral-efficiency bound and error-aware
//! variants.
//!
//! Every expression is written with the Rician power weights
//! `p = κ/(1+κ)`, `q = 1/(1+κ)` instead of raw `κ`, which keeps the
//! pure-LoS limit `κ = ∞` finite.

use crate::error::{invalid, Result};
use crate::geometry::{rician_power_split, SystemParams};

/// Fitted rates mapping angle-domain error variance to the exponent of the
/// Dirichlet sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eta {
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

impl Default for Eta {
    fn default() -> Self {
        Self {
            u: 4.3575,
            v: 1.395,
            z: 2.15,
        }
    }
}

/// Gaussian direction-estimation errors.
///
/// The `sigma_h*`/`sigma_g*` fields are phase-domain standard deviations of
/// the errors on `u`, `v` (user and HAP links) and `z` (HAP ULA). The
/// `sigma_doa_*` fields are angle-domain standard deviations for the user
/// (`h`), the surface-side HAP angles (`g`) and the HAP-side angle (`p`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoaErrorModel {
    pub sigma_hu: f64,
    pub sigma_hv: f64,
    pub sigma_gu: f64,
    pub sigma_gv: f64,
    pub sigma_gz: f64,
    pub sigma_doa_h: f64,
    pub sigma_doa_g: f64,
    pub sigma_doa_p: f64,
    pub eta: Eta,
}

impl DoaErrorModel {
    /// Same phase-domain deviation on every axis.
    pub fn uniform_phase(sigma: f64) -> Self {
        Self {
            sigma_hu: sigma,
            sigma_hv: sigma,
            sigma_gu: sigma,
            sigma_gv: sigma,
            sigma_gz: sigma,
            ..Self::default()
        }
    }

    pub fn angle(sigma_doa_h: f64, sigma_doa_g: f64, sigma_doa_p: f64) -> Self {
        Self {
            sigma_doa_h,
            sigma_doa_g,
            sigma_doa_p,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = [
            self.sigma_hu,
            self.sigma_hv,
            self.sigma_gu,
            self.sigma_gv,
            self.sigma_gz,
            self.sigma_doa_h,
            self.sigma_doa_g,
            self.sigma_doa_p,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0) || s.is_infinite()) {
            return Err(invalid("sigma", "error deviations must be finite and non-negative"));
        }
        if [self.eta.u, self.eta.v, self.eta.z].iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("eta", "fit constants must be positive"));
        }
        Ok(())
    }

    pub fn has_phase_errors(&self) -> bool {
        [
            self.sigma_hu,
            self.sigma_hv,
            self.sigma_gu,
            self.sigma_gv,
            self.sigma_gz,
        ]
        .iter()
        .any(|s| *s > 0.0)
    }

    pub fn has_angle_errors(&self) -> bool {
        [self.sigma_doa_h, self.sigma_doa_g, self.sigma_doa_p]
            .iter()
            .any(|s| *s > 0.0)
    }

    /// Phase-domain model whose Dirichlet sums equal the fitted
    /// angle-domain ones: `σ_hu² = 2η_u σ_h²` and so on.
    pub fn phase_equivalent(&self) -> Self {
        let s = |eta: f64, sigma: f64| (2.0 * eta).sqrt() * sigma;
        Self {
            sigma_hu: s(self.eta.u, self.sigma_doa_h),
            sigma_hv: s(self.eta.v, self.sigma_doa_h),
            sigma_gu: s(self.eta.u, self.sigma_doa_g),
            sigma_gv: s(self.eta.v, self.sigma_doa_g),
            sigma_gz: s(self.eta.z, self.sigma_doa_p),
            sigma_doa_h: 0.0,
            sigma_doa_g: 0.0,
            sigma_doa_p: 0.0,
            eta: self.eta,
        }
    }
}

/// Normalized mean `E|hᴴΘGβ|²` for generic Dirichlet sums `a_uv` (surface)
/// and `a_z` (HAP) over `n` passive elements and `m` antennas.
fn normalized_mean(m: f64, n: f64, a_uv: f64, a_z: f64, kappa_h: f64, kappa_g: f64) -> f64 {
    let (ph, qh) = rician_power_split(kappa_h);
    let (pg, qg) = rician_power_split(kappa_g);
    ph * pg * a_uv * a_z / m + qh * pg * a_z * n / m + ph * qg * n + qh * qg * n
}

/// Mean received energy with perfect angles,
/// `ϱP_E (N²Mκ_hκ_G + NMκ_G + Nκ_h + N) / ((1+κ_h)(1+κ_G))`.
pub fn expected_energy_perfect(params: &SystemParams) -> f64 {
    let n = params.n_passive() as f64;
    let m = params.geometry.m_antennas as f64;
    params.cascade_loss() * params.p_e_watts * normalized_mean(m, n, n * n, m * m, params.kappa_h, params.kappa_g)
}

/// Multi-antenna over single-antenna mean-energy ratio; lies in `[1, M]`.
pub fn miso_siso_ratio(m: usize, n: usize, kappa_h: f64, kappa_g: f64) -> f64 {
    let (m, n) = (m as f64, n as f64);
    normalized_mean(m, n, n * n, m * m, kappa_h, kappa_g) / normalized_mean(1.0, n, n * n, 1.0, kappa_h, kappa_g)
}

/// Mean uplink SNR with perfect angles and the angle-matched combiner.
pub fn expected_snr_perfect(params: &SystemParams) -> f64 {
    let n = params.n_passive() as f64;
    let m = params.geometry.m_antennas as f64;
    params.cascade_loss() * params.p_i_watts / params.noise_sigma2_watts
        * normalized_mean(m, n, n * n, m * m, params.kappa_h, params.kappa_g)
}

/// Jensen bound `log2(1 + E{SNR})` on the ergodic spectral efficiency.
pub fn se_upper_bound(params: &SystemParams) -> Result<f64> {
    if !(params.noise_sigma2_watts > 0.0) {
        return Err(invalid("noise_sigma2_watts", "noise power must be positive"));
    }
    Ok(expected_snr_perfect(params).ln_1p() / std::f64::consts::LN_2)
}

/// `𝒜(σ², n) = Σ_i Σ_k e^{-(i-k)² σ²/2} = E|Σ_{m<n} e^{i m ξ}|²` for
/// `ξ ~ N(0, σ²)`.
pub fn gaussian_dirichlet_sum(sigma2: f64, n: usize) -> f64 {
    let nf = n as f64;
    let mut s = nf;
    for d in 1..n {
        s += 2.0 * (nf - d as f64) * (-((d * d) as f64) * sigma2 / 2.0).exp();
    }
    s
}

/// Fourth moment `E|Σ_{m<n} e^{i m ξ}|⁴`.
pub fn gaussian_dirichlet_sum4(sigma2: f64, n: usize) -> f64 {
    let nf = n as f64;
    let e = |k: usize| (-((k * k) as f64) * sigma2 / 2.0).exp();
    let mut s = nf * nf;
    for i in 1..n {
        s += 4.0 * nf * (nf - i as f64) * e(i);
    }
    for i in 1..n {
        for j in 1..n {
            s += 2.0 * (nf - i as f64) * (nf - j as f64) * (e(i.abs_diff(j)) + e(i + j));
        }
    }
    s
}

/// The Dirichlet sums entering the error-aware expressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ErrorSums {
    pub au: f64,
    pub av: f64,
    pub az: f64,
}

pub(crate) fn phase_error_sums(params: &SystemParams, err: &DoaErrorModel) -> ErrorSums {
    let g = &params.geometry;
    ErrorSums {
        au: gaussian_dirichlet_sum(err.sigma_hu.powi(2) + err.sigma_gu.powi(2), g.nx),
        av: gaussian_dirichlet_sum(err.sigma_hv.powi(2) + err.sigma_gv.powi(2), g.ny),
        az: gaussian_dirichlet_sum(err.sigma_gz.powi(2), g.m_antennas),
    }
}

/// Mean received energy under phase-domain Gaussian errors on the
/// estimated spatial phases.
pub fn expected_energy_phase_error(params: &SystemParams, err: &DoaErrorModel) -> Result<f64> {
    err.validate()?;
    let s = phase_error_sums(params, err);
    let n = params.n_passive() as f64;
    let m = params.geometry.m_antennas as f64;
    Ok(params.cascade_loss()
        * params.p_e_watts
        * normalized_mean(m, n, s.au * s.av, s.az, params.kappa_h, params.kappa_g))
}

/// Mean received energy under angle-domain errors, using the fitted rates
/// `η`: the exponent `(i-k)² η σ²` replaces the exact phase-domain one.
pub fn expected_energy_doa_error(params: &SystemParams, err: &DoaErrorModel) -> Result<f64> {
    err.validate()?;
    let g = &params.geometry;
    let link = err.sigma_doa_h.powi(2) + err.sigma_doa_g.powi(2);
    // 𝒜(σ², n) has exponent σ²/2, so rate r corresponds to σ² = 2r.
    let au = gaussian_dirichlet_sum(2.0 * err.eta.u * link, g.nx);
    let av = gaussian_dirichlet_sum(2.0 * err.eta.v * link, g.ny);
    let az = gaussian_dirichlet_sum(2.0 * err.eta.z * err.sigma_doa_p.powi(2), g.m_antennas);
    let n = params.n_passive() as f64;
    let m = g.m_antennas as f64;
    Ok(params.cascade_loss() * params.p_e_watts * normalized_mean(m, n, au * av, az, params.kappa_h, params.kappa_g))
}

/// `(ϱP_E N, error-free mean)`: every error-aware mean lies between them.
pub fn energy_bounds(params: &SystemParams) -> (f64, f64) {
    let lower = params.cascade_loss() * params.p_e_watts * params.n_passive() as f64;
    (lower, expected_energy_perfect(params))
}

/// Exact variance of the received energy with perfect angles.
pub fn energy_variance_perfect(params: &SystemParams) -> f64 {
    let n = params.n_passive() as f64;
    let m = params.geometry.m_antennas as f64;
    let scale = params.cascade_loss() * params.p_e_watts;
    scale * scale * normalized_variance(m, n, params.kappa_h, params.kappa_g)
}

/// `Var|hᴴΘGβ|²` under the error-free design.
pub(crate) fn normalized_variance(m: f64, n: f64, kappa_h: f64, kappa_g: f64) -> f64 {
    let (ph, qh) = rician_power_split(kappa_h);
    let (pg, qg) = rician_power_split(kappa_g);
    let (n2, n3) = (n * n, n * n * n);
    2.0 * m * n3 * (m * ph * qh * pg * pg + ph * ph * pg * qg + ph * qh * pg * qg)
        + 10.0 * m * n2 * ph * qh * pg * qg
        + n2 * (m * m * qh * qh * pg * pg + ph * ph * qg * qg + qh * qh * qg * qg)
        + 2.0 * n * qh * qh * qg * qg
        + 2.0 * m * n2 * qh * qh * pg * qg
        + 4.0 * m * n * qh * qh * pg * qg
        + 2.0 * n2 * ph * qh * qg * qg
        + 4.0 * n * ph * qh * qg * qg
}
