//! Gamma moment matching of the received energy, outage-constrained power
//! planning and the ergodic spectral efficiency.

use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::analytics::{phase_error_sums, DoaErrorModel};
use crate::error::{invalid, Error, Result};
use crate::geometry::{rician_power_split, SystemParams};
use crate::quadrature::{integrate, QuadratureOptions};

/// Gamma law with shape `alpha` and rate `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl GammaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(invalid("alpha", format!("shape {alpha} must be positive and finite")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(invalid("beta", format!("rate {beta} must be positive and finite")));
        }
        Ok(Self { alpha, beta })
    }

    /// Moment-matched law for a given mean and variance.
    pub fn from_moments(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(invalid("variance", "a deterministic quantity has no Gamma fit"));
        }
        Self::new(mean * mean / variance, mean / variance)
    }

    pub fn mean(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn variance(&self) -> f64 {
        self.alpha / (self.beta * self.beta)
    }

    /// Law of `k·X`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta / k)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::NEG_INFINITY;
        }
        self.alpha * self.beta.ln() + (self.alpha - 1.0) * x.ln() - self.beta * x - ln_gamma(self.alpha)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x.is_infinite() {
            return 1.0;
        }
        gamma_lr(self.alpha, self.beta * x)
    }

    /// Inverse CDF by safeguarded Newton iteration on the unit-rate variable.
    pub fn icdf(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("p", format!("{p} is not a probability")));
        }
        if p == 1.0 {
            return Err(Error::UnboundedQuantile);
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        let a = self.alpha;
        let lg = ln_gamma(a);
        let f = |y: f64| gamma_lr(a, y) - p;
        let (mut lo, mut hi) = (0.0_f64, a.max(1.0));
        while f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::UnboundedQuantile);
            }
        }
        // small-p start from the leading series term P(a, y) ≈ y^a / Γ(a+1)
        let mut y = ((p.ln() + ln_gamma(a + 1.0)) / a).exp();
        if y < f64::MIN_POSITIVE {
            // quantile below the smallest normal double
            return Ok(0.0);
        }
        if !(y > lo && y < hi) {
            y = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let fy = f(y);
            if fy == 0.0 {
                break;
            }
            if fy < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let dens = ((a - 1.0) * y.ln() - y - lg).exp();
            let mut next = y - fy / dens;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - y).abs() <= 1e-15 * y || hi - lo <= 1e-300 {
                y = next;
                break;
            }
            y = next;
        }
        Ok(y / self.beta)
    }
}

pub fn gamma_cdf(gp: &GammaParams, x: f64) -> f64 {
    gp.cdf(x)
}

pub fn gamma_icdf(gp: &GammaParams, p: f64) -> Result<f64> {
    gp.icdf(p)
}

/// Moment-matched law of the received energy with perfect angles.
///
/// Pure LoS on both hops makes the energy deterministic and has no fit.
pub fn gamma_params_perfect(params: &SystemParams) -> Result<GammaParams> {
    params.validate()?;
    GammaParams::from_moments(
        crate::analytics::expected_energy_perfect(params),
        crate::analytics::energy_variance_perfect(params),
    )
}

/// Approximate moment-matched law under phase-domain errors.
///
/// Requires `κ_h > 0` and `κ_G > 0`; the dropped covariance terms are only
/// negligible next to the LoS contributions.
pub fn gamma_params_doa(params: &SystemParams, err: &DoaErrorModel) -> Result<GammaParams> {
    params.validate()?;
    err.validate()?;
    if params.kappa_h <= 0.0 || params.kappa_g <= 0.0 {
        return Err(Error::ApproximationInvalid);
    }
    let g = &params.geometry;
    let n = params.n_passive() as f64;
    let m = g.m_antennas as f64;
    let s = phase_error_sums(params, err);
    let su = err.sigma_hu.powi(2) + err.sigma_gu.powi(2);
    let sv = err.sigma_hv.powi(2) + err.sigma_gv.powi(2);
    let au4 = crate::analytics::gaussian_dirichlet_sum4(su, g.nx);
    let av4 = crate::analytics::gaussian_dirichlet_sum4(sv, g.ny);
    let az4 = crate::analytics::gaussian_dirichlet_sum4(err.sigma_gz.powi(2), g.m_antennas);
    let (ph, qh) = rician_power_split(params.kappa_h);
    let (pg, qg) = rician_power_split(params.kappa_g);
    let auv = s.au * s.av;
    let x = ph * pg * auv * s.az + qh * pg * s.az * n + ph * qg * m * n + qh * qg * m * n;
    let prod = auv * s.az;
    let den = ph * ph * pg * pg * (au4 * av4 * az4 - prod * prod)
        + qh * qh * pg * pg * n * n * (2.0 * az4 - s.az * s.az)
        + ph * ph * qg * qg * m * m * n * n
        + 2.0 * ph * qh * pg * pg * auv * n * az4
        + 2.0 * ph * pg * qg * (ph + qh) * auv * n * m * s.az;
    let scale = params.cascade_loss() * params.p_e_watts;
    if !(den > 0.0) {
        return Err(invalid("sigma", "errors and Rician factors leave no randomness to fit"));
    }
    GammaParams::new(x * x / den, m * x / (scale * den))
}

/// How the outage quantile is read off the energy law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantileConvention {
    /// `q = F⁻¹(p_out)`: guarantees `P(E < T) ≤ p_out`.
    #[default]
    OutageQuantile,
    /// `q = F⁻¹(1 − p_out)`, kept for comparison.
    Literal,
}

/// Result of outage-constrained power planning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPlan {
    pub power_watts: f64,
    /// Energy law at 1 W transmit power.
    pub unit_gamma: GammaParams,
    /// Quantile of the unit-power energy that `t_thre` is matched to.
    pub unit_quantile: f64,
}

/// Smallest transmit power meeting `P(E < t_thre) ≤ p_out`, given the energy
/// law at unit power. Energy is linear in power, so `P = t_thre / q`.
pub fn plan_transmit_power(
    unit_gamma: &GammaParams,
    t_thre: f64,
    p_out: f64,
    convention: QuantileConvention,
) -> Result<PowerPlan> {
    if !(t_thre > 0.0) || !t_thre.is_finite() {
        return Err(invalid("t_thre", "energy threshold must be positive"));
    }
    if !(p_out > 0.0 && p_out < 1.0) {
        return Err(invalid("p_out", "outage probability must lie in (0, 1)"));
    }
    let level = match convention {
        QuantileConvention::OutageQuantile => p_out,
        QuantileConvention::Literal => 1.0 - p_out,
    };
    let q = unit_gamma.icdf(level)?;
    if !(q >= f64::MIN_POSITIVE) || !(t_thre / q).is_finite() {
        return Err(Error::QuantileUnderflow { quantile: q });
    }
    Ok(PowerPlan {
        power_watts: t_thre / q,
        unit_gamma: *unit_gamma,
        unit_quantile: q,
    })
}

/// [`plan_transmit_power`] for the error-free design.
pub fn required_transmit_power(params: &SystemParams, t_thre: f64, p_out: f64) -> Result<f64> {
    required_transmit_power_with(params, t_thre, p_out, QuantileConvention::default()).map(|p| p.power_watts)
}

pub fn required_transmit_power_with(
    params: &SystemParams,
    t_thre: f64,
    p_out: f64,
    convention: QuantileConvention,
) -> Result<PowerPlan> {
    let unit = SystemParams {
        p_e_watts: 1.0,
        ..params.clone()
    };
    plan_transmit_power(&gamma_params_perfect(&unit)?, t_thre, p_out, convention)
}

/// `E{log2(1 + Y)}` for `Y ~ gp`, integrated in `s = ln y`.
pub fn expected_log2_1p(gp: &GammaParams) -> Result<f64> {
    let (a, lam) = (gp.alpha, gp.beta);
    let norm = a * lam.ln() - ln_gamma(a);
    let integrand = move |s: f64| {
        let l = if s > 35.0 {
            s + (-s).exp().ln_1p()
        } else {
            s.exp().ln_1p()
        };
        l * (a * s + norm - lam * s.exp()).exp()
    };
    let mode = (a / lam).ln();
    let left = mode - (1.0 + 60.0 / a);
    let mut t: f64 = 1.0;
    while a * (t.exp() - 1.0 - t) < 70.0 {
        t += 0.25;
    }
    let right = mode + t;
    let opts = QuadratureOptions::default();
    let lo = integrate(integrand, left, mode, &opts)?;
    let hi = integrate(integrand, mode, right, &opts)?;
    let value = lo.value + hi.value;
    let error = lo.error_estimate + hi.error_estimate;
    if error > 1e-9 * value.abs() {
        return Err(Error::QuadratureNonConvergence {
            estimate: value,
            error_estimate: error,
        });
    }
    Ok(value / std::f64::consts::LN_2)
}

/// Ergodic uplink spectral efficiency under the moment-matched energy law:
/// `Z ~ Gamma(α_E, β_E ϱ P_E)` and SNR `= ϱ P_I Z / σ²`.
pub fn ergodic_se(params: &SystemParams, p_i: f64, sigma2: f64) -> Result<f64> {
    ergodic_se_from(params, &gamma_params_perfect(params)?, p_i, sigma2)
}

/// [`ergodic_se`] for an arbitrary energy law `energy` at transmit power
/// `params.p_e_watts`.
pub fn ergodic_se_from(params: &SystemParams, energy: &GammaParams, p_i: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(invalid("sigma2", "noise power must be positive"));
    }
    if !(p_i >= 0.0) {
        return Err(invalid("p_i", "transmit power must be non-negative"));
    }
    if p_i == 0.0 {
        return Ok(0.0);
    }
    let rho = params.cascade_loss();
    let z = energy.scaled(1.0 / (rho * params.p_e_watts))?;
    expected_log2_1p(&z.scaled(rho * p_i / sigma2)?)
}
