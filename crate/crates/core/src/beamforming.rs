//! Reflection design from DOA estimates, HAP precoding/combining, and the
//! perfect-CSI alternating-optimization baseline.

use nalgebra::DVector;

use crate::error::{invalid, Error, Result};
use crate::geometry::{rician_power_split, steering_ula, ArrayGeometry, ChannelRealization, SpatialPhases};
use crate::C64;

/// Unit-modulus reflection coefficients (combined user and HAP phase ramps;
/// amplitudes fixed to one).
#[derive(Debug, Clone, PartialEq)]
pub struct RissPhaseConfig {
    theta: DVector<C64>,
}

impl RissPhaseConfig {
    pub fn new(theta: DVector<C64>) -> Result<Self> {
        if let Some(bad) = theta.iter().find(|t| (t.norm() - 1.0).abs() > 1e-9) {
            return Err(invalid("theta", format!("coefficient {bad} is not unit-modulus")));
        }
        Ok(Self { theta })
    }

    pub fn from_angles(angles: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<C64> = angles.into_iter().map(|a| C64::from_polar(1.0, a)).collect();
        Self {
            theta: DVector::from_vec(v),
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn coefficients(&self) -> &DVector<C64> {
        &self.theta
    }

    /// Same configuration times a common phasor `e^{iψ}`.
    pub fn rotated(&self, psi: f64) -> Self {
        Self {
            theta: &self.theta * C64::from_polar(1.0, psi),
        }
    }
}

/// DOA-driven reflection: `θ_n = e^{i(ix·u_h + iy·v_h)} · e^{-i(ix·u_G + iy·v_G)}`
/// on the same index layout as the UPA steering vector.
///
/// With exact phases this turns both LoS terms into all-ones vectors, so the
/// LoS amplitude becomes `N √(M P_E)`.
pub fn riss_phase_design(
    est_user: &SpatialPhases,
    est_hap: &SpatialPhases,
    geometry: &ArrayGeometry,
) -> RissPhaseConfig {
    let ny = geometry.ny;
    let du = est_user.u - est_hap.u;
    let dv = est_user.v - est_hap.v;
    let theta = DVector::from_fn(geometry.n_passive(), |n, _| {
        let (ix, iy) = (n / ny, n % ny);
        C64::from_polar(1.0, ix as f64 * du + iy as f64 * dv)
    });
    RissPhaseConfig { theta }
}

/// HAP beamformer (downlink precoder, `‖w‖² = P_E`) or uplink combiner
/// (`‖w‖ = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub w: DVector<C64>,
}

impl Precoder {
    pub fn power(&self) -> f64 {
        self.w.norm_squared()
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// `w = √P_E · β(z_G)`.
pub fn mrt_precoder(z_g: f64, m: usize, p_e: f64) -> Result<Precoder> {
    if m == 0 {
        return Err(invalid("m", "need at least one antenna"));
    }
    if !(p_e > 0.0) {
        return Err(invalid("p_e", "transmit power must be positive"));
    }
    Ok(Precoder {
        w: steering_ula(z_g, m) * C64::from(p_e.sqrt()),
    })
}

/// Unit-norm combiner collinear with `channel`.
pub fn mrc_combiner(channel: &DVector<C64>) -> Result<Precoder> {
    let norm = channel.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(Precoder {
        w: channel / C64::from(norm),
    })
}

/// Combiner the HAP can form from its own AOA `z_G` alone: MRC against the
/// LoS uplink direction `conj(β(z_G))`.
pub fn angle_mrc_combiner(z_g: f64, m: usize) -> Result<Precoder> {
    mrc_combiner(&steering_ula(z_g, m).conjugate())
}

fn check_dims(real: &ChannelRealization, phases: &RissPhaseConfig, beam: &Precoder) -> Result<()> {
    if phases.len() != real.n_passive() {
        return Err(Error::DimensionMismatch {
            expected: real.n_passive(),
            actual: phases.len(),
            context: "reflection coefficients vs. passive elements",
        });
    }
    if beam.len() != real.m_antennas() {
        return Err(Error::DimensionMismatch {
            expected: real.m_antennas(),
            actual: beam.len(),
            context: "beamformer vs. HAP antennas",
        });
    }
    Ok(())
}

/// `hᴴ Θ G w`.
pub fn downlink_amplitude(real: &ChannelRealization, phases: &RissPhaseConfig, w: &Precoder) -> Result<C64> {
    check_dims(real, phases, w)?;
    let gw = &real.g_matrix * &w.w;
    Ok(real
        .h_vector
        .iter()
        .zip(phases.theta.iter())
        .zip(gw.iter())
        .map(|((h, t), g)| h.conj() * t * g)
        .sum())
}

/// Instantaneous received energy `ϱ_H2U |hᴴ Θ G w|²`.
pub fn received_energy_instant(
    real: &ChannelRealization,
    phases: &RissPhaseConfig,
    w: &Precoder,
    cascade_loss: f64,
) -> Result<f64> {
    Ok(cascade_loss * downlink_amplitude(real, phases, w)?.norm_sqr())
}

/// Effective uplink channel at the HAP, `Gᵀ Θ conj(h)` (TDD reciprocity:
/// the uplink reuses the transposed downlink draw).
pub fn uplink_channel(real: &ChannelRealization, phases: &RissPhaseConfig) -> Result<DVector<C64>> {
    if phases.len() != real.n_passive() {
        return Err(Error::DimensionMismatch {
            expected: real.n_passive(),
            actual: phases.len(),
            context: "reflection coefficients vs. passive elements",
        });
    }
    let x = DVector::from_iterator(
        real.n_passive(),
        real.h_vector.iter().zip(phases.theta.iter()).map(|(h, t)| h.conj() * t),
    );
    Ok(real.g_matrix.transpose() * x)
}

/// `ϱ P_I |w̃ᴴ Gᵀ Θ conj(h)|² / σ²`.
pub fn uplink_snr_instant(
    real: &ChannelRealization,
    phases: &RissPhaseConfig,
    combiner: &Precoder,
    p_i: f64,
    sigma2: f64,
    cascade_loss: f64,
) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(invalid("sigma2", "noise power must be positive"));
    }
    if !(p_i >= 0.0) {
        return Err(invalid("p_i", "transmit power must be non-negative"));
    }
    check_dims(real, phases, combiner)?;
    let c = uplink_channel(real, phases)?;
    Ok(cascade_loss * p_i * combiner.w.dotc(&c).norm_sqr() / sigma2)
}

/// Received energy averaged over the NLoS fading for a fixed design, given
/// the LoS parts of the channel:
///
/// `ϱ [ a_h a_G |h̄ᴴΘḠw|² + a_h b_G N‖w‖² + b_h a_G ‖Ḡw‖² + b_h b_G N‖w‖² ]`
///
/// with `a = κ/(1+κ)`, `b = 1/(1+κ)`.
pub fn fading_averaged_energy(
    real: &ChannelRealization,
    phases: &RissPhaseConfig,
    w: &Precoder,
    cascade_loss: f64,
) -> Result<f64> {
    check_dims(real, phases, w)?;
    let (ah, bh) = rician_power_split(real.kappa_h);
    let (ag, bg) = rician_power_split(real.kappa_g);
    let n = real.n_passive() as f64;
    let gw = &real.g_los * &w.w;
    let los: C64 = real
        .h_los
        .iter()
        .zip(phases.theta.iter())
        .zip(gw.iter())
        .map(|((h, t), g)| h.conj() * t * g)
        .sum();
    let pw = w.power();
    let mean = ah * ag * los.norm_sqr() + ah * bg * n * pw + bh * ag * gw.norm_squared() + bh * bg * n * pw;
    Ok(cascade_loss * mean)
}

/// Stopping rule for [`fullcsi_alternating_opt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltOptConfig {
    /// Relative improvement below which the alternation stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AltOptConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FullCsiOutcome {
    pub precoder: Precoder,
    pub phases: RissPhaseConfig,
    /// Best energy found, including the cascade loss.
    pub energy: f64,
    /// Full alternation rounds performed.
    pub iterations: usize,
    /// `false` when `max_iter` ran out before the tolerance was met.
    pub converged: bool,
    /// Objective after every half-step (precoder update, then phase update).
    pub trace: Vec<f64>,
}

/// Perfect-CSI baseline: alternately set `w` to MRT toward `(hᴴΘG)ᴴ` and each
/// `θ_n` to cancel the phase of `conj(h_n)·(Gw)_n`, starting from `init`.
pub fn fullcsi_alternating_opt(
    real: &ChannelRealization,
    init: &RissPhaseConfig,
    p_e: f64,
    cascade_loss: f64,
    cfg: &AltOptConfig,
) -> Result<FullCsiOutcome> {
    if !(p_e > 0.0) {
        return Err(invalid("p_e", "transmit power must be positive"));
    }
    let n = real.n_passive();
    let m = real.m_antennas();
    if init.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: init.len(),
            context: "initial reflection vs. passive elements",
        });
    }
    let hc: Vec<C64> = real.h_vector.iter().map(|h| h.conj()).collect();
    let mut theta = init.theta.clone();
    let mut w = DVector::from_element(m, C64::from((p_e / m as f64).sqrt()));
    let mut trace = Vec::with_capacity(2 * cfg.max_iter);
    let mut best = 0.0_f64;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        iterations += 1;
        // precoder step: v_m = Σ_n conj(h_n) θ_n G_nm
        let x = DVector::from_iterator(n, hc.iter().zip(theta.iter()).map(|(h, t)| h * t));
        let v = real.g_matrix.transpose() * x;
        let vnorm = v.norm();
        if vnorm == 0.0 {
            trace.push(0.0);
            converged = true;
            break;
        }
        w = v.conjugate() * C64::from(p_e.sqrt() / vnorm);
        let after_w = p_e * vnorm * vnorm;
        trace.push(cascade_loss * after_w);

        // phase step
        let gw = &real.g_matrix * &w;
        let mut amp = 0.0;
        for (k, t) in theta.iter_mut().enumerate() {
            let c = hc[k] * gw[k];
            let r = c.norm();
            *t = if r > 0.0 { (c / r).conj() } else { C64::new(1.0, 0.0) };
            amp += r;
        }
        let after_theta = amp * amp;
        trace.push(cascade_loss * after_theta);

        let previous = best;
        best = after_theta;
        if previous > 0.0 && (best - previous) <= cfg.tol * best {
            converged = true;
            break;
        }
    }

    Ok(FullCsiOutcome {
        precoder: Precoder { w },
        phases: RissPhaseConfig { theta },
        energy: cascade_loss * best,
        iterations,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{synth_rician, SystemParams};
    use crate::rng::{substream, StreamRole};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params(m: usize, nx: usize, ny: usize, kappa: f64) -> SystemParams {
        SystemParams {
            geometry: ArrayGeometry::new(m, nx, ny, 0).unwrap(),
            kappa_g: kappa,
            kappa_h: kappa,
            ..SystemParams::default()
        }
    }

    fn doa_design(p: &SystemParams) -> (RissPhaseConfig, Precoder) {
        let hap = p.hap_phases();
        (
            riss_phase_design(&p.user_phases(), &hap, &p.geometry),
            mrt_precoder(hap.z, p.geometry.m_antennas, p.p_e_watts).unwrap(),
        )
    }

    #[test]
    fn mrt_examples() {
        let w = mrt_precoder(0.0, 4, 1.0).unwrap();
        assert!(w.w.iter().all(|x| (x - C64::new(0.5, 0.0)).norm() < 1e-12));
        let w = mrt_precoder(0.7, 1, 3.0).unwrap();
        assert!((w.w[0] - C64::new(3f64.sqrt(), 0.0)).norm() < 1e-12);
        let w = mrt_precoder(FRAC_PI_2, 2, 2.0).unwrap();
        assert!((w.w[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((w.w[1] - C64::new(0.0, 1.0)).norm() < 1e-12);
        assert!((w.power() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mrc_examples() {
        let x = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::default(), C64::default(), C64::default()]);
        assert_eq!(mrc_combiner(&x).unwrap().w, x);
        let y = DVector::from_vec(vec![C64::new(0.3, -1.0), C64::new(2.0, 0.5)]);
        let a = mrc_combiner(&y).unwrap();
        let b = mrc_combiner(&(&y * C64::new(-4.0, 2.5))).unwrap();
        // collinear with unit modulus ratio
        assert!((a.w.dotc(&b.w).norm() - 1.0).abs() < 1e-12);
        assert!((y.dotc(&a.w).norm_sqr() - y.norm_squared()).abs() < 1e-12);
        assert_eq!(mrc_combiner(&DVector::zeros(3)), Err(Error::ZeroVector));
    }

    #[test]
    fn perfect_design_collapses_los() {
        let p = params(4, 10, 10, f64::INFINITY);
        let (theta, w) = doa_design(&p);
        let r = synth_rician(&p, &mut substream(1, 0, StreamRole::ChannelG));
        // both LoS factors become all-ones vectors
        let hth: Vec<C64> = r
            .h_los
            .iter()
            .zip(theta.coefficients().iter())
            .map(|(h, t)| h.conj() * t)
            .collect();
        let user_phase = crate::geometry::los_h(&p.geometry, &p.user_phases());
        let _ = user_phase;
        let ghat = &r.g_los * &w.w;
        let n = p.n_passive();
        let mp = (p.geometry.m_antennas as f64 * p.p_e_watts).sqrt();
        let hap_only = riss_phase_design(&SpatialPhases::default(), &p.hap_phases(), &p.geometry);
        for k in 0..n {
            let user_only = hth[k] * hap_only.coefficients()[k].conj();
            assert!((user_only - C64::new(1.0, 0.0)).norm() < 1e-9);
            assert!((hap_only.coefficients()[k] * ghat[k] - C64::new(mp, 0.0)).norm() < 1e-9);
        }
        let e = received_energy_instant(&r, &theta, &w, 1.0).unwrap();
        let want = (n * n * p.geometry.m_antennas) as f64 * p.p_e_watts;
        assert!((e - want).abs() < 1e-8 * want);
    }

    #[test]
    fn design_with_errors_matches_error_steering() {
        let p = params(1, 4, 3, f64::INFINITY);
        let truth = p.user_phases();
        let xi = (0.07, -0.11);
        let est = SpatialPhases::new(truth.u - xi.0, truth.v - xi.1, 0.0);
        let theta_h = riss_phase_design(&est, &SpatialPhases::default(), &p.geometry);
        let h_los = crate::geometry::los_h(&p.geometry, &truth);
        let lhs: Vec<C64> = h_los
            .iter()
            .zip(theta_h.coefficients().iter())
            .map(|(h, t)| h.conj() * t)
            .collect();
        let rhs = crate::geometry::steering_upa(xi.0, xi.1, 4, 3).conjugate() * C64::from((12f64).sqrt());
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_surface() {
        let p = params(1, 1, 1, 2.0);
        let r = synth_rician(&p, &mut substream(2, 0, StreamRole::ChannelG));
        let w = mrt_precoder(0.0, 1, 1.0).unwrap();
        let a = received_energy_instant(&r, &RissPhaseConfig::from_angles([0.0]), &w, 1.0).unwrap();
        let b = received_energy_instant(&r, &RissPhaseConfig::from_angles([2.1]), &w, 1.0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn zero_user_channel_gives_zero() {
        let p = params(4, 3, 3, 1.0);
        let mut r = synth_rician(&p, &mut substream(3, 0, StreamRole::ChannelG));
        r.h_vector.fill(C64::default());
        let (theta, w) = doa_design(&p);
        assert_eq!(received_energy_instant(&r, &theta, &w, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = params(4, 3, 3, 1.0);
        let r = synth_rician(&p, &mut substream(3, 0, StreamRole::ChannelG));
        let w = mrt_precoder(0.0, 4, 1.0).unwrap();
        let short = RissPhaseConfig::from_angles([0.0; 5]);
        assert!(matches!(
            received_energy_instant(&r, &short, &w, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        let (theta, _) = doa_design(&p);
        let w3 = mrt_precoder(0.0, 3, 1.0).unwrap();
        assert!(received_energy_instant(&r, &theta, &w3, 1.0).is_err());
    }

    #[test]
    fn uplink_matches_downlink_symmetry() {
        let p = params(4, 5, 4, 1.5);
        let (theta, w) = doa_design(&p);
        let comb = angle_mrc_combiner(p.hap_phases().z, 4).unwrap();
        for t in 0..20 {
            let r = synth_rician(&p, &mut substream(9, t, StreamRole::ChannelG));
            let down = received_energy_instant(&r, &theta, &w, 1.0).unwrap() / p.p_e_watts;
            let snr = uplink_snr_instant(&r, &theta, &comb, 2.0, 0.5, 1.0).unwrap();
            assert!((snr - 4.0 * down).abs() < 1e-9 * snr.max(1.0));
            assert_eq!(uplink_snr_instant(&r, &theta, &comb, 0.0, 0.5, 1.0).unwrap(), 0.0);
        }
        let r = synth_rician(&p, &mut substream(9, 0, StreamRole::ChannelG));
        assert!(uplink_snr_instant(&r, &theta, &comb, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn pure_los_uplink_collapse() {
        let p = params(4, 6, 6, f64::INFINITY);
        let (theta, _) = doa_design(&p);
        let comb = angle_mrc_combiner(p.hap_phases().z, 4).unwrap();
        let r = synth_rician(&p, &mut substream(1, 1, StreamRole::ChannelG));
        let snr = uplink_snr_instant(&r, &theta, &comb, 1e-3, 1e-11, 2e-9).unwrap();
        let want = 2e-9 * 1e-3 * (36.0 * 36.0 * 4.0) / 1e-11;
        assert!((snr - want).abs() < 1e-9 * want);
    }

    #[test]
    fn fading_average_matches_sample_mean() {
        let p = params(3, 4, 4, 2.0);
        let (theta, w) = doa_design(&p);
        let r0 = synth_rician(&p, &mut substream(4, 0, StreamRole::ChannelG));
        let exact = fading_averaged_energy(&r0, &theta, &w, 1.0).unwrap();
        let trials = 100_000;
        let mean: f64 = (0..trials)
            .map(|t| {
                let r = synth_rician(&p, &mut substream(4, t, StreamRole::ChannelG));
                received_energy_instant(&r, &theta, &w, 1.0).unwrap()
            })
            .sum::<f64>()
            / trials as f64;
        assert!((mean / exact - 1.0).abs() < 0.01, "{mean} vs {exact}");
    }

    #[test]
    fn fullcsi_pure_los_is_immediate() {
        let p = params(4, 6, 6, f64::INFINITY);
        let (theta, _) = doa_design(&p);
        let r = synth_rician(&p, &mut substream(5, 0, StreamRole::ChannelG));
        let out = fullcsi_alternating_opt(&r, &theta, 1.0, 0.5, &AltOptConfig::default()).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 2);
        let want = 0.5 * 36.0 * 36.0 * 4.0;
        assert!((out.energy - want).abs() < 1e-9 * want);
    }

    #[test]
    fn fullcsi_scalar_channel() {
        let p = params(1, 1, 1, 0.5);
        let r = synth_rician(&p, &mut substream(6, 0, StreamRole::ChannelG));
        let out = fullcsi_alternating_opt(
            &r,
            &RissPhaseConfig::from_angles([0.0]),
            2.0,
            0.1,
            &AltOptConfig::default(),
        )
        .unwrap();
        let want = 0.1 * 2.0 * r.h_vector[0].norm_sqr() * r.g_matrix[(0, 0)].norm_sqr();
        assert!((out.energy - want).abs() < 1e-12 * want.max(1e-300));
        assert!(out.converged);
    }

    /// Exhaustive 64-level phase grid (first element pinned by global-phase
    /// invariance) with the optimal MRT precoder for each grid point.
    fn grid_search(r: &ChannelRealization, p_e: f64) -> f64 {
        let levels = 64;
        let n = r.n_passive();
        assert_eq!(n, 4);
        let phasor: Vec<C64> = (0..levels)
            .map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / levels as f64))
            .collect();
        let rows: Vec<Vec<C64>> = (0..n)
            .map(|k| r.g_matrix.row(k).iter().map(|g| r.h_vector[k].conj() * g).collect())
            .collect();
        let m = r.m_antennas();
        let mut best = 0.0_f64;
        for a in 0..levels {
            for b in 0..levels {
                for c in 0..levels {
                    let t = [C64::new(1.0, 0.0), phasor[a], phasor[b], phasor[c]];
                    let v2: f64 = (0..m)
                        .map(|col| {
                            rows.iter()
                                .zip(&t)
                                .map(|(row, tk)| row[col] * tk)
                                .sum::<C64>()
                                .norm_sqr()
                        })
                        .sum();
                    best = best.max(v2);
                }
            }
        }
        p_e * best
    }

    #[test]
    fn fullcsi_matches_grid_oracle() {
        let p = params(2, 2, 2, 0.5);
        let (theta, _) = doa_design(&p);
        for t in 0..4 {
            let r = synth_rician(&p, &mut substream(21, t, StreamRole::ChannelG));
            let out = fullcsi_alternating_opt(&r, &theta, 1.0, 1.0, &AltOptConfig::default()).unwrap();
            let grid = grid_search(&r, 1.0);
            assert!(
                (out.energy - grid).abs() <= 0.005 * grid,
                "trial {t}: alt-opt {} vs grid {grid}",
                out.energy
            );
        }
    }

    proptest! {
        #[test]
        fn fullcsi_monotone_and_dominant(seed in 0u64..500, kappa in 0.0f64..20.0) {
            let p = params(3, 4, 3, kappa);
            let (theta, w) = doa_design(&p);
            let r = synth_rician(&p, &mut substream(seed, 0, StreamRole::ChannelG));
            let doa = received_energy_instant(&r, &theta, &w, 1.0).unwrap();
            let out = fullcsi_alternating_opt(&r, &theta, p.p_e_watts, 1.0, &AltOptConfig::default()).unwrap();
            for pair in out.trace.windows(2) {
                prop_assert!(pair[1] >= pair[0] * (1.0 - 1e-12));
            }
            prop_assert!(out.energy >= doa * (1.0 - 1e-12));
        }

        #[test]
        fn energy_invariant_to_common_rotation(seed in 0u64..500, psi in -PI..PI) {
            let p = params(4, 3, 3, 1.0);
            let (theta, w) = doa_design(&p);
            let r = synth_rician(&p, &mut substream(seed, 0, StreamRole::ChannelG));
            let a = received_energy_instant(&r, &theta, &w, 1.0).unwrap();
            let b = received_energy_instant(&r, &theta.rotated(psi), &w, 1.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        }
    }
}
