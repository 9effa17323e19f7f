//! Array geometry, spatial phases, steering vectors, path loss and Rician
//! channel synthesis.
//!
//! Conventions used throughout the crate:
//!
//! * Passive element `(ix, iy)` of the `nx × ny` grid sits at flat index
//!   `ix * ny + iy`, i.e. the UPA steering vector is the Kronecker product
//!   `α_x(u) ⊗ α_y(v)` with 0-based exponents.
//! * Half-wavelength spacing: `u = π cos φ`, `v = π sin φ cos ϑ`,
//!   `z = π sin ϖ`.
//! * `G` is `N × M` (HAP to surface), `h` is `N × 1` (surface to user) and the
//!   downlink amplitude is `hᴴ Θ G w`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{invalid, Result};
use crate::rng::cscg;
use crate::C64;

/// Antenna counts and surface layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayGeometry {
    /// HAP uniform linear array size `M`.
    pub m_antennas: usize,
    /// Passive grid columns along the x axis.
    pub nx: usize,
    /// Passive grid rows along the y axis.
    pub ny: usize,
    /// Active (sensing) elements arranged as an L-array.
    pub na: usize,
}

impl ArrayGeometry {
    pub fn new(m_antennas: usize, nx: usize, ny: usize, na: usize) -> Result<Self> {
        if m_antennas == 0 {
            return Err(invalid("m_antennas", "must be at least 1"));
        }
        if nx == 0 || ny == 0 {
            return Err(invalid("nx/ny", "passive grid must contain at least one element"));
        }
        if na == 1 || na == 2 {
            return Err(invalid("na", "an L-array needs at least 3 elements (or 0 for none)"));
        }
        Ok(Self { m_antennas, nx, ny, na })
    }

    /// Number of passive elements `N = nx · ny`.
    pub fn n_passive(&self) -> usize {
        self.nx * self.ny
    }

    /// Lengths of the x and y arms of the sensing L-array, both counting the
    /// shared corner element.
    pub fn l_array_arms(&self) -> Option<(usize, usize)> {
        if self.na < 3 {
            return None;
        }
        let x_arm = self.na.div_ceil(2);
        Some((x_arm, self.na - x_arm + 1))
    }

    /// Grid offsets `(ix, iy)` of every active element; the corner `(0, 0)`
    /// appears once.
    pub fn active_positions(&self) -> Vec<(usize, usize)> {
        let Some((lx, ly)) = self.l_array_arms() else {
            return Vec::new();
        };
        let mut out: Vec<(usize, usize)> = (0..lx).map(|ix| (ix, 0)).collect();
        out.extend((1..ly).map(|iy| (0, iy)));
        out
    }
}

/// Propagation angles in radians.
///
/// For the HAP link `phi`/`theta` are the azimuth/elevation seen at the
/// surface and `varpi` the departure angle at the HAP. For the user link
/// `varpi` is unused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSet {
    pub phi: f64,
    pub theta: f64,
    pub varpi: f64,
}

impl AngleSet {
    pub fn new(phi: f64, theta: f64, varpi: f64) -> Result<Self> {
        for (name, a) in [("phi", phi), ("theta", theta), ("varpi", varpi)] {
            if !a.is_finite() || a.abs() >= FRAC_PI_2 {
                return Err(invalid(name, format!("{a} is outside (-pi/2, pi/2)")));
            }
        }
        Ok(Self { phi, theta, varpi })
    }
}

/// Inter-element phase increments along x (`u`), y (`v`) and the HAP ULA (`z`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpatialPhases {
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

impl SpatialPhases {
    pub fn new(u: f64, v: f64, z: f64) -> Self {
        Self { u, v, z }
    }
}

pub fn angles_to_phases(angles: &AngleSet) -> SpatialPhases {
    SpatialPhases {
        u: PI * angles.phi.cos(),
        v: PI * angles.phi.sin() * angles.theta.cos(),
        z: PI * angles.varpi.sin(),
    }
}

/// Unit-norm ULA response `e^{i n z} / √len`, `n = 0..len`.
pub fn steering_ula(z: f64, len: usize) -> DVector<C64> {
    let scale = 1.0 / (len as f64).sqrt();
    DVector::from_fn(len, |n, _| C64::from_polar(scale, n as f64 * z))
}

/// Unit-norm UPA response `α_x(u) ⊗ α_y(v)`.
pub fn steering_upa(u: f64, v: f64, nx: usize, ny: usize) -> DVector<C64> {
    let scale = 1.0 / ((nx * ny) as f64).sqrt();
    DVector::from_fn(nx * ny, |n, _| {
        let (ix, iy) = (n / ny, n % ny);
        C64::from_polar(scale, ix as f64 * u + iy as f64 * v)
    })
}

/// Log-distance path loss with a reference loss at 1 m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub ref_loss_db: f64,
    pub exponent: f64,
    pub d_hap_riss_m: f64,
    pub d_riss_user_m: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            ref_loss_db: 30.0,
            exponent: 2.2,
            d_hap_riss_m: 12.0,
            d_riss_user_m: 3.0,
        }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.ref_loss_db >= 0.0) {
            return Err(invalid("ref_loss_db", "must be non-negative"));
        }
        if !(self.exponent >= 0.0) {
            return Err(invalid("exponent", "must be non-negative"));
        }
        if !(self.d_hap_riss_m > 0.0) || !(self.d_riss_user_m > 0.0) {
            return Err(invalid("distance", "link distances must be positive"));
        }
        Ok(())
    }

    /// Linear power gain `10^{-L0/10} · d^{-exponent}`.
    pub fn path_loss_linear(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(invalid("distance", format!("{d} m is not a positive distance")));
        }
        Ok(10f64.powf(-self.ref_loss_db / 10.0) * d.powf(-self.exponent))
    }

    /// Cascade gain HAP → surface → user, `ϱ_H2R · ϱ_R2U`.
    pub fn cascade(&self) -> Result<f64> {
        Ok(self.path_loss_linear(self.d_hap_riss_m)? * self.path_loss_linear(self.d_riss_user_m)?)
    }
}

/// Amplitude weights `(√(κ/(1+κ)), √(1/(1+κ)))`; `κ = ∞` is pure LoS.
pub fn rician_weights(kappa: f64) -> (f64, f64) {
    if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
    }
}

/// Power weights `(κ/(1+κ), 1/(1+κ))`.
pub(crate) fn rician_power_split(kappa: f64) -> (f64, f64) {
    let (a, b) = rician_weights(kappa);
    (a * a, b * b)
}

/// Full scenario parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub geometry: ArrayGeometry,
    pub kappa_g: f64,
    pub kappa_h: f64,
    pub pathloss: PathLossModel,
    pub p_e_watts: f64,
    pub p_i_watts: f64,
    pub noise_sigma2_watts: f64,
    /// `(φ_G, ϑ_G, ϖ_G)`.
    pub hap_angles: AngleSet,
    /// `(φ_h, ϑ_h)`; `varpi` ignored.
    pub user_angles: AngleSet,
}

impl Default for SystemParams {
    /// M = 4, N = 10 × 10, κ = 1, 12 m / 3 m at 30 dB + exponent 2.2,
    /// P_E = 1 W, P_I = 1 mW, σ² = −80 dBm.
    fn default() -> Self {
        Self {
            geometry: ArrayGeometry {
                m_antennas: 4,
                nx: 10,
                ny: 10,
                na: 19,
            },
            kappa_g: 1.0,
            kappa_h: 1.0,
            pathloss: PathLossModel::default(),
            p_e_watts: 1.0,
            p_i_watts: 1e-3,
            noise_sigma2_watts: 1e-11,
            hap_angles: AngleSet {
                phi: 0.3,
                theta: 0.2,
                varpi: 0.25,
            },
            user_angles: AngleSet {
                phi: -0.4,
                theta: 0.5,
                varpi: 0.0,
            },
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        ArrayGeometry::new(
            self.geometry.m_antennas,
            self.geometry.nx,
            self.geometry.ny,
            self.geometry.na,
        )?;
        for (name, k) in [("kappa_g", self.kappa_g), ("kappa_h", self.kappa_h)] {
            if !(k >= 0.0) {
                return Err(invalid(name, format!("Rician factor {k} must be non-negative")));
            }
        }
        self.pathloss.validate()?;
        if !(self.p_e_watts > 0.0) {
            return Err(invalid("p_e_watts", "must be positive"));
        }
        if !(self.p_i_watts >= 0.0) {
            return Err(invalid("p_i_watts", "must be non-negative"));
        }
        if !(self.noise_sigma2_watts > 0.0) {
            return Err(invalid("noise_sigma2_watts", "must be positive"));
        }
        AngleSet::new(self.hap_angles.phi, self.hap_angles.theta, self.hap_angles.varpi)?;
        AngleSet::new(self.user_angles.phi, self.user_angles.theta, 0.0)?;
        Ok(())
    }

    pub fn n_passive(&self) -> usize {
        self.geometry.n_passive()
    }

    /// `ϱ_H2U = ϱ_H2R · ϱ_R2U`.
    pub fn cascade_loss(&self) -> f64 {
        self.pathloss
            .cascade()
            .expect("path-loss model validated at construction")
    }

    pub fn hap_phases(&self) -> SpatialPhases {
        angles_to_phases(&self.hap_angles)
    }

    pub fn user_phases(&self) -> SpatialPhases {
        angles_to_phases(&self.user_angles)
    }
}

/// One draw of `G` and `h` together with their LoS / NLoS parts.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub g_matrix: DMatrix<C64>,
    pub h_vector: DVector<C64>,
    pub g_los: DMatrix<C64>,
    pub g_nlos: DMatrix<C64>,
    pub h_los: DVector<C64>,
    pub h_nlos: DVector<C64>,
    pub kappa_g: f64,
    pub kappa_h: f64,
}

impl ChannelRealization {
    /// Rician mixing of the stored parts.
    pub fn from_parts(
        g_los: DMatrix<C64>,
        g_nlos: DMatrix<C64>,
        h_los: DVector<C64>,
        h_nlos: DVector<C64>,
        kappa_g: f64,
        kappa_h: f64,
    ) -> Self {
        let (ga, gb) = rician_weights(kappa_g);
        let (ha, hb) = rician_weights(kappa_h);
        let g_matrix = &g_los * C64::from(ga) + &g_nlos * C64::from(gb);
        let h_vector = &h_los * C64::from(ha) + &h_nlos * C64::from(hb);
        Self {
            g_matrix,
            h_vector,
            g_los,
            g_nlos,
            h_los,
            h_nlos,
            kappa_g,
            kappa_h,
        }
    }

    pub fn n_passive(&self) -> usize {
        self.h_vector.len()
    }

    pub fn m_antennas(&self) -> usize {
        self.g_matrix.ncols()
    }
}

/// LoS part of `G`: `√(MN) α(u_G, v_G) βᴴ(z_G)`.
pub fn los_g(geometry: &ArrayGeometry, hap: &SpatialPhases) -> DMatrix<C64> {
    let n = geometry.n_passive();
    let m = geometry.m_antennas;
    let alpha = steering_upa(hap.u, hap.v, geometry.nx, geometry.ny);
    let beta = steering_ula(hap.z, m);
    alpha * beta.adjoint() * C64::from(((m * n) as f64).sqrt())
}

/// LoS part of `h`: `√N α(u_h, v_h)`.
pub fn los_h(geometry: &ArrayGeometry, user: &SpatialPhases) -> DVector<C64> {
    let n = geometry.n_passive();
    steering_upa(user.u, user.v, geometry.nx, geometry.ny) * C64::from((n as f64).sqrt())
}

/// Draws one Rician realization.
///
/// `G`'s NLoS entries are drawn first (column-major), then `h`'s.
pub fn synth_rician<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> ChannelRealization {
    let geometry = &params.geometry;
    let n = geometry.n_passive();
    let m = geometry.m_antennas;
    let g_nlos = DMatrix::from_fn(n, m, |_, _| cscg(rng));
    let h_nlos = DVector::from_fn(n, |_, _| cscg(rng));
    ChannelRealization::from_parts(
        los_g(geometry, &params.hap_phases()),
        g_nlos,
        los_h(geometry, &params.user_phases()),
        h_nlos,
        params.kappa_g,
        params.kappa_h,
    )
}

/// Like [`synth_rician`], but draws `G` and `h` from separate streams.
pub fn synth_rician_split<R: Rng + ?Sized, S: Rng + ?Sized>(
    params: &SystemParams,
    g_rng: &mut R,
    h_rng: &mut S,
) -> ChannelRealization {
    let geometry = &params.geometry;
    let n = geometry.n_passive();
    let m = geometry.m_antennas;
    let g_nlos = DMatrix::from_fn(n, m, |_, _| cscg(g_rng));
    let h_nlos = DVector::from_fn(n, |_, _| cscg(h_rng));
    ChannelRealization::from_parts(
        los_g(geometry, &params.hap_phases()),
        g_nlos,
        los_h(geometry, &params.user_phases()),
        h_nlos,
        params.kappa_g,
        params.kappa_h,
    )
}

/// Wraps an angle to `[-π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    if (-PI..=PI).contains(&x) {
        return x;
    }
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI && x > 0.0 {
        PI
    } else {
        y
    }
}
