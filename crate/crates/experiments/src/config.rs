//! Scenario configuration (TOML).
//!
//! Every section and field is optional; omitted values fall back to the
//! reference setup: M = 4, N = 10 × 10, 12 m / 3 m links, 30 dB loss at
//! 1 m, exponent 2.2, P_E = 1 W, P_I = 1 mW, σ² = −80 dBm.

use std::path::Path;

use serde::Deserialize;

use riss_core::analytics::{DoaErrorModel, Eta};
use riss_core::geometry::{AngleSet, ArrayGeometry, PathLossModel, SystemParams};
use riss_core::montecarlo::{ErrorInjection, HarvestModel, McConfig};

use crate::error::{config_error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub id: String,
    pub geometry: GeometrySection,
    pub channel: ChannelSection,
    pub angles: AnglesSection,
    pub power: PowerSection,
    pub noise: NoiseSection,
    pub errors: ErrorsSection,
    pub mc: McSection,
    pub pilot: PilotSection,
    pub harvest: HarvestSection,
    pub sweep: SweepSection,
    pub metrics: Vec<Metric>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            id: "default".into(),
            geometry: GeometrySection::default(),
            channel: ChannelSection::default(),
            angles: AnglesSection::default(),
            power: PowerSection::default(),
            noise: NoiseSection::default(),
            errors: ErrorsSection::default(),
            mc: McSection::default(),
            pilot: PilotSection::default(),
            harvest: HarvestSection::default(),
            sweep: SweepSection::default(),
            metrics: vec![Metric::Energy],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub m: usize,
    pub nx: usize,
    pub ny: usize,
    pub na: usize,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            m: 4,
            nx: 10,
            ny: 10,
            na: 19,
        }
    }
}

/// Rician factors accept `inf` for pure LoS.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub kappa_h: f64,
    pub kappa_g: f64,
    pub d_hap_riss_m: f64,
    pub d_riss_user_m: f64,
    pub ref_loss_db: f64,
    pub exponent: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let pl = PathLossModel::default();
        Self {
            kappa_h: 1.0,
            kappa_g: 1.0,
            d_hap_riss_m: pl.d_hap_riss_m,
            d_riss_user_m: pl.d_riss_user_m,
            ref_loss_db: pl.ref_loss_db,
            exponent: pl.exponent,
        }
    }
}

/// Directions in radians.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnglesSection {
    pub hap_phi: f64,
    pub hap_theta: f64,
    pub hap_varpi: f64,
    pub user_phi: f64,
    pub user_theta: f64,
}

impl Default for AnglesSection {
    fn default() -> Self {
        let p = SystemParams::default();
        Self {
            hap_phi: p.hap_angles.phi,
            hap_theta: p.hap_angles.theta,
            hap_varpi: p.hap_angles.varpi,
            user_phi: p.user_angles.phi,
            user_theta: p.user_angles.theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerSection {
    pub p_e_watts: f64,
    pub p_i_watts: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            p_e_watts: 1.0,
            p_i_watts: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub sigma2_dbm: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { sigma2_dbm: -80.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    #[default]
    None,
    /// Gaussian errors on the spatial phases `u`, `v`, `z`.
    Phase,
    /// Gaussian errors on the angles, with random true directions.
    Angle,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorsSection {
    pub kind: ErrorKind,
    pub sigma_hu: f64,
    pub sigma_hv: f64,
    pub sigma_gu: f64,
    pub sigma_gv: f64,
    pub sigma_gz: f64,
    pub sigma_doa_h: f64,
    pub sigma_doa_g: f64,
    pub sigma_doa_p: f64,
    pub eta_u: f64,
    pub eta_v: f64,
    pub eta_z: f64,
    /// Range of the random true angles in degrees (angle errors only).
    pub angle_range_deg: [f64; 2],
}

impl Default for ErrorsSection {
    fn default() -> Self {
        let eta = Eta::default();
        Self {
            kind: ErrorKind::None,
            sigma_hu: 0.0,
            sigma_hv: 0.0,
            sigma_gu: 0.0,
            sigma_gv: 0.0,
            sigma_gz: 0.0,
            sigma_doa_h: 0.0,
            sigma_doa_g: 0.0,
            sigma_doa_p: 0.0,
            eta_u: eta.u,
            eta_v: eta.v,
            eta_z: eta.z,
            angle_range_deg: [-60.0, 60.0],
        }
    }
}

impl ErrorsSection {
    pub fn model(&self) -> DoaErrorModel {
        DoaErrorModel {
            sigma_hu: self.sigma_hu,
            sigma_hv: self.sigma_hv,
            sigma_gu: self.sigma_gu,
            sigma_gv: self.sigma_gv,
            sigma_gz: self.sigma_gz,
            sigma_doa_h: self.sigma_doa_h,
            sigma_doa_g: self.sigma_doa_g,
            sigma_doa_p: self.sigma_doa_p,
            eta: Eta {
                u: self.eta_u,
                v: self.eta_v,
                z: self.eta_z,
            },
        }
    }

    pub fn injection(&self) -> ErrorInjection {
        match self.kind {
            ErrorKind::None => ErrorInjection::None,
            ErrorKind::Phase => ErrorInjection::Phase(self.model()),
            ErrorKind::Angle => ErrorInjection::Angle {
                model: self.model(),
                angle_range: (
                    self.angle_range_deg[0].to_radians(),
                    self.angle_range_deg[1].to_radians(),
                ),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub trials: usize,
    pub seed: u64,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            trials: 10_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PilotSection {
    pub t_c: usize,
}

impl Default for PilotSection {
    fn default() -> Self {
        Self { t_c: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarvestSection {
    pub me: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for HarvestSection {
    fn default() -> Self {
        let h = HarvestModel::default();
        Self {
            me: h.me,
            a: h.a,
            b: h.b,
        }
    }
}

impl HarvestSection {
    pub fn model(&self) -> HarvestModel {
        HarvestModel {
            me: self.me,
            a: self.a,
            b: self.b,
        }
    }
}

/// Parameter a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    KappaH,
    KappaG,
    /// Both Rician factors together.
    Kappa,
    M,
    /// Square surface side, `nx = ny`.
    NSide,
    Na,
    DHapRissM,
    DRissUserM,
    PEWatts,
    PEDbm,
    PIWatts,
    /// Angle-domain deviation applied to user, surface and HAP angles.
    SigmaDoa,
    /// Phase-domain deviation applied to all five phases.
    SigmaPhase,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            Self::KappaH => "kappa_h",
            Self::KappaG => "kappa_g",
            Self::Kappa => "kappa",
            Self::M => "m",
            Self::NSide => "n_side",
            Self::Na => "na",
            Self::DHapRissM => "d_hap_riss_m",
            Self::DRissUserM => "d_riss_user_m",
            Self::PEWatts => "p_e_watts",
            Self::PEDbm => "p_e_dbm",
            Self::PIWatts => "p_i_watts",
            Self::SigmaDoa => "sigma_doa",
            Self::SigmaPhase => "sigma_phase",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub variable: Option<SweepVariable>,
    pub values: Vec<f64>,
}

/// Quantities a scenario reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Mean received energy (W).
    Energy,
    /// Uplink ergodic spectral efficiency (bit/s/Hz).
    Se,
    /// Proposed design against the perfect-CSI baseline, with and without
    /// pilot overhead (W).
    FullCsi,
    /// Mean harvested power through the logistic harvester (W).
    Harvest,
}

fn as_count(path: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(config_error(path, format!("{v} is not a non-negative integer")))
    }
}

impl ScenarioConfig {
    /// Parses TOML, reporting the path of the offending key on failure.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_error("<document>", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.params().map_err(|e| config_error("<scenario>", e.to_string()))?;
        self.errors
            .model()
            .validate()
            .map_err(|e| config_error("errors", e.to_string()))?;
        if self.mc.trials == 0 {
            return Err(config_error("mc.trials", "must be at least 1"));
        }
        if self.pilot.t_c < 2 {
            return Err(config_error("pilot.t_c", "coherence block too short"));
        }
        self.harvest
            .model()
            .validate()
            .map_err(|e| config_error("harvest", e.to_string()))?;
        if self.sweep.variable.is_none() && !self.sweep.values.is_empty() {
            return Err(config_error("sweep.variable", "values given without a variable"));
        }
        if let Some(var) = self.sweep.variable {
            for (i, v) in self.sweep.values.iter().enumerate() {
                self.with_sweep(var, *v)
                    .map_err(|e| config_error(format!("sweep.values[{i}]"), e.to_string()))?;
            }
        }
        let [lo, hi] = self.errors.angle_range_deg;
        if self.errors.kind == ErrorKind::Angle && !(lo < hi && lo > -90.0 && hi < 90.0) {
            return Err(config_error("errors.angle_range_deg", "need -90 < lo < hi < 90"));
        }
        Ok(())
    }

    pub fn params(&self) -> riss_core::Result<SystemParams> {
        let g = &self.geometry;
        let c = &self.channel;
        let a = &self.angles;
        let p = SystemParams {
            geometry: ArrayGeometry::new(g.m, g.nx, g.ny, g.na)?,
            kappa_g: c.kappa_g,
            kappa_h: c.kappa_h,
            pathloss: PathLossModel {
                ref_loss_db: c.ref_loss_db,
                exponent: c.exponent,
                d_hap_riss_m: c.d_hap_riss_m,
                d_riss_user_m: c.d_riss_user_m,
            },
            p_e_watts: self.power.p_e_watts,
            p_i_watts: self.power.p_i_watts,
            noise_sigma2_watts: riss_core::dbm_to_watts(self.noise.sigma2_dbm),
            hap_angles: AngleSet::new(a.hap_phi, a.hap_theta, a.hap_varpi)?,
            user_angles: AngleSet::new(a.user_phi, a.user_theta, 0.0)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn mc_config(&self, keep_samples: bool) -> McConfig {
        McConfig {
            n_trials: self.mc.trials,
            seed: self.mc.seed,
            error_injection: self.errors.injection(),
            keep_samples,
        }
    }

    /// Copy with one swept parameter replaced.
    pub fn with_sweep(&self, var: SweepVariable, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let name = var.name();
        match var {
            SweepVariable::KappaH => c.channel.kappa_h = value,
            SweepVariable::KappaG => c.channel.kappa_g = value,
            SweepVariable::Kappa => {
                c.channel.kappa_h = value;
                c.channel.kappa_g = value;
            }
            SweepVariable::M => c.geometry.m = as_count(name, value)?,
            SweepVariable::NSide => {
                let n = as_count(name, value)?;
                c.geometry.nx = n;
                c.geometry.ny = n;
            }
            SweepVariable::Na => c.geometry.na = as_count(name, value)?,
            SweepVariable::DHapRissM => c.channel.d_hap_riss_m = value,
            SweepVariable::DRissUserM => c.channel.d_riss_user_m = value,
            SweepVariable::PEWatts => c.power.p_e_watts = value,
            SweepVariable::PEDbm => c.power.p_e_watts = riss_core::dbm_to_watts(value),
            SweepVariable::PIWatts => c.power.p_i_watts = value,
            SweepVariable::SigmaDoa => {
                c.errors.sigma_doa_h = value;
                c.errors.sigma_doa_g = value;
                c.errors.sigma_doa_p = value;
            }
            SweepVariable::SigmaPhase => {
                c.errors.sigma_hu = value;
                c.errors.sigma_hv = value;
                c.errors.sigma_gu = value;
                c.errors.sigma_gv = value;
                c.errors.sigma_gz = value;
            }
        }
        c.params().map_err(|e| config_error(name, e.to_string()))?;
        Ok(c)
    }
}
