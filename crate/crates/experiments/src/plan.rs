//! Outage-constrained transmit power planning.

use std::fmt;

use riss_core::distribution::{required_transmit_power_with, GammaParams, QuantileConvention};

use crate::config::{ErrorKind, ScenarioConfig};
use crate::error::{config_error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub power_watts: f64,
    pub power_dbm: f64,
    pub threshold_dbm: f64,
    pub p_out: f64,
    /// Energy law at 1 W.
    pub unit_gamma: GammaParams,
    pub unit_quantile: f64,
    pub convention: QuantileConvention,
    pub assumptions: Vec<String>,
}

pub fn plan_power(
    cfg: &ScenarioConfig,
    threshold_dbm: f64,
    p_out: f64,
    convention: QuantileConvention,
) -> Result<PowerReport> {
    if cfg.errors.kind != ErrorKind::None {
        return Err(config_error(
            "errors.kind",
            "power planning uses the error-free energy law",
        ));
    }
    let params = cfg.params()?;
    let plan = required_transmit_power_with(&params, riss_core::dbm_to_watts(threshold_dbm), p_out, convention)?;
    let quantile = match convention {
        QuantileConvention::OutageQuantile => format!("T matched to the {p_out} quantile of the energy"),
        QuantileConvention::Literal => format!("T matched to the {} quantile of the energy", 1.0 - p_out),
    };
    Ok(PowerReport {
        power_watts: plan.power_watts,
        power_dbm: riss_core::to_db(plan.power_watts) + 30.0,
        threshold_dbm,
        p_out,
        unit_gamma: plan.unit_gamma,
        unit_quantile: plan.unit_quantile,
        convention,
        assumptions: vec![
            "energy approximated by a moment-matched Gamma law".into(),
            "perfect angle estimates".into(),
            "received energy linear in transmit power".into(),
            quantile,
        ],
    })
}

impl fmt::Display for PowerReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "required power: {:.6e} W ({:.3} dBm)",
            self.power_watts, self.power_dbm
        )?;
        writeln!(
            f,
            "threshold: {} dBm, outage target: {}",
            self.threshold_dbm, self.p_out
        )?;
        writeln!(
            f,
            "gamma at 1 W: alpha = {:.6}, beta = {:.6e}, quantile = {:.6e} W",
            self.unit_gamma.alpha, self.unit_gamma.beta, self.unit_quantile
        )?;
        for a in &self.assumptions {
            writeln!(f, "assumes: {a}")?;
        }
        Ok(())
    }
}
