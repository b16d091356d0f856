//! Parametric SBS antenna pattern: vertical attenuation and the combined
//! elevation/azimuth gain used in 3D mode.
//!
//! All gains returned here are power gains. Channel rows use their square
//! roots (amplitudes).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternParams {
    pub theta_3db_deg: f64,
    /// Maximum side-lobe attenuation; `None` means unbounded.
    #[serde(default)]
    pub sla_v_db: Option<f64>,
    #[serde(default)]
    pub phi_3db_deg: Option<f64>,
    #[serde(default)]
    pub a_m_linear: Option<f64>,
}

impl Default for PatternParams {
    fn default() -> Self {
        Self {
            theta_3db_deg: 10.0,
            sla_v_db: None,
            phi_3db_deg: Some(70.0),
            a_m_linear: Some(1.0),
        }
    }
}

impl PatternParams {
    pub fn validate(&self, needs_3d: bool) -> Result<()> {
        if !(self.theta_3db_deg > 0.0) || !self.theta_3db_deg.is_finite() {
            return Err(Error::Config(format!(
                "pattern.theta_3db_deg must be > 0, got {}",
                self.theta_3db_deg
            )));
        }
        if let Some(sla) = self.sla_v_db {
            if !(sla > 0.0) {
                return Err(Error::Config(format!("pattern.sla_v_db must be > 0, got {sla}")));
            }
        }
        if let Some(phi) = self.phi_3db_deg {
            if !(phi > 0.0) || !phi.is_finite() {
                return Err(Error::Config(format!("pattern.phi_3db_deg must be > 0, got {phi}")));
            }
        }
        if let Some(am) = self.a_m_linear {
            if !(am > 0.0) || !am.is_finite() {
                return Err(Error::Config(format!("pattern.a_m_linear must be > 0, got {am}")));
            }
        }
        if needs_3d {
            self.azimuth_params()?;
        }
        Ok(())
    }

    fn azimuth_params(&self) -> Result<(f64, f64)> {
        match (self.phi_3db_deg, self.a_m_linear) {
            (Some(phi), Some(am)) => Ok((phi, am)),
            _ => Err(Error::Config(
                "3D pattern requires pattern.phi_3db_deg and pattern.a_m_linear".into(),
            )),
        }
    }
}

/// Vertical attenuation in dB (always `<= 0`).
pub fn vertical_attenuation_db(theta_tilt_deg: f64, theta_x_deg: f64, params: &PatternParams) -> f64 {
    let offset = (theta_x_deg - theta_tilt_deg) / params.theta_3db_deg;
    let quadratic = 12.0 * offset * offset;
    -match params.sla_v_db {
        Some(sla) => quadratic.min(sla),
        None => quadratic,
    }
}

/// Linear power gain `A_V^x` in `(0, 1]`.
pub fn vertical_gain_linear(theta_tilt_deg: f64, theta_x_deg: f64, params: &PatternParams) -> f64 {
    10f64.powf(vertical_attenuation_db(theta_tilt_deg, theta_x_deg, params) / 10.0)
}

/// Combined elevation and azimuth gain, `A_m 10^(-1.2 [(dθ/θ3dB)² + (dφ/φ3dB)²])`.
pub fn gain_3d_linear(
    theta_tilt_deg: f64,
    phi_azimuth_deg: f64,
    theta_x_deg: f64,
    phi_x_deg: f64,
    params: &PatternParams,
) -> Result<f64> {
    let (phi_3db, a_m) = params.azimuth_params()?;
    let vertical = (theta_x_deg - theta_tilt_deg) / params.theta_3db_deg;
    let horizontal = (phi_x_deg - phi_azimuth_deg) / phi_3db;
    Ok(a_m * 10f64.powf(-1.2 * (vertical * vertical + horizontal * horizontal)))
}
