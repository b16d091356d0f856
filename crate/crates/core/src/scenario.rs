//! Experiment configuration, unit conversions and derived geometry.
//!
//! A [`Scenario`] is loaded from JSON with `deny_unknown_fields`, so a typo in
//! a sweep configuration fails loudly instead of silently using a default.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::antenna_pattern::PatternParams;
use crate::channel_model::ChannelParams;
use crate::error::{Error, Result};

const REFERENCE_DEFAULT_JSON: &str = include_str!("../data/reference_default.json");

/// Lower end of the admissible tilt / elevation interval, in degrees.
pub const ANGLE_MIN_DEG: f64 = -180.0;
/// Upper end of the admissible tilt / elevation interval, in degrees.
pub const ANGLE_MAX_DEG: f64 = 0.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn dbw_to_watts(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}

pub fn watts_to_dbw(watts: f64) -> f64 {
    10.0 * watts.log10()
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    watts_to_dbw(watts) + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodePosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl NodePosition {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &NodePosition) -> f64 {
        let (dx, dy, dz) = (other.x - self.x, other.y - self.y, other.z - self.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Elevation of `target` seen from `self`, in degrees; negative below.
    pub fn elevation_to(&self, target: &NodePosition) -> f64 {
        let horizontal = (target.x - self.x).hypot(target.y - self.y);
        (target.z - self.z).atan2(horizontal).to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Sbs,
    Pbs,
    Su,
    Pu,
    Ris,
}

impl Node {
    pub const ALL: [Node; 5] = [Node::Sbs, Node::Pbs, Node::Su, Node::Pu, Node::Ris];
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Node::Sbs => "sbs",
            Node::Pbs => "pbs",
            Node::Su => "su",
            Node::Pu => "pu",
            Node::Ris => "ris",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Positions {
    pub sbs: NodePosition,
    pub pbs: NodePosition,
    pub su: NodePosition,
    pub pu: NodePosition,
    pub ris: NodePosition,
}

impl Positions {
    pub fn get(&self, node: Node) -> &NodePosition {
        match node {
            Node::Sbs => &self.sbs,
            Node::Pbs => &self.pbs,
            Node::Su => &self.su,
            Node::Pu => &self.pu,
            Node::Ris => &self.ris,
        }
    }
}

/// Where the SBS elevation angles towards SU, RIS and PU come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleMode {
    /// Use `theta_*_deg` as written in the configuration.
    #[default]
    Configured,
    /// Derive elevations from node coordinates.
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub positions: Positions,
    pub n_s: usize,
    pub n_p: usize,
    pub n_ris: usize,
    pub p_max_dbw: f64,
    pub pp_dbw: f64,
    pub gamma_w: f64,
    pub noise_dbm: f64,
    #[serde(default)]
    pub theta_d_deg: Option<f64>,
    #[serde(default)]
    pub theta_r_deg: Option<f64>,
    #[serde(default)]
    pub theta_i_deg: Option<f64>,
    #[serde(default)]
    pub phi_d_deg: Option<f64>,
    #[serde(default)]
    pub phi_r_deg: Option<f64>,
    #[serde(default)]
    pub phi_i_deg: Option<f64>,
    pub pattern: PatternParams,
    pub channel: ChannelParams,
    #[serde(default)]
    pub angle_mode: AngleMode,
}

/// Elevation (and optionally azimuth) of SU, RIS and PU seen from the SBS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SbsAngles {
    pub theta_d_deg: f64,
    pub theta_r_deg: f64,
    pub theta_i_deg: f64,
    /// `(phi_d, phi_r, phi_i)` when the scenario runs in 3D mode.
    pub azimuth_deg: Option<(f64, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkDistances {
    pub sbs_ris: f64,
    pub sbs_su: f64,
    pub sbs_pu: f64,
    pub pbs_su: f64,
    pub pbs_pu: f64,
    pub ris_su: f64,
    pub ris_pu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedGeometry {
    pub distances: LinkDistances,
    pub elevation_su_deg: f64,
    pub elevation_ris_deg: f64,
    pub elevation_pu_deg: f64,
}

fn check_angle(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || !(ANGLE_MIN_DEG..=ANGLE_MAX_DEG).contains(&value) {
        return Err(Error::Config(format!(
            "{name} = {value} outside [{ANGLE_MIN_DEG}, {ANGLE_MAX_DEG}] degrees"
        )));
    }
    Ok(())
}

fn check_finite(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::Config(format!("{name} must be finite, got {value}")));
    }
    Ok(())
}

impl Scenario {
    /// Reference deployment: default link parameters and node coordinates.
    pub fn reference_default() -> Self {
        Self::from_json_str(REFERENCE_DEFAULT_JSON).expect("bundled scenario is valid")
    }

    pub fn reference_default_json() -> &'static str {
        REFERENCE_DEFAULT_JSON
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        for node in Node::ALL {
            let p = self.positions.get(node);
            for (axis, v) in [("x", p.x), ("y", p.y), ("z", p.z)] {
                check_finite(&format!("positions.{node}.{axis}"), v)?;
            }
            if p.z < 0.0 {
                return Err(Error::Config(format!(
                    "positions.{node}.z must be >= 0, got {}",
                    p.z
                )));
            }
        }
        for (i, a) in Node::ALL.iter().enumerate() {
            for b in &Node::ALL[i + 1..] {
                if self.positions.get(*a).distance(self.positions.get(*b)) <= 0.0 {
                    return Err(Error::Config(format!("nodes {a} and {b} are co-located")));
                }
            }
        }
        if self.n_s == 0 {
            return Err(Error::Config("n_s must be positive".into()));
        }
        if self.n_p == 0 {
            return Err(Error::Config("n_p must be positive".into()));
        }
        check_finite("p_max_dbw", self.p_max_dbw)?;
        check_finite("pp_dbw", self.pp_dbw)?;
        check_finite("noise_dbm", self.noise_dbm)?;
        if !(self.gamma_w > 0.0) || self.gamma_w.is_nan() {
            return Err(Error::Config(format!(
                "gamma_w must be > 0, got {}",
                self.gamma_w
            )));
        }
        if !(self.noise_watts() > 0.0) {
            return Err(Error::Config(format!(
                "noise_dbm = {} gives non-positive noise power",
                self.noise_dbm
            )));
        }
        match self.angle_mode {
            AngleMode::Configured => {
                for (name, v) in [
                    ("theta_d_deg", self.theta_d_deg),
                    ("theta_r_deg", self.theta_r_deg),
                    ("theta_i_deg", self.theta_i_deg),
                ] {
                    let v = v.ok_or_else(|| {
                        Error::Config(format!("{name} is required in configured angle mode"))
                    })?;
                    check_angle(name, v)?;
                }
            }
            AngleMode::Geometric => {
                let g = self.derive_geometry()?;
                check_angle("geometric elevation of su", g.elevation_su_deg)?;
                check_angle("geometric elevation of ris", g.elevation_ris_deg)?;
                check_angle("geometric elevation of pu", g.elevation_pu_deg)?;
            }
        }
        let az = [self.phi_d_deg, self.phi_r_deg, self.phi_i_deg];
        let present = az.iter().filter(|a| a.is_some()).count();
        if present != 0 && present != 3 {
            return Err(Error::Config(
                "phi_d_deg, phi_r_deg, phi_i_deg must be given together (3D mode)".into(),
            ));
        }
        for (name, v) in [("phi_d_deg", az[0]), ("phi_r_deg", az[1]), ("phi_i_deg", az[2])] {
            if let Some(v) = v {
                check_finite(name, v)?;
            }
        }
        self.pattern.validate(self.is_3d())?;
        self.channel.validate()?;
        Ok(())
    }

    pub fn is_3d(&self) -> bool {
        self.phi_d_deg.is_some() && self.phi_r_deg.is_some() && self.phi_i_deg.is_some()
    }

    pub fn p_max_watts(&self) -> f64 {
        dbw_to_watts(self.p_max_dbw)
    }

    pub fn pp_watts(&self) -> f64 {
        dbw_to_watts(self.pp_dbw)
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    pub fn derive_geometry(&self) -> Result<DerivedGeometry> {
        let p = &self.positions;
        let dist = |a: Node, b: Node| -> Result<f64> {
            let d = p.get(a).distance(p.get(b));
            if d > 0.0 {
                Ok(d)
            } else {
                Err(Error::Config(format!("nodes {a} and {b} are co-located")))
            }
        };
        let distances = LinkDistances {
            sbs_ris: dist(Node::Sbs, Node::Ris)?,
            sbs_su: dist(Node::Sbs, Node::Su)?,
            sbs_pu: dist(Node::Sbs, Node::Pu)?,
            pbs_su: dist(Node::Pbs, Node::Su)?,
            pbs_pu: dist(Node::Pbs, Node::Pu)?,
            ris_su: dist(Node::Ris, Node::Su)?,
            ris_pu: dist(Node::Ris, Node::Pu)?,
        };
        Ok(DerivedGeometry {
            distances,
            elevation_su_deg: p.sbs.elevation_to(&p.su),
            elevation_ris_deg: p.sbs.elevation_to(&p.ris),
            elevation_pu_deg: p.sbs.elevation_to(&p.pu),
        })
    }

    /// SBS-side angles according to [`AngleMode`].
    pub fn sbs_angles(&self) -> Result<SbsAngles> {
        let (theta_d_deg, theta_r_deg, theta_i_deg) = match self.angle_mode {
            AngleMode::Configured => {
                let req = |name: &str, v: Option<f64>| {
                    v.ok_or_else(|| Error::Config(format!("{name} is required")))
                };
                (
                    req("theta_d_deg", self.theta_d_deg)?,
                    req("theta_r_deg", self.theta_r_deg)?,
                    req("theta_i_deg", self.theta_i_deg)?,
                )
            }
            AngleMode::Geometric => {
                let g = self.derive_geometry()?;
                (g.elevation_su_deg, g.elevation_ris_deg, g.elevation_pu_deg)
            }
        };
        let azimuth_deg = match (self.phi_d_deg, self.phi_r_deg, self.phi_i_deg) {
            (Some(d), Some(r), Some(i)) => Some((d, r, i)),
            _ => None,
        };
        Ok(SbsAngles {
            theta_d_deg,
            theta_r_deg,
            theta_i_deg,
            azimuth_deg,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_default_distances() {
        let g = Scenario::reference_default().derive_geometry().unwrap();
        assert_relative_eq!(g.distances.sbs_ris, 100.498_756_211_208_9, max_relative = 1e-12);
        assert_relative_eq!(g.distances.sbs_su, 68.767_724_987_816_78, max_relative = 1e-12);
        assert_relative_eq!(g.elevation_ris_deg, -5.710_593_137_499_643, max_relative = 1e-12);
        assert!(g.elevation_su_deg < 0.0 && g.elevation_pu_deg < 0.0);
    }

    #[test]
    fn unit_conversions() {
        assert_relative_eq!(dbm_to_watts(-90.0), 1e-12, max_relative = 1e-12);
        assert_eq!(dbw_to_watts(0.0), 1.0);
        assert_relative_eq!(dbw_to_watts(5.0), 3.162_277_660_168_379_5, max_relative = 1e-12);
        assert_relative_eq!(watts_to_dbm(1e-3), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn reference_default_uses_table_values() {
        let s = Scenario::reference_default();
        let a = s.sbs_angles().unwrap();
        assert_eq!((a.theta_d_deg, a.theta_r_deg, a.theta_i_deg), (-80.0, -30.0, -110.0));
        assert_eq!(s.gamma_w, 1.0);
        assert_eq!(s.pp_dbw, 5.0);
        assert_eq!(s.noise_dbm, -90.0);
        assert!(!s.is_3d());
    }

    #[test]
    fn geometric_mode_uses_coordinates() {
        let mut s = Scenario::reference_default();
        s.angle_mode = AngleMode::Geometric;
        s.validate().unwrap();
        let a = s.sbs_angles().unwrap();
        assert_relative_eq!(a.theta_r_deg, -5.710_593_137_499_643, max_relative = 1e-12);
    }

    #[test]
    fn rejects_unknown_keys() {
        let mut v: serde_json::Value = serde_json::from_str(REFERENCE_DEFAULT_JSON).unwrap();
        v["gama_w"] = serde_json::json!(1.0);
        let err = Scenario::from_json_str(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("gama_w"), "{err}");
    }

    #[test]
    fn rejects_colocated_nodes() {
        let mut s = Scenario::reference_default();
        s.positions.su = s.positions.pu;
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("su") && err.contains("pu"), "{err}");
    }

    #[test]
    fn rejects_bad_fields() {
        let mut s = Scenario::reference_default();
        s.positions.ris.z = -1.0;
        assert!(s.validate().unwrap_err().to_string().contains("positions.ris.z"));

        let mut s = Scenario::reference_default();
        s.gamma_w = 0.0;
        assert!(s.validate().unwrap_err().to_string().contains("gamma_w"));

        let mut s = Scenario::reference_default();
        s.theta_r_deg = Some(10.0);
        assert!(s.validate().unwrap_err().to_string().contains("theta_r_deg"));

        let mut s = Scenario::reference_default();
        s.theta_d_deg = None;
        assert!(s.validate().unwrap_err().to_string().contains("theta_d_deg"));

        let mut s = Scenario::reference_default();
        s.phi_r_deg = Some(0.0);
        assert!(s.validate().unwrap_err().to_string().contains("phi_d_deg"));

        let mut s = Scenario::reference_default();
        s.p_max_dbw = f64::INFINITY;
        assert!(s.validate().unwrap_err().to_string().contains("p_max_dbw"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn position() -> impl Strategy<Value = NodePosition> {
            (-500.0..500.0f64, -500.0..500.0f64, 0.0..100.0f64)
                .prop_map(|(x, y, z)| NodePosition::new(x, y, z))
        }

        proptest! {
            #[test]
            fn distance_is_symmetric(a in position(), b in position()) {
                prop_assert_eq!(a.distance(&b), b.distance(&a));
            }

            #[test]
            fn dbw_round_trip(x in -200.0..200.0f64) {
                let back = watts_to_dbw(dbw_to_watts(x));
                prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}
