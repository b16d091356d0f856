//! Effective channels, secondary SINR / spectral efficiency and interference
//! at the primary user for a candidate design.

use serde::{Deserialize, Serialize};

use crate::antenna_pattern::{gain_3d_linear, vertical_gain_linear};
use crate::channel_model::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{cis, CRow, CVector, C64};
use crate::scenario::{Scenario, ANGLE_MAX_DEG, ANGLE_MIN_DEG};

/// Optimization variables of the joint design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignState {
    #[serde(with = "crate::linalg::serde_cvector")]
    pub w_s: CVector,
    /// RIS phase shifts `α_n` in radians; `φ_n = e^{jα_n}`.
    pub phases: Vec<f64>,
    pub theta_tilt_deg: f64,
    #[serde(default)]
    pub phi_azimuth_deg: Option<f64>,
}

impl DesignState {
    pub fn new(w_s: CVector, phases: Vec<f64>, theta_tilt_deg: f64) -> Self {
        Self {
            w_s,
            phases,
            theta_tilt_deg,
            phi_azimuth_deg: None,
        }
    }

    pub fn ris_coefficients(&self) -> CVector {
        CVector::from_iterator(self.phases.len(), self.phases.iter().map(|&a| cis(a)))
    }

    pub fn power(&self) -> f64 {
        self.w_s.norm_squared()
    }
}

/// Linear power gains of the SBS pattern towards SU (`d`), RIS (`r`), PU (`i`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SbsGains {
    pub su: f64,
    pub ris: f64,
    pub pu: f64,
}

pub fn sbs_gains(scenario: &Scenario, theta_tilt_deg: f64, phi_azimuth_deg: Option<f64>) -> Result<SbsGains> {
    let angles = scenario.sbs_angles()?;
    let pattern = &scenario.pattern;
    match angles.azimuth_deg {
        None => Ok(SbsGains {
            su: vertical_gain_linear(theta_tilt_deg, angles.theta_d_deg, pattern),
            ris: vertical_gain_linear(theta_tilt_deg, angles.theta_r_deg, pattern),
            pu: vertical_gain_linear(theta_tilt_deg, angles.theta_i_deg, pattern),
        }),
        Some((phi_d, phi_r, phi_i)) => {
            let az = phi_azimuth_deg.unwrap_or(phi_r);
            Ok(SbsGains {
                su: gain_3d_linear(theta_tilt_deg, az, angles.theta_d_deg, phi_d, pattern)?,
                ris: gain_3d_linear(theta_tilt_deg, az, angles.theta_r_deg, phi_r, pattern)?,
                pu: gain_3d_linear(theta_tilt_deg, az, angles.theta_i_deg, phi_i, pattern)?,
            })
        }
    }
}

pub fn gains_for(state: &DesignState, scenario: &Scenario) -> Result<SbsGains> {
    sbs_gains(scenario, state.theta_tilt_deg, state.phi_azimuth_deg)
}

/// `x^H Φ G` for RIS-side channel `x` (u or v), without any pattern gain.
pub fn cascade_row(x: &CVector, phases: &[f64], channels: &ChannelSet) -> CRow {
    let mut row = CRow::zeros(channels.n_s());
    for (n, &alpha) in phases.iter().enumerate() {
        let coeff = x[n].conj() * cis(alpha);
        row += channels.g.row(n) * coeff;
    }
    row
}

fn check_state(state: &DesignState, channels: &ChannelSet) -> Result<()> {
    if state.w_s.len() != channels.n_s() {
        return Err(Error::Dimension(format!(
            "w_s has length {}, channels expect N_s = {}",
            state.w_s.len(),
            channels.n_s()
        )));
    }
    if state.phases.len() != channels.n_ris() {
        return Err(Error::Dimension(format!(
            "{} phases for an RIS with N = {}",
            state.phases.len(),
            channels.n_ris()
        )));
    }
    Ok(())
}

fn effective_row(
    direct: &CVector,
    direct_gain: f64,
    ris_side: &CVector,
    ris_gain: f64,
    state: &DesignState,
    channels: &ChannelSet,
) -> CRow {
    let mut row = direct.adjoint() * C64::new(direct_gain.sqrt(), 0.0);
    if channels.n_ris() > 0 {
        row += cascade_row(ris_side, &state.phases, channels) * C64::new(ris_gain.sqrt(), 0.0);
    }
    row
}

/// `a = √A_d h_s^H + √A_r u^H Φ G`.
pub fn effective_su_row(state: &DesignState, channels: &ChannelSet, scenario: &Scenario) -> Result<CRow> {
    check_state(state, channels)?;
    let g = gains_for(state, scenario)?;
    Ok(effective_row(&channels.h_s, g.su, &channels.u, g.ris, state, channels))
}

/// `b = √A_i f_p^H + √A_r v^H Φ G`.
pub fn effective_pu_row(state: &DesignState, channels: &ChannelSet, scenario: &Scenario) -> Result<CRow> {
    check_state(state, channels)?;
    let g = gains_for(state, scenario)?;
    Ok(effective_row(&channels.f_p, g.pu, &channels.v, g.ris, state, channels))
}

/// `|f_s^H w_p|²`, the primary interference seen by the SU.
pub fn primary_leakage(channels: &ChannelSet, w_p: &CVector) -> f64 {
    channels.f_s.dotc(w_p).norm_sqr()
}

pub fn sinr_su(state: &DesignState, channels: &ChannelSet, w_p: &CVector, scenario: &Scenario) -> Result<f64> {
    let noise = scenario.noise_watts();
    if !(noise > 0.0) {
        return Err(Error::Domain("noise power must be positive".into()));
    }
    let a = effective_su_row(state, channels, scenario)?;
    let signal = (a * &state.w_s)[(0, 0)].norm_sqr();
    Ok(signal / (noise + primary_leakage(channels, w_p)))
}

pub fn se_su(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// `|b w_s|²`; the design is feasible for C1 iff this is at most Γ.
pub fn pu_interference(state: &DesignState, channels: &ChannelSet, scenario: &Scenario) -> Result<f64> {
    let b = effective_pu_row(state, channels, scenario)?;
    Ok((b * &state.w_s)[(0, 0)].norm_sqr())
}

/// SINR of the primary user, reported for diagnostics only.
pub fn sinr_pu(state: &DesignState, channels: &ChannelSet, w_p: &CVector, scenario: &Scenario) -> Result<f64> {
    let desired = channels.h_p.dotc(w_p).norm_sqr();
    let interference = pu_interference(state, channels, scenario)?;
    Ok(desired / (scenario.noise_watts() + interference))
}

/// Post-hoc check of C1–C4 on a final design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub pu_interference_w: f64,
    pub gamma_w: f64,
    pub power_w: f64,
    pub p_max_w: f64,
    pub tilt_in_range: bool,
    pub unit_modulus: bool,
}

/// Relative slack allowed on C1 and C4.
pub const FEASIBILITY_SLACK: f64 = 1e-6;

impl FeasibilityReport {
    pub fn evaluate(state: &DesignState, channels: &ChannelSet, scenario: &Scenario) -> Result<Self> {
        let unit_modulus = state
            .ris_coefficients()
            .iter()
            .all(|c| (c.norm() - 1.0).abs() <= 1e-12);
        Ok(Self {
            pu_interference_w: pu_interference(state, channels, scenario)?,
            gamma_w: scenario.gamma_w,
            power_w: state.power(),
            p_max_w: scenario.p_max_watts(),
            tilt_in_range: (ANGLE_MIN_DEG..=ANGLE_MAX_DEG).contains(&state.theta_tilt_deg),
            unit_modulus,
        })
    }

    pub fn is_feasible(&self) -> bool {
        self.pu_interference_w <= self.gamma_w * (1.0 + FEASIBILITY_SLACK)
            && self.power_w <= self.p_max_w * (1.0 + FEASIBILITY_SLACK)
            && self.tilt_in_range
            && self.unit_modulus
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::{generate_channels, pbs_beamformer};
    use crate::linalg::CMatrix;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn fixture(seed: u64) -> (Scenario, ChannelSet, CVector) {
        let s = Scenario::reference_default();
        let ch = generate_channels(&s, &s.derive_geometry().unwrap(), seed).unwrap();
        let w_p = pbs_beamformer(&ch.h_p, s.pp_dbw).unwrap().w_p;
        (s, ch, w_p)
    }

    fn random_state(s: &Scenario, seed: u64, tilt: f64) -> DesignState {
        let w = CVector::from_fn(s.n_s, |k, _| c((seed as f64 + k as f64).sin(), (1.7 * k as f64 + seed as f64).cos()));
        let phases = (0..s.n_ris).map(|n| (n as f64 * 0.37 + seed as f64).rem_euclid(6.28)).collect();
        DesignState::new(w, phases, tilt)
    }

    fn single_element(h_s: C64, u: C64, g: C64, v: C64, f_p: C64) -> ChannelSet {
        ChannelSet {
            g: CMatrix::from_element(1, 1, g),
            u: CVector::from_element(1, u),
            v: CVector::from_element(1, v),
            h_s: CVector::from_element(1, h_s),
            h_p: CVector::from_element(1, c(1.0, 0.0)),
            f_p: CVector::from_element(1, f_p),
            f_s: CVector::from_element(1, c(0.0, 0.0)),
        }
    }

    #[test]
    fn no_ris_boresight_row_is_direct_channel() {
        let (mut s, ch, _) = fixture(1);
        s.n_ris = 0;
        let ch = ch.without_ris();
        let st = DesignState::new(CVector::zeros(s.n_s), vec![], -80.0);
        assert_eq!(effective_su_row(&st, &ch, &s).unwrap(), ch.h_s.adjoint());
        let st = DesignState::new(CVector::zeros(s.n_s), vec![], -110.0);
        assert_eq!(effective_pu_row(&st, &ch, &s).unwrap(), ch.f_p.adjoint());
    }

    #[test]
    fn single_element_phase_rotation() {
        let mut s = Scenario::reference_default();
        s.n_s = 1;
        s.n_ris = 1;
        let zero = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let ch = single_element(zero, one, one, one, zero);
        let st = DesignState::new(CVector::from_element(1, one), vec![FRAC_PI_2], -30.0);
        let a = effective_su_row(&st, &ch, &s).unwrap();
        assert!((a[0] - c(0.0, 1.0)).norm() < 1e-15);
        let b = effective_pu_row(&st, &ch, &s).unwrap();
        assert!((b[0] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn rows_match_diag_identity() {
        // u^H diag(e^{jα}) G = (e^{jα})^T diag(conj u) G
        for seed in 0..5 {
            let (s, ch, _) = fixture(seed);
            let st = random_state(&s, seed, -30.0);
            let g = gains_for(&st, &s).unwrap();
            let phi = st.ris_coefficients();
            for (direct, side, dgain, row) in [
                (&ch.h_s, &ch.u, g.su, effective_su_row(&st, &ch, &s).unwrap()),
                (&ch.f_p, &ch.v, g.pu, effective_pu_row(&st, &ch, &s).unwrap()),
            ] {
                let diag_conj = CMatrix::from_diagonal(&side.map(|x| x.conj()));
                let cascade = phi.transpose() * diag_conj * &ch.g;
                let expected = direct.adjoint() * c(dgain.sqrt(), 0.0) + cascade * c(g.ris.sqrt(), 0.0);
                for k in 0..s.n_s {
                    assert_relative_eq!(row[k].re, expected[k].re, max_relative = 1e-10, epsilon = 1e-30);
                    assert_relative_eq!(row[k].im, expected[k].im, max_relative = 1e-10, epsilon = 1e-30);
                }
            }
        }
    }

    #[test]
    fn sinr_pins() {
        let (s, ch, w_p) = fixture(2);
        let zero = DesignState::new(CVector::zeros(s.n_s), vec![0.0; s.n_ris], -30.0);
        assert_eq!(sinr_su(&zero, &ch, &w_p, &s).unwrap(), 0.0);
        assert_eq!(pu_interference(&zero, &ch, &s).unwrap(), 0.0);

        // |a w|² = σ_n² with f_s = 0 gives SINR = 1
        let mut s1 = Scenario::reference_default();
        s1.n_s = 1;
        s1.n_ris = 0;
        let sigma = s1.noise_watts().sqrt();
        let mut one = single_element(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)).without_ris();
        one.f_s = CVector::from_element(1, c(0.0, 0.0));
        let st = DesignState::new(CVector::from_element(1, c(0.0, sigma)), vec![], -80.0);
        assert_relative_eq!(sinr_su(&st, &one, &CVector::from_element(1, c(3.0, 0.0)), &s1).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn sinr_matches_scalar_expansion() {
        let (s, ch, w_p) = fixture(5);
        let st = random_state(&s, 5, -35.0);
        let g = gains_for(&st, &s).unwrap();
        let mut signal = c(0.0, 0.0);
        let mut leak = c(0.0, 0.0);
        for k in 0..s.n_s {
            let mut cascade = c(0.0, 0.0);
            for n in 0..s.n_ris {
                cascade += ch.u[n].conj() * cis(st.phases[n]) * ch.g[(n, k)];
            }
            signal += (ch.h_s[k].conj() * g.su.sqrt() + cascade * g.ris.sqrt()) * st.w_s[k];
        }
        for k in 0..s.n_p {
            leak += ch.f_s[k].conj() * w_p[k];
        }
        let expected = signal.norm_sqr() / (s.noise_watts() + leak.norm_sqr());
        assert_relative_eq!(sinr_su(&st, &ch, &w_p, &s).unwrap(), expected, max_relative = 1e-10);

        let mut interference = c(0.0, 0.0);
        for k in 0..s.n_s {
            let mut cascade = c(0.0, 0.0);
            for n in 0..s.n_ris {
                cascade += ch.v[n].conj() * cis(st.phases[n]) * ch.g[(n, k)];
            }
            interference += (ch.f_p[k].conj() * g.pu.sqrt() + cascade * g.ris.sqrt()) * st.w_s[k];
        }
        assert_relative_eq!(pu_interference(&st, &ch, &s).unwrap(), interference.norm_sqr(), max_relative = 1e-10);
    }

    #[test]
    fn null_steering_gives_zero_interference() {
        let (mut s, ch, _) = fixture(3);
        s.n_ris = 0;
        let ch = ch.without_ris();
        let st = DesignState::new(CVector::zeros(2), vec![], -50.0);
        let b = effective_pu_row(&st, &ch, &s).unwrap();
        // w ⟂ b^H
        let w = CVector::from_vec(vec![b[1], -b[0]]);
        let st = DesignState::new(w, vec![], -50.0);
        assert!(pu_interference(&st, &ch, &s).unwrap() < 1e-40);
    }

    #[test]
    fn no_ris_reduces_to_miso_sinr() {
        let (mut s, ch, w_p) = fixture(4);
        s.n_ris = 0;
        let ch = ch.without_ris();
        let w = CVector::from_vec(vec![c(1.0, 0.5), c(-0.3, 2.0)]);
        let st = DesignState::new(w.clone(), vec![], -80.0);
        let expected = ch.h_s.dotc(&w).norm_sqr() / (s.noise_watts() + ch.f_s.dotc(&w_p).norm_sqr());
        assert_relative_eq!(sinr_su(&st, &ch, &w_p, &s).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn se_pins() {
        assert_eq!(se_su(0.0), 0.0);
        assert_eq!(se_su(1.0), 1.0);
        assert_eq!(se_su(3.0), 2.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (s, ch, _) = fixture(1);
        let st = DesignState::new(CVector::zeros(3), vec![0.0; s.n_ris], -30.0);
        assert!(matches!(effective_su_row(&st, &ch, &s), Err(Error::Dimension(_))));
    }

    #[test]
    fn three_d_mode_uses_azimuth() {
        let (mut s, ch, _) = fixture(6);
        s.phi_d_deg = Some(10.0);
        s.phi_r_deg = Some(80.0);
        s.phi_i_deg = Some(40.0);
        s.validate().unwrap();
        let g = sbs_gains(&s, -30.0, Some(80.0)).unwrap();
        assert_eq!(g.ris, 1.0);
        assert!(g.su < vertical_gain_linear(-30.0, -80.0, &s.pattern));
        let st = random_state(&s, 6, -30.0);
        assert!(effective_su_row(&st, &ch, &s).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn global_phase_invariance(seed in 0u64..1000, psi in 0.0..6.283f64, tilt in -180.0..0.0f64) {
                let (s, ch, w_p) = fixture(seed);
                let st = random_state(&s, seed, tilt);
                let mut rotated = st.clone();
                rotated.w_s = st.w_s.map(|x| x * cis(psi));
                let a = sinr_su(&st, &ch, &w_p, &s).unwrap();
                let b = sinr_su(&rotated, &ch, &w_p, &s).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300));
                let a = pu_interference(&st, &ch, &s).unwrap();
                let b = pu_interference(&rotated, &ch, &s).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300));
            }

            #[test]
            fn se_strictly_increasing(x in 0.0..1e6f64, dx in 1e-6..1e3f64) {
                prop_assert!(se_su(x + dx) > se_su(x));
            }
        }
    }
}
