//! End-to-end behaviour of the alternating optimizer and the baselines.

mod common;

use ris_crn::alt_optimizer::{run_algorithm1, run_with, OptimizerParams, RunOptions};
use ris_crn::channel_model::pbs_beamformer;
use ris_crn::experiments::{run_method, run_trial, Method};
use ris_crn::linalg::{CVector, C64};
use ris_crn::link_metrics::{effective_pu_row, effective_su_row, primary_leakage, se_su, sinr_su, DesignState};

use common::{channels, iid_scenario};

/// Best SE over a 0.05 degree phase grid for one element and one antenna,
/// using the largest power that respects both caps.
fn joint_grid(s: &ris_crn::scenario::Scenario, ch: &ris_crn::channel_model::ChannelSet, tilt: f64) -> f64 {
    let w_p = pbs_beamformer(&ch.h_p, s.pp_dbw).unwrap().w_p;
    let mut best = 0.0f64;
    for k in 0..7200 {
        let alpha = (k as f64 * 0.05).to_radians();
        let unit = DesignState::new(CVector::from_element(1, C64::new(1.0, 0.0)), vec![alpha], tilt);
        let a = effective_su_row(&unit, ch, s).unwrap()[0].norm_sqr();
        let b = effective_pu_row(&unit, ch, s).unwrap()[0].norm_sqr();
        let p = s.p_max_watts().min(s.gamma_w / b);
        let noise = s.noise_watts() + primary_leakage(ch, &w_p);
        best = best.max(se_su(p * a / noise));
    }
    best
}

#[test]
fn single_element_single_antenna_reaches_joint_grid() {
    let s = iid_scenario(1, 1);
    let tilt = s.sbs_angles().unwrap().theta_r_deg;
    for seed in 0..5 {
        let ch = channels(&s, seed);
        let options = RunOptions { fixed_tilt_deg: Some(tilt), ..Default::default() };
        let r = run_with(&ch, &s, &OptimizerParams::default(), seed, &options).unwrap();
        let oracle = joint_grid(&s, &ch, tilt);
        assert!(r.feasibility.is_feasible());
        assert!((r.se - oracle).abs() <= 0.02 * oracle, "seed {seed}: se {} grid {oracle}", r.se);
    }
}

#[test]
fn no_ris_with_loose_cap_is_closed_form_mrt() {
    let mut s = iid_scenario(8, 4);
    s.gamma_w = 1e12;
    let params = OptimizerParams::default();
    for seed in 0..3 {
        let ch = channels(&s, seed);
        let out = run_method(&ch, &s, Method::NoRis, seed, None, &params).unwrap();
        let bare = ris_crn::scenario::Scenario { n_ris: 0, ..s.clone() };
        let theta_d = bare.sbs_angles().unwrap().theta_d_deg;
        let gain = ris_crn::link_metrics::sbs_gains(&bare, theta_d, None).unwrap().su;
        let w_p = pbs_beamformer(&ch.h_p, s.pp_dbw).unwrap().w_p;
        let sinr = s.p_max_watts() * gain * ch.h_s.norm_squared() / (s.noise_watts() + primary_leakage(&ch, &w_p));
        assert!((out.se - se_su(sinr)).abs() <= 1e-5 * se_su(sinr), "seed {seed}: {} vs {}", out.se, se_su(sinr));
        assert_eq!(out.theta_tilt_deg, theta_d);
        assert_eq!(out.outer_iterations, 1);
    }
}

#[test]
fn proposed_dominates_random_phase() {
    let s = iid_scenario(8, 2);
    let tilt = s.sbs_angles().unwrap().theta_r_deg;
    let params = OptimizerParams::default();
    for seed in 0..6 {
        let ch = channels(&s, seed);
        let proposed = run_method(&ch, &s, Method::Proposed, seed, Some(tilt), &params).unwrap();
        let random = run_method(&ch, &s, Method::RandomPhase, seed, Some(tilt), &params).unwrap();
        assert!(proposed.se >= random.se - 1e-6, "seed {seed}: {} < {}", proposed.se, random.se);
        assert!(proposed.feasible && random.feasible);
    }
}

#[test]
fn trace_is_monotone_and_final_state_is_consistent() {
    let s = iid_scenario(10, 3);
    for seed in 0..4 {
        let ch = channels(&s, seed);
        let r = run_algorithm1(&ch, &s, &OptimizerParams::default(), seed).unwrap();
        assert!(r.se_trace.windows(2).all(|p| p[1] >= p[0] - 1e-6));
        assert_eq!(r.se_trace.len(), r.outer_iterations);
        assert_eq!(*r.se_trace.last().unwrap(), r.se);
        let w_p = pbs_beamformer(&ch.h_p, s.pp_dbw).unwrap().w_p;
        let se = se_su(sinr_su(&r.state, &ch, &w_p, &s).unwrap());
        assert!((se - r.se).abs() <= 1e-9 * se.max(1.0));
        assert!(r.feasibility.is_feasible());
        assert!(r.outer_iterations <= OptimizerParams::default().max_outer_iters);
    }
}

#[test]
fn repeated_trials_are_identical() {
    let s = iid_scenario(6, 2);
    let params = OptimizerParams::default();
    for m in Method::ALL {
        let a = run_trial(&s, m, 42, None, &params).unwrap();
        let b = run_trial(&s, m, 42, None, &params).unwrap();
        assert_eq!(a.se.to_bits(), b.se.to_bits());
        assert_eq!(a, b);
    }
}

#[test]
fn path_loss_default_peaks_at_direct_elevation() {
    // with distance-based path loss the reflected link is far weaker than the
    // direct one, so tilting at the SU wins over tilting at the RIS
    let s = ris_crn::scenario::Scenario::reference_default();
    let angles = s.sbs_angles().unwrap();
    let params = OptimizerParams::default();
    let mean = |tilt: f64| -> f64 {
        (0..5).map(|seed| run_trial(&s, Method::Proposed, seed, Some(tilt), &params).unwrap().se).sum::<f64>() / 5.0
    };
    assert!(mean(angles.theta_d_deg) > 100.0 * mean(angles.theta_r_deg));
}

