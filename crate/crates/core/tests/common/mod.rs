#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_crn::alt_optimizer::{build_phase_problem, PhaseProblem};
use ris_crn::channel_model::{generate_channels, ChannelGeneration, ChannelSet};
use ris_crn::linalg::{cis, CVector, C64};
use ris_crn::scenario::Scenario;
use ris_crn::sdp::{solve, SdpStatus, SolverOptions};
use ris_crn::srocr::{extract_vector, refine, ExtractTarget, SrocrParams};

/// Published geometry with unit-variance iid fading.
pub fn iid_scenario(n_ris: usize, n_s: usize) -> Scenario {
    let mut s = Scenario::reference_default();
    s.n_ris = n_ris;
    s.n_s = n_s;
    s.channel.generation = ChannelGeneration::Iid;
    s
}

pub fn channels(s: &Scenario, seed: u64) -> ChannelSet {
    generate_channels(s, &s.derive_geometry().unwrap(), seed).unwrap()
}

/// SDP + SROCR optimum of the phase problem and the recovered unit-modulus point.
pub fn solve_phases(pp: &PhaseProblem) -> (f64, f64, CVector) {
    let opts = SolverOptions::default();
    let relaxed = solve(&pp.sdp, &opts).unwrap();
    assert_eq!(relaxed.status, SdpStatus::Optimal);
    let refined = refine(&pp.sdp, &relaxed, &SrocrParams::default(), &opts).unwrap();
    assert!(refined.feasible);
    let x = extract_vector(&refined.x, &ExtractTarget::Phases, 0.999).unwrap();
    (pp.l1 + relaxed.objective, pp.l1 + refined.objective, x)
}

/// Best feasible `l1 + x^H H1 x` over a phase grid; the anchor entry stays 1.
pub fn grid_search(pp: &PhaseProblem, n: usize, step_deg: f64, gamma: f64) -> f64 {
    let steps = (360.0 / step_deg).round() as usize;
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; n];
    loop {
        let mut x = CVector::from_element(n + 1, C64::new(1.0, 0.0));
        for k in 0..n {
            x[k] = cis((idx[k] as f64 * step_deg).to_radians());
        }
        if pp.interference_at(&x) <= gamma {
            best = best.max(pp.objective_at(&x));
        }
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            idx[k] += 1;
            if idx[k] < steps {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

pub fn fixture(n_ris: usize, seed: u64, gamma: f64) -> (Scenario, PhaseProblem) {
    // halfway between SU and RIS elevations, so direct and cascaded paths are comparable
    fixture_at(n_ris, seed, gamma, -55.0)
}

pub fn fixture_at(n_ris: usize, seed: u64, gamma: f64, tilt: f64) -> (Scenario, PhaseProblem) {
    let mut s = iid_scenario(n_ris, 2);
    s.gamma_w = gamma;
    let ch = channels(&s, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = CVector::from_fn(2, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let pp = build_phase_problem(&w, tilt, &ch, &s).unwrap();
    (s, pp)
}
