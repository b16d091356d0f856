//! Monte Carlo checks of the closed-form average powers used by the tilt rule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_crn::alt_optimizer::{expected_cascade_power, expected_direct_power};
use ris_crn::channel_model::cscg;
use ris_crn::linalg::{CMatrix, CVector, C64};

const DRAWS: usize = 100_000;

fn beamformer() -> CVector {
    CVector::from_vec(vec![C64::new(0.8, -0.3), C64::new(-0.2, 1.1), C64::new(0.5, 0.0)])
}

#[test]
fn direct_power_matches_sample_mean() {
    let sigma2: f64 = 0.7;
    let w = beamformer();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let amp = sigma2.sqrt();
    let mut acc = 0.0;
    for _ in 0..DRAWS {
        let h = CVector::from_fn(w.len(), |_, _| cscg(&mut rng) * amp);
        acc += h.dotc(&w).norm_sqr();
    }
    let mc = acc / DRAWS as f64;
    let exact = expected_direct_power(&w, sigma2);
    assert!((mc - exact).abs() <= 0.02 * exact, "mc {mc} exact {exact}");
}

#[test]
fn cascade_power_matches_sample_mean() {
    let sigma2: f64 = 1.3;
    let n = 8;
    let w = beamformer();
    let phases: Vec<f64> = (0..n).map(|k| 0.9 * k as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let amp = sigma2.sqrt();
    let mut acc = 0.0;
    for _ in 0..DRAWS {
        let u = CVector::from_fn(n, |_, _| cscg(&mut rng) * amp);
        let g = CMatrix::from_fn(n, w.len(), |_, _| cscg(&mut rng) * amp);
        let gw = &g * &w;
        let y: C64 = (0..n).map(|k| u[k].conj() * C64::from_polar(1.0, phases[k]) * gw[k]).sum();
        acc += y.norm_sqr();
    }
    let mc = acc / DRAWS as f64;
    let exact = expected_cascade_power(&w, sigma2, n);
    assert!((mc - exact).abs() <= 0.02 * exact, "mc {mc} exact {exact}");
}
