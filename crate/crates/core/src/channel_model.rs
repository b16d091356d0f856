//! Seeded channel generation: distance path loss times Rician small-scale
//! fading, plus the fixed MRT beamformer of the primary base station.
//!
//! Every link draws from its own ChaCha stream (`seed`, stream = link index),
//! so adding links or changing one link's dimensions never perturbs the
//! others.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, serde_cmatrix, serde_cvector, CMatrix, CVector, C64};
use crate::scenario::{DerivedGeometry, Node, Scenario};

/// Stream indices for the per-link substreams.
pub mod stream {
    pub const G: u64 = 0;
    pub const U: u64 = 1;
    pub const V: u64 = 2;
    pub const H_S: u64 = 3;
    pub const H_P: u64 = 4;
    pub const F_P: u64 = 5;
    pub const F_S: u64 = 6;
    /// Initial RIS phases.
    pub const PHASE_INIT: u64 = 7;
    /// Gaussian randomization fallback.
    pub const RANDOMIZATION: u64 = 8;
}

/// Rician factors at or above this are treated as pure line of sight.
pub const PURE_LOS_K: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelGeneration {
    /// Distance path loss with Rician fading around a ULA line-of-sight term.
    #[default]
    PathLossRician,
    /// Every entry iid CN(0, channel_sigma2), no path loss.
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub zeta0_db: f64,
    pub d0_m: f64,
    pub alpha: f64,
    pub rician_k: f64,
    pub channel_sigma2: f64,
    #[serde(default)]
    pub generation: ChannelGeneration,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            zeta0_db: -30.0,
            d0_m: 1.0,
            alpha: 3.0,
            rician_k: 1.0,
            channel_sigma2: 1.0,
            generation: ChannelGeneration::PathLossRician,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !self.zeta0_db.is_finite() {
            return Err(Error::Config("channel.zeta0_db must be finite".into()));
        }
        if !(self.d0_m > 0.0) {
            return Err(Error::Config(format!("channel.d0_m must be > 0, got {}", self.d0_m)));
        }
        if !(self.alpha >= 2.0) {
            return Err(Error::Config(format!("channel.alpha must be >= 2, got {}", self.alpha)));
        }
        if !(self.rician_k >= 0.0) {
            return Err(Error::Config(format!(
                "channel.rician_k must be >= 0, got {}",
                self.rician_k
            )));
        }
        if !(self.channel_sigma2 > 0.0) || !self.channel_sigma2.is_finite() {
            return Err(Error::Config(format!(
                "channel.channel_sigma2 must be > 0, got {}",
                self.channel_sigma2
            )));
        }
        Ok(())
    }
}

/// One Monte Carlo draw of every channel in the network.
///
/// Vectors follow the `x^H w` convention: the SU receives `h_s^H w_s` from the
/// SBS and `u^H Φ G w_s` through the RIS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// SBS → RIS, `N × N_s`.
    #[serde(with = "serde_cmatrix")]
    pub g: CMatrix,
    /// RIS → SU, length `N`.
    #[serde(with = "serde_cvector")]
    pub u: CVector,
    /// RIS → PU, length `N`.
    #[serde(with = "serde_cvector")]
    pub v: CVector,
    /// SBS → SU, length `N_s`.
    #[serde(with = "serde_cvector")]
    pub h_s: CVector,
    /// PBS → PU, length `N_p`.
    #[serde(with = "serde_cvector")]
    pub h_p: CVector,
    /// SBS → PU, length `N_s`.
    #[serde(with = "serde_cvector")]
    pub f_p: CVector,
    /// PBS → SU, length `N_p`.
    #[serde(with = "serde_cvector")]
    pub f_s: CVector,
}

impl ChannelSet {
    pub fn n_ris(&self) -> usize {
        self.u.len()
    }

    pub fn n_s(&self) -> usize {
        self.h_s.len()
    }

    pub fn n_p(&self) -> usize {
        self.h_p.len()
    }

    /// Same draw with the RIS removed (`N = 0`).
    pub fn without_ris(&self) -> ChannelSet {
        ChannelSet {
            g: CMatrix::zeros(0, self.n_s()),
            u: CVector::zeros(0),
            v: CVector::zeros(0),
            ..self.clone()
        }
    }

    /// Every end-to-end path to a receiver multiplied by `factor`; the
    /// cascaded links scale through `u`/`v` only, so `G` is left as is.
    pub fn scaled(&self, factor: f64) -> ChannelSet {
        let s = C64::new(factor, 0.0);
        ChannelSet {
            g: self.g.clone(),
            u: self.u.map(|c| c * s),
            v: self.v.map(|c| c * s),
            h_s: self.h_s.map(|c| c * s),
            h_p: self.h_p.map(|c| c * s),
            f_p: self.f_p.map(|c| c * s),
            f_s: self.f_s.map(|c| c * s),
        }
    }

    pub fn check_dims(&self, n_ris: usize, n_s: usize, n_p: usize) -> Result<()> {
        let ok = self.g.shape() == (n_ris, n_s)
            && self.u.len() == n_ris
            && self.v.len() == n_ris
            && self.h_s.len() == n_s
            && self.f_p.len() == n_s
            && self.h_p.len() == n_p
            && self.f_s.len() == n_p;
        if !ok {
            return Err(Error::Dimension(format!(
                "channel set does not match N = {n_ris}, N_s = {n_s}, N_p = {n_p}"
            )));
        }
        let finite = [&self.u, &self.v, &self.h_s, &self.h_p, &self.f_p, &self.f_s]
            .iter()
            .all(|v| v.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
            && self.g.iter().all(|c| c.re.is_finite() && c.im.is_finite());
        if !finite {
            return Err(Error::Domain("channel set contains non-finite entries".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PbsBeamformer {
    pub w_p: CVector,
}

/// `sqrt(zeta0 (d0 / d)^alpha)`.
pub fn path_loss_amplitude(d_m: f64, params: &ChannelParams) -> Result<f64> {
    if !(d_m > 0.0) || !d_m.is_finite() {
        return Err(Error::Domain(format!("link distance must be > 0, got {d_m}")));
    }
    let zeta0 = 10f64.powf(params.zeta0_db / 10.0);
    Ok((zeta0 * (params.d0_m / d_m).powf(params.alpha)).sqrt())
}

/// Unit-variance circularly-symmetric complex Gaussian sample.
pub fn cscg<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `sqrt(K/(K+1)) los + sqrt(1/(K+1)) W` with `W` iid CN(0, 1).
pub fn rician_sample<R: Rng + ?Sized>(k: f64, los: &CMatrix, rng: &mut R) -> CMatrix {
    if k >= PURE_LOS_K {
        return los.clone();
    }
    let los_amp = (k / (k + 1.0)).sqrt();
    let nlos_amp = (1.0 / (k + 1.0)).sqrt();
    let mut out = los.map(|c| c * los_amp);
    for entry in out.iter_mut() {
        *entry += cscg(rng) * nlos_amp;
    }
    out
}

/// Half-wavelength ULA response along the x axis.
fn ula_response(n: usize, direction_cos: f64) -> CVector {
    CVector::from_fn(n, |k, _| cis(std::f64::consts::PI * k as f64 * direction_cos))
}

/// Unit-modulus line-of-sight matrix `a_rx a_tx^H` between two arrays.
pub fn los_matrix(scenario: &Scenario, tx: Node, n_tx: usize, rx: Node, n_rx: usize) -> CMatrix {
    let a = scenario.positions.get(tx);
    let b = scenario.positions.get(rx);
    let d = a.distance(b);
    let departure = (b.x - a.x) / d;
    let arrival = (a.x - b.x) / d;
    let tx_resp = ula_response(n_tx, departure);
    let rx_resp = ula_response(n_rx, arrival);
    &rx_resp * tx_resp.adjoint()
}

fn link_rng(seed: u64, stream_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_index);
    rng
}

pub(crate) fn substream(seed: u64, stream_index: u64) -> ChaCha20Rng {
    link_rng(seed, stream_index)
}

struct Link {
    tx: Node,
    n_tx: usize,
    rx: Node,
    n_rx: usize,
    distance: f64,
    stream: u64,
}

fn draw_link(scenario: &Scenario, link: &Link, seed: u64) -> Result<CMatrix> {
    let params = &scenario.channel;
    let mut rng = link_rng(seed, link.stream);
    match params.generation {
        ChannelGeneration::PathLossRician => {
            let amp = path_loss_amplitude(link.distance, params)?;
            let los = los_matrix(scenario, link.tx, link.n_tx, link.rx, link.n_rx);
            Ok(rician_sample(params.rician_k, &los, &mut rng) * C64::new(amp, 0.0))
        }
        ChannelGeneration::Iid => {
            let std = params.channel_sigma2.sqrt();
            Ok(DMatrix::from_fn(link.n_rx, link.n_tx, |_, _| cscg(&mut rng) * std))
        }
    }
}

/// Row channel (single-antenna receiver) turned into the `x` of `x^H w`.
fn as_vector(row: CMatrix) -> CVector {
    debug_assert_eq!(row.nrows(), 1);
    CVector::from_iterator(row.ncols(), row.iter().map(|c| c.conj()))
}

/// Draw every channel for one trial; deterministic in `(scenario, seed)`.
pub fn generate_channels(
    scenario: &Scenario,
    geometry: &DerivedGeometry,
    seed: u64,
) -> Result<ChannelSet> {
    let (n, ns, np) = (scenario.n_ris, scenario.n_s, scenario.n_p);
    let d = &geometry.distances;
    let link = |tx, n_tx, rx, n_rx, distance, stream| Link {
        tx,
        n_tx,
        rx,
        n_rx,
        distance,
        stream,
    };
    let g = draw_link(scenario, &link(Node::Sbs, ns, Node::Ris, n, d.sbs_ris, stream::G), seed)?;
    let u = draw_link(scenario, &link(Node::Ris, n, Node::Su, 1, d.ris_su, stream::U), seed)?;
    let v = draw_link(scenario, &link(Node::Ris, n, Node::Pu, 1, d.ris_pu, stream::V), seed)?;
    let h_s = draw_link(scenario, &link(Node::Sbs, ns, Node::Su, 1, d.sbs_su, stream::H_S), seed)?;
    let h_p = draw_link(scenario, &link(Node::Pbs, np, Node::Pu, 1, d.pbs_pu, stream::H_P), seed)?;
    let f_p = draw_link(scenario, &link(Node::Sbs, ns, Node::Pu, 1, d.sbs_pu, stream::F_P), seed)?;
    let f_s = draw_link(scenario, &link(Node::Pbs, np, Node::Su, 1, d.pbs_su, stream::F_S), seed)?;
    Ok(ChannelSet {
        g,
        u: as_vector(u),
        v: as_vector(v),
        h_s: as_vector(h_s),
        h_p: as_vector(h_p),
        f_p: as_vector(f_p),
        f_s: as_vector(f_s),
    })
}

/// `w_p = sqrt(P_p) h_p / ||h_p||`.
pub fn pbs_beamformer(h_p: &CVector, pp_dbw: f64) -> Result<PbsBeamformer> {
    let norm = h_p.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Degenerate("PBS channel h_p is zero".into()));
    }
    let scale = crate::scenario::dbw_to_watts(pp_dbw).sqrt() / norm;
    Ok(PbsBeamformer {
        w_p: h_p.map(|c| c * scale),
    })
}
