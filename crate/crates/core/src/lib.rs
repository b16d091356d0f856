//! Joint vertical beamforming and RIS phase-shift design for underlay
//! cognitive radio networks.
//!
//! A secondary base station (SBS) with an electrically tiltable array serves a
//! single secondary user while a reconfigurable intelligent surface (RIS)
//! assists the link. Interference at the primary user is capped. The crate
//! provides the system model ([`scenario`], [`antenna_pattern`],
//! [`channel_model`], [`link_metrics`]), a dense semidefinite-program solver
//! ([`sdp`]), sequential rank-one recovery ([`srocr`]), the alternating
//! optimizer ([`alt_optimizer`]) and a Monte Carlo harness ([`experiments`]).

pub mod alt_optimizer;
pub mod antenna_pattern;
pub mod channel_model;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod link_metrics;
pub mod scenario;
pub mod sdp;
pub mod srocr;

pub use error::{Error, Result};
