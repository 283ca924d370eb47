//! Joint active/passive beamforming for RIS-assisted multi-user MISO downlink.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`] draws Rician/Rayleigh channel realisations and CSI-error
//!   estimates for a [`SystemConfig`] scenario.
//! * [`wmmse`] holds the closed-form WMMSE block updates for the active
//!   beamformer together with rate and weighted-sum-rate evaluation.
//! * [`pi`] assembles the unimodular quadratic program for the RIS phases and
//!   solves it by power iteration.
//! * [`solvers`] chains the blocks into WMMSE-PI, its unfolded variants and
//!   the two-timescale imperfect-CSI variant.
//! * [`learn`] owns the GNN initialiser, trainable parameters and the SPSA
//!   trainer.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod dataset;
mod error;
pub mod learn;
pub mod linalg;
pub mod pi;
pub mod rng;
pub mod solvers;
pub mod wmmse;

pub use channel::{ChannelEstimate, ChannelSet, LosComponents};
pub use config::{PhaseResolution, SystemConfig};
pub use error::{Error, Result};
pub use learn::{GnnParams, TrainableParams, Variant};
pub use pi::{Certificate, QuadraticForm};
pub use solvers::{SolveReport, UnfoldMode};
pub use wmmse::BeamformerState;

pub use num_complex::Complex64 as C64;
