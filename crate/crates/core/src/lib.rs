//! Symmetric real-qubit signal sets and their optimal detection.
//!
//! The crate builds the letter states `cos(iπ/M + θ₀)|H⟩ + sin(iπ/M + θ₀)|V⟩`,
//! the minimum-error and three-outcome information-optimal POMs for them,
//! computes channel matrices and Shannon quantities, numerically maximizes
//! accessible information and capacity, and simulates a polarization
//! Mach–Zehnder detector with Poisson photon counting.
//!
//! Information quantities are in bits throughout.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod info;
pub mod interferometer;
pub mod pom;

pub use ensemble::{make_signal_set, overlap, state_vector, RealQubit, SignalEnsemble};
pub use error::{Error, Result};
pub use pom::{
    channel_matrix, davies_pom, gamma_halves, min_error_pom, min_error_probability,
    projective_pom, validate_pom, ChannelMatrix, Pom, PomElement, ValidationReport,
};
