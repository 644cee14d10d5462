//! Signal-matched multirate whitening filter bank.
//!
//! An M-channel analysis bank whose decimated channel outputs are exact
//! least-squares prediction errors, decorrelated in time and across channels.
//! The crate provides:
//!
//! * [`lattice`] — the streaming time- and order-recursive LS lattice that
//!   computes the channel outputs with a fixed per-block operation count;
//! * [`oracle`] — a dense projection-operator engine that computes every
//!   lattice quantity from its definition, used to validate the recursions;
//! * [`coeffs`] — order-recursive estimation of the direct-form analysis
//!   filters (the H(p) tap matrices and the upper-triangular prefilter A);
//! * [`metrics`] — coding gain, AM-GM balance, Welch spectra, spectral
//!   flatness and convergence reports;
//! * [`signal`] — seeded test-signal generation and the data vectors the
//!   oracle operates on;
//! * [`experiments`] — the benchmark experiment runners behind the CLI;
//! * [`verify`] — the lattice-vs-oracle equivalence harness.

pub mod coeffs;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod metrics;
pub mod oracle;
pub mod signal;
pub mod verify;

pub use error::{Error, Result};
pub use lattice::{ChannelOutputs, OpCounters, Whitener, WhitenerConfig, WhitenerSnapshot};
pub use signal::{ArModel, Excitation, Signal};
