//! Spatial dynamics of EPR-steering correlations between two bimodal
//! Bose–Einstein condensates transported in state-dependent traps.
//!
//! The four components `a0, a1, b0, b1` (well × internal state) are described
//! by a superposition of Fock states whose mode functions follow coupled
//! Gross–Pitaevskii equations. Only nine population vectors around the
//! central one are evolved; everything else follows from a linearisation of
//! the mode phases in the populations.
//!
//! * [`grid`]: cylindrical lattice and the discrete single-particle operator.
//! * [`meanfield`]: energy functional, real- and imaginary-time propagation.
//! * [`fockflow`]: the nine-trajectory engine, phase gradients and reduced phases.
//! * [`correlators`]: general Fock-sum averages, spin moments, EPR witness.
//! * [`sequence`]: the transport protocol and witness time series.
//! * [`oracle4mode`]: exact four-mode reference model.
//! * [`losses`]: static atom-loss budget.
//!
//! Units throughout are `ħ = m = ω = 1`.

pub mod correlators;
pub mod fockflow;
pub mod grid;
pub mod losses;
pub mod meanfield;
pub mod oracle4mode;
pub mod sequence;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
