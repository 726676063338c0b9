//! Bayesian quantification of analytes in Raman mixture spectra.
//!
//! A target analyte's pure-component spectrum is decomposed into pseudo-Voigt
//! peaks over a cubic B-spline baseline by a reversible-jump sampler
//! ([`two_stage::learn_target`]). The learned line shape then enters the
//! design of a second sampler run on each mixture, whose posterior mean on
//! the target coefficient is the concentration estimate
//! ([`two_stage::quantify`]).

pub mod baselines;
pub mod bench;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod preprocess;
pub mod sampler;
pub mod simulator;
pub mod spectral;
pub mod two_stage;

pub use error::{Error, Result};
