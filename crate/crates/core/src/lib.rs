//! Chronotaxic dynamics of the driven Poincaré oscillator.
//!
//! A chronotaxic system carries a time-dependent point attractor inside a
//! contraction region, so its time-varying rhythm resists perturbation. This
//! crate simulates the reference oscillator, maps where its symmetrised
//! Jacobian is negative definite, follows the fixed points of the rotating
//! frame through their saddle-node bifurcations, verifies chronotaxicity of
//! arbitrary drive schedules and extracts the wavelet and phase-slip
//! signatures of noisy runs.
//!
//! | module | contents |
//! |---|---|
//! | [`model`] | states, parameters, lab and rotating vector fields |
//! | [`schedule`] | sampled coupling and frequency profiles, drive angle |
//! | [`integrate`] | RK4 and Euler–Maruyama runs, ensembles, pullback |
//! | [`contraction`] | symmetric-part eigenvalues and contraction maps |
//! | [`steady_state`] | fixed points, continuation, Γ, region map, attractor track |
//! | [`verify`] | trapping disks, attraction defects, schedule verification |
//! | [`signal`] | Morlet scalogram, ridge, phase slips |
//! | [`cli`] | the `chronotax` command line |
//!
//! The `examples/` directory has one program per capability: `simulate`,
//! `fig2_dichotomy`, `portrait`, `sweep`, `region_map`, `verify_schedule`,
//! `pullback`, `noise_signatures` and `cwt`.
//!
//! ```
//! use chronotax::model::{FrozenParams, OscillatorParams};
//! use chronotax::steady_state::{classify, ChronotaxicClass};
//!
//! let fp = FrozenParams::new(1.2, 0.5, OscillatorParams::default()).unwrap();
//! assert_eq!(classify(&fp).unwrap(), ChronotaxicClass::TypeI);
//! ```

// `!(x > 0.0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod contraction;
pub mod error;
pub mod integrate;
pub mod io;
pub mod model;
pub mod schedule;
pub mod signal;
pub mod steady_state;
pub mod verify;

pub use error::{Error, Result};
