//! A one-dimensional Maxwell-Bloch laboratory for electromagnetically induced
//! transparency in m-level atomic ensembles.
//!
//! The crate integrates the mean-field probe/coherence equations of motion
//! ([`dynamics`]), evaluates the closed-form dark-state polariton theory
//! ([`polariton`]) and runs scenarios that compare the two ([`experiments`]).

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod polariton;
pub mod presets;
pub mod profile;
pub mod report;
pub mod sweep;
pub mod units;

pub use error::{Error, PolaritonError, Result, ValidationErrors};
pub use model::{validate, Config, FieldState, ValidConfig, C64};
