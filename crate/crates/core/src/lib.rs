//! Billiard OTOC toolkit: geometry, classical and quantum dynamics.

pub mod analytic;
pub mod classical;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod quantum;
pub mod spectral;

pub use error::{Error, Result};
