//! Airborne ultrasound focal heating simulator.
//!
//! Focuses a phased array of piston transducers on a skin patch, converts
//! the absorbed acoustic intensity into a surface heat flux, integrates a
//! 3-D skin-slab heat equation under static or square-wave amplitude
//! modulated drive, and reproduces temperature-rise curves and maps after
//! a one-parameter calibration of the absorbed-intensity fraction.
//!
//! Pipeline: [`geometry`] (array assemblies) → [`acoustics`] (focus phases,
//! pressure/intensity fields) → [`modulation`] (drive envelopes) →
//! [`thermal`] (heat diffusion, calibration) → [`analysis`] (perception
//! checks, comparison, export). [`config`] holds the JSON schema shared by
//! the CLI and library entry points.

// `!(x > 0.0)` comparisons in validations are written that way on purpose:
// they reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acoustics;
pub mod analysis;
pub mod config;
pub mod error;
pub mod geometry;
pub mod modulation;
pub mod thermal;

pub use error::{Error, Result};

// re-exported so downstream crates can construct points without pinning
// their own nalgebra version
pub use nalgebra;
