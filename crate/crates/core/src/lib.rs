//! Time-domain acousto-elastic finite elements with time-reversal imaging.
//!
//! A fluid layer sits on top of an elastic half-space containing inclusions.
//! Pressure (fluid) and solid velocity are discretized with P2 triangles and
//! advanced with a centered, time-reversible scheme. Scattered pressure
//! recorded on a receiver array is reversed in time, re-emitted into the
//! inclusion-free medium, and cross-correlated with the incident field to
//! image the inclusions.

pub mod assembly;
pub mod cli;
pub mod config;
pub mod error;
pub mod forward;
pub mod imaging;
pub mod linalg;
pub mod mesh;
pub mod pipeline;
pub mod reversal;
pub mod scene;
pub mod stepper;
pub mod validation;

pub use error::{Error, Result};
