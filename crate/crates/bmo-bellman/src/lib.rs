//! Bellman functions for integral functionals on BMO.
//!
//! The crate builds the extremal foliation of the parabolic strip for a
//! boundary function f and evaluates the resulting Bellman candidate.

pub mod boundary;
pub mod candidate;
pub mod cli;
pub mod cups;
pub mod error;
pub mod forces;
pub mod geometry;
pub mod numerics;
pub mod optimizers;
pub mod tangents;
pub mod verify;

pub use error::{Error, Result};
