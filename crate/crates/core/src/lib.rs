//! Jet-based verification toolkit for Killing and Calabi operators on
//! Riemannian locally symmetric spaces.

// Index loops mirror the tensor formulas they implement.
#![allow(clippy::needless_range_loop)]

pub mod diffops;
pub mod error;
pub mod holonomy;
pub mod jets;
pub mod linalg;
pub mod models;
pub mod space;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
