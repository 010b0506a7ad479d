//! Tectonic fields of quadratic forms over 1D and 2D grids, the formal
//! transversalization algorithm that makes them transverse to a field of
//! Lagrangian planes, and explicit generating-function models of ridges.

pub mod error;
pub mod grid;
pub mod io;
pub mod manifest;
pub mod models;
pub mod rank1;
pub mod registry;
pub mod symplectic;
pub mod transversalize;

pub use error::{Error, Result};
