//! Polynomial approximation on `[0,1]^d`: Smolyak interpolation on
//! Chebyshev-extrema sparse grids, weighted least squares from random
//! points, and a benchmark harness comparing the two.

pub mod error;
pub mod harness;
pub mod least_squares;
pub mod poly_space;
pub mod sampling;
pub mod sparse_grid;
pub mod test_functions;
pub mod univariate;

pub use error::{Error, Result};
