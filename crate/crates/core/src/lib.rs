//! Free additive convolution of two empirical spectra, the mesoscopic
//! variance and bias predictions for linear statistics of `A + U B U*`,
//! and a Monte Carlo harness that checks them against sampled matrices.
//!
//! The library is organised bottom up:
//!
//! - [`measures`]: empirical spectral measures, Stieltjes and F transforms,
//!   quantile discretisation of reference laws, Lévy distance.
//! - [`subordination`]: the subordination fixed point for `μ_A ⊞ μ_B`,
//!   one point derivatives and two point quantities.
//! - [`variance_kernel`]: test functions, the covariance kernel, contour
//!   variance, the universal variance and the bias term.
//! - [`random_matrix`]: Haar sampling, free sum samples and local law
//!   diagnostics.
//! - [`clt_harness`]: experiment configuration, the seeded Monte Carlo
//!   driver, normality tests and summary persistence.
//! - [`cli`]: the command line front end used by the `freesum` binary.

pub mod cli;
pub mod clt_harness;
pub mod error;
pub mod measures;
pub mod quadrature;
pub mod random_matrix;
pub mod subordination;
pub mod variance_kernel;

pub use error::{Error, Result};
pub use num_complex::Complex64;

use serde::{Deserialize, Serialize};

/// Symmetry class of the conjugation: orthogonal (1) or unitary (2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Beta {
    Orthogonal,
    Unitary,
}

impl Beta {
    pub fn value(self) -> f64 {
        match self {
            Beta::Orthogonal => 1.0,
            Beta::Unitary => 2.0,
        }
    }
}

impl TryFrom<u8> for Beta {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Beta::Orthogonal),
            2 => Ok(Beta::Unitary),
            _ => Err(Error::config("beta", format!("must be 1 or 2, got {v}"))),
        }
    }
}

impl From<Beta> for u8 {
    fn from(b: Beta) -> u8 {
        b.value() as u8
    }
}
