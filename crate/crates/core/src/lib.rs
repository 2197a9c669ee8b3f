//! Dissipativity certificates for linear time-invariant systems computed
//! directly from input-output data.
//!
//! The main entry point is [`certifier::certify`]: it takes one measured
//! trajectory, a lag bound and a supply rate, and either returns a quadratic
//! storage function valid for every system consistent with the data or
//! explains why the data do not suffice.

pub mod certifier;
pub mod datamat;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lti;
pub mod qdf;
pub mod sdp;

pub use error::{Error, Result};
