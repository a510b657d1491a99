//! RIS-assisted physical-layer group key generation.
//!
//! The library simulates K user terminals deriving identical secret bits from
//! the aggregate channels reflected by a passive or active RIS, aligns those
//! channels with SCA (passive) or SDR with Gaussian randomization (active),
//! quantizes the aligned samples into keys, and evaluates NMSE, KER, KGR,
//! eavesdropper leakage and NIST SP 800-22 randomness.

// Link the system BLAS/LAPACK backing the SDP cone.
extern crate openblas_src;

pub mod channel;
pub mod conic;
pub mod error;
pub mod metrics;
pub mod nist;
pub mod quantizer;
pub mod sca;
pub mod sdr;
pub mod seed;
pub mod system;

pub use error::{GkgError, Result};
