//! Entanglement measures, capacity bounds and open-system witnesses for
//! qudit-scale quantum systems.

pub mod error;
pub mod infomeasures;
pub mod linalg;
pub mod par;
pub mod props;
pub mod qcore;
pub mod dynamics;
pub mod rains;
pub mod reading;
pub mod random;
pub mod sdp;

pub use error::{Error, Result};
