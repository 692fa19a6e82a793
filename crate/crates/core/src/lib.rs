//! Online PHY caching for cached MIMO interference networks with a dual-mode
//! (CoMP / coordinated beamforming) physical layer.

pub mod actual_plane;
pub mod analysis;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod model;
pub mod phy;
pub mod traffic;
pub mod virtual_plane;

pub use error::{Error, Result};
