//! Behavioral simulator and analysis toolkit for a fully-digital mmWave
//! array receiver.
//!
//! The crate models the receive path of a small millimetre-wave array in
//! which every antenna channel is digitized independently: RF front-end
//! cascade analysis, far-field array patterns, per-channel impairments,
//! multi-lane ADC capture, digital calibration and beamforming, and an OFDM
//! link layer on top. Everything is deterministic given a seed.

pub mod array;
pub mod backend;
pub mod budget;
pub mod error;
pub mod frontend;
pub mod io;
pub mod ofdm;
pub mod scenario;
pub mod signal;

pub use error::{Error, Result};

// Keep the guide's code blocks compiling: each chapter runs as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/signals.md")]
    pub mod signals {}
    #[doc = include_str!("../../../book/src/link-budget.md")]
    pub mod link_budget {}
    #[doc = include_str!("../../../book/src/array.md")]
    pub mod array {}
    #[doc = include_str!("../../../book/src/frontend.md")]
    pub mod frontend {}
    #[doc = include_str!("../../../book/src/backend.md")]
    pub mod backend {}
    #[doc = include_str!("../../../book/src/ofdm.md")]
    pub mod ofdm {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    pub mod scenarios {}
}
