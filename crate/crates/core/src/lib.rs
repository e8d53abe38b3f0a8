//! Secure hybrid spatial modulation.
//!
//! A partially-connected hybrid transmitter drives `n_rf` antenna subarrays,
//! one RF chain each. A power-of-two subset of the subarrays is selected and
//! the index of the active subarray carries spatial bits next to a PSK symbol.
//! Artificial noise is projected into the null space of the legitimate
//! receiver's effective channel to jam the eavesdropper.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! machinery:
//!
//! * [`numerics`] complex dense kernels (SVD, pseudo-inverse, whitening)
//! * [`model`] configuration, channels, selection, combiners, AN projector
//! * [`secrecy`] cut-off rates, approximate secrecy rate and Monte-Carlo SR
//! * [`sdp`] a small interior-point SDP solver
//! * [`precoders`] gradient-ascent, consensus-ADMM and SDR-AltMin precoders
//! * [`tass`] subarray selection strategies and their FLOP estimates
//!
//! Subarray and symbol indices are zero-based throughout.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod model;
pub mod numerics;
pub mod precoders;
pub mod sdp;
pub mod secrecy;
pub mod tass;

pub use error::{Error, Result};
pub use model::{
    ChannelPair, CombinerPair, Constellation, HybridPrecoder, Instance, SecureLink, SystemConfig,
    TassSelection,
};
pub use numerics::{CMatrix, CVector, C64};
