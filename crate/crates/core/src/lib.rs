#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Outage-minimizing power allocation for coded modulation over block-fading
//! and OFDM channels with discrete inputs.

pub mod constellation;
pub mod error;
pub mod fading;
pub mod infotheory;
pub mod interp;
pub mod longterm;
pub mod outage;
pub mod powalloc;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
