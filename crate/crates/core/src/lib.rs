#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clocks;
pub mod contact;
pub mod error;
pub mod excursions;
pub mod export;
pub mod geometry;
pub mod harmonic;
pub mod oracles;
pub mod rng;
pub mod runs;
pub mod sampling;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
