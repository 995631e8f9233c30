#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Maximum-entropy transition densities, their Fokker-Planck evolution and
//! European option pricing on top of them.

pub mod dynamics;
pub mod error;
pub mod fokker_planck;
pub mod maxent;
pub mod pricing;
pub mod rng;
pub mod special;
pub mod tridiag;

pub use error::{Error, Result};
