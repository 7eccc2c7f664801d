//! Modular-variable toolkit: integer/modular splits of position and momentum,
//! the states that squeeze or entangle the modular parts, the separability
//! criterion built on them, and the numerics needed to check it.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod criterion;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod modular;
pub mod sampling;
pub mod spectral;
pub mod states;
pub mod units;

pub use error::{Error, Result};
pub use modular::{Axis, ModularScale, ModularValue, PLANCK};
