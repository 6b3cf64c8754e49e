//! Numeric verification of inhomogeneous local gauge invariance.
//!
//! Fields are user-supplied analytic expressions, evaluated as order-2 jets
//! so that every derivative appearing in the transformation rules,
//! Hamiltonians and Lagrangians is exact up to rounding.

#![allow(clippy::needless_range_loop)]

pub mod dynamics;
pub mod error;
pub mod fieldexpr;
pub mod gaugemap;
pub mod jets;
pub mod tensoralg;
pub mod verifier;

pub use error::{Error, Result};
pub use fieldexpr::{FieldExpr, SyntaxError};
pub use jets::{Jet, Order, SpacetimePoint, C64};
