//! Equilibria of the full-information first-price auction: exact
//! verification, closed-form welfare and revenue bounds, explicit worst-case
//! constructions, linear programs over grid-supported equilibria, and
//! no-regret dynamics.

pub mod auction;
pub mod bounds;
pub mod cdf;
pub mod io;
pub mod construct;
mod error;
pub mod lp;
pub mod report;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
