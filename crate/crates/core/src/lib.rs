//! Broad-match keyword auctions with exact arithmetic.
//!
//! Queries are priced at the minimum symmetric Nash equilibrium of GSP
//! ([`auction`]). Days are simulated event by event over a broad match graph
//! ([`simulate`]), using constant-cost query segments ([`partition`]).
//! Advertisers split budgets across keywords via [`bestresp`], profiles are
//! checked in [`equilibrium`], and [`acbm`] spends leftover budgets along new
//! edges on the auctioneer's behalf.

pub mod acbm;
pub mod auction;
pub mod cli;
pub mod bestresp;
pub mod equilibrium;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod partition;
pub mod rational;
pub mod report;
pub mod simulate;

pub use error::{Error, Result};
pub use rational::{Ext, Rational};
