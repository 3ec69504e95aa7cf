//! Reference implementations written separately from the library code, for
//! use as test oracles. Everything here favours directness over speed.

pub mod forward;
pub mod gradcheck;
pub mod graphs;
pub mod losses;
pub mod metrics;
pub mod scenarios;
