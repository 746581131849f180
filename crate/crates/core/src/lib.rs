//! Exact-rational LP relaxation and rounding for metric capacitated facility location.

#![allow(clippy::needless_range_loop)]

pub mod batch;
pub mod flow;
pub mod instances;
pub mod lp;
pub mod matching;
pub mod mfn;
pub mod rational;
pub mod rounding;
pub mod solver;
pub mod suite;
