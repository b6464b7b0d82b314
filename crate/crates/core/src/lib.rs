//! Simulation and analysis library for an indoor optical wireless downlink that
//! combines RLNC-coded NOMA transmission with MIMO-LiDAL detection and
//! localization.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gf256;
pub mod rlnc;
pub mod rng;
pub mod scenario;
pub mod optics;
pub mod crlb;
pub mod lidal;
pub mod noma;
pub mod grouping;
pub mod harness;
