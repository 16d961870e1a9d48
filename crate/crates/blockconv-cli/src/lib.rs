//! Command-line front end for the blockconv imaging library: data simulation,
//! kernel construction, accelerated sparse reconstruction, learned-network
//! training and inference, benchmarking, and image rendering. The binary is
//! a thin shell over these modules; everything is callable as a library so
//! tests can drive the same paths in-process.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod pgm;
pub mod tensor;
