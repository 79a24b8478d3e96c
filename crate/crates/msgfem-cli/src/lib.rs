//! Configuration-driven experiment harness for `msgfem`: builds the
//! two-patch benchmark, runs the studies and writes CSV and SVG artifacts.

pub mod config;
pub mod emit;
pub mod problem;
pub mod studies;
