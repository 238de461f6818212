//! Physical constants, fixed to the exact 2019 SI values.
//!
//! These are deliberately not configurable: every derived quantity in the
//! toolkit must be bit-reproducible across runs and machines.

/// Reduced Planck constant [J·s].
pub const HBAR: f64 = 1.054571817e-34;

/// Boltzmann constant [J/K].
pub const KB: f64 = 1.380649e-23;
