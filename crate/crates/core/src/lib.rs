//! Design and characterization toolkit for kinetic-inductance traveling-wave
//! parametric amplifiers (KITWPAs).
//!
//! The library models a superconducting transmission line whose series
//! inductance depends on current as
//!
//! ```text
//! L(I) = L0 * (1 + (I/I*)^2)
//! ```
//!
//! and provides, on top of that single nonlinearity:
//!
//! - [`film`] — superconducting film records, critical-temperature extraction
//!   from R(T) transition curves, and two independent routes to the sheet
//!   kinetic inductance.
//! - [`resonator`] — skewed-Lorentzian resonance fitting, probe-power to
//!   current conversion, and extraction of the nonlinearity scale I* from
//!   power-dependent resonance shifts.
//! - [`tline`] — Bloch dispersion of the periodically loaded lumped-element
//!   ladder, stopband location, and loading-pattern design that places a
//!   narrow stopband just above a pump and a wide one at its third harmonic.
//! - [`mixing`] — three-wave-mixing phase matching, pump placement, parametric
//!   gain from coupled-mode equations, a brute-force time-domain ladder
//!   simulator used as ground truth, and the quantum-limit noise benchmark.
//! - [`synth`] — seeded synthetic data generators for demos and tests.
//! - [`io`] — the CSV/JSON file formats shared with the command-line tool.

pub mod constants;
pub mod film;
pub mod io;
pub mod mixing;
pub mod numerics;
pub mod resonator;
pub mod synth;
pub mod tline;
