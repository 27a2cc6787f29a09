//! Coupled-dipole engine for two-dimensional arrays of quantum emitters.
//!
//! Everything is dimensionless: lengths are in units of the transition
//! wavelength λ, rates and detunings in units of the single-emitter decay
//! rate Γ₀, and dipole amplitudes are normalised to the transition dipole.
//! The incident field seen by emitter `j` is `E_in = -η_j`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bands;
pub mod error;
pub mod exec;
pub mod greens;
pub mod io;
pub mod lattice;
pub mod numeric;
pub mod realspace;
pub mod scattering;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use tensor::{Tensor3, Vec2, Vec3};

use std::f64::consts::PI;

/// Free-space wavenumber for λ = 1.
pub const K0: f64 = 2.0 * PI;

/// Single-emitter spontaneous decay rate.
pub const GAMMA0: f64 = 1.0;

/// Prefactor `3π/k₀` linking the Green's tensor to couplings and fields.
pub const DIPOLE_COUPLING: f64 = 3.0 * PI / K0;
