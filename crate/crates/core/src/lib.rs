//! Diffraction-aided positioning of indoor receivers from outdoor anchors.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: path lengths for direct, specular and edge-diffracted rays,
//!   including the closed-form diffraction point on a finite horizontal edge.
//! - [`materials`]: frequency-dependent building material physics (slab
//!   transmission loss, Fresnel reflection, free-space and diffraction loss).
//! - [`channel`]: deterministic multipath synthesis for an outdoor-to-indoor
//!   scene, MPC classification and a line-delimited dataset format.
//! - [`fap`]: first-arriving-path selection and ranging CRLB.
//! - [`positioning`]: D-NLS, LLS and the Fisher-information position error bound.
//! - [`experiments`]: frequency sweeps, `P_FAP` statistics and CSV reports.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

// `!(x > 0.0)` is used on purpose to reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod experiments;
pub mod fap;
pub mod geometry;
pub mod materials;
pub mod par;
pub mod positioning;

/// Speed of light in vacuum (m/s), exact by SI definition.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant (J/K), exact by SI definition.
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub use geometry::{Point3, Vec3};
