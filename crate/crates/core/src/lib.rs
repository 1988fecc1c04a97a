//! Frequency-domain Volterra kernel extraction from multi-tone probing.
//!
//! The pipeline runs plan -> probe -> extract -> synthesize:
//! [`plan`] lays out collision-free tone triplets and an amplitude schedule,
//! [`probe`] drives a [`systems`] model (or evaluates its analytic kernels)
//! to obtain output phasors at every mixing product, [`extract`] separates
//! kernels per product by least squares into a [`kernel`] archive, and
//! [`synth`] predicts time-domain responses from that archive.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod error;
pub mod extract;
pub mod kernel;
pub mod mixing;
pub mod plan;
pub mod probe;
pub mod signal;
pub mod synth;
pub mod systems;

pub use num_complex::Complex64;
