//! Numerical toolkit for the Möbius cross energy of 2-component links:
//! Fourier-represented curves, the Gauss linking integral, conformal sphere
//! maps, the canonical family of Gauss-map surfaces in S³ with its sweepout
//! extension, and a gradient-descent energy minimizer.

pub mod conformal;
pub mod curve;
pub mod energy;
pub mod error;
pub mod family;
pub mod io;
pub mod optimize;
pub mod sweepout;
pub mod vec4;

pub use curve::{hopf_link, hopf_link_r3, perturbed_hopf_link, split_link, torus_2_4_link, Curve, Link};
pub use energy::{gauss_linking_integral, linking_number, mobius_energy, QuadratureSpec};
pub use error::{MobiusError, Result};
