//! Lattice Discrete Particle Model (LDPM) solver.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: nodes, tetrahedra, facets, DoF maps, mesh I/O and fixtures;
//! * [`material`]: the facet constitutive law and its history variables;
//! * [`assembly`]: strain operators, internal forces, stiffness, lumped mass;
//! * [`integrators`]: explicit, generalized-α/HHT and quasi-static drivers;
//! * [`diagnostics`]: energies and FFT peak picking;
//! * [`compare`]: crack-field correlation and NRMSE;
//! * [`cli`]: run configuration, benchmark presets and output files.
//!
//! All numerical code is generic over [`Scalar`]; the `*64` aliases below are
//! what the binary uses.

pub mod scalar;
pub mod vec3;
mod error;

pub mod geometry;
pub mod material;
pub mod assembly;
pub mod compare;
pub mod diagnostics;
pub mod integrators;
pub mod cli;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use vec3::Vec3;

pub type Mesh64 = geometry::Mesh<f64>;
pub type Mesh32 = geometry::Mesh<f32>;
pub type System64 = integrators::System<f64>;
pub type Material64 = material::MaterialParams<f64>;
