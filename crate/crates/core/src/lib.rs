//! Plane-strain finite-element simulator for cohesive shear (mode-II)
//! fracture. A phase field regularizes the shear band; the stress split
//! damages only the deviatoric part, limited by a Lode-angle-dependent
//! Mohr-Coulomb surface with peak and residual strengths.

pub mod constitutive;
pub mod error;
pub mod fem;
pub mod io;
pub mod mesh;
pub mod scenarios;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::SymTensor;
