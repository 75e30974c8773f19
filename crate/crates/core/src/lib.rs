//! Ultra-weak first-order least-squares discretization of the Helmholtz
//! equation on triangular meshes, with a standard Galerkin baseline.

pub mod adaptivity;
pub mod assembly;
pub mod fields;
pub mod linalg;
pub mod mesh;
pub mod metrics;
pub mod problems;
pub mod quadrature;
pub mod reference;
pub mod scalar;
pub mod solver;
pub mod spaces;
pub mod sparse;

pub type C64 = num_complex::Complex<f64>;
pub type Mesh = mesh::TriMesh<f64>;
pub type Space = spaces::FESpace<f64>;
pub type TestSpace = spaces::CoupledTestSpace<f64>;
pub type Context = spaces::WaveContext<f64>;
