//! Level-truncated computational engine for unitary vertex-operator-algebra
//! modules: exact scalar arithmetic, the coordinate-change group, free-boson
//! Fock modules and intertwiners, genus-0 conformal blocks, q-series sewing,
//! and positivity certification of fusion products.

pub mod approx;
pub mod blocks;
pub mod coords;
pub mod deep;
pub mod error;
pub mod fock;
pub mod matrix;
pub mod model;
pub mod positivity;
pub mod scalar;
pub mod module;
pub mod series;
pub mod sewing;
pub mod symfactor;
