//! Simplicial mesh smoothing and adaptation by gradient flow of discrete
//! meshing functionals.

pub mod diagnostics;
pub mod error;
pub mod functional;
pub mod integrate;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod metric;
pub mod mmpde;
pub mod reference;
pub mod scenario;

pub use error::{Error, Result};
pub use functional::{Coercivity, Functional, GDerivatives};
pub use linalg::{Mat, Vector};
pub use mesh::{BoundaryConstraint, BoundaryPolicy, Simplex, SimplicialMesh, Surface};
pub use metric::{MetricBounds, MetricField};
pub use reference::{ComputationalMesh, ReferenceSimplex};
pub use mmpde::{MmpdeProblem, VelocityField};
pub use integrate::{integrate, EnergyTrace, IntegratorConfig, Scheme, TerminationReason};
pub use scenario::{Scenario, ScenarioKind, ScenarioOptions};
