//! P1 finite elements on structured triangulations of a rectangle.

mod assembly;
mod field;
mod mesh;
mod operator;

pub use assembly::{assemble, interpolate, load_vector, Coefficients, ScalarFn};
pub use field::Field;
pub use mesh::{BoundaryEdge, Mesh, Side};
pub use operator::{apply_a, project_l2, DiscreteOperator};
