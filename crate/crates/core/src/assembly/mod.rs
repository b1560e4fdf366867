//! Global assembly: dof maps, fields, sparse operators and the discretisation
//! context shared by every form.

pub mod discretisation;
pub mod space;
pub mod sparse;

pub use discretisation::{Discretisation, FacetTrace, ScalarQp, SpaceId, VectorQp};
pub use space::{CellPattern, Field, FunctionSpace};
pub use sparse::{LuSolver, SparseOperator, SpdSolver};
