//! Reference elements, quadrature and the affine cell maps.

pub mod element;
pub mod geometry;
pub mod quadrature;

pub use element::{ElementKind, ReferenceElement, Tabulation};
pub use geometry::CellGeometry;
pub use quadrature::{edge_rule, triangle_rule, QuadratureRule};
