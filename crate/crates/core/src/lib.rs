//! Distance geometry over prime fields: the squared-multiplicity statistic of
//! a point set, spectra of finite Euclidean graphs, and exact checks of the
//! hinge, mixing and distance-sum inequalities that connect them.

pub mod bounds;
pub mod cli;
pub mod euclid;
pub mod field;
pub mod geometry;
pub mod limits;
pub mod spectral;

pub use field::{make_field, Fe, FieldError, PrimeField};
pub use geometry::{GeneratorSpec, GeometryError, Point, PointSet};
pub use limits::Limits;
