//! Completion engines: local consistency and completion at a point, the
//! perturbation-based oracle, and the global engine on a window of U.

pub mod geometry;
pub mod global;
pub mod local;
pub mod perturb;

pub use geometry::{Point, Window};
pub use global::{GlobalDiagram, GlobalRay, VerticalQuery};
pub use local::{LocalDiagram, LocalRay, Orientation};
