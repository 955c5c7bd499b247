//! Landmark meshes, piecewise-affine warping, reference blending and
//! component masks.

mod blend;
mod cam;
mod delaunay;
mod landmarks;
pub mod mask;
mod warp;

pub use blend::{blend, multi_blend, multi_blend_warped, BlendReference, ConstraintScope, WarpedItem};
pub use cam::{cam_mask, check_components, component_specs, ComponentAlphas, ComponentSchedule, ComponentSpec};
pub use delaunay::{delaunay, incircle, is_delaunay, orient, Point, TriangleMesh};
pub use landmarks::LandmarkSet;
pub use warp::{apply_affine, warp, Affine, WarpMap};
