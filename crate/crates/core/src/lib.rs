//! Geometry kernel for body-conditioned radiance-field rendering:
//! signed-distance embeddings over posed triangle meshes, grid-accelerated
//! closest-point and ray queries, visual-hull-bounded volume rendering,
//! occlusion-aware multi-view blending, and reconstruction metrics.

pub mod camera;
pub mod config;
pub mod field;
pub mod grid;
pub mod math;
pub mod marching;
pub mod mesh;
pub mod metrics;
pub mod occlusion;
pub mod raster;
pub mod raycast;
pub mod render;
pub mod rng;
pub mod sampling;
pub mod sdf;
pub mod shapes;
pub mod tri_closest;

pub use camera::Camera;
pub use field::{FieldSample, RadianceField};
pub use grid::{ClosestPoint, VoxelGrid};
pub use math::{Aabb, Mat3, Vec3};
pub use mesh::{load_mesh, save_obj, MeshError, TriMesh};
pub use occlusion::{attention_blend, occlusion_prior, BlendQuery, ViewObservation};
pub use raster::{rasterize_depth, DepthMap, NO_SURFACE};
pub use raycast::{first_hit, intersect_ray, RayHit};
pub use render::{integrate_ray, occupancy, render_image, RenderConfig, RenderOutput};
pub use rng::CounterRng;
pub use sampling::{Mask, VisualHull};
pub use sdf::{BodyEmbedding, NormalizedFrame, ScalarVolume, SignedDistance};
pub use tri_closest::{closest_point_on_triangle, TriangleClosest};
