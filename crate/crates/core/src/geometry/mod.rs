//! Point clouds, neighbour queries, normals and the distance metrics.

mod cloud;
mod index;
pub mod io;
mod metrics;
mod normals;
mod sampling;
pub mod shapes;

pub use cloud::{Aabb, PointCloud, Similarity, Vec3, normalize_unit_box};
pub use index::{BRUTE_FORCE_LIMIT, Neighbor, SpatialIndex};
pub use metrics::{EmdOptions, auction_assignment, chamfer_l1, chamfer_l1_points, directional_mean_nn, emd_approx};
pub use normals::{DEFAULT_NORMAL_NEIGHBORS, estimate_normals, estimate_normals_flagged};
pub use sampling::{
    farthest_point_indices, farthest_point_indices_from, farthest_point_sample, mean_nearest_neighbor_distance,
    nearest_neighbor_distances, nearest_neighbor_distances_of, nn_distance_cv,
};
