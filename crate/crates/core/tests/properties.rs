//! Randomised invariants across the geometry, camera, renderer and extraction layers.

use nalgebra::Rotation3;
use proptest::prelude::*;

use compc::camera::{CameraIntrinsics, CameraPose, estimate_reference_viewpoint, frontmost_indices, viewpoint_objective};
use compc::geometry::{
    EmdOptions, PointCloud, SpatialIndex, Vec3, chamfer_l1, directional_mean_nn, emd_approx, estimate_normals,
    farthest_point_indices, farthest_point_sample, mean_nearest_neighbor_distance, shapes,
};
use compc::guidance::timestep_schedule;
use compc::pce::{MergeState, SphereSdf, gaussian_surface_extraction, merge_layer, pull, SurfaceViews};
use compc::render::{DELTA_OPACITY, GaussianSet, binarize_opacity, render};

fn point() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn cloud(min: usize, max: usize) -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec(point(), min..max)
}

fn rigid() -> impl Strategy<Value = (Rotation3<f64>, Vec3)> {
    (point(), 0.0..std::f64::consts::TAU, point()).prop_map(|(axis, angle, t)| {
        let axis = if axis.norm() < 1e-3 { Vec3::z() } else { axis.normalize() };
        (Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle), t)
    })
}

fn pc(points: Vec<Vec3>) -> PointCloud {
    PointCloud::new(points).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chamfer_is_symmetric_nonnegative_and_rigid_invariant(a in cloud(1, 60), b in cloud(1, 60), (r, t) in rigid()) {
        let (ca, cb) = (pc(a.clone()), pc(b.clone()));
        let d = chamfer_l1(&ca, &cb);
        prop_assert!(d >= 0.0);
        prop_assert!((d - chamfer_l1(&cb, &ca)).abs() <= 1e-12);
        prop_assert_eq!(chamfer_l1(&ca, &ca), 0.0);
        let move_all = |v: &[Vec3]| pc(v.iter().map(|p| r * p + t).collect());
        prop_assert!((d - chamfer_l1(&move_all(&a), &move_all(&b))).abs() <= 1e-9);
    }

    #[test]
    fn emd_is_zero_on_itself_and_bounded_below_by_chamfer(a in cloud(2, 40), seed in 0u64..1000) {
        let n = a.len();
        let b: Vec<Vec3> = shapes::random_ball_points(n, 0.8, seed);
        let opts = EmdOptions { size: n, seed, ..Default::default() };
        prop_assert_eq!(emd_approx(&pc(a.clone()), &pc(a.clone()), &opts).unwrap(), 0.0);
        let emd = emd_approx(&pc(a.clone()), &pc(b.clone()), &opts).unwrap();
        let lower = 0.5 * (directional_mean_nn(&a, &SpatialIndex::new(&b)) + directional_mean_nn(&b, &SpatialIndex::new(&a)));
        prop_assert!(emd >= lower - 1e-9, "emd {} < {}", emd, lower);
    }

    #[test]
    fn normals_are_unit(seed in 0u64..1000) {
        let c = pc(shapes::random_sphere_points(200, 0.5, seed));
        let with = estimate_normals(&c, 12).unwrap();
        prop_assert!(with.normals().unwrap().iter().all(|n| (n.norm() - 1.0).abs() <= 1e-4));
    }

    #[test]
    fn farthest_point_sampling_is_deterministic_and_idempotent(a in cloud(5, 80), frac in 0.1..1.0f64, seed in 0u64..100) {
        let n = ((a.len() as f64 * frac) as usize).max(1);
        let c = pc(a);
        let first = farthest_point_indices(c.points(), n, seed).unwrap();
        prop_assert_eq!(&first, &farthest_point_indices(c.points(), n, seed).unwrap());
        let mut sorted = first.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), n);
        let once = farthest_point_sample(&c, n, seed).unwrap();
        let twice = farthest_point_sample(&once, n, seed).unwrap();
        let mut p1: Vec<[u64; 3]> = once.points().iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
        let mut p2: Vec<[u64; 3]> = twice.points().iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
        p1.sort_unstable();
        p2.sort_unstable();
        prop_assert_eq!(p1, p2);
    }

    #[test]
    fn frontmost_indices_are_unique_and_in_range(a in cloud(1, 200), el in -89.0..89.0f64, az in -180.0..180.0f64, s in 0.005..0.1f64) {
        let idx = frontmost_indices(&a, &vec![s; a.len()], &CameraPose::new(el, az, 3.0), &CameraIntrinsics::square(64, 49.1));
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(idx.iter().all(|&i| i < a.len()));
    }

    #[test]
    fn viewpoint_estimate_is_the_candidate_minimum(seed in 0u64..1000, k in 2usize..24) {
        let c = pc(shapes::random_hemisphere_points(300, 0.5, seed));
        let candidates = compc::camera::fibonacci_sphere_poses(k, 1.5, Vec3::zeros());
        let intr = CameraIntrinsics::square(64, 49.1);
        let est = estimate_reference_viewpoint(&c, &candidates, &intr, 1e-3).unwrap();
        prop_assert_eq!(est.pose, candidates[est.index]);
        let scale = mean_nearest_neighbor_distance(c.points()).unwrap();
        let index = SpatialIndex::new(c.points());
        for pose in &candidates {
            prop_assert!(est.objective <= viewpoint_objective(c.points(), scale, &index, pose, &intr, 1e-3));
        }
    }

    /// Turning the cloud about the vertical axis and shifting it, with the camera
    /// following, leaves the objective unchanged.
    #[test]
    fn viewpoint_objective_follows_the_cloud(seed in 0u64..1000, el in -80.0..80.0f64, az in -180.0..180.0f64, turn in -180.0..180.0f64, t in point()) {
        let pts = shapes::random_hemisphere_points(250, 0.5, seed);
        let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), turn.to_radians());
        let moved: Vec<Vec3> = pts.iter().map(|p| rot * p + t).collect();
        let intr = CameraIntrinsics::square(64, 49.1);
        let scale = mean_nearest_neighbor_distance(&pts).unwrap();
        let before = viewpoint_objective(&pts, scale, &SpatialIndex::new(&pts), &CameraPose::new(el, az, 1.6), &intr, 1e-3);
        let pose = CameraPose::new(el, az + turn, 1.6).with_target(t);
        let after = viewpoint_objective(&moved, mean_nearest_neighbor_distance(&moved).unwrap(), &SpatialIndex::new(&moved), &pose, &intr, 1e-3);
        prop_assert!((before - after).abs() <= 1e-6, "{} vs {}", before, after);
    }

    #[test]
    fn rendering_is_deterministic_and_alpha_bounded(a in cloud(1, 32), logits in prop::collection::vec(-4.0..4.0f64, 32), s in 0.01..0.2f64) {
        let n = a.len();
        let set = GaussianSet::new(a, s, logits[..n].to_vec(), vec![Vec3::new(0.2, 0.4, 0.6); n], false).unwrap();
        let (pose, intr) = (CameraPose::new(20.0, 30.0, 3.0), CameraIntrinsics::square(32, 49.1));
        let img = render(&[&set], &pose, &intr);
        prop_assert_eq!(&img, &render(&[&set], &pose, &intr));
        prop_assert!(img.alpha.iter().all(|&x| (0.0..=1.0 + 1e-12).contains(&x)));
    }

    #[test]
    fn binarised_opacity_takes_two_values(l in -20.0..20.0f64) {
        let o = binarize_opacity(l);
        prop_assert!(o == 1.0 || o == DELTA_OPACITY);
    }

    #[test]
    fn timestep_never_increases(a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(timestep_schedule(hi) <= timestep_schedule(lo));
    }

    #[test]
    fn pulling_onto_an_exact_sdf_is_idempotent(a in cloud(1, 50), r in 0.1..0.9f64) {
        let sdf = SphereSdf { center: Vec3::new(0.1, -0.2, 0.05), radius: r };
        let once = pull(&sdf, &a);
        let twice = pull(&sdf, &once);
        prop_assert!(once.iter().zip(&twice).all(|(p, q)| (p - q).norm() <= 1e-6));
    }

    #[test]
    fn merge_is_a_pointwise_convex_combination(q in cloud(1, 40), p in cloud(1, 40), sigma in 0.001..1.0f64) {
        let p_in = pc(p.clone());
        let merged = merge_layer(&MergeState::new(sigma, 0.0).unwrap(), &q, &p_in);
        let index = SpatialIndex::new(&p);
        for (m, q) in merged.iter().zip(&q) {
            let y = p[index.nearest(q).unwrap().index];
            for k in 0..3 {
                let (lo, hi) = (q[k].min(y[k]), q[k].max(y[k]));
                prop_assert!(m[k] >= lo - 1e-12 && m[k] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn surface_points_are_opaque_centres(a in cloud(2, 120), logits in prop::collection::vec(-3.0..3.0f64, 120)) {
        let n = a.len();
        let set = GaussianSet::new(a.clone(), 0.05, logits[..n].to_vec(), vec![Vec3::repeat(0.5); n], false).unwrap();
        if (0..n).any(|i| set.is_opaque(i)) {
            let out = gaussian_surface_extraction(&[&set], &SurfaceViews { count: 20, resolution: 64, ..Default::default() }).unwrap();
            prop_assert!(out.indices.iter().all(|&i| set.is_opaque(i)));
            prop_assert!(out.indices.iter().zip(out.points.points()).all(|(&i, p)| a[i] == *p));
        }
    }
}
