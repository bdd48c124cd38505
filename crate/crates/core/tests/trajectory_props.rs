mod common;

use common::{brute_median, gaussian_matrix, noisy_walk, rng};
use ltae::linalg::Matrix;
use ltae::trajectory::{
    build_manifold, displacement, kinematics, load_trajectory_csv, median_filter_samples,
    save_trajectory_csv, separation, to_trajectory, DisplacementMode, Trajectory,
};
use proptest::prelude::*;

fn traj(coords: Matrix) -> Trajectory {
    Trajectory::new(300.0, coords, "t").unwrap()
}

fn total_variation(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Rotation by Euler angles.
fn rotation(a: f64, b: f64, c: f64) -> Matrix {
    let rz = |t: f64| {
        Matrix::from_rows(&[
            vec![t.cos(), -t.sin(), 0.0],
            vec![t.sin(), t.cos(), 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap()
    };
    let rx = |t: f64| {
        Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, t.cos(), -t.sin()],
            vec![0.0, t.sin(), t.cos()],
        ])
        .unwrap()
    };
    rz(a).matmul(&rx(b)).matmul(&rz(c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn median_matches_brute_force(n in 1usize..300, half in 0usize..60, seed in 0u64..10_000) {
        let w = 2 * half + 1;
        prop_assume!(w <= 10 * n);
        let t = traj(noisy_walk(n, seed));
        let f = median_filter_samples(&t, w).unwrap();
        prop_assert_eq!(f.len(), n);
        for axis in 0..3 {
            prop_assert_eq!(f.coords.column(axis), brute_median(&t.coords.column(axis), w));
        }
    }

    #[test]
    fn median_fixes_constants(n in 1usize..200, half in 0usize..40, v in -1e3f64..1e3) {
        let w = 2 * half + 1;
        prop_assume!(w <= 10 * n);
        let t = traj(Matrix::from_fn(n, 3, |_, c| v + c as f64));
        prop_assert_eq!(median_filter_samples(&t, w).unwrap(), t);
    }

    #[test]
    fn displacement_survives_shared_rotation(
        seed in 0u64..10_000,
        latent_dim in 3usize..6,
        angles in (0.0f64..6.3, 0.0f64..6.3, 0.0f64..6.3),
    ) {
        let mut r = rng(seed);
        let cloud = gaussian_matrix(40, latent_dim, &mut r);
        let task = gaussian_matrix(25, latent_dim, &mut r);
        let m = build_manifold(&cloud).unwrap();
        let q = rotation(angles.0, angles.1, angles.2);
        let mut rotated = m.clone();
        rotated.basis3 = m.basis3.matmul(&q);

        let t1 = to_trajectory(&task, &m, 300.0, "a").unwrap();
        let t2 = to_trajectory(&task, &rotated, 300.0, "a").unwrap();
        for mode in [DisplacementMode::Centroid, DisplacementMode::NearestPoint] {
            let d1 = displacement(&t1, &m, mode).unwrap();
            let d2 = displacement(&t2, &rotated, mode).unwrap();
            for (a, b) in d1.iter().zip(&d2) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn separation_ignores_translation(seed in 0u64..10_000, shift in prop::array::uniform3(-100.0f64..100.0)) {
        let mut r = rng(seed);
        let a = gaussian_matrix(30, 3, &mut r);
        let b = Matrix::from_fn(40, 3, |i, c| gaussian_matrix(1, 1, &mut r)[(0, 0)] + 2.0 * c as f64 + (i % 2) as f64);
        let moved = |m: &Matrix| Matrix::from_fn(m.rows(), 3, |i, c| m[(i, c)] + shift[c]);
        let s1 = separation(&traj(a.clone()), &traj(b.clone())).unwrap();
        let s2 = separation(&traj(moved(&a)), &traj(moved(&b))).unwrap();
        prop_assert!((s1.separation_ratio - s2.separation_ratio).abs() <= 1e-9 * s1.separation_ratio.max(1.0));
    }

    #[test]
    fn time_reversal_negates_velocity(seed in 0u64..10_000, n in 3usize..200) {
        let t = traj(noisy_walk(n, seed));
        let rev = Matrix::from_fn(n, 3, |i, c| t.coords[(n - 1 - i, c)]);
        let k = kinematics(&t).unwrap();
        let kr = kinematics(&traj(rev)).unwrap();
        for i in 1..n - 1 {
            for c in 0..3 {
                let a = k.velocity[(i, c)];
                let b = kr.velocity[(n - 1 - i, c)];
                prop_assert!((a + b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn trajectory_csv_round_trip(seed in 0u64..10_000, n in 1usize..50) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let t = Trajectory::new(250.0, noisy_walk(n, seed), "x").unwrap();
        save_trajectory_csv(&t, None, None, &path).unwrap();
        let back = load_trajectory_csv(&path, "x", 300.0).unwrap();
        prop_assert_eq!(back.coords, t.coords);
        if n > 1 {
            prop_assert!((back.sample_rate_hz - 250.0).abs() < 1e-9);
        }
    }
}

#[test]
fn longer_windows_never_add_total_variation() {
    let windows = [1, 3, 31, 101, 301, 1801];
    for seed in 0..20 {
        let t = traj(noisy_walk(2000, seed));
        for axis in 0..3 {
            let tv: Vec<f64> = windows
                .iter()
                .map(|&w| {
                    total_variation(&median_filter_samples(&t, w).unwrap().coords.column(axis))
                })
                .collect();
            assert!(
                tv.windows(2).all(|p| p[1] <= p[0] + 1e-12),
                "seed {seed} axis {axis}: {tv:?}"
            );
        }
    }
}

#[test]
fn back_projection_recovers_centered_latents() {
    let mut r = rng(17);
    let cloud = gaussian_matrix(100, 3, &mut r);
    let m = build_manifold(&cloud).unwrap();
    let t = to_trajectory(&cloud, &m, 300.0, "rest").unwrap();
    let back = t.coords.matmul(&m.basis3.transpose());
    let centered = cloud.centered();
    for (a, b) in back.as_slice().iter().zip(centered.as_slice()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn nearest_point_matches_exhaustive_search() {
    let pts = Matrix::from_rows(&[
        vec![0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0],
        vec![0.0, 2.0, 0.0],
        vec![0.0, 0.0, 3.0],
        vec![1.0, 1.0, 1.0],
    ])
    .unwrap();
    let m = build_manifold(&pts).unwrap();
    let proj = m.projected_points();
    let probe = gaussian_matrix(20, 3, &mut rng(5));
    let t = to_trajectory(&probe, &m, 300.0, "p").unwrap();
    let d = displacement(&t, &m, DisplacementMode::NearestPoint).unwrap();
    for (i, row) in t.coords.row_iter().enumerate() {
        let best = proj
            .row_iter()
            .map(|p| {
                ((row[0] - p[0]).powi(2) + (row[1] - p[1]).powi(2) + (row[2] - p[2]).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((d[i] - best).abs() < 1e-12);
    }
}
