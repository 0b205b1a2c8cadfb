use posevote_core::canonical::snap_epsilon;
use posevote_core::io::{format_correspondences, parse_correspondences_str};
use posevote_core::primal_dual::{primal_dual_solve, PrimalDualOptions};
use posevote_core::{
    build_grid, cells_crossed, check_conditions, frame_distance, generate_scene, AnalyticConstants, Correspondence,
    Normalization, Pose, SceneConfig, SurfaceSigma,
};
use proptest::prelude::*;

fn correspondence() -> impl Strategy<Value = Correspondence> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, -2.0..=2.0f64, -2.0..=2.0f64)
        .prop_map(|(a, b, c, d, e)| Correspondence::new(a, b, c, d, e))
}

fn pose() -> impl Strategy<Value = Pose> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z, k)| Pose::new(x, y, z, k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correspondence_files_round_trip(corrs in prop::collection::vec(correspondence(), 1..40)) {
        let parsed = parse_correspondences_str(&format_correspondences(&corrs)).unwrap();
        prop_assert_eq!(parsed, corrs);
    }

    #[test]
    fn normalization_restores_what_it_maps(
        pts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64), 2..20),
        v in pose(),
    ) {
        let corrs: Vec<_> = pts.iter().map(|&(a, b, c)| Correspondence::new(a, b, c, 0.0, 0.0)).collect();
        let n = Normalization::fit(&corrs);
        for c in &corrs {
            prop_assert!(n.apply(c).in_unit_cube());
        }
        let mapped = Pose::new(
            (v.x - n.offset[0]) * n.scale,
            (v.y - n.offset[1]) * n.scale,
            (v.z - n.offset[2]) * n.scale,
            v.kappa,
        );
        let back = n.restore(&mapped);
        prop_assert!(back.abs_diff(&v).iter().all(|d| *d < 1e-9));
    }

    #[test]
    fn snapped_epsilon_is_a_power_of_two_quarter(eps in 1e-4..=0.25f64) {
        let (e, depth) = snap_epsilon(eps).unwrap();
        prop_assert!(e <= eps && e > eps / 2.0);
        prop_assert_eq!(4.0 * e, 0.5f64.powi(depth as i32));
    }

    /// Every admissible surface within eps of a cell center is among the
    /// surfaces the grid marks in that cell.
    #[test]
    fn naive_marks_every_near_admissible_surface(
        w in (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64),
        v in pose(),
        shift in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
        eps in 0.03..0.1f64,
    ) {
        let consts = AnalyticConstants::default();
        let grid = build_grid(eps, &consts).unwrap();
        let cell = grid.cell_of(&v).unwrap();
        let center = grid.center(cell);
        // A surface through a pose near the center, so most draws are near.
        let p = Pose::new(
            center.x + shift.0 * eps,
            center.y + shift.1 * eps,
            center.z + shift.2 * eps,
            center.kappa + shift.3 * eps,
        );
        let Ok(c) = Correspondence::observed_from(&p, [w.0, w.1, w.2]) else { return Ok(()) };
        let near = matches!(frame_distance(&center, &c), Ok(d) if d <= eps);
        prop_assume!(near && check_conditions(&center, &c, &consts));
        let (cells, _) = cells_crossed(&SurfaceSigma::new(c), &grid);
        prop_assert!(cells.binary_search(&cell).is_ok());
    }

    #[test]
    fn scenes_are_reproducible(seed in 0u64..1000, n in 1usize..300, ratio in 0.0..=1.0f64) {
        let cfg = SceneConfig { n, inlier_ratio: ratio, seed, ..Default::default() };
        let a = generate_scene(&cfg).unwrap();
        prop_assert_eq!(&a, &generate_scene(&cfg).unwrap());
        prop_assert_eq!(a.correspondences.len(), n);
        prop_assert_eq!(a.inlier.iter().filter(|&&i| i).count(), cfg.inlier_count());
        prop_assert!(a.correspondences.iter().all(|c| c.in_unit_cube() && c.within_image_bound(cfg.image_bound)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Early exit only skips work: the best count is unchanged.
    #[test]
    fn early_exit_keeps_the_best_count(seed in 0u64..10_000, block in 1usize..4) {
        let cfg = SceneConfig { n: 400, inlier_ratio: 0.3, noise_sigma: 0.01, seed, ..Default::default() };
        let surfaces: Vec<_> =
            generate_scene(&cfg).unwrap().correspondences.into_iter().map(SurfaceSigma::new).collect();
        let consts = AnalyticConstants::default();
        let full = PrimalDualOptions { block: Some(block), ..Default::default() };
        let fast = PrimalDualOptions { early_exit: true, ..full };
        let a = primal_dual_solve(&surfaces, 0.05, &consts, &full).unwrap();
        let b = primal_dual_solve(&surfaces, 0.05, &consts, &fast).unwrap();
        let (ba, bb) = (a.result.best().unwrap(), b.result.best().unwrap());
        prop_assert_eq!(ba.count, bb.count);
        prop_assert_eq!(ba.pose, bb.pose);
    }
}
