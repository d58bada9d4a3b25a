use proptest::prelude::*;

use diffloc::channel::{classify_mpc, truncate_top_k, Interaction, Mpc, MpcGroup, Pdp, Scene};
use diffloc::experiments::{build_default_scene, p_fap_stats};
use diffloc::fap::{ranging_crlb_std_seconds, select_fap};
use diffloc::geometry::{approx_diffraction_path_length, diffraction_point, euclidean_distance, EdgeKind, WindowEdge};
use diffloc::materials::{transmission_loss_db, Material, MaterialTable, SlabSpec};
use diffloc::positioning::{
    dnls_solve, fisher_information, AnchorMeasurement, DnlsOptions, MeasurementSet, RangeModel,
};
use diffloc::Point3;
use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};

fn interaction() -> impl Strategy<Value = Interaction> {
    prop_oneof![
        Just(Interaction::T),
        Just(Interaction::R),
        Just(Interaction::D),
        Just(Interaction::DS)
    ]
}

fn point(scale: f64) -> impl Strategy<Value = Point3> {
    (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn profile() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1.0f64..100.0, -10.0f64..50.0), 1..40)
}

fn pdp_from(paths: &[(f64, f64)]) -> Pdp {
    let mpcs = paths
        .iter()
        .enumerate()
        .map(|(i, &(len, snr))| {
            let kind = [Interaction::T, Interaction::D, Interaction::R][i % 3];
            Mpc::new(vec![kind], len, snr - 90.0, snr, 0)
        })
        .collect();
    Pdp::new(0, 0, Point3::origin(), mpcs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn classification_total_and_stable_under_trailing_t(
        chain in prop::collection::vec(interaction(), 0..8),
        extra in 0usize..5,
    ) {
        let g = classify_mpc(&chain);
        prop_assert!(MpcGroup::ALL.contains(&g));
        if g != MpcGroup::MPC4 {
            let mut longer = chain.clone();
            longer.extend(std::iter::repeat_n(Interaction::T, extra));
            prop_assert_eq!(classify_mpc(&longer), g);
        }
    }

    #[test]
    fn fap_is_permutation_invariant(paths in profile(), seed in any::<u64>()) {
        let a = select_fap(&pdp_from(&paths), 20.0).unwrap();
        let mut shuffled = paths.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) % (i as u64 + 1)) as usize;
            shuffled.swap(i, j);
        }
        let b = select_fap(&pdp_from(&shuffled), 20.0).unwrap();
        prop_assert_eq!(a.chosen.tof, b.chosen.tof);
        prop_assert_eq!(a.chosen.snr_db, b.chosen.snr_db);
        prop_assert_eq!(a.s_max, b.s_max);
    }

    #[test]
    fn raising_t_fap_never_delays_fap(paths in profile(), t in 0.0f64..40.0, dt in 0.0f64..20.0) {
        let pdp = pdp_from(&paths);
        let lo = select_fap(&pdp, t).unwrap();
        let hi = select_fap(&pdp, t + dt).unwrap();
        prop_assert!(hi.chosen.tof <= lo.chosen.tof);
        prop_assert!(lo.chosen.snr_db >= lo.threshold);
        prop_assert!(!pdp.mpcs.iter().any(|m| m.snr_db >= lo.threshold && m.tof < lo.chosen.tof));
    }

    #[test]
    fn truncation_matches_sort_and_take(paths in profile(), k in 1usize..30) {
        let pdp = pdp_from(&paths);
        let out = truncate_top_k(&pdp, k);
        prop_assert_eq!(out.len(), k.min(pdp.len()));
        prop_assert!(out.mpcs.windows(2).all(|w| w[0].tof <= w[1].tof));
        let mut snrs: Vec<f64> = pdp.mpcs.iter().map(|m| m.snr_db).collect();
        snrs.sort_by(|a, b| b.total_cmp(a));
        let mut kept: Vec<f64> = out.mpcs.iter().map(|m| m.snr_db).collect();
        kept.sort_by(|a, b| b.total_cmp(a));
        prop_assert_eq!(&kept[..], &snrs[..kept.len()]);
    }

    #[test]
    fn crlb_strictly_decreasing(beta in 1e12f64..1e18, snr in 1e-3f64..1e4, k in 1.001f64..10.0) {
        let s = ranging_crlb_std_seconds(beta, snr).unwrap();
        prop_assert!(ranging_crlb_std_seconds(beta * k, snr).unwrap() < s);
        prop_assert!(ranging_crlb_std_seconds(beta, snr * k).unwrap() < s);
    }

    #[test]
    fn transmission_loss_monotone(
        c in 0.001f64..0.1, d in 0.1f64..1.5, a in 1.5f64..8.0,
        t in 0.01f64..0.5, f in 0.5e9f64..40e9, k in 1.01f64..2.0,
    ) {
        let m = Material { a, b: 0.0, c, d };
        let loss = |t: f64, f: f64| transmission_loss_db(&SlabSpec::single("s", m, t), f);
        let base = loss(t, f);
        prop_assert!(base > 0.0 && base.is_finite());
        prop_assert!(loss(t * k, f) > base);
        prop_assert!(loss(t, f * k) > base);
    }

    #[test]
    fn diffraction_never_shorter_than_direct(tx in point(30.0), rx in point(30.0), w in 0.2f64..3.0) {
        let edge = WindowEdge::canonical(-3.0, 4.0, 0.5, w).unwrap();
        let exact = diffraction_point(&tx, &rx, &edge).unwrap();
        prop_assert!(exact.path_length >= euclidean_distance(&tx, &rx) * (1.0 - 1e-12));
        prop_assert!((0.0..=1.0).contains(&exact.lambda));
        let approx = approx_diffraction_path_length(&tx, &rx, &edge, w).unwrap();
        prop_assert!(approx >= euclidean_distance(&tx, &rx) * (1.0 - 1e-12));
    }

    #[test]
    fn p_fap_partitions_hundred(groups in prop::collection::vec(prop::collection::vec(0usize..4, 0..30), 1..5)) {
        let per_anchor: Vec<Vec<MpcGroup>> =
            groups.iter().map(|g| g.iter().map(|&i| MpcGroup::ALL[i]).collect()).collect();
        let total: usize = per_anchor.iter().map(Vec::len).sum();
        match p_fap_stats(&per_anchor) {
            Ok(p) => {
                prop_assert!((p.iter().sum::<f64>() - 100.0).abs() < 0.01);
                for g in MpcGroup::ALL {
                    let n = per_anchor.iter().flatten().filter(|&&x| x == g).count();
                    prop_assert!((p[g.index()] - 100.0 * n as f64 / total as f64).abs() < 1e-12);
                }
            }
            Err(_) => prop_assert_eq!(total, 0),
        }
    }
}

fn diffraction_set(truth: &Point3) -> MeasurementSet {
    let edges = [
        ([0.0, 0.0, 8.5], [10.0, 0.0, 8.5], EdgeKind::Top),
        ([20.0, 0.0, 6.5], [20.0, 12.0, 6.5], EdgeKind::Bottom),
        ([20.0, 12.0, 8.5], [0.0, 12.0, 8.5], EdgeKind::Top),
        ([0.0, 12.0, 6.5], [0.0, 0.0, 6.5], EdgeKind::Bottom),
    ];
    let anchors = [[5.0, -15.0, 3.0], [35.0, 6.0, 4.5], [8.0, 28.0, 3.8], [-16.0, 4.0, 5.2]];
    MeasurementSet::new(
        edges
            .iter()
            .zip(anchors)
            .enumerate()
            .map(|(i, ((s, e, kind), a))| {
                let edge = WindowEdge::from_world(&Point3::from(*s), &Point3::from(*e), 2.0, *kind).unwrap();
                let mut am = AnchorMeasurement {
                    anchor_id: i,
                    position: Point3::from(a),
                    range: 0.0,
                    sigma: 0.05 * (i + 1) as f64,
                    model: RangeModel::diffraction(edge),
                };
                am.range = am.predict(truth).unwrap();
                am
            })
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauss_newton_fixed_point(x in 2.0f64..8.0, y in 2.0f64..10.0) {
        let truth = Point3::new(x, y, 7.5);
        let meas = diffraction_set(&truth);
        let est = dnls_solve(&meas, &truth, &DnlsOptions::default()).unwrap();
        prop_assert!(est.converged);
        prop_assert!((est.alpha_hat - truth).norm() < 1e-9);
    }

    #[test]
    fn fim_invariant_to_relabeling_and_rotation(
        x in 2.0f64..8.0, y in 2.0f64..10.0, angle in 0.0f64..std::f64::consts::TAU,
        tx in -20.0f64..20.0, ty in -20.0f64..20.0, tz in -5.0f64..5.0,
    ) {
        let truth = Point3::new(x, y, 7.5);
        let meas = diffraction_set(&truth);
        let base = fisher_information(&truth, &meas).unwrap();

        let mut relabeled = meas.clone();
        relabeled.anchors.reverse();
        let r = fisher_information(&truth, &relabeled).unwrap();
        prop_assert!((r.fim - base.fim).norm() <= 1e-9 * base.fim.norm());

        // Rigid motion about a vertical axis keeps edges horizontal.
        let motion = Isometry3::from_parts(
            Translation3::new(tx, ty, tz),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle),
        );
        let mut moved = meas.clone();
        for a in &mut moved.anchors {
            a.position = motion.transform_point(&a.position);
            if let RangeModel::Diffraction { edge, .. } = &mut a.model {
                *edge = edge.transformed(&motion);
            }
        }
        let m = fisher_information(&motion.transform_point(&truth), &moved).unwrap();
        prop_assert!((m.peb - base.peb).abs() <= 1e-9 * base.peb, "{} vs {} cond {}", m.peb, base.peb, base.condition);
    }
}

#[test]
fn synthesized_paths_respect_length_dominance() {
    let scene = Scene::new(build_default_scene()).unwrap();
    for rx in scene.receivers().iter().step_by(7) {
        for (a, anchor) in scene.anchors().iter().enumerate() {
            let direct = euclidean_distance(anchor, &rx.position);
            for path in scene.trace(a, &rx.position) {
                // A segment grazing an edge ties the direct length.
                if path.interactions.iter().all(|i| *i == Interaction::T) {
                    assert_eq!(path.length, direct);
                } else {
                    assert!(path.length >= direct * (1.0 - 1e-12), "{:?}", path.interactions);
                }
            }
        }
    }
}

#[test]
fn default_materials_increase_with_frequency() {
    let table = MaterialTable::default();
    for slab in ["concrete_wall", "drywall"] {
        let s = table.slab(slab).unwrap();
        let mut prev = 0.0;
        for i in 0..=390 {
            let f = 1e9 + i as f64 * 1e8;
            let l = transmission_loss_db(&s, f);
            assert!(l > prev, "{slab} at {f}");
            prev = l;
        }
    }
}
