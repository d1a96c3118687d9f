use proptest::prelude::*;
use reefscan::evaluate::{evaluate_scenes, EvalConfig};
use reefscan::{Detection, ObjectAnnotation, ObjectClass};

fn class_strategy() -> impl Strategy<Value = ObjectClass> {
    (0usize..4).prop_map(|i| ObjectClass::ALL[i])
}

fn annotation_strategy() -> impl Strategy<Value = ObjectAnnotation> {
    (class_strategy(), 0i32..40, 0i32..40, -3.0f64..3.0).prop_map(|(class, x, y, yaw)| ObjectAnnotation {
        class,
        center: [x as f64 * 0.5, y as f64 * 0.5, 0.3],
        yaw,
    })
}

fn detection_strategy() -> impl Strategy<Value = Detection> {
    (class_strategy(), 0i32..40, 0i32..40, 1u32..20).prop_map(|(class, x, y, s)| Detection {
        class,
        center: [x as f64 * 0.5, y as f64 * 0.5, 0.3],
        yaw: 0.0,
        score: s as f64 / 20.0,
    })
}

fn perfect(anns: &[ObjectAnnotation]) -> Vec<Detection> {
    anns.iter()
        .map(|a| Detection {
            class: a.class,
            center: a.center,
            yaw: a.yaw,
            score: 0.9,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ground_truth_as_prediction_scores_one(anns in prop::collection::vec(annotation_strategy(), 1..12)) {
        let report = evaluate_scenes(&[(perfect(&anns), anns)], &EvalConfig::default()).unwrap();
        prop_assert_eq!(report.primary_map(), Some(1.0));
    }

    #[test]
    fn detection_order_does_not_matter(
        dets in prop::collection::vec(detection_strategy(), 0..10),
        anns in prop::collection::vec(annotation_strategy(), 0..8),
        seed in any::<u64>(),
    ) {
        let cfg = EvalConfig::default();
        let a = evaluate_scenes(&[(dets.clone(), anns.clone())], &cfg).unwrap();
        let mut shuffled = dets;
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed.rotate_left(i as u32) % (i as u64 + 1)) as usize);
        }
        let b = evaluate_scenes(&[(shuffled, anns)], &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ap_is_a_probability(
        dets in prop::collection::vec(detection_strategy(), 0..10),
        anns in prop::collection::vec(annotation_strategy(), 0..8),
    ) {
        let report = evaluate_scenes(&[(dets, anns)], &EvalConfig::multi_threshold()).unwrap();
        for r in &report.results {
            for (_, ap) in r.ap.iter() {
                if let Some(ap) = ap {
                    prop_assert!((0.0..=1.0).contains(ap));
                }
            }
        }
    }

    #[test]
    fn a_trailing_false_positive_changes_nothing(anns in prop::collection::vec(annotation_strategy(), 1..8)) {
        let cfg = EvalConfig::default();
        let mut dets = perfect(&anns);
        let base = evaluate_scenes(&[(dets.clone(), anns.clone())], &cfg).unwrap();
        dets.push(Detection { class: anns[0].class, center: [500.0, 500.0, 0.0], yaw: 0.0, score: 0.01 });
        let more = evaluate_scenes(&[(dets, anns)], &cfg).unwrap();
        prop_assert_eq!(base.primary_map(), more.primary_map());
    }

    #[test]
    fn larger_thresholds_never_lose_matches(
        dets in prop::collection::vec(detection_strategy(), 0..10),
        anns in prop::collection::vec(annotation_strategy(), 0..8),
    ) {
        let report = evaluate_scenes(&[(dets, anns)], &EvalConfig::multi_threshold()).unwrap();
        for pair in report.results.windows(2) {
            for class in ObjectClass::ALL {
                prop_assert!(pair[0].true_positives.get(class) <= pair[1].true_positives.get(class));
            }
        }
    }
}

#[test]
fn scenes_are_pooled_per_class() {
    let a = ObjectAnnotation { class: ObjectClass::ReefRing, center: [0.0, 0.0, 0.0], yaw: 0.0 };
    let hit = Detection { class: ObjectClass::ReefRing, center: [0.1, 0.0, 0.0], yaw: 0.0, score: 0.9 };
    let miss = Detection { class: ObjectClass::ReefRing, center: [5.0, 0.0, 0.0], yaw: 0.0, score: 0.95 };
    let report = evaluate_scenes(&[(vec![hit], vec![a]), (vec![miss], vec![a])], &EvalConfig::default()).unwrap();
    // pooled sweep: FP (0.95), TP (0.9) with two ground truths
    let ap = report.results[0].ap.get(ObjectClass::ReefRing).unwrap();
    assert!((ap - 51.0 * 0.5 / 101.0).abs() < 1e-12, "{ap}");
    assert_eq!(report.primary_map(), Some(ap));
}
