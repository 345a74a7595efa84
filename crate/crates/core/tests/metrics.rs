use endosight_core::imaging::{BinaryMask, NormalizedBox};
use endosight_core::inference::Detection;
use endosight_core::metrics::*;
use proptest::prelude::*;

fn mask_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (1u32..24, 1u32..24).prop_flat_map(|(w, h)| {
        let n = (w * h) as usize;
        (
            proptest::collection::vec(0u8..2, n),
            proptest::collection::vec(0u8..2, n),
        )
            .prop_map(move |(a, b)| (BinaryMask::new(w, h, a).unwrap(), BinaryMask::new(w, h, b).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn overlap_metrics_are_bounded_and_symmetric((p, g) in mask_pair()) {
        let (d, j) = (dice(&p, &g).unwrap(), jaccard(&p, &g).unwrap());
        prop_assert!((0.0..=1.0).contains(&d) && (0.0..=1.0).contains(&j));
        prop_assert!(j <= d + 1e-15);
        prop_assert_eq!(d, dice(&g, &p).unwrap());
        prop_assert_eq!(j, jaccard(&g, &p).unwrap());
        prop_assert_eq!(dice(&p, &p).unwrap(), 1.0);

        let c = confusion_counts(&p, &g).unwrap();
        prop_assert_eq!(c.total(), u64::from(p.width() * p.height()));
        let sw = confusion_counts(&g, &p).unwrap();
        prop_assert_eq!(pixel_accuracy(&c), pixel_accuracy(&sw));
    }

    #[test]
    fn ap_is_bounded_and_perfect_when_all_hit(n_gt in 1usize..6, n_fp in 0usize..5) {
        let gts: Vec<NormalizedBox> = (0..n_gt)
            .map(|i| NormalizedBox::new(0.1 + 0.15 * i as f64, 0.5, 0.1, 0.1).unwrap())
            .collect();
        let mut preds: Vec<Detection> = gts
            .iter()
            .enumerate()
            .map(|(i, b)| Detection { r#box: *b, confidence: 0.9 - 0.01 * i as f64, class_id: 0 })
            .collect();
        let perfect = average_precision(&match_detections(&preds, &gts, 0.5)).unwrap();
        prop_assert_eq!(perfect, 1.0);

        // false positives ranked below every hit leave AP untouched, above it they cost
        for k in 0..n_fp {
            preds.push(Detection {
                r#box: NormalizedBox::new(0.5, 0.1 + 0.02 * k as f64, 0.01, 0.01).unwrap(),
                confidence: 0.1,
                class_id: 0,
            });
        }
        prop_assert_eq!(average_precision(&match_detections(&preds, &gts, 0.5)).unwrap(), 1.0);
        if n_fp > 0 {
            preds.last_mut().unwrap().confidence = 0.99;
            let ap = average_precision(&match_detections(&preds, &gts, 0.5)).unwrap();
            prop_assert!(ap < 1.0 && ap > 0.0);
        }
    }
}

#[test]
fn map_skips_images_without_ground_truth() {
    let g = NormalizedBox::new(0.5, 0.5, 0.2, 0.2).unwrap();
    let hit = Detection { r#box: g, confidence: 0.8, class_id: 0 };
    let with_gt = match_detections(&[hit], &[g], 0.5);
    let empty = match_detections(&[hit], &[], 0.5);
    assert_eq!(average_precision(&empty), None);
    assert_eq!(map_at_50(&[with_gt.clone(), empty]).unwrap(), 1.0);
    assert!(map_at_50(&[match_detections(&[], &[], 0.5)]).is_err());
}

#[test]
fn precision_and_recall_conventions() {
    let g = NormalizedBox::new(0.5, 0.5, 0.2, 0.2).unwrap();
    let none = match_detections(&[], &[g], 0.5);
    assert_eq!((none.precision(), none.recall()), (0.0, 0.0));
    let nothing = match_detections(&[], &[], 0.5);
    assert_eq!((nothing.precision(), nothing.recall()), (1.0, 1.0));
}
