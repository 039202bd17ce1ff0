use proptest::prelude::*;

use cuneiform::dataset::{build_samples, encode_packed, split_dataset, DatasetConfig, Sample, SplitSpec};
use cuneiform::lexicon::relative_accuracy;
use cuneiform::nn::{forward, randomize, train, ModelConfig, ModelParams, TrainConfig};
use cuneiform::segmentation::{normalize_glyph, segment_page, SegmentationParams};
use cuneiform::synth::{stamp_page, synthetic_signs, StampLayout};

fn toy_samples(side: usize, per_class: usize) -> Vec<Sample> {
    let signs = synthetic_signs(3, 11);
    let masters: Vec<_> = signs.iter().map(|s| normalize_glyph(s, side, 0.08)).collect();
    let cfg = DatasetConfig {
        variants_per_class: per_class,
        augmentations_per_variant: 1,
        ..DatasetConfig::default()
    };
    build_samples(&masters, &cfg).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn softmax_rows_are_distributions(seed in any::<u64>(), classes in 2usize..6, n in 1usize..5) {
        let config = ModelConfig::new_default(8, classes, seed);
        let (params, batch, _) = randomize(&config, n, seed ^ 1).unwrap();
        let (probs, _) = forward(&config, &params, &batch).unwrap();
        for row in probs.data().chunks(classes) {
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-5);
            prop_assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn relative_accuracy_bounds_and_monotonicity(
        truth in proptest::collection::vec(0u8..4, 1..30),
        subs in proptest::collection::vec(any::<prop::sample::Index>(), 0..10),
        extra in 0usize..4,
    ) {
        let t: Vec<String> = truth.iter().map(|v| v.to_string()).collect();
        prop_assert_eq!(relative_accuracy(&t, &t).unwrap(), 1.0);
        let mut p = t.clone();
        let mut last = 1.0;
        for idx in subs {
            p[idx.index(t.len())] = "x".into();
            let acc = relative_accuracy(&p, &t).unwrap();
            prop_assert!((0.0..=1.0).contains(&acc));
            prop_assert!(acc <= last);
            prop_assert_eq!(acc == 1.0, p == t);
            last = acc;
        }
        p.extend(std::iter::repeat("y".to_string()).take(extra));
        let acc = relative_accuracy(&p, &t).unwrap();
        prop_assert_eq!(acc == 1.0, p == t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// k stamped signs with at least 3 px between neighbours give k boxes
    /// in the stamped order.
    #[test]
    fn stamped_pages_give_one_box_per_sign(seed in any::<u64>(), per_line in 1usize..7, lines in 1usize..4, gap in 3usize..12) {
        let signs = synthetic_signs(per_line * lines, seed);
        let rows: Vec<Vec<_>> = signs.chunks(per_line).map(|c| c.iter().collect()).collect();
        let layout = StampLayout { gap_x: gap, gap_y: gap, ..StampLayout::default() };
        let page = stamp_page(&rows, layout).unwrap();
        let params = SegmentationParams::default();
        let (seg, glyphs) = segment_page(&page.image, &params).unwrap();
        prop_assert_eq!(seg.boxes.len(), per_line * lines);
        prop_assert_eq!(glyphs.len(), seg.boxes.len());
        prop_assert!(glyphs.iter().all(|g| g.side() == params.glyph_size));
        let expected: Vec<_> = page.boxes.iter().flatten().copied().collect();
        let got: Vec<_> = seg.boxes.iter().map(|b| b.bbox).collect();
        prop_assert_eq!(got, expected);
        let (again, _) = segment_page(&page.image, &params).unwrap();
        prop_assert_eq!(again, seg);
    }
}

#[test]
fn dataset_generation_is_pure_and_binary() {
    let a = toy_samples(20, 4);
    let b = toy_samples(20, 4);
    assert_eq!(a, b);
    assert_eq!(a.len(), 3 * 4 * 2);
    assert!(a
        .iter()
        .all(|s| s.image.side() == 20 && s.image.data().len() == 400));
    let spec = SplitSpec::default();
    let (sa, sb) = (
        split_dataset(&a, &spec).unwrap(),
        split_dataset(&b, &spec).unwrap(),
    );
    assert_eq!(encode_packed(&sa, 20).unwrap(), encode_packed(&sb, 20).unwrap());
}

/// Early stopping tail, checkpoint correctness, determinism and learning on
/// a small learnable set.
#[test]
fn training_invariants() {
    let samples = toy_samples(16, 6);
    let split = split_dataset(&samples, &SplitSpec::default()).unwrap();
    let names: Vec<String> = (0..3).map(|i| format!("c{i}")).collect();
    for (patience, max_epochs) in [(1, 30), (2, 30), (5, 6)] {
        let mut config = ModelConfig::new_default(16, 3, 21);
        config.class_names = names.clone();
        let tcfg = TrainConfig {
            patience,
            max_epochs,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let p0 = ModelParams::init(&config).unwrap();
        let (params, log) = train(&config, p0.clone(), &split.train, &split.val, &tcfg).unwrap();
        let (params2, log2) = train(&config, p0, &split.train, &split.val, &tcfg).unwrap();
        assert_eq!(log.trajectory(), log2.trajectory());
        assert_eq!(params, params2);

        let recs = &log.records;
        assert!(recs.len() <= max_epochs);
        let best = log.best().unwrap();
        let min = recs.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(best.val_loss, min);
        if recs.len() < max_epochs {
            for r in &recs[recs.len() - patience..] {
                assert!(r.val_loss >= best.val_loss - 1e-6);
            }
        }
        let (val_loss, _, _) = cuneiform::nn::evaluate(&config, &params, &split.val).unwrap();
        assert_eq!(val_loss, best.val_loss);
        assert!(best.train_loss < recs[0].train_loss);
    }
}
