use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use storyqa::autograd::Tensor;
use storyqa::baselines::similarity_scores;
use storyqa::model::{Checkpoint, Mlcm, ModelConfig};
use storyqa::schema::{assign_difficulty, detokenize, difficulty_levels, parse_dataset, to_json, tokenize};
use storyqa::synth::{generate_dataset, split_dataset, WorldSpec};
use storyqa::train::{init_model, prepare, Embeddings, EvalReport};

fn outcomes() -> impl Strategy<Value = Vec<(u8, bool)>> {
    prop::collection::vec((1u8..=4, any::<bool>()), 1..200)
}

proptest! {
    #[test]
    fn outcome_report_matches_direct_count(xs in outcomes()) {
        let r = EvalReport::from_outcomes(xs.iter().copied());
        let hits = xs.iter().filter(|x| x.1).count() as f64;
        prop_assert!((r.overall - 100.0 * hits / xs.len() as f64).abs() < 1e-9);
        let mut present = Vec::new();
        for d in 1..=4u8 {
            let of: Vec<_> = xs.iter().filter(|x| x.0 == d).collect();
            prop_assert_eq!(r.counts[usize::from(d) - 1], of.len());
            match r.accuracy[usize::from(d) - 1] {
                None => prop_assert!(of.is_empty()),
                Some(a) => {
                    let want = 100.0 * of.iter().filter(|x| x.1).count() as f64 / of.len() as f64;
                    prop_assert!((a - want).abs() < 1e-9);
                    present.push(want);
                }
            }
        }
        let avg = present.iter().sum::<f64>() / present.len() as f64;
        prop_assert!((r.diff_avg.unwrap() - avg).abs() < 1e-9);
    }

    #[test]
    fn overall_lies_between_level_accuracies(
        acc in prop::array::uniform4(0.0f64..100.0),
        counts in prop::array::uniform4(0usize..3000),
    ) {
        prop_assume!(counts.iter().sum::<usize>() > 0);
        let r = EvalReport::from_accuracies(acc, counts);
        let live: Vec<f64> = (0..4).filter(|&d| counts[d] > 0).map(|d| acc[d]).collect();
        let lo = live.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = live.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r.overall >= lo - 1e-9 && r.overall <= hi + 1e-9);
    }

    #[test]
    fn similarity_scores_follow_candidate_order(
        q in prop::collection::vec(0usize..12, 1..6),
        cands in prop::collection::vec(prop::collection::vec(0usize..12, 1..6), 5),
        rot in 0usize..5,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..12 * 4).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let vectors = Tensor::from_vec(12, 4, data);
        let refs: Vec<&[usize]> = cands.iter().map(|c| c.as_slice()).collect();
        let mut rotated = refs.clone();
        rotated.rotate_left(rot);
        let a = similarity_scores(&q, &refs, &vectors);
        let b = similarity_scores(&q, &rotated, &vectors);
        for i in 0..5 {
            prop_assert_eq!(a[(i + rot) % 5], b[i]);
        }
    }

    #[test]
    fn difficulty_levels_invert_assignment(mc in 1u8..=2, lc in 1u8..=4) {
        if let Ok(d) = assign_difficulty(mc, lc) {
            let (m, l) = difficulty_levels(d).unwrap();
            prop_assert_eq!(assign_difficulty(m, l).unwrap(), d);
        }
    }

    #[test]
    fn tokens_survive_detokenize(words in prop::collection::vec("[a-z]{1,6}", 1..8)) {
        let text = format!("{}.", words.join(" "));
        let toks = tokenize(&text);
        prop_assert_eq!(tokenize(&detokenize(&toks)), toks);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn datasets_round_trip_through_json(seed in any::<u64>(), scenes in 2usize..6) {
        let spec = WorldSpec { seed, n_scenes: scenes, ..WorldSpec::default() };
        let (_, ds) = generate_dataset(&spec).unwrap();
        prop_assert_eq!(parse_dataset(&to_json(&ds)).unwrap(), ds);
    }
}

#[test]
fn checkpoints_round_trip_with_identical_scores() {
    let cfg = ModelConfig::tiny();
    let spec = WorldSpec {
        seed: 9,
        n_scenes: 6,
        feature_dim: cfg.d_v,
        ..WorldSpec::default()
    };
    let (_, ds) = generate_dataset(&spec).unwrap();
    let splits = split_dataset(&ds, (0.6, 0.2, 0.2), 9).unwrap();
    let prepared = prepare(&splits, &ds.roster(), &cfg, &Embeddings::Random, 9).unwrap();
    let m = init_model(&prepared, &cfg, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    m.to_checkpoint().save(&path).unwrap();
    let back = Mlcm::from_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
    assert_eq!(back, m);
    for i in 0..prepared.train.len() {
        assert_eq!(back.score(prepared.train.batch(i)), m.score(prepared.train.batch(i)));
    }
}
