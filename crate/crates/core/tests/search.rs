//! Behaviour of the search loops on small synthetic data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use sifrec::data::{split, Dims, RatingDataset};
use sifrec::model::Architecture;
use sifrec::ops::{Interaction, OpKind};
use sifrec::prox::in_unit_ball;
use sifrec::search::{
    extract_architecture, random_search, sample_architecture, sif_search, sif_search_topk, RetrainConfig,
    SearchConfig, Sparsity,
};
use sifrec::synth::{generate, SynthConfig};
use sifrec::train::{train_fixed, TrainConfig};

fn data(op: OpKind, seed: u64) -> RatingDataset {
    let (ds, _) = generate(&SynthConfig::matrix(op, 120, 80, 3, 0.25, 0.1, seed)).unwrap();
    split(&ds, (0.5, 0.25, 0.25), seed).unwrap()
}

fn config(seed: u64) -> SearchConfig {
    SearchConfig {
        train: TrainConfig {
            dim: 3,
            seed,
            batch_size: 64,
            ..Default::default()
        },
        search_epochs: 4,
        retrain: RetrainConfig {
            lambda_grid: vec![0.0, 1e-4],
            max_epochs: 4,
            patience: 2,
            relearn_transforms: false,
        },
        ..Default::default()
    }
}

fn without_timing(mut v: Value) -> Value {
    fn strip(v: &mut Value) {
        match v {
            Value::Object(m) => {
                m.retain(|k, _| !k.contains("seconds"));
                m.values_mut().for_each(strip);
            }
            Value::Array(a) => a.iter_mut().for_each(strip),
            _ => {}
        }
    }
    strip(&mut v);
    v
}

#[test]
fn single_candidate_is_always_selected() {
    let ds = data(OpKind::Inner, 1);
    let cfg = SearchConfig {
        candidates: vec![OpKind::Inner.into()],
        ..config(1)
    };
    let r = sif_search(&ds, &cfg).unwrap();
    assert_eq!(r.selected, vec![Interaction::from(OpKind::Inner)]);
    assert!(r.retrain.unwrap().test.rmse.is_finite());
}

#[test]
fn alpha_and_transforms_stay_feasible() {
    let ds = data(OpKind::Plus, 2);
    let r = sif_search(&ds, &SearchConfig { skip_retrain: true, ..config(2) }).unwrap();
    assert_eq!(r.alpha_history.len(), 4);
    for a in &r.alpha_history {
        assert!(a.iter().all(|x| (0.0..=1.0).contains(x)));
    }
    for t in r.transforms.iter().flatten() {
        assert!(in_unit_ball(t.params()));
    }
    assert_eq!(r.selected.len(), 1);
    assert_eq!(r.selected, extract_architecture(&r.architecture, Sparsity::One).ops);
    assert!(r.search_history.iter().all(|m| m.search_objective.is_some_and(f64::is_finite)));
}

#[test]
fn top_one_matches_plain_search() {
    let ds = data(OpKind::Multiply, 3);
    let cfg = config(3);
    let a = serde_json::to_value(sif_search(&ds, &cfg).unwrap()).unwrap();
    let b = serde_json::to_value(sif_search_topk(&ds, 1, &cfg).unwrap()).unwrap();
    assert_eq!(without_timing(a), without_timing(b));
}

#[test]
fn top_d_keeps_every_operation() {
    let ds = data(OpKind::Plus, 4);
    let cfg = SearchConfig {
        skip_retrain: true,
        ..config(4)
    };
    let d = cfg.candidates.len();
    let r = sif_search_topk(&ds, d, &cfg).unwrap();
    assert_eq!(r.selected, cfg.candidates);
    assert_eq!(r.architecture.alpha, r.alpha);
    assert!(sif_search_topk(&ds, d + 1, &cfg).is_err());
    assert!(sif_search_topk(&ds, 0, &cfg).is_err());
}

#[test]
fn frozen_one_hot_search_trains_like_fixed() {
    let ds = data(OpKind::Inner, 5);
    let candidates: Vec<Interaction> = [OpKind::Plus, OpKind::Inner, OpKind::Max].map(Into::into).to_vec();
    let cfg = SearchConfig {
        candidates,
        initial_alpha: Some(vec![0.0, 1.0, 0.0]),
        freeze_arch: true,
        elementwise: false,
        skip_retrain: true,
        ..config(5)
    };
    let r = sif_search(&ds, &cfg).unwrap();
    let fixed_cfg = TrainConfig {
        max_epochs: cfg.search_epochs,
        patience: cfg.search_epochs,
        ..cfg.train.clone()
    };
    let fixed = train_fixed(&ds, &Architecture::single(OpKind::Inner.into()), &fixed_cfg).unwrap();
    assert_eq!(r.search_history.len(), fixed.history.len());
    for (s, f) in r.search_history.iter().zip(&fixed.history) {
        assert_eq!(s.train_rmse.to_bits(), f.train_rmse.to_bits());
        assert_eq!(s.valid_rmse.to_bits(), f.valid_rmse.to_bits());
    }
}

#[test]
fn frozen_search_ignores_validation_values() {
    let ds = data(OpKind::Plus, 6);
    let cfg = SearchConfig {
        freeze_arch: true,
        skip_retrain: true,
        ..config(6)
    };
    let base = sif_search(&ds, &cfg).unwrap();
    // same records and split, validation ratings shifted
    let records = ds
        .records()
        .iter()
        .zip(ds.assignment())
        .map(|(r, s)| {
            let mut r = *r;
            if *s == sifrec::data::Split::Validation {
                r.value += 10.0;
            }
            r
        })
        .collect();
    let shifted = RatingDataset::new(records, ds.dims())
        .unwrap()
        .with_assignment(ds.assignment().to_vec())
        .unwrap();
    let other = sif_search(&shifted, &cfg).unwrap();
    for (a, b) in base.search_history.iter().zip(&other.search_history) {
        assert_eq!(a.train_rmse.to_bits(), b.train_rmse.to_bits());
    }
}

#[test]
fn search_is_deterministic() {
    let ds = data(OpKind::Plus, 7);
    let cfg = config(7);
    let a = serde_json::to_value(sif_search(&ds, &cfg).unwrap()).unwrap();
    let b = serde_json::to_value(sif_search(&ds, &cfg).unwrap()).unwrap();
    assert_eq!(without_timing(a), without_timing(b));
}

#[test]
fn empty_validation_is_an_error() {
    let (ds, _) = generate(&SynthConfig::matrix(OpKind::Plus, 30, 20, 2, 0.5, 0.1, 8)).unwrap();
    let ds = split(&ds, (0.75, 0.0, 0.25), 8).unwrap();
    assert!(sif_search(&ds, &config(8)).is_err());
}

#[test]
fn random_search_budget_one_returns_the_sample() {
    let ds = data(OpKind::Plus, 9);
    let cfg = SearchConfig {
        skip_retrain: true,
        ..config(9)
    };
    let r = random_search(&ds, 1, &cfg).unwrap();
    assert_eq!(r.search_history.len(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(sifrec::model::derive_seed(9, "random-search"));
    let expected = sample_architecture(&cfg, 2, &mut rng);
    assert_eq!(r.architecture.ops, expected.ops);
    assert_eq!(r.transforms, expected.transforms);
    assert!(random_search(&ds, 0, &cfg).is_err());
}

#[test]
fn random_search_repeats_for_a_seed() {
    let ds = data(OpKind::Plus, 10);
    let cfg = SearchConfig {
        skip_retrain: true,
        ..config(10)
    };
    let a = random_search(&ds, 3, &cfg).unwrap();
    let b = random_search(&ds, 3, &cfg).unwrap();
    assert_eq!(a.selected, b.selected);
    assert_eq!(a.transforms, b.transforms);
    // sampled transforms are used as drawn, within [-3, 3]
    for t in a.transforms.iter().flatten() {
        assert!(t.params().iter().all(|x| x.abs() <= 3.0));
    }
}

#[test]
fn tensor_search_covers_all_composites() {
    let base = OpKind::COMPOSABLE;
    let candidates = SearchConfig::tensor_candidates(&base).unwrap();
    assert_eq!(candidates.len(), base.len() * base.len());
    let op: Interaction = "max_multiply".parse().unwrap();
    let (ds, _) = generate(&SynthConfig {
        op,
        dims: Dims::tensor(20, 15, 3),
        dim: 2,
        nnz: 400,
        noise: 0.1,
        seed: 11,
    })
    .unwrap();
    let ds = split(&ds, (0.5, 0.25, 0.25), 11).unwrap();
    let cfg = SearchConfig {
        candidates: candidates.clone(),
        train: TrainConfig {
            dim: 2,
            seed: 11,
            ..Default::default()
        },
        ..config(11)
    };
    let r = sif_search(&ds, &cfg).unwrap();
    assert_eq!(r.alpha.len(), 16);
    assert!(candidates.contains(&r.selected[0]));
    assert_eq!(r.transforms.len(), 3);
}

#[test]
fn pairwise_candidates_rejected_on_tensor_data() {
    let (ds, _) = generate(&SynthConfig {
        op: "plus_plus".parse().unwrap(),
        dims: Dims::tensor(5, 5, 2),
        dim: 2,
        nnz: 30,
        noise: 0.0,
        seed: 1,
    })
    .unwrap();
    let ds = split(&ds, (0.5, 0.25, 0.25), 1).unwrap();
    assert!(sif_search(&ds, &config(1)).is_err());
}
