//! Proximal steps against brute-force constrained minimization.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sifrec::prox::*;

const TRIALS: usize = 1000;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn random_input(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = rng.random_range(1..=8);
    (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Best point with support restricted to at most `k` coordinates, by
/// enumerating every support.
fn brute_sparse(z: &[f64], k: usize) -> f64 {
    let d = z.len();
    (0u32..1 << d)
        .filter(|s| s.count_ones() as usize <= k)
        .map(|s| {
            let x: Vec<f64> = (0..d).map(|i| if s >> i & 1 == 1 { z[i] } else { 0.0 }).collect();
            dist2(&x, z)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn c1_matches_support_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..TRIALS {
        let z = random_input(&mut rng);
        let p = prox_c1(&z);
        assert!(in_c1(&p));
        assert!((dist2(&p, &z) - brute_sparse(&z, 1)).abs() < 1e-12, "{z:?}");
    }
}

#[test]
fn ck_matches_support_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..TRIALS {
        let z = random_input(&mut rng);
        let k = rng.random_range(1..=z.len());
        let p = prox_ck(&z, k);
        assert!(in_ck(&p, k));
        assert!((dist2(&p, &z) - brute_sparse(&z, k)).abs() < 1e-12, "{z:?} k={k}");
    }
}

#[test]
fn c2_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    for _ in 0..TRIALS {
        let z = random_input(&mut rng);
        let p = prox_c2(&z);
        assert!(in_c2(&p));
        // the objective is separable, so a per-coordinate grid is exhaustive
        for (zi, pi) in z.iter().zip(&p) {
            let best = grid
                .iter()
                .copied()
                .min_by(|a, b| (a - zi).abs().total_cmp(&(b - zi).abs()))
                .unwrap();
            assert!((best - pi).abs() <= 5e-4 + 1e-12, "z={zi} prox={pi} grid={best}");
        }
    }
}

#[test]
fn ball_projection_beats_sampled_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..TRIALS {
        let z = random_input(&mut rng);
        let p = project_unit_ball(z.clone());
        assert!(in_unit_ball(&p));
        let dp = dist2(&p, &z);
        for _ in 0..200 {
            let mut x: Vec<f64> = (0..z.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1.0 {
                x.iter_mut().for_each(|v| *v /= n);
            }
            assert!(dp <= dist2(&x, &z) + 1e-12);
        }
    }
}

#[test]
fn ball_projection_is_identity_inside() {
    assert_eq!(project_unit_ball(vec![0.3, 0.4]), vec![0.3, 0.4]);
    assert_eq!(project_unit_ball(vec![3.0, 4.0]), vec![0.6, 0.8]);
}

fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 1..=8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(TRIALS as u32))]

    #[test]
    fn prox_steps_are_idempotent(z in vec_strategy(), k in 1usize..=8) {
        let k = k.min(z.len());
        let p1 = prox_c1(&z);
        prop_assert_eq!(prox_c1(&p1), p1);
        let p2 = prox_c2(&z);
        prop_assert_eq!(prox_c2(&p2), p2);
        let pk = prox_ck(&z, k);
        prop_assert_eq!(prox_ck(&pk, k), pk);
        let pb = project_unit_ball(z.clone());
        prop_assert_eq!(project_unit_ball(pb.clone()), pb);
    }

    #[test]
    fn c1_support_invariant_under_positive_scaling(z in vec_strategy(), c in 0.01f64..100.0) {
        let scaled: Vec<f64> = z.iter().map(|v| v * c).collect();
        prop_assert_eq!(argmax_abs(&scaled), argmax_abs(&z));
        let p = prox_c1(&z);
        let ps = prox_c1(&scaled);
        for (a, b) in p.iter().zip(&ps) {
            prop_assert_eq!(*a == 0.0, *b == 0.0);
        }
    }

    #[test]
    fn ck_keeps_largest_entries(z in vec_strategy(), k in 1usize..=8) {
        let k = k.min(z.len());
        let p = prox_ck(&z, k);
        let kept_min = p.iter().zip(&z).filter(|(a, _)| **a != 0.0).map(|(_, v)| v.abs()).fold(f64::INFINITY, f64::min);
        let dropped_max = p.iter().zip(&z).filter(|(a, _)| **a == 0.0).map(|(_, v)| v.abs()).fold(0.0, f64::max);
        prop_assert!(in_ck(&p, k));
        prop_assert!(kept_min >= dropped_max || kept_min == f64::INFINITY);
    }
}
