//! Analytic gradients against central finite differences.

mod common;

use common::{fd_check, rel_err};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sifrec::data::{Batch, Dims, RatingDataset, RatingRecord, Split};
use sifrec::model::{Architecture, Evaluator, ModelGrads, ModelParams, PredictorMode};
use sifrec::ops::{apply, apply_adjoint, apply_tensor, apply_tensor_adjoint, enumerate_tensor_ops, Interaction, OpKind};
use sifrec::transform::{transform, transform_grad, Activation, TransformWeights};

const TOL: f64 = 1e-6;

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

#[test]
fn op_adjoints_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for op in OpKind::ALL {
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let k = rng.random_range(1..=8);
            let a = rand_vec(&mut rng, k);
            let b = rand_vec(&mut rng, k);
            let up = rand_vec(&mut rng, op.output_dim(k));
            let (ga, gb) = apply_adjoint(op, &a, &b, &up).unwrap();
            let f = |a: &[f64], b: &[f64]| -> f64 {
                apply(op, a, b).unwrap().iter().zip(&up).map(|(x, u)| x * u).sum()
            };
            let na = fd_check(&a, |x| f(x, &b));
            let nb = fd_check(&b, |x| f(&a, x));
            worst = worst.max(rel_err(&ga, &na)).max(rel_err(&gb, &nb));
        }
        assert!(worst < TOL, "{op}: relative error {worst:e}");
    }
}

#[test]
fn tensor_adjoints_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for t in enumerate_tensor_ops(&OpKind::COMPOSABLE).unwrap() {
        for _ in 0..100 {
            let k = rng.random_range(1..=8);
            let (u, v, s) = (rand_vec(&mut rng, k), rand_vec(&mut rng, k), rand_vec(&mut rng, k));
            let up = rand_vec(&mut rng, k);
            let [gu, gv, gs] = apply_tensor_adjoint(t, &u, &v, &s, &up).unwrap();
            let f = |u: &[f64], v: &[f64], s: &[f64]| -> f64 {
                apply_tensor(t, u, v, s).unwrap().iter().zip(&up).map(|(x, y)| x * y).sum()
            };
            assert!(rel_err(&gu, &fd_check(&u, |x| f(x, &v, &s))) < TOL, "{t} du");
            assert!(rel_err(&gv, &fd_check(&v, |x| f(&u, x, &s))) < TOL, "{t} dv");
            assert!(rel_err(&gs, &fd_check(&s, |x| f(&u, &v, x))) < TOL, "{t} ds");
        }
    }
}

#[test]
fn transform_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for act in Activation::ALL {
        for _ in 0..100 {
            let h = [1, 5, 10][rng.random_range(0..3)];
            let w = TransformWeights::uniform(h, act, 1.0, &mut rng);
            let x = rng.random_range(-3.0..3.0);
            let (dx, dw) = transform_grad(x, &w);
            let nx = fd_check(&[x], |v| transform(v[0], &w))[0];
            assert!(rel_err(&[dx], &[nx]) < TOL, "{act} dg/dx");
            let nw = fd_check(w.params(), |p| {
                let t = TransformWeights::from_flat(h, act, p.to_vec()).unwrap();
                transform(x, &t)
            });
            assert!(rel_err(dw.params(), &nw) < TOL, "{act} dg/dw");
        }
    }
}

struct Instance {
    ds: RatingDataset,
    params: ModelParams,
    arch: Architecture,
    batch: Batch,
}

fn instance(rng: &mut ChaCha8Rng, order: usize, mode: PredictorMode, elementwise: bool) -> Instance {
    let k = rng.random_range(1..=8);
    let dims = if order == 2 { Dims::matrix(4, 5) } else { Dims::tensor(4, 5, 3) };
    let records: Vec<RatingRecord> = (0..6)
        .map(|_| {
            let v = rng.random_range(1.0..5.0);
            if order == 2 {
                RatingRecord::matrix(rng.random_range(0..4), rng.random_range(0..5), v)
            } else {
                RatingRecord::tensor(rng.random_range(0..4), rng.random_range(0..5), rng.random_range(0..3), v)
            }
        })
        .collect();
    let ds = RatingDataset::new(records, dims).unwrap();
    let ops: Vec<Interaction> = if order == 2 {
        OpKind::ALL.iter().map(|&o| o.into()).collect()
    } else {
        enumerate_tensor_ops(&[OpKind::Max, OpKind::Multiply, OpKind::Plus])
            .unwrap()
            .into_iter()
            .map(Interaction::Triple)
            .collect()
    };
    let params = ModelParams::init(dims, k, &ops, mode, 0.8, rng.random());
    let alpha = (0..ops.len()).map(|_| rng.random_range(0.0..1.0)).collect();
    let transforms = (0..order)
        .map(|_| elementwise.then(|| TransformWeights::uniform(5, Activation::Sigmoid, 0.8, &mut *rng)))
        .collect();
    Instance {
        ds,
        params,
        arch: Architecture {
            ops,
            alpha,
            transforms,
        },
        batch: Batch {
            split: Split::Train,
            indices: (0..6).collect(),
        },
    }
}

fn model_loss(inst: &Instance, params: &ModelParams, lambda: f64) -> f64 {
    let mut g = ModelGrads::zeros_like(params);
    Evaluator::new(params, &inst.arch).loss_and_grads(params, &inst.arch, &inst.ds, &inst.batch, lambda, &mut g)
}

fn check_model_grads(inst: &Instance, lambda: f64) -> f64 {
    let mut grads = ModelGrads::zeros_like(&inst.params);
    Evaluator::new(&inst.params, &inst.arch).loss_and_grads(
        &inst.params,
        &inst.arch,
        &inst.ds,
        &inst.batch,
        lambda,
        &mut grads,
    );
    let mut worst: f64 = 0.0;
    for m in 0..inst.params.tables.len() {
        let n = fd_check(&inst.params.tables[m].data, |x| {
            let mut p = inst.params.clone();
            p.tables[m].data.copy_from_slice(x);
            model_loss(inst, &p, lambda)
        });
        worst = worst.max(rel_err(&grads.tables[m].data, &n));
    }
    for h in 0..inst.params.heads.len() {
        let n = fd_check(&inst.params.heads[h].params, |x| {
            let mut p = inst.params.clone();
            p.heads[h].params.copy_from_slice(x);
            model_loss(inst, &p, lambda)
        });
        worst = worst.max(rel_err(&grads.heads[h], &n));
    }
    worst
}

#[test]
fn training_loss_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let order = if trial % 4 == 3 { 3 } else { 2 };
        let mode = if trial % 5 == 4 { PredictorMode::Mlp } else { PredictorMode::Linear };
        let inst = instance(&mut rng, order, mode, trial % 2 == 0);
        let lambda = if trial % 3 == 0 { 0.0 } else { 0.1 };
        worst = worst.max(check_model_grads(&inst, lambda));
    }
    assert!(worst < 1e-5, "relative error {worst:e}");
}

#[test]
fn architecture_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let order = if trial % 4 == 3 { 3 } else { 2 };
        let inst = instance(&mut rng, order, PredictorMode::Linear, true);
        let h = |arch: &Architecture| -> f64 {
            Evaluator::new(&inst.params, arch)
                .arch_loss_and_grads(&inst.params, arch, &inst.ds, &inst.batch)
                .0
        };
        let (_, grads) = Evaluator::new(&inst.params, &inst.arch).arch_loss_and_grads(
            &inst.params,
            &inst.arch,
            &inst.ds,
            &inst.batch,
        );
        let n_alpha = fd_check(&inst.arch.alpha, |a| {
            let mut arch = inst.arch.clone();
            arch.alpha.copy_from_slice(a);
            h(&arch)
        });
        worst = worst.max(rel_err(&grads.alpha, &n_alpha));
        for m in 0..order {
            let t = inst.arch.transforms[m].as_ref().unwrap();
            let n = fd_check(t.params(), |p| {
                let mut arch = inst.arch.clone();
                arch.transforms[m].as_mut().unwrap().params_mut().copy_from_slice(p);
                h(&arch)
            });
            worst = worst.max(rel_err(grads.transforms[m].as_ref().unwrap(), &n));
        }
    }
    assert!(worst < 1e-5, "relative error {worst:e}");
}
