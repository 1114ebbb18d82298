//! Operation-level checks for the differentiation engine against
//! independent oracles: central differences, dense adjacency products and
//! naive loops.

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use lpdgcn::tensor::{finite_difference_check, BatchNormState, Mode, Tape, Var};
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0))
}

/// Scalar read-out `sum(w ⊙ x)` with fixed random weights whose magnitudes
/// lie in [0.5, 1.5]. Keeping the weights away from zero keeps the
/// gradient reaching `x` well above central-difference round-off.
fn probe(t: &mut Tape<f64>, x: Var, seed: u64) -> Var {
    let (r, c) = t.shape(x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let mut acc: Option<Var> = None;
    for j in 0..c {
        let w = Array2::from_shape_simple_fn((r, 1), || {
            let m = rng.random_range(0.5..1.5);
            if rng.random_bool(0.5) { m } else { -m }
        });
        let w = t.constant(w);
        let xj = t.select_col(x, j).unwrap();
        let term = t.mul_column(xj, w).unwrap();
        acc = Some(match acc {
            None => term,
            Some(a) => t.add(a, term).unwrap(),
        });
    }
    t.sum_all(acc.unwrap())
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn linear_identity_input() {
    let mut t = Tape::new();
    let x = t.constant(Array2::eye(2));
    let w = t.param(array![[1.0, 2.0], [3.0, 4.0]]);
    let b = t.param(Array2::zeros((1, 2)));
    let y = t.linear(x, w, b).unwrap();
    assert_eq!(t.value(y), &array![[1.0, 2.0], [3.0, 4.0]]);
}

#[test]
fn linear_bias_gradient_counts_rows() {
    let mut t = Tape::new();
    let x = t.constant(Array2::from_elem((5, 3), 0.3));
    let w = t.param(Array2::from_elem((3, 2), 0.1));
    let b = t.param(Array2::zeros((1, 2)));
    let y = t.linear(x, w, b).unwrap();
    let l = t.sum_all(y);
    let g = t.backward(l).unwrap();
    assert_eq!(g.get(b).unwrap(), &array![[5.0, 5.0]]);
}

#[test]
fn linear_shape_mismatch() {
    let mut t = Tape::<f64>::new();
    let x = t.constant(Array2::zeros((2, 3)));
    let w = t.param(Array2::zeros((2, 2)));
    let b = t.param(Array2::zeros((1, 2)));
    assert!(t.linear(x, w, b).is_err());
}

#[test]
fn linear_gradcheck_3x4() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = [random(&mut rng, 3, 4), random(&mut rng, 4, 2), random(&mut rng, 1, 2)];
    let r = finite_difference_check(&params, 1e-6, |t, p| {
        let y = t.linear(p[0], p[1], p[2])?;
        Ok(probe(t, y, 1))
    })
    .unwrap();
    assert!(r.max_rel_err <= 1e-6, "{r:?}");
}

#[test]
fn relu_values_and_mask() {
    let mut t = Tape::new();
    let x = t.param(array![[-1.0, 0.0, 2.0]]);
    let y = t.relu(x);
    assert_eq!(t.value(y), &array![[0.0, 0.0, 2.0]]);
    let l = t.sum_all(y);
    let g = t.backward(l).unwrap();
    assert_eq!(g.get(x).unwrap(), &array![[0.0, 0.0, 1.0]]);
}

#[test]
fn relu_linear_gradcheck() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = [random(&mut rng, 4, 3), random(&mut rng, 3, 5), random(&mut rng, 1, 5)];
    let r = finite_difference_check(&params, 1e-6, |t, p| {
        let y = t.linear(p[0], p[1], p[2])?;
        let y = t.relu(y);
        Ok(probe(t, y, 2))
    })
    .unwrap();
    assert!(r.max_rel_err <= 1e-6, "{r:?}");
}

fn dense_adjacency(n: usize, edges: &[(usize, usize)]) -> Array2<f64> {
    let mut a = Array2::zeros((n, n));
    for &(s, d) in edges {
        a[(d, s)] += 1.0;
    }
    a
}

#[test]
fn neighbor_sum_on_path() {
    let edges: Arc<[(usize, usize)]> = vec![(0, 1), (1, 0), (1, 2), (2, 1)].into();
    let mut t = Tape::new();
    let x = t.constant(Array2::<f64>::eye(3));
    let y = t.neighbor_sum(x, &edges).unwrap();
    assert_eq!(t.value(y), &array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]);
}

#[test]
fn neighbor_sum_without_edges_is_zero() {
    let edges: Arc<[(usize, usize)]> = Vec::new().into();
    let mut t = Tape::new();
    let x = t.constant(array![[1.0, 2.0], [3.0, 4.0]]);
    let y = t.neighbor_sum(x, &edges).unwrap();
    assert_eq!(t.value(y), &Array2::<f64>::zeros((2, 2)));
}

#[test]
fn neighbor_sum_rejects_bad_index() {
    let edges: Arc<[(usize, usize)]> = vec![(0, 5)].into();
    let mut t = Tape::new();
    let x = t.constant(Array2::<f64>::zeros((2, 2)));
    assert!(t.neighbor_sum(x, &edges).is_err());
}

#[test]
fn neighbor_sum_matches_dense_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.random_range(1..=6);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(0.4) {
                    edges.push((u, v));
                    edges.push((v, u));
                }
            }
        }
        let x = random(&mut rng, n, 3);
        let expected = dense_adjacency(n, &edges).dot(&x);
        let edges: Arc<[(usize, usize)]> = edges.into();
        let mut t = Tape::new();
        let xv = t.constant(x);
        let y = t.neighbor_sum(xv, &edges).unwrap();
        assert!(max_abs_diff(t.value(y), &expected) <= 1e-12);
    }
}

#[test]
fn neighbor_sum_gradcheck() {
    let edges: Arc<[(usize, usize)]> = vec![(0, 1), (1, 0), (1, 2), (2, 1), (3, 3)].into();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params = [random(&mut rng, 4, 2)];
    let r = finite_difference_check(&params, 1e-6, |t, p| {
        let y = t.neighbor_sum(p[0], &edges)?;
        Ok(probe(t, y, 4))
    })
    .unwrap();
    assert!(r.max_rel_err <= 1e-6, "{r:?}");
}

#[test]
fn segment_sum_examples() {
    let seg: Arc<[usize]> = vec![0, 0, 1].into();
    let mut t = Tape::new();
    let x = t.constant(array![[1.0], [2.0], [3.0]]);
    let y = t.segment_sum(x, &seg, 2).unwrap();
    assert_eq!(t.value(y), &array![[3.0], [3.0]]);
    let y3 = t.segment_sum(x, &seg, 3).unwrap();
    assert_eq!(t.value(y3), &array![[3.0], [3.0], [0.0]]);
    let bad: Arc<[usize]> = vec![0, 0, 4].into();
    assert!(t.segment_sum(x, &bad, 2).is_err());
}

#[test]
fn segment_sum_matches_naive_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(1..20);
        let b = rng.random_range(1..5);
        let seg: Vec<usize> = (0..n).map(|_| rng.random_range(0..b)).collect();
        let x = random(&mut rng, n, 3);
        let mut expected = Array2::zeros((b, 3));
        for i in 0..n {
            for j in 0..3 {
                expected[(seg[i], j)] += x[(i, j)];
            }
        }
        let seg: Arc<[usize]> = seg.into();
        let mut t = Tape::new();
        let xv = t.constant(x);
        let y = t.segment_sum(xv, &seg, b).unwrap();
        assert!(max_abs_diff(t.value(y), &expected) <= 1e-12);
    }
}

#[test]
fn concat_shapes_and_gradcheck() {
    let mut t = Tape::<f64>::new();
    let a = t.constant(Array2::zeros((3, 64)));
    let b = t.constant(Array2::zeros((3, 64)));
    let c = t.concat_cols(a, b).unwrap();
    assert_eq!(t.shape(c), (3, 128));
    let e = t.constant(Array2::zeros((3, 0)));
    let x = t.constant(array![[1.0], [2.0], [3.0]]);
    let same = t.concat_cols(x, e).unwrap();
    assert_eq!(t.value(same), t.value(x));
    let wrong = t.constant(Array2::zeros((2, 1)));
    assert!(t.concat_cols(x, wrong).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params = [random(&mut rng, 3, 2), random(&mut rng, 3, 4)];
    let r = finite_difference_check(&params, 1e-6, |t, p| {
        let y = t.concat_cols(p[0], p[1])?;
        Ok(probe(t, y, 6))
    })
    .unwrap();
    assert!(r.max_rel_err <= 1e-6, "{r:?}");
}

#[test]
fn cross_entropy_uniform_logits() {
    for c in [2usize, 7] {
        let mut t = Tape::<f64>::new();
        let z = t.constant(Array2::zeros((3, c)));
        let targets: Arc<[usize]> = vec![0, 1, c - 1].into();
        let l = t.softmax_cross_entropy(z, &targets).unwrap();
        assert_abs_diff_eq!(t.item(l), 3.0 * (c as f64).ln(), epsilon = 1e-12);
    }
}

#[test]
fn cross_entropy_gradcheck_and_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let targets: Arc<[usize]> = vec![2, 0, 1, 1].into();
    let params = [random(&mut rng, 4, 3).mapv(|v| 3.0 * v)];
    let r = finite_difference_check(&params, 1e-6, |t, p| t.softmax_cross_entropy(p[0], &targets)).unwrap();
    assert!(r.max_rel_err <= 1e-6, "{r:?}");

    let mut t = Tape::<f64>::new();
    let z = t.constant(Array2::zeros((1, 2)));
    let bad: Arc<[usize]> = vec![2].into();
    assert!(t.softmax_cross_entropy(z, &bad).is_err());
}

#[test]
fn cross_entropy_is_stable_for_large_logits() {
    let mut t = Tape::<f32>::new();
    let z = t.constant(array![[1000.0f32, 0.0]]);
    let targets: Arc<[usize]> = vec![0].into();
    let l = t.softmax_cross_entropy(z, &targets).unwrap();
    assert!(t.item(l).is_finite());
    assert!(t.item(l) < 1e-6);
}

#[test]
fn batch_norm_train_normalizes_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random(&mut rng, 16, 3).mapv(|v| 5.0 * v + 2.0);
    let mut state = BatchNormState::new(3, 0.1, 1e-5);
    let mut t = Tape::new();
    let xv = t.constant(x);
    let g = t.param(Array2::ones((1, 3)));
    let b = t.param(Array2::zeros((1, 3)));
    let y = t.batch_norm(xv, g, b, &mut state, Mode::Train).unwrap();
    let y = t.value(y);
    for col in y.columns() {
        assert_abs_diff_eq!(col.mean().unwrap(), 0.0, epsilon = 1e-5);
        assert_abs_diff_eq!(col.var(0.0), 1.0, epsilon = 1e-5);
    }
    assert!(state.running_var.iter().all(|&v| v >= 0.0));
    assert!(state.running_mean.iter().all(|&m| m != 0.0));
}

#[test]
fn batch_norm_eval_with_unit_stats_is_affine() {
    let mut state = BatchNormState::new(2, 0.1, 0.0);
    let mut t = Tape::new();
    let x = t.constant(array![[1.0, -2.0]]);
    let g = t.param(array![[2.0, 3.0]]);
    let b = t.param(array![[0.5, -1.0]]);
    let y = t.batch_norm(x, g, b, &mut state, Mode::Eval).unwrap();
    assert_eq!(t.value(y), &array![[2.5, -7.0]]);
}

#[test]
fn batch_norm_train_needs_two_rows() {
    let mut state = BatchNormState::new(2, 0.1, 1e-5);
    let mut t = Tape::<f64>::new();
    let x = t.constant(Array2::zeros((1, 2)));
    let g = t.param(Array2::ones((1, 2)));
    let b = t.param(Array2::zeros((1, 2)));
    assert!(t.batch_norm(x, g, b, &mut state, Mode::Train).is_err());
}

#[test]
fn batch_norm_train_gradcheck() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = [random(&mut rng, 6, 3), random(&mut rng, 1, 3), random(&mut rng, 1, 3)];
    let r = finite_difference_check(&params, 1e-6, |t, p| {
        let mut state = BatchNormState::new(3, 0.1, 1e-5);
        let y = t.batch_norm(p[0], p[1], p[2], &mut state, Mode::Train)?;
        Ok(probe(t, y, 9))
    })
    .unwrap();
    assert!(r.max_rel_err <= 1e-5, "{r:?}");
}

#[test]
fn dropout_identity_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut t = Tape::<f64>::new();
    let x = t.constant(Array2::ones((4, 4)));
    assert_eq!(t.dropout(x, 0.0, Mode::Train, &mut rng).unwrap(), x);
    assert_eq!(t.dropout(x, 0.9, Mode::Eval, &mut rng).unwrap(), x);
    assert!(t.dropout(x, 1.0, Mode::Train, &mut rng).is_err());
    assert!(t.dropout(x, -0.1, Mode::Eval, &mut rng).is_err());
}

#[test]
fn dropout_keep_rate_and_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut t = Tape::<f64>::new();
    let x = t.constant(Array2::ones((1000, 100)));
    let y = t.dropout(x, 0.5, Mode::Train, &mut rng).unwrap();
    let v = t.value(y);
    let kept = v.iter().filter(|&&e| e != 0.0).count() as f64 / 1e5;
    assert!((kept - 0.5).abs() <= 0.01, "keep rate {kept}");
    let mean = v.mean().unwrap();
    assert!((mean - 1.0).abs() <= 0.02, "mean {mean}");
}

#[test]
fn backward_basics() {
    let mut t = Tape::new();
    let w = t.param(array![[1.0, 2.0], [3.0, 4.0]]);
    let l = t.sum_all(w);
    let g = t.backward(l).unwrap();
    assert_eq!(g.get(w).unwrap(), &Array2::<f64>::ones((2, 2)));
    assert!(t.backward(w).is_err());

    let mut t = Tape::new();
    let w = t.param(array![[1.0, 2.0]]);
    let unused = t.param(array![[5.0]]);
    let s = t.sum_all(w);
    let zero = t.scale(s, 0.0);
    let g = t.backward(zero).unwrap();
    assert_eq!(g.wrt(w, (1, 2)), Array2::<f64>::zeros((1, 2)));
    assert_eq!(g.wrt(unused, (1, 1)), Array2::<f64>::zeros((1, 1)));
}

#[test]
fn attention_primitives_gradcheck() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let idx: Arc<[usize]> = vec![0, 0, 1, 1, 1].into();
    let params = [random(&mut rng, 2, 3), random(&mut rng, 5, 3), random(&mut rng, 1, 1)];
    let r = finite_difference_check(&params, 1e-6, |t, p| {
        let s = t.softplus(p[2]);
        let g = t.scale_by(p[0], s)?;
        let g = t.gather_rows(g, &idx)?;
        let scores = t.row_sum(p[1]);
        let two = t.concat_cols(scores, scores)?;
        let alpha = t.softmax_rows(two);
        let a0 = t.select_col(alpha, 0)?;
        let m = t.mul_column(g, a0)?;
        let z = t.add(m, p[1])?;
        Ok(probe(t, z, 12))
    })
    .unwrap();
    assert!(r.max_rel_err <= 1e-6, "{r:?}");
}

#[test]
fn rmse_examples() {
    let mut t = Tape::new();
    let p = t.param(array![[3.0, 4.0]]);
    let r = t.rmse(p, &array![[0.0, 0.0]]).unwrap();
    assert_eq!(t.item(r), 5.0);
    let same = t.rmse(p, &array![[3.0, 4.0]]).unwrap();
    assert_eq!(t.item(same), 0.0);
    let g = t.backward(same).unwrap();
    assert!(g.get(p).unwrap().iter().all(|v: &f64| v.is_finite()));
}

#[test]
fn backward_is_bit_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut t = Tape::<f64>::new();
        let x = t.constant(random(&mut rng, 7, 4));
        let w = t.param(random(&mut rng, 4, 3));
        let b = t.param(random(&mut rng, 1, 3));
        let y = t.linear(x, w, b).unwrap();
        let y = t.relu(y);
        let targets: Arc<[usize]> = vec![0, 1, 2, 0, 1, 2, 0].into();
        let l = t.softmax_cross_entropy(y, &targets).unwrap();
        let g = t.backward(l).unwrap();
        (g.wrt(w, (4, 3)), g.wrt(b, (1, 3)))
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 100,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed),
        ..ProptestConfig::default()
    })]

    /// Every differentiable op, on random shapes, passes a central-difference
    /// check at double precision.
    #[test]
    fn every_op_passes_gradcheck(seed in any::<u64>(), n in 3usize..8, a in 1usize..5, b in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(0.5) {
                    edges.push((u, v));
                    edges.push((v, u));
                }
            }
        }
        let edges: Arc<[(usize, usize)]> = edges.into();
        let seg: Arc<[usize]> = (0..n).map(|i| usize::from(i >= n / 2)).collect::<Vec<_>>().into();
        let targets: Arc<[usize]> = (0..n).map(|_| rng.random_range(0..b)).collect::<Vec<_>>().into();
        let x = random(&mut rng, n, a);
        let w = random(&mut rng, a, b);
        let bias = random(&mut rng, 1, b);
        let y = random(&mut rng, n, b);
        let gamma = random(&mut rng, 1, a).mapv(|v| v + 1.5);
        let beta = random(&mut rng, 1, a);
        let col = random(&mut rng, n, 1);
        let s = random(&mut rng, 1, 1);
        let target = random(&mut rng, n, a);

        type Case<'c> = (&'static str, Vec<Array2<f64>>, Box<dyn Fn(&mut Tape<f64>, &[Var]) -> lpdgcn::Result<Var> + 'c>);
        let cases: Vec<Case> = vec![
            ("linear", vec![x.clone(), w.clone(), bias.clone()], Box::new(|t, p| t.linear(p[0], p[1], p[2]))),
            ("add", vec![x.clone(), x.mapv(|v| -2.0 * v)], Box::new(|t, p| t.add(p[0], p[1]))),
            ("scale", vec![x.clone()], Box::new(|t, p| Ok(t.scale(p[0], -0.7)))),
            ("scale_by", vec![x.clone(), s.clone()], Box::new(|t, p| t.scale_by(p[0], p[1]))),
            ("relu", vec![x.clone()], Box::new(|t, p| Ok(t.relu(p[0])))),
            ("softplus", vec![x.clone()], Box::new(|t, p| Ok(t.softplus(p[0])))),
            ("neighbor_sum", vec![x.clone()], Box::new(|t, p| t.neighbor_sum(p[0], &edges))),
            ("segment_sum", vec![x.clone()], Box::new(|t, p| t.segment_sum(p[0], &seg, 2))),
            ("gather_rows", vec![random(&mut rng, 2, a)], Box::new(|t, p| t.gather_rows(p[0], &seg))),
            ("concat_cols", vec![x.clone(), y.clone()], Box::new(|t, p| t.concat_cols(p[0], p[1]))),
            ("select_col", vec![y.clone()], Box::new(|t, p| t.select_col(p[0], 0))),
            ("mul_column", vec![x.clone(), col.clone()], Box::new(|t, p| t.mul_column(p[0], p[1]))),
            ("row_sum", vec![x.clone()], Box::new(|t, p| Ok(t.row_sum(p[0])))),
            ("softmax_rows", vec![y.clone()], Box::new(|t, p| Ok(t.softmax_rows(p[0])))),
            ("softmax_cross_entropy", vec![y.mapv(|v| 2.0 * v)], Box::new(|t, p| t.softmax_cross_entropy(p[0], &targets))),
            ("rmse", vec![x.clone()], Box::new(|t, p| t.rmse(p[0], &target))),
            ("batch_norm", vec![x.clone(), gamma.clone(), beta.clone()], Box::new(|t, p| {
                let mut st = BatchNormState::new(a, 0.1, 1e-5);
                t.batch_norm(p[0], p[1], p[2], &mut st, Mode::Train)
            })),
            ("batch_norm_eval", vec![x.clone(), gamma.clone(), beta.clone()], Box::new(|t, p| {
                let mut st = BatchNormState::new(a, 0.1, 1e-5);
                st.running_mean.fill(0.2);
                st.running_var.fill(0.5);
                t.batch_norm(p[0], p[1], p[2], &mut st, Mode::Eval)
            })),
        ];
        for (name, params, f) in cases {
            let r = finite_difference_check(&params, 1e-5, |t, p| {
                let out = f(t, p)?;
                Ok(if t.shape(out) == (1, 1) { out } else { probe(t, out, seed) })
            }).unwrap();
            prop_assert!(r.max_rel_err <= 1e-5, "{}: {:?}", name, r);
        }
    }

    /// Mass conservation: column sums survive segment summation.
    #[test]
    fn segment_sum_conserves_mass(seed in any::<u64>(), n in 1usize..30, b in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&mut rng, n, 4);
        let seg: Arc<[usize]> = (0..n).map(|_| rng.random_range(0..b)).collect::<Vec<_>>().into();
        let mut t = Tape::new();
        let xv = t.constant(x.clone());
        let y = t.segment_sum(xv, &seg, b).unwrap();
        let lhs = t.value(y).sum_axis(ndarray::Axis(0));
        let rhs = x.sum_axis(ndarray::Axis(0));
        for (l, r) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((l - r).abs() <= 1e-12);
        }
    }
}
