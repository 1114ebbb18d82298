use lpdgcn::nn::{glorot_uniform, mlp_forward, Checkpoint, MlpParams, ParamStore};
use lpdgcn::tensor::{finite_difference_check, BatchNormState, Mode, Tape};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn store_with_mlp<T: lpdgcn::Real>(seed: u64, bn: bool) -> (ParamStore<T>, MlpParams) {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mlp = MlpParams::init(&mut store, &mut rng, "enc", (4, 6, 3), bn);
    (store, mlp)
}

#[test]
fn glorot_bounds_and_spread() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w: Array2<f64> = glorot_uniform(&mut rng, 64, 64);
    let a = (6.0f64 / 128.0).sqrt();
    assert!(w.iter().all(|v| v.abs() < a));
    let var = w.mapv(|v| v * v).mean().unwrap();
    // U(-a, a) has variance a^2 / 3
    assert!((var - a * a / 3.0).abs() < 0.1 * a * a / 3.0, "{var}");
}

#[test]
fn init_is_deterministic_per_seed() {
    let (a, _) = store_with_mlp::<f32>(11, true);
    let (b, _) = store_with_mlp::<f32>(11, true);
    let (c, _) = store_with_mlp::<f32>(12, true);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.names(), ["enc.w1", "enc.b1", "enc.w2", "enc.bn.gamma", "enc.bn.beta"]);
}

#[test]
fn mlp_with_bn_passes_gradcheck() {
    let (store, mlp) = store_with_mlp::<f64>(5, true);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = Array2::from_shape_simple_fn((7, 4), || rng.random_range(-1.0..1.0));
    let w = Array2::from_shape_simple_fn((7, 3), || rng.random_range(0.5..1.5));
    let report = finite_difference_check(store.values(), 1e-6, |t, p| {
        let bound = lpdgcn::nn::Bound(p.to_vec());
        let mut state = BatchNormState::new(3, 0.1, 1e-5);
        let xv = t.constant(x.clone());
        let y = mlp_forward(t, &bound, &mlp, xv, Some(&mut state), Mode::Train)?;
        let wv = t.constant(w.clone());
        let mut acc = None;
        for j in 0..3 {
            let yc = t.select_col(y, j)?;
            let wc = t.select_col(wv, j)?;
            let prod = t.mul_column(yc, wc)?;
            let s = t.sum_all(prod);
            acc = Some(match acc {
                None => s,
                Some(a) => t.add(a, s)?,
            });
        }
        let s = acc.unwrap();
        Ok(t.scale(s, 1.0))
    })
    .unwrap();
    assert!(report.max_rel_err <= 1e-5, "{report:?}");
}

#[test]
fn eval_mode_uses_running_stats() {
    let (store, mlp) = store_with_mlp::<f64>(5, true);
    let x = Array2::from_shape_fn((6, 4), |(i, j)| (i * 4 + j) as f64 / 10.0);
    let mut state = BatchNormState::new(3, 0.1, 1e-5);
    let mut tape = Tape::new();
    let bound = store.bind(&mut tape);
    let xv = tape.constant(x.clone());
    mlp_forward(&mut tape, &bound, &mlp, xv, Some(&mut state), Mode::Train).unwrap();
    let after_train = state.clone();
    let xv = tape.constant(x);
    mlp_forward(&mut tape, &bound, &mlp, xv, Some(&mut state), Mode::Eval).unwrap();
    assert_eq!(state, after_train);
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    for bn in [false, true] {
        let (store, _) = store_with_mlp::<f64>(21, bn);
        let mut ck = Checkpoint::from_store(&store);
        ck.add_buffer("enc.bn.running_mean", &Array2::from_elem((1, 3), 0.1 + 0.2));
        let path = dir.path().join(format!("ck{bn}.json"));
        ck.save(&path).unwrap();
        let back = Checkpoint::<f64>::load(&path).unwrap();
        assert_eq!(back, ck);
        let (mut fresh, _) = store_with_mlp::<f64>(99, bn);
        back.load_into(&mut fresh).unwrap();
        for (a, b) in fresh.values().iter().zip(store.values()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(back.buffer("enc.bn.running_mean").unwrap()[[0, 2]], 0.1 + 0.2);
    }

    let (store, _) = store_with_mlp::<f32>(21, true);
    let path = dir.path().join("single.json");
    Checkpoint::from_store(&store).save(&path).unwrap();
    let (mut fresh, _) = store_with_mlp::<f32>(1, true);
    Checkpoint::<f32>::load(&path).unwrap().load_into(&mut fresh).unwrap();
    assert_eq!(fresh, store);
    assert!(Checkpoint::<f64>::load(&path).is_err());
}

#[test]
fn checkpoint_rejects_mismatched_layout() {
    let (with_bn, _) = store_with_mlp::<f64>(1, true);
    let (mut without, _) = store_with_mlp::<f64>(1, false);
    assert!(Checkpoint::from_store(&with_bn).load_into(&mut without).is_err());
    let mut other = ParamStore::<f64>::new();
    other.add("enc.w1", Array2::zeros((2, 2)));
    let mut one = ParamStore::<f64>::new();
    one.add("enc.w1", Array2::zeros((4, 6)));
    assert!(Checkpoint::from_store(&other).load_into(&mut one).is_err());
}
