//! Central finite-difference checks in the 64-bit shadow.

use proptest::prelude::*;
use rand::Rng as _;

use super::*;
use crate::rng::stream_rng;

/// Largest relative error between the tape gradient and central differences
/// (step 1e-3) over every entry of every input. Relative error uses a floor
/// of 1e-2 on the denominator so near-zero gradients are compared absolutely.
pub(crate) fn max_rel_error(
    inputs: &[Tensor<f64>],
    f: impl Fn(&mut Tape<f64>, &[Var]) -> Var,
) -> f64 {
    let eval = |ins: &[Tensor<f64>]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ins.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).item().unwrap()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out).unwrap();
    let h = 1e-3;
    let mut worst = 0.0f64;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.wrt(vars[k]).map(<[f64]>::to_vec).unwrap_or(vec![0.0; input.numel()]);
        for i in 0..input.numel() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-2);
            worst = worst.max((analytic[i] - numeric).abs() / denom);
        }
    }
    worst
}

fn rand_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = stream_rng(seed, 17);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Weighted sum so every output entry has a distinct upstream gradient.
fn project(tape: &mut Tape<f64>, v: Var, seed: u64) -> Var {
    let shape = tape.value(v).shape().to_vec();
    let w = tape.constant(rand_tensor(&shape, seed ^ 0xabc));
    let p = tape.mul(v, w).unwrap();
    tape.sum(p)
}

const TOL: f64 = 1e-4;

#[test]
fn matmul_matches_triple_loop() {
    let a = rand_tensor(&[2, 3], 1);
    let b = rand_tensor(&[3, 2], 2);
    let mut tape = Tape::new();
    let (va, vb) = (tape.constant(a.clone()), tape.constant(b.clone()));
    let c = tape.matmul(va, vb).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let mut want = 0.0;
            for k in 0..3 {
                want += a.data()[i * 3 + k] * b.data()[k * 2 + j];
            }
            assert!((tape.value(c).data()[i * 2 + j] - want).abs() < 1e-6);
        }
    }
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let mut tape = Tape::<f32>::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[2, 3]));
    let msg = tape.matmul(a, b).unwrap_err().to_string();
    assert!(msg.contains("[2, 3]") && msg.contains("matmul"), "{msg}");
}

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let mut tape = Tape::<f32>::new();
    let x = tape.constant(Tensor::vector(vec![0.0; 3]));
    let y = tape.softmax_rows(x);
    for &p in tape.value(y).data() {
        assert!((p - 1.0 / 3.0).abs() < 1e-7);
    }
}

#[test]
fn square_gradient_at_three_is_six() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Tensor::scalar(3.0));
    let y = tape.mul(x, x).unwrap();
    let g = tape.backward(y).unwrap();
    assert_eq!(g.wrt(x).unwrap(), &[6.0]);
}

#[test]
fn disconnected_parameter_gets_exact_zero() {
    let mut store = ParameterStore::<f64>::new(AdamConfig::default());
    let used = store.add("used", Tensor::vector(vec![1.0, 2.0])).unwrap();
    let unused = store.add("unused", Tensor::vector(vec![5.0])).unwrap();
    let mut tape = Tape::new();
    let u = tape.param(&store, used);
    let _ = tape.param(&store, unused);
    let loss = tape.sum(u);
    let g = tape.backward(loss).unwrap();
    assert_eq!(g.param(unused).unwrap(), &[0.0]);
    assert_eq!(g.param(used).unwrap(), &[1.0, 1.0]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
    assert!(matches!(tape.backward(x), Err(crate::Error::Contract(_))));
}

#[test]
fn lstm_cell_with_zero_everything_stays_zero() {
    let mut tape = Tape::<f32>::new();
    let x = tape.constant(Tensor::zeros(&[1, 3]));
    let h = tape.constant(Tensor::zeros(&[1, 2]));
    let c = tape.constant(Tensor::zeros(&[1, 2]));
    let wi = tape.constant(Tensor::zeros(&[3, 8]));
    let wh = tape.constant(Tensor::zeros(&[2, 8]));
    let b = tape.constant(Tensor::zeros(&[8]));
    let (h1, c1) = tape.lstm_cell(x, h, c, wi, wh, b).unwrap();
    assert!(tape.value(h1).data().iter().all(|&v| v == 0.0));
    assert!(tape.value(c1).data().iter().all(|&v| v == 0.0));
}

#[test]
fn softmax_cross_entropy_gradient() {
    let logits = rand_tensor(&[3, 5], 4);
    let targets = [1usize, 4, 0];
    let err = max_rel_error(&[logits], |t, v| {
        let lp = t.log_softmax_rows(v[0]);
        let idx: Vec<usize> = targets.iter().enumerate().map(|(r, &c)| r * 5 + c).collect();
        let picked = t.gather(lp, &idx).unwrap();
        let m = t.mean(picked);
        t.scale(m, -1.0)
    });
    assert!(err < TOL, "{err}");
}

#[test]
fn lstm_unroll_gradient() {
    // Three stacked layers over four steps, gradients w.r.t. inputs and weights.
    let (hid, inp, steps) = (3, 2, 4);
    let mut inputs = vec![rand_tensor(&[steps, inp], 10)];
    for l in 0..3 {
        let w_in = if l == 0 { inp } else { hid };
        inputs.push(rand_tensor(&[w_in, 4 * hid], 20 + l as u64));
        inputs.push(rand_tensor(&[hid, 4 * hid], 30 + l as u64));
        inputs.push(rand_tensor(&[4 * hid], 40 + l as u64));
    }
    let err = max_rel_error(&inputs, |t, v| {
        let mut h: Vec<Var> = (0..3).map(|_| t.constant(Tensor::zeros(&[1, hid]))).collect();
        let mut c = h.clone();
        let mut outs = Vec::new();
        for s in 0..steps {
            let mut x = t.slice_cols(v[0], 0, inp).unwrap();
            x = t.gather_rows(x, &[s]).unwrap();
            for l in 0..3 {
                let (hn, cn) = t.lstm_cell(x, h[l], c[l], v[1 + 3 * l], v[2 + 3 * l], v[3 + 3 * l]).unwrap();
                h[l] = hn;
                c[l] = cn;
                x = hn;
            }
            outs.push(x);
        }
        let all = t.concat_cols(&outs).unwrap();
        project(t, all, 5)
    });
    assert!(err < TOL, "{err}");
}

#[test]
fn segment_ops_gradient() {
    let a = rand_tensor(&[6, 4], 50);
    let q = rand_tensor(&[3, 4], 51);
    let seg = [0usize, 0, 1, 2, 2, 2];
    let offsets = [0usize, 2, 3, 6];
    let err = max_rel_error(&[a, q], |t, v| {
        let logits = t.segment_dot(v[0], v[1], &seg).unwrap();
        let lp = t.segment_log_softmax(logits, &offsets).unwrap();
        let p = t.exp(lp);
        let plogp = t.mul(p, lp).unwrap();
        let ent = t.segment_sum(plogp, &offsets).unwrap();
        let picked = t.gather(lp, &[1, 2, 4]).unwrap();
        let s1 = project(t, ent, 6);
        let s2 = project(t, picked, 7);
        t.add(s1, s2).unwrap()
    });
    assert!(err < TOL, "{err}");
}

#[test]
fn embedding_and_bce_gradient() {
    let table = rand_tensor(&[5, 3], 60);
    let rel = rand_tensor(&[2, 3], 61);
    let err = max_rel_error(&[table, rel], |t, v| {
        let s = t.embedding_lookup(v[0], &[0, 3, 3]).unwrap();
        let r = t.embedding_lookup(v[1], &[1, 0, 1]).unwrap();
        let q = t.mul(s, r).unwrap();
        let logits = t.matmul_t(q, v[0]).unwrap();
        t.bce_with_logits(logits, (0..15).map(|i| if i % 4 == 0 { 0.9 } else { 0.02 }).collect())
            .unwrap()
    });
    assert!(err < TOL, "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn elementwise_ops_pass_gradient_check(rows in 1usize..4, cols in 1usize..5, seed in 0u64..1000) {
        let a = rand_tensor(&[rows, cols], seed);
        let b = rand_tensor(&[rows, cols], seed + 1);
        let bias = rand_tensor(&[cols], seed + 2);
        let w = rand_tensor(&[cols, 2], seed + 3);
        let err = max_rel_error(&[a, b, bias, w], |t, v| {
            let s = t.sub(v[0], v[1]).unwrap();
            let m = t.mul(s, v[0]).unwrap();
            let r = t.relu(m);
            let th = t.tanh(v[1]);
            let sg = t.sigmoid(v[0]);
            let e = t.exp(sg);
            let l = t.log(e);
            let sum = t.add(r, th).unwrap();
            let sum = t.add(sum, l).unwrap();
            let sum = t.add_row_bias(sum, v[2]).unwrap();
            let sm = t.softmax_rows(sum);
            let sc = t.scale(sm, 2.5);
            let mm = t.matmul(sc, v[3]).unwrap();
            let cat = t.concat_cols(&[mm, sum]).unwrap();
            let sl = t.slice_cols(cat, 1, cols).unwrap();
            project(t, sl, seed)
        });
        prop_assert!(err < TOL, "rel err {}", err);
    }

    #[test]
    fn softmax_rows_are_distributions(raw in proptest::collection::vec(-30.0f32..30.0, 1..24), cols in 1usize..6) {
        let rows = raw.len() / cols;
        prop_assume!(rows > 0);
        let mut tape = Tape::<f32>::new();
        let x = tape.constant(Tensor::new(vec![rows, cols], raw[..rows * cols].to_vec()).unwrap());
        let y = tape.softmax_rows(x);
        for r in 0..rows {
            let row = tape.value(y).row(r);
            prop_assert!(row.iter().all(|&p| p > 0.0));
            prop_assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn dropout_eval_identity_and_train_expectation() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::full(&[1, 200_000], 1.0));
    let mut rng = stream_rng(5, 0);
    let same = tape.dropout(x, 0.3, false, &mut rng).unwrap();
    assert_eq!(same, x);
    let d = tape.dropout(x, 0.3, true, &mut rng).unwrap();
    let mean = tape.value(d).data().iter().sum::<f64>() / 200_000.0;
    // Each entry is 0 or 1/0.7; σ of the mean is sqrt(0.3/0.7)/sqrt(n) ≈ 1.5e-3.
    assert!((mean - 1.0).abs() < 5e-3, "{mean}");
    assert!(tape.dropout(x, 1.0, true, &mut rng).is_err());
}
