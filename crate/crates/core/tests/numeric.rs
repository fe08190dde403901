use keynet::numeric::{relative_error, Tape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Independent oracle: perturb each input scalar and re-run the forward
/// closure on a fresh tape.
fn check_op(inputs: Vec<Tensor>, f: impl Fn(&mut Tape, &[keynet::numeric::Var]) -> keynet::numeric::Var) {
    let mut tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let root = f(&mut tape, &vars);
    tape.backward(root).unwrap();
    let h = 1e-5;
    for (i, t) in inputs.iter().enumerate() {
        let analytic = tape.grad(vars[i]).unwrap();
        for j in 0..t.numel() {
            let eval = |delta: f64| {
                let mut perturbed = inputs.clone();
                perturbed[i].data_mut()[j] += delta;
                let mut tp = Tape::new();
                let vs: Vec<_> = perturbed.into_iter().map(|t| tp.leaf(t, true)).collect();
                let r = f(&mut tp, &vs);
                tp.value(r).data()[0]
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let err = relative_error(analytic.data()[j], numeric, 1e-6);
            assert!(
                err < 1e-6,
                "input {i}[{j}]: analytic {} numeric {numeric} err {err}",
                analytic.data()[j]
            );
        }
    }
}

#[test]
fn matmul_goldens() {
    let mut tape = Tape::new();
    let eye = tape.constant(Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap());
    let m = tape.constant(Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap());
    let p = tape.matmul(eye, m).unwrap();
    assert_eq!(tape.value(p).data(), &[1.0, 2.0, 3.0, 4.0]);

    let a = tape.constant(Tensor::from_rows(&[&[1.0, 2.0]]).unwrap());
    let b = tape.constant(Tensor::from_rows(&[&[3.0], &[4.0]]).unwrap());
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(tape.value(c).data(), &[11.0]);
}

#[test]
fn matmul_shape_error_reports_both_shapes() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[2, 3]));
    let msg = tape.matmul(a, b).unwrap_err().to_string();
    assert!(msg.contains("[2, 3] x [2, 3]"), "{msg}");
}

#[test]
fn matmul_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    check_op(vec![random(&[3, 3], &mut rng), random(&[3, 3], &mut rng)], |t, v| {
        let p = t.matmul(v[0], v[1]).unwrap();
        t.sum(p)
    });
}

#[test]
fn batch_matmul_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for transposed in [false, true] {
        let b_shape = if transposed { [2, 4, 3] } else { [2, 3, 4] };
        let w = random(&[2, 2, 4], &mut rng);
        check_op(
            vec![random(&[2, 2, 3], &mut rng), random(&b_shape, &mut rng), w],
            move |t, v| {
                let p = t.batch_matmul(v[0], v[1], transposed).unwrap();
                let q = t.mul(p, v[2]).unwrap();
                t.sum(q)
            },
        );
    }
}

#[test]
fn softmax_goldens() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(&[2], vec![0.0, 0.0]).unwrap());
    let s = tape.softmax_lastdim(x);
    assert_eq!(tape.value(s).data(), &[0.5, 0.5]);

    let x = tape.constant(Tensor::new(&[1], vec![-37.5]).unwrap());
    let s = tape.softmax_lastdim(x);
    assert_eq!(tape.value(s).data(), &[1.0]);

    let x = tape.constant(Tensor::new(&[2], vec![2f64.ln(), 0.0]).unwrap());
    let s = tape.softmax_lastdim(x);
    let got = tape.value(s).data();
    assert!((got[0] - 2.0 / 3.0).abs() < 1e-15 && (got[1] - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn softmax_is_stable_for_large_inputs() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(&[3], vec![1000.0, 1000.0, -1000.0]).unwrap());
    let s = tape.softmax_lastdim(x);
    let v = tape.value(s);
    assert!(v.is_finite());
    assert!((v.data()[0] - 0.5).abs() < 1e-12);
}

#[test]
fn masked_softmax_zeroes_masked_and_empty_rows() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::new(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(), true);
    let mask = [false, true, false, true, true, true];
    let s = tape.masked_softmax_lastdim(x, Some(&mask)).unwrap();
    let v = tape.value(s).data().to_vec();
    assert_eq!(v[1], 0.0);
    assert!((v[0] + v[2] - 1.0).abs() < 1e-12);
    assert_eq!(&v[3..], &[0.0, 0.0, 0.0]);
    let r = tape.sum(s);
    tape.backward(r).unwrap();
    assert!(tape.grad(x).unwrap().is_finite());
}

#[test]
fn softmax_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = random(&[2, 4], &mut rng);
    check_op(vec![random(&[2, 4], &mut rng), w], |t, v| {
        let s = t.softmax_lastdim(v[0]);
        let q = t.mul(s, v[1]).unwrap();
        t.sum(q)
    });
}

#[test]
fn layer_norm_goldens() {
    let mut tape = Tape::new();
    let g = tape.constant(Tensor::full(&[3], 1.0));
    let b = tape.constant(Tensor::zeros(&[3]));
    let x = tape.constant(Tensor::new(&[3], vec![5.0, 5.0, 5.0]).unwrap());
    let y = tape.layer_norm(x, g, b, 1e-12).unwrap();
    assert_eq!(tape.value(y).data(), &[0.0, 0.0, 0.0]);

    let g = tape.constant(Tensor::full(&[2], 1.0));
    let b = tape.constant(Tensor::zeros(&[2]));
    let x = tape.constant(Tensor::new(&[2], vec![1.0, -1.0]).unwrap());
    let y = tape.layer_norm(x, g, b, 0.0).unwrap();
    assert_eq!(tape.value(y).data(), &[1.0, -1.0]);
}

#[test]
fn layer_norm_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w = random(&[3, 5], &mut rng);
    check_op(
        vec![random(&[3, 5], &mut rng), random(&[5], &mut rng), random(&[5], &mut rng), w],
        |t, v| {
            let y = t.layer_norm(v[0], v[1], v[2], 1e-12).unwrap();
            let q = t.mul(y, v[3]).unwrap();
            t.sum(q)
        },
    );
}

#[test]
fn gelu_bias_and_gather_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    check_op(
        vec![random(&[3, 4], &mut rng), random(&[4], &mut rng), random(&[5, 4], &mut rng)],
        |t, v| {
            let h = t.add_broadcast(v[0], v[1]).unwrap();
            let h = t.gelu(h);
            let e = t.embedding(v[2], &[1, 0, 4]).unwrap();
            let h = t.mul(h, e).unwrap();
            let idx: std::rc::Rc<[Option<usize>]> =
                vec![Some(11), None, Some(0), Some(11), Some(5)].into();
            let s = t.index_select(h, idx, &[5]).unwrap();
            let c = t.concat(&[s, s]).unwrap();
            let c = t.scale(c, 0.7);
            t.mean(c)
        },
    );
}

#[test]
fn loss_goldens() {
    let mut tape = Tape::new();
    let z = tape.constant(Tensor::new(&[1, 2], vec![0.0, 0.0]).unwrap());
    let ce = tape.cross_entropy(z, &[0]).unwrap();
    assert!((tape.value(ce).data()[0] - 2f64.ln()).abs() < 1e-15);

    let z = tape.constant(Tensor::new(&[1], vec![0.0]).unwrap());
    let bce = tape.bce_with_logits(z, &[1.0]).unwrap();
    assert!((tape.value(bce).data()[0] - 2f64.ln()).abs() < 1e-15);

    assert!(tape.cross_entropy(z, &[1]).is_err());
    assert!(tape.bce_with_logits(z, &[0.5]).is_err());
}

#[test]
fn confident_prediction_loss_decays_to_zero() {
    let mut prev = f64::INFINITY;
    for margin in [1.0, 5.0, 10.0, 20.0, 40.0] {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::new(&[1, 2], vec![margin, 0.0]).unwrap());
        let ce = tape.cross_entropy(z, &[0]).unwrap();
        let l = tape.value(ce).data()[0];
        assert!(l < prev && l >= 0.0);
        prev = l;
    }
    assert!(prev < 1e-15);
}

#[test]
fn loss_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    check_op(vec![random(&[3, 4], &mut rng)], |t, v| t.cross_entropy(v[0], &[0, 3, 1]).unwrap());
    check_op(vec![random(&[2, 3], &mut rng)], |t, v| {
        t.bce_with_logits_weighted(v[0], &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0], &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
            .unwrap()
    });
}

#[test]
fn backward_goldens_and_accumulation() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::new(&[2, 2], vec![1.0, -2.0, 3.0, 0.5]).unwrap(), true);
    let s = tape.sum(x);
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(x).unwrap().data(), &[1.0; 4]);
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(x).unwrap().data(), &[2.0; 4]);
    tape.zero_grad();
    let sq = tape.mul(x, x).unwrap();
    let r = tape.sum(sq);
    tape.backward(r).unwrap();
    assert_eq!(tape.grad(x).unwrap().data(), &[2.0, -4.0, 6.0, 1.0]);
    assert!(tape.backward(sq).is_err());
}

#[test]
fn constants_receive_no_gradient() {
    let mut tape = Tape::new();
    let c = tape.constant(Tensor::full(&[2], 3.0));
    let x = tape.leaf(Tensor::full(&[2], 1.0), true);
    let p = tape.mul(c, x).unwrap();
    let r = tape.sum(p);
    tape.backward(r).unwrap();
    assert!(tape.grad(c).is_none());
    assert_eq!(tape.grad(x).unwrap().data(), &[3.0, 3.0]);
}

proptest! {
    #[test]
    fn softmax_rows_positive_and_normalized(values in proptest::collection::vec(-50.0f64..50.0, 1..24), width in 1usize..6) {
        let rows = values.len() / width;
        prop_assume!(rows >= 1);
        let data = values[..rows * width].to_vec();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[rows, width], data).unwrap());
        let s = tape.softmax_lastdim(x);
        for r in 0..rows {
            let row = tape.value(s).row(r);
            prop_assert!(row.iter().all(|&v| v > 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
