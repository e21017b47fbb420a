use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use xmc_core::grad::{ops, Adam, AdamConfig, Tape, Tensor};

fn random_tensor(rng: &mut Pcg64, shape: &[usize]) -> Tensor<f64> {
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Direct six-loop cross-correlation with zero padding.
fn naive_conv(x: &Tensor<f64>, k: &Tensor<f64>, b: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
    let [n, c, h, w] = <[usize; 4]>::try_from(x.shape()).unwrap();
    let [o, _, kk, _] = <[usize; 4]>::try_from(k.shape()).unwrap();
    let oh = (h + 2 * pad - kk) / stride + 1;
    let ow = (w + 2 * pad - kk) / stride + 1;
    let mut out = vec![0.0; n * o * oh * ow];
    for ni in 0..n {
        for oi in 0..o {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = b.data()[oi];
                    for ci in 0..c {
                        for dy in 0..kk {
                            for dx in 0..kk {
                                let iy = (y * stride + dy) as isize - pad as isize;
                                let ix = (xo * stride + dx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let xv = x.data()[((ni * c + ci) * h + iy as usize) * w + ix as usize];
                                let kv = k.data()[((oi * c + ci) * kk + dy) * kk + dx];
                                acc += xv * kv;
                            }
                        }
                    }
                    out[((ni * o + oi) * oh + y) * ow + xo] = acc;
                }
            }
        }
    }
    Tensor::from_vec(&[n, o, oh, ow], out).unwrap()
}

#[test]
fn conv_of_ones_sums_the_window() {
    let x = Tensor::<f64>::full(&[1, 1, 3, 3], 1.0);
    let k = Tensor::<f64>::full(&[1, 1, 3, 3], 1.0);
    let out = ops::conv2d(&x, &k, &Tensor::zeros(&[1]), 1, 0).unwrap();
    assert_eq!(out.shape(), &[1, 1, 1, 1]);
    assert_eq!(out.data(), &[9.0]);
}

#[test]
fn zero_kernels_give_the_bias() {
    let mut rng = Pcg64::seed_from_u64(4);
    let x = random_tensor(&mut rng, &[2, 3, 5, 5]);
    let bias = Tensor::from_vec(&[2], vec![0.25, -1.5]).unwrap();
    let out = ops::conv2d(&x, &Tensor::zeros(&[2, 3, 3, 3]), &bias, 1, 1).unwrap();
    for (i, plane) in out.data().chunks(25).enumerate() {
        assert!(plane.iter().all(|&v| v == bias.data()[i % 2]));
    }
}

#[test]
fn conv_matches_the_reference_on_the_documented_case() {
    let mut rng = Pcg64::seed_from_u64(11);
    let x = random_tensor(&mut rng, &[1, 2, 5, 5]);
    let k = random_tensor(&mut rng, &[3, 2, 3, 3]);
    let b = random_tensor(&mut rng, &[3]);
    let fast = ops::conv2d(&x, &k, &b, 1, 1).unwrap();
    let slow = naive_conv(&x, &k, &b, 1, 1);
    assert_eq!(fast.shape(), slow.shape());
    for (a, e) in fast.data().iter().zip(slow.data()) {
        assert!((a - e).abs() < 1e-6);
    }
}

#[test]
fn conv_rejects_channel_mismatch() {
    let x = Tensor::<f64>::zeros(&[1, 2, 4, 4]);
    let k = Tensor::<f64>::zeros(&[1, 3, 3, 3]);
    let err = ops::conv2d(&x, &k, &Tensor::zeros(&[1]), 1, 1).unwrap_err().to_string();
    assert!(err.contains("[1, 2, 4, 4]") && err.contains("[1, 3, 3, 3]"), "{err}");
}

#[test]
fn pooling_examples() {
    let x = Tensor::<f64>::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(ops::maxpool2(&x).unwrap().0.data(), &[4.0]);
    assert!(ops::maxpool2(&Tensor::<f64>::zeros(&[1, 1, 3, 2])).is_err());
    let c = Tensor::<f64>::full(&[2, 3, 4, 4], 0.7);
    assert!(ops::global_avg_pool(&c).unwrap().data().iter().all(|&v| (v - 0.7).abs() < 1e-15));
}

#[test]
fn bce_examples() {
    let t = Tensor::<f64>::from_vec(&[2], vec![1.0, 0.0]).unwrap();
    let p = Tensor::from_vec(&[2], vec![0.9, 0.2]).unwrap();
    let expected = -(0.9f64.ln() + 0.8f64.ln()) / 2.0;
    assert!((ops::bce_loss(&p, &t).unwrap() - expected).abs() < 1e-12);
    assert!((expected - 0.16425).abs() < 1e-5);
    let half = Tensor::full(&[2], 0.5);
    assert!((ops::bce_loss(&half, &t).unwrap() - 2f64.ln()).abs() < 1e-12);
    let perfect = Tensor::from_vec(&[2], vec![1.0, 0.0]).unwrap();
    assert!(ops::bce_loss(&perfect, &t).unwrap() <= 1.01e-7);
    assert!(ops::bce_loss(&Tensor::<f64>::zeros(&[3]), &t).is_err());
}

#[test]
fn backward_of_sum_is_all_ones_and_unused_params_get_zero() {
    let mut tape = Tape::<f64>::new();
    let a = tape.param(Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap());
    let unused = tape.param(Tensor::full(&[4], 2.0));
    let loss = tape.sum(a).unwrap();
    let grads = tape.backward(loss).unwrap();
    assert!(grads.get(a).unwrap().data().iter().all(|&g| g == 1.0));
    assert!(grads.get(unused).map_or(true, |g| g.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn backward_rejects_non_scalar() {
    let mut tape = Tape::<f64>::new();
    let a = tape.param(Tensor::full(&[3], 1.0));
    let r = tape.relu(a).unwrap();
    assert!(tape.backward(r).is_err());
}

#[test]
fn adam_examples() {
    let mut w = vec![Tensor::<f64>::scalar(1.0)];
    let config = AdamConfig {
        learning_rate: 0.1,
        ..AdamConfig::default()
    };
    let mut adam = Adam::new(config, &w);
    adam.step(w.iter_mut(), &[Tensor::scalar(1.0)]).unwrap();
    assert!((w[0].item().unwrap() - 0.9).abs() < 1e-6);

    let mut z = vec![Tensor::<f64>::full(&[3], 0.3)];
    let mut adam = Adam::new(config, &z);
    adam.step(z.iter_mut(), &[Tensor::zeros(&[3])]).unwrap();
    assert!(z[0].data().iter().all(|&v| v == 0.3));

    let mut rng = Pcg64::seed_from_u64(2);
    let grads: Vec<Tensor<f32>> = (0..20).map(|_| random_tensor(&mut rng, &[5]).cast()).collect();
    let run = || {
        let mut p = vec![Tensor::<f32>::full(&[5], 0.1)];
        let mut adam = Adam::new(AdamConfig::default(), &p);
        for g in &grads {
            adam.step(p.iter_mut(), std::slice::from_ref(g)).unwrap();
        }
        p
    };
    assert_eq!(run(), run());
}

/// Central differences of `f` around `x` with step `h`.
fn numeric_grad(x: &Tensor<f64>, h: f64, f: impl Fn(&Tensor<f64>) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut plus = x.clone();
            plus.data_mut()[i] += h;
            let mut minus = x.clone();
            minus.data_mut()[i] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

fn assert_close(analytic: &[f64], numeric: &[f64], tol: f64) {
    for (a, n) in analytic.iter().zip(numeric) {
        assert!((a - n).abs() <= tol * (1.0 + a.abs().max(n.abs())), "{a} vs {n}");
    }
}

/// Weighted sum so every output element carries a distinct upstream gradient.
fn probe(t: &Tensor<f64>, weights: &[f64]) -> f64 {
    t.data().iter().zip(weights).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conv_matches_reference(
        seed in any::<u64>(),
        n in 1usize..3, c in 1usize..4, o in 1usize..4,
        size in 3usize..8, k in prop::sample::select(vec![1usize, 3]),
        stride in 1usize..3, pad in 0usize..2,
    ) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let x = random_tensor(&mut rng, &[n, c, size, size]);
        let kern = random_tensor(&mut rng, &[o, c, k, k]);
        let b = random_tensor(&mut rng, &[o]);
        let fast = ops::conv2d(&x, &kern, &b, stride, pad).unwrap();
        let slow = naive_conv(&x, &kern, &b, stride, pad);
        prop_assert_eq!(fast.shape(), slow.shape());
        for (a, e) in fast.data().iter().zip(slow.data()) {
            prop_assert!((a - e).abs() < 1e-9);
        }
    }

    #[test]
    fn conv_gradients_match_differences(seed in any::<u64>(), c in 1usize..3, o in 1usize..3) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let x = random_tensor(&mut rng, &[2, c, 4, 4]);
        let k = random_tensor(&mut rng, &[o, c, 3, 3]);
        let b = random_tensor(&mut rng, &[o]);
        let weights: Vec<f64> = (0..2 * o * 16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad_out = Tensor::from_vec(&[2, o, 4, 4], weights.clone()).unwrap();
        let (gx, gk, gb) = ops::conv2d_backward(&x, &k, &b, 1, 1, &grad_out).unwrap();
        let h = 1e-5;
        assert_close(gx.data(), &numeric_grad(&x, h, |x| probe(&ops::conv2d(x, &k, &b, 1, 1).unwrap(), &weights)), 1e-6);
        assert_close(gk.data(), &numeric_grad(&k, h, |k| probe(&ops::conv2d(&x, k, &b, 1, 1).unwrap(), &weights)), 1e-6);
        assert_close(gb.data(), &numeric_grad(&b, h, |b| probe(&ops::conv2d(&x, &k, b, 1, 1).unwrap(), &weights)), 1e-6);
    }

    #[test]
    fn linear_and_sigmoid_gradients_match_differences(seed in any::<u64>(), n in 1usize..4, i in 1usize..5, o in 1usize..5) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let x = random_tensor(&mut rng, &[n, i]);
        let w = random_tensor(&mut rng, &[o, i]);
        let b = random_tensor(&mut rng, &[o]);
        let weights: Vec<f64> = (0..n * o).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad_out = Tensor::from_vec(&[n, o], weights.clone()).unwrap();
        let (gx, gw, gb) = ops::linear_backward(&x, &w, &grad_out);
        let h = 1e-5;
        assert_close(gx.data(), &numeric_grad(&x, h, |x| probe(&ops::linear(x, &w, &b).unwrap(), &weights)), 1e-6);
        assert_close(gw.data(), &numeric_grad(&w, h, |w| probe(&ops::linear(&x, w, &b).unwrap(), &weights)), 1e-6);
        assert_close(gb.data(), &numeric_grad(&b, h, |b| probe(&ops::linear(&x, &w, b).unwrap(), &weights)), 1e-6);

        let y = ops::sigmoid(&x);
        let g = Tensor::from_vec(&[n, i], (0..n * i).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let gs = ops::sigmoid_backward(&y, &g);
        assert_close(gs.data(), &numeric_grad(&x, h, |x| probe(&ops::sigmoid(x), g.data())), 1e-6);
    }

    #[test]
    fn sigmoid_is_strictly_inside_the_unit_interval(v in -30.0f64..30.0) {
        let s = ops::sigmoid_scalar(v);
        prop_assert!(s > 0.0 && s < 1.0);
    }

    #[test]
    fn bce_is_non_negative(seed in any::<u64>(), len in 1usize..20) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let p = Tensor::from_vec(&[len], (0..len).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let t = Tensor::from_vec(&[len], (0..len).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect()).unwrap();
        prop_assert!(ops::bce_loss::<f64>(&p, &t).unwrap() >= 0.0);
    }
}
