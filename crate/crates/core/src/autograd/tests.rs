use super::*;
use crate::rng::Rng;
use crate::testutil::{conv_oracle, conv_transpose_oracle, rand_tensor};

fn forward1(x: Tensor<f64>, f: impl FnOnce(&mut Graph<f64>, Var) -> Result<Var>) -> Tensor<f64> {
    let mut g = Graph::new();
    let v = g.constant(x);
    let out = f(&mut g, v).unwrap();
    g.value(out).clone()
}

#[test]
fn conv2d_scalar_kernel_scales() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::from_f64(vec![1, 1, 2, 2], &[1., 2., 3., 4.]).unwrap());
    let k = g.constant(Tensor::from_f64(vec![1, 1, 1, 1], &[2.]).unwrap());
    let y = g.conv2d(x, k, None, 1, 0).unwrap();
    assert_eq!(g.value(y).data(), &[2., 4., 6., 8.]);
}

#[test]
fn conv2d_sum_of_ones() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::full(vec![1, 1, 3, 3], 1.0));
    let k = g.constant(Tensor::full(vec![1, 1, 3, 3], 1.0));
    let y = g.conv2d(x, k, None, 1, 0).unwrap();
    assert_eq!(g.shape(y), &[1, 1, 1, 1]);
    assert_eq!(g.value(y).data(), &[9.0]);
}

#[test]
fn conv2d_matches_direct_summation() {
    let x = rand_tensor(&[1, 2, 4, 4], 0);
    let k = rand_tensor(&[3, 2, 2, 2], 1);
    let mut g = Graph::<f64>::new();
    let (xv, kv) = (g.constant(x.clone()), g.constant(k.clone()));
    let y = g.conv2d(xv, kv, None, 2, 1).unwrap();
    assert_eq!(g.shape(y), &[1, 3, 3, 3]);
    let want = conv_oracle(&x, &k, 2, 1);
    assert!(g.value(y).max_abs_diff(&want) < 1e-12);
}

#[test]
fn conv2d_rejects_channel_mismatch() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::zeros(vec![1, 2, 4, 4]));
    let k = g.constant(Tensor::zeros(vec![1, 3, 3, 3]));
    assert!(matches!(g.conv2d(x, k, None, 1, 0), Err(Error::Dimension(_))));
}

#[test]
fn conv_transpose_broadcasts_single_value() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::from_f64(vec![1, 1, 1, 1], &[3.]).unwrap());
    let k = g.constant(Tensor::full(vec![1, 1, 2, 2], 1.0));
    let y = g.conv_transpose2d(x, k, None, 1, 0).unwrap();
    assert_eq!(g.value(y).data(), &[3., 3., 3., 3.]);
}

#[test]
fn conv_transpose_one_hot_stamps_kernel() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::from_f64(vec![1, 1, 2, 2], &[1., 0., 0., 0.]).unwrap());
    let k = g.constant(Tensor::from_f64(vec![1, 1, 2, 2], &[1., 2., 3., 4.]).unwrap());
    let y = g.conv_transpose2d(x, k, None, 2, 0).unwrap();
    // (2-1)*2 + 2 = 4 in each direction; kernel occupies the top-left block
    let out = g.value(y);
    let (_, _, h, w) = out.dims4().unwrap();
    for r in 0..h {
        for c in 0..w {
            let want = if r < 2 && c < 2 { [1., 2., 3., 4.][r * 2 + c] } else { 0.0 };
            assert_eq!(out.data()[r * w + c], want);
        }
    }
}

#[test]
fn conv_transpose_is_adjoint_of_conv() {
    let mut seed = 100;
    for &(cin, cout, h, k, stride, pad) in &[(2, 3, 5, 3, 1, 1), (3, 2, 8, 4, 2, 1), (1, 4, 7, 2, 3, 0), (2, 2, 7, 3, 2, 2)] {
        seed += 3;
        let x = rand_tensor(&[2, cin, h, h], seed);
        let kern = rand_tensor(&[cout, cin, k, k], seed + 1);
        let mut g = Graph::<f64>::new();
        let (xv, kv) = (g.constant(x.clone()), g.constant(kern.clone()));
        let y = g.conv2d(xv, kv, None, stride, pad).unwrap();
        let ys = g.shape(y).to_vec();
        let probe = rand_tensor(&ys, seed + 2);
        // conv_transpose with kernel [Cout, Cin] as [in, out] of the transposed op
        let pv = g.constant(probe.clone());
        let back = g.conv_transpose2d(pv, kv, None, stride, pad).unwrap();
        let lhs = g.value(y).dot(&probe).unwrap();
        // without output padding the transposed map can be shorter; the rows it
        // omits are never read by the forward conv in these cases
        let bt = g.value(back);
        let (_, _, bh, bw) = bt.dims4().unwrap();
        let mut rhs = 0.0;
        for n in 0..2 {
            for c in 0..cin {
                for r in 0..bh.min(h) {
                    for q in 0..bw.min(h) {
                        rhs += x.data()[((n * cin + c) * h + r) * h + q] * bt.data()[((n * cin + c) * bh + r) * bw + q];
                    }
                }
            }
        }
        assert!((lhs - rhs).abs() < 1e-10, "lhs {lhs} rhs {rhs}");
    }
}

#[test]
fn avg_pool_examples() {
    let y = forward1(Tensor::from_f64(vec![1, 1, 2, 2], &[1., 2., 3., 4.]).unwrap(), |g, x| g.avg_pool2d(x, 2));
    assert_eq!(y.data(), &[2.5]);
    let ramp = Tensor::from_fn(vec![1, 1, 4, 4], |i| i as f64);
    let y = forward1(ramp, |g, x| g.avg_pool2d(x, 2));
    assert_eq!(y.data(), &[2.5, 4.5, 10.5, 12.5]);
    let c = forward1(Tensor::full(vec![2, 3, 6, 6], 0.7), |g, x| g.avg_pool2d(x, 2));
    assert!(c.data().iter().all(|&v| (v - 0.7).abs() < 1e-15));
}

#[test]
fn avg_pool_rejects_odd_dims() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::zeros(vec![1, 1, 3, 4]));
    assert!(matches!(g.avg_pool2d(x, 2), Err(Error::Dimension(_))));
}

#[test]
fn upsample_examples() {
    let y = forward1(Tensor::from_f64(vec![1, 1, 2, 2], &[1., 2., 3., 4.]).unwrap(), |g, x| g.upsample_nearest2d(x, 2));
    assert_eq!(y.data(), &[1., 1., 2., 2., 1., 1., 2., 2., 3., 3., 4., 4., 3., 3., 4., 4.]);
    let x = rand_tensor(&[1, 2, 3, 3], 4);
    let y = forward1(x.clone(), |g, v| g.upsample_nearest2d(v, 1));
    assert_eq!(y, x);
}

#[test]
fn batch_norm_normalizes_batch() {
    let mut r = Rng::new(11);
    let x = Tensor::from_fn(vec![8, 2, 4, 4], |_| {
        let (a, _) = r.normal_pair();
        5.0 + 2.0 * a
    });
    let mut g = Graph::<f64>::new();
    let xv = g.constant(x);
    let gamma = g.constant(Tensor::full(vec![2], 1.0));
    let beta = g.constant(Tensor::zeros(vec![2]));
    let mut rs = RunningStats::new(2);
    let y = g.batch_norm2d(xv, gamma, beta, &mut rs, BnMode::Train, 0.1, 1e-5).unwrap();
    let out = g.value(y);
    for ch in 0..2 {
        let vals: Vec<f64> = out.narrow_channels(ch, 1).unwrap().into_data();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(m.abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-5, "variance {v}");
    }
    // running stats moved toward the batch mean of ~5
    assert!(rs.mean.iter().all(|&m| m > 0.3));
}

#[test]
fn batch_norm_zero_gamma_outputs_beta() {
    let mut g = Graph::<f64>::new();
    let xv = g.constant(rand_tensor(&[4, 3, 2, 2], 5));
    let gamma = g.constant(Tensor::zeros(vec![3]));
    let beta = g.constant(Tensor::from_f64(vec![3], &[0.5, -1.0, 2.0]).unwrap());
    let mut rs = RunningStats::new(3);
    let y = g.batch_norm2d(xv, gamma, beta, &mut rs, BnMode::Train, 0.1, 1e-5).unwrap();
    let out = g.value(y);
    for (i, &v) in out.data().iter().enumerate() {
        let ch = (i / 4) % 3;
        assert_eq!(v, [0.5, -1.0, 2.0][ch]);
    }
}

#[test]
fn batch_norm_eval_matches_formula() {
    let x = rand_tensor(&[2, 2, 3, 3], 6);
    let rs0 = RunningStats { mean: vec![0.3, -0.2], var: vec![1.5, 0.4] };
    let (gm, bt, eps) = ([1.2, 0.7], [0.1, -0.3], 1e-5);
    let mut g = Graph::<f64>::new();
    let xv = g.constant(x.clone());
    let gamma = g.constant(Tensor::from_f64(vec![2], &gm).unwrap());
    let beta = g.constant(Tensor::from_f64(vec![2], &bt).unwrap());
    let mut rs = rs0.clone();
    let y = g.batch_norm2d(xv, gamma, beta, &mut rs, BnMode::Eval, 0.1, eps).unwrap();
    assert_eq!(rs, rs0, "eval mode must not touch running stats");
    for (i, &v) in g.value(y).data().iter().enumerate() {
        let ch = (i / 9) % 2;
        let want = (x.data()[i] - rs0.mean[ch]) / (rs0.var[ch] + eps).sqrt() * gm[ch] + bt[ch];
        assert!((v - want).abs() < 1e-14);
    }
}

#[test]
fn batch_norm_single_value_channel_is_degenerate() {
    let mut g = Graph::<f64>::new();
    let xv = g.constant(Tensor::zeros(vec![1, 1, 1, 1]));
    let gamma = g.constant(Tensor::full(vec![1], 1.0));
    let beta = g.constant(Tensor::zeros(vec![1]));
    let mut rs = RunningStats::new(1);
    assert!(g.batch_norm2d(xv, gamma, beta, &mut rs, BnMode::Train, 0.1, 1e-5).is_err());
}

#[test]
fn activation_values() {
    let y = forward1(Tensor::from_f64(vec![1], &[0.0]).unwrap(), |g, x| g.sigmoid(x));
    assert_eq!(y.data(), &[0.5]);
    let y = forward1(Tensor::from_f64(vec![1], &[-1.0]).unwrap(), |g, x| g.leaky_relu(x, 0.2));
    assert!((y.data()[0] + 0.2).abs() < 1e-15);
    let y = forward1(Tensor::from_f64(vec![3], &[-1.0, 0.0, 2.0]).unwrap(), |g, x| g.relu(x));
    assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    let y = forward1(Tensor::from_f64(vec![2], &[-800.0, 800.0]).unwrap(), |g, x| g.log_sigmoid(x));
    assert_eq!(y.data(), &[-800.0, 0.0]);
}

#[test]
fn backward_linear_and_quadratic() {
    let mut g = Graph::<f64>::new();
    let x = g.input(Tensor::from_f64(vec![3], &[0.5, 1.0, -4.0]).unwrap());
    let y = g.scale(x, 2.0).unwrap();
    let l = g.sum(y).unwrap();
    let gr = g.backward(l).unwrap();
    assert_eq!(gr.get(x).unwrap().data(), &[2.0, 2.0, 2.0]);

    let mut g = Graph::<f64>::new();
    let x = g.input(Tensor::from_f64(vec![3], &[1.0, -2.0, 3.0]).unwrap());
    let y = g.mul(x, x).unwrap();
    let l = g.sum(y).unwrap();
    let gr = g.backward(l).unwrap();
    assert_eq!(gr.get(x).unwrap().data(), &[2.0, -4.0, 6.0]);
}

#[test]
fn backward_rejects_non_scalar() {
    let mut g = Graph::<f64>::new();
    let x = g.input(Tensor::zeros(vec![2]));
    assert!(matches!(g.backward(x), Err(Error::Contract(_))));
}

#[test]
fn backward_accumulates_into_params_across_calls() {
    let mut store = ParamStore::<f64>::new();
    let id = store.add("w", Tensor::from_f64(vec![2], &[1.0, 2.0]).unwrap()).unwrap();
    for _ in 0..2 {
        let mut g = Graph::new();
        let w = g.param(&store, id);
        let y = g.scale(w, 3.0).unwrap();
        let l = g.sum(y).unwrap();
        g.backward(l).unwrap().accumulate_into(&g, &mut store);
    }
    assert_eq!(store.get(id).grad.as_ref().unwrap().data(), &[6.0, 6.0]);
    store.zero_grad();
    assert!(store.get(id).grad.is_none());
}

#[test]
fn finite_checks_report_numeric_error() {
    let mut g = Graph::<f64>::new().with_finite_checks(true);
    let x = g.constant(Tensor::from_f64(vec![1], &[f64::MAX]).unwrap());
    assert!(matches!(g.scale(x, 10.0), Err(Error::Numeric(_))));
}

#[test]
fn shape_contracts_hold_exhaustively() {
    let mut g = Graph::<f64>::new();
    for h in 1..=8 {
        for w in 1..=8 {
            let x = g.constant(Tensor::zeros(vec![1, 1, h, w]));
            for k in 1..=4 {
                let kern = g.constant(Tensor::zeros(vec![1, 1, k, k]));
                for stride in 1..=4 {
                    for pad in 0..=2 {
                        match g.conv2d(x, kern, None, stride, pad) {
                            Ok(y) => {
                                assert!(k <= h + 2 * pad && k <= w + 2 * pad);
                                assert_eq!(g.shape(y), &[1, 1, (h + 2 * pad - k) / stride + 1, (w + 2 * pad - k) / stride + 1]);
                            }
                            Err(_) => assert!(k > h + 2 * pad || k > w + 2 * pad),
                        }
                        if let Ok(y) = g.conv_transpose2d(x, kern, None, stride, pad) {
                            assert_eq!(g.shape(y), &[1, 1, (h - 1) * stride + k - 2 * pad, (w - 1) * stride + k - 2 * pad]);
                        } else {
                            assert!((h - 1) * stride + k <= 2 * pad || (w - 1) * stride + k <= 2 * pad);
                        }
                    }
                }
                if h % k == 0 && w % k == 0 {
                    let y = g.avg_pool2d(x, k).unwrap();
                    assert_eq!(g.shape(y), &[1, 1, h / k, w / k]);
                } else {
                    assert!(g.avg_pool2d(x, k).is_err());
                }
                let y = g.upsample_nearest2d(x, k).unwrap();
                assert_eq!(g.shape(y), &[1, 1, h * k, w * k]);
            }
        }
    }
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn pool_inverts_upsample(n in 1usize..3, c in 1usize..4, h in 1usize..6, w in 1usize..6, seed in 0u64..1000) {
            let x = rand_tensor(&[n, c, h, w], seed);
            let mut g = Graph::<f64>::new();
            let xv = g.constant(x.clone());
            let up = g.upsample_nearest2d(xv, 2).unwrap();
            let back = g.avg_pool2d(up, 2).unwrap();
            prop_assert!(g.value(back).max_abs_diff(&x) < 1e-15);
        }

        #[test]
        fn conv_agrees_with_oracle(cin in 1usize..3, cout in 1usize..3, h in 3usize..7, k in 1usize..4, stride in 1usize..3, pad in 0usize..2, seed in 0u64..1000) {
            let x = rand_tensor(&[2, cin, h, h], seed);
            let kern = rand_tensor(&[cout, cin, k, k], seed + 7);
            let mut g = Graph::<f64>::new();
            let (xv, kv) = (g.constant(x.clone()), g.constant(kern.clone()));
            let y = g.conv2d(xv, kv, None, stride, pad).unwrap();
            prop_assert!(g.value(y).max_abs_diff(&conv_oracle(&x, &kern, stride, pad)) < 1e-12);
        }
    }
}

#[test]
fn conv_transpose_matches_scatter_oracle() {
    for &(cin, cout, h, k, stride, pad) in &[(1, 1, 3, 2, 1, 0), (2, 3, 4, 4, 2, 1), (3, 2, 3, 3, 3, 1)] {
        let x = rand_tensor(&[2, cin, h, h], 40 + h as u64);
        let kern = rand_tensor(&[cin, cout, k, k], 50 + k as u64);
        let mut g = Graph::<f64>::new();
        let (xv, kv) = (g.constant(x.clone()), g.constant(kern.clone()));
        let y = g.conv_transpose2d(xv, kv, None, stride, pad).unwrap();
        let want = conv_transpose_oracle(&x, &kern, stride, pad);
        assert!(g.value(y).max_abs_diff(&want) < 1e-12, "case {:?}", (cin, cout, h, k, stride, pad));
    }
}
