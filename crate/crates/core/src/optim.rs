//! Adam with bias correction, and WGAN weight clipping.

use crate::error::{contract_err, Result};
use crate::param::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    /// First and second moment buffers, indexed like the parameter store.
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(store: &ParamStore<T>, lr: T, beta1: T, beta2: T, eps: T) -> Result<Self> {
        let open = |b: T| b > T::zero() && b < T::one();
        if !open(beta1) || !open(beta2) {
            return Err(contract_err!("Adam betas must lie in (0, 1), got {beta1} and {beta2}"));
        }
        let zeros: Vec<Tensor<T>> = store.iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect();
        Ok(Self { lr, beta1, beta2, eps, step: 0, m: zeros.clone(), v: zeros })
    }

    /// Defaults used by the training protocol: lr 2e-4, betas (0.5, 0.999).
    pub fn gan_default(store: &ParamStore<T>) -> Result<Self> {
        Self::new(store, T::lit(2e-4), T::lit(0.5), T::lit(0.999), T::lit(1e-8))
    }
}

/// One Adam update of every trainable parameter. Gradients are left in place.
pub fn adam_step<T: Scalar>(store: &mut ParamStore<T>, state: &mut AdamState<T>) -> Result<()> {
    if state.m.len() != store.len() {
        return Err(contract_err!("Adam state tracks {} parameters, store has {}", state.m.len(), store.len()));
    }
    if let Some(p) = store.iter().find(|p| p.requires_grad && p.grad.is_none()) {
        return Err(contract_err!("parameter `{}` has no gradient", p.name));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = T::one() - state.beta1.powi(t);
    let bc2 = T::one() - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);
    for ((p, m), v) in store.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        if !p.requires_grad {
            continue;
        }
        let g = p.grad.as_ref().expect("checked above");
        let iter = p.value.data_mut().iter_mut().zip(g.data()).zip(m.data_mut().iter_mut().zip(v.data_mut()));
        for ((theta, &gi), (mi, vi)) in iter {
            *mi = b1 * *mi + (T::one() - b1) * gi;
            *vi = b2 * *vi + (T::one() - b2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Clamps every parameter value into `[-c, c]`.
pub fn weight_clip<T: Scalar>(store: &mut ParamStore<T>, c: T) -> Result<()> {
    if !(c > T::zero()) {
        return Err(contract_err!("clip bound must be positive, got {c}"));
    }
    for p in store.iter_mut() {
        p.value.data_mut().iter_mut().for_each(|v| *v = v.max(-c).min(c));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Graph;
    use crate::rng::Rng;

    fn single(values: &[f64]) -> (ParamStore<f64>, crate::param::ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("theta", Tensor::from_f64(vec![values.len()], values).unwrap()).unwrap();
        (s, id)
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let (mut s, id) = single(&[0.5, -0.5, 2.0]);
        s.get_mut(id).grad = Some(Tensor::from_f64(vec![3], &[3.0, -0.01, 1e3]).unwrap());
        let mut st = AdamState::new(&s, 0.001, 0.9, 0.999, 1e-8).unwrap();
        let before = s.get(id).value.clone();
        adam_step(&mut s, &mut st).unwrap();
        let after = &s.get(id).value;
        for ((b, a), sign) in before.data().iter().zip(after.data()).zip([1.0, -1.0, 1.0]) {
            assert!((a - b + 0.001 * sign).abs() < 1e-5);
        }
        assert_eq!(st.step, 1);
        assert!(s.get(id).grad.is_some(), "grads untouched");
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let (mut s, id) = single(&[0.25, 7.0]);
        s.get_mut(id).grad = Some(Tensor::zeros(vec![2]));
        let mut st = AdamState::new(&s, 0.1, 0.5, 0.999, 1e-8).unwrap();
        adam_step(&mut s, &mut st).unwrap();
        assert_eq!(s.get(id).value.data(), &[0.25, 7.0]);
    }

    #[test]
    fn missing_gradient_is_contract_error() {
        let (mut s, _) = single(&[1.0]);
        let mut st = AdamState::gan_default(&s).unwrap();
        assert!(adam_step(&mut s, &mut st).is_err());
    }

    #[test]
    fn rejects_betas_outside_open_interval() {
        let (s, _) = single(&[1.0]);
        assert!(AdamState::new(&s, 0.1, 1.0, 0.9, 1e-8).is_err());
        assert!(AdamState::new(&s, 0.1, 0.5, 0.0, 1e-8).is_err());
    }

    /// Scalar Adam written out longhand.
    fn reference_trace(theta0: f64, lr: f64, steps: usize) -> Vec<f64> {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut th, mut m, mut v) = (theta0, 0.0, 0.0);
        let mut out = Vec::new();
        for t in 1..=steps {
            let g = 2.0 * th;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            th -= lr * mh / (vh.sqrt() + eps);
            out.push(th);
        }
        out
    }

    #[test]
    fn quadratic_descent_matches_scalar_reference() {
        let (mut s, id) = single(&[1.0]);
        let mut st = AdamState::new(&s, 0.1, 0.9, 0.999, 1e-8).unwrap();
        let want = reference_trace(1.0, 0.1, 10);
        let mut prev = 1.0f64;
        for &w in &want {
            let mut g = Graph::new();
            let th = g.param(&s, id);
            let sq = g.square(th).unwrap();
            let l = g.sum(sq).unwrap();
            g.backward(l).unwrap().accumulate_into(&g, &mut s);
            adam_step(&mut s, &mut st).unwrap();
            s.zero_grad();
            let now = s.get(id).value.data()[0];
            assert!(now.abs() < prev.abs(), "|theta| must shrink");
            assert!((now - w).abs() < 1e-14);
            prev = now;
        }
        assert!((prev - 0.0).abs() < 0.1);
    }

    #[test]
    fn clip_examples() {
        let (mut s, id) = single(&[-2.0, 0.0, 2.0]);
        weight_clip(&mut s, 0.01).unwrap();
        assert_eq!(s.get(id).value.data(), &[-0.01, 0.0, 0.01]);
        let (mut s, id) = single(&[0.001, -0.002]);
        weight_clip(&mut s, 0.01).unwrap();
        assert_eq!(s.get(id).value.data(), &[0.001, -0.002]);
        assert!(weight_clip(&mut s, 0.0).is_err());
    }

    #[test]
    fn clip_random_tensor_hits_bound() {
        let mut r = Rng::new(3);
        let vals: Vec<f64> = (0..200).map(|_| r.uniform_range(-0.2, 0.2)).collect();
        let exceeded = vals.iter().any(|v| v.abs() > 0.05);
        let (mut s, id) = single(&vals);
        weight_clip(&mut s, 0.05).unwrap();
        let out = s.get(id).value.data();
        let max = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(exceeded);
        assert_eq!(max, 0.05);
        for (o, v) in out.iter().zip(&vals) {
            assert_eq!(*o, v.clamp(-0.05, 0.05));
        }
    }
}
