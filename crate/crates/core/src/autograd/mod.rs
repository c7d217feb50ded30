//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s in creation
//! order, so the reverse of that order is a valid topological order for the
//! backward sweep. Parameters are copied into the graph when bound and their
//! gradients are accumulated back into the owning [`ParamStore`] afterwards.

pub(crate) mod kernels;
mod norm;

use crate::error::{contract_err, dim_err, Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use kernels::ConvShape;

pub use norm::{BnMode, RunningStats};

/// Handle to a value recorded in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv2d { x: Var, k: Var, bias: Option<Var>, stride: usize, padding: usize },
    ConvTranspose2d { x: Var, k: Var, bias: Option<Var>, stride: usize, padding: usize },
    AvgPool { x: Var, k: usize },
    Upsample { x: Var, k: usize },
    BatchNorm { x: Var, gamma: Var, beta: Var, saved: norm::BnSaved<T> },
    Linear { x: Var, w: Var, bias: Option<Var> },
    Relu(Var),
    LeakyRelu(Var, T),
    Tanh(Var),
    Sigmoid(Var),
    LogSigmoid(Var),
    Square(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    Concat(Vec<Var>),
    Narrow { x: Var, start: usize },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    param: Option<(u64, ParamId)>,
}

/// Computation graph for one forward/backward pass.
#[derive(Debug)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    check_finite: bool,
    frozen: Vec<u64>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    /// New graph; finite-value checks follow the build's debug assertions.
    pub fn new() -> Self {
        Self { nodes: Vec::new(), check_finite: cfg!(debug_assertions), frozen: Vec::new() }
    }

    pub fn with_finite_checks(mut self, on: bool) -> Self {
        self.check_finite = on;
        self
    }

    /// Parameters of `store` bound after this call are treated as constants.
    pub fn freeze(&mut self, store: &ParamStore<T>) {
        self.frozen.push(store.tag());
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Result<Var> {
        if self.check_finite && !value.all_finite() {
            return Err(Error::Numeric(format!("non-finite output from {}", op_name(&op))));
        }
        self.nodes.push(Node { value, op, requires_grad, param: None });
        Ok(Var(self.nodes.len() - 1))
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.nodes.push(Node { value: t, op: Op::Leaf, requires_grad: false, param: None });
        Var(self.nodes.len() - 1)
    }

    /// Leaf whose gradient is tracked (inputs under test, latent codes).
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.nodes.push(Node { value: t, op: Op::Leaf, requires_grad: true, param: None });
        Var(self.nodes.len() - 1)
    }

    /// Binds a parameter; its gradient flows back through [`Gradients::accumulate_into`].
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        let p = store.get(id);
        self.nodes.push(Node {
            value: p.value.clone(),
            op: Op::Leaf,
            requires_grad: p.requires_grad && !self.frozen.contains(&store.tag()),
            param: Some((store.tag(), id)),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn conv2d(&mut self, x: Var, k: Var, bias: Option<Var>, stride: usize, padding: usize) -> Result<Var> {
        let s = self.conv_shape(x, k, bias, stride, padding, false)?;
        let mut out = vec![T::zero(); s.n * s.cout * s.ho * s.wo];
        kernels::conv2d_forward(
            &s,
            self.value(x).data(),
            self.value(k).data(),
            bias.map(|b| self.value(b).data()),
            &mut out,
        );
        let rg = self.any_grad(&[x, k]) || bias.is_some_and(|b| self.requires_grad(b));
        self.push(Tensor::new(vec![s.n, s.cout, s.ho, s.wo], out)?, Op::Conv2d { x, k, bias, stride, padding }, rg)
    }

    /// Transposed convolution with kernel layout `[Cin, Cout, kH, kW]`.
    pub fn conv_transpose2d(&mut self, x: Var, k: Var, bias: Option<Var>, stride: usize, padding: usize) -> Result<Var> {
        let s = self.conv_shape(x, k, bias, stride, padding, true)?;
        let mut out = vec![T::zero(); s.n * s.cout * s.ho * s.wo];
        kernels::conv_transpose2d_forward(
            &s,
            self.value(x).data(),
            self.value(k).data(),
            bias.map(|b| self.value(b).data()),
            &mut out,
        );
        let rg = self.any_grad(&[x, k]) || bias.is_some_and(|b| self.requires_grad(b));
        self.push(
            Tensor::new(vec![s.n, s.cout, s.ho, s.wo], out)?,
            Op::ConvTranspose2d { x, k, bias, stride, padding },
            rg,
        )
    }

    fn conv_shape(&self, x: Var, k: Var, bias: Option<Var>, stride: usize, padding: usize, transposed: bool) -> Result<ConvShape> {
        let (n, cin, h, w) = self.value(x).dims4()?;
        let (k0, k1, kh, kw) = self.value(k).dims4()?;
        if stride == 0 {
            return Err(contract_err!("stride must be at least 1"));
        }
        let (kcin, cout) = if transposed { (k0, k1) } else { (k1, k0) };
        if kcin != cin {
            return Err(dim_err!("input has {cin} channels but kernel expects {kcin}"));
        }
        if let Some(b) = bias {
            if self.shape(b) != [cout] {
                return Err(dim_err!("bias shape {:?}, expected [{cout}]", self.shape(b)));
            }
        }
        let (ho, wo) = if transposed {
            let span_h = (h.saturating_sub(1)) * stride + kh;
            let span_w = (w.saturating_sub(1)) * stride + kw;
            if span_h <= 2 * padding || span_w <= 2 * padding {
                return Err(dim_err!("transposed conv output would be empty"));
            }
            (span_h - 2 * padding, span_w - 2 * padding)
        } else {
            if kh > h + 2 * padding || kw > w + 2 * padding {
                return Err(dim_err!("kernel {kh}x{kw} larger than padded input {h}x{w} (padding {padding})"));
            }
            ((h + 2 * padding - kh) / stride + 1, (w + 2 * padding - kw) / stride + 1)
        };
        Ok(ConvShape { n, cin, h, w, cout, kh, kw, stride, padding, ho, wo })
    }

    pub fn avg_pool2d(&mut self, x: Var, k: usize) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4()?;
        if k == 0 || h % k != 0 || w % k != 0 {
            return Err(dim_err!("spatial dims {h}x{w} not divisible by pool size {k}"));
        }
        let mut out = vec![T::zero(); n * c * (h / k) * (w / k)];
        kernels::avg_pool(self.value(x).data(), n * c, h, w, k, &mut out);
        let rg = self.requires_grad(x);
        self.push(Tensor::new(vec![n, c, h / k, w / k], out)?, Op::AvgPool { x, k }, rg)
    }

    pub fn upsample_nearest2d(&mut self, x: Var, k: usize) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4()?;
        if k == 0 {
            return Err(contract_err!("upsample factor must be at least 1"));
        }
        let mut out = vec![T::zero(); n * c * h * k * w * k];
        kernels::upsample_nearest(self.value(x).data(), n * c, h, w, k, &mut out);
        let rg = self.requires_grad(x);
        self.push(Tensor::new(vec![n, c, h * k, w * k], out)?, Op::Upsample { x, k }, rg)
    }

    /// Batch normalization over the N, H, W axes of each channel.
    ///
    /// In train mode the running statistics are updated with `momentum`
    /// (unbiased variance); eval mode reads them.
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm2d(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running: &mut RunningStats<T>,
        mode: BnMode,
        momentum: T,
        eps: T,
    ) -> Result<Var> {
        let (out, saved) = norm::forward(self.value(x), self.value(gamma), self.value(beta), running, mode, momentum, eps)?;
        let rg = self.any_grad(&[x, gamma, beta]);
        self.push(out, Op::BatchNorm { x, gamma, beta, saved }, rg)
    }

    /// `x[N, In] · wᵀ + bias` with `w` shaped `[Out, In]`.
    pub fn linear(&mut self, x: Var, w: Var, bias: Option<Var>) -> Result<Var> {
        let (n, fin) = match self.shape(x) {
            &[n, f] => (n, f),
            s => return Err(dim_err!("linear input must be [N, In], got {s:?}")),
        };
        let (fout, win) = match self.shape(w) {
            &[o, i] => (o, i),
            s => return Err(dim_err!("linear weight must be [Out, In], got {s:?}")),
        };
        if win != fin {
            return Err(dim_err!("linear weight expects {win} inputs, got {fin}"));
        }
        if let Some(b) = bias {
            if self.shape(b) != [fout] {
                return Err(dim_err!("linear bias shape {:?}, expected [{fout}]", self.shape(b)));
            }
        }
        let mut out = vec![T::zero(); n * fout];
        T::gemm(n, fin, fout, self.value(x).data(), (fin as isize, 1), self.value(w).data(), (1, fin as isize), &mut out, (fout as isize, 1), false);
        if let Some(b) = bias {
            let bv = self.value(b).data();
            for row in out.chunks_exact_mut(fout) {
                row.iter_mut().zip(bv).for_each(|(o, &b)| *o = *o + b);
            }
        }
        let rg = self.any_grad(&[x, w]) || bias.is_some_and(|b| self.requires_grad(b));
        self.push(Tensor::new(vec![n, fout], out)?, Op::Linear { x, w, bias }, rg)
    }

    fn unary(&mut self, x: Var, f: impl Fn(T) -> T, op: Op<T>) -> Result<Var> {
        let out = self.value(x).map(f);
        let rg = self.requires_grad(x);
        self.push(out, op, rg)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(x, |v| v.max(T::zero()), Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: T) -> Result<Var> {
        self.unary(x, move |v| if v > T::zero() { v } else { v * slope }, Op::LeakyRelu(x, slope))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(x, |v| v.tanh(), Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    /// `log σ(x)`, evaluated without overflow for large `|x|`.
    pub fn log_sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(x, log_sigmoid, Op::LogSigmoid(x))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.unary(x, |v| v * v, Op::Square(x))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Result<Var> {
        self.unary(x, move |v| v * s, Op::Scale(x, s))
    }

    pub fn add_scalar(&mut self, x: Var, s: T) -> Result<Var> {
        self.unary(x, move |v| v + s, Op::AddScalar(x))
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(dim_err!("element-wise op on {:?} and {:?}", va.shape(), vb.shape()));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&p, &q)| f(p, q)).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.any_grad(&[a, b]);
        self.push(out, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |p, q| p - q, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |p, q| p * q, Op::Mul(a, b))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        let rg = self.requires_grad(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.is_empty() {
            return Err(contract_err!("mean of an empty tensor"));
        }
        let m = t.sum() / T::lit(t.len() as f64);
        let rg = self.requires_grad(x);
        self.push(Tensor::scalar(m), Op::Mean(x), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?;
        let rg = self.requires_grad(x);
        self.push(out, Op::Reshape(x), rg)
    }

    /// Concatenates NCHW tensors along the channel axis.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| contract_err!("concat of zero tensors"))?;
        let (n, _, h, w) = self.value(*first).dims4()?;
        let mut total = 0;
        for &p in parts {
            let (pn, pc, ph, pw) = self.value(p).dims4()?;
            if (pn, ph, pw) != (n, h, w) {
                return Err(dim_err!("concat of {:?} with {:?}", self.shape(*first), self.shape(p)));
            }
            total += pc;
        }
        let plane = h * w;
        let mut out = Vec::with_capacity(n * total * plane);
        for b in 0..n {
            for &p in parts {
                let t = self.value(p);
                let c = t.shape()[1];
                out.extend_from_slice(&t.data()[b * c * plane..(b + 1) * c * plane]);
            }
        }
        let rg = self.any_grad(parts);
        self.push(Tensor::new(vec![n, total, h, w], out)?, Op::Concat(parts.to_vec()), rg)
    }

    /// Channels `[start, start + count)` of an NCHW tensor.
    pub fn narrow_channels(&mut self, x: Var, start: usize, count: usize) -> Result<Var> {
        let out = self.value(x).narrow_channels(start, count)?;
        let rg = self.requires_grad(x);
        self.push(out, Op::Narrow { x, start }, rg)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(contract_err!("backward needs a scalar loss, got shape {:?}", lv.shape()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lv.shape().to_vec(), T::one()));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let node = &self.nodes[idx];
        let out = &node.value;
        let mut acc = GradSink { graph: self, grads };
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, k, bias, stride, padding } | Op::ConvTranspose2d { x, k, bias, stride, padding } => {
                let transposed = matches!(node.op, Op::ConvTranspose2d { .. });
                let s = self.conv_shape(*x, *k, *bias, *stride, *padding, transposed)?;
                let mut gx = acc.wants(*x).then(|| vec![T::zero(); self.value(*x).len()]);
                let mut gk = acc.wants(*k).then(|| vec![T::zero(); self.value(*k).len()]);
                let mut gb = bias.filter(|b| acc.wants(*b)).map(|_| vec![T::zero(); s.cout]);
                let f = if transposed { kernels::conv_transpose2d_backward } else { kernels::conv2d_backward };
                f(
                    &s,
                    self.value(*x).data(),
                    self.value(*k).data(),
                    g.data(),
                    gx.as_deref_mut(),
                    gk.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                acc.add_vec(*x, gx);
                acc.add_vec(*k, gk);
                if let Some(b) = bias {
                    acc.add_vec(*b, gb);
                }
            }
            Op::AvgPool { x, k } => {
                if acc.wants(*x) {
                    let (n, c, h, w) = self.value(*x).dims4()?;
                    let mut gx = vec![T::zero(); n * c * h * w];
                    kernels::avg_pool_backward(g.data(), n * c, h, w, *k, &mut gx);
                    acc.add_vec(*x, Some(gx));
                }
            }
            Op::Upsample { x, k } => {
                if acc.wants(*x) {
                    let (n, c, h, w) = self.value(*x).dims4()?;
                    let mut gx = vec![T::zero(); n * c * h * w];
                    kernels::upsample_nearest_backward(g.data(), n * c, h, w, *k, &mut gx);
                    acc.add_vec(*x, Some(gx));
                }
            }
            Op::BatchNorm { x, gamma, beta, saved } => {
                let (gx, gg, gb) = norm::backward(self.value(*x), self.value(*gamma), saved, g)?;
                acc.add_vec(*x, Some(gx));
                acc.add_vec(*gamma, Some(gg));
                acc.add_vec(*beta, Some(gb));
            }
            Op::Linear { x, w, bias } => {
                let xv = self.value(*x);
                let wv = self.value(*w);
                let (n, fin) = (xv.shape()[0], xv.shape()[1]);
                let fout = wv.shape()[0];
                if acc.wants(*x) {
                    let mut gx = vec![T::zero(); n * fin];
                    T::gemm(n, fout, fin, g.data(), (fout as isize, 1), wv.data(), (fin as isize, 1), &mut gx, (fin as isize, 1), false);
                    acc.add_vec(*x, Some(gx));
                }
                if acc.wants(*w) {
                    let mut gw = vec![T::zero(); fout * fin];
                    T::gemm(fout, n, fin, g.data(), (1, fout as isize), xv.data(), (fin as isize, 1), &mut gw, (fin as isize, 1), false);
                    acc.add_vec(*w, Some(gw));
                }
                if let Some(b) = bias {
                    if acc.wants(*b) {
                        let mut gb = vec![T::zero(); fout];
                        for row in g.data().chunks_exact(fout) {
                            gb.iter_mut().zip(row).for_each(|(a, &v)| *a = *a + v);
                        }
                        acc.add_vec(*b, Some(gb));
                    }
                }
            }
            Op::Relu(x) => acc.add_map(*x, g, |i, gv| if out.data()[i] > T::zero() { gv } else { T::zero() }),
            Op::LeakyRelu(x, slope) => {
                let xv = self.value(*x).data();
                acc.add_map(*x, g, |i, gv| if xv[i] > T::zero() { gv } else { gv * *slope })
            }
            Op::Tanh(x) => acc.add_map(*x, g, |i, gv| {
                let y = out.data()[i];
                gv * (T::one() - y * y)
            }),
            Op::Sigmoid(x) => acc.add_map(*x, g, |i, gv| {
                let y = out.data()[i];
                gv * y * (T::one() - y)
            }),
            Op::LogSigmoid(x) => {
                let xv = self.value(*x).data();
                acc.add_map(*x, g, |i, gv| gv * sigmoid(-xv[i]))
            }
            Op::Square(x) => {
                let xv = self.value(*x).data();
                acc.add_map(*x, g, |i, gv| gv * T::lit(2.0) * xv[i])
            }
            Op::Add(a, b) => {
                acc.add_map(*a, g, |_, gv| gv);
                acc.add_map(*b, g, |_, gv| gv);
            }
            Op::Sub(a, b) => {
                acc.add_map(*a, g, |_, gv| gv);
                acc.add_map(*b, g, |_, gv| -gv);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                acc.add_map(*a, g, |i, gv| gv * bv[i]);
                acc.add_map(*b, g, |i, gv| gv * av[i]);
            }
            Op::Scale(x, s) => acc.add_map(*x, g, |_, gv| gv * *s),
            Op::AddScalar(x) | Op::Reshape(x) => acc.add_map(*x, g, |_, gv| gv),
            Op::Sum(x) => {
                let gv = g.data()[0];
                let n = self.value(*x).len();
                acc.add_vec(*x, Some(vec![gv; n]));
            }
            Op::Mean(x) => {
                let n = self.value(*x).len();
                let gv = g.data()[0] / T::lit(n as f64);
                acc.add_vec(*x, Some(vec![gv; n]));
            }
            Op::Concat(parts) => {
                let (n, total, h, w) = out.dims4()?;
                let plane = h * w;
                let mut offset = 0;
                for &p in parts {
                    let c = self.value(p).shape()[1];
                    if acc.wants(p) {
                        let mut gp = Vec::with_capacity(n * c * plane);
                        for b in 0..n {
                            let base = (b * total + offset) * plane;
                            gp.extend_from_slice(&g.data()[base..base + c * plane]);
                        }
                        acc.add_vec(p, Some(gp));
                    }
                    offset += c;
                }
            }
            Op::Narrow { x, start } => {
                if acc.wants(*x) {
                    let (n, c, h, w) = self.value(*x).dims4()?;
                    let count = out.shape()[1];
                    let plane = h * w;
                    let mut gx = vec![T::zero(); n * c * plane];
                    for b in 0..n {
                        let dst = (b * c + start) * plane;
                        let src = b * count * plane;
                        gx[dst..dst + count * plane].copy_from_slice(&g.data()[src..src + count * plane]);
                    }
                    acc.add_vec(*x, Some(gx));
                }
            }
        }
        Ok(())
    }
}

struct GradSink<'a, T> {
    graph: &'a Graph<T>,
    grads: &'a mut [Option<Tensor<T>>],
}

impl<T: Scalar> GradSink<'_, T> {
    fn wants(&self, v: Var) -> bool {
        self.graph.nodes[v.0].requires_grad
    }

    fn add_vec(&mut self, v: Var, g: Option<Vec<T>>) {
        let Some(g) = g else { return };
        if !self.wants(v) {
            return;
        }
        match &mut self.grads[v.0] {
            Some(existing) => existing.data_mut().iter_mut().zip(&g).for_each(|(a, &b)| *a = *a + b),
            slot @ None => {
                let shape = self.graph.nodes[v.0].value.shape().to_vec();
                *slot = Some(Tensor::new(shape, g).expect("gradient matches value shape"));
            }
        }
    }

    fn add_map(&mut self, v: Var, g: &Tensor<T>, f: impl Fn(usize, T) -> T) {
        if !self.wants(v) {
            return;
        }
        let mapped = g.data().iter().enumerate().map(|(i, &gv)| f(i, gv)).collect();
        self.add_vec(v, Some(mapped));
    }
}

/// Result of [`Graph::backward`]: one optional gradient per graph node.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Adds the gradients of every parameter bound from `store`.
    pub fn accumulate_into(&self, graph: &Graph<T>, store: &mut ParamStore<T>) {
        let tag = store.tag();
        for (node, g) in graph.nodes.iter().zip(&self.grads) {
            if let (Some((t, id)), Some(g)) = (node.param, g) {
                if t == tag {
                    store.accumulate_grad(id, g);
                }
            }
        }
    }
}

pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn log_sigmoid<T: Scalar>(v: T) -> T {
    v.min(T::zero()) - (-v.abs()).exp().ln_1p()
}

fn op_name<T>(op: &Op<T>) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Conv2d { .. } => "conv2d",
        Op::ConvTranspose2d { .. } => "conv_transpose2d",
        Op::AvgPool { .. } => "avg_pool2d",
        Op::Upsample { .. } => "upsample_nearest2d",
        Op::BatchNorm { .. } => "batch_norm2d",
        Op::Linear { .. } => "linear",
        Op::Relu(_) => "relu",
        Op::LeakyRelu(..) => "leaky_relu",
        Op::Tanh(_) => "tanh",
        Op::Sigmoid(_) => "sigmoid",
        Op::LogSigmoid(_) => "log_sigmoid",
        Op::Square(_) => "square",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Scale(..) => "scale",
        Op::AddScalar(_) => "add_scalar",
        Op::Sum(_) => "sum",
        Op::Mean(_) => "mean",
        Op::Reshape(_) => "reshape",
        Op::Concat(_) => "concat_channels",
        Op::Narrow { .. } => "narrow_channels",
    }
}

#[cfg(test)]
mod tests;
