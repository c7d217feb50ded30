//! Central finite-difference checks of every differentiable operator in
//! 64-bit, with random instances.
//!
//! Each case builds one or more outputs from a set of input tensors. The
//! outputs are projected onto fixed random directions to get a scalar, whose
//! analytic gradient (from the tape) is compared against the numerical one
//! through `‖a − n‖ / max(‖a‖, ‖n‖)`.

use crate::autograd::{BnMode, Graph, RunningStats, Var};
use crate::error::Result;
use crate::gan::{discriminator_loss, generator_loss, LossKind};
use crate::octave::{octave_conv_forward, soft_octave_conv_forward, OctaveConvParams, OctaveFeature, SoftOctaveConvParams};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const TOLERANCE: f64 = 1e-5;
pub const DEFAULT_INSTANCES: usize = 20;
const STEP: f64 = 1e-6;

/// Builds the outputs of one case from its inputs (bound as graph leaves).
pub type Build = dyn Fn(&mut Graph<f64>, &[Var]) -> Result<Vec<Var>>;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub op: &'static str,
    pub instances: usize,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < TOLERANCE
    }
}

fn projected(g: &mut Graph<f64>, build: &Build, inputs: &[Tensor<f64>], dirs: &mut Vec<Tensor<f64>>, rng: &mut Rng) -> Result<(Var, Vec<Var>)> {
    let leaves: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let outs = build(g, &leaves)?;
    let mut total = None;
    for (i, &o) in outs.iter().enumerate() {
        if dirs.len() <= i {
            let shape = g.shape(o).to_vec();
            dirs.push(Tensor::from_fn(shape, |_| rng.uniform_range(-1.0, 1.0)));
        }
        let d = g.constant(dirs[i].clone());
        let p = g.mul(o, d)?;
        let s = g.sum(p)?;
        total = Some(match total {
            None => s,
            Some(t) => g.add(t, s)?,
        });
    }
    Ok((total.expect("case has at least one output"), leaves))
}

/// Relative gradient error of one case.
pub fn check_case(build: &Build, inputs: &[Tensor<f64>], rng: &mut Rng) -> Result<f64> {
    let mut dirs = Vec::new();
    let mut g = Graph::new();
    let (loss, leaves) = projected(&mut g, build, inputs, &mut dirs, rng)?;
    let grads = g.backward(loss)?;
    let eval = |inputs: &[Tensor<f64>], dirs: &mut Vec<Tensor<f64>>, rng: &mut Rng| -> Result<f64> {
        let mut g = Graph::new();
        let (l, _) = projected(&mut g, build, inputs, dirs, rng)?;
        Ok(g.value(l).data()[0])
    };
    let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
    let mut work = inputs.to_vec();
    for (i, leaf) in leaves.iter().enumerate() {
        let zeros = Tensor::zeros(inputs[i].shape().to_vec());
        let analytic = grads.get(*leaf).unwrap_or(&zeros).clone();
        for j in 0..inputs[i].len() {
            let x0 = inputs[i].data()[j];
            work[i].data_mut()[j] = x0 + STEP;
            let up = eval(&work, &mut dirs, rng)?;
            work[i].data_mut()[j] = x0 - STEP;
            let down = eval(&work, &mut dirs, rng)?;
            work[i].data_mut()[j] = x0;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic.data()[j];
            diff2 += (a - numeric).powi(2);
            a2 += a * a;
            n2 += numeric * numeric;
        }
    }
    let scale = a2.sqrt().max(n2.sqrt());
    Ok(if scale == 0.0 { 0.0 } else { diff2.sqrt() / scale })
}

fn uniform(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.uniform_range(-1.0, 1.0))
}

/// Uniform values kept at least `gap` away from zero, for kinked activations.
fn off_kink(rng: &mut Rng, shape: &[usize], gap: f64) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| {
        let v = rng.uniform_range(gap, 2.0);
        if rng.uniform() < 0.5 {
            -v
        } else {
            v
        }
    })
}

pub struct Case {
    pub build: Box<Build>,
    pub inputs: Vec<Tensor<f64>>,
}

fn case(inputs: Vec<Tensor<f64>>, build: impl Fn(&mut Graph<f64>, &[Var]) -> Result<Vec<Var>> + 'static) -> Case {
    Case { build: Box::new(build), inputs }
}

fn conv_case(rng: &mut Rng, transposed: bool) -> Case {
    let (n, cin, cout) = (1 + rng.below(2), 1 + rng.below(3), 1 + rng.below(3));
    let k = 1 + rng.below(3);
    let stride = 1 + rng.below(2);
    let pad = rng.below(k);
    let h = k + rng.below(4);
    let w = k + rng.below(4);
    let bias = rng.uniform() < 0.5;
    let kshape = if transposed { [cin, cout, k, k] } else { [cout, cin, k, k] };
    let mut inputs = vec![uniform(rng, &[n, cin, h, w]), uniform(rng, &kshape)];
    if bias {
        inputs.push(uniform(rng, &[cout]));
    }
    case(inputs, move |g, v| {
        let b = v.get(2).copied();
        let y = if transposed { g.conv_transpose2d(v[0], v[1], b, stride, pad)? } else { g.conv2d(v[0], v[1], b, stride, pad)? };
        Ok(vec![y])
    })
}

fn resample_case(rng: &mut Rng, pool: bool) -> Case {
    let (n, c) = (1 + rng.below(2), 1 + rng.below(3));
    let k = 2 + rng.below(2);
    let (h, w) = if pool { (k * (1 + rng.below(3)), k * (1 + rng.below(3))) } else { (1 + rng.below(4), 1 + rng.below(4)) };
    case(vec![uniform(rng, &[n, c, h, w])], move |g, v| {
        Ok(vec![if pool { g.avg_pool2d(v[0], k)? } else { g.upsample_nearest2d(v[0], k)? }])
    })
}

fn batch_norm_case(rng: &mut Rng) -> Case {
    let (n, c, h, w) = (2 + rng.below(2), 1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(3));
    let gamma = Tensor::from_fn(vec![c], |_| rng.uniform_range(0.5, 1.5));
    let x = uniform(rng, &[n, c, h, w]).map(|v| v * 2.0);
    case(vec![x, gamma, uniform(rng, &[c])], move |g, v| {
        let mut stats = RunningStats::new(c);
        Ok(vec![g.batch_norm2d(v[0], v[1], v[2], &mut stats, BnMode::Train, 0.1, 1e-5)?])
    })
}

fn activation_case(rng: &mut Rng, which: usize) -> Case {
    let shape = [1 + rng.below(3), 2, 1 + rng.below(3), 2];
    let x = if which < 2 { off_kink(rng, &shape, 0.05) } else { uniform(rng, &shape).map(|v| v * 3.0) };
    case(vec![x], move |g, v| {
        Ok(vec![match which {
            0 => g.relu(v[0])?,
            1 => g.leaky_relu(v[0], 0.2)?,
            2 => g.tanh(v[0])?,
            3 => g.sigmoid(v[0])?,
            _ => g.log_sigmoid(v[0])?,
        }])
    })
}

fn linear_case(rng: &mut Rng) -> Case {
    let (n, fin, fout) = (1 + rng.below(3), 1 + rng.below(5), 1 + rng.below(4));
    case(vec![uniform(rng, &[n, fin]), uniform(rng, &[fout, fin]), uniform(rng, &[fout])], |g, v| {
        Ok(vec![g.linear(v[0], v[1], Some(v[2]))?])
    })
}

fn arithmetic_case(rng: &mut Rng) -> Case {
    let shape = [1 + rng.below(2), 1 + rng.below(3), 2, 1 + rng.below(3)];
    let s = rng.uniform_range(-2.0, 2.0);
    case(vec![uniform(rng, &shape), uniform(rng, &shape)], move |g, v| {
        let a = g.add(v[0], v[1])?;
        let m = g.mul(a, v[1])?;
        let d = g.sub(m, v[0])?;
        let q = g.square(d)?;
        let q = g.scale(q, s)?;
        let q = g.add_scalar(q, s)?;
        let mean = g.mean(v[0])?;
        Ok(vec![q, mean])
    })
}

fn structural_case(rng: &mut Rng) -> Case {
    let (n, c1, c2) = (1 + rng.below(2), 1 + rng.below(3), 1 + rng.below(3));
    let (h, w) = (1 + rng.below(3), 1 + rng.below(3));
    case(vec![uniform(rng, &[n, c1, h, w]), uniform(rng, &[n, c2, h, w])], move |g, v| {
        let cat = g.concat_channels(&[v[0], v[1]])?;
        let part = g.narrow_channels(cat, c1.saturating_sub(1), 2.min(c1 + c2 - c1.saturating_sub(1)))?;
        let flat = g.reshape(cat, vec![n, (c1 + c2) * h * w])?;
        Ok(vec![part, flat])
    })
}

fn octave_case(rng: &mut Rng, soft: bool) -> Case {
    let transposed = rng.uniform() < 0.3;
    let (stride, pad, k) = if transposed || rng.uniform() < 0.4 { (2, 1, 4) } else { (1, 1, 3) };
    let alphas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let (alpha_in, alpha_out) = if soft {
        match rng.below(3) {
            0 => (0.5, 0.5),
            1 => (0.0, 0.5),
            _ => (0.5, 0.0),
        }
    } else {
        (alphas[rng.below(5)], alphas[rng.below(5)])
    };
    let (cin, cout) = (2 + rng.below(3), 2 + rng.below(3));
    let (ih, il) = crate::octave::split_channels(cin, alpha_in);
    let (oh, ol) = crate::octave::split_channels(cout, alpha_out);
    let n = 1 + rng.below(2);
    let size = 4;
    let mut inputs = Vec::new();
    let mut slots = [usize::MAX; 6];
    let mut push = |slot: usize, t: Tensor<f64>, inputs: &mut Vec<Tensor<f64>>| {
        slots[slot] = inputs.len();
        inputs.push(t);
    };
    if ih > 0 {
        push(0, uniform(rng, &[n, ih, size, size]), &mut inputs);
    }
    if il > 0 {
        push(1, uniform(rng, &[n, il, size / 2, size / 2]), &mut inputs);
    }
    let bank = |i: usize, o: usize| if transposed { [i, o, k, k] } else { [o, i, k, k] };
    for (slot, (i, o)) in [(ih, oh), (ih, ol), (il, oh), (il, ol)].into_iter().enumerate() {
        if i > 0 && o > 0 {
            push(2 + slot, uniform(rng, &bank(i, o)), &mut inputs);
        }
    }
    let (beta_low, beta_high) = (rng.uniform_range(0.0, 1.5), rng.uniform_range(0.0, 1.5));
    case(inputs, move |g, v| {
        let get = |s: usize| (slots[s] != usize::MAX).then(|| v[slots[s]]);
        let f = OctaveFeature { high: get(0), low: get(1) };
        let base = OctaveConvParams {
            w_hh: get(2),
            w_hl: get(3),
            w_lh: get(4),
            w_ll: get(5),
            alpha_in,
            alpha_out,
            stride,
            padding: pad,
            transposed,
        };
        let out = if soft {
            soft_octave_conv_forward(g, f, &SoftOctaveConvParams { base, beta_low, beta_high })?
        } else {
            octave_conv_forward(g, f, &base)?
        };
        Ok(out.high.into_iter().chain(out.low).collect())
    })
}

fn loss_case(rng: &mut Rng, kind: LossKind) -> Case {
    let n = 1 + rng.below(6);
    let scores = |rng: &mut Rng| Tensor::from_fn(vec![n, 1], |_| rng.uniform_range(-4.0, 4.0));
    let inputs = vec![scores(rng), scores(rng), scores(rng)];
    case(inputs, move |g, v| Ok(vec![discriminator_loss(g, kind, v[0], v[1])?, generator_loss(g, kind, v[2])?]))
}

pub type Maker = fn(&mut Rng) -> Case;

/// Every checked operator with its instance generator.
pub fn operators() -> Vec<(&'static str, Maker)> {
    vec![
        ("conv2d", |r| conv_case(r, false)),
        ("conv_transpose2d", |r| conv_case(r, true)),
        ("avg_pool2d", |r| resample_case(r, true)),
        ("upsample_nearest2d", |r| resample_case(r, false)),
        ("batch_norm2d", batch_norm_case),
        ("relu", |r| activation_case(r, 0)),
        ("leaky_relu", |r| activation_case(r, 1)),
        ("tanh", |r| activation_case(r, 2)),
        ("sigmoid", |r| activation_case(r, 3)),
        ("log_sigmoid", |r| activation_case(r, 4)),
        ("linear", linear_case),
        ("arithmetic", arithmetic_case),
        ("concat_narrow_reshape", structural_case),
        ("octave_conv", |r| octave_case(r, false)),
        ("soft_octave_conv", |r| octave_case(r, true)),
        ("vanilla_losses", |r| loss_case(r, LossKind::Vanilla)),
        ("lsgan_losses", |r| loss_case(r, LossKind::Lsgan)),
        ("wgan_losses", |r| loss_case(r, LossKind::Wgan)),
    ]
}

pub fn check_operator(op: &'static str, make: Maker, instances: usize, seed: u64) -> Result<GradCheckReport> {
    let mut rng = Rng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let c = make(&mut rng);
        worst = worst.max(check_case(&*c.build, &c.inputs, &mut rng)?);
    }
    Ok(GradCheckReport { op, instances, max_rel_err: worst })
}

/// Runs the whole suite; one report per operator.
pub fn run_gradcheck(instances: usize, seed: u64) -> Result<Vec<GradCheckReport>> {
    operators()
        .into_iter()
        .enumerate()
        .map(|(i, (op, make))| check_operator(op, make, instances, seed.wrapping_add(i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_operator_passes() {
        for r in run_gradcheck(DEFAULT_INSTANCES, 11).unwrap() {
            assert!(r.passed(), "{} max rel err {:e}", r.op, r.max_rel_err);
            assert_eq!(r.instances, DEFAULT_INSTANCES);
        }
    }

    #[test]
    fn detached_path_is_caught() {
        let mut rng = Rng::new(1);
        let x = Tensor::from_fn(vec![3], |i| i as f64 + 0.5);
        // The output depends on x only through a constant, so the tape sees no gradient.
        let build = |g: &mut Graph<f64>, v: &[Var]| {
            let c = g.constant(g.value(v[0]).map(|t| t * t));
            Ok(vec![g.add(c, v[0])?])
        };
        assert!(check_case(&build, &[x], &mut rng).unwrap() > 0.1);
    }
}
