//! Forward evaluation and reverse-mode gradients.
//!
//! [`Evaluator`] owns the activation buffers for one spec so repeated
//! evaluations (the sampler's hot loop, SGD steps, per-point input gradients)
//! allocate nothing. It borrows the spec and takes parameters per call, so a
//! `ParameterSet` can be shared read-only between any number of evaluators.

use crate::error::{Error, Result};
use crate::nn::params::{LayerParams, ParameterSet};
use crate::nn::spec::{LayerKind, NetworkSpec, KERNEL};

/// Loss whose parameter gradient [`Evaluator::accumulate_gradient`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Two-logit cross-entropy, i.e. `log(1 + exp(-y g))`.
    Logistic,
    /// Negative signed margin `-y g`.
    NegMargin,
}

pub struct Evaluator<'s> {
    spec: &'s NetworkSpec,
    param_index: Vec<Option<usize>>,
    acts: Vec<Vec<f64>>,
    argmax: Vec<Vec<u32>>,
    upstream: Vec<f64>,
    downstream: Vec<f64>,
}

impl<'s> Evaluator<'s> {
    pub fn new(spec: &'s NetworkSpec) -> Self {
        let mut next_param = 0;
        let param_index = spec
            .layers()
            .iter()
            .map(|l| {
                l.is_parametric().then(|| {
                    next_param += 1;
                    next_param - 1
                })
            })
            .collect();
        let acts = (0..spec.layers().len())
            .map(|i| vec![0.0; spec.output_shape(i).iter().product()])
            .collect();
        let argmax = spec
            .layers()
            .iter()
            .enumerate()
            .map(|(i, l)| match l {
                LayerKind::MaxPool2x2 => vec![0; spec.output_shape(i).iter().product()],
                _ => Vec::new(),
            })
            .collect();
        Evaluator {
            spec,
            param_index,
            acts,
            argmax,
            upstream: Vec::new(),
            downstream: Vec::new(),
        }
    }

    pub fn spec(&self) -> &NetworkSpec {
        self.spec
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.spec.input_len() {
            return Err(Error::Shape {
                layer: 0,
                kind: "input".into(),
                expected: self.spec.input_shape().to_vec(),
                got: vec![input.len()],
            });
        }
        Ok(())
    }

    /// Runs the network and returns the output of the last layer.
    pub fn forward<'a>(&'a mut self, params: &ParameterSet, input: &'a [f64]) -> Result<&'a [f64]> {
        self.check_input(input)?;
        let layers = self.spec.layers();
        for i in 0..layers.len() {
            let (done, rest) = self.acts.split_at_mut(i);
            let x: &[f64] = if i == 0 { input } else { &done[i - 1] };
            let out = &mut rest[0];
            let in_shape = self.spec.input_shape_of(i);
            match layers[i] {
                LayerKind::Conv5x5 { .. } => {
                    let p = &params.layers()[self.param_index[i].unwrap()];
                    conv_forward(p, x, in_shape, out);
                }
                LayerKind::MaxPool2x2 => pool_forward(x, in_shape, out, &mut self.argmax[i]),
                LayerKind::Relu => {
                    for (o, &v) in out.iter_mut().zip(x) {
                        *o = if v > 0.0 { v } else { 0.0 };
                    }
                }
                LayerKind::Flatten => out.copy_from_slice(x),
                LayerKind::Dense { .. } => {
                    let p = &params.layers()[self.param_index[i].unwrap()];
                    dense_forward(p, x, out);
                }
            }
        }
        Ok(match self.acts.last() {
            Some(a) => a,
            None => input,
        })
    }

    /// Logit difference `f_+1 - f_-1` (output 0 minus output 1).
    pub fn margin(&mut self, params: &ParameterSet, input: &[f64]) -> Result<f64> {
        let out = self.forward(params, input)?;
        logit_difference(out)
    }

    /// Returns `(g(x), grad_x g(x))`.
    pub fn input_gradient(
        &mut self,
        params: &ParameterSet,
        input: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let g = self.margin(params, input)?;
        self.backward(params, input, &[1.0, -1.0], None, true);
        Ok((g, self.upstream.clone()))
    }

    /// Adds `weight * dLoss/dParams` at `(input, label)` into `grads` and
    /// returns the loss value.
    pub fn accumulate_gradient(
        &mut self,
        params: &ParameterSet,
        input: &[f64],
        label: f64,
        loss: LossKind,
        weight: f64,
        grads: &mut ParameterSet,
    ) -> Result<f64> {
        if label != 1.0 && label != -1.0 {
            return Err(Error::Label(label));
        }
        let g = self.margin(params, input)?;
        let (value, dg) = match loss {
            LossKind::Logistic => (
                crate::sgd::logistic_loss(g, label),
                -label * sigmoid(-label * g),
            ),
            LossKind::NegMargin => (-label * g, -label),
        };
        let seed = [weight * dg, -weight * dg];
        self.backward(params, input, &seed, Some(grads), false);
        Ok(value)
    }

    /// Propagates `seed` (gradient w.r.t. the network output) back through the
    /// activations of the last `forward` call. Leaves the input gradient in
    /// `self.upstream` when `want_input` is set.
    fn backward(
        &mut self,
        params: &ParameterSet,
        input: &[f64],
        seed: &[f64],
        mut grads: Option<&mut ParameterSet>,
        want_input: bool,
    ) {
        let layers = self.spec.layers();
        self.upstream.clear();
        self.upstream.extend_from_slice(seed);
        for i in (0..layers.len()).rev() {
            if i == 0 && !want_input && !layers[0].is_parametric() {
                break;
            }
            let x: &[f64] = if i == 0 { input } else { &self.acts[i - 1] };
            let in_shape = self.spec.input_shape_of(i);
            let in_len: usize = in_shape.iter().product();
            let need_input = i > 0 || want_input;
            self.downstream.clear();
            self.downstream.resize(in_len, 0.0);
            let dout = &self.upstream;
            let dx = &mut self.downstream;
            match layers[i] {
                LayerKind::Conv5x5 { .. } => {
                    let k = self.param_index[i].unwrap();
                    let p = &params.layers()[k];
                    let g = grads.as_deref_mut().map(|g| &mut g.layers_mut()[k]);
                    conv_backward(p, x, in_shape, dout, g, need_input.then_some(dx));
                }
                LayerKind::MaxPool2x2 => {
                    for (&idx, &d) in self.argmax[i].iter().zip(dout) {
                        dx[idx as usize] += d;
                    }
                }
                LayerKind::Relu => {
                    for ((dxi, &d), &a) in dx.iter_mut().zip(dout).zip(&self.acts[i]) {
                        *dxi = if a > 0.0 { d } else { 0.0 };
                    }
                }
                LayerKind::Flatten => dx.copy_from_slice(dout),
                LayerKind::Dense { .. } => {
                    let k = self.param_index[i].unwrap();
                    let p = &params.layers()[k];
                    let g = grads.as_deref_mut().map(|g| &mut g.layers_mut()[k]);
                    dense_backward(p, x, dout, g, need_input.then_some(dx));
                }
            }
            std::mem::swap(&mut self.upstream, &mut self.downstream);
        }
    }
}

pub(crate) fn logit_difference(out: &[f64]) -> Result<f64> {
    match out {
        [a, b] => Ok(a - b),
        _ => Err(Error::InvalidArgument(format!(
            "margin needs 2 logits, network produces {}",
            out.len()
        ))),
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn conv_forward(p: &LayerParams, x: &[f64], in_shape: &[usize], out: &mut [f64]) {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (h - KERNEL + 1, w - KERNEL + 1);
    let plane = oh * ow;
    let weight = p.weight.data();
    for (oc, &b) in p.bias.data().iter().enumerate() {
        let o = &mut out[oc * plane..(oc + 1) * plane];
        o.fill(b);
        for ic in 0..c {
            let xin = &x[ic * h * w..(ic + 1) * h * w];
            let wk = &weight[(oc * c + ic) * KERNEL * KERNEL..][..KERNEL * KERNEL];
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let wv = wk[ky * KERNEL + kx];
                    for y in 0..oh {
                        let row_in = &xin[(y + ky) * w + kx..][..ow];
                        let row_out = &mut o[y * ow..(y + 1) * ow];
                        for (ro, &ri) in row_out.iter_mut().zip(row_in) {
                            *ro += wv * ri;
                        }
                    }
                }
            }
        }
    }
}

fn conv_backward(
    p: &LayerParams,
    x: &[f64],
    in_shape: &[usize],
    dout: &[f64],
    grads: Option<&mut LayerParams>,
    dx: Option<&mut Vec<f64>>,
) {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (h - KERNEL + 1, w - KERNEL + 1);
    let plane = oh * ow;
    let oc_count = p.bias.len();
    if let Some(g) = grads {
        let LayerParams { weight, bias } = g;
        let gw = weight.data_mut();
        let gb = bias.data_mut();
        for oc in 0..oc_count {
            let d = &dout[oc * plane..(oc + 1) * plane];
            gb[oc] += d.iter().sum::<f64>();
            for ic in 0..c {
                let xin = &x[ic * h * w..(ic + 1) * h * w];
                let base = (oc * c + ic) * KERNEL * KERNEL;
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        let mut acc = 0.0;
                        for y in 0..oh {
                            let row_in = &xin[(y + ky) * w + kx..][..ow];
                            let row_d = &d[y * ow..(y + 1) * ow];
                            acc += row_d.iter().zip(row_in).map(|(a, b)| a * b).sum::<f64>();
                        }
                        gw[base + ky * KERNEL + kx] += acc;
                    }
                }
            }
        }
    }
    if let Some(dx) = dx {
        let weight = p.weight.data();
        for oc in 0..oc_count {
            let d = &dout[oc * plane..(oc + 1) * plane];
            for ic in 0..c {
                let dxin = &mut dx[ic * h * w..(ic + 1) * h * w];
                let wk = &weight[(oc * c + ic) * KERNEL * KERNEL..][..KERNEL * KERNEL];
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        let wv = wk[ky * KERNEL + kx];
                        for y in 0..oh {
                            let row_d = &d[y * ow..(y + 1) * ow];
                            let row_x = &mut dxin[(y + ky) * w + kx..][..ow];
                            for (rx, &rd) in row_x.iter_mut().zip(row_d) {
                                *rx += wv * rd;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn pool_forward(x: &[f64], in_shape: &[usize], out: &mut [f64], argmax: &mut [u32]) {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (h / 2, w / 2);
    for ch in 0..c {
        for y in 0..oh {
            for xo in 0..ow {
                let mut best_idx = ch * h * w + 2 * y * w + 2 * xo;
                let mut best = x[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ch * h * w + (2 * y + dy) * w + 2 * xo + dx;
                    if x[idx] > best {
                        best = x[idx];
                        best_idx = idx;
                    }
                }
                let o = ch * oh * ow + y * ow + xo;
                out[o] = best;
                argmax[o] = best_idx as u32;
            }
        }
    }
}

fn dense_forward(p: &LayerParams, x: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    let weight = p.weight.data();
    for (o, (dst, &b)) in out.iter_mut().zip(p.bias.data()).enumerate() {
        let row = &weight[o * n_in..(o + 1) * n_in];
        *dst = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
}

fn dense_backward(
    p: &LayerParams,
    x: &[f64],
    dout: &[f64],
    grads: Option<&mut LayerParams>,
    dx: Option<&mut Vec<f64>>,
) {
    let n_in = x.len();
    if let Some(g) = grads {
        let LayerParams { weight, bias } = g;
        let gw = weight.data_mut();
        for (o, (&d, gb)) in dout.iter().zip(bias.data_mut()).enumerate() {
            *gb += d;
            if d != 0.0 {
                for (gwi, &xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                    *gwi += d * xi;
                }
            }
        }
    }
    if let Some(dx) = dx {
        let weight = p.weight.data();
        for (o, &d) in dout.iter().enumerate() {
            if d != 0.0 {
                for (dxi, &wi) in dx.iter_mut().zip(&weight[o * n_in..(o + 1) * n_in]) {
                    *dxi += d * wi;
                }
            }
        }
    }
}
