//! Small dense networks with hand-written reverse-mode gradients.
//!
//! Parameters live in one contiguous `f64` vector. Layer `l` occupies a
//! row-major `fan_out × fan_in` weight block followed by its `fan_out`
//! biases; layers are stored in order. The activation is applied after every
//! layer except the last.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

const ELU_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Elu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    ELU_ALPHA * z.exp_m1()
                }
            }
        }
    }

    /// Derivative given the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    a + ELU_ALPHA
                }
            }
        }
    }
}

/// Shape of a dense network. `hidden_sizes` lists hidden layers only; a final
/// linear layer to `output_dim` is always appended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

/// Offsets of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerSlot {
    fn end(&self) -> usize {
        self.bias_offset + self.fan_out
    }
}

impl NetSpec {
    pub fn new(
        input_dim: usize,
        hidden_sizes: Vec<usize>,
        output_dim: usize,
        activation: Activation,
    ) -> Result<Self> {
        let spec = Self {
            input_dim,
            hidden_sizes,
            output_dim,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Single affine layer `in → out`.
    pub fn linear(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_sizes: Vec::new(),
            output_dim,
            activation: Activation::Identity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_sizes.contains(&0) {
            return Err(Error::invalid(format!(
                "network dimensions must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for each layer including the appended output layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_sizes.len() + 1);
        let mut prev = self.input_dim;
        for &h in self.hidden_sizes.iter().chain(std::iter::once(&self.output_dim)) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }

    pub fn layout(&self) -> Vec<LayerSlot> {
        let mut offset = 0;
        self.layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let slot = LayerSlot {
                    fan_in,
                    fan_out,
                    weight_offset: offset,
                    bias_offset: offset + fan_in * fan_out,
                };
                offset = slot.end();
                slot
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    /// Parameter count excluding biases.
    pub fn weight_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o).sum()
    }

    fn widest(&self) -> usize {
        self.hidden_sizes
            .iter()
            .copied()
            .chain([self.input_dim, self.output_dim])
            .max()
            .unwrap_or(1)
    }
}

pub fn param_count(spec: &NetSpec) -> usize {
    spec.param_count()
}

/// Contiguous parameter vector for a [`NetSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlatParams(pub Vec<f64>);

impl FlatParams {
    pub fn zeros(spec: &NetSpec) -> Self {
        FlatParams(vec![0.0; spec.param_count()])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FlatParams {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for FlatParams {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// One layer in unpacked form. `weights` is row-major `fan_out × fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn unflatten(spec: &NetSpec, params: &[f64]) -> Result<Vec<Layer>> {
    check_params(spec, params)?;
    Ok(spec
        .layout()
        .into_iter()
        .map(|s| Layer {
            fan_in: s.fan_in,
            fan_out: s.fan_out,
            weights: params[s.weight_offset..s.bias_offset].to_vec(),
            bias: params[s.bias_offset..s.end()].to_vec(),
        })
        .collect())
}

pub fn flatten(layers: &[Layer]) -> FlatParams {
    let mut values = Vec::new();
    for layer in layers {
        values.extend_from_slice(&layer.weights);
        values.extend_from_slice(&layer.bias);
    }
    FlatParams(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Every weight and bias drawn from N(0, 1).
    StdNormal,
    /// Weights uniform in ±sqrt(6 / (fan_in + fan_out)), zero biases.
    XavierUniform,
    /// Weights from N(0, 2 / (fan_in + fan_out)), zero biases.
    XavierNormal,
    /// Weights and biases uniform in ±1/sqrt(fan_in) (the usual framework
    /// default for a fresh linear layer).
    FanInUniform,
}

impl InitScheme {
    pub fn name(self) -> &'static str {
        match self {
            InitScheme::StdNormal => "std_normal",
            InitScheme::XavierUniform => "xavier_uniform",
            InitScheme::XavierNormal => "xavier_normal",
            InitScheme::FanInUniform => "fan_in_uniform",
        }
    }
}

pub fn init_params(spec: &NetSpec, scheme: InitScheme, seed: u64) -> FlatParams {
    let mut rng = Stream::new(seed);
    let mut values = Vec::with_capacity(spec.param_count());
    for (fan_in, fan_out) in spec.layer_dims() {
        let fan_sum = (fan_in + fan_out) as f64;
        let n_weights = fan_in * fan_out;
        match scheme {
            InitScheme::StdNormal => {
                values.extend((0..n_weights + fan_out).map(|_| rng.normal()));
            }
            InitScheme::XavierUniform => {
                let bound = (6.0 / fan_sum).sqrt();
                values.extend((0..n_weights).map(|_| rng.uniform_in(-bound, bound)));
                values.extend(std::iter::repeat_n(0.0, fan_out));
            }
            InitScheme::XavierNormal => {
                let std = (2.0 / fan_sum).sqrt();
                values.extend((0..n_weights).map(|_| std * rng.normal()));
                values.extend(std::iter::repeat_n(0.0, fan_out));
            }
            InitScheme::FanInUniform => {
                let bound = 1.0 / (fan_in as f64).sqrt();
                values.extend((0..n_weights + fan_out).map(|_| rng.uniform_in(-bound, bound)));
            }
        }
    }
    FlatParams(values)
}

fn check_params(spec: &NetSpec, params: &[f64]) -> Result<()> {
    let expected = spec.param_count();
    if params.len() != expected {
        return Err(Error::shape("parameter vector", expected, params.len()));
    }
    Ok(())
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `pre[l]`: pre-activation of layer `l`.
    pre: Vec<Vec<f64>>,
    /// `act[0]` is the input; `act[l + 1]` is the output of layer `l`.
    act: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.act.last().expect("trace has at least the input")
    }

    pub fn input(&self) -> &[f64] {
        &self.act[0]
    }

    /// Pre-activation of layer `l`.
    pub fn pre_activation(&self, l: usize) -> &[f64] {
        &self.pre[l]
    }

    pub fn layers(&self) -> usize {
        self.pre.len()
    }
}

/// Forward pass that records a [`Trace`]. Shapes are the caller's
/// responsibility; use [`forward`] for a checked call.
pub fn forward_trace(spec: &NetSpec, params: &[f64], x: &[f64]) -> Trace {
    debug_assert_eq!(x.len(), spec.input_dim);
    debug_assert_eq!(params.len(), spec.param_count());
    let layout = spec.layout();
    let last = layout.len() - 1;
    let mut pre = Vec::with_capacity(layout.len());
    let mut act = Vec::with_capacity(layout.len() + 1);
    act.push(x.to_vec());
    for (l, slot) in layout.iter().enumerate() {
        let input = &act[l];
        let w = &params[slot.weight_offset..slot.bias_offset];
        let b = &params[slot.bias_offset..slot.end()];
        let z: Vec<f64> = (0..slot.fan_out)
            .map(|o| {
                let row = &w[o * slot.fan_in..(o + 1) * slot.fan_in];
                b[o] + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>()
            })
            .collect();
        let a = if l == last {
            z.clone()
        } else {
            z.iter().map(|&v| spec.activation.apply(v)).collect()
        };
        pre.push(z);
        act.push(a);
    }
    Trace { pre, act }
}

/// Reverse pass. Adds `∂(grad_out · f)/∂θ` into `grad_params` and returns the
/// gradient with respect to the network input.
pub fn backward(
    spec: &NetSpec,
    params: &[f64],
    trace: &Trace,
    grad_out: &[f64],
    grad_params: &mut [f64],
) -> Vec<f64> {
    let layout = spec.layout();
    let last = layout.len() - 1;
    let mut delta = grad_out.to_vec();
    let mut scratch = Vec::with_capacity(spec.widest());
    for l in (0..layout.len()).rev() {
        let slot = layout[l];
        if l != last {
            for (d, (&z, &a)) in delta.iter_mut().zip(trace.pre[l].iter().zip(&trace.act[l + 1])) {
                *d *= spec.activation.derivative(z, a);
            }
        }
        let input = &trace.act[l];
        let w = &params[slot.weight_offset..slot.bias_offset];
        {
            let (gw, gb) = grad_params[slot.weight_offset..slot.end()].split_at_mut(slot.fan_in * slot.fan_out);
            for o in 0..slot.fan_out {
                let d = delta[o];
                gb[o] += d;
                if d != 0.0 {
                    for (g, &x) in gw[o * slot.fan_in..(o + 1) * slot.fan_in].iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
        }
        scratch.clear();
        scratch.resize(slot.fan_in, 0.0);
        for o in 0..slot.fan_out {
            let d = delta[o];
            if d != 0.0 {
                for (s, &wv) in scratch.iter_mut().zip(&w[o * slot.fan_in..(o + 1) * slot.fan_in]) {
                    *s += d * wv;
                }
            }
        }
        std::mem::swap(&mut delta, &mut scratch);
    }
    delta
}

/// Evaluate the network on one input vector.
pub fn forward(spec: &NetSpec, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_params(spec, params)?;
    if x.len() != spec.input_dim {
        return Err(Error::shape("network input", spec.input_dim, x.len()));
    }
    let mut trace = forward_trace(spec, params, x);
    Ok(trace.act.pop().unwrap_or_default())
}

/// Evaluate a row-major batch of inputs; returns row-major outputs.
pub fn forward_batch(spec: &NetSpec, params: &[f64], xs: &[f64]) -> Result<Vec<f64>> {
    check_params(spec, params)?;
    if !xs.len().is_multiple_of(spec.input_dim) {
        return Err(Error::shape(
            "batch input",
            spec.input_dim * (xs.len() / spec.input_dim + 1),
            xs.len(),
        ));
    }
    let mut out = Vec::with_capacity(xs.len() / spec.input_dim * spec.output_dim);
    for x in xs.chunks_exact(spec.input_dim) {
        out.extend_from_slice(forward_trace(spec, params, x).output());
    }
    Ok(out)
}

/// Mean squared error over a row-major batch and its exact gradient.
///
/// The loss is `mean_i ‖f(x_i) − y_i‖²`; for scalar outputs this is the usual
/// per-sample squared error averaged over the batch.
pub fn loss_and_grad(
    spec: &NetSpec,
    params: &[f64],
    xs: &[f64],
    ys: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_params(spec, params)?;
    let n = check_batch(spec, xs, ys)?;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let scale = 1.0 / n as f64;
    let mut g_out = vec![0.0; spec.output_dim];
    for (x, y) in xs.chunks_exact(spec.input_dim).zip(ys.chunks_exact(spec.output_dim)) {
        let trace = forward_trace(spec, params, x);
        for ((g, &p), &t) in g_out.iter_mut().zip(trace.output()).zip(y) {
            let r = p - t;
            loss += r * r;
            *g = 2.0 * r * scale;
        }
        backward(spec, params, &trace, &g_out, &mut grad);
    }
    Ok((loss * scale, grad))
}

/// Mean squared error only.
pub fn loss(spec: &NetSpec, params: &[f64], xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_params(spec, params)?;
    let n = check_batch(spec, xs, ys)?;
    let mut total = 0.0;
    for (x, y) in xs.chunks_exact(spec.input_dim).zip(ys.chunks_exact(spec.output_dim)) {
        let trace = forward_trace(spec, params, x);
        total += trace
            .output()
            .iter()
            .zip(y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>();
    }
    Ok(total / n as f64)
}

fn check_batch(spec: &NetSpec, xs: &[f64], ys: &[f64]) -> Result<usize> {
    if xs.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if !xs.len().is_multiple_of(spec.input_dim) {
        return Err(Error::shape("batch input", spec.input_dim, xs.len() % spec.input_dim));
    }
    let n = xs.len() / spec.input_dim;
    if ys.len() != n * spec.output_dim {
        return Err(Error::shape("batch targets", n * spec.output_dim, ys.len()));
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin() -> NetSpec {
        NetSpec::linear(1, 1)
    }

    #[test]
    fn param_counts() {
        assert_eq!(param_count(&lin()), 2);
        let a = NetSpec::new(1, vec![2, 2, 1], 1, Activation::Relu).unwrap();
        let b = NetSpec::new(1, vec![4, 1], 1, Activation::Relu).unwrap();
        assert_eq!(param_count(&a), 15);
        assert_eq!(param_count(&b), 15);
    }

    #[test]
    fn rejects_zero_width() {
        assert!(NetSpec::new(1, vec![0], 1, Activation::Relu).is_err());
        assert!(NetSpec::new(0, vec![], 1, Activation::Relu).is_err());
    }

    #[test]
    fn affine_forward() {
        let y = forward(&lin(), &[2.0, 1.0], &[3.0]).unwrap();
        assert_eq!(y, vec![7.0]);
    }

    #[test]
    fn identity_blocks() {
        let spec = NetSpec::new(1, vec![1], 1, Activation::Identity).unwrap();
        assert_eq!(forward(&spec, &[1.0, 0.0, 1.0, 0.0], &[1.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn dead_relu_returns_output_bias() {
        let spec = NetSpec::new(2, vec![3], 1, Activation::Relu).unwrap();
        let mut p = vec![-1.0; spec.param_count()];
        let n = p.len();
        p[n - 1] = 0.75;
        let y = forward(&spec, &p, &[0.5, 2.0]).unwrap();
        assert_eq!(y, vec![0.75]);
    }

    #[test]
    fn forward_shape_errors() {
        assert!(matches!(
            forward(&lin(), &[1.0, 0.0], &[1.0, 2.0]),
            Err(Error::Shape { .. })
        ));
        assert!(forward(&lin(), &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn hand_gradient() {
        let (l, g) = loss_and_grad(&lin(), &[0.0, 0.0], &[1.0], &[2.0]).unwrap();
        assert_eq!(l, 4.0);
        assert_eq!(g, vec![-4.0, -4.0]);
    }

    #[test]
    fn stationary_at_least_squares_optimum() {
        let xs: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let (l, g) = loss_and_grad(&lin(), &[2.0, 1.0], &xs, &ys).unwrap();
        assert!(l < 1e-28);
        assert!(g.iter().all(|v| v.abs() < 1e-14), "{g:?}");
    }

    #[test]
    fn empty_batch_is_error() {
        assert!(loss_and_grad(&lin(), &[0.0, 0.0], &[], &[]).is_err());
    }

    #[test]
    fn xavier_bounds_and_zero_bias() {
        let spec = lin();
        for seed in 0..200 {
            let p = init_params(&spec, InitScheme::XavierUniform, seed);
            assert!(p[0].abs() <= 3f64.sqrt());
            assert_eq!(p[1], 0.0);
        }
    }

    #[test]
    fn xavier_normal_unit_variance_for_scalar_layer() {
        let spec = lin();
        let ws: Vec<f64> = (0..20_000)
            .map(|s| init_params(&spec, InitScheme::XavierNormal, s)[0])
            .collect();
        let mean = ws.iter().sum::<f64>() / ws.len() as f64;
        let var = ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (ws.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn init_is_deterministic() {
        let spec = NetSpec::new(3, vec![5, 4], 2, Activation::Elu).unwrap();
        for scheme in [
            InitScheme::StdNormal,
            InitScheme::XavierUniform,
            InitScheme::XavierNormal,
            InitScheme::FanInUniform,
        ] {
            assert_eq!(init_params(&spec, scheme, 9), init_params(&spec, scheme, 9));
            assert_eq!(init_params(&spec, scheme, 9).len(), spec.param_count());
        }
    }

    #[test]
    fn input_gradient_of_affine_layer() {
        let spec = NetSpec::linear(2, 1);
        let p = [3.0, -2.0, 0.5];
        let trace = forward_trace(&spec, &p, &[1.0, 1.0]);
        let mut g = vec![0.0; 3];
        let gx = backward(&spec, &p, &trace, &[1.0], &mut g);
        assert_eq!(gx, vec![3.0, -2.0]);
        assert_eq!(g, vec![1.0, 1.0, 1.0]);
    }
}
