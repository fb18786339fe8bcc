//! Feed-forward networks with hand-written backpropagation and Adam.
//!
//! Networks are stacks of dense layers `z = W x + b` followed by an
//! activation (GELU on hidden layers, identity on the output). Everything
//! runs in `f64` on row-major batches: a batch is an `(n, in_dim)` matrix.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// GELU with the exact normal CDF: `x * Phi(x)`.
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

/// d/dx of [`gelu`]: `Phi(x) + x * phi(x)`.
pub fn gelu_grad(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Gelu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => gelu(x),
            Activation::Identity => x,
        }
    }
}

/// One affine layer plus its activation. `weight` is `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// The parameter set of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Per-layer partial derivatives, shaped like the [`Mlp`] they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<DenseGrads>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Activation trace of one forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    /// Activation derivative at each layer's pre-activation; `None` for
    /// identity layers.
    derivatives: Vec<Option<Array2<f64>>>,
    /// Layer widths of the network that produced it.
    sizes: Vec<usize>,
}

impl Mlp {
    /// Random network with GELU hidden layers and an identity output.
    ///
    /// `sizes` lists every width including input and output, e.g.
    /// `[obs_dim, 256, 256, 256, out_dim]`. Weights are uniform in
    /// `+-sqrt(1/fan_in)`; biases likewise.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (1.0 / fan_in as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || dist.sample(rng));
                let bias = Array1::from_shape_simple_fn(fan_out, || dist.sample(rng));
                let activation = if i == last {
                    Activation::Identity
                } else {
                    Activation::Gelu
                };
                Dense {
                    weight,
                    bias,
                    activation,
                }
            })
            .collect();
        Ok(Mlp { layers })
    }

    /// Build from explicit layers, checking that dimensions chain.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::config(format!("layer {i}: bias length mismatch")));
            }
            if i > 0 && layers[i - 1].out_dim() != l.in_dim() {
                return Err(Error::config(format!("layer {i}: input dim does not chain")));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Widths of every layer boundary, input first.
    pub fn sizes(&self) -> Vec<usize> {
        let mut v = vec![self.in_dim()];
        v.extend(self.layers.iter().map(Dense::out_dim));
        v
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.in_dim() {
            return Err(Error::config(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.in_dim()
            )));
        }
        Ok(())
    }

    /// Batched forward pass without keeping the trace.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut h = x.to_owned();
        for layer in &self.layers {
            let mut z = h.dot(&layer.weight.t());
            z += &layer.bias;
            let act = layer.activation;
            if act != Activation::Identity {
                z.mapv_inplace(|v| act.apply(v));
            }
            h = z;
        }
        Ok(h)
    }

    /// Batched forward pass returning outputs and the trace for backward.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut derivatives = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for layer in &self.layers {
            let mut z = h.dot(&layer.weight.t());
            z += &layer.bias;
            let deriv = match layer.activation {
                Activation::Identity => None,
                Activation::Gelu => {
                    // One CDF evaluation serves both the value and the slope.
                    let mut d = Array2::zeros(z.raw_dim());
                    Zip::from(&mut z).and(&mut d).for_each(|v, d| {
                        let cdf = normal_cdf(*v);
                        *d = cdf + *v * normal_pdf(*v);
                        *v *= cdf;
                    });
                    Some(d)
                }
            };
            inputs.push(h);
            derivatives.push(deriv);
            h = z;
        }
        let cache = ForwardCache {
            inputs,
            derivatives,
            sizes: self.sizes(),
        };
        Ok((h, cache))
    }

    /// Single-vector convenience wrapper around [`Mlp::forward`].
    pub fn forward_one(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::config(e.to_string()))?;
        let (out, cache) = self.forward(view)?;
        Ok((out.into_raw_vec_and_offset().0, cache))
    }

    /// Reverse-mode derivatives of `sum(output * output_grad)` with respect
    /// to every parameter, summed over the batch. Also returns the gradient
    /// with respect to the input batch.
    pub fn backward(&self, cache: &ForwardCache, output_grad: ArrayView2<f64>) -> Result<(MlpGrads, Array2<f64>)> {
        let (grads, input_grad) = self.backward_impl(cache, output_grad, true)?;
        Ok((grads.expect("parameter gradients requested"), input_grad))
    }

    /// Like [`Mlp::backward`] but only the input gradient is formed.
    pub fn input_gradient(&self, cache: &ForwardCache, output_grad: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.backward_impl(cache, output_grad, false)?.1)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
        want_params: bool,
    ) -> Result<(Option<MlpGrads>, Array2<f64>)> {
        if cache.sizes != self.sizes() || cache.inputs.len() != self.layers.len() {
            return Err(Error::contract("forward cache does not match this network"));
        }
        let n = cache.inputs[0].nrows();
        if output_grad.dim() != (n, self.out_dim()) {
            return Err(Error::contract(format!(
                "output gradient shape {:?} does not match ({n}, {})",
                output_grad.dim(),
                self.out_dim()
            )));
        }
        let mut layer_grads = Vec::with_capacity(self.layers.len());
        let mut delta = output_grad.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            match (&cache.derivatives[i], layer.activation) {
                (None, Activation::Identity) => {}
                (Some(d), Activation::Gelu) if d.dim() == (n, layer.out_dim()) => {
                    Zip::from(&mut delta).and(d).for_each(|g, &dv| *g *= dv);
                }
                _ => return Err(Error::contract("stale forward cache")),
            }
            if want_params {
                let weight = delta.t().dot(&cache.inputs[i]);
                let bias = delta.sum_axis(Axis(0));
                layer_grads.push(DenseGrads { weight, bias });
            }
            delta = delta.dot(&layer.weight);
        }
        let grads = want_params.then(|| {
            layer_grads.reverse();
            MlpGrads { layers: layer_grads }
        });
        Ok((grads, delta))
    }

    /// Visit every parameter, layer by layer, weights (row-major) then bias.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(&mut f);
            l.bias.iter_mut().for_each(&mut f);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Elementwise `self <- tau * source + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) -> Result<()> {
        if self.sizes() != source.sizes() {
            return Err(Error::config("soft update between differently shaped networks"));
        }
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            Zip::from(&mut t.weight)
                .and(&s.weight)
                .for_each(|t, &s| *t = tau * s + (1.0 - tau) * *t);
            Zip::from(&mut t.bias)
                .and(&s.bias)
                .for_each(|t, &s| *t = tau * s + (1.0 - tau) * *t);
        }
        Ok(())
    }

    /// Write weights and biases into `out` under `"{prefix}.l{i}.weight"` /
    /// `"{prefix}.l{i}.bias"`.
    pub fn export(&self, prefix: &str, out: &mut BTreeMap<String, Tensor>) {
        for (i, l) in self.layers.iter().enumerate() {
            out.insert(format!("{prefix}.l{i}.weight"), Tensor::from_array2(&l.weight));
            out.insert(format!("{prefix}.l{i}.bias"), Tensor::from_array1(&l.bias));
        }
    }

    /// Inverse of [`Mlp::export`]. Activations follow the standard layout:
    /// GELU hidden layers, identity output.
    pub fn import(prefix: &str, n_layers: usize, map: &BTreeMap<String, Tensor>) -> Result<Self> {
        let mut layers = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            let w = lookup(map, &format!("{prefix}.l{i}.weight"))?.to_array2()?;
            let b = lookup(map, &format!("{prefix}.l{i}.bias"))?.to_array1()?;
            let activation = if i + 1 == n_layers {
                Activation::Identity
            } else {
                Activation::Gelu
            };
            layers.push(Dense {
                weight: w,
                bias: b,
                activation,
            });
        }
        Mlp::from_layers(layers)
    }
}

fn lookup<'a>(map: &'a BTreeMap<String, Tensor>, key: &str) -> Result<&'a Tensor> {
    map.get(key)
        .ok_or_else(|| Error::config(format!("checkpoint is missing tensor {key}")))
}

/// Row-major array with a shape header, as stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn from_array2(a: &Array2<f64>) -> Self {
        Tensor {
            shape: a.shape().to_vec(),
            data: a.iter().copied().collect(),
        }
    }

    pub fn from_array1(a: &Array1<f64>) -> Self {
        Tensor {
            shape: vec![a.len()],
            data: a.to_vec(),
        }
    }

    pub fn to_array2(&self) -> Result<Array2<f64>> {
        match self.shape[..] {
            [r, c] => {
                Array2::from_shape_vec((r, c), self.data.clone()).map_err(|e| Error::config(format!("bad tensor: {e}")))
            }
            _ => Err(Error::config(format!("expected 2-d tensor, got {:?}", self.shape))),
        }
    }

    pub fn to_array1(&self) -> Result<Array1<f64>> {
        match self.shape[..] {
            [n] if n == self.data.len() => Ok(Array1::from(self.data.clone())),
            _ => Err(Error::config(format!("expected 1-d tensor, got {:?}", self.shape))),
        }
    }
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            layers: net
                .layers
                .iter()
                .map(|l| DenseGrads {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.weight *= c;
            l.bias *= c;
        }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &MlpGrads, c: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.scaled_add(c, &b.weight);
            a.bias.scaled_add(c, &b.bias);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn matches_shape(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weight.dim() == l.weight.dim() && g.bias.len() == l.bias.len())
    }
}

/// Bias-corrected Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: MlpGrads,
    pub second: MlpGrads,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub delta: f64,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        AdamState {
            first: MlpGrads::zeros_like(net),
            second: MlpGrads::zeros_like(net),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            delta: 1e-8,
        }
    }

    /// One descent step `params -= lr * m_hat / (sqrt(v_hat) + delta)`.
    ///
    /// Refuses (leaving everything untouched) if any gradient entry is
    /// not finite.
    pub fn step(&mut self, params: &mut Mlp, grads: &MlpGrads, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {lr}")));
        }
        if !grads.matches_shape(params) || !self.first.matches_shape(params) {
            return Err(Error::config("Adam: gradient shape does not match parameters"));
        }
        if !grads.is_finite() {
            return Err(Error::numerical(
                "adam step",
                format!("non-finite gradient (max |g| = {})", grads.max_abs()),
            ));
        }
        self.step += 1;
        let (b1, b2, delta) = (self.beta1, self.beta2, self.delta);
        let c1 = 1.0 - b1.powf(self.step as f64);
        let c2 = 1.0 - b2.powf(self.step as f64);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + delta);
        };
        for (((layer, g), m), v) in params
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first.layers)
            .zip(&mut self.second.layers)
        {
            Zip::from(&mut layer.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .and(&g.weight)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }

    pub fn export(&self, prefix: &str, out: &mut BTreeMap<String, Tensor>) {
        for (name, g) in [("m", &self.first), ("v", &self.second)] {
            for (i, l) in g.layers.iter().enumerate() {
                out.insert(format!("{prefix}.{name}.l{i}.weight"), Tensor::from_array2(&l.weight));
                out.insert(format!("{prefix}.{name}.l{i}.bias"), Tensor::from_array1(&l.bias));
            }
        }
    }

    pub fn import(prefix: &str, net: &Mlp, step: u64, map: &BTreeMap<String, Tensor>) -> Result<Self> {
        let mut state = AdamState::new(net);
        state.step = step;
        for (name, g) in [("m", &mut state.first), ("v", &mut state.second)] {
            for (i, l) in g.layers.iter_mut().enumerate() {
                l.weight = lookup(map, &format!("{prefix}.{name}.l{i}.weight"))?.to_array2()?;
                l.bias = lookup(map, &format!("{prefix}.{name}.l{i}.bias"))?.to_array1()?;
            }
        }
        if !state.first.matches_shape(net) || !state.second.matches_shape(net) {
            return Err(Error::config(format!("{prefix}: Adam moments do not match network")));
        }
        Ok(state)
    }
}

/// Stack row vectors into an `(n, d)` matrix.
pub fn stack_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Array2<f64> {
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        debug_assert_eq!(r.len(), dim);
        data.extend_from_slice(r);
        n += 1;
    }
    Array2::from_shape_vec((n, dim), data).expect("row lengths checked by caller")
}

/// Concatenate two batches column-wise: `[a | b]`.
pub fn hconcat(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), a.ncols() + b.ncols()));
    out.slice_mut(s![.., ..a.ncols()]).assign(&a);
    out.slice_mut(s![.., a.ncols()..]).assign(&b);
    out
}
