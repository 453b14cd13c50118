//! Dense multilayer perceptron with exact backpropagation and Adam.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative from the pre-activation `z` and output `y`.
    fn deriv(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Fully connected network with all parameters in one flat vector. Layer `l`
/// stores its `out × in` weights row-major followed by `out` biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
    pub params: Vec<f64>,
}

/// Per-layer activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    pub acts: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Mlp { sizes: sizes.to_vec(), hidden, output, params: vec![0.0; param_count(sizes)] })
    }

    /// Uniform fan-in initialization; the output layer starts small so initial
    /// scores stay near zero.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Mlp::zeros(sizes, hidden, output)?;
        let layers = sizes.len() - 1;
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let bound = if l + 1 == layers { 3e-3 } else { 1.0 / (n_in as f64).sqrt() };
            for p in &mut net.params[off..off + n_in * n_out + n_out] {
                *p = rng.random_range(-bound..bound);
            }
            off += n_in * n_out + n_out;
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!("input of length {} for a network expecting {}", x.len(), self.input_dim())));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.acts.pop().unwrap())
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        let mut pre = Vec::with_capacity(layers);
        acts.push(x.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let act = if l + 1 == layers { self.output } else { self.hidden };
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let input = &acts[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(input).map(|(a, c)| a * c).sum::<f64>())
                .collect();
            acts.push(z.iter().map(|&v| act.apply(v)).collect());
            pre.push(z);
            off += n_in * n_out + n_out;
        }
        Ok(Trace { acts, pre })
    }

    /// Accumulates `∂(upstream · output)/∂params` into `grads` and returns the
    /// gradient with respect to the input.
    pub fn backward(&self, trace: &Trace, upstream: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.output_dim() || grads.len() != self.params.len() {
            return Err(Error::Shape("gradient buffers do not match the network".into()));
        }
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta: Vec<f64> = upstream.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let act = if l + 1 == layers { self.output } else { self.hidden };
            for o in 0..n_out {
                delta[o] *= act.deriv(trace.pre[l][o], trace.acts[l + 1][o]);
            }
            let base = offsets[l];
            let input = &trace.acts[l];
            let mut down = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = base + o * n_in;
                for i in 0..n_in {
                    grads[row + i] += d * input[i];
                    down[i] += d * self.params[row + i];
                }
                grads[base + n_in * n_out + o] += d;
            }
            delta = down;
        }
        Ok(delta)
    }
}

/// θ′ ← τθ + (1 − τ)θ′
pub fn soft_update(target: &mut [f64], eval: &[f64], tau: f64) -> Result<()> {
    if target.len() != eval.len() {
        return Err(Error::Shape("soft update between networks of different size".into()));
    }
    for (t, e) in target.iter_mut().zip(eval) {
        *t = tau * e + (1.0 - tau) * *t;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n: usize) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    /// One descent step on `params` along `grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}
