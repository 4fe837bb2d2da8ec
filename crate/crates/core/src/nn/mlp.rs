use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
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
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            2 => Ok(Activation::Tanh),
            other => Err(Error::Format(format!("unknown activation code {other}"))),
        }
    }
}

/// Dense feed-forward network.
///
/// Parameters live in one flat vector in the canonical flattening order:
/// layer by layer, each layer's weight matrix (row-major, `outputs x inputs`)
/// followed by its bias vector. Flattening is therefore a copy and
/// unflattening a length-checked move.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    params: Vec<f64>,
}

/// Gradient of `output . upstream` with respect to every parameter (in
/// flattening order) and to the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            params: vec![0.0; net.num_params()],
            input: vec![0.0; net.input_dim()],
        }
    }

    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            *a += scale * b;
        }
        for (a, b) in self.input.iter_mut().zip(&other.input) {
            *a += scale * b;
        }
    }
}

/// Activations recorded during a forward pass, consumed by backprop.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Pre-activations per layer.
    pre: Vec<Vec<f64>>,
    /// `post[0]` is the input, `post[l + 1]` the output of layer `l`.
    post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("trace always holds the input")
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::Architecture(format!(
            "need at least input and output sizes, got {sizes:?}"
        )));
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::Architecture(format!("zero-width layer in {sizes:?}")));
    }
    Ok(())
}

impl Mlp {
    /// Network with weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`;
    /// biases use the same range.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        check_sizes(sizes)?;
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] + w[1] {
                params.push(rng.random_range(-bound..=bound));
            }
        }
        Ok(Self { sizes: sizes.to_vec(), hidden, output, params })
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            hidden,
            output,
            params: vec![0.0; param_count(sizes)],
        })
    }

    pub fn from_params(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        check_sizes(sizes)?;
        let expected = param_count(sizes);
        if params.len() != expected {
            return Err(Error::Dimension { expected, actual: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("non-finite parameter".into()));
        }
        Ok(Self { sizes: sizes.to_vec(), hidden, output, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Copy of the parameter vector in flattening order.
    pub fn flatten(&self) -> Vec<f64> {
        self.params.clone()
    }

    /// Network with `template`'s architecture and the given parameters.
    pub fn unflatten(params: Vec<f64>, template: &Mlp) -> Result<Self> {
        Self::from_params(&template.sizes, template.hidden, template.output, params)
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes && self.hidden == other.hidden && self.output == other.output
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 2 == self.sizes.len() {
            self.output
        } else {
            self.hidden
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension { expected: self.input_dim(), actual: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.post.pop().unwrap())
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let layers = self.sizes.len() - 1;
        let mut pre = Vec::with_capacity(layers);
        let mut post = Vec::with_capacity(layers + 1);
        post.push(x.to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let a_prev = &post[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    b[o] + row.iter().zip(a_prev).map(|(wi, ai)| wi * ai).sum::<f64>()
                })
                .collect();
            let act = self.activation(l);
            let a = z.iter().map(|&v| act.apply(v)).collect();
            pre.push(z);
            post.push(a);
        }
        Ok(ForwardTrace { pre, post })
    }

    /// Reverse-mode gradient of `forward(x) . upstream`.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Gradients> {
        let trace = self.forward_trace(x)?;
        self.backward_from(&trace, upstream)
    }

    pub fn backward_from(&self, trace: &ForwardTrace, upstream: &[f64]) -> Result<Gradients> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Dimension { expected: self.output_dim(), actual: upstream.len() });
        }
        let layers = self.sizes.len() - 1;
        let mut grads = vec![0.0; self.params.len()];
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }

        let mut delta: Vec<f64> = upstream.to_vec();
        for l in (0..layers).rev() {
            let act = self.activation(l);
            for (o, d) in delta.iter_mut().enumerate() {
                *d *= act.derivative(trace.pre[l][o], trace.post[l + 1][o]);
            }
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let base = offsets[l];
            let a_prev = &trace.post[l];
            for o in 0..n_out {
                let row = &mut grads[base + o * n_in..base + (o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(a_prev) {
                    *g = delta[o] * a;
                }
                grads[base + n_in * n_out + o] = delta[o];
            }
            let w = &self.params[base..base + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                for (p, wi) in prev.iter_mut().zip(row) {
                    *p += wi * delta[o];
                }
            }
            delta = prev;
        }
        Ok(Gradients { params: grads, input: delta })
    }

    /// `self <- tau * main + (1 - tau) * self`.
    pub fn soft_update(&mut self, main: &Mlp, tau: f64) -> Result<()> {
        if !self.same_architecture(main) {
            return Err(Error::Architecture(format!(
                "soft update between {:?} and {:?}",
                self.sizes, main.sizes
            )));
        }
        for (t, m) in self.params.iter_mut().zip(&main.params) {
            *t = tau * m + (1.0 - tau) * *t;
        }
        Ok(())
    }
}
