//! Small fully-connected networks with hand-written backpropagation, and Adam.
//!
//! Parameters live in one flat vector, layer by layer: a row-major
//! `outputs x inputs` weight block followed by the bias.

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub const ALL: [Activation; 4] = [Activation::Identity, Activation::Relu, Activation::Tanh, Activation::Sigmoid];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative given the pre-activation `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    params: Vec<f64>,
}

/// Per-layer values kept from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input, `activations[l + 1]` the output of layer `l`.
    pub activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least the input")
    }
}

impl Mlp {
    /// All-zero parameters.
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Self {
            sizes: sizes.to_vec(),
            hidden,
            output,
            params: vec![0.0; n],
        }
    }

    /// Wraps an existing flat parameter vector.
    pub fn from_params(sizes: &[usize], hidden: Activation, output: Activation, params: Vec<f64>) -> Option<Self> {
        let mut net = Self::zeros(sizes, hidden, output);
        if params.len() != net.params.len() {
            return None;
        }
        net.params = params;
        Some(net)
    }

    /// Uniform `+-1/sqrt(fan_in)` init; the last layer uses `+-final_scale`.
    pub fn random<R: Rng>(sizes: &[usize], hidden: Activation, output: Activation, final_scale: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes, hidden, output);
        let layers = net.num_layers();
        for l in 0..layers {
            let bound = if l + 1 == layers {
                final_scale
            } else {
                1.0 / (sizes[l] as f64).sqrt()
            };
            let (start, end) = net.layer_range(l);
            for p in &mut net.params[start..end] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        net
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
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

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.sizes[..layer + 1]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Flat index range of one layer's weights and bias.
    pub fn layer_range(&self, layer: usize) -> (usize, usize) {
        let start = self.layer_offset(layer);
        let (i, o) = (self.sizes[layer], self.sizes[layer + 1]);
        (start, start + i * o + o)
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        assert_eq!(input.len(), self.sizes[0], "input width");
        let mut activations = vec![input.to_vec()];
        let mut pre = Vec::with_capacity(self.num_layers());
        for l in 0..self.num_layers() {
            let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
            let (start, _) = self.layer_range(l);
            let w = &self.params[start..start + ni * no];
            let b = &self.params[start + ni * no..start + ni * no + no];
            let x = activations.last().unwrap();
            let z: Vec<f64> = (0..no)
                .map(|r| b[r] + w[r * ni..(r + 1) * ni].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
                .collect();
            let act = self.activation(l);
            activations.push(z.iter().map(|v| act.apply(*v)).collect());
            pre.push(z);
        }
        ForwardCache { activations, pre }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).activations.pop().unwrap()
    }

    /// Backpropagates `grad_output` (gradient w.r.t. the network output),
    /// adds parameter gradients into `grad_params`, returns the input gradient.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64], grad_params: &mut [f64]) -> Vec<f64> {
        assert_eq!(grad_params.len(), self.params.len(), "gradient buffer size");
        let mut upstream = grad_output.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
            let act = self.activation(l);
            let delta: Vec<f64> = (0..no)
                .map(|r| upstream[r] * act.derivative(cache.pre[l][r], cache.activations[l + 1][r]))
                .collect();
            let (start, _) = self.layer_range(l);
            let x = &cache.activations[l];
            let mut down = vec![0.0; ni];
            for r in 0..no {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                let row = start + r * ni;
                for c in 0..ni {
                    grad_params[row + c] += d * x[c];
                    down[c] += d * self.params[row + c];
                }
                grad_params[start + ni * no + r] += d;
            }
            upstream = down;
        }
        upstream
    }

    /// `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        assert_eq!(self.params.len(), online.params.len());
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
}

/// Adam on a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, n: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Descends along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grad[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            let mh = self.m[k] / bc1;
            let vh = self.v[k] / bc2;
            params[k] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}
