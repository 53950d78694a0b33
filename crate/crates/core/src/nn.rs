//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Every generator and discriminator in this crate is a small stack of
//! [`DenseLayer`]s. Parameters are stored row-major (`out x in`) in `f64`.
//! [`Net::forward`] returns a [`Tape`] holding the per-layer inputs and
//! pre-activations; [`Net::backward`] consumes it and returns the gradient of
//! `<output_grad, output>` with respect to every parameter and to the input.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative at `z`; the ReLU kink at exactly 0 takes subgradient 0.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != in_dim * out_dim {
            return Err(Error::Dimension {
                context: "layer weights",
                expected: in_dim * out_dim,
                actual: weights.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(Error::Dimension {
                context: "layer bias",
                expected: out_dim,
                actual: bias.len(),
            });
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }

    fn preactivation(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.in_dim).zip(&self.bias) {
            let dot: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
            out.push(dot + b);
        }
    }
}

/// Activation record of one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    net_id: u64,
    version: u64,
    /// Input to each layer (`inputs[0]` is the network input).
    inputs: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
    /// Gradient with respect to the network input.
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Net) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            input: vec![0.0; net.input_dim()],
        }
    }

    /// `self += scale * other` over parameter gradients (input gradient included).
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
        for (x, y) in self.input.iter_mut().zip(&other.input) {
            *x += scale * y;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|v| *v *= factor);
            l.bias.iter_mut().for_each(|v| *v *= factor);
        }
        self.input.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascent,
    Descent,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Ascent => 1.0,
            Direction::Descent => -1.0,
        }
    }
}

#[derive(Debug)]
pub struct Net {
    id: u64,
    version: u64,
    layers: Vec<DenseLayer>,
}

impl Clone for Net {
    fn clone(&self) -> Self {
        Self {
            id: fresh_id(),
            version: 0,
            layers: self.layers.clone(),
        }
    }
}

impl PartialEq for Net {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Net {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Dimension {
                    context: "consecutive layers",
                    expected: pair[0].out_dim,
                    actual: pair[1].in_dim,
                });
            }
        }
        Ok(Self {
            id: fresh_id(),
            version: 0,
            layers,
        })
    }

    /// Builds a net with dims `dims[0] -> dims[1] -> ...`, hidden layers ReLU
    /// and an identity output layer, every parameter uniform on `[-scale, scale]`.
    pub fn init_uniform<R: Rng + ?Sized>(dims: &[usize], scale: f64, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidParameter("need input and output dims".into()));
        }
        let n_layers = dims.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for (i, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let activation = if i + 1 == n_layers {
                Activation::Identity
            } else {
                Activation::Relu
            };
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-scale..=scale))
                .collect();
            let bias = (0..fan_out).map(|_| rng.random_range(-scale..=scale)).collect();
            layers.push(DenseLayer::new(fan_in, fan_out, weights, bias, activation)?);
        }
        Self::from_layers(layers)
    }

    /// Same architecture as [`Net::init_uniform`], all parameters zero.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let n_layers = dims.len().saturating_sub(1);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, p)| {
                let act = if i + 1 == n_layers {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                DenseLayer::zeros(p[0], p[1], act)
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Mutable access; bumps the version so outstanding tapes become stale.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    pub fn param_norm(&self) -> f64 {
        self.params().map(|p| p * p).sum::<f64>().sqrt()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "network input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// Forward pass without recording a tape.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        let mut z = Vec::new();
        for layer in &self.layers {
            layer.preactivation(&current, &mut z);
            current.clear();
            current.extend(z.iter().map(|&v| layer.activation.apply(v)));
        }
        Ok(current)
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for layer in &self.layers {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.preactivation(&current, &mut z);
            let next = z.iter().map(|&v| layer.activation.apply(v)).collect();
            inputs.push(std::mem::replace(&mut current, next));
            preacts.push(z);
        }
        Ok((
            current,
            Tape {
                net_id: self.id,
                version: self.version,
                inputs,
                preacts,
            },
        ))
    }

    pub fn backward(&self, tape: &Tape, output_grad: &[f64]) -> Result<Gradients> {
        if tape.net_id != self.id {
            return Err(Error::StaleTape("recorded on a different network"));
        }
        if tape.version != self.version {
            return Err(Error::StaleTape("parameters changed since the forward pass"));
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::Dimension {
                context: "output gradient",
                expected: self.output_dim(),
                actual: output_grad.len(),
            });
        }
        let mut layer_grads = Vec::with_capacity(self.layers.len());
        let mut upstream = output_grad.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let x = &tape.inputs[idx];
            let z = &tape.preacts[idx];
            let delta: Vec<f64> = upstream
                .iter()
                .zip(z)
                .map(|(g, &zi)| g * layer.activation.derivative(zi))
                .collect();
            let mut gw = vec![0.0; layer.weights.len()];
            for (row, d) in gw.chunks_exact_mut(layer.in_dim).zip(&delta) {
                for (g, xi) in row.iter_mut().zip(x) {
                    *g = d * xi;
                }
            }
            let mut down = vec![0.0; layer.in_dim];
            for (w_row, d) in layer.weights.chunks_exact(layer.in_dim).zip(&delta) {
                for (acc, w) in down.iter_mut().zip(w_row) {
                    *acc += w * d;
                }
            }
            layer_grads.push(LayerGradients {
                weights: gw,
                bias: delta,
            });
            upstream = down;
        }
        layer_grads.reverse();
        Ok(Gradients {
            layers: layer_grads,
            input: upstream,
        })
    }

    fn check_congruent(&self, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Dimension {
                context: "gradient layer count",
                expected: self.layers.len(),
                actual: grads.layers.len(),
            });
        }
        for (l, g) in self.layers.iter().zip(&grads.layers) {
            if l.weights.len() != g.weights.len() || l.bias.len() != g.bias.len() {
                return Err(Error::Dimension {
                    context: "gradient layer shape",
                    expected: l.weights.len() + l.bias.len(),
                    actual: g.weights.len() + g.bias.len(),
                });
            }
        }
        Ok(())
    }

    /// `p <- p + lr * g` (ascent) or `p <- p - lr * g` (descent). Rejects
    /// non-finite gradients before touching any parameter.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64, direction: Direction) -> Result<()> {
        self.check_congruent(grads)?;
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient passed to sgd_step".into()));
        }
        let step = direction.sign() * lr;
        for (l, g) in self.layers_mut().iter_mut().zip(&grads.layers) {
            for (p, gi) in l.weights.iter_mut().zip(&g.weights) {
                *p += step * gi;
            }
            for (p, gi) in l.bias.iter_mut().zip(&g.bias) {
                *p += step * gi;
            }
        }
        Ok(())
    }

    /// Componentwise clamp of every parameter into `[lb, ub]`.
    pub fn clip_params(&mut self, lb: f64, ub: f64) -> Result<()> {
        if !(lb < ub) {
            return Err(Error::InvalidParameter(format!(
                "clip bounds require lb < ub, got [{lb}, {ub}]"
            )));
        }
        for l in self.layers_mut() {
            for p in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                if *p < lb {
                    *p = lb;
                } else if *p > ub {
                    *p = ub;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
#[derive(Default)]
pub enum OptimizerKind {
    #[default]
    Sgd,
    /// RMSProp with running average `decay` of squared gradients.
    Rmsprop { decay: f64, eps: f64 },
}

/// Per-network optimizer state (empty for SGD).
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    square_avg: Vec<LayerGradients>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, net: &Net) -> Self {
        let square_avg = match kind {
            OptimizerKind::Sgd => Vec::new(),
            OptimizerKind::Rmsprop { .. } => Gradients::zeros_like(net).layers,
        };
        Self { kind, square_avg }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn state(&self) -> &[LayerGradients] {
        &self.square_avg
    }

    pub fn restore_state(&mut self, state: Vec<LayerGradients>) -> Result<()> {
        if state.len() != self.square_avg.len() {
            return Err(Error::Checkpoint("optimizer state shape mismatch".into()));
        }
        for (a, b) in self.square_avg.iter().zip(&state) {
            if a.weights.len() != b.weights.len() || a.bias.len() != b.bias.len() {
                return Err(Error::Checkpoint("optimizer state shape mismatch".into()));
            }
        }
        self.square_avg = state;
        Ok(())
    }

    pub fn step(&mut self, net: &mut Net, grads: &Gradients, lr: f64, direction: Direction) -> Result<()> {
        match self.kind {
            OptimizerKind::Sgd => net.sgd_step(grads, lr, direction),
            OptimizerKind::Rmsprop { decay, eps } => {
                net.check_congruent(grads)?;
                if !grads.is_finite() {
                    return Err(Error::NonFinite("gradient passed to rmsprop".into()));
                }
                let mut scaled = grads.clone();
                for (acc, g) in self.square_avg.iter_mut().zip(scaled.layers.iter_mut()) {
                    for (a, gi) in acc.weights.iter_mut().zip(g.weights.iter_mut()) {
                        *a = decay * *a + (1.0 - decay) * *gi * *gi;
                        *gi /= a.sqrt() + eps;
                    }
                    for (a, gi) in acc.bias.iter_mut().zip(g.bias.iter_mut()) {
                        *a = decay * *a + (1.0 - decay) * *gi * *gi;
                        *gi /= a.sqrt() + eps;
                    }
                }
                net.sgd_step(&scaled, lr, direction)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_layer(n: usize, act: Activation) -> Net {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        Net::from_layers(vec![DenseLayer::new(n, n, w, vec![0.0; n], act).unwrap()]).unwrap()
    }

    #[test]
    fn identity_forward() {
        let net = identity_layer(2, Activation::Identity);
        assert_eq!(net.predict(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn relu_forward() {
        let net = identity_layer(2, Activation::Relu);
        assert_eq!(net.predict(&[-1.0, 3.0]).unwrap(), vec![0.0, 3.0]);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let net = identity_layer(2, Activation::Identity);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn linear_weight_gradient_is_input() {
        let layer = DenseLayer::new(3, 1, vec![0.2, -0.4, 0.9], vec![0.1], Activation::Identity).unwrap();
        let net = Net::from_layers(vec![layer]).unwrap();
        let x = [1.5, -2.0, 0.25];
        let (_, tape) = net.forward(&x).unwrap();
        let g = net.backward(&tape, &[1.0]).unwrap();
        assert_eq!(g.layers[0].weights, x.to_vec());
        assert_eq!(g.layers[0].bias, vec![1.0]);
        assert_eq!(g.input, vec![0.2, -0.4, 0.9]);
    }

    #[test]
    fn relu_kink_has_zero_subgradient() {
        let layer = DenseLayer::new(1, 1, vec![1.0], vec![0.0], Activation::Relu).unwrap();
        let net = Net::from_layers(vec![layer]).unwrap();
        let (_, tape) = net.forward(&[0.0]).unwrap();
        let g = net.backward(&tape, &[1.0]).unwrap();
        assert_eq!(g.input, vec![0.0]);
        assert_eq!(g.layers[0].bias, vec![0.0]);
    }

    #[test]
    fn stale_tape_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Net::init_uniform(&[3, 2, 1], 0.1, &mut rng).unwrap();
        let other = Net::init_uniform(&[3, 2, 1], 0.1, &mut rng).unwrap();
        let (_, tape) = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(other.backward(&tape, &[1.0]), Err(Error::StaleTape(_))));
        net.clip_params(-0.05, 0.05).unwrap();
        assert!(matches!(net.backward(&tape, &[1.0]), Err(Error::StaleTape(_))));
    }

    #[test]
    fn sgd_arithmetic() {
        let layer = DenseLayer::new(1, 1, vec![1.0], vec![0.0], Activation::Identity).unwrap();
        let mut net = Net::from_layers(vec![layer]).unwrap();
        let grads = Gradients {
            layers: vec![LayerGradients {
                weights: vec![2.0],
                bias: vec![0.0],
            }],
            input: vec![0.0],
        };
        net.sgd_step(&grads, 0.1, Direction::Descent).unwrap();
        assert!((net.layers()[0].weights[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn ascent_with_zero_gradient_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Net::init_uniform(&[4, 3, 1], 0.1, &mut rng).unwrap();
        let before: Vec<f64> = net.params().collect();
        let zero = Gradients::zeros_like(&net);
        net.sgd_step(&zero, 0.5, Direction::Ascent).unwrap();
        assert_eq!(before, net.params().collect::<Vec<_>>());
    }

    #[test]
    fn non_finite_gradient_leaves_params_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = Net::init_uniform(&[2, 2, 1], 0.1, &mut rng).unwrap();
        let before: Vec<f64> = net.params().collect();
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].weights[0] = 1.0;
        g.layers[1].bias[0] = f64::NAN;
        assert!(matches!(
            net.sgd_step(&g, 0.1, Direction::Descent),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(before, net.params().collect::<Vec<_>>());
    }

    #[test]
    fn two_steps_equal_one_summed_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = Net::init_uniform(&[3, 4, 1], 0.1, &mut rng).unwrap();
        let x = [0.3, -0.2, 0.7];
        let (_, t1) = base.forward(&x).unwrap();
        let g1 = base.backward(&t1, &[1.0]).unwrap();
        let (_, t2) = base.forward(&[-0.5, 0.1, 0.2]).unwrap();
        let g2 = base.backward(&t2, &[-0.7]).unwrap();

        let mut a = base.clone();
        a.sgd_step(&g1, 0.01, Direction::Descent).unwrap();
        a.sgd_step(&g2, 0.01, Direction::Descent).unwrap();
        let mut summed = g1.clone();
        summed.add_scaled(&g2, 1.0);
        let mut b = base.clone();
        b.sgd_step(&summed, 0.01, Direction::Descent).unwrap();
        for (p, q) in a.params().zip(b.params()) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn clip_examples() {
        let layer = DenseLayer::new(3, 1, vec![-0.7, 0.3, 0.9], vec![0.1], Activation::Identity).unwrap();
        let mut net = Net::from_layers(vec![layer]).unwrap();
        net.clip_params(-0.5, 0.5).unwrap();
        assert_eq!(net.layers()[0].weights, vec![-0.5, 0.3, 0.5]);
        let once: Vec<f64> = net.params().collect();
        net.clip_params(-0.5, 0.5).unwrap();
        assert_eq!(once, net.params().collect::<Vec<_>>());
        assert!(net.clip_params(0.5, 0.5).is_err());
    }

    #[test]
    fn init_stays_in_clip_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = Net::init_uniform(&[13, 4, 1], 0.1, &mut rng).unwrap();
        assert!(net.params().all(|p| (-0.1..=0.1).contains(&p)));
        let mut clipped = net.clone();
        clipped.clip_params(-0.5, 0.5).unwrap();
        assert_eq!(net, clipped);
    }

    #[test]
    fn rmsprop_first_step_is_signed_lr() {
        let layer = DenseLayer::new(1, 1, vec![0.0], vec![0.0], Activation::Identity).unwrap();
        let mut net = Net::from_layers(vec![layer]).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::Rmsprop { decay: 0.0, eps: 0.0 }, &net);
        let g = Gradients {
            layers: vec![LayerGradients {
                weights: vec![3.0],
                bias: vec![-2.0],
            }],
            input: vec![0.0],
        };
        opt.step(&mut net, &g, 0.1, Direction::Descent).unwrap();
        assert!((net.layers()[0].weights[0] + 0.1).abs() < 1e-15);
        assert!((net.layers()[0].bias[0] - 0.1).abs() < 1e-15);
    }
}
