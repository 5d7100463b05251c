//! Dueling Q-network: fully-connected ReLU trunk feeding a scalar value
//! head and a per-action advantage head, with hand-written backpropagation.
//!
//! Everything is f64 so analytic gradients can be checked against central
//! finite differences to tight tolerances.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One dense layer; weights are row-major `[out][in]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LinearLayer {
    /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
    fn glorot(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        LinearLayer {
            in_dim,
            out_dim,
            weights,
            biases: vec![0.0; out_dim],
        }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.biases[o];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            *out_v = acc;
        }
    }

    /// Accumulates parameter gradients for upstream gradient `g` and input
    /// `x`, and returns the gradient w.r.t. the input.
    fn backward(&self, x: &[f64], g: &[f64], grad: &mut LayerGrad, dx: &mut [f64]) {
        debug_assert_eq!(g.len(), self.out_dim);
        dx.fill(0.0);
        for (o, go) in g.iter().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let grad_row = &mut grad.weights[o * self.in_dim..(o + 1) * self.in_dim];
            grad.biases[o] += go;
            for i in 0..self.in_dim {
                grad_row[i] += go * x[i];
                dx[i] += go * row[i];
            }
        }
    }

    fn apply(&mut self, grad: &LayerGrad, lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            *w -= lr * g;
        }
        for (b, g) in self.biases.iter_mut().zip(&grad.biases) {
            *b -= lr * g;
        }
    }

    fn zeros_like(&self) -> LayerGrad {
        LayerGrad {
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.biases.len()],
        }
    }
}

#[derive(Clone, Debug)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Gradients for every parameter of a [`QNetwork`].
#[derive(Clone, Debug)]
pub struct NetGrads {
    pub trunk: Vec<LayerGrad>,
    pub value_head: LayerGrad,
    pub advantage_head: LayerGrad,
}

/// Dueling aggregation: Q(s, a) = V(s) + A(s, a) - mean_a' A(s, a').
pub fn dueling_q(value: f64, advantages: &[f64]) -> Vec<f64> {
    let mean = advantages.iter().sum::<f64>() / advantages.len() as f64;
    advantages.iter().map(|a| value + a - mean).collect()
}

/// Intermediate activations retained for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// Input plus the post-ReLU output of each trunk layer.
    layer_inputs: Vec<Vec<f64>>,
    /// Trunk pre-activations (for the ReLU gate).
    pre_activations: Vec<Vec<f64>>,
    pub value: f64,
    pub advantages: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    input_dim: usize,
    n_actions: usize,
    trunk: Vec<LinearLayer>,
    value_head: LinearLayer,
    advantage_head: LinearLayer,
}

impl QNetwork {
    pub fn new(input_dim: usize, hidden: &[usize], n_actions: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(input_dim >= 1 && n_actions >= 1);
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut dim = input_dim;
        for h in hidden {
            trunk.push(LinearLayer::glorot(dim, *h, rng));
            dim = *h;
        }
        let value_head = LinearLayer::glorot(dim, 1, rng);
        let advantage_head = LinearLayer::glorot(dim, n_actions, rng);
        QNetwork {
            input_dim,
            n_actions,
            trunk,
            value_head,
            advantage_head,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).q
    }

    pub fn forward_trace(&self, x: &[f64]) -> ForwardTrace {
        assert_eq!(x.len(), self.input_dim, "state length mismatch");
        let mut layer_inputs = Vec::with_capacity(self.trunk.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.trunk.len());
        layer_inputs.push(x.to_vec());
        for layer in &self.trunk {
            let mut z = vec![0.0; layer.out_dim];
            layer.forward(layer_inputs.last().unwrap(), &mut z);
            let activated: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            pre_activations.push(z);
            layer_inputs.push(activated);
        }
        let trunk_out = layer_inputs.last().unwrap();
        let mut value = [0.0];
        self.value_head.forward(trunk_out, &mut value);
        let mut advantages = vec![0.0; self.n_actions];
        self.advantage_head.forward(trunk_out, &mut advantages);
        let q = dueling_q(value[0], &advantages);
        ForwardTrace {
            layer_inputs,
            pre_activations,
            value: value[0],
            advantages,
            q,
        }
    }

    pub fn zero_grads(&self) -> NetGrads {
        NetGrads {
            trunk: self.trunk.iter().map(LinearLayer::zeros_like).collect(),
            value_head: self.value_head.zeros_like(),
            advantage_head: self.advantage_head.zeros_like(),
        }
    }

    /// Backpropagates dL/dQ through the dueling aggregation, heads and
    /// trunk, accumulating into `grads`.
    pub fn backward(&self, trace: &ForwardTrace, dq: &[f64], grads: &mut NetGrads) {
        debug_assert_eq!(dq.len(), self.n_actions);
        let g_sum: f64 = dq.iter().sum();
        let g_mean = g_sum / self.n_actions as f64;
        let d_adv: Vec<f64> = dq.iter().map(|g| g - g_mean).collect();
        let trunk_out = trace.layer_inputs.last().unwrap();

        let mut dx_value = vec![0.0; trunk_out.len()];
        self.value_head
            .backward(trunk_out, &[g_sum], &mut grads.value_head, &mut dx_value);
        let mut dx = vec![0.0; trunk_out.len()];
        self.advantage_head
            .backward(trunk_out, &d_adv, &mut grads.advantage_head, &mut dx);
        for (d, dv) in dx.iter_mut().zip(&dx_value) {
            *d += dv;
        }

        for (i, layer) in self.trunk.iter().enumerate().rev() {
            let dz: Vec<f64> = dx
                .iter()
                .zip(&trace.pre_activations[i])
                .map(|(d, z)| if *z > 0.0 { *d } else { 0.0 })
                .collect();
            let mut dx_prev = vec![0.0; layer.in_dim];
            layer.backward(
                &trace.layer_inputs[i],
                &dz,
                &mut grads.trunk[i],
                &mut dx_prev,
            );
            dx = dx_prev;
        }
    }

    /// One SGD step: p -= lr * grad.
    pub fn apply_gradients(&mut self, grads: &NetGrads, lr: f64) {
        for (layer, grad) in self.trunk.iter_mut().zip(&grads.trunk) {
            layer.apply(grad, lr);
        }
        self.value_head.apply(&grads.value_head, lr);
        self.advantage_head.apply(&grads.advantage_head, lr);
    }

    /// Flat views over all parameters, used by the finite-difference checks.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in self.layers() {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        let mut offset = 0;
        for layer in self.layers_mut() {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        debug_assert_eq!(offset, params.len());
    }

    pub fn flat_grads(grads: &NetGrads) -> Vec<f64> {
        let mut out = Vec::new();
        for g in grads
            .trunk
            .iter()
            .chain([&grads.value_head, &grads.advantage_head])
        {
            out.extend_from_slice(&g.weights);
            out.extend_from_slice(&g.biases);
        }
        out
    }

    fn layers(&self) -> impl Iterator<Item = &LinearLayer> {
        self.trunk
            .iter()
            .chain([&self.value_head, &self.advantage_head])
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut LinearLayer> {
        self.trunk
            .iter_mut()
            .chain([&mut self.value_head, &mut self.advantage_head])
    }
}
