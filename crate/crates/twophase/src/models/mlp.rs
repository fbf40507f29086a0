//! Small dense MLP with mean-squared-error loss.
//!
//! Weights live in one flat [`Vector`], layer-major: each layer's weight
//! matrix row-major (out x in), then its bias. The output layer is linear,
//! matching MSE regression onto one-hot targets. Gradients come from
//! plain backpropagation.
//!
//! Full-batch and mini-batch evaluations run over fixed-size example
//! chunks; chunk results are combined in index order, so results are
//! bit-identical regardless of thread count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::data::{Dataset, Matrix};
use crate::numerics::Vector;

/// Examples per work unit; fixed so the reduction tree never depends on
/// the number of threads.
const CHUNK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a` (and the
    /// pre-activation `z` for relu).
    #[inline]
    fn derivative(self, a: f64, z: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Feed-forward network: affine + activation per hidden layer, linear
/// output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    /// Flattened parameters, layer-major (weights row-major, then bias).
    pub weights: Vector,
    hidden_activation: Activation,
}

impl MlpModel {
    /// Zero-initialized model.
    pub fn new(layer_dims: Vec<usize>, hidden_activation: Activation) -> Self {
        Self::with_weights(
            layer_dims.clone(),
            hidden_activation,
            Vector::zeros(Self::param_count(&layer_dims)),
        )
    }

    pub fn with_weights(
        layer_dims: Vec<usize>,
        hidden_activation: Activation,
        weights: Vector,
    ) -> Self {
        assert!(
            layer_dims.len() >= 2,
            "MlpModel: need at least input and output dims"
        );
        assert!(
            layer_dims.iter().all(|&d| d > 0),
            "MlpModel: all layer dims must be positive"
        );
        assert_eq!(
            weights.len(),
            Self::param_count(&layer_dims),
            "MlpModel: weight vector length does not match layer dims"
        );
        MlpModel {
            layer_dims,
            weights,
            hidden_activation,
        }
    }

    /// Seeded init: each layer uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in)).
    pub fn seeded(layer_dims: Vec<usize>, hidden_activation: Activation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(Self::param_count(&layer_dims));
        for win in layer_dims.windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_out * fan_in + fan_out {
                values.push(rng.random_range(-bound..bound));
            }
        }
        Self::with_weights(layer_dims, hidden_activation, Vector::new(values))
    }

    /// Trainable parameter count for the given layer dims.
    pub fn param_count(layer_dims: &[usize]) -> usize {
        layer_dims
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Offset of layer `l`'s weight matrix in the flat parameter vector.
    fn layer_offset(&self, l: usize) -> usize {
        self.layer_dims
            .windows(2)
            .take(l)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Forward pass with the model's own weights.
    pub fn forward(&self, inputs: &Matrix) -> Matrix {
        self.forward_with(&self.weights, inputs)
    }

    /// Forward pass with explicit weights (the optimizer's currency).
    pub fn forward_with(&self, weights: &Vector, inputs: &Matrix) -> Matrix {
        assert_eq!(
            inputs.cols(),
            self.input_dim(),
            "mlp_forward: input width {} does not match model input dim {}",
            inputs.cols(),
            self.input_dim()
        );
        assert_eq!(weights.len(), Self::param_count(&self.layer_dims));
        let mut out = Matrix::zeros(inputs.rows(), self.output_dim());
        let mut scratch = Scratch::new(&self.layer_dims);
        for i in 0..inputs.rows() {
            self.forward_one(weights, inputs.row(i), &mut scratch);
            out.row_mut(i).copy_from_slice(scratch.output());
        }
        out
    }

    /// Forward one example; activations stay in `scratch`.
    fn forward_one(&self, weights: &Vector, input: &[f64], scratch: &mut Scratch) {
        let n_layers = self.layer_dims.len() - 1;
        scratch.activations[0].copy_from_slice(input);
        let w = weights.as_slice();
        let mut offset = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let (w_l, b_l) = {
                let base = offset;
                (&w[base..base + n_out * n_in], &w[base + n_out * n_in..base + n_out * n_in + n_out])
            };
            offset += n_out * n_in + n_out;
            let (lower, upper) = scratch.activations.split_at_mut(l + 1);
            let a_in = &lower[l];
            let a_out = &mut upper[0];
            let z_out = &mut scratch.pre_activations[l];
            for j in 0..n_out {
                let row = &w_l[j * n_in..(j + 1) * n_in];
                let mut z = b_l[j];
                for i in 0..n_in {
                    z += row[i] * a_in[i];
                }
                z_out[j] = z;
                a_out[j] = if l + 1 == n_layers {
                    z // linear output layer
                } else {
                    self.hidden_activation.apply(z)
                };
            }
        }
    }

    /// Backward pass for one example. The output delta must already hold
    /// the raw residual `pred - target`; the `2 / (B*M)` mean scaling is
    /// applied once to the accumulated gradient.
    fn backward_one(&self, weights: &Vector, scratch: &mut Scratch, grad: &mut [f64]) {
        let n_layers = self.layer_dims.len() - 1;
        let w = weights.as_slice();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let base = self.layer_offset(l);
            let w_l = &w[base..base + n_out * n_in];
            // accumulate dL/dW and dL/db
            {
                let (g_w, g_b) = grad[base..base + n_out * n_in + n_out].split_at_mut(n_out * n_in);
                let a_in = &scratch.activations[l];
                let delta = &scratch.delta[l + 1];
                for j in 0..n_out {
                    let dj = delta[j];
                    let g_row = &mut g_w[j * n_in..(j + 1) * n_in];
                    for i in 0..n_in {
                        g_row[i] += dj * a_in[i];
                    }
                    g_b[j] += dj;
                }
            }
            // propagate delta to the previous layer
            if l > 0 {
                let act = self.hidden_activation;
                let (delta_in, delta_out) = {
                    let (lower, upper) = scratch.delta.split_at_mut(l + 1);
                    (&mut lower[l], &upper[0])
                };
                delta_in.iter_mut().for_each(|d| *d = 0.0);
                for j in 0..n_out {
                    let dj = delta_out[j];
                    let row = &w_l[j * n_in..(j + 1) * n_in];
                    for i in 0..n_in {
                        delta_in[i] += row[i] * dj;
                    }
                }
                let a = &scratch.activations[l];
                let z = &scratch.pre_activations[l - 1];
                for i in 0..n_in {
                    delta_in[i] *= act.derivative(a[i], z[i]);
                }
            }
        }
    }

    /// Sum of squared errors and unscaled gradient over one chunk of
    /// example indices.
    fn chunk_loss_grad(
        &self,
        weights: &Vector,
        data: &Dataset,
        idx: &[usize],
        with_grad: bool,
    ) -> (f64, Option<Vec<f64>>) {
        let mut scratch = Scratch::new(&self.layer_dims);
        let mut grad = if with_grad {
            Some(vec![0.0; weights.len()])
        } else {
            None
        };
        let m = self.output_dim();
        let mut sq_sum = 0.0;
        for &i in idx {
            self.forward_one(weights, data.inputs.row(i), &mut scratch);
            let target = data.targets.row(i);
            let pred = scratch.activations.last().unwrap();
            let delta_out = scratch.delta.last_mut().unwrap();
            let mut example_sq = 0.0;
            for j in 0..m {
                let e = pred[j] - target[j];
                example_sq += e * e;
                delta_out[j] = e;
            }
            sq_sum += example_sq;
            if let Some(g) = grad.as_mut() {
                self.backward_one(weights, &mut scratch, g);
            }
        }
        (sq_sum, grad)
    }

    /// MSE and gradient over the examples selected by `idx` (all examples
    /// when `None`). The mean runs over examples and output components.
    pub fn loss_grad_with(
        &self,
        weights: &Vector,
        data: &Dataset,
        idx: Option<&[usize]>,
    ) -> (f64, Vector) {
        let (sq_sum, grad, count) = self.reduce(weights, data, idx, true);
        let mut grad = Vector::new(grad.expect("gradient requested"));
        let scale = 1.0 / (count * self.output_dim()) as f64;
        grad.scale(2.0 * scale);
        (sq_sum * scale, grad)
    }

    /// Forward-only MSE over the examples selected by `idx`.
    pub fn loss_with(&self, weights: &Vector, data: &Dataset, idx: Option<&[usize]>) -> f64 {
        let (sq_sum, _, count) = self.reduce(weights, data, idx, false);
        sq_sum / (count * self.output_dim()) as f64
    }

    fn reduce(
        &self,
        weights: &Vector,
        data: &Dataset,
        idx: Option<&[usize]>,
        with_grad: bool,
    ) -> (f64, Option<Vec<f64>>, usize) {
        assert_eq!(
            data.input_dim(),
            self.input_dim(),
            "mlp loss: dataset input width does not match model"
        );
        assert_eq!(
            data.output_dim(),
            self.output_dim(),
            "mlp loss: dataset output width does not match model"
        );
        let all: Vec<usize>;
        let idx = match idx {
            Some(idx) => idx,
            None => {
                all = (0..data.len()).collect();
                &all
            }
        };
        assert!(!idx.is_empty(), "mlp loss: empty batch");

        // one fixed reduction tree: chunk results combined in index order
        let partials: Vec<(f64, Option<Vec<f64>>)> = idx
            .par_chunks(CHUNK)
            .map(|chunk| self.chunk_loss_grad(weights, data, chunk, with_grad))
            .collect();

        let mut sq_sum = 0.0;
        let mut grad = if with_grad {
            Some(vec![0.0; weights.len()])
        } else {
            None
        };
        for (s, g) in partials {
            sq_sum += s;
            if let (Some(total), Some(part)) = (grad.as_mut(), g) {
                for (t, p) in total.iter_mut().zip(part.iter()) {
                    *t += p;
                }
            }
        }
        (sq_sum, grad, idx.len())
    }
}

/// Per-example work buffers, reused across a chunk.
struct Scratch {
    /// `activations[l]` is the output of layer `l` (layer 0 = the input).
    activations: Vec<Vec<f64>>,
    /// `pre_activations[l]` is the affine output feeding hidden layer `l+1`.
    pre_activations: Vec<Vec<f64>>,
    /// `delta[l]` is dL/d(activations[l]) scaled by the caller.
    delta: Vec<Vec<f64>>,
}

impl Scratch {
    fn new(layer_dims: &[usize]) -> Self {
        Scratch {
            activations: layer_dims.iter().map(|&d| vec![0.0; d]).collect(),
            pre_activations: layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect(),
            delta: layer_dims.iter().map(|&d| vec![0.0; d]).collect(),
        }
    }

    fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

/// Standard affine + activation forward pass; shape K x M.
pub fn mlp_forward(model: &MlpModel, inputs: &Matrix) -> Matrix {
    model.forward(inputs)
}

/// MSE and backpropagated gradient over a batch (`None` = full batch).
pub fn mlp_loss_grad(model: &MlpModel, data: &Dataset, idx: Option<&[usize]>) -> (f64, Vector) {
    model.loss_grad_with(&model.weights, data, idx)
}
