//! Minimal dense feed-forward engine: enough network to make an activation
//! function earn its keep, and nothing more.
//!
//! The benchmark topology is a linear layer that keeps the input width,
//! a stack of activated hidden layers, and a linear (or sigmoid) output
//! layer, so a preset with four hidden layers owns six weight matrices.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activations::{
    self, ActivationKind, EvalMode, Hyperparams,
};
use crate::matrix::Matrix;

pub const ADAM_DEFAULT_LR: f64 = 1e-3;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const SGD_DEFAULT_LR: f64 = 0.01;
/// Batch drawn per pretraining epoch.
pub const PRETRAIN_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training diverged: {0}")]
    Diverged(String),
}

// ───────────────────────── configuration ─────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
    pub hidden_activation: ActivationKind,
    /// Applied after the final layer; `None` leaves the output linear.
    pub output_activation: Option<ActivationKind>,
    pub seed: u64,
}

impl NetworkConfig {
    /// The inference benchmark network: 64-wide linear input layer, four
    /// hidden layers of 1024 units, sixteen linear outputs.
    pub fn inference_benchmark(hidden_activation: ActivationKind, seed: u64) -> Self {
        NetworkConfig {
            input_dim: 64,
            hidden_layers: 4,
            hidden_width: 1024,
            output_dim: 16,
            hidden_activation,
            output_activation: None,
            seed,
        }
    }

    /// The digit-classification network: 784 inputs, the same four hidden
    /// layers, ten sigmoid outputs.
    pub fn mnist(hidden_activation: ActivationKind, seed: u64) -> Self {
        NetworkConfig {
            input_dim: 784,
            hidden_layers: 4,
            hidden_width: 1024,
            output_dim: 10,
            hidden_activation,
            output_activation: Some(ActivationKind::Sigmoid),
            seed,
        }
    }

    fn validate(&self) -> Result<(), NetError> {
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("hidden_layers", self.hidden_layers),
            ("hidden_width", self.hidden_width),
            ("output_dim", self.output_dim),
        ] {
            if v == 0 {
                return Err(NetError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

// ───────────────────────── network ─────────────────────────

#[derive(Debug, Clone)]
pub struct DenseLayer {
    /// `[fan_in x fan_out]`, row i = outgoing weights of input unit i.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Option<ActivationKind>,
}

#[derive(Debug, Clone)]
pub struct DenseNetwork {
    pub layers: Vec<DenseLayer>,
    pub hyperparams: Hyperparams,
}

impl DenseNetwork {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Self {
        DenseNetwork {
            layers,
            hyperparams: Hyperparams::default(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weights.cols()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// The activation used on hidden layers, if any layer has one.
    pub fn hidden_activation(&self) -> Option<ActivationKind> {
        self.layers
            .iter()
            .rev()
            .skip(1)
            .find_map(|l| l.activation)
    }
}

/// Initialise from a config with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
/// weights and biases, deterministically from `config.seed`.
pub fn init_network(config: &NetworkConfig) -> Result<DenseNetwork, NetError> {
    use rand::SeedableRng;
    config.validate()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);

    // Dimension chain: width-preserving linear input layer, activated
    // hidden stack, then the output layer.
    let mut dims = vec![config.input_dim, config.input_dim];
    dims.push(config.hidden_width);
    for _ in 1..config.hidden_layers {
        dims.push(config.hidden_width);
    }
    dims.push(config.output_dim);

    let mut layers = Vec::with_capacity(dims.len() - 1);
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = || loop {
            // open interval on both ends
            let v = rng.gen_range(-bound..bound);
            if v != -bound {
                return v;
            }
        };
        let weights = Matrix::from_fn(fan_in, fan_out, |_, _| draw());
        let bias: Vec<f64> = (0..fan_out).map(|_| draw()).collect();
        layers.push(DenseLayer {
            weights,
            bias,
            activation: None,
        });
    }
    // input linear layer stays bare; hidden layers get the activation;
    // the last layer gets the output activation if configured
    let last = layers.len() - 1;
    for layer in layers.iter_mut().take(last).skip(1) {
        layer.activation = Some(config.hidden_activation);
    }
    layers[last].activation = config.output_activation;

    Ok(DenseNetwork::from_layers(layers))
}

fn affine(layer: &DenseLayer, input: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(input.rows(), layer.weights.cols());
    for i in 0..out.rows() {
        out.row_mut(i).copy_from_slice(&layer.bias);
    }
    input.matmul_into(&layer.weights, &mut out);
    out
}

/// Run a batch through the network. `batch` is `[n x input_dim]`.
pub fn forward<R: Rng + ?Sized>(
    net: &DenseNetwork,
    batch: &Matrix,
    mode: EvalMode,
    rng: &mut R,
) -> Result<Matrix, NetError> {
    if batch.cols() != net.input_dim() {
        return Err(NetError::ShapeMismatch(format!(
            "batch has {} columns, network expects {}",
            batch.cols(),
            net.input_dim()
        )));
    }
    let mut x = affine(&net.layers[0], batch);
    x = match net.layers[0].activation {
        Some(kind) => activations::apply_with_params(kind, &net.hyperparams, x, mode, rng),
        None => x,
    };
    for layer in &net.layers[1..] {
        let z = affine(layer, &x);
        x = match layer.activation {
            Some(kind) => activations::apply_with_params(kind, &net.hyperparams, z, mode, rng),
            None => z,
        };
    }
    Ok(x)
}

// ───────────────────────── losses and backprop ─────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    /// Mean squared error over every output element.
    Mse,
    /// Binary cross-entropy applied independently to each output node.
    PerNodeBce,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    /// One (weight gradient, bias gradient) pair per layer.
    pub layers: Vec<(Matrix, Vec<f64>)>,
}

const BCE_CLAMP: f64 = 1e-12;

/// Forward plus backprop. Returns per-layer gradients of the batch-mean loss
/// and the loss itself. In train mode the stochastic kinds draw from `rng`
/// and the same realisation is used on the way back.
pub fn backward<R: Rng + ?Sized>(
    net: &DenseNetwork,
    batch: &Matrix,
    targets: &Matrix,
    loss: Loss,
    mode: EvalMode,
    rng: &mut R,
) -> Result<(Gradients, f64), NetError> {
    if batch.cols() != net.input_dim() {
        return Err(NetError::ShapeMismatch(format!(
            "batch has {} columns, network expects {}",
            batch.cols(),
            net.input_dim()
        )));
    }
    if targets.rows() != batch.rows() || targets.cols() != net.output_dim() {
        return Err(NetError::ShapeMismatch(format!(
            "targets are {}x{}, expected {}x{}",
            targets.rows(),
            targets.cols(),
            batch.rows(),
            net.output_dim()
        )));
    }

    // forward, caching layer inputs, pre-activations, and any stochastic
    // multipliers realised on this pass
    let n_layers = net.layers.len();
    let mut inputs: Vec<Matrix> = Vec::with_capacity(n_layers);
    let mut preacts: Vec<Matrix> = Vec::with_capacity(n_layers);
    let mut multipliers: Vec<Option<Matrix>> = Vec::with_capacity(n_layers);
    let mut x = batch.clone();
    for layer in &net.layers {
        let z = affine(layer, &x);
        inputs.push(x);
        preacts.push(z.clone());
        let (a, mult) = match layer.activation {
            Some(kind) => {
                activations::apply_with_multiplier(kind, &net.hyperparams, z, mode, rng)
            }
            None => (z, None),
        };
        multipliers.push(mult);
        x = a;
    }
    let output = x;

    let count = (output.rows() * output.cols()) as f64;
    let last = n_layers - 1;
    // Fuse sigmoid + per-node BCE so saturated outputs stay stable.
    let fused_sigmoid_bce =
        loss == Loss::PerNodeBce && net.layers[last].activation == Some(ActivationKind::Sigmoid);

    let (loss_value, mut delta) = match loss {
        Loss::Mse => {
            let mut l = 0.0;
            let mut d = Matrix::zeros(output.rows(), output.cols());
            for i in 0..output.rows() {
                for j in 0..output.cols() {
                    let e = output.get(i, j) - targets.get(i, j);
                    l += e * e;
                    d.set(i, j, 2.0 * e / count);
                }
            }
            (l / count, d)
        }
        Loss::PerNodeBce if fused_sigmoid_bce => {
            // loss from the pre-sigmoid values z: max(z,0) - z t + ln(1+e^-|z|)
            let z = &preacts[last];
            let mut l = 0.0;
            let mut d = Matrix::zeros(output.rows(), output.cols());
            for i in 0..output.rows() {
                for j in 0..output.cols() {
                    let zv = z.get(i, j);
                    let t = targets.get(i, j);
                    l += zv.max(0.0) - zv * t + (-zv.abs()).exp().ln_1p();
                    // gradient directly w.r.t. z
                    d.set(i, j, (output.get(i, j) - t) / count);
                }
            }
            (l / count, d)
        }
        Loss::PerNodeBce => {
            let mut l = 0.0;
            let mut d = Matrix::zeros(output.rows(), output.cols());
            for i in 0..output.rows() {
                for j in 0..output.cols() {
                    let o = output.get(i, j).clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                    let t = targets.get(i, j);
                    l -= t * o.ln() + (1.0 - t) * (1.0 - o).ln();
                    d.set(i, j, (-t / o + (1.0 - t) / (1.0 - o)) / count);
                }
            }
            (l / count, d)
        }
    };

    let mut grads: Vec<(Matrix, Vec<f64>)> = Vec::with_capacity(n_layers);
    for l in (0..n_layers).rev() {
        let skip_activation = l == last && fused_sigmoid_bce;
        if !skip_activation {
            delta = match (&multipliers[l], net.layers[l].activation) {
                (Some(mult), _) => {
                    // replay the train-time mask
                    let mut d = delta;
                    for (dv, m) in d.data_mut().iter_mut().zip(mult.data()) {
                        *dv *= m;
                    }
                    d
                }
                (None, Some(kind)) => {
                    activations::backward_through(kind, &net.hyperparams, &preacts[l], &delta)
                }
                (None, None) => delta,
            };
        }
        let dw = inputs[l].t_matmul(&delta);
        let mut db = vec![0.0; delta.cols()];
        for i in 0..delta.rows() {
            for (b, v) in db.iter_mut().zip(delta.row(i)) {
                *b += v;
            }
        }
        if l > 0 {
            let next_delta = delta.matmul_t(&net.layers[l].weights);
            delta = next_delta;
        }
        grads.push((dw, db));
    }
    grads.reverse();

    Ok((Gradients { layers: grads }, loss_value))
}

// ───────────────────────── optimizers ─────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    step_count: u64,
    // first and second moment estimates, lazily shaped on the first step
    moments: Option<Vec<(Matrix, Vec<f64>)>>,
    velocities: Option<Vec<(Matrix, Vec<f64>)>>,
}

impl OptimizerState {
    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerState {
            kind: OptimizerKind::Sgd,
            learning_rate,
            step_count: 0,
            moments: None,
            velocities: None,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        OptimizerState {
            kind: OptimizerKind::Adam,
            learning_rate,
            step_count: 0,
            moments: None,
            velocities: None,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step_count
    }
}

/// Apply one optimizer update in place. Rejects non-finite gradients so a
/// diverging run fails loudly instead of poisoning the parameters.
pub fn optimizer_step(
    state: &mut OptimizerState,
    net: &mut DenseNetwork,
    grads: &Gradients,
) -> Result<(), NetError> {
    if grads.layers.len() != net.layers.len() {
        return Err(NetError::ShapeMismatch(format!(
            "{} gradient layers for {} network layers",
            grads.layers.len(),
            net.layers.len()
        )));
    }
    for (l, (dw, db)) in grads.layers.iter().enumerate() {
        let layer = &net.layers[l];
        if dw.rows() != layer.weights.rows()
            || dw.cols() != layer.weights.cols()
            || db.len() != layer.bias.len()
        {
            return Err(NetError::ShapeMismatch(format!(
                "gradient shape mismatch at layer {l}"
            )));
        }
        if !dw.is_finite() || db.iter().any(|v| !v.is_finite()) {
            return Err(NetError::Diverged(format!(
                "non-finite gradient at layer {l}"
            )));
        }
    }

    match state.kind {
        OptimizerKind::Sgd => {
            let lr = state.learning_rate;
            for (layer, (dw, db)) in net.layers.iter_mut().zip(&grads.layers) {
                for (w, g) in layer.weights.data_mut().iter_mut().zip(dw.data()) {
                    *w -= lr * g;
                }
                for (b, g) in layer.bias.iter_mut().zip(db) {
                    *b -= lr * g;
                }
            }
            state.step_count += 1;
        }
        OptimizerKind::Adam => {
            if state.moments.is_none() {
                let zeros: Vec<(Matrix, Vec<f64>)> = net
                    .layers
                    .iter()
                    .map(|l| {
                        (
                            Matrix::zeros(l.weights.rows(), l.weights.cols()),
                            vec![0.0; l.bias.len()],
                        )
                    })
                    .collect();
                state.moments = Some(zeros.clone());
                state.velocities = Some(zeros);
            }
            state.step_count += 1;
            let t = state.step_count as i32;
            let lr = state.learning_rate;
            let bias1 = 1.0 - ADAM_BETA1.powi(t);
            let bias2 = 1.0 - ADAM_BETA2.powi(t);
            let moments = state.moments.as_mut().unwrap();
            let velocities = state.velocities.as_mut().unwrap();
            for l in 0..net.layers.len() {
                let (dw, db) = &grads.layers[l];
                let layer = &mut net.layers[l];
                let (mw, mb) = &mut moments[l];
                let (vw, vb) = &mut velocities[l];
                for (((w, g), m), v) in layer
                    .weights
                    .data_mut()
                    .iter_mut()
                    .zip(dw.data())
                    .zip(mw.data_mut())
                    .zip(vw.data_mut())
                {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = *m / bias1;
                    let v_hat = *v / bias2;
                    *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                }
                for (((b, g), m), v) in
                    layer.bias.iter_mut().zip(db).zip(mb.iter_mut()).zip(vb.iter_mut())
                {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = *m / bias1;
                    let v_hat = *v / bias2;
                    *b -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                }
            }
        }
    }
    Ok(())
}

/// Warm a freshly initialised network with Adam updates against freshly
/// drawn uniform(-1,1) random input/target batches, one batch per epoch,
/// under MSE. Leaves the network untouched when `epochs` is zero.
pub fn pretrain_random<R: Rng + ?Sized>(
    net: &mut DenseNetwork,
    epochs: usize,
    rng: &mut R,
) -> Result<(), NetError> {
    let in_dim = net.input_dim();
    let out_dim = net.output_dim();
    let mut opt = OptimizerState::adam(ADAM_DEFAULT_LR);
    for epoch in 0..epochs {
        let batch = Matrix::from_fn(PRETRAIN_BATCH, in_dim, |_, _| rng.gen_range(-1.0..1.0));
        let targets = Matrix::from_fn(PRETRAIN_BATCH, out_dim, |_, _| rng.gen_range(-1.0..1.0));
        let (grads, loss) = backward(net, &batch, &targets, Loss::Mse, EvalMode::Train, rng)?;
        if !loss.is_finite() {
            return Err(NetError::Diverged(format!(
                "non-finite loss at pretrain epoch {epoch}"
            )));
        }
        optimizer_step(&mut opt, net, &grads)
            .map_err(|e| NetError::Diverged(format!("pretrain epoch {epoch}: {e}")))?;
    }
    Ok(())
}
