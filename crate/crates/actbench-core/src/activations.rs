//! Elementwise activation kernels and their derivatives.
//!
//! The 26 functions fall into three groups: 21 ordinary activations, the
//! four dropout variants (random in training, pass-through in eval), and the
//! identity baseline. Softmax, Softmin and LogSoftmax are the odd ones out:
//! they reduce over the last axis, so their derivative is a full per-row
//! Jacobian rather than a diagonal.
//!
//! NaN inputs propagate to the output (for the softmax family a NaN poisons
//! its whole row, since every entry shares the row sum).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

/// SELU's fixed self-normalising constants.
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;
pub const SELU_SCALE: f64 = 1.050_700_987_355_480_5;

/// Above this, softplus(x) is within 3e-9 of x and we pass the input through
/// rather than risk exp overflow.
const SOFTPLUS_LINEAR_THRESHOLD: f64 = 20.0;

// ───────────────────────── kinds and groups ─────────────────────────

/// Every activation the benchmark sweeps, in the row order used by the
/// timing tables: activations alphabetically, then dropouts, then identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActivationKind {
    CELU,
    ELU,
    GELU,
    Hardshrink,
    Hardtanh,
    LeakyReLU,
    LogSigmoid,
    LogSoftmax,
    PReLU,
    RReLU,
    ReLU,
    ReLU6,
    SELU,
    Sigmoid,
    Softmax,
    Softmin,
    Softplus,
    Softshrink,
    Softsign,
    Tanh,
    Tanhshrink,
    AlphaDropout,
    Dropout,
    Dropout2d,
    Dropout3d,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FunctionGroup {
    Activation,
    Dropout,
    Identity,
}

/// Train vs eval switch. Only the dropout family and RReLU care.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    Train,
    Eval,
}

#[derive(Debug, Error, PartialEq)]
pub enum ActivationError {
    #[error("unknown activation '{0}'; valid names: {1}")]
    UnknownName(String, String),
}

use ActivationKind::*;

impl ActivationKind {
    /// All 26 kinds in canonical table order.
    pub fn all() -> &'static [ActivationKind] {
        &[
            CELU, ELU, GELU, Hardshrink, Hardtanh, LeakyReLU, LogSigmoid, LogSoftmax, PReLU,
            RReLU, ReLU, ReLU6, SELU, Sigmoid, Softmax, Softmin, Softplus, Softshrink, Softsign,
            Tanh, Tanhshrink, AlphaDropout, Dropout, Dropout2d, Dropout3d, Identity,
        ]
    }

    pub fn group(self) -> FunctionGroup {
        match self {
            AlphaDropout | Dropout | Dropout2d | Dropout3d => FunctionGroup::Dropout,
            Identity => FunctionGroup::Identity,
            _ => FunctionGroup::Activation,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlphaDropout => "AlphaDropout",
            CELU => "CELU",
            Dropout => "Dropout",
            Dropout2d => "Dropout2d",
            Dropout3d => "Dropout3d",
            ELU => "ELU",
            GELU => "GELU",
            Hardshrink => "Hardshrink",
            Hardtanh => "Hardtanh",
            Identity => "Identity",
            LeakyReLU => "LeakyReLU",
            LogSigmoid => "LogSigmoid",
            LogSoftmax => "LogSoftmax",
            PReLU => "PReLU",
            ReLU => "ReLU",
            ReLU6 => "ReLU6",
            RReLU => "RReLU",
            SELU => "SELU",
            Sigmoid => "Sigmoid",
            Softmax => "Softmax",
            Softmin => "Softmin",
            Softplus => "Softplus",
            Softshrink => "Softshrink",
            Softsign => "Softsign",
            Tanh => "Tanh",
            Tanhshrink => "Tanhshrink",
        }
    }

    /// Case-insensitive lookup by canonical name.
    pub fn from_name(name: &str) -> Result<ActivationKind, ActivationError> {
        let lower = name.to_ascii_lowercase();
        for &k in Self::all() {
            if k.name().to_ascii_lowercase() == lower {
                return Ok(k);
            }
        }
        let valid = Self::all()
            .iter()
            .map(|k| k.name())
            .collect::<Vec<_>>()
            .join(", ");
        Err(ActivationError::UnknownName(name.to_string(), valid))
    }

    /// True for the three functions that normalise over the last axis.
    pub fn is_softmax_family(self) -> bool {
        matches!(self, Softmax | Softmin | LogSoftmax)
    }

    /// True when train-mode output depends on the RNG.
    pub fn is_stochastic(self) -> bool {
        matches!(self, AlphaDropout | Dropout | Dropout2d | Dropout3d | RReLU)
    }
}

impl std::fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::fmt::Display for FunctionGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FunctionGroup::Activation => "activation",
            FunctionGroup::Dropout => "dropout",
            FunctionGroup::Identity => "identity",
        })
    }
}

// ───────────────────────── hyperparameters ─────────────────────────

/// Fixed per-function hyperparameters. Defaults follow the framework
/// conventions the timing tables were produced under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub elu_alpha: f64,
    pub celu_alpha: f64,
    pub leaky_slope: f64,
    pub hardshrink_lambda: f64,
    pub softshrink_lambda: f64,
    pub prelu_weight: f64,
    pub rrelu_lower: f64,
    pub rrelu_upper: f64,
    pub dropout_p: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            elu_alpha: 1.0,
            celu_alpha: 1.0,
            leaky_slope: 0.01,
            hardshrink_lambda: 0.5,
            softshrink_lambda: 0.5,
            prelu_weight: 0.25,
            rrelu_lower: 1.0 / 8.0,
            rrelu_upper: 1.0 / 3.0,
            dropout_p: 0.5,
        }
    }
}

/// The slope RReLU uses outside training: the midpoint of its train-time
/// sampling range.
pub fn rrelu_eval_slope(lower: f64, upper: f64) -> f64 {
    (lower + upper) / 2.0
}

impl Hyperparams {
    pub fn rrelu_eval_slope(&self) -> f64 {
        rrelu_eval_slope(self.rrelu_lower, self.rrelu_upper)
    }

    /// AlphaDropout's affine correction (a, b) and the saturation value it
    /// mixes in, chosen so a standardised input keeps zero mean / unit
    /// variance in expectation.
    fn alpha_dropout_coeffs(&self) -> (f64, f64, f64) {
        let p = self.dropout_p;
        let alpha_prime = -SELU_SCALE * SELU_ALPHA;
        let a = 1.0 / ((1.0 - p) * (1.0 + p * alpha_prime * alpha_prime)).sqrt();
        let b = -a * alpha_prime * p;
        (a, b, alpha_prime)
    }
}

// ───────────────────────── scalar kernels ─────────────────────────

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softplus; exact passthrough above the threshold.
fn softplus(x: f64) -> f64 {
    if x > SOFTPLUS_LINEAR_THRESHOLD {
        x
    } else {
        x.max(0.0) + (-x.abs()).exp().ln_1p()
    }
}

/// Standard normal CDF via erfc, stable in both tails.
fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
fn phi_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn scalar_apply(kind: ActivationKind, p: &Hyperparams, x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    match kind {
        ReLU => {
            if x > 0.0 {
                x
            } else {
                0.0
            }
        }
        ReLU6 => x.clamp(0.0, 6.0),
        LeakyReLU => {
            if x >= 0.0 {
                x
            } else {
                p.leaky_slope * x
            }
        }
        PReLU => {
            if x >= 0.0 {
                x
            } else {
                p.prelu_weight * x
            }
        }
        RReLU => {
            // eval-mode slope; train mode samples per element elsewhere
            if x >= 0.0 {
                x
            } else {
                p.rrelu_eval_slope() * x
            }
        }
        ELU => {
            if x > 0.0 {
                x
            } else {
                p.elu_alpha * x.exp_m1()
            }
        }
        CELU => x.max(0.0) + (p.celu_alpha * (x / p.celu_alpha).exp_m1()).min(0.0),
        SELU => {
            if x > 0.0 {
                SELU_SCALE * x
            } else {
                SELU_SCALE * SELU_ALPHA * x.exp_m1()
            }
        }
        GELU => x * phi(x),
        Sigmoid => sigmoid(x),
        Tanh => x.tanh(),
        Softplus => softplus(x),
        LogSigmoid => -softplus(-x),
        Softsign => x / (1.0 + x.abs()),
        Tanhshrink => x - x.tanh(),
        Hardtanh => x.clamp(-1.0, 1.0),
        Hardshrink => {
            if x > p.hardshrink_lambda || x < -p.hardshrink_lambda {
                x
            } else {
                0.0
            }
        }
        Softshrink => {
            let l = p.softshrink_lambda;
            if x > l {
                x - l
            } else if x < -l {
                x + l
            } else {
                0.0
            }
        }
        Identity | AlphaDropout | Dropout | Dropout2d | Dropout3d => x,
        Softmax | Softmin | LogSoftmax => {
            unreachable!("softmax family is applied row-wise, not per scalar")
        }
    }
}

/// Scalar derivative; at a kink this returns the right-hand limit.
fn scalar_derivative(kind: ActivationKind, p: &Hyperparams, x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    match kind {
        ReLU => {
            if x >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
        ReLU6 => {
            if x >= 6.0 {
                0.0
            } else if x >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
        LeakyReLU => {
            if x >= 0.0 {
                1.0
            } else {
                p.leaky_slope
            }
        }
        PReLU => {
            if x >= 0.0 {
                1.0
            } else {
                p.prelu_weight
            }
        }
        RReLU => {
            if x >= 0.0 {
                1.0
            } else {
                p.rrelu_eval_slope()
            }
        }
        ELU => {
            if x >= 0.0 {
                1.0
            } else {
                p.elu_alpha * x.exp()
            }
        }
        CELU => {
            if x >= 0.0 {
                1.0
            } else {
                (x / p.celu_alpha).exp()
            }
        }
        SELU => {
            if x >= 0.0 {
                SELU_SCALE
            } else {
                SELU_SCALE * SELU_ALPHA * x.exp()
            }
        }
        GELU => phi(x) + x * phi_density(x),
        Sigmoid => {
            let s = sigmoid(x);
            s * (1.0 - s)
        }
        Tanh => {
            let t = x.tanh();
            1.0 - t * t
        }
        Softplus => sigmoid(x),
        LogSigmoid => sigmoid(-x),
        Softsign => {
            let d = 1.0 + x.abs();
            1.0 / (d * d)
        }
        Tanhshrink => {
            let t = x.tanh();
            t * t
        }
        Hardtanh => {
            if x >= 1.0 {
                0.0
            } else if x >= -1.0 {
                1.0
            } else {
                0.0
            }
        }
        Hardshrink => {
            let l = p.hardshrink_lambda;
            if x >= l {
                1.0
            } else if x >= -l {
                0.0
            } else {
                1.0
            }
        }
        Softshrink => {
            let l = p.softshrink_lambda;
            if x >= l {
                1.0
            } else if x >= -l {
                0.0
            } else {
                1.0
            }
        }
        // Eval-mode view of the random kinds: plain identity.
        Identity | AlphaDropout | Dropout | Dropout2d | Dropout3d => 1.0,
        Softmax | Softmin | LogSoftmax => {
            unreachable!("softmax family derivative is a row Jacobian")
        }
    }
}

// ───────────────────────── row-wise kernels ─────────────────────────

fn softmax_row(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

fn log_softmax_row(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter() {
        sum += (*v - max).exp();
    }
    let log_sum = max + sum.ln();
    for v in row.iter_mut() {
        *v -= log_sum;
    }
}

// ───────────────────────── public apply/derivative ─────────────────────────

/// Apply `kind` elementwise (row-wise for the softmax family), returning a
/// fresh matrix. In `Eval` mode the dropout family and RReLU are
/// deterministic; in `Train` mode they draw from `rng`.
pub fn apply<R: Rng + ?Sized>(
    kind: ActivationKind,
    input: &Matrix,
    mode: EvalMode,
    rng: &mut R,
) -> Matrix {
    apply_owned(kind, input.clone(), mode, rng)
}

/// In-place variant used on the hot path; identity really is a no-op here.
pub fn apply_owned<R: Rng + ?Sized>(
    kind: ActivationKind,
    input: Matrix,
    mode: EvalMode,
    rng: &mut R,
) -> Matrix {
    apply_with_params(kind, &Hyperparams::default(), input, mode, rng)
}

pub fn apply_with_params<R: Rng + ?Sized>(
    kind: ActivationKind,
    params: &Hyperparams,
    input: Matrix,
    mode: EvalMode,
    rng: &mut R,
) -> Matrix {
    apply_with_multiplier(kind, params, input, mode, rng).0
}

/// As `apply_with_params`, but for the stochastic kinds in train mode also
/// returns the elementwise factor d(output)/d(input) realised by this draw,
/// which backprop needs to replay the same mask.
pub fn apply_with_multiplier<R: Rng + ?Sized>(
    kind: ActivationKind,
    params: &Hyperparams,
    mut input: Matrix,
    mode: EvalMode,
    rng: &mut R,
) -> (Matrix, Option<Matrix>) {
    match kind {
        Identity => (input, None),
        Softmax => {
            for i in 0..input.rows() {
                softmax_row(input.row_mut(i));
            }
            (input, None)
        }
        Softmin => {
            // Softmin(x) = Softmax(-x), computed literally.
            for i in 0..input.rows() {
                let row = input.row_mut(i);
                for v in row.iter_mut() {
                    *v = -*v;
                }
                softmax_row(row);
            }
            (input, None)
        }
        LogSoftmax => {
            for i in 0..input.rows() {
                log_softmax_row(input.row_mut(i));
            }
            (input, None)
        }
        Dropout | Dropout2d | Dropout3d => {
            // All three dropout variants act identically on a 2-D batch:
            // each entry is its own channel.
            if mode == EvalMode::Eval {
                return (input, None);
            }
            let p = params.dropout_p;
            assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
            let keep_scale = 1.0 / (1.0 - p);
            let mut mult = Matrix::zeros(input.rows(), input.cols());
            for (v, m) in input.data_mut().iter_mut().zip(mult.data_mut()) {
                if rng.gen::<f64>() < p {
                    *v = 0.0;
                    *m = 0.0;
                } else {
                    *v *= keep_scale;
                    *m = keep_scale;
                }
            }
            (input, Some(mult))
        }
        AlphaDropout => {
            if mode == EvalMode::Eval {
                return (input, None);
            }
            let p = params.dropout_p;
            assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
            let (a, b, alpha_prime) = params.alpha_dropout_coeffs();
            let mut mult = Matrix::zeros(input.rows(), input.cols());
            for (v, m) in input.data_mut().iter_mut().zip(mult.data_mut()) {
                if rng.gen::<f64>() < p {
                    *v = a * alpha_prime + b;
                    *m = 0.0;
                } else {
                    *v = a * *v + b;
                    *m = a;
                }
            }
            (input, Some(mult))
        }
        RReLU if mode == EvalMode::Train => {
            let (lo, hi) = (params.rrelu_lower, params.rrelu_upper);
            let mut mult = Matrix::zeros(input.rows(), input.cols());
            for (v, m) in input.data_mut().iter_mut().zip(mult.data_mut()) {
                // One draw per element whether or not it is negative, so the
                // stream consumed is a function of shape alone.
                let slope = rng.gen_range(lo..hi);
                if *v < 0.0 {
                    *v *= slope;
                    *m = slope;
                } else {
                    *m = 1.0;
                }
            }
            (input, Some(mult))
        }
        _ => {
            input.map_inplace(|x| scalar_apply(kind, params, x));
            (input, None)
        }
    }
}

/// Derivative of an activation evaluated at `input`.
#[derive(Debug, Clone)]
pub enum Derivative {
    /// Elementwise functions: one entry per input element.
    Diagonal(Matrix),
    /// Softmax family: one dense cols x cols Jacobian per input row.
    RowJacobians(Vec<Matrix>),
}

/// Derivative under eval-mode semantics (dropout kinds differentiate as the
/// identity). At a kink the right-hand derivative is returned.
pub fn derivative(kind: ActivationKind, input: &Matrix) -> Derivative {
    derivative_with_params(kind, &Hyperparams::default(), input)
}

pub fn derivative_with_params(
    kind: ActivationKind,
    params: &Hyperparams,
    input: &Matrix,
) -> Derivative {
    if kind.is_softmax_family() {
        let mut jacobians = Vec::with_capacity(input.rows());
        for i in 0..input.rows() {
            jacobians.push(row_jacobian(kind, input.row(i)));
        }
        return Derivative::RowJacobians(jacobians);
    }
    Derivative::Diagonal(input.map(|x| scalar_derivative(kind, params, x)))
}

fn row_jacobian(kind: ActivationKind, row: &[f64]) -> Matrix {
    let d = row.len();
    let mut work = row.to_vec();
    match kind {
        Softmax => {
            softmax_row(&mut work);
            // J[i][j] = s_i (delta_ij - s_j)
            Matrix::from_fn(d, d, |i, j| {
                let delta = if i == j { 1.0 } else { 0.0 };
                work[i] * (delta - work[j])
            })
        }
        Softmin => {
            for v in work.iter_mut() {
                *v = -*v;
            }
            softmax_row(&mut work);
            // chain rule through the negation flips the sign
            Matrix::from_fn(d, d, |i, j| {
                let delta = if i == j { 1.0 } else { 0.0 };
                -work[i] * (delta - work[j])
            })
        }
        LogSoftmax => {
            softmax_row(&mut work);
            // J[i][j] = delta_ij - s_j
            Matrix::from_fn(d, d, |i, j| {
                let delta = if i == j { 1.0 } else { 0.0 };
                delta - work[j]
            })
        }
        _ => unreachable!(),
    }
}

/// Chain `upstream` gradients back through the activation at pre-activation
/// `input`, under eval-mode semantics (train-mode randomness is handled by
/// the caller via the multiplier from `apply_with_multiplier`).
pub fn backward_through(
    kind: ActivationKind,
    params: &Hyperparams,
    input: &Matrix,
    upstream: &Matrix,
) -> Matrix {
    assert_eq!(input.rows(), upstream.rows());
    assert_eq!(input.cols(), upstream.cols());
    if kind.is_softmax_family() {
        let d = input.cols();
        let mut out = Matrix::zeros(input.rows(), d);
        for i in 0..input.rows() {
            let mut s = input.row(i).to_vec();
            let up = upstream.row(i);
            let orow = out.row_mut(i);
            match kind {
                Softmax => {
                    softmax_row(&mut s);
                    let dot: f64 = up.iter().zip(&s).map(|(u, si)| u * si).sum();
                    for j in 0..d {
                        orow[j] = s[j] * (up[j] - dot);
                    }
                }
                Softmin => {
                    for v in s.iter_mut() {
                        *v = -*v;
                    }
                    softmax_row(&mut s);
                    let dot: f64 = up.iter().zip(&s).map(|(u, si)| u * si).sum();
                    for j in 0..d {
                        orow[j] = -s[j] * (up[j] - dot);
                    }
                }
                LogSoftmax => {
                    softmax_row(&mut s);
                    let total: f64 = up.iter().sum();
                    for j in 0..d {
                        orow[j] = up[j] - s[j] * total;
                    }
                }
                _ => unreachable!(),
            }
        }
        return out;
    }
    let mut out = upstream.clone();
    for (o, x) in out.data_mut().iter_mut().zip(input.data()) {
        *o *= scalar_derivative(kind, params, *x);
    }
    out
}
