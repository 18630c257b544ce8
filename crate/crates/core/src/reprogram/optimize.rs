//! Gradient search for a program under the logistic surrogate.

use serde::Serialize;

use crate::data::BernoulliModel;
use crate::error::{Error, Result};
use crate::flow::LossKind;
use crate::network::TwoLayerNet;
use crate::numerics::{SeededRng, Sign};

/// `p = c·softsign(q)` with `c = PROGRAM_SCALE_FACTOR·√d`.
pub const PROGRAM_SCALE_FACTOR: f64 = 1.2;

pub fn softsign(q: f64) -> f64 {
    q / (1.0 + q.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeConfig {
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    /// Initial `softsign(q)` entries are uniform on `(−init_scale, init_scale)`.
    pub init_scale: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            lr: 0.01,
            batch: 32,
            init_scale: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizedProgram {
    pub initial_p: Vec<f64>,
    pub p: Vec<f64>,
    /// Mean batch loss before each update.
    pub loss_curve: Vec<f64>,
}

/// Minibatch gradient descent on `ℓ_log(m·y·N(p + x))` over fresh samples from
/// `model`. The ReLU subgradient at a kink is taken as 0.
pub fn optimize_program(
    net: &TwoLayerNet,
    model: &BernoulliModel,
    m: Sign,
    cfg: &OptimizeConfig,
    rng: &mut SeededRng,
) -> Result<OptimizedProgram> {
    let d = net.input_dim();
    if model.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: model.dim() });
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    if cfg.steps > 0 && cfg.batch == 0 {
        return Err(Error::InvalidArgument("batch must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&cfg.init_scale) {
        return Err(Error::InvalidArgument("init_scale must lie in [0, 1)".into()));
    }
    let c = PROGRAM_SCALE_FACTOR * (d as f64).sqrt();
    let mut q: Vec<f64> = (0..d)
        .map(|_| {
            let s = rng.uniform_range(-cfg.init_scale, cfg.init_scale);
            s / (1.0 - s.abs())
        })
        .collect();
    let program = |q: &[f64]| -> Vec<f64> { q.iter().map(|&v| c * softsign(v)).collect() };
    let initial_p = program(&q);
    let mut p = initial_p.clone();
    let mut loss_curve = Vec::with_capacity(cfg.steps);
    let mut z = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let w = net.weights();
    let a = net.output_weights();
    for _ in 0..cfg.steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for _ in 0..cfg.batch {
            let s = model.sample_one(rng);
            for ((zi, pi), xi) in z.iter_mut().zip(&p).zip(&s.x) {
                *zi = pi + xi;
            }
            let pre = w.matvec(&z)?;
            let out: f64 = pre.iter().zip(a).map(|(u, a)| a * u.max(0.0)).sum();
            let sgn = m.value() * s.y.value();
            let (loss, dloss) = LossKind::Logistic.value_and_derivative(sgn * out);
            total += loss;
            let scale = dloss * sgn;
            for (j, u) in pre.iter().enumerate() {
                if *u > 0.0 {
                    let coef = scale * a[j];
                    for (g, wv) in grad.iter_mut().zip(w.row(j)) {
                        *g += coef * wv;
                    }
                }
            }
        }
        let inv = 1.0 / cfg.batch as f64;
        loss_curve.push(total * inv);
        for (qi, g) in q.iter_mut().zip(&grad) {
            let dp_dq = c / (1.0 + qi.abs()).powi(2);
            *qi -= cfg.lr * g * inv * dp_dq;
        }
        p = program(&q);
    }
    Ok(OptimizedProgram { initial_p, p, loss_curve })
}
