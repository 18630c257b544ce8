//! Euler discretisation of the subgradient flow on the empirical loss
//! `L(θ) = Σ ℓ(y_i N_θ(x_i))`, with trajectory diagnostics.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::network::TwoLayerNet;
use crate::numerics::{cosine, dot, norm, Matrix, SeededRng, Sign};

/// Parameters `θ = (w_1, …, w_k, a_1, …, a_k)`.
pub type WeightVector = TwoLayerNet;

/// Retry budget of [`balanced_live_init`].
pub const LIVENESS_RETRIES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Exponential,
    Logistic,
}

impl LossKind {
    /// `(ℓ(u), ℓ′(u))`. The logistic branch never exponentiates a positive number.
    pub fn value_and_derivative(self, u: f64) -> (f64, f64) {
        match self {
            LossKind::Exponential => {
                let e = (-u).exp();
                (e, -e)
            }
            LossKind::Logistic => {
                let e = (-u.abs()).exp();
                let value = (-u).max(0.0) + e.ln_1p();
                let derivative = if u >= 0.0 { -e / (1.0 + e) } else { -1.0 / (1.0 + e) };
                (value, derivative)
            }
        }
    }

    /// `ℓ(0)`.
    pub fn at_zero(self) -> f64 {
        match self {
            LossKind::Exponential => 1.0,
            LossKind::Logistic => std::f64::consts::LN_2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Exponential => "exponential",
            LossKind::Logistic => "logistic",
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" | "exp" => Ok(LossKind::Exponential),
            "logistic" | "log" => Ok(LossKind::Logistic),
            other => Err(Error::InvalidArgument(format!(
                "unknown loss `{other}` (expected exponential or logistic)"
            ))),
        }
    }
}

pub fn loss_value_and_derivative(kind: LossKind, u: f64) -> (f64, f64) {
    kind.value_and_derivative(u)
}

/// Fixed-step Euler settings. Steps of at most `1e-2 / L(θ₀)` keep the
/// discretisation close to the flow on small datasets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainerConfig {
    pub loss_kind: LossKind,
    pub step_size: f64,
    pub max_steps: usize,
    pub stop_loss: f64,
    pub record_every: usize,
    /// Stop at the first step with `L < ℓ(0)`.
    pub stop_on_crossing: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            loss_kind: LossKind::Exponential,
            step_size: 1e-3,
            max_steps: 1_000_000,
            stop_loss: 0.0,
            record_every: 1000,
            stop_on_crossing: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub loss: f64,
    pub balance_residual: f64,
    pub min_margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxSteps,
    StopLoss,
    Crossing,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryReport {
    pub records: Vec<TrajectoryRecord>,
    pub sign_flip_detected: bool,
    /// First step with `L(θ) < ℓ(0)`.
    pub crossed_ell0_at: Option<usize>,
    pub crossed_loss: Option<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub steps_taken: usize,
    pub stop_reason: StopReason,
    pub initial_norm: f64,
    pub final_norm: f64,
    /// Largest one-step increase `L(θ_{t+1}) − L(θ_t)` (0 if the loss never rose).
    pub max_loss_increase: f64,
    /// Largest squared gradient norm seen.
    pub max_grad_norm_sq: f64,
    pub max_balance_residual: f64,
    #[serde(skip)]
    pub final_theta: WeightVector,
}

impl TrajectoryReport {
    /// Columns `step,loss,balance_residual,min_margin`, preceded by `#` comment lines.
    pub fn to_csv(&self, preamble: &str) -> String {
        let mut s = String::new();
        for line in preamble.lines() {
            writeln!(s, "# {line}").unwrap();
        }
        s.push_str("step,loss,balance_residual,min_margin\n");
        for r in &self.records {
            writeln!(s, "{},{:e},{:e},{:e}", r.step, r.loss, r.balance_residual, r.min_margin).unwrap();
        }
        s
    }
}

/// `max_j | |a_j| − ‖w_j‖ |`.
pub fn balance_residual(theta: &WeightVector) -> f64 {
    theta
        .output_weights()
        .iter()
        .enumerate()
        .map(|(j, a)| (a.abs() - norm(theta.neuron(j))).abs())
        .fold(0.0, f64::max)
}

fn check_dims(theta: &WeightVector, data: &LabeledDataset) -> Result<()> {
    if data.dim() != theta.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.input_dim(),
            got: data.dim(),
        });
    }
    Ok(())
}

/// Margins `y_i N_θ(x_i)`.
pub fn margins(theta: &WeightVector, data: &LabeledDataset) -> Result<Vec<f64>> {
    check_dims(theta, data)?;
    Ok(data.iter().map(|(x, y)| y.value() * theta.forward_unchecked(x)).collect())
}

pub fn empirical_loss(theta: &WeightVector, data: &LabeledDataset, kind: LossKind) -> Result<f64> {
    Ok(margins(theta, data)?
        .into_iter()
        .map(|u| kind.value_and_derivative(u).0)
        .sum())
}

/// Full-batch gradient of `L` with the ReLU subgradient 0 at kinks.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub w: Matrix,
    pub a: Vec<f64>,
}

impl Gradient {
    pub fn norm_sq(&self) -> f64 {
        dot(self.w.as_slice(), self.w.as_slice()) + dot(&self.a, &self.a)
    }
}

struct Workspace {
    pre: Vec<f64>,
    grad: Gradient,
}

impl Workspace {
    fn new(k: usize, d: usize) -> Self {
        Self {
            pre: vec![0.0; k],
            grad: Gradient {
                w: Matrix::zeros(k, d),
                a: vec![0.0; k],
            },
        }
    }
}

/// Fills `ws.grad` and returns `(L, min margin)`.
fn loss_and_gradient_into(
    theta: &WeightVector,
    data: &LabeledDataset,
    kind: LossKind,
    ws: &mut Workspace,
) -> (f64, f64) {
    let k = theta.width();
    let a = theta.output_weights();
    ws.grad.w.as_mut_slice().iter_mut().for_each(|g| *g = 0.0);
    ws.grad.a.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    let mut min_margin = f64::INFINITY;
    for (x, y) in data.iter() {
        let mut out = 0.0;
        for j in 0..k {
            let u = dot(theta.neuron(j), x);
            ws.pre[j] = u;
            if u > 0.0 {
                out += a[j] * u;
            }
        }
        let margin = y.value() * out;
        min_margin = min_margin.min(margin);
        let (l, dl) = kind.value_and_derivative(margin);
        loss += l;
        let c = dl * y.value();
        for j in 0..k {
            let u = ws.pre[j];
            if u > 0.0 {
                ws.grad.a[j] += c * u;
                let coef = c * a[j];
                for (g, xv) in ws.grad.w.row_mut(j).iter_mut().zip(x) {
                    *g += coef * xv;
                }
            }
        }
    }
    (loss, min_margin)
}

pub fn loss_and_gradient(
    theta: &WeightVector,
    data: &LabeledDataset,
    kind: LossKind,
) -> Result<(f64, Gradient)> {
    check_dims(theta, data)?;
    let mut ws = Workspace::new(theta.width(), theta.input_dim());
    let (loss, _) = loss_and_gradient_into(theta, data, kind, &mut ws);
    Ok((loss, ws.grad))
}

/// Full-batch subgradient descent `θ ← θ − η g`.
pub fn train(theta0: &WeightVector, data: &LabeledDataset, cfg: &TrainerConfig) -> Result<TrajectoryReport> {
    check_dims(theta0, data)?;
    if !(cfg.step_size > 0.0 && cfg.step_size.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {}", cfg.step_size)));
    }
    if cfg.stop_loss < 0.0 || cfg.stop_loss.is_nan() {
        return Err(Error::InvalidArgument("stop_loss must be nonnegative".into()));
    }
    let record_every = cfg.record_every.max(1);
    let ell0 = cfg.loss_kind.at_zero();
    let mut theta = theta0.clone();
    let mut ws = Workspace::new(theta.width(), theta.input_dim());
    let signs: Vec<Option<Sign>> = theta.output_weights().iter().map(|&a| Sign::of(a)).collect();

    let mut records = Vec::new();
    let mut sign_flip_detected = false;
    let mut crossed_ell0_at = None;
    let mut crossed_loss = None;
    let mut initial_loss = f64::NAN;
    let mut prev_loss = f64::NAN;
    let mut max_loss_increase = 0.0f64;
    let mut max_grad_norm_sq = 0.0f64;
    let mut max_balance_residual = 0.0f64;
    let mut step = 0;
    let stop_reason = loop {
        let (loss, min_margin) = loss_and_gradient_into(&theta, data, cfg.loss_kind, &mut ws);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        if step == 0 {
            initial_loss = loss;
        } else {
            max_loss_increase = max_loss_increase.max(loss - prev_loss);
        }
        prev_loss = loss;
        let balance = balance_residual(&theta);
        max_balance_residual = max_balance_residual.max(balance);
        max_grad_norm_sq = max_grad_norm_sq.max(ws.grad.norm_sq());

        let mut reason = None;
        if crossed_ell0_at.is_none() && loss < ell0 {
            crossed_ell0_at = Some(step);
            crossed_loss = Some(loss);
            if cfg.stop_on_crossing {
                reason = Some(StopReason::Crossing);
            }
        }
        if reason.is_none() && loss <= cfg.stop_loss {
            reason = Some(StopReason::StopLoss);
        }
        if reason.is_none() && step >= cfg.max_steps {
            reason = Some(StopReason::MaxSteps);
        }
        if step % record_every == 0 || reason.is_some() {
            records.push(TrajectoryRecord { step, loss, balance_residual: balance, min_margin });
        }
        if let Some(r) = reason {
            break r;
        }

        let eta = cfg.step_size;
        let (w, a) = theta.parts_mut();
        for (p, g) in w.as_mut_slice().iter_mut().zip(ws.grad.w.as_slice()) {
            *p -= eta * g;
        }
        for (j, (p, g)) in a.iter_mut().zip(&ws.grad.a).enumerate() {
            *p -= eta * g;
            if Sign::of(*p) != signs[j] {
                sign_flip_detected = true;
            }
        }
        step += 1;
    };

    Ok(TrajectoryReport {
        records,
        sign_flip_detected,
        crossed_ell0_at,
        crossed_loss,
        initial_loss,
        final_loss: prev_loss,
        steps_taken: step,
        stop_reason,
        initial_norm: theta0.parameter_norm(),
        final_norm: theta.parameter_norm(),
        max_loss_increase,
        max_grad_norm_sq,
        max_balance_residual,
        final_theta: theta,
    })
}

/// For both signs `s` some neuron with `sgn(a_j) = s` is active on some point labelled `s`.
pub fn is_live(theta: &WeightVector, data: &LabeledDataset) -> bool {
    [Sign::Pos, Sign::Neg].iter().all(|&s| {
        data.iter().filter(|(_, y)| *y == s).any(|(x, _)| {
            theta
                .output_weights()
                .iter()
                .enumerate()
                .any(|(j, &a)| s.value() * a * dot(theta.neuron(j), x).max(0.0) > 0.0)
        })
    })
}

/// `w_j = scale · (uniform unit vector)`, `a_j = ±‖w_j‖` with a fair sign,
/// redrawn until the initialisation is live.
pub fn balanced_live_init(
    data: &LabeledDataset,
    k: usize,
    scale: f64,
    rng: &mut SeededRng,
) -> Result<WeightVector> {
    if k < 2 {
        return Err(Error::InvalidArgument("liveness needs k ≥ 2".into()));
    }
    if !data.has_both_labels() {
        return Err(Error::InvalidArgument("dataset must contain both labels".into()));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let d = data.dim();
    for _ in 0..LIVENESS_RETRIES {
        let mut w = Vec::with_capacity(k * d);
        let mut a = Vec::with_capacity(k);
        for _ in 0..k {
            let row: Vec<f64> = rng.unit_vector(d).into_iter().map(|v| scale * v).collect();
            a.push(rng.sign().value() * norm(&row));
            w.extend(row);
        }
        let theta = TwoLayerNet::new(Matrix::new(k, d, w)?, a)?;
        if is_live(&theta, data) {
            return Ok(theta);
        }
    }
    Err(Error::LivenessExhausted(LIVENESS_RETRIES))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeuronAlignment {
    pub index: usize,
    pub sign: Sign,
    pub norm: f64,
    pub cosine: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Neurons with `a_j ≠ 0` and `‖w_j‖ > 1e-6 · max_j ‖w_j‖`.
    pub surviving: Vec<NeuronAlignment>,
    pub min_cosine: f64,
    pub max_balance_residual: f64,
    pub theta_norm: f64,
    pub kappa_pos: f64,
    pub kappa_neg: f64,
    pub kappa_ratio: f64,
    pub target_ratio: f64,
}

pub const SURVIVAL_REL_NORM: f64 = 1e-6;

/// Compares `θ` against the limit shape in which every surviving neuron
/// points along `v_{sgn(a_j)}`.
pub fn convergence_report(
    theta: &WeightVector,
    v_pos: &[f64],
    v_neg: &[f64],
) -> Result<ConvergenceReport> {
    let d = theta.input_dim();
    for v in [v_pos, v_neg] {
        if v.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.len() });
        }
    }
    let norms: Vec<f64> = (0..theta.width()).map(|j| norm(theta.neuron(j))).collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    let mut surviving = Vec::new();
    let (mut kappa_pos, mut kappa_neg) = (0.0, 0.0);
    for (j, &a) in theta.output_weights().iter().enumerate() {
        let Some(sign) = Sign::of(a) else { continue };
        match sign {
            Sign::Pos => kappa_pos += a * a,
            Sign::Neg => kappa_neg += a * a,
        }
        if norms[j] > SURVIVAL_REL_NORM * max_norm {
            let target = if sign == Sign::Pos { v_pos } else { v_neg };
            surviving.push(NeuronAlignment {
                index: j,
                sign,
                norm: norms[j],
                cosine: cosine(theta.neuron(j), target),
            });
        }
    }
    Ok(ConvergenceReport {
        min_cosine: surviving.iter().map(|n| n.cosine).fold(f64::INFINITY, f64::min),
        surviving,
        max_balance_residual: balance_residual(theta),
        theta_norm: theta.parameter_norm(),
        kappa_ratio: kappa_pos / kappa_neg,
        kappa_pos,
        kappa_neg,
        target_ratio: norm(v_pos) / norm(v_neg),
    })
}

/// Network text format with a `layer2` line before the output weights.
pub fn weights_to_text(theta: &WeightVector) -> String {
    theta.write_text(true)
}

pub fn weights_from_text(text: &str) -> Result<WeightVector> {
    TwoLayerNet::read_text(text, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn antipodal() -> LabeledDataset {
        LabeledDataset::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![Sign::Pos, Sign::Neg]).unwrap()
    }

    #[test]
    fn loss_values_at_zero() {
        assert_eq!(LossKind::Exponential.value_and_derivative(0.0), (1.0, -1.0));
        let (l, dl) = LossKind::Logistic.value_and_derivative(0.0);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((dl + 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivative_bounded_by_loss_on_grid() {
        for kind in [LossKind::Exponential, LossKind::Logistic] {
            for i in 0..=400 {
                let u = -20.0 + 0.1 * i as f64;
                let (l, dl) = kind.value_and_derivative(u);
                assert!(dl.abs() <= l * (1.0 + 1e-15), "{kind:?} at {u}");
                assert!(l > 0.0 && dl < 0.0);
            }
        }
    }

    #[test]
    fn logistic_is_stable_for_large_arguments() {
        let (l, dl) = LossKind::Logistic.value_and_derivative(800.0);
        assert!(l > 0.0 && l < 1e-300 || l == 0.0);
        assert!(dl <= 0.0 && dl.is_finite());
        let (l, dl) = LossKind::Logistic.value_and_derivative(-800.0);
        assert!((l - 800.0).abs() < 1e-9);
        assert!((dl + 1.0).abs() < 1e-15);
        let (l, _) = LossKind::Logistic.value_and_derivative(30.0);
        assert!((l - (-30f64).exp()).abs() < 1e-25);
    }

    #[test]
    fn init_is_balanced_and_live() {
        let data = LabeledDataset::four_point();
        for seed in 0..20 {
            let theta = balanced_live_init(&data, 4, 0.5, &mut SeededRng::new(seed, 0)).unwrap();
            assert!(balance_residual(&theta) <= 1e-12);
            assert!(is_live(&theta, &data));
        }
    }

    #[test]
    fn antipodal_pair_liveness_within_budget() {
        let data = antipodal();
        for seed in 0..100 {
            assert!(balanced_live_init(&data, 2, 0.5, &mut SeededRng::new(seed, 7)).is_ok());
        }
    }

    #[test]
    fn init_preconditions() {
        let data = antipodal();
        let mut rng = SeededRng::new(1, 0);
        assert!(balanced_live_init(&data, 1, 0.5, &mut rng).is_err());
        let one_class = LabeledDataset::new(vec![vec![1.0, 0.0]], vec![Sign::Pos]).unwrap();
        assert!(balanced_live_init(&one_class, 4, 0.5, &mut rng).is_err());
    }

    #[test]
    fn zero_steps_echo_initial_state() {
        let data = LabeledDataset::four_point();
        let theta = balanced_live_init(&data, 4, 0.5, &mut SeededRng::new(3, 0)).unwrap();
        let cfg = TrainerConfig { max_steps: 0, ..Default::default() };
        let rep = train(&theta, &data, &cfg).unwrap();
        assert_eq!(rep.final_theta, theta);
        assert_eq!(rep.steps_taken, 0);
        let l0 = empirical_loss(&theta, &data, LossKind::Exponential).unwrap();
        assert_eq!(rep.initial_loss, l0);
        assert_eq!(rep.records.len(), 1);
        assert_eq!(rep.records[0].loss, l0);
    }

    #[test]
    fn loss_decreases_up_to_discretisation_slack() {
        let data = LabeledDataset::four_point();
        for kind in [LossKind::Exponential, LossKind::Logistic] {
            let theta = balanced_live_init(&data, 4, 0.5, &mut SeededRng::new(8, 0)).unwrap();
            let cfg = TrainerConfig {
                loss_kind: kind,
                step_size: 1e-3,
                max_steps: 20_000,
                record_every: 100,
                ..Default::default()
            };
            let rep = train(&theta, &data, &cfg).unwrap();
            let eta = cfg.step_size;
            assert!(rep.max_loss_increase <= eta * eta * rep.max_grad_norm_sq);
            assert!(rep.records.iter().all(|r| r.loss > 0.0));
            assert!(!rep.sign_flip_detected);
            let max_loss = rep.records.iter().map(|r| r.loss).fold(0.0, f64::max);
            assert!(rep.max_balance_residual <= 10.0 * eta * max_loss);
            assert!(rep.final_loss < rep.initial_loss);
        }
    }

    #[test]
    fn explosive_step_reports_non_finite_loss() {
        // contradictory labels keep some margin negative while the weights blow up
        let data = LabeledDataset::new(
            vec![vec![1.0, 0.5], vec![1.0, 0.5], vec![-1.0, 0.2], vec![-1.0, 0.2]],
            vec![Sign::Pos, Sign::Neg, Sign::Neg, Sign::Pos],
        )
        .unwrap();
        let theta = balanced_live_init(&data, 4, 0.5, &mut SeededRng::new(2, 0)).unwrap();
        let cfg = TrainerConfig { step_size: 1e6, max_steps: 100, ..Default::default() };
        assert!(matches!(train(&theta, &data, &cfg), Err(Error::NonFiniteLoss { .. })));
    }

    #[test]
    fn output_sign_is_scale_invariant() {
        let data = LabeledDataset::four_point();
        let theta = balanced_live_init(&data, 6, 0.5, &mut SeededRng::new(5, 0)).unwrap();
        let mut rng = SeededRng::new(5, 1);
        for _ in 0..50 {
            let x = [rng.gaussian(), rng.gaussian()];
            let s = theta.forward(&x).unwrap();
            for alpha in [1e-3, 0.7, 3.0, 1e4] {
                let t = theta.scaled(alpha).unwrap().forward(&x).unwrap();
                assert_eq!(Sign::of(t), Sign::of(s));
            }
        }
    }

    #[test]
    fn hand_built_limit_point_is_aligned() {
        let v_pos = [1.0, 0.0];
        let v_neg = [-2.0, 0.5];
        let n_neg = norm(&v_neg);
        // one neuron per sign with |a| = ‖w‖ and κ_s = ‖v_s‖
        let w = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![v_neg[0] / n_neg.sqrt(), v_neg[1] / n_neg.sqrt()],
        ])
        .unwrap();
        let theta = TwoLayerNet::new(w, vec![1.0, -n_neg.sqrt()]).unwrap();
        let rep = convergence_report(&theta, &v_pos, &v_neg).unwrap();
        assert_eq!(rep.surviving.len(), 2);
        assert!((rep.min_cosine - 1.0).abs() < 1e-12);
        assert!(rep.max_balance_residual < 1e-12);
        assert!((rep.kappa_ratio - rep.target_ratio).abs() < 1e-12);
    }

    #[test]
    fn weight_text_round_trip() {
        let data = LabeledDataset::four_point();
        let theta = balanced_live_init(&data, 3, 0.5, &mut SeededRng::new(1, 0)).unwrap();
        let text = weights_to_text(&theta);
        assert!(text.contains("layer2"));
        assert_eq!(weights_from_text(&text).unwrap(), theta);
        assert!(weights_from_text(&theta.to_text()).is_err());
    }

    #[test]
    fn csv_layout() {
        let data = LabeledDataset::four_point();
        let theta = balanced_live_init(&data, 4, 0.5, &mut SeededRng::new(1, 0)).unwrap();
        let cfg = TrainerConfig { max_steps: 10, record_every: 5, ..Default::default() };
        let csv = train(&theta, &data, &cfg).unwrap().to_csv("seed = 1");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# seed = 1");
        assert_eq!(lines[1], "step,loss,balance_residual,min_margin");
        assert_eq!(lines.len(), 2 + 3);
        assert!(lines[4].starts_with("10,"));
    }
}
