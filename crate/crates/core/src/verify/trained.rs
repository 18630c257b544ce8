//! Suites over networks trained by the simulated gradient flow.

use std::time::Instant;

use serde::Serialize;

use super::{check_positive, run_trials, SuiteVerdict, SIGMA_SLACK};
use crate::data::{generate_orthosep, BernoulliModel, LabeledDataset};
use crate::error::{Error, Result};
use crate::flow::{balanced_live_init, convergence_report, margins, train, LossKind, TrainerConfig, WeightVector};
use crate::maxmargin::{failure_probability_bound, max_margin_vector};
use crate::numerics::{binomial_sigma, cosine, norm, SeededRng, Sign};
use crate::reprogram::{construct_program, optimize_program, reprogrammed_accuracy, OptimizeConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem2Config {
    pub n_datasets: usize,
    pub d: usize,
    pub k: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub step_size: f64,
    pub max_steps: usize,
    pub init_scale: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Theorem2Config {
    /// 50 datasets of 2 + 2 points in the plane, `k = 4`, `η = 1e-3`, 10⁶ steps.
    pub fn reference(seed: u64) -> Self {
        Self {
            n_datasets: 50,
            d: 2,
            k: 4,
            n_pos: 2,
            n_neg: 2,
            step_size: 1e-3,
            max_steps: 1_000_000,
            init_scale: 0.5,
            seed,
            workers: 1,
        }
    }
}

struct CrossingRun {
    crossed: bool,
    step: usize,
    loss_below_ell0: bool,
    misclassified: usize,
}

fn crossing_run(data: &LabeledDataset, theta0: &WeightVector, kind: LossKind, cfg: &Theorem2Config) -> Result<CrossingRun> {
    let tc = TrainerConfig {
        loss_kind: kind,
        step_size: cfg.step_size,
        max_steps: cfg.max_steps,
        stop_loss: 0.0,
        record_every: cfg.max_steps.max(1),
        stop_on_crossing: true,
    };
    let rep = train(theta0, data, &tc)?;
    let misclassified = margins(&rep.final_theta, data)?.iter().filter(|&&u| u <= 0.0).count();
    Ok(CrossingRun {
        crossed: rep.crossed_ell0_at.is_some(),
        step: rep.crossed_ell0_at.unwrap_or(rep.steps_taken),
        loss_below_ell0: rep.crossed_loss.is_some_and(|l| l < kind.at_zero()),
        misclassified,
    })
}

/// For each generated orthogonally separable dataset and a balanced, live
/// initialisation, trains under both losses until `L < ℓ(0)` or the budget ends.
pub fn theorem2_suite(cfg: &Theorem2Config) -> Result<SuiteVerdict> {
    let started = Instant::now();
    check_positive("n_datasets", cfg.n_datasets)?;
    let kinds = [LossKind::Exponential, LossKind::Logistic];
    let runs = run_trials(cfg.workers, cfg.n_datasets, |i| -> Result<Vec<CrossingRun>> {
        let mut rng = SeededRng::new(cfg.seed, i as u64);
        let data = generate_orthosep(cfg.d, cfg.n_pos, cfg.n_neg, &mut rng)?;
        let theta0 = balanced_live_init(&data, cfg.k, cfg.init_scale, &mut rng)?;
        kinds.iter().map(|&kind| crossing_run(&data, &theta0, kind, cfg)).collect()
    })?;
    let mut v = SuiteVerdict::new("theorem2", cfg.seed);
    let mut crossings = [0usize; 2];
    let mut max_step = [0usize; 2];
    let mut misclassified = 0usize;
    let mut bad_crossing_loss = 0usize;
    for run in runs {
        for (idx, r) in run?.into_iter().enumerate() {
            if r.crossed {
                crossings[idx] += 1;
                max_step[idx] = max_step[idx].max(r.step);
                misclassified += r.misclassified;
                bad_crossing_loss += (!r.loss_below_ell0) as usize;
            }
        }
    }
    let n = cfg.n_datasets as f64;
    for (idx, kind) in kinds.iter().enumerate() {
        v.measure(format!("crossings_{}", kind.name()), crossings[idx] as f64);
        v.measure(format!("max_crossing_step_{}", kind.name()), max_step[idx] as f64);
        v.limit(format!("crossings_{}", kind.name()), n);
    }
    v.measure("runs_per_loss", n);
    v.measure("misclassified_after_crossing", misclassified as f64);
    v.measure("crossing_loss_not_below_ell0", bad_crossing_loss as f64);
    v.passed = crossings.iter().all(|&c| c == cfg.n_datasets) && misclassified == 0 && bad_crossing_loss == 0;
    Ok(v.finish(started))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    /// Positives `(1, ±0.1)`, negatives `(−1, ±0.1)`.
    FourPoint,
    Orthosep { d: usize, n_pos: usize, n_neg: usize },
}

impl DatasetSource {
    fn build(&self, rng: &mut SeededRng) -> Result<LabeledDataset> {
        match *self {
            DatasetSource::FourPoint => Ok(LabeledDataset::four_point()),
            DatasetSource::Orthosep { d, n_pos, n_neg } => generate_orthosep(d, n_pos, n_neg, rng),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Corollary2Config {
    pub dataset: DatasetSource,
    pub k: usize,
    pub loss_kind: LossKind,
    pub step_size: f64,
    pub max_steps: usize,
    pub stop_loss: f64,
    pub init_scale: f64,
    pub min_cosine: f64,
    /// Relative to `‖θ‖`.
    pub balance_tol: f64,
    /// Relative error of `κ₊/κ₋` against `‖v₊‖/‖v₋‖`.
    pub kappa_tol: f64,
    pub min_growth: f64,
    /// `‖θ − θ̃‖/‖θ‖` where `θ̃` puts every neuron on the limit shape.
    pub shape_tol: f64,
    pub seed: u64,
}

impl Corollary2Config {
    pub fn reference(seed: u64) -> Self {
        Self {
            dataset: DatasetSource::FourPoint,
            k: 8,
            loss_kind: LossKind::Exponential,
            step_size: 1e-2,
            max_steps: 10_000_000,
            stop_loss: 1e-6,
            init_scale: 1e-3,
            min_cosine: 0.99,
            balance_tol: 1e-3,
            kappa_tol: 0.02,
            min_growth: 10.0,
            shape_tol: 0.05,
            seed,
        }
    }
}

/// Distance from `θ` to its projection onto the limit shape
/// `w_j = ‖w_j‖·v̂_{sgn(a_j)}`, `a_j = sgn(a_j)·‖w_j‖`, relative to `‖θ‖`.
fn shape_residual(theta: &WeightVector, v_pos: &[f64], v_neg: &[f64]) -> f64 {
    let (np, nn) = (norm(v_pos), norm(v_neg));
    let mut sq = 0.0;
    for (j, &a) in theta.output_weights().iter().enumerate() {
        let w = theta.neuron(j);
        let r = norm(w);
        let (v, nv) = if a >= 0.0 { (v_pos, np) } else { (v_neg, nn) };
        for (wi, vi) in w.iter().zip(v) {
            sq += (wi - r * vi / nv).powi(2);
        }
        sq += (a - a.signum() * r).powi(2);
    }
    sq.sqrt() / theta.parameter_norm()
}

fn trained_regime(
    data: &LabeledDataset,
    k: usize,
    init_scale: f64,
    tc: &TrainerConfig,
    rng: &mut SeededRng,
) -> Result<(WeightVector, crate::flow::TrajectoryReport)> {
    let theta0 = balanced_live_init(data, k, init_scale, rng)?;
    let rep = train(&theta0, data, tc)?;
    Ok((theta0, rep))
}

fn class_margin_vectors(data: &LabeledDataset) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((
        max_margin_vector(&data.class_points(Sign::Pos))?.v,
        max_margin_vector(&data.class_points(Sign::Neg))?.v,
    ))
}

/// Trains to `stop_loss` and compares the final iterate with the directional
/// limit built from the per-class maximum-margin vectors.
pub fn corollary2_suite(cfg: &Corollary2Config) -> Result<SuiteVerdict> {
    let started = Instant::now();
    let mut rng = SeededRng::new(cfg.seed, 0);
    let data = cfg.dataset.build(&mut rng)?;
    let (v_pos, v_neg) = class_margin_vectors(&data)?;
    let tc = TrainerConfig {
        loss_kind: cfg.loss_kind,
        step_size: cfg.step_size,
        max_steps: cfg.max_steps,
        stop_loss: cfg.stop_loss,
        record_every: cfg.max_steps.max(1),
        stop_on_crossing: false,
    };
    let (_, rep) = trained_regime(&data, cfg.k, cfg.init_scale, &tc, &mut rng)?;
    let theta = &rep.final_theta;
    let conv = convergence_report(theta, &v_pos, &v_neg)?;
    let kappa_error = (conv.kappa_ratio / conv.target_ratio - 1.0).abs();
    let growth = rep.final_norm / rep.initial_norm;
    let balance_rel = conv.max_balance_residual / conv.theta_norm;
    let shape = shape_residual(theta, &v_pos, &v_neg);

    let mut v = SuiteVerdict::new("corollary2", cfg.seed);
    v.measure("steps", rep.steps_taken as f64);
    v.measure("final_loss", rep.final_loss);
    v.measure("surviving_neurons", conv.surviving.len() as f64);
    v.measure("min_cosine", conv.min_cosine);
    v.measure("balance_residual_rel", balance_rel);
    v.measure("kappa_ratio", conv.kappa_ratio);
    v.measure("target_ratio", conv.target_ratio);
    v.measure("kappa_rel_error", kappa_error);
    v.measure("norm_growth", growth);
    v.measure("shape_residual", shape);
    v.measure("sign_flips", rep.sign_flip_detected as u8 as f64);
    v.limit("final_loss", cfg.stop_loss);
    v.limit("min_cosine", cfg.min_cosine);
    v.limit("balance_residual_rel", cfg.balance_tol);
    v.limit("kappa_rel_error", cfg.kappa_tol);
    v.limit("norm_growth", cfg.min_growth);
    v.limit("shape_residual", cfg.shape_tol);
    if rep.final_loss > cfg.stop_loss {
        v.inconclusive = true;
        v.flag(
            Error::BudgetExhaustedBeforeLoss {
                steps: rep.steps_taken,
                loss: rep.final_loss,
            }
            .to_string(),
        );
    }
    v.passed = !v.inconclusive
        && conv.min_cosine >= cfg.min_cosine
        && balance_rel <= cfg.balance_tol
        && kappa_error <= cfg.kappa_tol
        && growth >= cfg.min_growth
        && shape <= cfg.shape_tol;
    Ok(v.finish(started))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramSource {
    Zero,
    AnalyticOnTrained,
    Optimized,
}

impl ProgramSource {
    pub const ALL: [ProgramSource; 3] = [ProgramSource::Zero, ProgramSource::AnalyticOnTrained, ProgramSource::Optimized];

    pub fn name(self) -> &'static str {
        match self {
            ProgramSource::Zero => "zero",
            ProgramSource::AnalyticOnTrained => "analytic",
            ProgramSource::Optimized => "optimized",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropositionConfig {
    pub dataset: DatasetSource,
    pub k: usize,
    pub loss_kind: LossKind,
    pub step_size: f64,
    pub max_steps: usize,
    pub stop_loss: f64,
    pub init_scale: f64,
    pub rho: f64,
    pub tau: f64,
    pub trials: usize,
    pub sources: Vec<ProgramSource>,
    pub optimize: OptimizeConfig,
    pub seed: u64,
    pub workers: usize,
}

impl PropositionConfig {
    pub fn reference(seed: u64) -> Self {
        let d = 64;
        Self {
            dataset: DatasetSource::Orthosep { d, n_pos: 8, n_neg: 8 },
            k: 8,
            loss_kind: LossKind::Exponential,
            step_size: 0.05,
            max_steps: 10_000_000,
            stop_loss: 1e-6,
            init_scale: 1e-3,
            rho: (d as f64).sqrt(),
            tau: 0.2,
            trials: 10_000,
            sources: ProgramSource::ALL.to_vec(),
            optimize: OptimizeConfig::default(),
            seed,
            workers: 1,
        }
    }
}

/// Trains on an orthogonally separable dataset, then for both label maps `m`
/// takes `φ` as the hypercube vertex sign-matched to `−m(v₊ − v₋)` and checks
/// every program source against the failure bound.
pub fn proposition_suite(cfg: &PropositionConfig) -> Result<SuiteVerdict> {
    let started = Instant::now();
    check_positive("trials", cfg.trials)?;
    let mut rng = SeededRng::new(cfg.seed, 0);
    let data = cfg.dataset.build(&mut rng)?;
    let d = data.dim();
    let (v_pos, v_neg) = class_margin_vectors(&data)?;
    let tc = TrainerConfig {
        loss_kind: cfg.loss_kind,
        step_size: cfg.step_size,
        max_steps: cfg.max_steps,
        stop_loss: cfg.stop_loss,
        record_every: cfg.max_steps.max(1),
        stop_on_crossing: false,
    };
    let (_, rep) = trained_regime(&data, cfg.k, cfg.init_scale, &tc, &mut rng)?;
    let net = rep.final_theta;
    let conv = convergence_report(&net, &v_pos, &v_neg)?;

    let mut v = SuiteVerdict::new("proposition", cfg.seed);
    v.measure("train_final_loss", rep.final_loss);
    v.measure("train_min_cosine", conv.min_cosine);
    v.measure("trials", cfg.trials as f64);
    if rep.final_loss > cfg.stop_loss {
        v.flag(format!("training stopped at loss {:e} above {:e}", rep.final_loss, cfg.stop_loss));
    }
    let diff: Vec<f64> = v_pos.iter().zip(&v_neg).map(|(a, b)| a - b).collect();

    let mut jobs = Vec::new();
    for (mi, m) in [Sign::Pos, Sign::Neg].into_iter().enumerate() {
        let target: Vec<f64> = diff.iter().map(|x| -m.value() * x).collect();
        let phi = BernoulliModel::sign_matched_direction(&target);
        let cos = cosine(&diff, &phi);
        let bound = failure_probability_bound(&v_pos, &v_neg, &phi, d, cfg.tau, m)?;
        let tag = if m == Sign::Pos { "m_pos" } else { "m_neg" };
        v.measure(format!("cosine_{tag}"), cos);
        v.measure(format!("bound_{tag}"), bound);
        let model = BernoulliModel::new(phi, cfg.rho, cfg.tau)?;
        for (si, &source) in cfg.sources.iter().enumerate() {
            jobs.push((mi, si, m, tag, source, model.clone(), bound));
        }
    }
    let results = run_trials(cfg.workers, jobs.len(), |i| -> Result<f64> {
        let (mi, si, m, _, source, ref model, _) = jobs[i];
        let stream = SeededRng::new(cfg.seed, 1 + (mi * 16 + si) as u64);
        let p = match source {
            ProgramSource::Zero => vec![0.0; d],
            ProgramSource::AnalyticOnTrained => construct_program(&net, model.phi())?.p,
            ProgramSource::Optimized => optimize_program(&net, model, m, &cfg.optimize, &mut stream.fork(1))?.p,
        };
        Ok(reprogrammed_accuracy(&net, &p, model, m, cfg.trials, &mut stream.fork(2))?.accuracy)
    })?;
    let mut passed = true;
    for (job, acc) in jobs.iter().zip(results) {
        let (_, _, _, tag, source, _, bound) = job;
        let acc = acc?;
        let key = format!("accuracy_{tag}_{}", source.name());
        let limit = bound + SIGMA_SLACK * binomial_sigma(*bound, cfg.trials);
        v.measure(key.clone(), acc);
        v.limit(key, limit);
        passed &= acc <= limit;
    }
    v.passed = passed;
    Ok(v.finish(started))
}
