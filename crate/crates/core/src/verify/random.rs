//! Suites over random networks: the reprogramming lower bound, its
//! asymptotic corollary, and the program-length facts.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use super::{check_positive, run_trials, SuiteVerdict, SIGMA_SLACK};
use crate::data::{random_hypercube_direction, BernoulliModel};
use crate::error::{Error, Result};
use crate::network::TwoLayerNet;
use crate::numerics::{binomial_sigma, singular_extremes, Matrix, SeededRng};
use crate::reprogram::{construct_program, partition_neurons, reprogrammed_output, AccuracyEstimate};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Theorem1Constants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

pub fn theorem1_constants() -> Theorem1Constants {
    let pi = std::f64::consts::PI;
    let inv_sqrt_2pi = 1.0 / (2.0 * pi).sqrt();
    Theorem1Constants {
        c1: 2.0 + inv_sqrt_2pi,
        c2: pi.sqrt() / (8.0 * 2f64.sqrt()),
        c3: inv_sqrt_2pi,
        c4: 2f64.sqrt() + pi.sqrt() / 4.0 + 2.0 * pi / (pi - 1.0),
        c5: pi.sqrt() / 16.0,
    }
}

/// Lower bound on `y·N(p + x)`:
/// `(√k ρ/√d)·(C₂τ − C₃e^{−d²/(2kρ²)}·min{1, kρ²/d²} − C₄√(ln(1/γ)/k) − C₅√(ln(1/γ†)/d))`.
pub fn theorem1_rhs(d: usize, k: usize, rho: f64, tau: f64, gamma: f64, gamma_dag: f64) -> Result<f64> {
    if k == 0 || k > d {
        return Err(Error::WidthExceedsDimension { k, d });
    }
    if !(tau > 0.0 && tau <= 0.5) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1/2], got {tau}")));
    }
    for (name, g) in [("gamma", gamma), ("gamma_dag", gamma_dag)] {
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {g}")));
        }
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let (df, kf) = (d as f64, k as f64);
    if 2.0 * df * tau * tau < (1.0 / gamma_dag).ln() {
        return Err(Error::HypothesisViolated(format!(
            "2dτ² = {} < ln(1/γ†) = {}",
            2.0 * df * tau * tau,
            (1.0 / gamma_dag).ln()
        )));
    }
    let c = theorem1_constants();
    let krho2 = kf * rho * rho;
    let inner = c.c2 * tau
        - c.c3 * (-(df * df) / (2.0 * krho2)).exp() * (krho2 / (df * df)).min(1.0)
        - c.c4 * ((1.0 / gamma).ln() / kf).sqrt()
        - c.c5 * ((1.0 / gamma_dag).ln() / df).sqrt();
    Ok(kf.sqrt() * rho / df.sqrt() * inner)
}

/// `(1 − C₁γ)(1 − γ†)`.
pub fn theorem1_success_floor(gamma: f64, gamma_dag: f64) -> f64 {
    (1.0 - theorem1_constants().c1 * gamma) * (1.0 - gamma_dag)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem1Config {
    pub d: usize,
    pub k: usize,
    pub rho: f64,
    pub tau: f64,
    pub gamma: f64,
    pub gamma_dag: f64,
    pub trials: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Theorem1Config {
    /// `d = 4096, k = 256, ρ = d^0.3, τ = d^−0.2, γ = γ† = 0.01`, 2000 trials.
    pub fn reference(seed: u64) -> Self {
        let d = 4096;
        Self {
            d,
            k: 256,
            rho: (d as f64).powf(0.3),
            tau: (d as f64).powf(-0.2),
            gamma: 0.01,
            gamma_dag: 0.01,
            trials: 2000,
            seed,
            workers: 1,
        }
    }
}

/// `y·N(p + x)` for one draw of network, class direction and labelled point.
fn analytic_margin(d: usize, k: usize, rho: f64, tau: f64, rng: &mut SeededRng) -> Result<f64> {
    let net = TwoLayerNet::random_init(d, k, rng)?;
    let phi = random_hypercube_direction(d, rng);
    let model = BernoulliModel::new(phi, rho, tau)?;
    let program = construct_program(&net, model.phi())?;
    let sample = model.sample_one(rng);
    Ok(sample.y.value() * reprogrammed_output(&net, &program.p, &sample.x))
}

/// Redraws the network with every trial; a trial violates the bound when
/// `y·N(p + x) ≤ RHS` or the program cannot be built.
pub fn theorem1_montecarlo(cfg: &Theorem1Config) -> Result<SuiteVerdict> {
    let started = Instant::now();
    check_positive("trials", cfg.trials)?;
    let rhs = theorem1_rhs(cfg.d, cfg.k, cfg.rho, cfg.tau, cfg.gamma, cfg.gamma_dag)?;
    let floor = theorem1_success_floor(cfg.gamma, cfg.gamma_dag);
    let margins = run_trials(cfg.workers, cfg.trials, |t| {
        analytic_margin(cfg.d, cfg.k, cfg.rho, cfg.tau, &mut SeededRng::new(cfg.seed, t as u64)).ok()
    })?;
    let failures = margins.iter().filter(|m| m.is_none()).count();
    let built: Vec<f64> = margins.iter().flatten().copied().collect();
    let violations = failures + built.iter().filter(|&&m| m <= rhs).count();
    let correct = built.iter().filter(|&&m| m > 0.0).count();
    let n = cfg.trials as f64;

    let allowed = 1.0 - floor;
    let sigma = binomial_sigma(allowed, cfg.trials);
    let limit = allowed + SIGMA_SLACK * sigma;
    let rate = violations as f64 / n;

    let mut v = SuiteVerdict::new("theorem1_montecarlo", cfg.seed);
    v.measure("trials", n);
    v.measure("violations", violations as f64);
    v.measure("violation_rate", rate);
    v.measure("construction_failures", failures as f64);
    v.measure("rhs", rhs);
    v.measure("success_floor", floor);
    v.measure("allowed_violation_rate", allowed);
    v.measure("sigma", sigma);
    v.measure("accuracy", correct as f64 / n);
    v.measure("mean_margin", built.iter().sum::<f64>() / built.len().max(1) as f64);
    v.measure("min_margin", built.iter().cloned().fold(f64::INFINITY, f64::min));
    v.limit("violation_rate", limit);
    if floor <= 0.0 {
        v.vacuous = true;
        v.flag("vacuous: success floor is not positive");
    }
    if rhs <= 0.0 {
        v.flag("rhs is not positive: the event y·N(p + x) > RHS does not imply correct classification");
    }
    v.passed = v.vacuous || rate <= limit;
    Ok(v.finish(started))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Corollary1Config {
    pub eta_k: f64,
    pub eta_rho: f64,
    pub eta_tau: f64,
    pub d_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Corollary1Config {
    pub fn reference(seed: u64) -> Self {
        Self {
            eta_k: 2.0 / 3.0,
            eta_rho: 0.3,
            eta_tau: 0.2,
            d_list: vec![256, 1024, 4096],
            trials: 2000,
            seed,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, e) in [("eta_k", self.eta_k), ("eta_rho", self.eta_rho), ("eta_tau", self.eta_tau)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::ExponentConditionViolated(format!("{name} = {e} is outside [0, 1]")));
            }
        }
        if self.eta_rho >= 1.0 - self.eta_k / 2.0 {
            return Err(Error::ExponentConditionViolated(format!(
                "eta_rho = {} must be below 1 − eta_k/2 = {}",
                self.eta_rho,
                1.0 - self.eta_k / 2.0
            )));
        }
        if self.eta_tau >= self.eta_k / 2.0 {
            return Err(Error::ExponentConditionViolated(format!(
                "eta_tau = {} must be below eta_k/2 = {}",
                self.eta_tau,
                self.eta_k / 2.0
            )));
        }
        if self.d_list.len() < 2 {
            return Err(Error::InvalidArgument("d_list needs at least two dimensions".into()));
        }
        check_positive("trials", self.trials)
    }
}

/// `⌈d^η⌉` clamped to `[1, d]`; powers within `1e-9` (relative) of an integer
/// count as that integer, so `4096^{2/3}` gives 256.
pub fn corollary1_width(d: usize, eta_k: f64) -> usize {
    let x = (d as f64).powf(eta_k);
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * r.max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, d)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub d: usize,
    pub k: usize,
    pub rho: f64,
    pub tau: f64,
    pub tau_clamped: bool,
    pub accuracy: f64,
    pub stderr: f64,
    pub successes: usize,
    pub trials: usize,
    pub construction_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Corollary1Sweep {
    pub rows: Vec<SweepRow>,
    pub verdict: SuiteVerdict,
}

impl Corollary1Sweep {
    pub fn to_csv(&self, preamble: &str) -> String {
        let mut s = String::new();
        for line in preamble.lines() {
            writeln!(s, "# {line}").unwrap();
        }
        s.push_str("d,k,rho,tau,tau_clamped,accuracy,stderr,successes,trials\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{:e},{:e},{},{:e},{:e},{},{}",
                r.d, r.k, r.rho, r.tau, r.tau_clamped as u8, r.accuracy, r.stderr, r.successes, r.trials
            )
            .unwrap();
        }
        s
    }
}

/// Reprogrammed accuracy of the analytic program with `m = +1` along the
/// scaling `k = ⌈d^{η_k}⌉`, `ρ = d^{η_ρ}`, `τ = min(d^{−η_τ}, ½)`. The verdict
/// compares the largest and smallest `d` in the list.
pub fn corollary1_sweep(cfg: &Corollary1Config) -> Result<Corollary1Sweep> {
    let started = Instant::now();
    cfg.validate()?;
    let mut verdict = SuiteVerdict::new("corollary1_sweep", cfg.seed);
    let mut rows = Vec::with_capacity(cfg.d_list.len());
    for &d in &cfg.d_list {
        let df = d as f64;
        let k = corollary1_width(d, cfg.eta_k);
        let rho = df.powf(cfg.eta_rho);
        let raw_tau = df.powf(-cfg.eta_tau);
        let tau_clamped = raw_tau > 0.5;
        let tau = raw_tau.min(0.5);
        if tau_clamped {
            verdict.flag(format!("tau_clamped at d = {d}"));
        }
        let margins = run_trials(cfg.workers, cfg.trials, |t| {
            analytic_margin(d, k, rho, tau, &mut SeededRng::new(cfg.seed, t as u64).fork(d as u64)).ok()
        })?;
        let failures = margins.iter().filter(|m| m.is_none()).count();
        let successes = margins.iter().flatten().filter(|&&m| m > 0.0).count();
        let est = AccuracyEstimate::from_counts(successes, cfg.trials);
        verdict.measure(format!("accuracy_d{d}"), est.accuracy);
        verdict.measure(format!("stderr_d{d}"), est.stderr);
        rows.push(SweepRow {
            d,
            k,
            rho,
            tau,
            tau_clamped,
            accuracy: est.accuracy,
            stderr: est.stderr,
            successes,
            trials: cfg.trials,
            construction_failures: failures,
        });
    }
    let small = rows.iter().min_by_key(|r| r.d).unwrap();
    let large = rows.iter().max_by_key(|r| r.d).unwrap();
    let gain = large.accuracy - small.accuracy;
    let combined = (small.stderr.powi(2) + large.stderr.powi(2)).sqrt();
    let floor = small.accuracy.min(large.accuracy);
    verdict.measure("trials", cfg.trials as f64);
    verdict.measure("accuracy_gain", gain);
    verdict.measure("combined_stderr", combined);
    verdict.measure("min_end_accuracy", floor);
    verdict.limit("accuracy_gain", 2.0 * combined);
    verdict.limit("min_end_accuracy", 0.95);
    verdict.passed = gain > 2.0 * combined || floor > 0.95;
    Ok(Corollary1Sweep {
        rows,
        verdict: verdict.finish(started),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AppendixAConfig {
    /// Input dimension for the program-norm and empty-`K⁻` checks.
    pub d: usize,
    pub k_list: Vec<usize>,
    pub trials: usize,
    /// Singular-value check on `sv_k × sv_d` matrices.
    pub sv_d: usize,
    pub sv_k: usize,
    pub gamma: f64,
    pub sv_trials: usize,
    pub seed: u64,
    pub workers: usize,
}

impl AppendixAConfig {
    pub fn reference(seed: u64) -> Self {
        Self {
            d: 64,
            k_list: vec![1, 4, 8],
            trials: 10_000,
            sv_d: 1024,
            sv_k: 32,
            gamma: 0.01,
            sv_trials: 1000,
            seed,
            workers: 1,
        }
    }
}

/// Singular-value bounds for a `k × d` matrix with `N(0, 1/d)` entries,
/// holding with probability at least `1 − γ`.
pub fn singular_value_bounds(d: usize, k: usize, gamma: f64) -> (f64, f64) {
    let (sd, sk) = ((d as f64).sqrt(), (k as f64).sqrt());
    let t = (2.0 * (2.0 / gamma).ln()).sqrt();
    ((sd - sk - t) / sd, (sd + sk + t) / sd)
}

pub fn appendix_a_suite(cfg: &AppendixAConfig) -> Result<SuiteVerdict> {
    let started = Instant::now();
    check_positive("trials", cfg.trials)?;
    check_positive("sv_trials", cfg.sv_trials)?;
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1), got {}", cfg.gamma)));
    }
    if cfg.sv_k > cfg.sv_d {
        return Err(Error::WidthExceedsDimension { k: cfg.sv_k, d: cfg.sv_d });
    }
    let mut v = SuiteVerdict::new("appendix_a", cfg.seed);
    let mut passed = true;
    let sqrt_d = (cfg.d as f64).sqrt();
    let mut worst_norm_error = 0.0f64;
    for (idx, &k) in cfg.k_list.iter().enumerate() {
        if k == 0 || k > cfg.d {
            return Err(Error::WidthExceedsDimension { k, d: cfg.d });
        }
        let outcomes = run_trials(cfg.workers, cfg.trials, |t| -> Result<(bool, f64)> {
            let mut rng = SeededRng::new(cfg.seed, t as u64).fork(idx as u64);
            let net = TwoLayerNet::random_init(cfg.d, k, &mut rng)?;
            let phi = random_hypercube_direction(cfg.d, &mut rng);
            let partition = partition_neurons(&net, &phi)?;
            if partition.unhelpful.is_empty() {
                return Ok((true, 0.0));
            }
            let program = construct_program(&net, &phi)?;
            Ok((false, (program.target_bias_norm - sqrt_d).abs()))
        })?;
        let mut empty = 0usize;
        for o in outcomes {
            let (is_empty, err) = o?;
            empty += is_empty as usize;
            worst_norm_error = worst_norm_error.max(err);
        }
        let expected = 0.5f64.powi(k as i32);
        let rate = empty as f64 / cfg.trials as f64;
        let sigma = binomial_sigma(expected, cfg.trials);
        v.measure(format!("empty_rate_k{k}"), rate);
        v.measure(format!("expected_empty_rate_k{k}"), expected);
        v.measure(format!("empty_rate_deviation_k{k}"), (rate - expected).abs());
        v.limit(format!("empty_rate_deviation_k{k}"), SIGMA_SLACK * sigma);
        passed &= (rate - expected).abs() <= SIGMA_SLACK * sigma;
    }
    v.measure("trials", cfg.trials as f64);
    v.measure("max_bias_norm_error", worst_norm_error);
    v.limit("max_bias_norm_error", 1e-9);
    passed &= worst_norm_error <= 1e-9;

    let (lo, hi) = singular_value_bounds(cfg.sv_d, cfg.sv_k, cfg.gamma);
    let extremes = run_trials(cfg.workers, cfg.sv_trials, |t| -> Result<(f64, f64)> {
        let mut rng = SeededRng::new(cfg.seed, t as u64).fork(u64::MAX);
        let mut w = vec![0.0; cfg.sv_k * cfg.sv_d];
        rng.fill_gaussian(&mut w, 1.0 / (cfg.sv_d as f64).sqrt());
        singular_extremes(&Matrix::new(cfg.sv_k, cfg.sv_d, w)?)
    })?;
    let mut sv_violations = 0usize;
    let (mut smin_seen, mut smax_seen) = (f64::INFINITY, 0.0f64);
    for e in extremes {
        let (smin, smax) = e?;
        smin_seen = smin_seen.min(smin);
        smax_seen = smax_seen.max(smax);
        if smin < lo || smax > hi {
            sv_violations += 1;
        }
    }
    let sv_rate = sv_violations as f64 / cfg.sv_trials as f64;
    let sv_limit = cfg.gamma + SIGMA_SLACK * binomial_sigma(cfg.gamma, cfg.sv_trials);
    v.measure("sv_trials", cfg.sv_trials as f64);
    v.measure("sv_lower_bound", lo);
    v.measure("sv_upper_bound", hi);
    v.measure("sv_min_observed", smin_seen);
    v.measure("sv_max_observed", smax_seen);
    v.measure("sv_violation_rate", sv_rate);
    v.limit("sv_violation_rate", sv_limit);
    if lo <= 0.0 {
        v.flag("singular-value lower bound is not positive");
    }
    passed &= sv_rate <= sv_limit;
    v.passed = passed;
    Ok(v.finish(started))
}
