//! Per-class maximum-margin vectors `argmin ½‖v‖² s.t. vᵀx_i ≥ 1`, solved in
//! the dual, with KKT certification and the trained-network failure bound.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{cosine, dot, Cholesky, Matrix, Sign};

/// All three KKT residuals must fall below this for a solution to count.
pub const KKT_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 200_000;
const POLISH_EVERY: usize = 25;
/// Problems whose convex hull passes within this relative distance of the
/// origin are reported as infeasible.
const INFEASIBLE_REL_DIST: f64 = 1e-8;
const FARKAS_RIDGE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginSolution {
    pub v: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `vᵀx_i − 1`.
    pub margin_slacks: Vec<f64>,
    /// Largest of the three KKT residuals.
    pub kkt_residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KktResiduals {
    pub feasibility: f64,
    pub stationarity: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.feasibility.max(self.stationarity).max(self.complementarity)
    }
}

fn combine(points: &[Vec<f64>], lambda: &[f64], d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    for (x, &l) in points.iter().zip(lambda) {
        if l != 0.0 {
            v.iter_mut().zip(x).for_each(|(v, x)| *v += l * x);
        }
    }
    v
}

fn residuals_of(v: &[f64], lambda: &[f64], points: &[Vec<f64>]) -> KktResiduals {
    let mut feasibility = 0.0f64;
    let mut complementarity = 0.0f64;
    for (x, &l) in points.iter().zip(lambda) {
        let slack = dot(v, x) - 1.0;
        feasibility = feasibility.max(-slack);
        complementarity = complementarity.max((l * slack).abs());
    }
    let combo = combine(points, lambda, v.len());
    let diff: Vec<f64> = v.iter().zip(&combo).map(|(a, b)| a - b).collect();
    KktResiduals {
        feasibility,
        stationarity: dot(&diff, &diff).sqrt(),
        complementarity,
    }
}

/// Feasibility `max(0, max_i(1 − vᵀx_i))`, stationarity `‖v − Σλ_i x_i‖`,
/// complementarity `max_i |λ_i (vᵀx_i − 1)|`.
pub fn kkt_residuals(sol: &MarginSolution, points: &[Vec<f64>]) -> Result<KktResiduals> {
    if sol.lambda.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: sol.lambda.len(),
        });
    }
    if let Some(x) = points.iter().find(|x| x.len() != sol.v.len()) {
        return Err(Error::DimensionMismatch { expected: sol.v.len(), got: x.len() });
    }
    Ok(residuals_of(&sol.v, &sol.lambda, points))
}

fn validate(points: &[Vec<f64>]) -> Result<usize> {
    let d = points
        .first()
        .ok_or_else(|| Error::InvalidArgument("max-margin problem needs at least one point".into()))?
        .len();
    for x in points {
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("points must be finite".into()));
        }
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::Infeasible);
        }
    }
    Ok(d)
}

pub fn max_margin_vector(points: &[Vec<f64>]) -> Result<MarginSolution> {
    max_margin_vector_from(points, &vec![0.0; points.len()])
}

/// Dual projected gradient `λ ← max(0, λ − (Gλ − 1)/L)` with `L` the
/// Gershgorin bound of `G`, interleaved with equality solves on the current
/// support that are accepted whenever they certify.
pub fn max_margin_vector_from(points: &[Vec<f64>], lambda0: &[f64]) -> Result<MarginSolution> {
    let d = validate(points)?;
    let n = points.len();
    if lambda0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: lambda0.len() });
    }
    if lambda0.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("starting multipliers must be finite and nonnegative".into()));
    }
    let mut gram = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let g = dot(&points[i], &points[j]);
            gram.set(i, j, g);
            gram.set(j, i, g);
        }
    }
    let lipschitz = (0..n)
        .map(|i| gram.row(i).iter().map(|g| g.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let max_point_norm = points.iter().map(|x| dot(x, x).sqrt()).fold(0.0, f64::max);

    let finish = |lambda: Vec<f64>, iterations: usize| -> MarginSolution {
        let v = combine(points, &lambda, d);
        let r = residuals_of(&v, &lambda, points);
        MarginSolution {
            margin_slacks: points.iter().map(|x| dot(&v, x) - 1.0).collect(),
            kkt_residual: r.max(),
            v,
            lambda,
            iterations,
        }
    };

    let mut lambda = lambda0.to_vec();
    let mut grad = vec![0.0; n];
    for it in 0..MAX_ITERATIONS {
        for i in 0..n {
            grad[i] = dot(gram.row(i), &lambda) - 1.0;
        }
        if it % POLISH_EVERY == 0 {
            if let Some(polished) = polish(&gram, &lambda, &grad) {
                let v = combine(points, &polished, d);
                if residuals_of(&v, &polished, points).max() <= KKT_TOL {
                    return Ok(finish(polished, it));
                }
            }
            let v = combine(points, &lambda, d);
            if residuals_of(&v, &lambda, points).max() <= KKT_TOL {
                return Ok(finish(lambda, it));
            }
            // any feasible v satisfies vᵀ(Σλx) ≥ Σλ, so ‖v‖ ≥ Σλ / ‖Σλx‖
            let mass: f64 = lambda.iter().sum();
            if mass > 0.0 && INFEASIBLE_REL_DIST * mass * max_point_norm >= dot(&v, &v).sqrt() {
                return Err(Error::Infeasible);
            }
            if let Some(mu) = farkas_candidate(&gram, &lambda, &grad) {
                if dot(&combine(points, &mu, d), &combine(points, &mu, d)).sqrt() <= INFEASIBLE_REL_DIST * max_point_norm {
                    return Err(Error::Infeasible);
                }
            }
        }
        for (l, g) in lambda.iter_mut().zip(&grad) {
            *l = (*l - step * g).max(0.0);
        }
    }
    Err(Error::ConvergenceFailure {
        what: "max-margin dual solver",
        iterations: MAX_ITERATIONS,
    })
}

/// Weights `μ ≥ 0`, `Σμ = 1` on the working support minimising `‖Σμ_i x_i‖`
/// up to a small ridge; a vanishing combination certifies infeasibility.
fn farkas_candidate(gram: &Matrix, lambda: &[f64], grad: &[f64]) -> Option<Vec<f64>> {
    let n = lambda.len();
    let mut support: Vec<usize> = (0..n).filter(|&i| lambda[i] > 0.0 || grad[i] < 0.0).collect();
    // drop the most negative weight until the affine minimiser is nonnegative
    while support.len() >= 2 {
        let mut g = sub_gram(gram, &support);
        let scale = (0..support.len()).map(|i| g.get(i, i)).fold(0.0, f64::max);
        for i in 0..support.len() {
            for j in 0..support.len() {
                g.set(i, j, g.get(i, j) / scale + if i == j { FARKAS_RIDGE } else { 0.0 });
            }
        }
        let raw = Cholesky::factor(&g).ok()?.solve(&vec![1.0; support.len()]);
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let (worst, &min) = raw.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
        if min >= 0.0 {
            let mut mu = vec![0.0; n];
            for (&i, &m) in support.iter().zip(&raw) {
                mu[i] = m / total;
            }
            return Some(mu);
        }
        support.remove(worst);
    }
    None
}

/// Solves `G_SS λ_S = 1` on a linearly independent subset of the working
/// support (current positives plus violated constraints), largest multipliers first.
fn polish(gram: &Matrix, lambda: &[f64], grad: &[f64]) -> Option<Vec<f64>> {
    let n = lambda.len();
    let mut order: Vec<usize> = (0..n).filter(|&i| lambda[i] > 0.0 || grad[i] < 0.0).collect();
    if order.is_empty() {
        return None;
    }
    order.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = Vec::new();
    for &i in &order {
        let mut trial = chosen.clone();
        trial.push(i);
        if Cholesky::factor(&sub_gram(gram, &trial)).is_ok() {
            chosen = trial;
        }
    }
    let chol = Cholesky::factor(&sub_gram(gram, &chosen)).ok()?;
    let sol = chol.solve(&vec![1.0; chosen.len()]);
    if sol.iter().any(|l| *l < 0.0) {
        return None;
    }
    let mut out = vec![0.0; n];
    for (&i, &l) in chosen.iter().zip(&sol) {
        out[i] = l;
    }
    Some(out)
}

fn sub_gram(gram: &Matrix, idx: &[usize]) -> Matrix {
    let mut m = Matrix::zeros(idx.len(), idx.len());
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            m.set(a, b, gram.get(i, j));
        }
    }
    m
}

/// `½ + ½·exp(−2dτ²cos²∠(v₊ − v₋, φ))`, claimed only when `m·cos < 0`.
pub fn failure_probability_bound(
    v_pos: &[f64],
    v_neg: &[f64],
    phi: &[f64],
    d: usize,
    tau: f64,
    m: Sign,
) -> Result<f64> {
    if v_pos.len() != phi.len() || v_neg.len() != phi.len() {
        return Err(Error::DimensionMismatch { expected: phi.len(), got: v_pos.len().max(v_neg.len()) });
    }
    let diff: Vec<f64> = v_pos.iter().zip(v_neg).map(|(a, b)| a - b).collect();
    let cos = cosine(&diff, phi);
    if m.value() * cos >= 0.0 {
        return Err(Error::HypothesisViolated(format!(
            "m·cos∠(v₊ − v₋, φ) = {} is not negative",
            m.value() * cos
        )));
    }
    Ok(failure_bound_from_cosine(cos, d, tau))
}

/// The bound as a function of the cosine alone.
pub fn failure_bound_from_cosine(cos: f64, d: usize, tau: f64) -> f64 {
    0.5 + 0.5 * (-2.0 * d as f64 * tau * tau * cos * cos).exp()
}
