//! Small dense linear algebra, special functions and seeded randomness.

mod matrix;
mod rng;

pub use matrix::{min_norm_solve, singular_extremes, symmetric_eigenvalues, Cholesky, Matrix};
pub use rng::SeededRng;

use serde::{Deserialize, Serialize};

/// Residual tolerance of [`min_norm_solve`], relative to `max(1, ‖b‖)`.
pub const LINSOLVE_TOL: f64 = 1e-10;
/// Smallest admissible squared Cholesky pivot.
pub const PD_PIVOT_TOL: f64 = 1e-12;
/// Relative accuracy target for extreme singular values.
pub const SV_REL_TOL: f64 = 1e-8;

/// A sign in `{+1, −1}`: labels `y`, label mappings `m`, output-weight signs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Pos => 1.0,
            Sign::Neg => -1.0,
        }
    }

    pub fn of(x: f64) -> Option<Sign> {
        if x > 0.0 {
            Some(Sign::Pos)
        } else if x < 0.0 {
            Some(Sign::Neg)
        } else {
            None
        }
    }

    pub fn from_int(v: i64) -> Option<Sign> {
        match v {
            1 => Some(Sign::Pos),
            -1 => Some(Sign::Neg),
            _ => None,
        }
    }

    pub fn as_int(self) -> i64 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }
}

impl std::ops::Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }
}

/// Standard Gaussian density `e^{−u²/2} / √(2π)`.
pub fn std_gaussian_density(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Dot product with four independent accumulators, combined in a fixed order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Cosine of the angle between `a` and `b`; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}

/// One binomial standard error at success probability `q` over `n` trials.
pub fn binomial_sigma(q: f64, n: usize) -> f64 {
    let q = q.clamp(0.0, 1.0);
    (q * (1.0 - q) / n.max(1) as f64).sqrt()
}
