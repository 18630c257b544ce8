//! Bernoulli hypercube data models and orthogonally separable datasets.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::network::{content_lines, format_row, parse_reals};
use crate::numerics::{dot, norm, SeededRng, Sign};

/// A labelled point.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Sign,
}

/// Uniformly random vertex of the unit hypercube `{±1/√d}^d`.
pub fn random_hypercube_direction(d: usize, rng: &mut SeededRng) -> Vec<f64> {
    let c = 1.0 / (d as f64).sqrt();
    (0..d).map(|_| rng.sign().value() * c).collect()
}

/// Two-class distribution over `ρ·{±1/√d}^d`: draw `y` uniformly, then flip
/// each coordinate of `yρφ` independently with probability `1/2 − τ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliModel {
    phi: Vec<f64>,
    rho: f64,
    tau: f64,
}

impl BernoulliModel {
    pub fn new(phi: Vec<f64>, rho: f64, tau: f64) -> Result<Self> {
        let d = phi.len();
        if d == 0 {
            return Err(Error::InvalidArgument("empty class direction".into()));
        }
        let c = 1.0 / (d as f64).sqrt();
        if phi.iter().any(|&v| v != c && v != -c) {
            return Err(Error::InvalidArgument(
                "class direction entries must be exactly ±1/√d".into(),
            ));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {rho}")));
        }
        if !(tau > 0.0 && tau <= 0.5) {
            return Err(Error::InvalidArgument(format!("class bias must lie in (0, 1/2], got {tau}")));
        }
        Ok(Self { phi, rho, tau })
    }

    /// Hypercube vertex whose signs match `v` coordinatewise (zeros map to +).
    pub fn sign_matched_direction(v: &[f64]) -> Vec<f64> {
        let c = 1.0 / (v.len() as f64).sqrt();
        v.iter().map(|&x| if x < 0.0 { -c } else { c }).collect()
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// The class vertex `yρφ`.
    pub fn class_vertex(&self, y: Sign) -> Vec<f64> {
        let s = y.value() * self.rho;
        self.phi.iter().map(|p| s * p).collect()
    }

    pub fn sample_one(&self, rng: &mut SeededRng) -> Sample {
        let y = rng.sign();
        let mut x = self.class_vertex(y);
        let flip = 0.5 - self.tau;
        for v in x.iter_mut() {
            if rng.bernoulli(flip) {
                *v = -*v;
            }
        }
        Sample { x, y }
    }

    pub fn sample(&self, count: usize, rng: &mut SeededRng) -> Vec<Sample> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }
}

/// Points `x_i` with labels `y_i ∈ {±1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    points: Vec<Vec<f64>>,
    labels: Vec<Sign>,
}

impl LabeledDataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<Sign>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: labels.len(),
            });
        }
        let d = points.first().map_or(0, Vec::len);
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) || p.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "point {i} must be finite and nonzero"
                )));
            }
        }
        Ok(Self { points, labels })
    }

    pub fn from_samples(samples: Vec<Sample>) -> Result<Self> {
        let (points, labels) = samples.into_iter().map(|s| (s.x, s.y)).unzip();
        Self::new(points, labels)
    }

    /// The 4-point planar set `{(1, ±0.1)} ∪ {(−1, ±0.1)}` with the first two positive.
    pub fn four_point() -> Self {
        Self::new(
            vec![vec![1.0, 0.1], vec![1.0, -0.1], vec![-1.0, 0.1], vec![-1.0, -0.1]],
            vec![Sign::Pos, Sign::Pos, Sign::Neg, Sign::Neg],
        )
        .expect("fixture is valid")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[Sign] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], Sign)> {
        self.points.iter().map(Vec::as_slice).zip(self.labels.iter().copied())
    }

    /// Points of one class, `{x_i | y_i = s}`.
    pub fn class_points(&self, s: Sign) -> Vec<Vec<f64>> {
        self.iter()
            .filter(|(_, y)| *y == s)
            .map(|(x, _)| x.to_vec())
            .collect()
    }

    pub fn has_both_labels(&self) -> bool {
        self.labels.contains(&Sign::Pos) && self.labels.contains(&Sign::Neg)
    }

    /// First pair `(i, i')`, `i ≤ i'`, breaking orthogonal separability:
    /// same-class inner products must be strictly positive (including
    /// `i = i'`), cross-class ones nonpositive. Comparisons are exact.
    pub fn orthosep_violation(&self) -> Option<(usize, usize)> {
        for i in 0..self.len() {
            for j in i..self.len() {
                let ip = dot(&self.points[i], &self.points[j]);
                let ok = if self.labels[i] == self.labels[j] {
                    ip > 0.0
                } else {
                    ip <= 0.0
                };
                if !ok {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn is_orthogonally_separable(&self) -> bool {
        self.orthosep_violation().is_none()
    }

    /// Plain text: header `n d`, then one line `y x_1 … x_d` per point.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {}", self.len(), self.dim()).unwrap();
        for (x, y) in self.iter() {
            write!(s, "{} ", y.as_int()).unwrap();
            s.push_str(&format_row(x));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(0, "missing header"))?;
        let dims = parse_reals::<usize>(ln, header)?;
        let [n, d] = dims[..] else {
            return Err(Error::parse(ln, "header must be `n d`"));
        };
        let mut points = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, line) = lines.next().ok_or_else(|| Error::parse(ln, "missing point"))?;
            let mut toks = line.split_whitespace();
            let y = toks
                .next()
                .and_then(|t| t.parse::<i64>().ok())
                .and_then(Sign::from_int)
                .ok_or_else(|| Error::parse(ln, "label must be 1 or -1"))?;
            let rest: Vec<&str> = toks.collect();
            let x = parse_reals::<f64>(ln, &rest.join(" "))?;
            if x.len() != d {
                return Err(Error::parse(ln, format!("expected {d} coordinates, got {}", x.len())));
            }
            points.push(x);
            labels.push(y);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::parse(ln, "trailing data"));
        }
        Self::new(points, labels)
    }
}

/// Half-angle of the sampling cones used by [`generate_orthosep`].
pub const ORTHOSEP_CONE_HALF_ANGLE_DEG: f64 = 40.0;
const ORTHOSEP_MAX_ATTEMPTS: usize = 1000;

/// Random orthogonally separable dataset: positives in a cone of half-angle
/// 40° around a random unit axis `u`, negatives in the cone around `−u`, norms
/// uniform on `[0.5, 1.5]`; each attempt is certified and retried on failure.
pub fn generate_orthosep(
    d: usize,
    n_pos: usize,
    n_neg: usize,
    rng: &mut SeededRng,
) -> Result<LabeledDataset> {
    if d < 2 || n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(
            "orthogonally separable datasets need d ≥ 2 and both classes".into(),
        ));
    }
    let max_angle = ORTHOSEP_CONE_HALF_ANGLE_DEG.to_radians();
    for _ in 0..ORTHOSEP_MAX_ATTEMPTS {
        let axis = rng.unit_vector(d);
        let mut points = Vec::with_capacity(n_pos + n_neg);
        let mut labels = Vec::with_capacity(n_pos + n_neg);
        for (s, count) in [(Sign::Pos, n_pos), (Sign::Neg, n_neg)] {
            for _ in 0..count {
                let centre: Vec<f64> = axis.iter().map(|a| s.value() * a).collect();
                let angle = rng.uniform() * max_angle;
                let radius = rng.uniform_range(0.5, 1.5);
                let perp = orthogonal_unit(&centre, rng);
                let (sin, cos) = angle.sin_cos();
                let x = centre
                    .iter()
                    .zip(&perp)
                    .map(|(c, p)| radius * (cos * c + sin * p))
                    .collect();
                points.push(x);
                labels.push(s);
            }
        }
        let Ok(ds) = LabeledDataset::new(points, labels) else {
            continue;
        };
        if ds.is_orthogonally_separable() {
            return Ok(ds);
        }
    }
    Err(Error::GenerationExhausted(ORTHOSEP_MAX_ATTEMPTS))
}

/// Random unit vector orthogonal to the unit vector `u`.
fn orthogonal_unit(u: &[f64], rng: &mut SeededRng) -> Vec<f64> {
    loop {
        let mut z = rng.unit_vector(u.len());
        let proj = dot(&z, u);
        z.iter_mut().zip(u).for_each(|(z, u)| *z -= proj * u);
        let n = norm(&z);
        if n > 1e-8 {
            z.iter_mut().for_each(|v| *v /= n);
            return z;
        }
    }
}
