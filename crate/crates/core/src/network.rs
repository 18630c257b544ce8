//! Two-layer bias-free ReLU networks `N(x) = Σ_j a_j ψ(w_jᵀ x)`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix, SeededRng};

/// ReLU `ψ(u) = max(u, 0)`.
pub fn relu(u: f64) -> f64 {
    if u > 0.0 {
        u
    } else {
        0.0
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Clarke subdifferential of the ReLU at `u`.
pub fn relu_subgradient(u: f64) -> Interval {
    if u < 0.0 {
        Interval { lo: 0.0, hi: 0.0 }
    } else if u > 0.0 {
        Interval { lo: 1.0, hi: 1.0 }
    } else {
        Interval { lo: 0.0, hi: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoLayerNet {
    weights: Matrix,
    output: Vec<f64>,
}

impl TwoLayerNet {
    /// Builds a network from its k × d first-layer matrix and k output weights.
    pub fn new(weights: Matrix, output: Vec<f64>) -> Result<Self> {
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::InvalidArgument("network needs k ≥ 1 and d ≥ 1".into()));
        }
        if output.len() != weights.rows() {
            return Err(Error::DimensionMismatch {
                expected: weights.rows(),
                got: output.len(),
            });
        }
        if output.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("output weights must be finite".into()));
        }
        Ok(Self { weights, output })
    }

    /// Random network: first-layer entries i.i.d. `N(0, 1/d)`, output weights
    /// independently uniform on `{±1/√k}`.
    pub fn random_init(d: usize, k: usize, rng: &mut SeededRng) -> Result<Self> {
        if d == 0 || k == 0 {
            return Err(Error::InvalidArgument("network needs k ≥ 1 and d ≥ 1".into()));
        }
        let mut w = vec![0.0; k * d];
        rng.fill_gaussian(&mut w, 1.0 / (d as f64).sqrt());
        let scale = 1.0 / (k as f64).sqrt();
        let a = (0..k).map(|_| rng.sign().value() * scale).collect();
        Self::new(Matrix::new(k, d, w)?, a)
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn width(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.output
    }

    pub fn neuron(&self, j: usize) -> &[f64] {
        self.weights.row(j)
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Matrix, &mut [f64]) {
        (&mut self.weights, &mut self.output)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.input_dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            })
        }
    }

    /// First-layer pre-activations `w_jᵀ x`.
    pub fn preactivations(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok((0..self.width()).map(|j| dot(self.neuron(j), x)).collect())
    }

    /// `N(x)`, accumulated over ascending neuron index.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> f64 {
        let mut out = 0.0;
        for (j, &a) in self.output.iter().enumerate() {
            out += a * relu(dot(self.neuron(j), x));
        }
        out
    }

    /// Input gradient of `N` at `x`, taking 0 from the ReLU subdifferential at kinks.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut g = vec![0.0; self.input_dim()];
        for (j, &a) in self.output.iter().enumerate() {
            let w = self.neuron(j);
            if dot(w, x) > 0.0 {
                g.iter_mut().zip(w).for_each(|(g, w)| *g += a * w);
            }
        }
        Ok(g)
    }

    /// Every weight multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        let w: Vec<f64> = self.weights.as_slice().iter().map(|v| alpha * v).collect();
        Self::new(
            Matrix::new(self.width(), self.input_dim(), w)?,
            self.output.iter().map(|a| alpha * a).collect(),
        )
    }

    /// Euclidean norm of the full parameter vector `(w_1, …, w_k, a_1, …, a_k)`.
    pub fn parameter_norm(&self) -> f64 {
        let w2: f64 = self.weights.as_slice().iter().map(|v| v * v).sum();
        let a2: f64 = self.output.iter().map(|v| v * v).sum();
        (w2 + a2).sqrt()
    }

    /// Plain-text record: header `d k`, k rows of d first-layer weights, one
    /// row of k output weights; 17 significant digits.
    pub fn to_text(&self) -> String {
        self.write_text(false)
    }

    pub(crate) fn write_text(&self, layer2_marker: bool) -> String {
        let mut s = String::new();
        writeln!(s, "{} {}", self.input_dim(), self.width()).unwrap();
        for j in 0..self.width() {
            s.push_str(&format_row(self.neuron(j)));
        }
        if layer2_marker {
            s.push_str("layer2\n");
        }
        s.push_str(&format_row(&self.output));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_text(text, false)
    }

    pub(crate) fn read_text(text: &str, layer2_marker: bool) -> Result<Self> {
        let mut lines = content_lines(text);
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(0, "missing header"))?;
        let dims = parse_reals::<usize>(ln, header)?;
        let [d, k] = dims[..] else {
            return Err(Error::parse(ln, "header must be `d k`"));
        };
        let mut w = Vec::with_capacity(k * d);
        for _ in 0..k {
            let (ln, line) = lines.next().ok_or_else(|| Error::parse(ln, "missing weight row"))?;
            let row = parse_reals::<f64>(ln, line)?;
            if row.len() != d {
                return Err(Error::parse(ln, format!("expected {d} values, got {}", row.len())));
            }
            w.extend(row);
        }
        if layer2_marker {
            match lines.next() {
                Some((_, "layer2")) => {}
                Some((ln, _)) => return Err(Error::parse(ln, "expected `layer2`")),
                None => return Err(Error::parse(ln, "missing `layer2` row")),
            }
        }
        let (ln, line) = lines.next().ok_or_else(|| Error::parse(ln, "missing output weights"))?;
        let a = parse_reals::<f64>(ln, line)?;
        if a.len() != k {
            return Err(Error::parse(ln, format!("expected {k} output weights, got {}", a.len())));
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::parse(ln, "trailing data"));
        }
        Self::new(Matrix::new(k, d, w)?, a)
    }
}

/// 17 significant digits, space separated, newline terminated.
pub(crate) fn format_row(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v:.16e}").unwrap();
    }
    s.push('\n');
    s
}

/// Non-empty lines that are not `#` comments, with 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(crate) fn parse_reals<T: std::str::FromStr>(line_no: usize, line: &str) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<T>()
                .map_err(|_| Error::parse(line_no, format!("bad number `{tok}`")))
        })
        .collect()
}
