use crate::error::{Error, Result};

use super::{dot, norm, LINSOLVE_TOL, PD_PIVOT_TOL, SV_REL_TOL};

/// Dense row-major matrix of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "matrix entry {i} is not finite"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `Aᵀ y`.
    pub fn transpose_matvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += yi * a;
            }
        }
        Ok(out)
    }

    /// Row Gram matrix `A Aᵀ` (rows × rows).
    pub fn gram_rows(&self) -> Matrix {
        let (m, k) = (self.rows, self.cols);
        let mut out = Matrix::zeros(m, m);
        if m == 0 || k == 0 {
            return out;
        }
        // SAFETY: all pointers come from live buffers whose extents match the
        // (m × k)·(k × m) → (m × m) strides passed in.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                m,
                1.0,
                self.data.as_ptr(),
                k as isize,
                1,
                self.data.as_ptr(),
                1,
                k as isize,
                0.0,
                out.data.as_mut_ptr(),
                m as isize,
                1,
            );
        }
        // dgemm is not guaranteed to be bitwise symmetric; mirror the upper triangle.
        for i in 0..m {
            for j in (i + 1)..m {
                let v = out.data[i * m + j];
                out.data[j * m + i] = v;
            }
        }
        out
    }

    /// Gram matrix of the smaller side: `A Aᵀ` if rows ≤ cols, else `Aᵀ A`.
    pub fn small_gram(&self) -> Matrix {
        if self.rows <= self.cols {
            self.gram_rows()
        } else {
            self.transpose().gram_rows()
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Lower-triangular Cholesky factor `L` with `G = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(g: &Matrix) -> Result<Self> {
        if g.rows != g.cols {
            return Err(Error::InvalidArgument("Cholesky needs a square matrix".into()));
        }
        let n = g.rows;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = g.data[i * n + j];
                for p in 0..j {
                    s -= l[i * n + p] * l[j * n + p];
                }
                if i == j {
                    if s < PD_PIVOT_TOL || !s.is_finite() {
                        return Err(Error::GramNotPositiveDefinite { row: i, pivot: s });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, lower: l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let l = &self.lower;
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for p in 0..i {
                s -= l[i * n + p] * z[p];
            }
            z[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for p in (i + 1)..n {
                s -= l[p * n + i] * z[p];
            }
            z[i] = s / l[i * n + i];
        }
        z
    }
}

/// Minimum-norm solution of the underdetermined system `W p = b` (k ≤ d),
/// computed as `p = Wᵀ (W Wᵀ)⁻¹ b` through a Cholesky factorisation of the
/// k × k Gram matrix, with up to two rounds of iterative refinement.
pub fn min_norm_solve(w: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    check_len(w.rows, b.len())?;
    if w.rows > w.cols {
        return Err(Error::InvalidArgument(format!(
            "min_norm_solve needs rows ≤ cols, got {}×{}",
            w.rows, w.cols
        )));
    }
    let chol = Cholesky::factor(&w.gram_rows())?;
    let mut z = chol.solve(b);
    let tol = LINSOLVE_TOL * norm(b).max(1.0);
    for _ in 0..2 {
        let p = w.transpose_matvec(&z)?;
        let residual: Vec<f64> = w.matvec(&p)?.iter().zip(b).map(|(a, b)| b - a).collect();
        if norm(&residual) <= tol {
            return Ok(p);
        }
        let dz = chol.solve(&residual);
        z.iter_mut().zip(&dz).for_each(|(z, dz)| *z += dz);
    }
    w.transpose_matvec(&z)
}

/// Extreme singular values `(s_min, s_max)` of `w`.
///
/// Uses a cyclic Jacobi eigen-decomposition of the smaller Gram matrix when
/// its side is at most 64, otherwise power iteration for the top eigenvalue and
/// Cholesky-based inverse iteration for the bottom one.
pub fn singular_extremes(w: &Matrix) -> Result<(f64, f64)> {
    if w.rows == 0 || w.cols == 0 {
        return Err(Error::InvalidArgument("singular_extremes of an empty matrix".into()));
    }
    let g = w.small_gram();
    let (lo, hi) = if g.rows <= 64 {
        let eig = symmetric_eigenvalues(&g)?;
        (eig[0], eig[eig.len() - 1])
    } else {
        let hi = power_iteration(&g)?;
        let lo = match Cholesky::factor(&g) {
            Ok(chol) => inverse_iteration(&chol, g.rows)?,
            Err(Error::GramNotPositiveDefinite { .. }) => 0.0,
            Err(e) => return Err(e),
        };
        (lo, hi)
    };
    Ok((lo.max(0.0).sqrt(), hi.max(0.0).sqrt()))
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn symmetric_eigenvalues(g: &Matrix) -> Result<Vec<f64>> {
    let n = g.rows;
    let mut a = g.data.clone();
    let scale = g.frobenius_norm().max(f64::MIN_POSITIVE);
    const MAX_SWEEPS: usize = 100;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    a[r * n + p] = c * arp - s * arq;
                    a[r * n + q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[p * n + r];
                    let aqr = a[q * n + r];
                    a[p * n + r] = c * apr - s * aqr;
                    a[q * n + r] = s * apr + c * aqr;
                }
            }
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure {
            what: "Jacobi eigenvalue sweep",
            iterations: MAX_SWEEPS,
        });
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

const ITERATION_BUDGET: usize = 20_000;

fn rayleigh_start(n: usize) -> Vec<f64> {
    // fixed, non-degenerate start so results are reproducible
    let v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).sin()).collect();
    let nv = norm(&v);
    v.into_iter().map(|x| x / nv).collect()
}

fn power_iteration(g: &Matrix) -> Result<f64> {
    let mut v = rayleigh_start(g.rows);
    let mut lambda = 0.0;
    for _ in 0..ITERATION_BUDGET {
        let gv = g.matvec(&v)?;
        let next = dot(&v, &gv);
        let n = norm(&gv);
        if n == 0.0 {
            return Ok(0.0);
        }
        v = gv.into_iter().map(|x| x / n).collect();
        if (next - lambda).abs() <= 0.1 * SV_REL_TOL * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::ConvergenceFailure {
        what: "power iteration",
        iterations: ITERATION_BUDGET,
    })
}

fn inverse_iteration(chol: &Cholesky, n: usize) -> Result<f64> {
    let mut v = rayleigh_start(n);
    let mut mu = 0.0;
    for _ in 0..ITERATION_BUDGET {
        let z = chol.solve(&v);
        let next = dot(&v, &z);
        let nz = norm(&z);
        v = z.into_iter().map(|x| x / nz).collect();
        if (next - mu).abs() <= 0.1 * SV_REL_TOL * next.abs() {
            return Ok(1.0 / next);
        }
        mu = next;
    }
    Err(Error::ConvergenceFailure {
        what: "inverse iteration",
        iterations: ITERATION_BUDGET,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn gaussian_matrix(rows: usize, cols: usize, sd: f64, rng: &mut SeededRng) -> Matrix {
        let mut data = vec![0.0; rows * cols];
        rng.fill_gaussian(&mut data, sd);
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn identity_system() {
        let p = min_norm_solve(&Matrix::identity(2), &[3.0, 4.0]).unwrap();
        assert_eq!(p, vec![3.0, 4.0]);
    }

    #[test]
    fn single_row_is_scaled_row() {
        let w = Matrix::new(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let p = min_norm_solve(&w, &[2.0]).unwrap();
        assert_eq!(p, vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn random_system_residual_and_norm_bounds() {
        let mut rng = SeededRng::new(42, 0);
        let w = gaussian_matrix(4, 16, 1.0, &mut rng);
        let b: Vec<f64> = (0..4).map(|_| rng.gaussian()).collect();
        let p = min_norm_solve(&w, &b).unwrap();
        let r: Vec<f64> = w.matvec(&p).unwrap().iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(norm(&r) <= 1e-10 * norm(&b).max(1.0));
        let (smin, smax) = singular_extremes(&w).unwrap();
        let nb = norm(&b);
        let np = norm(&p);
        assert!(nb / smax <= np * (1.0 + 1e-12) && np <= nb / smin * (1.0 + 1e-12));
    }

    #[test]
    fn rank_deficient_gram_is_rejected() {
        let w = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, 2.0, 4.0, 6.0]).unwrap();
        assert!(matches!(
            min_norm_solve(&w, &[1.0, 1.0]),
            Err(Error::GramNotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn diagonal_and_identity_singular_values() {
        let w = Matrix::new(2, 2, vec![2.0, 0.0, 0.0, 3.0]).unwrap();
        let (lo, hi) = singular_extremes(&w).unwrap();
        assert!((lo - 2.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
        let (lo, hi) = singular_extremes(&Matrix::identity(3)).unwrap();
        assert_eq!((lo, hi), (1.0, 1.0));
    }

    #[test]
    fn large_gram_route_matches_jacobi() {
        let mut rng = SeededRng::new(5, 1);
        let w = gaussian_matrix(80, 200, 1.0 / (200f64).sqrt(), &mut rng);
        let (lo, hi) = singular_extremes(&w).unwrap();
        let eig = symmetric_eigenvalues(&w.small_gram()).unwrap();
        let (jlo, jhi) = (eig[0].sqrt(), eig[eig.len() - 1].sqrt());
        assert!((lo - jlo).abs() <= 1e-8 * jlo, "{lo} vs {jlo}");
        assert!((hi - jhi).abs() <= 1e-8 * jhi, "{hi} vs {jhi}");
    }

    #[test]
    fn gram_is_symmetric_and_correct() {
        let mut rng = SeededRng::new(9, 9);
        let w = gaussian_matrix(7, 33, 1.0, &mut rng);
        let g = w.gram_rows();
        for i in 0..7 {
            for j in 0..7 {
                let naive = dot(w.row(i), w.row(j));
                assert!((g.get(i, j) - naive).abs() < 1e-12 * naive.abs().max(1.0));
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
    }

    #[test]
    fn tall_matrix_uses_column_gram() {
        let w = Matrix::new(3, 1, vec![3.0, 0.0, 4.0]).unwrap();
        let (lo, hi) = singular_extremes(&w).unwrap();
        assert!((lo - 5.0).abs() < 1e-12 && (hi - 5.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_entries_rejected() {
        assert!(Matrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(1, 2, vec![1.0]).is_err());
    }
}
