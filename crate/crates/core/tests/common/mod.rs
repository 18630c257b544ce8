//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use reprogram_lab::data::LabeledDataset;
use reprogram_lab::flow::{empirical_loss, loss_and_gradient, LossKind};
use reprogram_lab::network::TwoLayerNet;
use reprogram_lab::numerics::{Matrix, SeededRng, Sign};

pub fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Minimum-norm solution through the SVD pseudo-inverse.
pub fn pinv_solve(w: &Matrix, b: &[f64]) -> Vec<f64> {
    let a = to_nalgebra(w);
    let svd = a.svd(true, true);
    let x = svd.solve(&DVector::from_column_slice(b), 1e-13).expect("svd solve");
    x.iter().copied().collect()
}

/// Exhaustive active-set search for `min ‖v‖² s.t. vᵀx_i ≥ 1`: every subset
/// `S` gives the candidate `v = X_Sᵀ(X_S X_Sᵀ)⁻¹1`, kept when its multipliers
/// are nonnegative and it is feasible for all points. `None` when no subset
/// qualifies.
pub fn brute_force_max_margin(points: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = points.len();
    let d = points[0].len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if idx.len() > d {
            continue;
        }
        let xs = DMatrix::from_fn(idx.len(), d, |r, c| points[idx[r]][c]);
        let gram = &xs * xs.transpose();
        let Some(chol) = gram.clone().cholesky() else { continue };
        if gram.determinant().abs() < 1e-12 {
            continue;
        }
        let lambda = chol.solve(&DVector::from_element(idx.len(), 1.0));
        if lambda.iter().any(|&l| l < -1e-10) {
            continue;
        }
        let v = xs.transpose() * lambda;
        let feasible = points
            .iter()
            .all(|x| x.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() >= 1.0 - 1e-9);
        if !feasible {
            continue;
        }
        let nv = v.norm();
        if best.as_ref().is_none_or(|(b, _)| nv < *b) {
            best = Some((nv, v.iter().copied().collect()));
        }
    }
    best.map(|(_, v)| v)
}

/// Points scattered around a random axis, so most instances are feasible
/// and well conditioned; `n ∈ [1, 6]`, `d ∈ [1, 4]`.
pub fn random_margin_instance(rng: &mut SeededRng) -> Vec<Vec<f64>> {
    let d = 1 + (rng.uniform() * 4.0) as usize;
    let n = 1 + (rng.uniform() * 6.0) as usize;
    let axis = rng.unit_vector(d);
    (0..n)
        .map(|_| {
            let s = rng.uniform_range(0.3, 1.5);
            axis.iter().map(|a| s * a + 0.6 * rng.gaussian()).collect()
        })
        .collect()
}

pub fn random_dataset(n: usize, d: usize, rng: &mut SeededRng) -> LabeledDataset {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        points.push((0..d).map(|_| rng.gaussian()).collect());
        labels.push(if i % 2 == 0 { Sign::Pos } else { Sign::Neg });
    }
    LabeledDataset::new(points, labels).unwrap()
}

/// A network whose preactivations on `data` all stay at least `gap` from 0.
pub fn differentiable_point(data: &LabeledDataset, k: usize, gap: f64, rng: &mut SeededRng) -> TwoLayerNet {
    loop {
        let w: Vec<f64> = (0..k * data.dim()).map(|_| rng.gaussian()).collect();
        let a: Vec<f64> = (0..k).map(|_| rng.gaussian()).collect();
        let net = TwoLayerNet::new(Matrix::new(k, data.dim(), w).unwrap(), a).unwrap();
        let ok = data
            .points()
            .iter()
            .all(|x| net.preactivations(x).unwrap().iter().all(|u| u.abs() > gap));
        if ok {
            return net;
        }
    }
}

/// Relative error between the analytic gradient and central differences.
pub fn gradient_fd_error(net: &TwoLayerNet, data: &LabeledDataset, kind: LossKind, h: f64) -> f64 {
    let (_, g) = loss_and_gradient(net, data, kind).unwrap();
    let mut analytic: Vec<f64> = g.w.as_slice().to_vec();
    analytic.extend(&g.a);
    let (k, d) = (net.width(), net.input_dim());
    let base_w = net.weights().as_slice().to_vec();
    let base_a = net.output_weights().to_vec();
    let eval = |w: &[f64], a: &[f64]| {
        let n = TwoLayerNet::new(Matrix::new(k, d, w.to_vec()).unwrap(), a.to_vec()).unwrap();
        empirical_loss(&n, data, kind).unwrap()
    };
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..k * d {
        let (mut wp, mut wm) = (base_w.clone(), base_w.clone());
        wp[i] += h;
        wm[i] -= h;
        numeric.push((eval(&wp, &base_a) - eval(&wm, &base_a)) / (2.0 * h));
    }
    for j in 0..k {
        let (mut ap, mut am) = (base_a.clone(), base_a.clone());
        ap[j] += h;
        am[j] -= h;
        numeric.push((eval(&base_w, &ap) - eval(&base_w, &am)) / (2.0 * h));
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
    diff / scale
}
