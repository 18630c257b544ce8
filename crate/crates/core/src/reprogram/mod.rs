//! Analytic adversarial programs for random networks, reprogrammed-accuracy
//! estimation, image combination schemes and gradient-based program search.

mod image;
mod optimize;

pub use image::{resize_bilinear, scheme1_combine, scheme1_side, scheme2_combine, ProgramImage};
pub use optimize::{optimize_program, softsign, OptimizeConfig, OptimizedProgram, PROGRAM_SCALE_FACTOR};

use serde::Serialize;

use crate::data::{BernoulliModel, Sample};
use crate::error::{Error, Result};
use crate::network::TwoLayerNet;
use crate::numerics::{binomial_sigma, dot, min_norm_solve, norm, SeededRng, Sign};

/// Neurons with `|a_j w_jᵀφ|` below this are treated as orthogonal to `φ`.
pub const TIE_TOL: f64 = 1e-14;

/// Split of `[k]` into helpful (`a_j w_jᵀφ > 0`) and unhelpful neurons.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub helpful: Vec<usize>,
    pub unhelpful: Vec<usize>,
}

pub fn partition_neurons(net: &TwoLayerNet, phi: &[f64]) -> Result<Partition> {
    if phi.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: phi.len(),
        });
    }
    if (norm(phi) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("class direction must have unit norm".into()));
    }
    let mut helpful = Vec::new();
    let mut unhelpful = Vec::new();
    for (j, &a) in net.output_weights().iter().enumerate() {
        let score = a * dot(net.neuron(j), phi);
        if score.abs() < TIE_TOL {
            return Err(Error::TieEncountered { neuron: j, value: score });
        }
        if score > 0.0 {
            helpful.push(j);
        } else {
            unhelpful.push(j);
        }
    }
    Ok(Partition { helpful, unhelpful })
}

/// Offset `p` whose effect on the first layer is the bias vector `p′ = W p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdversarialProgram {
    pub p: Vec<f64>,
    pub target_bias: Vec<f64>,
    pub partition: Partition,
    pub p_norm: f64,
    pub target_bias_norm: f64,
    /// `‖W p − p′‖`.
    pub residual: f64,
}

/// Builds the analytic program: `p′_j = 0` on helpful neurons and
/// `−√(d/|K⁻|)` on unhelpful ones, then `p` is the minimum-norm solution of
/// `W p = p′`.
pub fn construct_program(net: &TwoLayerNet, phi: &[f64]) -> Result<AdversarialProgram> {
    let (d, k) = (net.input_dim(), net.width());
    if k > d {
        return Err(Error::WidthExceedsDimension { k, d });
    }
    let partition = partition_neurons(net, phi)?;
    let mut target_bias = vec![0.0; k];
    let p = if partition.unhelpful.is_empty() {
        vec![0.0; d]
    } else {
        let bias = -(d as f64 / partition.unhelpful.len() as f64).sqrt();
        for &j in &partition.unhelpful {
            target_bias[j] = bias;
        }
        min_norm_solve(net.weights(), &target_bias)?
    };
    let wp = net.weights().matvec(&p)?;
    let residual = norm(
        &wp.iter()
            .zip(&target_bias)
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    Ok(AdversarialProgram {
        p_norm: norm(&p),
        target_bias_norm: norm(&target_bias),
        p,
        target_bias,
        partition,
        residual,
    })
}

/// Whether `m·y·N(p + x) > 0`; an output of exactly zero counts as a miss.
pub fn reprogrammed_success(net: &TwoLayerNet, p: &[f64], sample: &Sample, m: Sign) -> bool {
    m.value() * sample.y.value() * reprogrammed_output(net, p, &sample.x) > 0.0
}

/// `N(p + x)`.
pub fn reprogrammed_output(net: &TwoLayerNet, p: &[f64], x: &[f64]) -> f64 {
    let shifted: Vec<f64> = p.iter().zip(x).map(|(p, x)| p + x).collect();
    net.forward_unchecked(&shifted)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AccuracyEstimate {
    pub accuracy: f64,
    pub stderr: f64,
    pub successes: usize,
    pub trials: usize,
}

impl AccuracyEstimate {
    pub fn from_counts(successes: usize, trials: usize) -> Self {
        let accuracy = if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        };
        Self {
            accuracy,
            stderr: binomial_sigma(accuracy, trials),
            successes,
            trials,
        }
    }
}

/// Monte-Carlo estimate of `P{m·y·N(p + x) > 0}` under the data model.
pub fn reprogrammed_accuracy(
    net: &TwoLayerNet,
    p: &[f64],
    model: &BernoulliModel,
    m: Sign,
    trials: usize,
    rng: &mut SeededRng,
) -> Result<AccuracyEstimate> {
    if p.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: p.len(),
        });
    }
    if model.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: model.dim(),
        });
    }
    let successes = (0..trials)
        .filter(|_| reprogrammed_success(net, p, &model.sample_one(rng), m))
        .count();
    Ok(AccuracyEstimate::from_counts(successes, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::random_hypercube_direction;
    use crate::numerics::Matrix;

    fn single(w: Vec<f64>, a: f64) -> TwoLayerNet {
        let d = w.len();
        TwoLayerNet::new(Matrix::new(1, d, w).unwrap(), vec![a]).unwrap()
    }

    fn phi4() -> Vec<f64> {
        vec![0.5, -0.5, 0.5, 0.5]
    }

    #[test]
    fn aligned_and_anti_aligned_neurons() {
        let phi = phi4();
        let p = partition_neurons(&single(phi.clone(), 1.0), &phi).unwrap();
        assert_eq!((p.helpful, p.unhelpful), (vec![0], vec![]));
        let neg: Vec<f64> = phi.iter().map(|v| -v).collect();
        let p = partition_neurons(&single(neg, 1.0), &phi).unwrap();
        assert_eq!((p.helpful, p.unhelpful), (vec![], vec![0]));
    }

    #[test]
    fn orthogonal_neuron_is_a_tie() {
        let phi = phi4();
        let n = single(vec![0.5, 0.5, 0.0, 0.0], 1.0);
        assert!(matches!(partition_neurons(&n, &phi), Err(Error::TieEncountered { neuron: 0, .. })));
    }

    #[test]
    fn all_helpful_gives_zero_program() {
        let phi = phi4();
        let prog = construct_program(&single(phi.clone(), 1.0), &phi).unwrap();
        assert_eq!(prog.p, vec![0.0; 4]);
        assert_eq!(prog.target_bias, vec![0.0]);
    }

    #[test]
    fn single_unhelpful_neuron_closed_form() {
        let phi = phi4();
        let w1: Vec<f64> = vec![-0.7, 0.2, -0.4, -0.1];
        let net = single(w1.clone(), 1.0);
        assert!(dot(&w1, &phi) < 0.0);
        let prog = construct_program(&net, &phi).unwrap();
        let d = 4.0f64;
        assert_eq!(prog.target_bias, vec![-d.sqrt()]);
        let w2 = dot(&w1, &w1);
        for (got, w) in prog.p.iter().zip(&w1) {
            let want = -d.sqrt() * w / w2;
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn nonempty_unhelpful_set_has_target_norm_sqrt_d() {
        let mut rng = SeededRng::new(10, 0);
        let d = 64;
        for _ in 0..20 {
            let net = TwoLayerNet::random_init(d, 8, &mut rng).unwrap();
            let phi = random_hypercube_direction(d, &mut rng);
            let prog = construct_program(&net, &phi).unwrap();
            if !prog.partition.unhelpful.is_empty() {
                assert!((prog.target_bias_norm - (d as f64).sqrt()).abs() < 1e-9);
            }
            assert!(prog.residual <= 1e-10 * (d as f64).sqrt());
        }
    }

    #[test]
    fn program_acts_as_first_layer_bias() {
        let mut rng = SeededRng::new(11, 0);
        let d = 32;
        let net = TwoLayerNet::random_init(d, 6, &mut rng).unwrap();
        let phi = random_hypercube_direction(d, &mut rng);
        let prog = construct_program(&net, &phi).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
            let px: Vec<f64> = prog.p.iter().zip(&x).map(|(p, x)| p + x).collect();
            for j in 0..6 {
                let lhs = dot(net.neuron(j), &px);
                let rhs = dot(net.neuron(j), &x) + prog.target_bias[j];
                assert!((lhs - rhs).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn width_above_dimension_is_rejected() {
        let mut rng = SeededRng::new(12, 0);
        let net = TwoLayerNet::random_init(4, 5, &mut rng).unwrap();
        assert!(matches!(
            construct_program(&net, &phi4()),
            Err(Error::WidthExceedsDimension { k: 5, d: 4 })
        ));
    }

    #[test]
    fn constant_sign_network_matches_label_marginal() {
        // every neuron strongly positive on the whole scaled hypercube
        let d = 4;
        let phi = phi4();
        let model = BernoulliModel::new(phi, 1.0, 0.3).unwrap();
        let w = Matrix::new(1, d, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let net = TwoLayerNet::new(w, vec![1.0]).unwrap();
        let p = vec![10.0, 0.0, 0.0, 0.0];
        let trials = 20_000;
        let est = reprogrammed_accuracy(&net, &p, &model, Sign::Pos, trials, &mut SeededRng::new(1, 3)).unwrap();
        assert!((est.accuracy - 0.5).abs() <= 3.0 * (0.25 / trials as f64).sqrt());
    }

    #[test]
    fn noiseless_model_gives_deterministic_accuracy() {
        let d = 16;
        let mut rng = SeededRng::new(13, 0);
        let net = TwoLayerNet::random_init(d, 4, &mut rng).unwrap();
        let phi = random_hypercube_direction(d, &mut rng);
        let prog = construct_program(&net, &phi).unwrap();
        let model = BernoulliModel::new(phi, 2.0, 0.5).unwrap();
        // with τ = 1/2 only the label is random: each class has a fixed outcome
        let outcome = |y: Sign| {
            reprogrammed_success(&net, &prog.p, &Sample { x: model.class_vertex(y), y }, Sign::Pos)
        };
        let (pos, neg) = (outcome(Sign::Pos), outcome(Sign::Neg));
        let mut accs = Vec::new();
        for seed in 0..4 {
            let mut rng = SeededRng::new(seed, 0);
            for s in model.sample(200, &mut rng) {
                let want = if s.y == Sign::Pos { pos } else { neg };
                assert_eq!(reprogrammed_success(&net, &prog.p, &s, Sign::Pos), want);
            }
            accs.push(
                reprogrammed_accuracy(&net, &prog.p, &model, Sign::Pos, 1000, &mut rng)
                    .unwrap()
                    .accuracy,
            );
        }
        if pos == neg {
            assert!(accs.iter().all(|&a| a == accs[0]));
        }
    }

    #[test]
    fn zero_output_counts_as_failure() {
        let net = single(vec![1.0, 0.0], 1.0);
        let s = Sample { x: vec![-1.0, 0.0], y: Sign::Pos };
        assert!(!reprogrammed_success(&net, &[0.0, 0.0], &s, Sign::Pos));
        assert!(!reprogrammed_success(&net, &[0.0, 0.0], &s, Sign::Neg));
    }
}
