//! Build the analytic program for one random network and measure its accuracy.

use reprogram_lab::data::{random_hypercube_direction, BernoulliModel};
use reprogram_lab::network::TwoLayerNet;
use reprogram_lab::numerics::{SeededRng, Sign};
use reprogram_lab::reprogram::{construct_program, reprogrammed_accuracy};

fn main() -> reprogram_lab::Result<()> {
    let (d, k) = (1024, 64);
    let mut rng = SeededRng::new(3, 0);
    let net = TwoLayerNet::random_init(d, k, &mut rng)?;
    let phi = random_hypercube_direction(d, &mut rng);
    let model = BernoulliModel::new(phi, (d as f64).powf(0.3), (d as f64).powf(-0.2))?;
    let prog = construct_program(&net, model.phi())?;
    println!(
        "helpful {} / unhelpful {}, ‖p‖ = {:.3}, ‖p′‖ = {:.3} (√d = {:.3}), residual {:.1e}",
        prog.partition.helpful.len(),
        prog.partition.unhelpful.len(),
        prog.p_norm,
        prog.target_bias_norm,
        (d as f64).sqrt(),
        prog.residual
    );
    let zero = reprogrammed_accuracy(&net, &vec![0.0; d], &model, Sign::Pos, 5000, &mut rng.fork(1))?;
    let acc = reprogrammed_accuracy(&net, &prog.p, &model, Sign::Pos, 5000, &mut rng.fork(1))?;
    println!("accuracy without program {:.4}, with program {:.4} ± {:.4}", zero.accuracy, acc.accuracy, acc.stderr);
    Ok(())
}
