//! Learn a program by gradient descent and compare it with the analytic one.

use reprogram_lab::data::{random_hypercube_direction, BernoulliModel};
use reprogram_lab::network::TwoLayerNet;
use reprogram_lab::numerics::{SeededRng, Sign};
use reprogram_lab::reprogram::{construct_program, optimize_program, reprogrammed_accuracy, OptimizeConfig};

fn main() -> reprogram_lab::Result<()> {
    let (d, k) = (256, 32);
    let mut rng = SeededRng::new(5, 0);
    let net = TwoLayerNet::random_init(d, k, &mut rng)?;
    let phi = random_hypercube_direction(d, &mut rng);
    let model = BernoulliModel::new(phi, (d as f64).powf(0.3), (d as f64).powf(-0.2))?;
    let opt = optimize_program(&net, &model, Sign::Pos, &OptimizeConfig::default(), &mut rng.fork(1))?;
    let analytic = construct_program(&net, model.phi())?;
    for (i, l) in opt.loss_curve.iter().enumerate().step_by(250) {
        println!("step {i:>5}  batch loss {l:.4}");
    }
    for (name, p) in [("initial", &opt.initial_p), ("optimized", &opt.p), ("analytic", &analytic.p)] {
        let a = reprogrammed_accuracy(&net, p, &model, Sign::Pos, 5000, &mut rng.fork(2))?;
        println!("{name:>10}: accuracy {:.4} ± {:.4}", a.accuracy, a.stderr);
    }
    Ok(())
}
