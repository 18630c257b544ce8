//! Train on an orthogonally separable dataset and inspect the directional limit.

use reprogram_lab::data::generate_orthosep;
use reprogram_lab::flow::{balanced_live_init, convergence_report, train, LossKind, TrainerConfig};
use reprogram_lab::maxmargin::max_margin_vector;
use reprogram_lab::numerics::{SeededRng, Sign};

fn main() -> reprogram_lab::Result<()> {
    let mut rng = SeededRng::new(11, 0);
    let data = generate_orthosep(8, 6, 6, &mut rng)?;
    let theta0 = balanced_live_init(&data, 6, 1e-3, &mut rng)?;
    let cfg = TrainerConfig {
        loss_kind: LossKind::Exponential,
        step_size: 0.05,
        max_steps: 2_000_000,
        stop_loss: 1e-5,
        record_every: 100_000,
        stop_on_crossing: false,
    };
    let rep = train(&theta0, &data, &cfg)?;
    print!("{}", rep.to_csv(""));
    println!("stopped after {} steps ({:?}), ‖θ‖ {:.3e} → {:.3e}", rep.steps_taken, rep.stop_reason, rep.initial_norm, rep.final_norm);
    let vp = max_margin_vector(&data.class_points(Sign::Pos))?;
    let vn = max_margin_vector(&data.class_points(Sign::Neg))?;
    let conv = convergence_report(&rep.final_theta, &vp.v, &vn.v)?;
    for n in &conv.surviving {
        println!("neuron {} ({:?}): ‖w‖ {:.4}, cos to max-margin {:.6}", n.index, n.sign, n.norm, n.cosine);
    }
    println!("κ₊/κ₋ = {:.4}, target ‖v₊‖/‖v₋‖ = {:.4}", conv.kappa_ratio, conv.target_ratio);
    Ok(())
}
