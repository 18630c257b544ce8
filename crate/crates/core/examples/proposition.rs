//! Trained networks resist reprogramming against the learned direction.

use reprogram_lab::verify::{proposition_suite, PropositionConfig};

fn main() -> reprogram_lab::Result<()> {
    let cfg = PropositionConfig {
        trials: 2000,
        ..PropositionConfig::reference(7)
    };
    let v = proposition_suite(&cfg)?;
    for (k, x) in &v.measured {
        println!("{k:>28} = {x:.6}");
    }
    println!("passed: {}", v.passed);
    Ok(())
}
