//! Empty unhelpful-set rate, target-bias norm and singular-value bounds.

use reprogram_lab::verify::{appendix_a_suite, singular_value_bounds, AppendixAConfig};

fn main() -> reprogram_lab::Result<()> {
    let (lo, hi) = singular_value_bounds(1024, 32, 0.01);
    println!("singular values of a 32 × 1024 N(0, 1/d) matrix lie in [{lo:.4}, {hi:.4}] w.p. 0.99");
    let cfg = AppendixAConfig {
        trials: 2000,
        sv_trials: 200,
        ..AppendixAConfig::reference(7)
    };
    let v = appendix_a_suite(&cfg)?;
    for (k, x) in &v.measured {
        println!("{k:>28} = {x:.6}");
    }
    println!("passed: {}", v.passed);
    Ok(())
}
