//! Gradient descent from a balanced live start drives the loss below ℓ(0).

use reprogram_lab::verify::{theorem2_suite, Theorem2Config};

fn main() -> reprogram_lab::Result<()> {
    let v = theorem2_suite(&Theorem2Config::reference(7))?;
    for (k, x) in &v.measured {
        println!("{k:>32} = {x}");
    }
    println!("passed: {}", v.passed);
    Ok(())
}
