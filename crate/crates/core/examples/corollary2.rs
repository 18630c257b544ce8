//! Long training on the four-point dataset: neurons align with the per-class
//! maximum-margin vectors.

use reprogram_lab::verify::{corollary2_suite, Corollary2Config};

fn main() -> reprogram_lab::Result<()> {
    let v = corollary2_suite(&Corollary2Config::reference(7))?;
    for (k, x) in &v.measured {
        let lim = v.threshold.get(k).map(|l| format!("  (limit {l})")).unwrap_or_default();
        println!("{k:>24} = {x:.6e}{lim}");
    }
    println!("passed: {}", v.passed);
    Ok(())
}
