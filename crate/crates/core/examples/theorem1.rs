//! Margin bound of the analytic program on random networks, at a reduced size.
//! `cargo run --release --example theorem1 -- [trials]`

use reprogram_lab::verify::{theorem1_constants, theorem1_montecarlo, Theorem1Config};

fn main() -> reprogram_lab::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let d = 1024usize;
    let cfg = Theorem1Config {
        d,
        k: 128,
        rho: (d as f64).powf(0.3),
        tau: (d as f64).powf(-0.2),
        trials,
        ..Theorem1Config::reference(7)
    };
    println!("constants: {:?}", theorem1_constants());
    let v = theorem1_montecarlo(&cfg)?;
    for (k, x) in &v.measured {
        println!("{k:>24} = {x:.6}");
    }
    println!("flags: {:?}", v.flags);
    println!("passed: {}", v.passed);
    Ok(())
}
