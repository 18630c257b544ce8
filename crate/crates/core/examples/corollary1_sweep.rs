//! Accuracy of the analytic program as width, separation and noise scale with d.

use reprogram_lab::verify::{corollary1_sweep, Corollary1Config};

fn main() -> reprogram_lab::Result<()> {
    let cfg = Corollary1Config {
        d_list: vec![64, 256, 1024],
        trials: 500,
        ..Corollary1Config::reference(7)
    };
    let sweep = corollary1_sweep(&cfg)?;
    print!("{}", sweep.to_csv(""));
    println!("passed: {}", sweep.verdict.passed);
    Ok(())
}
