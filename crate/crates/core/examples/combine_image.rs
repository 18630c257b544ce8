//! Paste and blend a small input into a program image; writes two PPM files
//! to the directory given as the first argument (default: the temp dir).

use reprogram_lab::numerics::SeededRng;
use reprogram_lab::reprogram::{scheme1_combine, scheme1_side, scheme2_combine, ProgramImage};

fn main() -> reprogram_lab::Result<()> {
    let dir = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let mut rng = SeededRng::new(1, 0);
    let program = ProgramImage::from_fn(224, 224, 3, |_, _, _| rng.uniform_range(-1.0, 1.0))?;
    // a bright diagonal stroke on a dark background
    let input = ProgramImage::from_fn(28, 28, 3, |y, x, _| if y.abs_diff(x) < 3 { 1.0 } else { -1.0 })?;
    let r = 2f64.powf(-20.0 / 9.0);
    let v = 2f64.powf(-40.0 / 9.0);
    println!("paste side at r = {r:.4}: {}", scheme1_side(224, r));
    let pasted = scheme1_combine(&program, &input, r)?;
    let blended = scheme2_combine(&program, &input, v)?;
    for (name, img) in [("scheme1.ppm", &pasted), ("scheme2.ppm", &blended)] {
        let path = dir.join(name);
        std::fs::write(&path, img.to_ppm(&format!("r = {r}\nv = {v}"))?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
