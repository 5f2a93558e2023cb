// Draws a chaotic 4×4 patch array, checks it and writes the SVG.

use arraymetrics::geometry::{
    generate_chaotic_geometry, render_geometry, validate_geometry, PerturbationParams,
};
use arraymetrics::Result;

pub fn run_example() -> Result<String> {
    let params = PerturbationParams::new(4, 4, 2024);
    let geom = generate_chaotic_geometry(&params)?;
    let report = validate_geometry(&geom);
    let (lo, hi) = params.displacement_bounds();
    println!(
        "{} elements, displacement bounds [{lo:.4}, {hi:.4}] m, clean: {}",
        geom.element_count(),
        report.is_clean()
    );
    Ok(render_geometry(&geom))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let svg = run_example()?;
    let out = std::env::temp_dir().join("chaotic_array.svg");
    std::fs::write(&out, svg)?;
    println!("wrote {}", out.display());
    Ok(())
}
