// Spatial signatures of two devices built on the same layout. Half of each
// signature is the shared layout response; the chaotic half is private to
// the device and can be read back exactly given the layout.

use arraymetrics::signature::{
    perturb_signature, planar_unit_signature, recover_chaotic_noise, signature_correlation,
    ChaoticNoise, Direction,
};
use arraymetrics::Result;

pub fn run_example() -> Result<f64> {
    let dir = Direction::new(0.4, 0.2)?;
    let e_t = planar_unit_signature(4, 4, dir)?;
    let neo = ChaoticNoise::generate(16, 1);
    let other = ChaoticNoise::generate(16, 2);
    let e_neo = perturb_signature(&e_t, &neo)?;
    let e_other = perturb_signature(&e_t, &other)?;

    let to_nominal = signature_correlation(&e_neo, &e_t)?;
    let between = signature_correlation(&e_neo, &e_other)?;
    println!("|corr| Neo vs nominal layout: {to_nominal:.3}");
    println!("|corr| Neo vs another device: {between:.3}");

    let recovered = recover_chaotic_noise(&e_neo, &e_t)?;
    let err = recovered
        .iter()
        .zip(&neo.values)
        .filter_map(|(r, n)| r.map(|r| (r - n).norm()))
        .fold(0.0, f64::max);
    println!("largest error recovering h~ from the signature: {err:.2e}");
    Ok(between)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
