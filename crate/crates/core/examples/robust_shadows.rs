//! Purities of a 5-qubit GHZ state measured with depolarizing readout
//! noise: standard shadows are biased low, calibrated shadows are not.
//!
//! cargo run --release --example robust_shadows

use randmeas::prelude::*;

fn main() -> randmeas::Result<()> {
    let n = 5;
    let (n_u, n_m, n_b) = (200, 100, 20);
    let noise = NoiseModel::random_normal(n, 0.1, 0.02, &mut RngSeed::new(11, 0).rng())?;
    let draw = |seed| sampling::sample_settings(n_u, seed, |rng| sampling::local_unitary_setting(n, rng));

    // calibration on |0…0⟩ with the same noise
    let zero = Mps::product_zero(n)?;
    let calibration = sim::simulate_group(&zero, &draw(12)?, n_m, Some(&noise), 13)?;
    let g = shadows::calibration_vector(&zero, &calibration)?;
    for (i, (est, p)) in g.g().iter().zip(noise.strengths()).enumerate() {
        println!("site {}: G = {est:.4}  (true {:.4})", i + 1, 1.0 - p);
    }

    let psi = Mps::ghz(n)?;
    let group = sim::simulate_group(&psi, &draw(14)?, n_m, Some(&noise), 15)?;
    println!("{:>2} {:>16} {:>16} {:>6}", "i", "standard", "robust", "ideal");
    for i in 1..=n {
        let sub = Subsystem::new((1..=i).collect())?;
        let purity = |g: Option<&CalibrationVector>| -> randmeas::Result<String> {
            let batches = shadows::batch_shadows_on(&group, &sub, Some(n_b), g)?;
            let r = &stats::jackknife_moments(&batches, &[2], false)?.results[0];
            Ok(format!("{:.3} ± {:.3}", r.raw_estimate, r.std_error()))
        };
        let ideal = if i == n { 1.0 } else { 0.5 };
        println!("{i:>2} {:>16} {:>16} {ideal:>6.2}", purity(None)?, purity(Some(&g))?);
    }
    Ok(())
}
