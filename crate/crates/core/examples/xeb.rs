//! Cross-entropy benchmarking of computational-basis samples against an
//! ideal 8-qubit state, for ideal, partially depolarized and fully mixed data.
//!
//! cargo run --release --example xeb

use randmeas::prelude::*;

fn main() -> randmeas::Result<()> {
    let n = 8;
    let shots = 50_000;
    let ideal = StateVector::random(n, &mut RngSeed::new(31, 0).rng())?;
    let self_xeb = estimators::self_xeb(&ideal)?;
    println!("self-XEB of the ideal state: {self_xeb:.4}");

    let comp: MeasurementSetting = sampling::computational_setting(n)?.into();
    let rho = ideal.to_density_matrix()?;
    for p in [0.0, 0.05, 0.2, 1.0] {
        let noisy = rho.depolarized(&NoiseModel::uniform(n, p)?)?;
        let data = noisy.sample_measurements(&comp, shots, None, &mut RngSeed::new(32, 0).rng())?;
        let xeb = estimators::xeb(&ideal, &data)?;
        println!("p = {p:<4} xeb {xeb:>7.4}  xeb/self-XEB {:>7.4}", xeb / self_xeb);
    }
    Ok(())
}
