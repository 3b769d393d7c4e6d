//! Trace moments tr(ρ^k), k = 2…5, of a mixed 4-qubit state from 8 batch
//! shadows, with jackknife errors and their covariance.
//!
//! cargo run --release --example trace_moments

use randmeas::prelude::*;

fn main() -> randmeas::Result<()> {
    let n = 4;
    let rho = DensityMatrix::random_induced(n, 2, &mut RngSeed::new(3, 0).rng())?;
    let settings = sampling::sample_settings(200, 4, |rng| sampling::local_unitary_setting(n, rng))?;
    let group = sim::simulate_group(&rho, &settings, 100, None, 5)?;

    let batches = shadows::batch_shadows(&group, Some(8), None)?;
    let ks = [2, 3, 4, 5];
    let jk = stats::jackknife_moments(&batches, &ks, true)?;
    println!("{:>3} {:>10} {:>10} {:>10} {:>10}", "k", "U-stat", "jackknife", "σ_JK", "exact");
    for (r, &k) in jk.results.iter().zip(&ks) {
        println!(
            "{k:>3} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            r.raw_estimate,
            r.point_estimate,
            r.std_error(),
            rho.trace_moment(k)
        );
    }
    if let Some(cov) = &jk.covariance {
        println!("covariance:{cov:.2e}");
    }

    // purity from the Hamming kernel on the same data
    let direct = estimators::purity_direct(&group, true)?;
    println!("direct purity {:.5} ± {:.5}", direct.value, direct.sem.unwrap_or(f64::NAN));
    Ok(())
}
