//! Purity, overlap and cross-platform fidelity from the Hamming kernel,
//! for two "devices" preparing the same 3-qubit state with different noise.
//!
//! cargo run --release --example direct_purity_overlap

use randmeas::prelude::*;

fn main() -> randmeas::Result<()> {
    let n = 3;
    let psi = StateVector::random(n, &mut RngSeed::new(41, 0).rng())?;
    let rho1 = psi.to_density_matrix()?.depolarized(&NoiseModel::uniform(n, 0.05)?)?;
    let rho2 = psi.to_density_matrix()?.depolarized(&NoiseModel::new(vec![0.1, 0.2, 0.15])?)?;

    // both devices must use the same settings
    let settings = sampling::sample_settings(500, 42, |rng| sampling::local_unitary_setting(n, rng))?;
    let g1 = sim::simulate_group(&rho1, &settings, 200, None, 43)?;
    let g2 = sim::simulate_group(&rho2, &settings, 200, None, 44)?;

    let exact_overlap = (rho1.matrix() * rho2.matrix()).trace().re;
    let p1 = estimators::purity_direct(&g1, true)?;
    let p2 = estimators::purity_direct(&g2, true)?;
    let ov = estimators::overlap_direct(&g1, &g2, true)?;
    let fid = estimators::cross_platform_fidelity(&g1, &g2, true)?;
    let show = |name: &str, e: &EstimateWithError, exact: f64| {
        println!("{name:<10} {:.4} ± {:.4}   exact {exact:.4}", e.value, e.sem.unwrap_or(f64::NAN));
    };
    show("purity 1", &p1, rho1.purity());
    show("purity 2", &p2, rho2.purity());
    show("overlap", &ov, exact_overlap);
    show("fidelity", &fid, exact_overlap / rho1.purity().max(rho2.purity()));
    Ok(())
}
