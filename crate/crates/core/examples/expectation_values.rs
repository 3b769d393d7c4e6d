//! Two-site Pauli expectation values of a 50-qubit random MPS from
//! randomized measurements, compared with the exact MPS values.
//!
//! cargo run --release --example expectation_values

use randmeas::prelude::*;

fn main() -> randmeas::Result<()> {
    let n = 50;
    let (n_u, n_m) = (200, 100);
    let psi = Mps::random(n, 2, &mut RngSeed::new(7, 0).rng())?;

    let settings = sampling::sample_settings(n_u, 1, |rng| sampling::local_unitary_setting(n, rng))?;
    let group = sim::simulate_group(&psi, &settings, n_m, None, 2)?;

    let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let mut within = 0;
    println!("{:>4} {:>9} {:>9} {:>8}", "P", "estimate", "exact", "σ");
    for a in letters {
        for b in letters {
            if a == Pauli::I && b == Pauli::I {
                continue;
            }
            let obs = PauliObservable::on_sites(n, &[(1, a), (4, b)])?;
            let est = estimators::expect_group(&obs, &group, None, None, true)?;
            let exact = psi.pauli_expectation(&obs)?;
            if est.covers(exact, 2.0) {
                within += 1;
            }
            println!(
                "{:>4} {:>9.4} {:>9.4} {:>8.4}",
                format!("{}{}", a.as_char(), b.as_char()),
                est.value,
                exact,
                est.sem.unwrap_or(f64::NAN)
            );
        }
    }
    println!("{within}/15 within 2σ");

    // dense shadows on a two-site subsystem give the same estimates
    let sub = Subsystem::new(vec![1, 4])?;
    let shadows = shadows::dense_shadows_on(&group, &sub, None)?;
    let zz = PauliObservable::from_str_letters("ZZ")?;
    let est = estimators::expect_shadow(&zz, &shadows, false)?;
    println!("ZZ from {} dense shadows: {:.4}", shadows.len(), est.value);
    Ok(())
}
