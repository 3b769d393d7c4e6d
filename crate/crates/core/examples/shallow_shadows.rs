//! Shallow shadows on 4 qubits: learn and invert the measurement channel of
//! depth-2 brickwork circuits, then compare the error on a weight-4 Pauli
//! with local shadows at the same budget.
//!
//! cargo run --release --example shallow_shadows

use randmeas::prelude::*;

fn main() -> randmeas::Result<()> {
    let (n, depth) = (4, 2);
    let (n_u, n_m) = (1000, 10);

    let channel = shallow::estimate_channel(n, depth, 4000, 21)?;
    let minv = shallow::invert_channel(&channel, shallow::DEFAULT_RCOND)?;
    println!(
        "channel: rank {}, condition number {:.1}, residual {:.1e}",
        minv.rank(),
        minv.condition_number(),
        minv.residual()
    );

    let psi = StateVector::ghz(n)?;
    let obs = PauliObservable::from_str_letters("XXXX")?;
    println!("exact ⟨XXXX⟩ = {:.3}", psi.pauli_expectation(&obs)?);

    let circuits = sampling::sample_settings(n_u, 22, |rng| sampling::shallow_setting(n, depth, rng))?;
    let group = sim::simulate_group(&psi, &circuits, n_m, None, 23)?;
    let batches = shallow::shallow_batch_shadows(&group, &minv, Some(50))?;
    let est = estimators::expect_shadow(&obs, batches.batches(), true)?;
    println!("shallow: {:.3} ± {:.3}", est.value, est.sem.unwrap_or(f64::NAN));

    let local = sampling::sample_settings(n_u, 24, |rng| sampling::local_unitary_setting(n, rng))?;
    let group = sim::simulate_group(&psi, &local, n_m, None, 25)?;
    let est = estimators::expect_group(&obs, &group, None, Some(50), true)?;
    println!("local:   {:.3} ± {:.3}", est.value, est.sem.unwrap_or(f64::NAN));
    Ok(())
}
