//! Writes settings, measurement data, a channel and a result table in the
//! on-disk format, reads them back and checks they are unchanged.
//!
//! cargo run --example file_roundtrip

use randmeas::format::{self, ResultRow};
use randmeas::prelude::*;

fn main() -> randmeas::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let n = 4;

    let settings = sampling::sample_settings(20, 51, |rng| sampling::local_unitary_setting(n, rng))?;
    let path = dir.path().join("settings.json");
    format::write_settings(&path, &settings)?;
    assert_eq!(format::read_settings(&path)?, settings);

    let group = sim::simulate_group(&Mps::ghz(n)?, &settings, 50, None, 52)?;
    let path = dir.path().join("ghz.json");
    format::write_group(&path, &group)?;
    assert_eq!(format::read_group(&path)?, group);
    println!("{}", std::fs::read_to_string(&path).expect("manifest"));

    let channel = shallow::estimate_channel(2, 1, 100, 53)?;
    let path = dir.path().join("channel.json");
    format::write_channel(&path, &channel)?;
    assert_eq!(format::read_channel(&path)?.superoperator(), channel.superoperator());

    let p2 = estimators::purity_direct(&group, true)?;
    let rows = vec![ResultRow {
        quantity: "purity".into(),
        value: p2.value,
        sigma: p2.sem,
        n_u: group.n_settings(),
        n_m: 50,
        n_b: group.n_settings(),
    }];
    let path = dir.path().join("result.json");
    format::write_results(&path, n, &rows)?;
    assert_eq!(format::read_results(&path)?, rows);
    println!("all files round-trip");
    Ok(())
}
