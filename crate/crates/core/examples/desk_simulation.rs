//! A small regret-curve experiment along the local path, written as CSV.
//!
//! `cargo run --release --example desk_simulation [out.csv]`

use regret_rules::sim::{run_experiment, write_csv_to};
use regret_rules::SimConfig;

fn main() -> regret_rules::Result<()> {
    let mut config = SimConfig {
        replications: 100,
        h_grid: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
        seed: 7,
        ..SimConfig::default()
    };
    config.adjust.draws = 100;
    config.adjust.grid.support_points = 5;
    config.adjust.grid.search_points = 5;

    let (plug, lam) = run_experiment(&config)?;
    println!("{:>5} {:>9} {:>9}", "h", "plug-in", "adjusted");
    for (p, l) in plug.records.iter().zip(&lam.records) {
        println!("{:>5} {:>9.5} {:>9.5}", p.h, p.rimr, l.rimr);
    }
    if let Some(path) = std::env::args().nth(1) {
        write_csv_to(&plug, &lam, std::fs::File::create(&path).map_err(|source| regret_rules::Error::Io {
            path: path.clone().into(),
            source,
        })?)?;
        println!("wrote {path}");
    }
    Ok(())
}
