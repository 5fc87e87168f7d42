//! GD + DSGD under SOLA, FedAvg + DSGD under SOLA, and DSGD alone, compared by
//! final distance to the batch optimum over several seeds.
//!
//! cargo run --release --example regression_comparison -- [seeds]

use std::path::PathBuf;

use sola::experiment::{parse_config, run_experiment};

fn main() -> sola::Result<()> {
    let seeds: u64 = std::env::args().nth(1).map_or(5, |s| s.parse().expect("seed count must be an integer"));
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let setups = [
        ("GD + DSGD", "regression_gd_dsgd.toml"),
        ("FedAvg + DSGD", "regression_fedavg_dsgd.toml"),
        ("DSGD only", "regression_dsgd_only.toml"),
    ];
    println!("{:<14} {}", "setup", (0..seeds).map(|s| format!("seed {s:<3}")).collect::<Vec<_>>().join(" "));
    for (label, file) in setups {
        let mut cfg = parse_config(&dir.join(file))?;
        let mut row = Vec::new();
        for seed in 0..seeds {
            cfg.seed = seed;
            let o = run_experiment(&cfg)?;
            row.push(format!("{:<8.4}", o.final_error().unwrap_or(f64::NAN)));
        }
        println!("{label:<14} {}", row.join(" "));
    }
    Ok(())
}
