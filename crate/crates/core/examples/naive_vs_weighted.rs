//! Chattering under naive switching (α ≡ 1) against the performance-weighted
//! fusing variable, on the two-agent regression setup.
//!
//! cargo run --release --example naive_vs_weighted -- [seed]

use std::path::PathBuf;

use sola::experiment::{parse_config, run_experiment};
use sola::FusionMode;

fn main() -> sola::Result<()> {
    let seed = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed must be an integer"));
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/chatter_weighted.toml");
    let mut cfg = parse_config(&path)?;
    cfg.seed = seed;

    for mode in [FusionMode::Weighted, FusionMode::Naive] {
        cfg.mode = mode;
        let o = run_experiment(&cfg)?;
        let steps: Vec<f64> = o.trace.records.iter().map(|r| r.step_norm).collect();
        let big = steps.iter().filter(|&&s| s > 0.3).count();
        println!(
            "{:<8} max step {:.4}  steps > 0.3: {:>3}  final ‖x − x*‖ {:.4}",
            format!("{mode:?}").to_lowercase(),
            o.trace.max_step(),
            big,
            o.final_error().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
