//! Three agents (centralized GD, DSGD and FedAvg) fused with weighted and
//! naive fusing variables. Writes both output directories under ./out.
//!
//! cargo run --release --example three_agents

use std::path::{Path, PathBuf};

use sola::experiment::{parse_config, run_experiment, write_outputs};

fn main() -> sola::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["three_agents_weighted", "three_agents_naive"] {
        let cfg = parse_config(&dir.join(format!("{name}.toml")))?;
        let o = run_experiment(&cfg)?;
        let out = Path::new("out").join(name);
        write_outputs(&o, &out)?;
        println!(
            "{name}: final ‖x − x*‖ {:.4}, max step {:.4}, switches {} -> {}",
            o.final_error().unwrap_or(f64::NAN),
            o.trace.max_step(),
            o.switches(),
            out.display()
        );
    }
    Ok(())
}
