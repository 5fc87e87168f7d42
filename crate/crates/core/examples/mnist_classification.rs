//! MNIST at desk scale: a GD agent on clean images and a DSGD agent whose
//! sub-units each see only a few labels, with noisy images.
//!
//! cargo run --release --example mnist_classification -- [config.toml]

use std::path::PathBuf;

use sola::experiment::{parse_config, run_experiment};

fn main() -> sola::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/mnist_n5.toml"));
    let cfg = parse_config(&path)?;
    let o = run_experiment(&cfg)?;
    println!("    k  accuracy  test loss");
    for row in &o.eval {
        println!("{:>5}  {:.4}    {:.4}", row.k, row.accuracy, row.loss);
    }
    let alphas = o.trace.alphas();
    let mean = alphas.iter().sum::<f64>() / alphas.len() as f64;
    println!("mean α {mean:.3}, switches {}", o.switches());
    Ok(())
}
