//! Regret against the batch optimum and the online-stability series for a
//! weighted regression run. Prints the regret CSV to stdout.
//!
//! cargo run --release --example regret_analysis -- [seed]

use std::path::PathBuf;

use sola::analysis::{batch_optimum, regret, stability_series, write_regret_csv, GdBudget, Replay};
use sola::experiment::{build_scenario, parse_config};
use sola::run;

fn main() -> sola::Result<()> {
    let seed = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed must be an integer"));
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/chatter_weighted.toml");
    let mut cfg = parse_config(&path)?;
    cfg.seed = seed;

    let scenario = build_scenario(&cfg)?.scenario;
    let out = run(&scenario)?;
    let problem = scenario.problem.as_ref();
    let x_star = batch_optimum(&scenario.pooled_data()?, problem, GdBudget::default(), None)?.x;
    let report = regret(&out.trace, &x_star, problem, Replay::new(&scenario, &out.events))?;
    let stability = stability_series(&out.trace.losses());

    eprintln!(
        "R(K) = {:.4}, R(K)/K = {:.4}, stability tail slope {:.3e}",
        report.last(),
        report.last() / report.len() as f64,
        stability.tail_slope.unwrap_or(f64::NAN)
    );
    write_regret_csv(&report, &stability, std::io::stdout().lock())
}
