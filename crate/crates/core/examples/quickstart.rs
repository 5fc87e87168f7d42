//! Smallest end-to-end run: two regression agents with different noise
//! levels, fused with the performance-weighted rule.
//!
//! cargo run --release --example quickstart

use std::sync::Arc;

use sola::analysis::{batch_optimum, GdBudget};
use sola::fusion::SignalPolicy;
use sola::models::{gen_linreg_stream, Arrival, LinRegStream, LinearRegression};
use sola::{merge_schedules, run, Agent, AgentId, LocalAlgorithm, Scenario};

fn main() -> sola::Result<()> {
    let stream = LinRegStream {
        x_star: vec![1.0, -2.0, 0.5],
        feature_variance: 0.5,
        agents: vec![(AgentId(1), 3.0), (AgentId(2), 30.0)],
        arrival: Arrival::Blocked { block: 10 },
        seed: 42,
    };
    let schedule = merge_schedules(gen_linreg_stream(&stream, 50, 10)?)?;
    let agents = vec![
        Agent::new(LocalAlgorithm::gd(AgentId(1), 0.05)),
        Agent::new(LocalAlgorithm::sgd(AgentId(2), 0.05, 4)),
    ];
    let scenario = Scenario::new(Arc::new(LinearRegression::new(3)), agents, schedule)
        .with_policy(SignalPolicy::Periodic { period: 10, order: None })
        .with_seed(42);

    let out = run(&scenario)?;
    let x_star = batch_optimum(&scenario.pooled_data()?, scenario.problem.as_ref(), GdBudget::default(), None)?.x;

    println!("   k  agent   alpha      loss  ‖x − x*‖");
    for (r, x) in out.trace.records.iter().zip(out.trace.params().unwrap()) {
        if r.k % 10 == 0 {
            println!("{:>4}  {:>5}  {:.4}  {:>8.3}  {:.4}", r.k, r.sigma, r.alpha, r.loss, x.distance(&x_star));
        }
    }
    println!("switches: {}", out.signal.total_switches());
    Ok(())
}
