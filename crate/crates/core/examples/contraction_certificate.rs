//! Empirical contraction rates β and switching ratios μ for two GD variants
//! on a quadratic, then a check of the switched contraction chain along a
//! naive run.
//!
//! cargo run --release --example contraction_certificate

use std::sync::Arc;

use sola::analysis::{certify_switching_chain, estimate_contraction, Replay, Sampling};
use sola::fusion::SignalPolicy;
use sola::models::Quadratic;
use sola::rng::seeded;
use sola::{merge_schedules, run, Agent, AgentId, Dataset, FusionMode, LocalAlgorithm, Parameter, Sample, Scenario, Target};

fn main() -> sola::Result<()> {
    let q = Quadratic::diagonal(&[2.0, 4.0]).with_center(vec![1.0, -1.0]);
    let slow = LocalAlgorithm::gd(AgentId(1), 0.05);
    let fast = LocalAlgorithm::gd(AgentId(2), 0.1);
    let data = vec![Dataset::from_samples(&[Sample::new(vec![0.0], Target::Value(0.0))])?];

    let est = estimate_contraction(
        &[(AgentId(1), &slow, data.clone()), (AgentId(2), &fast, data)],
        &q,
        &Sampling::default(),
        &mut seeded(0),
    )?;
    for (id, b) in &est.betas {
        println!("β[{id}] = {:.4}", b.beta);
    }
    for ((i, j), mu) in &est.mus {
        println!("μ[{i},{j}] = {mu:.4}");
    }
    println!("β̄ = {:.4}, μ̄ = {:.4}", est.beta_bar, est.mu_bar);

    let block = 4;
    let batch = || vec![Sample::new(vec![0.0], Target::Value(0.0))];
    let schedule = merge_schedules(
        (0..2)
            .map(|a| {
                let times = (0..block * 8)
                    .map(|j| ((((j / block) * 2 + a) * block + j % block) as f64, batch()))
                    .collect();
                (AgentId(a + 1), times)
            })
            .collect(),
    )?;
    let scenario = Scenario::new(Arc::new(q), vec![Agent::new(slow), Agent::new(fast)], schedule)
        .with_mode(FusionMode::Naive)
        .with_policy(SignalPolicy::Periodic { period: block, order: None })
        .with_x0(Parameter::from_vec(vec![5.0, 5.0]));
    let out = run(&scenario)?;
    let report = certify_switching_chain(
        &out.trace,
        &out.signal,
        Replay::new(&scenario, &out.events),
        scenario.problem.as_ref(),
        &est,
        8,
        &mut seeded(1),
    )?;
    println!(
        "chain: {} windows, {} violations, max ratio {:.4}",
        report.windows, report.violations, report.max_ratio
    );
    Ok(())
}
