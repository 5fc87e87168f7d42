//! Average dwell time: how often a switched run may change agents and still
//! contract, given rates β̄ and switching penalties μ̄.
//!
//! cargo run --example dwell_time

use sola::switching::periodic_signal;
use sola::{count_switches, dwell_tau, is_admissible, merge_schedules, AgentId, DwellParams, Sample, Target};

fn main() -> sola::Result<()> {
    for (mu, beta) in [(1.5, 0.9), (2.0, 0.5), (4.0, 0.95)] {
        let tau = dwell_tau(mu, beta)?;
        println!("μ̄ = {mu}, β̄ = {beta}: τ = {tau:.3}, check β̄·μ̄^(1/τ) = {:.6}", beta * f64::powf(mu, 1.0 / tau));
    }

    let batch = || vec![Sample::new(vec![0.0], Target::Value(0.0))];
    let params = DwellParams::from_contraction(1.0, 1.5, 0.9)?;
    for period in [1, 2, 4, 5, 10] {
        // agents collect data in alternating blocks of `period` arrivals
        let schedule = merge_schedules(
            (0..2)
                .map(|a| {
                    let times = (0..100)
                        .map(|j| ((((j / period) * 2 + a) * period + j % period) as f64, batch()))
                        .collect();
                    (AgentId(a + 1), times)
                })
                .collect(),
        )?;
        let signal = periodic_signal(&schedule, period, &[AgentId(1), AgentId(2)])?;
        let verdict = is_admissible(&signal, &params);
        println!(
            "period {period:>2}: N(0, 40) = {:>2}, admissible for N₀ = 1, τ = {:.3}: {:<5} worst window {:?}",
            count_switches(&signal, 0, 40)?,
            params.tau,
            verdict.admissible,
            verdict.worst_window.unwrap_or_default()
        );
    }
    Ok(())
}
