use std::io::Write;

use super::replay::Replay;
use crate::domain::{Parameter, Problem};
use crate::error::{Result, SolaError};
use crate::fusion::{fmt_f64, RunTrace};

/// `R(K) = Σ_{k≤K} [F(x(k), D(k)) − F(x*, D(k))]` with `D(k)` the selected
/// agent's data at `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretReport {
    pub x_star: Parameter,
    pub loss: Vec<f64>,
    pub loss_star: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretReport {
    pub fn from_losses(x_star: Parameter, loss: Vec<f64>, loss_star: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = loss
            .iter()
            .zip(&loss_star)
            .map(|(a, b)| {
                acc += a - b;
                acc
            })
            .collect();
        Self {
            x_star,
            loss,
            loss_star,
            cumulative,
        }
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// `R(K)/K` for `K = 1..`.
    pub fn average(&self) -> Vec<f64> {
        self.cumulative.iter().enumerate().map(|(i, r)| r / (i + 1) as f64).collect()
    }

    pub fn increments(&self) -> Vec<f64> {
        self.loss.iter().zip(&self.loss_star).map(|(a, b)| a - b).collect()
    }

    pub fn last(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Regret of a recorded run. `replay` supplies `D^{σ(k)}(k)`.
pub fn regret(trace: &RunTrace, x_star: &Parameter, problem: &dyn Problem, mut replay: Replay) -> Result<RegretReport> {
    let mut loss_star = Vec::with_capacity(trace.len());
    while let Some(step) = replay.advance()? {
        if loss_star.len() == trace.len() {
            break;
        }
        loss_star.push(problem.loss(x_star, step.data));
    }
    if loss_star.len() != trace.len() {
        return Err(SolaError::invalid("replay is shorter than the trace"));
    }
    Ok(RegretReport::from_losses(x_star.clone(), trace.losses(), loss_star))
}

/// Online-stability series `ε_os(k) = |F(x(k), D(k)) − F(x(k−1), D(k−1))|`
/// for `k ≥ 2`, with the least-squares slope of `ln ε` over the last half.
#[derive(Clone, Debug, PartialEq)]
pub struct Stability {
    pub eps: Vec<f64>,
    pub tail_slope: Option<f64>,
}

impl Stability {
    /// `Σ_{k≤K} ε_os(k)`, aligned with `K = 1..` (zero at `K = 1`).
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.eps.iter().map(|e| {
                acc += e;
                acc
            }))
            .collect()
    }
}

pub fn stability_series(losses: &[f64]) -> Stability {
    let eps: Vec<f64> = losses.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let start = eps.len() / 2;
    let pts: Vec<(f64, f64)> = eps[start..]
        .iter()
        .enumerate()
        .filter(|(_, e)| **e > 0.0)
        .map(|(i, e)| ((start + i) as f64, e.ln()))
        .collect();
    Stability {
        tail_slope: slope(&pts),
        eps,
    }
}

fn slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `regret.csv`: `K,R,R_over_K,stability_eps,cum_stability`.
pub fn write_regret_csv(report: &RegretReport, stability: &Stability, mut w: impl Write) -> Result<()> {
    let io = |e| SolaError::io("regret.csv", e);
    writeln!(w, "K,R,R_over_K,stability_eps,cum_stability").map_err(io)?;
    let avg = report.average();
    let cum = stability.cumulative();
    for (i, r) in report.cumulative.iter().enumerate() {
        let eps = if i == 0 {
            String::new()
        } else {
            stability.eps.get(i - 1).copied().map(fmt_f64).unwrap_or_default()
        };
        let c = cum.get(i).copied().map(fmt_f64).unwrap_or_default();
        writeln!(w, "{},{},{},{},{}", i + 1, fmt_f64(*r), fmt_f64(avg[i]), eps, c).map_err(io)?;
    }
    Ok(())
}
