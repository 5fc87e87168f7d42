use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;

use super::contraction::ContractionEstimate;
use super::replay::Replay;
use crate::domain::{Parameter, Problem};
use crate::error::{Result, SolaError};
use crate::fusion::RunTrace;
use crate::switching::{count_switches, SelectingSignal};

/// Relative slack allowed before a window counts as a violation.
pub const CHAIN_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainReport {
    pub directions: usize,
    pub windows: usize,
    pub violations: usize,
    /// `max V_{k2} / (μ̄^N β̄^{k2−k1} V_{k1})` over all checked windows.
    pub max_ratio: f64,
}

impl ChainReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `V^{σ(k2)}(x(k2)) ≤ μ̄^{N(k1,k2)} β̄^{k2−k1} V^{σ(k1)}(x(k1))` along a
/// naive-mode run for every window and `directions` random initial
/// perturbations.
///
/// The perturbation is carried by the selected algorithms' Jacobians,
/// `δ_k = J_{σ(k)}(x(k−1), D(k)) δ_{k−1}`, and measured in the selected
/// agent's metric, `V^{σ(k)} = ‖J_{σ(k)}(x(k), D(k)) δ_k‖²`.
pub fn certify_switching_chain(
    trace: &RunTrace,
    signal: &SelectingSignal,
    mut replay: Replay,
    problem: &dyn Problem,
    estimates: &ContractionEstimate,
    directions: usize,
    rng: &mut impl Rng,
) -> Result<ChainReport> {
    if trace.records.iter().any(|r| r.alpha != 1.0) {
        return Err(SolaError::invalid("chain certification needs a naive-mode trace (α ≡ 1)"));
    }
    let params = trace
        .params()
        .ok_or_else(|| SolaError::invalid("trace does not retain parameters"))?;
    if signal.len() != trace.len() {
        return Err(SolaError::invalid("signal and trace lengths differ"));
    }
    let n = problem.dim();
    let len = trace.len();

    // log V per event and direction
    let mut log_v = vec![vec![0.0; len]; directions];
    let mut deltas: Vec<(Array1<f64>, f64)> = (0..directions)
        .map(|_| {
            let d: Array1<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let s = d.dot(&d).sqrt();
            (d / s, 0.0)
        })
        .collect();
    let mut p = 0;
    while let Some(step) = replay.advance()? {
        if p == len {
            break;
        }
        let (x_prev, x_now): (&Parameter, &Parameter) = (params[p], params[p + 1]);
        for (dir, (delta, log_scale)) in deltas.iter_mut().enumerate() {
            let moved = step.algorithm.jvp(x_prev, step.data, delta, problem)?;
            let m = moved.dot(&moved).sqrt();
            if m > 0.0 {
                *log_scale += m.ln();
                *delta = moved / m;
            } else {
                *log_scale = f64::NEG_INFINITY;
            }
            let v = step.algorithm.jvp(x_now, step.data, delta, problem)?;
            log_v[dir][p] = v.dot(&v).ln() + 2.0 * *log_scale;
        }
        p += 1;
    }
    if p != len {
        return Err(SolaError::invalid("replay is shorter than the trace"));
    }

    let (ln_mu, ln_beta) = (estimates.mu_bar.ln(), estimates.beta_bar.ln());
    let ln_tol = CHAIN_TOLERANCE.ln_1p();
    let mut report = ChainReport {
        directions,
        windows: 0,
        violations: 0,
        max_ratio: 0.0,
    };
    for k1 in 0..len {
        for k2 in (k1 + 1)..len {
            let nsw = count_switches(signal, k1, k2)? as f64;
            let w = (k2 - k1) as f64;
            let ln_bound = nsw * ln_mu + if ln_beta.is_finite() { w * ln_beta } else { f64::NEG_INFINITY };
            for lv in &log_v {
                report.windows += 1;
                let (a, b) = (lv[k2], lv[k1]);
                if b == f64::NEG_INFINITY {
                    continue;
                }
                let excess = if a == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else if ln_bound == f64::NEG_INFINITY {
                    f64::INFINITY
                } else {
                    a - b - ln_bound
                };
                report.max_ratio = report.max_ratio.max(excess.exp());
                if excess > ln_tol {
                    report.violations += 1;
                }
            }
        }
    }
    Ok(report)
}
