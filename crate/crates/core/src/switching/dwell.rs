use serde::{Deserialize, Serialize};

use super::signal::SelectingSignal;
use crate::error::{Result, SolaError};

/// Chatter bound `N₀` and average dwell time `τ`, optionally with the
/// contraction constants `μ̄`, `β̄` the dwell time came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwellParams {
    pub n0: f64,
    pub tau: f64,
    pub mu_bar: Option<f64>,
    pub beta_bar: Option<f64>,
}

impl DwellParams {
    pub fn new(n0: f64, tau: f64) -> Result<Self> {
        if !(n0 > 0.0) || !(tau > 0.0) {
            return Err(SolaError::invalid(format!("need N₀ > 0 and τ > 0, got {n0}, {tau}")));
        }
        Ok(Self {
            n0,
            tau,
            mu_bar: None,
            beta_bar: None,
        })
    }

    /// `τ = dwell_tau(μ̄, β̄)`.
    pub fn from_contraction(n0: f64, mu_bar: f64, beta_bar: f64) -> Result<Self> {
        let tau = dwell_tau(mu_bar, beta_bar)?;
        let mut p = Self::new(n0, tau)?;
        p.mu_bar = Some(mu_bar);
        p.beta_bar = Some(beta_bar);
        Ok(p)
    }
}

impl Default for DwellParams {
    fn default() -> Self {
        Self {
            n0: 1.0,
            tau: 1.0,
            mu_bar: None,
            beta_bar: None,
        }
    }
}

/// `τ = −ln μ̄ / ln β̄` for `μ̄ > 1`, `0 < β̄ < 1`.
pub fn dwell_tau(mu_bar: f64, beta_bar: f64) -> Result<f64> {
    if !(mu_bar > 1.0) {
        return Err(SolaError::invalid(format!("μ̄ must exceed 1, got {mu_bar}")));
    }
    if !(beta_bar > 0.0 && beta_bar < 1.0) {
        return Err(SolaError::invalid(format!("β̄ must lie in (0, 1), got {beta_bar}")));
    }
    Ok(-mu_bar.ln() / beta_bar.ln())
}

/// Outcome of checking `N(k1, k2) ≤ N₀ + (k2 − k1)/τ` over every window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Admissibility {
    pub admissible: bool,
    /// First violating window in lexicographic `(k1, k2)` order.
    pub first_violation: Option<(usize, usize)>,
    /// Window with the largest `N − N₀ − (k2 − k1)/τ`.
    pub worst_window: Option<(usize, usize)>,
    pub worst_excess: f64,
}

/// Exact check over all `O(|T|²)` windows (0-based positions, as in
/// [`count_switches`](super::count_switches)).
pub fn is_admissible(signal: &SelectingSignal, params: &DwellParams) -> Admissibility {
    let s = signal.switch_prefix();
    let rate = 1.0 / params.tau;
    let mut out = Admissibility {
        admissible: true,
        first_violation: None,
        worst_window: None,
        worst_excess: f64::NEG_INFINITY,
    };
    for k1 in 0..s.len() {
        for k2 in (k1 + 1)..s.len() {
            let n = (s[k2] - s[k1]) as f64;
            let excess = n - (params.n0 + (k2 - k1) as f64 * rate);
            if excess > out.worst_excess {
                out.worst_excess = excess;
                out.worst_window = Some((k1, k2));
            }
            if excess > 0.0 && out.first_violation.is_none() {
                out.first_violation = Some((k1, k2));
                out.admissible = false;
            }
        }
    }
    out
}
