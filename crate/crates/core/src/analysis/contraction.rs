use std::collections::BTreeMap;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::domain::{AgentId, Dataset, Parameter, Problem};
use crate::error::{Result, SolaError};
use crate::local::LocalAlgorithm;

/// Above this dimension Jacobians are never formed; estimates use
/// Jacobian-vector products along random directions instead.
pub const FULL_JACOBIAN_LIMIT: usize = 64;

/// Where `(x, δ, D)` triples are drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampling {
    pub samples: usize,
    /// `x` is uniform in the ball of this radius around `center`.
    pub radius: f64,
    pub center: Option<Parameter>,
    /// Random directions per point when only products are available.
    pub directions: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            samples: 256,
            radius: 10.0,
            center: None,
            directions: 4,
        }
    }
}

impl Sampling {
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    fn point(&self, dim: usize, rng: &mut impl Rng) -> Parameter {
        let dir = gaussian(dim, rng);
        let r = self.radius * rng.random::<f64>().powf(1.0 / dim as f64);
        let mut x = dir.clone() * (r / norm(&dir).max(f64::MIN_POSITIVE));
        if let Some(c) = &self.center {
            x += c.values();
        }
        Parameter::from(x)
    }
}

fn gaussian(dim: usize, rng: &mut impl Rng) -> Array1<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Largest singular value squared: `sup_δ ‖Aδ‖² / ‖δ‖²`.
fn spectral_sq(a: &Array2<f64>) -> f64 {
    let s = to_nalgebra(a).singular_values();
    s.max().powi(2)
}

/// `V = ‖J(x) δ‖²` with the Euclidean metric, i.e. `δᵀ M δ` for `M = JᵀJ`.
pub fn v_distance(algorithm: &LocalAlgorithm, x: &Parameter, delta: &Array1<f64>, d: &Dataset, problem: &dyn Problem) -> Result<f64> {
    if delta.iter().all(|v| *v == 0.0) {
        return Err(SolaError::invalid("δ must be nonzero"));
    }
    let jd = algorithm.jvp(x, d, delta, problem)?;
    Ok(jd.dot(&jd))
}

/// Empirical contraction rate of one algorithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaEstimate {
    /// Reported rate, clamped to at most 1.
    pub beta: f64,
    /// Unclamped supremum.
    pub raw: f64,
    pub samples: usize,
    pub clamped: bool,
}

/// `sup V(x(k)) / V(x(k−1))` over sampled points, datasets and directions.
///
/// `datasets` are the data the algorithm may face; one is drawn per sample.
pub fn estimate_beta(
    algorithm: &LocalAlgorithm,
    problem: &dyn Problem,
    datasets: &[Dataset],
    sampling: &Sampling,
    rng: &mut impl Rng,
) -> Result<BetaEstimate> {
    if sampling.samples == 0 || datasets.is_empty() {
        return Err(SolaError::invalid("need at least one sample and one dataset"));
    }
    let n = problem.dim();
    let mut sup = 0.0f64;
    for _ in 0..sampling.samples {
        let x = sampling.point(n, rng);
        let d = &datasets[rng.random_range(0..datasets.len())];
        if n <= FULL_JACOBIAN_LIMIT {
            sup = sup.max(spectral_sq(&algorithm.jacobian(&x, d, problem)?));
        } else {
            for _ in 0..sampling.directions {
                let delta = gaussian(n, rng);
                let jd = algorithm.jvp(&x, d, &delta, problem)?;
                sup = sup.max(jd.dot(&jd) / delta.dot(&delta));
            }
        }
    }
    let clamped = sup > 1.0;
    if clamped {
        eprintln!(
            "warning: agent {} is not contracting at sampled points (sup ratio {sup:.6})",
            algorithm.agent()
        );
    }
    Ok(BetaEstimate {
        beta: sup.min(1.0),
        raw: sup,
        samples: sampling.samples,
        clamped,
    })
}

/// `sup V^i / V^j` over sampled points and directions, floored at 1.
pub fn estimate_mu(
    alg_i: (&LocalAlgorithm, &[Dataset]),
    alg_j: (&LocalAlgorithm, &[Dataset]),
    problem: &dyn Problem,
    sampling: &Sampling,
    rng: &mut impl Rng,
) -> Result<f64> {
    let (ai, di) = alg_i;
    let (aj, dj) = alg_j;
    if sampling.samples == 0 || di.is_empty() || dj.is_empty() {
        return Err(SolaError::invalid("need at least one sample and one dataset per algorithm"));
    }
    let n = problem.dim();
    let mut sup = 1.0f64;
    for _ in 0..sampling.samples {
        let x = sampling.point(n, rng);
        let d_i = &di[rng.random_range(0..di.len())];
        let d_j = &dj[rng.random_range(0..dj.len())];
        if n <= FULL_JACOBIAN_LIMIT {
            let ji = to_nalgebra(&ai.jacobian(&x, d_i, problem)?);
            let jj = to_nalgebra(&aj.jacobian(&x, d_j, problem)?);
            let ratio = match jj.clone().try_inverse() {
                // sup_δ ‖J_i δ‖²/‖J_j δ‖² = σ_max(J_i J_j⁻¹)²
                Some(inv) => (ji * inv).singular_values().max().powi(2),
                None => f64::INFINITY,
            };
            sup = sup.max(ratio);
        } else {
            for _ in 0..sampling.directions {
                let delta = gaussian(n, rng);
                let vi = ai.jvp(&x, d_i, &delta, problem)?;
                let vj = aj.jvp(&x, d_j, &delta, problem)?;
                let den = vj.dot(&vj);
                sup = sup.max(if den > 0.0 { vi.dot(&vi) / den } else { f64::INFINITY });
            }
        }
    }
    Ok(sup)
}

/// Per-agent rates, pairwise ratios and their aggregates.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionEstimate {
    pub betas: BTreeMap<AgentId, BetaEstimate>,
    pub mus: BTreeMap<(AgentId, AgentId), f64>,
    pub beta_bar: f64,
    pub mu_bar: f64,
    /// Metric bounds `γ₁ I ≤ M ≤ γ₂ I`; both 1 for the Euclidean metric.
    pub gamma1: f64,
    pub gamma2: f64,
    pub samples: usize,
}

impl ContractionEstimate {
    /// Builds the aggregates from known per-agent values.
    pub fn from_parts(betas: BTreeMap<AgentId, BetaEstimate>, mus: BTreeMap<(AgentId, AgentId), f64>, samples: usize) -> Self {
        let beta_bar = betas.values().map(|b| b.beta).fold(0.0, f64::max);
        let mu_bar = mus.values().copied().fold(1.0, f64::max);
        Self {
            betas,
            mus,
            beta_bar,
            mu_bar,
            gamma1: 1.0,
            gamma2: 1.0,
            samples,
        }
    }

    /// Exact values, for tests and hand-derived constants.
    pub fn analytic(beta_bar: f64, mu_bar: f64) -> Self {
        Self {
            betas: BTreeMap::new(),
            mus: BTreeMap::new(),
            beta_bar,
            mu_bar,
            gamma1: 1.0,
            gamma2: 1.0,
            samples: 0,
        }
    }
}

/// Estimates every agent's `β` and every ordered pair's `μ`.
pub fn estimate_contraction(
    agents: &[(AgentId, &LocalAlgorithm, Vec<Dataset>)],
    problem: &dyn Problem,
    sampling: &Sampling,
    rng: &mut impl Rng,
) -> Result<ContractionEstimate> {
    let mut betas = BTreeMap::new();
    for (id, alg, data) in agents {
        betas.insert(*id, estimate_beta(alg, problem, data, sampling, rng)?);
    }
    let mut mus = BTreeMap::new();
    for (i, alg_i, di) in agents {
        for (j, alg_j, dj) in agents {
            if i != j {
                mus.insert((*i, *j), estimate_mu((alg_i, di), (alg_j, dj), problem, sampling, rng)?);
            }
        }
    }
    Ok(ContractionEstimate::from_parts(betas, mus, sampling.samples))
}
