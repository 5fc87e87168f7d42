//! Switched online learning.
//!
//! Several agents collect data asynchronously and each runs its own local
//! optimizer (gradient descent, SGD, decentralized SGD over sub-units, or
//! FedAvg). A selecting signal picks which agent acts at every arrival event,
//! and the agent's update is blended into the shared parameter with a
//! performance-weighted fusing variable:
//!
//! ```text
//! x(k) = α(k) A^{σ(k)}(x(k-1), D^{σ(k)}(k)) + (1 - α(k)) x(k-1)
//! α(k) = P_new / (P_new + P_prev)
//! ```
//!
//! Beyond the fusion loop itself the crate ships a verification layer:
//! regret and online-stability series, empirical contraction rates β and
//! inter-algorithm ratios μ, the average dwell-time admissibility test, and a
//! certifier for the switched contraction chain along a recorded run.
//!
//! Module map:
//!
//! - [`domain`]: parameters, datasets, the merged event clock, problems, metrics
//! - [`local`]: local algorithms and their Jacobians
//! - [`switching`]: selecting signals, switch counting, dwell time
//! - [`fusion`]: the fusion loop and run traces
//! - [`analysis`]: regret, stability, contraction estimates, chain certification
//! - [`models`]: linear regression, quadratic, MLP, IDX loading, MNIST shards
//! - [`experiment`]: config files, scenario construction, CSV outputs, CLI
//!
//! The `examples/` directory of this crate has one runnable program per
//! capability; start with `cargo run --release --example quickstart`.

pub mod analysis;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod local;
pub mod models;
pub mod rng;
pub mod switching;

pub use domain::{
    merge_schedules, AgentId, Dataset, Event, EventSchedule, Parameter, PerformanceMetric,
    Problem, Sample, Target, DIVISION_GUARD,
};
pub use error::{Result, SolaError};
pub use fusion::{fusing_variable, run, Agent, FusionMode, RunOutput, RunTrace, Scenario};
pub use local::LocalAlgorithm;
pub use switching::{count_switches, dwell_tau, is_admissible, DwellParams, SelectingSignal};
