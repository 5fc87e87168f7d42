//! Selecting signals `σ(k)`, switch counting, and the average dwell-time
//! admissibility test.

mod dwell;
mod signal;

pub use dwell::{dwell_tau, is_admissible, Admissibility, DwellParams};
pub use signal::{count_switches, greedy_signal, periodic_signal, SelectingSignal};
