//! Domain types shared by every other module: the parameter vector, samples
//! and append-only datasets, the merged arrival clock, problem definitions and
//! performance metrics.

mod data;
mod metric;
mod param;
mod problem;
mod schedule;

pub use data::{accumulate, Dataset, Sample, Target};
pub use metric::{PerformanceMetric, DIVISION_GUARD};
pub use param::Parameter;
pub use problem::Problem;
pub use schedule::{merge_schedules, AgentId, AgentSchedule, Event, EventSchedule};
