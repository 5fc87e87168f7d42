//! Concrete problems and data sources.

mod idx;
mod linreg;
mod mlp;
mod quadratic;
mod shards;

pub use idx::{load_idx, parse_idx, write_idx_images, write_idx_labels, IdxData, MnistImages};
pub use linreg::{arrival_times, draw_x_star, gen_linreg_stream, Arrival, LinRegStream, LinearRegression};
pub use mlp::{MlpModel, MlpProblem, MlpShape};
pub use quadratic::Quadratic;
pub use shards::{make_shards, MnistShard};
