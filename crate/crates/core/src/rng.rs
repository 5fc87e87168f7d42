//! Seed splitting.
//!
//! Every random component of an experiment draws from its own ChaCha stream
//! keyed by the master seed, so switching one component on or off leaves the
//! draws of the others untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Data,
    Signal,
    Noise,
    Batching,
    Init,
    Analysis,
}

impl Component {
    fn id(self) -> u64 {
        match self {
            Component::Data => 1,
            Component::Signal => 2,
            Component::Noise => 3,
            Component::Batching => 4,
            Component::Init => 5,
            Component::Analysis => 6,
        }
    }
}

/// Stream for `component`, optionally specialised to one agent or sub-unit.
pub fn stream(master: u64, component: Component, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((component.id() << 32) | (lane & 0xffff_ffff));
    rng
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
