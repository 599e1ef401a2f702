//! Seeded random streams. Every consumer draws from its own ChaCha stream so
//! that adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init,
    Data,
    TrainTestSplit,
    Deletion,
    Corrupt,
    Shuffle,
    Shift,
    Adapter(usize),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Data => 2,
            Stream::TrainTestSplit => 3,
            Stream::Deletion => 4,
            Stream::Corrupt => 5,
            Stream::Shuffle => 6,
            Stream::Shift => 7,
            Stream::Adapter(layer) => 1_000 + layer as u64,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
