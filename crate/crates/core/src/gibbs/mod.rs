//! Blocked Gibbs sampler: shrinkage, MALA on the loadings, conjugate
//! updates, birth-death moves on non-allocated centers, marginalized
//! allocations and the binary-data extension.

pub mod dist;
pub mod geweke;
mod lambda;
mod sampler;
pub mod steps;
mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use lambda::{LambdaEval, LambdaTarget};
pub use sampler::{run_chain, Sampler};
pub use trace::{Acceptance, ChainTrace, Counter, SamplerConfig, TraceRecord, MALA_TARGET_ACCEPT, MU_TARGET_ACCEPT};

/// The generator for chain `chain` of a run seeded with `seed`: one ChaCha
/// key per seed and one stream per chain.
pub fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}
