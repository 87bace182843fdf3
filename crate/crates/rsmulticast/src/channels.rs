//! I.i.d. Rayleigh channel ensembles.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rsmulticast_core::model::ChannelRealization;
use rsmulticast_core::C64;

/// Draws realization `index` of the ensemble seeded by `master_seed`.
///
/// Every entry is circularly-symmetric complex Gaussian with unit variance.
/// Each realization reads its own ChaCha stream, so any subset can be
/// regenerated independently of the others.
pub fn channel_realization(antennas: usize, users: usize, master_seed: u64, index: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid std-dev");
    let rows = (0..users)
        .map(|_| {
            (0..antennas)
                .map(|_| C64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                .collect()
        })
        .collect();
    ChannelRealization::new(rows).expect("finite Gaussian draws")
}

pub fn generate_channels(antennas: usize, users: usize, count: usize, master_seed: u64) -> Vec<ChannelRealization> {
    (0..count as u64)
        .map(|r| channel_realization(antennas, users, master_seed, r))
        .collect()
}
