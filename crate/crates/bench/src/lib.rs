//! Fixtures shared by the criterion benches.

use nebi_core::dataset::{generate_sequence, BurstSequence, DatasetConfig, FrameSource, SceneConfig};
use nebi_core::Rng;

/// Uniform `[0, 1)` values from a fixed seed.
pub fn uniform(n: usize, seed: u64) -> Vec<f32> {
    let mut rng = Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.uniform() as f32).collect()
}

/// Toy dataset settings with a smaller scene, so one sequence takes
/// milliseconds.
pub fn small_config() -> DatasetConfig {
    let toy = DatasetConfig::toy();
    let FrameSource::Procedural { scene, max_drift_px } = toy.source.clone() else {
        unreachable!("toy source is procedural")
    };
    DatasetConfig {
        source: FrameSource::Procedural {
            scene: SceneConfig {
                height: 64,
                width: 64,
                ..scene
            },
            max_drift_px,
        },
        ..toy
    }
}

pub fn toy_sequence(seed: u64) -> BurstSequence {
    generate_sequence(&DatasetConfig::toy(), None, seed).expect("toy sequence")
}
