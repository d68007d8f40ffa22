//! Seeded band-limited noise for emulating teleoperation traces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::config::NoiseSpec;

/// Sum of sinusoids with random frequencies in the band and random phases.
#[derive(Debug, Clone)]
pub struct BandNoise {
    components: Vec<(f64, f64, f64)>,
}

impl BandNoise {
    pub fn new(spec: &NoiseSpec, rng: &mut ChaCha8Rng) -> Self {
        let amp = spec.amplitude * (2.0 / spec.components as f64).sqrt();
        let [lo, hi] = spec.band;
        let components = (0..spec.components)
            .map(|_| {
                let w = if hi > lo { rng.random_range(lo..hi) } else { lo };
                let phase = rng.random_range(0.0..2.0 * PI);
                (amp, w, phase)
            })
            .collect();
        BandNoise { components }
    }

    /// `(amplitude, omega, phase)` of every sinusoid.
    pub fn components(&self) -> &[(f64, f64, f64)] {
        &self.components
    }

    pub fn value(&self, t: f64) -> f64 {
        self.components.iter().map(|(a, w, p)| a * (w * t + p).sin()).sum()
    }
}

/// One independent noise channel per Cartesian axis.
pub fn axis_noise(spec: &NoiseSpec, seed: u64) -> [BandNoise; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    [BandNoise::new(spec, &mut rng), BandNoise::new(spec, &mut rng), BandNoise::new(spec, &mut rng)]
}
