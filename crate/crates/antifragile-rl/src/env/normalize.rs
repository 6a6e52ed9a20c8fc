//! Per-component observation normalization, frozen after a warm-up phase.

use serde::{Deserialize, Serialize};

use super::ObservationVector;

const STD_FLOOR: f64 = 1e-6;

/// Frozen per-component mean/std of raw observations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObsStats {
    pub mean: [f64; 9],
    pub std: [f64; 9],
}

impl ObsStats {
    /// Pass-through statistics (mean 0, std 1).
    pub fn identity() -> Self {
        ObsStats {
            mean: [0.0; 9],
            std: [1.0; 9],
        }
    }

    /// Fit from a warm-up buffer of raw observations (population std, floored).
    pub fn fit(samples: &[ObservationVector]) -> Self {
        let n = samples.len().max(1) as f64;
        let mut mean = [0.0; 9];
        for obs in samples {
            for (m, v) in mean.iter_mut().zip(obs.0.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; 9];
        for obs in samples {
            for i in 0..9 {
                let d = obs.0[i] - mean[i];
                var[i] += d * d;
            }
        }
        let mut std = [0.0; 9];
        for i in 0..9 {
            std[i] = (var[i] / n).sqrt().max(STD_FLOOR);
        }
        ObsStats { mean, std }
    }

    pub fn normalize(&self, raw: ObservationVector) -> ObservationVector {
        let mut out = [0.0; 9];
        for i in 0..9 {
            out[i] = (raw.0[i] - self.mean[i]) / self.std[i];
        }
        ObservationVector(out)
    }
}
