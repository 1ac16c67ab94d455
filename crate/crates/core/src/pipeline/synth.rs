//! Seeded 2-D toy datasets.

use std::f64::consts::PI;

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::optim::restart_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Three isotropic Gaussians centered on an equilateral triangle of
    /// circumradius 4.
    Blobs,
    /// Two interleaving half circles.
    Moons,
    /// Two concentric circles of radius 1 and 0.5.
    Rings,
}

impl std::str::FromStr for SynthKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(Self::Blobs),
            "moons" => Ok(Self::Moons),
            "rings" => Ok(Self::Rings),
            other => Err(invalid("kind", format!("unknown dataset `{other}` (blobs, moons, rings)"))),
        }
    }
}

impl SynthKind {
    pub fn classes(self) -> usize {
        match self {
            Self::Blobs => 3,
            Self::Moons | Self::Rings => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub points: Array2<f64>,
    pub labels: Vec<i64>,
}

/// Blob centers on a triangle of circumradius 4.
pub const BLOB_RADIUS: f64 = 4.0;

/// `n` points with labels in contiguous balanced blocks, plus isotropic
/// Gaussian noise of standard deviation `noise`.
pub fn synth_generate(kind: SynthKind, n: usize, noise: f64, seed: u64) -> Result<SynthData> {
    if n < 4 {
        return Err(invalid("n", format!("{n} points; need at least 4")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(invalid("noise", format!("{noise} must be nonnegative")));
    }
    let k = kind.classes();
    let mut rng = restart_rng(seed, 0);
    let labels: Vec<i64> = (0..n).map(|i| (i * k / n) as i64).collect();
    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l as usize] += 1;
    }
    let mut rank = vec![0usize; k];
    let mut points = Array2::zeros((n, 2));
    for (i, &l) in labels.iter().enumerate() {
        let c = l as usize;
        // position within the class, mapped to [0, 1]
        let t = if counts[c] > 1 { rank[c] as f64 / (counts[c] - 1) as f64 } else { 0.5 };
        rank[c] += 1;
        let (x, y) = match kind {
            SynthKind::Blobs => {
                let a = PI / 2.0 + 2.0 * PI * c as f64 / 3.0;
                (BLOB_RADIUS * a.cos(), BLOB_RADIUS * a.sin())
            }
            SynthKind::Moons => {
                let a = PI * t;
                if c == 0 {
                    (a.cos(), a.sin())
                } else {
                    (1.0 - a.cos(), 0.5 - a.sin())
                }
            }
            SynthKind::Rings => {
                let a = 2.0 * PI * rank[c] as f64 / counts[c] as f64;
                let r = if c == 0 { 1.0 } else { 0.5 };
                (r * a.cos(), r * a.sin())
            }
        };
        let ex: f64 = StandardNormal.sample(&mut rng);
        let ey: f64 = StandardNormal.sample(&mut rng);
        points[[i, 0]] = x + noise * ex;
        points[[i, 1]] = y + noise * ey;
    }
    Ok(SynthData { points, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sq_dist;

    #[test]
    fn blobs_without_noise_are_separated() {
        let d = synth_generate(SynthKind::Blobs, 30, 0.0, 1).unwrap();
        for i in 0..30 {
            for j in 0..30 {
                let dist = sq_dist(d.points.row(i), d.points.row(j));
                if d.labels[i] == d.labels[j] {
                    assert_eq!(dist, 0.0);
                } else {
                    assert!(dist > 1.0);
                }
            }
        }
    }

    #[test]
    fn deterministic_and_balanced() {
        for kind in [SynthKind::Blobs, SynthKind::Moons, SynthKind::Rings] {
            let a = synth_generate(kind, 101, 0.1, 7).unwrap();
            let b = synth_generate(kind, 101, 0.1, 7).unwrap();
            assert_eq!(a, b);
            let mut counts = vec![0i64; kind.classes()];
            for &l in &a.labels {
                counts[l as usize] += 1;
            }
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "{counts:?}");
        }
        assert_ne!(synth_generate(SynthKind::Moons, 20, 0.1, 1).unwrap(), synth_generate(SynthKind::Moons, 20, 0.1, 2).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(synth_generate(SynthKind::Blobs, 3, 0.1, 0).is_err());
        assert!("spirals".parse::<SynthKind>().is_err());
        assert_eq!("rings".parse::<SynthKind>().unwrap(), SynthKind::Rings);
    }
}
