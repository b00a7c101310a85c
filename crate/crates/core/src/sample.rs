//! Deterministic sample points over the chart's domain box.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Point = [f64; 3];

/// Stratified (Latin hypercube) points: each coordinate interval is split into
/// `n` equal strata and every stratum is hit exactly once per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    points: Vec<Point>,
}

impl Samples {
    pub fn stratified(domain: &[(f64, f64); 3], n: usize, seed: u64) -> Samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = vec![[0.0; 3]; n];
        for (k, &(lo, hi)) in domain.iter().enumerate() {
            let mut strata: Vec<usize> = (0..n).collect();
            strata.shuffle(&mut rng);
            for (p, s) in points.iter_mut().zip(strata) {
                let t = (s as f64 + rng.gen::<f64>()) / n as f64;
                p[k] = lo + t * (hi - lo);
            }
        }
        Samples { points }
    }

    pub fn from_points(points: Vec<Point>) -> Samples {
        Samples { points }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The same points with the first coordinate replaced.
    pub fn with_fibre(&self, u: f64) -> Samples {
        Samples {
            points: self.points.iter().map(|p| [u, p[1], p[2]]).collect(),
        }
    }
}
