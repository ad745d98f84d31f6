use crate::numerics::SeededRng;
use crate::{Error, Result};

/// Frozen set of integration points.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<(f64, f64)>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Index of the nearest centroid; ties go to the lower index.
    pub fn assign(&self, p: (f64, f64)) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = dist2(*c, p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn inertia(&self, points: &[(f64, f64)]) -> f64 {
        points.iter().map(|&p| dist2(self.centroids[self.assign(p)], p)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub model: ClusterModel,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    /// How many times an empty cluster was re-seeded.
    pub reseeds: usize,
}

#[inline]
fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Distance-weighted (k-means++) seeding.
fn seed_centroids(points: &[(f64, f64)], k: usize, rng: &mut SeededRng) -> Vec<(f64, f64)> {
    let mut centroids = vec![points[rng.below(points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.uniform() * total;
            let mut idx = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            // rounding can leave target past the last positive weight
            if d2[idx] == 0.0 {
                idx = d2.iter().rposition(|&d| d > 0.0).unwrap_or(idx);
            }
            idx
        } else {
            rng.below(points.len())
        };
        let c = points[pick];
        centroids.push(c);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, c));
        }
    }
    centroids
}

/// Lloyd's algorithm on 2-D points with squared Euclidean distance.
///
/// An empty cluster is moved onto the point farthest from its former
/// centroid. Stops when assignments no longer change or after `max_iters`.
pub fn kmeans_fit(points: &[(f64, f64)], k: usize, max_iters: usize, rng: &mut SeededRng) -> Result<KMeansFit> {
    if k == 0 || points.len() < k {
        return Err(Error::TooFewPoints {
            points: points.len(),
            k,
        });
    }
    let mut model = ClusterModel {
        centroids: seed_centroids(points, k, rng),
    };
    let mut labels: Vec<usize> = points.iter().map(|&p| model.assign(p)).collect();
    let mut history = Vec::new();
    let mut reseeds = 0;
    for iter in 0..max_iters.max(1) {
        let inertia: f64 = points
            .iter()
            .zip(&labels)
            .map(|(&p, &l)| dist2(p, model.centroids[l]))
            .sum();
        history.push(inertia);

        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (&p, &l) in points.iter().zip(&labels) {
            sums[l].0 += p.0;
            sums[l].1 += p.1;
            sums[l].2 += 1;
        }
        for (c, (sx, sy, n)) in model.centroids.iter_mut().zip(&sums) {
            if *n > 0 {
                *c = (sx / *n as f64, sy / *n as f64);
            }
        }
        for (ci, s) in sums.iter().enumerate() {
            if s.2 == 0 {
                let old = model.centroids[ci];
                let far = points
                    .iter()
                    .copied()
                    .max_by(|a, b| dist2(*a, old).total_cmp(&dist2(*b, old)))
                    .expect("non-empty points");
                model.centroids[ci] = far;
                reseeds += 1;
            }
        }

        let new_labels: Vec<usize> = points.iter().map(|&p| model.assign(p)).collect();
        let changed = new_labels != labels;
        labels = new_labels;
        if !changed && iter > 0 {
            break;
        }
    }
    let final_inertia: f64 = points
        .iter()
        .zip(&labels)
        .map(|(&p, &l)| dist2(p, model.centroids[l]))
        .sum();
    history.push(final_inertia);
    Ok(KMeansFit {
        model,
        inertia_history: history,
        reseeds,
    })
}
