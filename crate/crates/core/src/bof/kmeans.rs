use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::surf::{Descriptor, DESCRIPTOR_LEN};
use super::BofError;

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-6;

/// Visual-word centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub centroids: Vec<Descriptor>,
}

impl Vocabulary {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Index of the closest centroid; ties go to the lowest index.
    pub fn nearest(&self, d: &Descriptor) -> usize {
        nearest(&self.centroids, d).0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub vocabulary: Vocabulary,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub sse_history: Vec<f64>,
    pub iterations: usize,
}

pub fn squared_distance(a: &Descriptor, b: &Descriptor) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Descriptor], d: &Descriptor) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let dist = squared_distance(c, d);
        if dist < best.1 {
            best = (i, dist);
        }
    }
    best
}

fn plus_plus_seed(points: &[Descriptor], k: usize, rng: &mut ChaCha8Rng) -> Vec<Descriptor> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = d2.iter().rposition(|&v| v > 0.0).expect("positive total");
            for (i, &v) in d2.iter().enumerate() {
                acc += v;
                if v > 0.0 && acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick];
        for (slot, p) in d2.iter_mut().zip(points) {
            *slot = slot.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// K-means with k-means++ seeding and Lloyd iterations until no centroid
/// moves by `KMEANS_TOL` or more, or `KMEANS_MAX_ITER` iterations. An
/// emptied cluster is re-seeded with the point farthest from its centroid.
pub fn kmeans(points: &[Descriptor], k: usize, seed: u64) -> Result<KMeansResult, BofError> {
    if k < 2 {
        return Err(BofError::InvalidParameter("vocabulary size must be at least 2"));
    }
    if points.len() < k {
        return Err(BofError::InsufficientDescriptors { found: points.len(), needed: k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seed(points, k, &mut rng);
    let mut sse_history = Vec::new();
    let mut assignments = vec![0; points.len()];
    let mut iterations = 0;

    loop {
        let near: Vec<(usize, f64)> = points.par_iter().map(|p| nearest(&centroids, p)).collect();
        assignments.iter_mut().zip(&near).for_each(|(a, n)| *a = n.0);
        sse_history.push(near.iter().map(|n| n.1).sum());
        if iterations == KMEANS_MAX_ITER {
            break;
        }
        iterations += 1;

        let mut sums = vec![[0.0; DESCRIPTOR_LEN]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        let mut dist: Vec<f64> = near.iter().map(|n| n.1).collect();
        let mut moved: f64 = 0.0;
        for c in 0..k {
            let next = if counts[c] > 0 {
                sums[c].map(|s| s / counts[c] as f64)
            } else {
                let far = dist
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best })
                    .0;
                dist[far] = 0.0;
                points[far]
            };
            moved = moved.max(squared_distance(&next, &centroids[c]).sqrt());
            centroids[c] = next;
        }
        if moved < KMEANS_TOL {
            let near: Vec<(usize, f64)> = points.par_iter().map(|p| nearest(&centroids, p)).collect();
            assignments.iter_mut().zip(&near).for_each(|(a, n)| *a = n.0);
            sse_history.push(near.iter().map(|n| n.1).sum());
            break;
        }
    }
    Ok(KMeansResult { vocabulary: Vocabulary { centroids }, assignments, sse_history, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(v: f64, axis: usize) -> Descriptor {
        let mut d = [0.0; DESCRIPTOR_LEN];
        d[axis] = v;
        d
    }

    #[test]
    fn k_equals_n_gives_zero_sse() {
        let pts: Vec<Descriptor> = (0..5).map(|i| point(i as f64, i)).collect();
        let r = kmeans(&pts, 5, 1).unwrap();
        assert_eq!(*r.sse_history.last().unwrap(), 0.0);
        let mut seen = r.assignments.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![point(1.0, 0); 3];
        assert!(matches!(kmeans(&pts, 4, 0), Err(BofError::InsufficientDescriptors { found: 3, needed: 4 })));
    }

    #[test]
    fn nearest_ties_go_low() {
        let v = Vocabulary { centroids: vec![point(1.0, 0), point(-1.0, 0)] };
        assert_eq!(v.nearest(&point(0.0, 0)), 0);
    }
}
