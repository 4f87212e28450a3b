use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::rng::rng_from;

/// Cluster index per item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Input(format!("cluster index {bad} not below k = {k}")));
        }
        Ok(Self { labels, k })
    }

    /// `k` taken as `max label + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self { labels, k }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    pub centroids: Matrix,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().unwrap_or(&0.0)
    }
}

fn plus_plus_seeds<R: Rng>(x: &Matrix, k: usize, rng: &mut R) -> Vec<usize> {
    let n = x.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|i| squared_distance(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total")
        } else {
            // Every remaining point coincides with a chosen one.
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(squared_distance(x.row(i), x.row(next)));
        }
    }
    chosen
}

fn assign(x: &Matrix, centroids: &Matrix, labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let row = x.row(i);
        let (best, dist) = (0..centroids.rows())
            .map(|c| (c, squared_distance(row, centroids.row(c))))
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        *label = best;
        inertia += dist;
    }
    inertia
}

/// Lloyd's algorithm with k-means++ seeding. Stops when assignments stop
/// changing or after `max_iters` assignment steps.
pub fn kmeans(x: &Matrix, k: usize, seed: u64, max_iters: usize) -> Result<KMeansResult> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::Input(format!("k = {k} must be in 1..={n} (number of points)")));
    }
    let mut rng = rng_from(seed);
    let seeds = plus_plus_seeds(x, k, &mut rng);
    let mut centroids = x.select_rows(&seeds);
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    let max_iters = max_iters.max(1);
    loop {
        let previous = labels.clone();
        history.push(assign(x, &centroids, &mut labels));
        iterations += 1;
        if labels == previous || iterations >= max_iters {
            break;
        }
        // Update step; an emptied cluster takes the point farthest from its centroid.
        let mut sums = Matrix::zeros(k, x.cols());
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums.row_mut(c).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| {
                        let da = squared_distance(x.row(a), centroids.row(labels[a]));
                        let db = squared_distance(x.row(b), centroids.row(labels[b]));
                        da.total_cmp(&db)
                    })
                    .expect("some cluster has two points");
                counts[labels[far]] -= 1;
                labels[far] = c;
                counts[c] = 1;
                centroids.row_mut(c).copy_from_slice(x.row(far));
            }
        }
    }
    Ok(KMeansResult {
        assignment: ClusterAssignment { labels, k },
        centroids,
        inertia_history: history,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clouds() -> (Matrix, Vec<usize>) {
        let pts: [[f64; 2]; 10] = [
            [0.0, 0.1],
            [0.2, -0.1],
            [-0.1, 0.0],
            [0.1, 0.2],
            [-0.2, -0.2],
            [10.0, 10.1],
            [10.2, 9.9],
            [9.8, 10.0],
            [10.1, 10.3],
            [9.9, 9.7],
        ];
        let rows: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
        (Matrix::from_rows(&rows).unwrap(), (0..10).map(|i| i / 5).collect())
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let (x, _) = clouds();
        let r = kmeans(&x, 10, 3, 50).unwrap();
        let mut labels = r.assignment.labels.clone();
        labels.sort_unstable();
        assert_eq!(labels, (0..10).collect::<Vec<_>>());
        assert_eq!(r.inertia(), 0.0);
    }

    #[test]
    fn inertia_never_increases_and_seed_is_deterministic() {
        let (x, _) = clouds();
        for seed in 0..10 {
            let r = kmeans(&x, 3, seed, 100).unwrap();
            for w in r.inertia_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
            assert_eq!(r, kmeans(&x, 3, seed, 100).unwrap());
        }
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        let (x, _) = clouds();
        assert!(matches!(kmeans(&x, 11, 0, 10), Err(Error::Input(_))));
        assert!(kmeans(&x, 0, 0, 10).is_err());
    }

    #[test]
    fn duplicate_points_still_seed_k_clusters() {
        let x = Matrix::from_vec(4, 1, vec![1.0, 1.0, 1.0, 2.0]).unwrap();
        let r = kmeans(&x, 3, 0, 10).unwrap();
        assert_eq!(r.assignment.k, 3);
        assert_eq!(r.inertia(), 0.0);
    }
}
