//! Balanced centroid clustering of pre-experiment features.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, mu) in centroids.iter().enumerate() {
        let d = dist2(p, mu);
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

const RESTARTS: usize = 8;

fn seed_centroids<R: Rng>(features: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = features.len();
    let mut centroids = vec![features[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = features.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.push(features[next].clone());
        for (i, p) in features.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

/// Lloyd iterations; returns centroids, labels and within-cluster sum of squares.
fn lloyd(features: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<usize>, f64) {
    let (k, dim) = (centroids.len(), features[0].len());
    let mut labels = vec![usize::MAX; features.len()];
    for _ in 0..100 {
        let new: Vec<usize> = features.iter().map(|p| nearest(p, &centroids)).collect();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in features.iter().zip(&new) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let stable = new == labels;
        labels = new;
        if stable {
            break;
        }
    }
    let inertia = features.iter().zip(&labels).map(|(p, &c)| dist2(p, &centroids[c])).sum();
    (centroids, labels, inertia)
}

/// k-means++ seeding and Lloyd iterations, best of several restarts, then a
/// greedy pass that moves the farthest members of oversized clusters to the
/// nearest cluster with room. Cluster sizes differ by at most one.
pub fn centroid_clusters(features: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = features.len();
    if k == 0 || k > n {
        return Err(Error::InvalidDesign(format!("cannot form {k} clusters from {n} points")));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch("feature vectors differ in length".into()));
    }
    let mut rng = rng_from(&[seed, 0x4B4D]);
    let mut best: Option<(Vec<Vec<f64>>, Vec<usize>, f64)> = None;
    for _ in 0..RESTARTS {
        let run = lloyd(features, seed_centroids(features, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (centroids, mut labels, _) = best.expect("at least one restart");

    let cap: Vec<usize> = (0..k).map(|c| n / k + usize::from(c < n % k)).collect();
    let mut size = vec![0usize; k];
    for &c in &labels {
        size[c] += 1;
    }
    for c in 0..k {
        if size[c] <= cap[c] {
            continue;
        }
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        members.sort_by(|&a, &b| {
            dist2(&features[b], &centroids[c]).total_cmp(&dist2(&features[a], &centroids[c])).then(a.cmp(&b))
        });
        for i in members {
            if size[c] <= cap[c] {
                break;
            }
            let target = (0..k)
                .filter(|&o| size[o] < cap[o])
                .min_by(|&a, &b| dist2(&features[i], &centroids[a]).total_cmp(&dist2(&features[i], &centroids[b])))
                .expect("total capacity equals n");
            labels[i] = target;
            size[c] -= 1;
            size[target] += 1;
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Vec<Vec<f64>>, Vec<usize>) {
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, mu) in centers.iter().enumerate() {
            for j in 0..5 {
                pts.push(vec![mu[0] + 0.1 * j as f64, mu[1] - 0.05 * j as f64]);
                truth.push(c);
            }
        }
        (pts, truth)
    }

    #[test]
    fn recovers_tight_blobs() {
        let (pts, truth) = blobs();
        let labels = centroid_clusters(&pts, 3, 1).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert_eq!(labels[i] == labels[j], truth[i] == truth[j]);
            }
        }
    }

    #[test]
    fn one_cluster_and_bounds() {
        let (pts, _) = blobs();
        assert!(centroid_clusters(&pts, 1, 0).unwrap().iter().all(|&c| c == 0));
        assert!(centroid_clusters(&pts, 16, 0).is_err());
        assert!(centroid_clusters(&pts, 0, 0).is_err());
    }

    #[test]
    fn sizes_are_balanced() {
        let mut pts: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64 * 0.01]).collect();
        pts.push(vec![100.0]);
        let labels = centroid_clusters(&pts, 2, 3).unwrap();
        let a = labels.iter().filter(|&&c| c == 0).count();
        assert_eq!(a, 5);
    }
}
