//! Seeded k-means with k-means++ initialization.
//!
//! Points are put into a canonical (lexicographic) order before seeding, so
//! the resulting partition depends on the point values and the seed only,
//! never on input order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::subspace::{check_dim, FeatureVector};

pub const MAX_ITERATIONS: usize = 300;

/// Cluster index per input point. Clusters are numbered by their first
/// member in canonical point order.
pub fn kmeans(points: &[FeatureVector], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.len();
    if k < 1 || k > n {
        return Err(Error::InvalidM { m: k, frames: n });
    }
    let dim = points[0].dim();
    for p in points {
        check_dim(dim, p.dim())?;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| lexicographic(points[i].as_slice(), points[j].as_slice()));
    let sorted: Vec<&[f64]> = order.iter().map(|&i| points[i].as_slice()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(&sorted, k, &mut rng);
    let mut assignment = vec![usize::MAX; n];

    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (i, p) in sorted.iter().enumerate() {
            let c = nearest(p, &centroids).0;
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        centroids = update_centroids(&sorted, &mut assignment, &centroids);
    }

    // Renumber by first appearance in canonical order.
    let mut relabel = vec![usize::MAX; k];
    let mut next = 0;
    for &c in &assignment {
        if relabel[c] == usize::MAX {
            relabel[c] = next;
            next += 1;
        }
    }
    let mut result = vec![0; n];
    for (pos, &orig) in order.iter().enumerate() {
        result[orig] = relabel[assignment[pos]];
    }
    Ok(result)
}

fn plus_plus_init(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].to_vec()];
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].to_vec();
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Means of each cluster; an emptied cluster takes over the point farthest
/// from its current centroid.
fn update_centroids(
    points: &[&[f64]],
    assignment: &mut [usize],
    previous: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let k = previous.len();
    let dim = points[0].len();
    loop {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(assignment.iter()) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            for (s, &c) in sums.iter_mut().zip(&counts) {
                for v in s.iter_mut() {
                    *v /= c as f64;
                }
            }
            return sums;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if counts[assignment[i]] < 2 {
                continue;
            }
            let d = sq_dist(p, &previous[assignment[i]]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        match far {
            Some(i) => assignment[i] = empty,
            None => return sums,
        }
    }
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}
