//! k-medoids clustering of prototype vectors with Davies-Bouldin selection of
//! the cluster count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("need at least 2 vectors, got {0}")]
    TooFewVectors(usize),
    #[error("invalid cluster count {k} for {n} points")]
    InvalidK { k: usize, n: usize },
    #[error("Davies-Bouldin needs at least 2 clusters")]
    SingletonPartition,
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("label count {labels} does not match vector count {vectors}")]
    LengthMismatch { labels: usize, vectors: usize },
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Symmetric matrix of pairwise Euclidean distances.
pub fn distance_matrix(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ClusterError> {
    let n = vectors.len();
    if n < 2 {
        return Err(ClusterError::TooFewVectors(n));
    }
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = euclidean(&vectors[i], &vectors[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    /// Cluster id per point, in `0..k`.
    pub labels: Vec<usize>,
    /// Medoid point index per cluster, ascending.
    pub medoids: Vec<usize>,
    /// Sum of distances from each point to its medoid.
    pub cost: f64,
}

fn total_cost(dist: &[Vec<f64>], medoids: &[usize]) -> f64 {
    (0..dist.len())
        .map(|j| {
            medoids
                .iter()
                .map(|&m| dist[m][j])
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Greedy BUILD initialization: each step adds the point that lowers the
/// total cost most, lowest index on ties.
fn build(dist: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = dist.len();
    let mut medoids = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..n {
            if medoids.contains(&c) {
                continue;
            }
            let cost: f64 = (0..n).map(|j| nearest[j].min(dist[c][j])).sum();
            if best.map_or(true, |(_, b)| cost < b) {
                best = Some((c, cost));
            }
        }
        let (c, _) = best.expect("k <= n");
        medoids.push(c);
        for j in 0..n {
            nearest[j] = nearest[j].min(dist[c][j]);
        }
    }
    medoids
}

/// PAM k-medoids over a precomputed distance matrix: BUILD, then apply the
/// best improving medoid/non-medoid swap until none improves.
pub fn cluster_prototypes(dist: &[Vec<f64>], k: usize) -> Result<ClusterAssignment, ClusterError> {
    let n = dist.len();
    if k < 1 || k > n {
        return Err(ClusterError::InvalidK { k, n });
    }
    let (medoids, cost) = pam(dist, k, |_| {});
    Ok(assign(dist, medoids, cost))
}

/// The PAM search itself; `observe` sees the cost after BUILD and after
/// every applied swap.
pub(crate) fn pam(dist: &[Vec<f64>], k: usize, mut observe: impl FnMut(f64)) -> (Vec<usize>, f64) {
    let n = dist.len();
    let mut medoids = build(dist, k);
    let mut cost = total_cost(dist, &medoids);
    observe(cost);
    let scale = dist.iter().flatten().fold(0.0f64, |a, &b| a.max(b)).max(1.0);
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in 0..k {
            for h in 0..n {
                if medoids.contains(&h) {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[slot] = h;
                let c = total_cost(dist, &trial);
                if best.map_or(true, |(_, _, b)| c < b) {
                    best = Some((slot, h, c));
                }
            }
        }
        match best {
            Some((slot, h, c)) if c < cost - 1e-12 * scale => {
                medoids[slot] = h;
                cost = c;
                observe(cost);
            }
            _ => break,
        }
    }
    medoids.sort_unstable();
    (medoids, cost)
}

fn assign(dist: &[Vec<f64>], medoids: Vec<usize>, cost: f64) -> ClusterAssignment {
    let labels = (0..dist.len())
        .map(|j| {
            if let Some(c) = medoids.iter().position(|&m| m == j) {
                return c;
            }
            let mut best = 0;
            for (c, &m) in medoids.iter().enumerate() {
                if dist[m][j] < dist[medoids[best]][j] {
                    best = c;
                }
            }
            best
        })
        .collect();
    ClusterAssignment {
        k: medoids.len(),
        labels,
        medoids,
        cost,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterQuality {
    /// Mean distance of each cluster's members to its centroid.
    pub dispersions: Vec<f64>,
    /// Centroid-to-centroid distances.
    pub separations: Vec<Vec<f64>>,
    /// `(S_i + S_j) / M_ij`, infinite for coincident centroids, 0 on the diagonal.
    pub ratios: Vec<Vec<f64>>,
    pub db_score: f64,
    /// Some pair of distinct clusters shares a centroid.
    pub coincident_centroids: bool,
}

/// Davies-Bouldin index with mean-distance dispersion and Euclidean
/// centroid separation. Lower is better.
pub fn davies_bouldin(
    vectors: &[Vec<f64>],
    labels: &[usize],
    k: usize,
) -> Result<ClusterQuality, ClusterError> {
    if k < 2 {
        return Err(ClusterError::SingletonPartition);
    }
    if labels.len() != vectors.len() {
        return Err(ClusterError::LengthMismatch {
            labels: labels.len(),
            vectors: vectors.len(),
        });
    }
    let dim = vectors.first().map_or(0, Vec::len);
    let mut centroids = vec![vec![0.0; dim]; k];
    let mut sizes = vec![0usize; k];
    for (v, &l) in vectors.iter().zip(labels) {
        if l >= k {
            return Err(ClusterError::InvalidK { k, n: l + 1 });
        }
        sizes[l] += 1;
        for (c, x) in centroids[l].iter_mut().zip(v) {
            *c += x;
        }
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(ClusterError::EmptyCluster(empty));
    }
    for (c, &s) in centroids.iter_mut().zip(&sizes) {
        c.iter_mut().for_each(|x| *x /= s as f64);
    }
    let mut dispersions = vec![0.0; k];
    for (v, &l) in vectors.iter().zip(labels) {
        dispersions[l] += euclidean(v, &centroids[l]);
    }
    for (d, &s) in dispersions.iter_mut().zip(&sizes) {
        *d /= s as f64;
    }
    let mut separations = vec![vec![0.0; k]; k];
    let mut ratios = vec![vec![0.0; k]; k];
    let mut coincident = false;
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let m = euclidean(&centroids[i], &centroids[j]);
            separations[i][j] = m;
            ratios[i][j] = if m > 0.0 {
                (dispersions[i] + dispersions[j]) / m
            } else {
                coincident = true;
                f64::INFINITY
            };
        }
    }
    let db_score = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| ratios[i][j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / k as f64;
    Ok(ClusterQuality {
        dispersions,
        separations,
        ratios,
        db_score,
        coincident_centroids: coincident,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub assignment: ClusterAssignment,
    pub quality: ClusterQuality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best_k: usize,
    pub scores: Vec<KScore>,
}

impl Selection {
    pub fn best(&self) -> &KScore {
        self.scores
            .iter()
            .find(|s| s.k == self.best_k)
            .expect("best_k is one of the scored values")
    }
}

/// Clusters for every `k` in `k_min..=k_max` and keeps the lowest
/// Davies-Bouldin score, the smaller `k` on ties.
pub fn select_k(vectors: &[Vec<f64>], k_min: usize, k_max: usize) -> Result<Selection, ClusterError> {
    let n = vectors.len();
    if k_min < 2 || k_min > k_max || k_max + 1 > n {
        return Err(ClusterError::InvalidK { k: k_max, n });
    }
    let dist = distance_matrix(vectors)?;
    let mut scores = Vec::new();
    for k in k_min..=k_max {
        let assignment = cluster_prototypes(&dist, k)?;
        let quality = davies_bouldin(vectors, &assignment.labels, k)?;
        scores.push(KScore {
            k,
            assignment,
            quality,
        });
    }
    Ok(Selection {
        best_k: lowest_score_k(&scores),
        scores,
    })
}

/// `k` with the lowest score; the earliest (smallest `k`) wins ties.
pub fn lowest_score_k(scores: &[KScore]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.quality.db_score < scores[best].quality.db_score {
            best = i;
        }
    }
    scores[best].k
}
