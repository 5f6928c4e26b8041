//! K-means codebook over gesturelets and soft assignment to the nearest centroids.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Gesturelet;

const ASSIGN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub centroids: Vec<Vec<f64>>,
    pub seed: u64,
    /// Digest of the gesturelet configuration and layout the codebook was built on.
    pub config_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Stop once the relative inertia change falls below this.
    pub tolerance: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tolerance: 1e-4,
        }
    }
}

/// Inertia after each assignment step.
#[derive(Debug, Clone, Default)]
pub struct KMeansTrace {
    pub inertia: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftAssignment {
    /// (cluster id, weight), nearest first.
    pub entries: Vec<(usize, f64)>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn distinct_count(points: &[&[f64]]) -> usize {
    points
        .iter()
        .map(|p| p.iter().map(|x| x.to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

fn kmeans_plus_plus(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    if target < w {
                        chosen = Some(i);
                        break;
                    }
                    target -= w;
                }
            }
            // Rounding can walk off the end; take the last positive-weight point.
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            rng.gen_range(0..points.len())
        };
        let c = points[idx].to_vec();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

impl Codebook {
    /// K-means with k-means++ seeding. Deterministic in `(gesturelets, k, seed, cfg)`.
    pub fn build(
        gesturelets: &[Gesturelet],
        k: usize,
        seed: u64,
        cfg: &KMeansConfig,
        config_digest: impl Into<String>,
    ) -> Result<(Self, KMeansTrace)> {
        let points: Vec<&[f64]> = gesturelets.iter().map(|g| g.vector.as_slice()).collect();
        if k < 2 {
            return Err(Error::Config(format!("codebook size must be >= 2, got {k}")));
        }
        if let Some(d) = points.first().map(|p| p.len()) {
            if let Some(bad) = points.iter().find(|p| p.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: bad.len(),
                });
            }
        }
        let distinct = distinct_count(&points);
        if distinct < k {
            return Err(Error::TooFewSamples {
                needed: k,
                got: distinct,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centroids = kmeans_plus_plus(&points, k, &mut rng);
        let dim = points[0].len();
        let mut labels = vec![0usize; points.len()];
        let mut dists = vec![0.0f64; points.len()];
        let mut trace = KMeansTrace::default();
        for _ in 0..cfg.max_iter.max(1) {
            for (i, p) in points.iter().enumerate() {
                let (l, d) = nearest(p, &centroids);
                labels[i] = l;
                dists[i] = d;
            }
            let inertia: f64 = dists.iter().sum();
            if let Some(&prev) = trace.inertia.last() {
                debug_assert!(
                    inertia <= prev * (1.0 + 1e-9) + 1e-12,
                    "k-means inertia increased: {prev} -> {inertia}"
                );
            }
            trace.inertia.push(inertia);
            let converged = match trace.inertia.len() {
                n if n >= 2 => {
                    let prev = trace.inertia[n - 2];
                    prev <= 0.0 || (prev - inertia) / prev < cfg.tolerance
                }
                _ => inertia == 0.0,
            };
            if converged {
                break;
            }
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (p, &l) in points.iter().zip(&labels) {
                counts[l] += 1;
                for (s, x) in sums[l].iter_mut().zip(p.iter()) {
                    *s += x;
                }
            }
            let mut taken: HashSet<usize> = HashSet::new();
            for c in 0..k {
                if counts[c] > 0 {
                    let n = counts[c] as f64;
                    centroids[c] = sums[c].iter().map(|s| s / n).collect();
                    continue;
                }
                // Empty cluster: move it onto the worst-fit point not already used.
                let far = (0..points.len())
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("more points than clusters");
                taken.insert(far);
                centroids[c] = points[far].to_vec();
                dists[far] = 0.0;
            }
        }
        Ok((
            Self {
                centroids,
                seed,
                config_digest: config_digest.into(),
            },
            trace,
        ))
    }

    pub fn size(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, |c| c.len())
    }

    pub fn inertia(&self, gesturelets: &[Gesturelet]) -> f64 {
        gesturelets.iter().map(|g| nearest(&g.vector, &self.centroids).1).sum()
    }

    /// The `m` nearest centroids with inverse-distance weights summing to one.
    /// Ties go to the lower cluster id.
    pub fn assign(&self, vector: &[f64], m: usize) -> Result<SoftAssignment> {
        if vector.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: vector.len(),
            });
        }
        if m == 0 || m > self.size() {
            return Err(Error::Config(format!(
                "soft-bin count must be in 1..={}, got {m}",
                self.size()
            )));
        }
        // Sorted by (distance, id); strict comparison keeps the earlier id on ties.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(m + 1);
        for (k, c) in self.centroids.iter().enumerate() {
            let d = sq_dist(vector, c);
            if best.len() == m && d >= best[m - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, k));
            best.truncate(m);
        }
        let inv: Vec<f64> = best.iter().map(|&(d2, _)| 1.0 / (d2.sqrt() + ASSIGN_EPS)).collect();
        let total: f64 = inv.iter().sum();
        Ok(SoftAssignment {
            entries: best.iter().zip(&inv).map(|(&(_, k), w)| (k, w / total)).collect(),
        })
    }
}

/// Accumulates soft-assignment weights into `k` bins and L1-normalizes.
pub fn sequence_histogram<'a, I>(assignments: I, k: usize) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a SoftAssignment>,
{
    let mut hist = vec![0.0; k];
    let mut any = false;
    for a in assignments {
        any = true;
        for &(c, w) in &a.entries {
            if c >= k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: c + 1,
                });
            }
            hist[c] += w;
        }
    }
    if !any {
        return Err(Error::EmptyInput);
    }
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        hist.iter_mut().for_each(|h| *h /= total);
    }
    Ok(hist)
}
