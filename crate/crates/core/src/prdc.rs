//! Precision, recall, density and coverage between a real and a fake
//! feature set, from k-nearest-neighbor balls.
//!
//! A point is inside a ball when its distance is `<=` the ball radius.
//! [`compute_prdc`] tiles the distance computation across threads;
//! [`compute_prdc_reference`] is the plain double loop. Both evaluate each
//! distance with [`euclidean`] and compare against the same radii, so they
//! agree bit-for-bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::FeatureBatch;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrdcConfig {
    pub k: usize,
}

impl Default for PrdcConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K }
    }
}

impl PrdcConfig {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        Ok(Self { k })
    }

    fn check(&self, n_real: usize, n_fake: usize) -> Result<()> {
        let limit = n_real.min(n_fake);
        if self.k == 0 || self.k >= limit {
            return Err(Error::invalid(format!(
                "k must satisfy 1 <= k < min(n_real, n_fake) = {limit}, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrdcScores {
    pub precision: f64,
    pub recall: f64,
    pub density: f64,
    pub coverage: f64,
    pub k: usize,
    pub n_real: usize,
    pub n_fake: usize,
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn kth_smallest(mut dists: Vec<f64>, k: usize) -> f64 {
    let (_, kth, _) = dists.select_nth_unstable_by(k - 1, f64::total_cmp);
    *kth
}

/// Distance from each point to its k-th nearest neighbor in the same set,
/// excluding itself (duplicates of a point still count as neighbors).
pub fn knn_radius(set: &FeatureBatch, k: usize) -> Result<Vec<f64>> {
    let n = set.n();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k must satisfy 1 <= k < {n}, got {k}")));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let a = set.row(i);
            let dists = (0..n)
                .filter(|&j| j != i)
                .map(|j| euclidean(a, set.row(j)))
                .collect();
            kth_smallest(dists, k)
        })
        .collect())
}

fn check_sets(real: &FeatureBatch, fake: &FeatureBatch, cfg: &PrdcConfig) -> Result<()> {
    if real.d() != fake.d() {
        return Err(Error::Shape(format!(
            "real features have dimension {}, fake {}",
            real.d(),
            fake.d()
        )));
    }
    cfg.check(real.n(), fake.n())
}

pub fn compute_prdc(
    real: &FeatureBatch,
    fake: &FeatureBatch,
    cfg: &PrdcConfig,
) -> Result<PrdcScores> {
    check_sets(real, fake, cfg)?;
    let k = cfg.k;
    let real_r = knn_radius(real, k)?;
    let fake_r = knn_radius(fake, k)?;
    let (nr, nf) = (real.n(), fake.n());

    // Per fake point: inside any real ball, and how many real balls hold it.
    let per_fake: Vec<(bool, usize)> = (0..nf)
        .into_par_iter()
        .map(|j| {
            let f = fake.row(j);
            let count = (0..nr)
                .filter(|&i| euclidean(f, real.row(i)) <= real_r[i])
                .count();
            (count > 0, count)
        })
        .collect();
    // Per real point: inside any fake ball, and whether its own ball holds a fake.
    let per_real: Vec<(bool, bool)> = (0..nr)
        .into_par_iter()
        .map(|i| {
            let r = real.row(i);
            let mut recalled = false;
            let mut covered = false;
            for j in 0..nf {
                let dist = euclidean(fake.row(j), r);
                recalled |= dist <= fake_r[j];
                covered |= dist <= real_r[i];
                if recalled && covered {
                    break;
                }
            }
            (recalled, covered)
        })
        .collect();

    let precision_hits = per_fake.iter().filter(|p| p.0).count();
    let density_hits: usize = per_fake.iter().map(|p| p.1).sum();
    let recall_hits = per_real.iter().filter(|p| p.0).count();
    let coverage_hits = per_real.iter().filter(|p| p.1).count();
    Ok(scores(cfg, nr, nf, precision_hits, recall_hits, density_hits, coverage_hits))
}

fn scores(
    cfg: &PrdcConfig,
    nr: usize,
    nf: usize,
    precision_hits: usize,
    recall_hits: usize,
    density_hits: usize,
    coverage_hits: usize,
) -> PrdcScores {
    PrdcScores {
        precision: precision_hits as f64 / nf as f64,
        recall: recall_hits as f64 / nr as f64,
        density: density_hits as f64 / (cfg.k * nf) as f64,
        coverage: coverage_hits as f64 / nr as f64,
        k: cfg.k,
        n_real: nr,
        n_fake: nf,
    }
}

/// Sequential O(N²) reference: full sorts for the radii and one flat double
/// loop per score.
pub fn compute_prdc_reference(
    real: &FeatureBatch,
    fake: &FeatureBatch,
    cfg: &PrdcConfig,
) -> Result<PrdcScores> {
    check_sets(real, fake, cfg)?;
    let k = cfg.k;
    let radius = |set: &FeatureBatch| -> Vec<f64> {
        let n = set.n();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut d = Vec::with_capacity(n - 1);
            for j in 0..n {
                if j != i {
                    d.push(euclidean(set.row(i), set.row(j)));
                }
            }
            d.sort_by(f64::total_cmp);
            out.push(d[k - 1]);
        }
        out
    };
    let real_r = radius(real);
    let fake_r = radius(fake);
    let (nr, nf) = (real.n(), fake.n());

    let mut precision_hits = 0;
    let mut density_hits = 0;
    for j in 0..nf {
        let mut inside = false;
        for i in 0..nr {
            if euclidean(fake.row(j), real.row(i)) <= real_r[i] {
                inside = true;
                density_hits += 1;
            }
        }
        if inside {
            precision_hits += 1;
        }
    }
    let mut recall_hits = 0;
    let mut coverage_hits = 0;
    for i in 0..nr {
        let mut recalled = false;
        let mut covered = false;
        for j in 0..nf {
            let dist = euclidean(fake.row(j), real.row(i));
            if dist <= fake_r[j] {
                recalled = true;
            }
            if dist <= real_r[i] {
                covered = true;
            }
        }
        recall_hits += usize::from(recalled);
        coverage_hits += usize::from(covered);
    }
    Ok(scores(cfg, nr, nf, precision_hits, recall_hits, density_hits, coverage_hits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_radii() {
        let s = FeatureBatch::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(knn_radius(&s, 1).unwrap(), vec![1.0, 1.0, 2.0]);
        assert!(knn_radius(&s, 3).is_err());
        assert!(knn_radius(&s, 0).is_err());
    }

    #[test]
    fn duplicates_have_zero_radius() {
        let s = FeatureBatch::from_rows(&[vec![2.0, 2.0], vec![2.0, 2.0], vec![5.0, 1.0]]).unwrap();
        let r = knn_radius(&s, 1).unwrap();
        assert_eq!(&r[..2], &[0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let a = FeatureBatch::new(4, 2, vec![0.0; 8]).unwrap();
        let b = FeatureBatch::new(4, 3, vec![0.0; 12]).unwrap();
        assert!(compute_prdc(&a, &b, &PrdcConfig::new(1).unwrap()).is_err());
        assert!(compute_prdc(&a, &a, &PrdcConfig::new(4).unwrap()).is_err());
    }
}
