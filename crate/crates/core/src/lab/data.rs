use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{stream_rng, Matrix, Stream};

/// Pairwise center distance in units of `spread`.
pub const CENTER_SEPARATION: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub n_per_class: usize,
    pub p: usize,
    pub classes: usize,
    pub spread: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            n_per_class: 256,
            p: 16,
            classes: 4,
            spread: 0.25,
        }
    }
}

impl ClusterParams {
    fn validate(&self) -> Result<()> {
        if self.n_per_class < 2 {
            return Err(Error::invalid("every class needs at least 2 samples"));
        }
        if self.classes < 2 || self.classes > self.p {
            return Err(Error::invalid(format!(
                "need 2 <= classes <= p, got classes={}, p={}",
                self.classes, self.p
            )));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(Error::invalid(format!("spread must be positive, got {}", self.spread)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub params: ClusterParams,
    pub centers: Matrix,
    pub seed: u64,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.params.classes
    }

    pub fn select(&self, idx: &[usize]) -> (Matrix, Vec<usize>) {
        let p = self.inputs.cols();
        let mut m = Matrix::zeros(idx.len(), p);
        for (r, &i) in idx.iter().enumerate() {
            m.row_mut(r).copy_from_slice(self.inputs.row(i));
        }
        (m, idx.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Class centers on a regular simplex: scaled basis vectors with their
/// centroid removed, so every pair sits `CENTER_SEPARATION · spread` apart
/// and the mixture is centered at the origin.
pub fn cluster_centers(p: usize, classes: usize, spread: f64) -> Matrix {
    let r = CENTER_SEPARATION * spread / std::f64::consts::SQRT_2;
    let mut c = Matrix::zeros(classes, p);
    for k in 0..classes {
        for j in 0..classes {
            let e = if j == k { 1.0 } else { 0.0 };
            c.set(k, j, r * (e - 1.0 / classes as f64));
        }
    }
    c
}

pub fn gen_clusters(
    n_per_class: usize,
    p: usize,
    classes: usize,
    spread: f64,
    seed: u64,
) -> Result<SyntheticDataset> {
    let params = ClusterParams {
        n_per_class,
        p,
        classes,
        spread,
    };
    gen_clusters_on(params, seed, Stream::TrainData)
}

pub(crate) fn gen_clusters_on(
    params: ClusterParams,
    seed: u64,
    stream: Stream,
) -> Result<SyntheticDataset> {
    params.validate()?;
    let ClusterParams {
        n_per_class,
        p,
        classes,
        spread,
    } = params;
    let centers = cluster_centers(p, classes, spread);
    let mut rng = stream_rng(seed, stream);
    let n = n_per_class * classes;
    let mut inputs = Matrix::zeros(n, p);
    let mut labels = Vec::with_capacity(n);
    for k in 0..classes {
        for s in 0..n_per_class {
            let row = inputs.row_mut(k * n_per_class + s);
            for (x, c) in row.iter_mut().zip(centers.row(k)) {
                let g: f64 = StandardNormal.sample(&mut rng);
                *x = c + spread * g;
            }
            labels.push(k);
        }
    }
    Ok(SyntheticDataset {
        inputs,
        labels,
        params,
        centers,
        seed,
    })
}

/// Accuracy of assigning each row of `test` to the nearest class centroid
/// computed from `train`.
pub fn nearest_centroid_accuracy(
    train: &Matrix,
    train_labels: &[usize],
    test: &Matrix,
    test_labels: &[usize],
    classes: usize,
) -> f64 {
    let d = train.cols();
    let mut centroids = Matrix::zeros(classes, d);
    let mut counts = vec![0usize; classes];
    for (i, &y) in train_labels.iter().enumerate() {
        counts[y] += 1;
        for (c, x) in centroids.row_mut(y).iter_mut().zip(train.row(i)) {
            *c += x;
        }
    }
    for (k, &cnt) in counts.iter().enumerate() {
        if cnt > 0 {
            centroids.row_mut(k).iter_mut().for_each(|c| *c /= cnt as f64);
        }
    }
    let correct = test_labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| {
            let x = test.row(i);
            let best = (0..classes)
                .filter(|&k| counts[k] > 0)
                .map(|k| {
                    let dist: f64 = x
                        .iter()
                        .zip(centroids.row(k))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (k, dist)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(k, _)| k);
            best == Some(y)
        })
        .count();
    correct as f64 / test_labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_set_is_two_tight_pairs() {
        let ds = gen_clusters(2, 2, 2, 0.1, 0).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.labels, vec![0, 0, 1, 1]);
        let dist = |a: usize, b: usize| crate::prdc::euclidean(ds.inputs.row(a), ds.inputs.row(b));
        assert!(dist(0, 1) < dist(0, 2));
        assert!(dist(2, 3) < dist(1, 3));
    }

    #[test]
    fn separation_ratio_at_defaults() {
        let p = ClusterParams::default();
        let c = cluster_centers(p.p, p.classes, p.spread);
        for a in 0..p.classes {
            for b in a + 1..p.classes {
                let d = crate::prdc::euclidean(c.row(a), c.row(b));
                assert!(d / p.spread >= 8.0, "ratio {}", d / p.spread);
            }
        }
    }

    #[test]
    fn nearest_centroid_on_raw_inputs() {
        let p = ClusterParams::default();
        let train = gen_clusters(p.n_per_class, p.p, p.classes, p.spread, 0).unwrap();
        let test = gen_clusters_on(p, 0, Stream::HeldOutData).unwrap();
        let acc = nearest_centroid_accuracy(
            &train.inputs,
            &train.labels,
            &test.inputs,
            &test.labels,
            p.classes,
        );
        assert!(acc >= 0.99, "accuracy {acc}");
    }

    #[test]
    fn deterministic_and_validated() {
        assert_eq!(
            gen_clusters(3, 4, 2, 0.5, 9).unwrap(),
            gen_clusters(3, 4, 2, 0.5, 9).unwrap()
        );
        assert!(gen_clusters(1, 4, 2, 0.5, 0).is_err());
        assert!(gen_clusters(3, 2, 3, 0.5, 0).is_err());
        assert!(gen_clusters(3, 4, 2, 0.0, 0).is_err());
    }
}
