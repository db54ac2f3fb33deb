use serde::{Deserialize, Serialize};

use super::{FeatureBatch, Matrix};
use crate::error::Result;

/// Floor applied to per-column standard deviations before dividing by them.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-column batch moments. `std` uses the population convention
/// (divisor `N`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn column_stats(b: &FeatureBatch) -> Result<ColumnStats> {
    b.require_rows(1, "column_stats")?;
    let (n, d) = (b.n(), b.d());
    let inv_n = 1.0 / n as f64;
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(b.row(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m *= inv_n);
    let mut var = vec![0.0; d];
    for i in 0..n {
        for ((v, x), m) in var.iter_mut().zip(b.row(i)).zip(&mean) {
            let c = x - m;
            *v += c * c;
        }
    }
    let std = var.into_iter().map(|v| (v * inv_n).sqrt()).collect();
    Ok(ColumnStats { mean, std })
}

/// Pearson correlation matrix of a batch's columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrMatrix {
    pub m: Matrix,
}

impl CorrMatrix {
    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.m.get(p, q)
    }

    /// `mean |C − I|` over all `D²` entries.
    pub fn mean_abs_off_identity(&self) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for p in 0..d {
            for q in 0..d {
                let target = if p == q { 1.0 } else { 0.0 };
                acc += (self.get(p, q) - target).abs();
            }
        }
        acc / (d * d) as f64
    }
}

/// Standardized columns `(x − mean) / max(std, STD_FLOOR)` along with the
/// moments they came from and the unclamped correlation entries.
pub(crate) struct Standardized {
    pub stats: ColumnStats,
    /// Floored standard deviations.
    pub scale: Vec<f64>,
    pub z: Matrix,
    /// Raw `cov / (s_p s_q)` without diagonal forcing or clamping.
    pub corr: Matrix,
}

pub(crate) fn standardize(b: &FeatureBatch) -> Result<Standardized> {
    b.require_rows(2, "correlation")?;
    let stats = column_stats(b)?;
    let (n, d) = (b.n(), b.d());
    let scale: Vec<f64> = stats.std.iter().map(|s| s.max(STD_FLOOR)).collect();
    let mut z = Matrix::zeros(n, d);
    for i in 0..n {
        let row = b.row(i);
        let out = z.row_mut(i);
        for j in 0..d {
            out[j] = (row[j] - stats.mean[j]) / scale[j];
        }
    }
    let mut corr = z.t_matmul(&z);
    corr.scale(1.0 / n as f64);
    Ok(Standardized {
        stats,
        scale,
        z,
        corr,
    })
}

/// `m[p,q] = cov(p, q) / (s_p s_q)` with `s` floored at [`STD_FLOOR`];
/// the diagonal is exactly 1 and off-diagonal entries are clamped to
/// `[−1, 1]` and symmetrized.
pub fn corr_mat(b: &FeatureBatch) -> Result<CorrMatrix> {
    let st = standardize(b)?;
    let d = b.d();
    let mut m = Matrix::zeros(d, d);
    for p in 0..d {
        m.set(p, p, 1.0);
        for q in p + 1..d {
            let v = st.corr.get(p, q).clamp(-1.0, 1.0);
            m.set(p, q, v);
            m.set(q, p, v);
        }
    }
    Ok(CorrMatrix { m })
}
