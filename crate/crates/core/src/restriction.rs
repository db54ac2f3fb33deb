//! Encoded-feature restriction losses.
//!
//! Every loss takes a batch of encoded features and returns its value
//! together with the gradient with respect to that batch. Values are
//! normalized per batch (means over samples, sums or means over dimensions
//! as noted on each function), never summed over the dataset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{
    gaussian_reference, hist_kl, hist_kl_grad_p, soft_hist_with_grad, HistogramSpec,
};
use crate::numeric::stats::standardize;
use crate::numeric::{
    column_stats, finite_diff_grad, max_relative_error, seeded_standard_normal, FeatureBatch,
    Matrix, STD_FLOOR,
};
use crate::translation::LossWeights;

/// A loss value with its gradient with respect to the input batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: Matrix,
}

impl LossEval {
    fn zero(n: usize, d: usize) -> Self {
        Self {
            value: 0.0,
            grad: Matrix::zeros(n, d),
        }
    }

    fn add_scaled(&mut self, k: f64, other: &LossEval) {
        self.value += k * other.value;
        self.grad.axpy(k, &other.grad);
    }
}

/// Per-sample posterior parameters of a VAE-style encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeMoments {
    pub mu: FeatureBatch,
    pub logvar: FeatureBatch,
}

impl VaeMoments {
    pub fn new(mu: FeatureBatch, logvar: FeatureBatch) -> Result<Self> {
        if mu.as_matrix().shape() != logvar.as_matrix().shape() {
            return Err(Error::Shape("mu and logvar shapes differ".into()));
        }
        Ok(Self { mu, logvar })
    }
}

/// Value and gradients of the per-sample KL term.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentsLossEval {
    pub value: f64,
    pub grad_mu: Matrix,
    pub grad_logvar: Matrix,
}

/// Per-sample `KL(N(mu, exp(logvar)) ‖ N(0, I))`, summed over dimensions and
/// averaged over the batch.
pub fn conventional_kl(m: &VaeMoments) -> MomentsLossEval {
    let (n, d) = (m.mu.n(), m.mu.d());
    let inv_n = 1.0 / n as f64;
    let mut value = 0.0;
    let mut grad_mu = Matrix::zeros(n, d);
    let mut grad_logvar = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let mu = m.mu.get(i, j);
            let lv = m.logvar.get(i, j);
            let ev = lv.exp();
            value += 0.5 * (mu * mu + ev - lv - 1.0);
            grad_mu.set(i, j, mu * inv_n);
            grad_logvar.set(i, j, 0.5 * (ev - 1.0) * inv_n);
        }
    }
    MomentsLossEval {
        value: (value * inv_n).max(0.0),
        grad_mu,
        grad_logvar,
    }
}

/// [`conventional_kl`] for deterministic features: the batch is read as
/// `mu` with `logvar = 0`, giving `(1/N) Σ_i ½‖f_i‖²`.
pub fn conventional_kl_features(b: &FeatureBatch) -> LossEval {
    let (n, d) = (b.n(), b.d());
    let inv_n = 1.0 / n as f64;
    let value = 0.5 * inv_n * b.as_slice().iter().map(|v| v * v).sum::<f64>();
    let mut grad = b.as_matrix().clone();
    grad.scale(inv_n);
    debug_assert_eq!(grad.shape(), (n, d));
    LossEval { value, grad }
}

/// KL between the Gaussian fitted to the batch's per-dimension moments and
/// N(0, I): `½ Σ_d (m_d² + s_d² − ln s_d² − 1)`, with `s_d` floored at
/// [`STD_FLOOR`].
pub fn batch_kl(b: &FeatureBatch) -> Result<LossEval> {
    b.require_rows(2, "batch_kl")?;
    let stats = column_stats(b)?;
    let (n, d) = (b.n(), b.d());
    let inv_n = 1.0 / n as f64;
    let mut value = 0.0;
    // ∂value/∂x_ij = m_j/N + (1 − 1/s_j²)(x_ij − m_j)/N, the second term
    // vanishing where the floor is active.
    let mut spread_coef = vec![0.0; d];
    for j in 0..d {
        let m = stats.mean[j];
        let raw = stats.std[j];
        let s = raw.max(STD_FLOOR);
        let s2 = s * s;
        value += 0.5 * (m * m + s2 - s2.ln() - 1.0);
        if raw > STD_FLOOR {
            spread_coef[j] = (1.0 - 1.0 / s2) * inv_n;
        }
    }
    let mut grad = Matrix::zeros(n, d);
    for i in 0..n {
        let row = b.row(i);
        let out = grad.row_mut(i);
        for j in 0..d {
            out[j] = stats.mean[j] * inv_n + spread_coef[j] * (row[j] - stats.mean[j]);
        }
    }
    Ok(LossEval {
        value: value.max(0.0),
        grad,
    })
}

/// `mean |CorrMat(b) − I|` over all `D²` entries (the diagonal contributes
/// zero). The subgradient of `|·|` at 0 is taken as 0.
pub fn correlation_loss(b: &FeatureBatch) -> Result<LossEval> {
    b.require_rows(2, "correlation_loss")?;
    if b.d() < 2 {
        return Err(Error::Shape(format!(
            "correlation_loss needs at least 2 dimensions, got {}",
            b.d()
        )));
    }
    let st = standardize(b)?;
    let (n, d) = (b.n(), b.d());
    let inv_d2 = 1.0 / (d * d) as f64;
    let inv_n = 1.0 / n as f64;

    let mut value = 0.0;
    // Each off-diagonal pair appears twice in the D² mean.
    let mut weight = Matrix::zeros(d, d);
    for p in 0..d {
        for q in 0..d {
            if p == q {
                continue;
            }
            let c = st.corr.get(p, q).clamp(-1.0, 1.0);
            value += c.abs();
            let sign = if c > 0.0 {
                1.0
            } else if c < 0.0 {
                -1.0
            } else {
                0.0
            };
            weight.set(p, q, 2.0 * sign * inv_d2);
        }
    }
    value *= inv_d2;

    // ∂C_pq/∂x_ip = (z_iq − C_pq z_ip) / (N s_p); the C_pq z_ip term comes
    // from ∂s_p, which is zero where the floor is active.
    let floored: Vec<bool> = st.stats.std.iter().map(|&s| s <= STD_FLOOR).collect();
    let mut grad = Matrix::zeros(n, d);
    for i in 0..n {
        let z = st.z.row(i);
        let out = grad.row_mut(i);
        for p in 0..d {
            let mut acc = 0.0;
            for q in 0..d {
                let w = weight.get(p, q);
                if w == 0.0 {
                    continue;
                }
                let mut t = z[q];
                if !floored[p] {
                    t -= st.corr.get(p, q) * z[p];
                }
                acc += w * t;
            }
            out[p] = acc * inv_n / st.scale[p];
        }
    }
    Ok(LossEval { value, grad })
}

/// Mean over dimensions of `KL(GH(column) ‖ GH(N(0, 1)))`.
pub fn histogram_imitation_loss(b: &FeatureBatch, spec: &HistogramSpec) -> Result<LossEval> {
    let (n, d) = (b.n(), b.d());
    let reference = gaussian_reference(spec);
    let inv_d = 1.0 / d as f64;
    let mut value = 0.0;
    let mut grad = Matrix::zeros(n, d);
    for j in 0..d {
        let col = b.column(j);
        let (hist, jac) = soft_hist_with_grad(&col, spec)?;
        value += hist_kl(&hist, &reference)?;
        let dkl = hist_kl_grad_p(&hist, &reference)?;
        for (k, &g) in dkl.iter().enumerate() {
            for (i, &jv) in jac.row(k).iter().enumerate() {
                grad.add_at(i, j, g * jv);
            }
        }
    }
    grad.scale(inv_d);
    Ok(LossEval {
        value: value * inv_d,
        grad,
    })
}

/// `λ_bKL·L_bKL + λ_corr_enc·L_corr_enc + λ_hist·L_hist`. Terms with a zero
/// weight are skipped, so a one-dimensional batch is accepted when
/// `λ_corr_enc = 0`.
pub fn combined_restriction(
    b: &FeatureBatch,
    weights: &LossWeights,
    spec: &HistogramSpec,
) -> Result<LossEval> {
    weights.validate()?;
    let mut out = LossEval::zero(b.n(), b.d());
    if weights.lambda_bkl != 0.0 {
        out.add_scaled(weights.lambda_bkl, &batch_kl(b)?);
    }
    if weights.lambda_corr_enc != 0.0 {
        out.add_scaled(weights.lambda_corr_enc, &correlation_loss(b)?);
    }
    if weights.lambda_hist != 0.0 {
        out.add_scaled(weights.lambda_hist, &histogram_imitation_loss(b, spec)?);
    }
    Ok(out)
}

/// The full feature-side objective used by the toy lab:
/// `λ_KL·L_KL` (features as `mu`, `logvar = 0`) plus [`combined_restriction`].
pub fn feature_objective(
    b: &FeatureBatch,
    weights: &LossWeights,
    spec: &HistogramSpec,
) -> Result<LossEval> {
    let mut out = combined_restriction(b, weights, spec)?;
    if weights.lambda_kl != 0.0 {
        out.add_scaled(weights.lambda_kl, &conventional_kl_features(b));
    }
    Ok(out)
}

/// Largest finite-difference disagreement per loss over a set of seeded
/// batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub batches: usize,
    pub n: usize,
    pub d: usize,
    pub step: f64,
    pub conventional_kl: f64,
    pub batch_kl: f64,
    pub correlation_loss: f64,
    pub histogram_imitation_loss: f64,
    /// Batches skipped for the correlation loss because some `|C_pq|` sat
    /// within [`KINK_MARGIN`] of the `|·|` kink.
    pub correlation_skipped: usize,
}

pub const KINK_MARGIN: f64 = 1e-6;

/// Compares every analytic gradient with [`finite_diff_grad`] on batches
/// drawn from N(0, I) with seeds `seed..seed + batches`.
pub fn check_gradients(
    seed: u64,
    batches: usize,
    n: usize,
    d: usize,
    step: f64,
    spec: &HistogramSpec,
) -> Result<GradCheckReport> {
    let mut r = GradCheckReport {
        batches,
        n,
        d,
        step,
        conventional_kl: 0.0,
        batch_kl: 0.0,
        correlation_loss: 0.0,
        histogram_imitation_loss: 0.0,
        correlation_skipped: 0,
    };
    for s in seed..seed + batches as u64 {
        let b = seeded_standard_normal(n, d, s)?;

        let lv = seeded_standard_normal(n, d, s ^ 0x5eed)?.map_columns(|_, v| 0.5 * v)?;
        let kl = conventional_kl(&VaeMoments::new(b.clone(), lv.clone())?);
        let fd_mu = finite_diff_grad(
            |x| Ok(conventional_kl(&VaeMoments::new(x.clone(), lv.clone())?).value),
            &b,
            step,
        )?;
        let fd_lv = finite_diff_grad(
            |x| Ok(conventional_kl(&VaeMoments::new(b.clone(), x.clone())?).value),
            &lv,
            step,
        )?;
        r.conventional_kl = r
            .conventional_kl
            .max(max_relative_error(&kl.grad_mu, &fd_mu))
            .max(max_relative_error(&kl.grad_logvar, &fd_lv));

        let bkl = batch_kl(&b)?;
        let fd = finite_diff_grad(|x| Ok(batch_kl(x)?.value), &b, step)?;
        r.batch_kl = r.batch_kl.max(max_relative_error(&bkl.grad, &fd));

        if d >= 2 {
            let near_kink = {
                let c = crate::numeric::corr_mat(&b)?;
                (0..d).any(|p| (0..d).any(|q| p != q && c.get(p, q).abs() < KINK_MARGIN))
            };
            if near_kink {
                r.correlation_skipped += 1;
            } else {
                let corr = correlation_loss(&b)?;
                let fd = finite_diff_grad(|x| Ok(correlation_loss(x)?.value), &b, step)?;
                r.correlation_loss = r.correlation_loss.max(max_relative_error(&corr.grad, &fd));
            }
        }

        let hist = histogram_imitation_loss(&b, spec)?;
        let fd = finite_diff_grad(|x| Ok(histogram_imitation_loss(x, spec)?.value), &b, step)?;
        r.histogram_imitation_loss = r
            .histogram_imitation_loss
            .max(max_relative_error(&hist.grad, &fd));
    }
    Ok(r)
}
