//! Translation-objective terms over caller-supplied tensors, and the
//! weighted total.
//!
//! Each function covers a single discriminator or a single class pair; the
//! caller owns any sum over class pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-hot or soft class indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainCode(Vec<f64>);

impl DomainCode {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::invalid("domain code entries must be finite and >= 0"));
        }
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("domain code must sum to 1, sums to {s}")));
        }
        Ok(Self(v))
    }

    pub fn one_hot(class: usize, classes: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::invalid(format!("class {class} out of range 0..{classes}")));
        }
        let mut v = vec![0.0; classes];
        v[class] = 1.0;
        Ok(Self(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleCode(Vec<f64>);

impl StyleCode {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("style code entries must be finite"));
        }
        Ok(Self(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Patch realness scores, plus class logits for an auxiliary-classifier
/// discriminator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiscriminatorOutputs {
    pub realness: Vec<f64>,
    #[serde(default)]
    pub class_logits: Option<Vec<f64>>,
}

impl DiscriminatorOutputs {
    pub fn scores(realness: Vec<f64>) -> Self {
        Self {
            realness,
            class_logits: None,
        }
    }

    pub fn with_logits(realness: Vec<f64>, logits: Vec<f64>) -> Self {
        Self {
            realness,
            class_logits: Some(logits),
        }
    }
}

/// Regression targets for real and fake scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvTargets {
    pub real: f64,
    pub fake: f64,
}

impl Default for AdvTargets {
    fn default() -> Self {
        Self {
            real: 1.0,
            fake: 0.0,
        }
    }
}

fn half_mse_to(v: &[f64], target: f64) -> f64 {
    0.5 * v.iter().map(|x| (x - target).powi(2)).sum::<f64>() / v.len() as f64
}

/// Least-squares adversarial losses, returned as `(d_loss, g_loss)`.
pub fn lsgan_adv(
    real: &DiscriminatorOutputs,
    fake: &DiscriminatorOutputs,
    targets: AdvTargets,
) -> Result<(f64, f64)> {
    if real.realness.is_empty() || fake.realness.is_empty() {
        return Err(Error::invalid("discriminator score vectors must be non-empty"));
    }
    let d_loss = half_mse_to(&real.realness, targets.real) + half_mse_to(&fake.realness, targets.fake);
    let g_loss = half_mse_to(&fake.realness, targets.real);
    Ok((d_loss, g_loss))
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Shape("empty input".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Mean absolute difference over all entries (cycle and identity terms).
pub fn l1_loss(a: &[f64], b: &[f64]) -> Result<f64> {
    mean_abs_diff(a, b)
}

/// Mean absolute difference between a style code and its re-encoding.
pub fn regression_loss(c: &StyleCode, c_hat: &StyleCode) -> Result<f64> {
    mean_abs_diff(c.as_slice(), c_hat.as_slice())
}

/// `½ · mean((class_logits − z)²)`.
pub fn class_loss(out: &DiscriminatorOutputs, z: &DomainCode) -> Result<f64> {
    let logits = out
        .class_logits
        .as_ref()
        .ok_or_else(|| Error::invalid("discriminator outputs carry no class logits"))?;
    if logits.len() != z.as_slice().len() {
        return Err(Error::Shape(format!(
            "class logits have length {}, domain code {}",
            logits.len(),
            z.as_slice().len()
        )));
    }
    Ok(0.5
        * logits
            .iter()
            .zip(z.as_slice())
            .map(|(l, t)| (l - t).powi(2))
            .sum::<f64>()
        / logits.len() as f64)
}

/// Coefficients of the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_cycle: f64,
    pub lambda_idt: f64,
    pub lambda_reg: f64,
    pub lambda_idt_reg: f64,
    pub lambda_kl: f64,
    pub lambda_bkl: f64,
    pub lambda_corr_enc: f64,
    pub lambda_hist: f64,
    #[serde(default = "one")]
    pub lambda_class: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for LossWeights {
    /// Every term switched on at its reference value.
    fn default() -> Self {
        Self {
            lambda_cycle: 5.0,
            lambda_idt: 5.0,
            lambda_reg: 0.5,
            lambda_idt_reg: 0.5,
            lambda_kl: 0.1,
            lambda_bkl: 10.0,
            lambda_corr_enc: 100.0,
            lambda_hist: 100.0,
            lambda_class: 1.0,
        }
    }
}

impl LossWeights {
    pub fn zeros() -> Self {
        Self {
            lambda_cycle: 0.0,
            lambda_idt: 0.0,
            lambda_reg: 0.0,
            lambda_idt_reg: 0.0,
            lambda_kl: 0.0,
            lambda_bkl: 0.0,
            lambda_corr_enc: 0.0,
            lambda_hist: 0.0,
            lambda_class: 0.0,
        }
    }

    /// Conventional per-sample KL restriction only.
    pub fn conventional_kl() -> Self {
        Self {
            lambda_idt_reg: 0.0,
            lambda_bkl: 0.0,
            lambda_corr_enc: 0.0,
            lambda_hist: 0.0,
            ..Self::default()
        }
    }

    /// Batch KL, correlation and histogram restrictions in place of KL.
    pub fn proposed() -> Self {
        Self {
            lambda_idt_reg: 0.0,
            lambda_kl: 0.0,
            ..Self::default()
        }
    }

    /// Named presets: `default`, `conventional`, `proposed`, `zeros`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default()),
            "conventional" | "conventional_kl" => Some(Self::conventional_kl()),
            "proposed" => Some(Self::proposed()),
            "zeros" => Some(Self::zeros()),
            _ => None,
        }
    }

    fn iter(&self) -> [(&'static str, f64); 9] {
        [
            ("lambda_cycle", self.lambda_cycle),
            ("lambda_idt", self.lambda_idt),
            ("lambda_reg", self.lambda_reg),
            ("lambda_idt_reg", self.lambda_idt_reg),
            ("lambda_kl", self.lambda_kl),
            ("lambda_bkl", self.lambda_bkl),
            ("lambda_corr_enc", self.lambda_corr_enc),
            ("lambda_hist", self.lambda_hist),
            ("lambda_class", self.lambda_class),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.iter() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Pre-summed loss terms fed to [`total_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossComponents {
    pub adv: f64,
    pub cycle: f64,
    pub idt: f64,
    pub reg: f64,
    pub idt_reg: f64,
    pub class: f64,
    pub kl: f64,
    pub bkl: f64,
    pub corr_enc: f64,
    pub hist: f64,
}

impl LossComponents {
    pub fn splat(v: f64) -> Self {
        Self {
            adv: v,
            cycle: v,
            idt: v,
            reg: v,
            idt_reg: v,
            class: v,
            kl: v,
            bkl: v,
            corr_enc: v,
            hist: v,
        }
    }
}

pub fn total_loss(c: &LossComponents, w: &LossWeights) -> Result<f64> {
    w.validate()?;
    let terms = [
        ("adv", c.adv, 1.0),
        ("cycle", c.cycle, w.lambda_cycle),
        ("idt", c.idt, w.lambda_idt),
        ("reg", c.reg, w.lambda_reg),
        ("idt_reg", c.idt_reg, w.lambda_idt_reg),
        ("class", c.class, w.lambda_class),
        ("kl", c.kl, w.lambda_kl),
        ("bkl", c.bkl, w.lambda_bkl),
        ("corr_enc", c.corr_enc, w.lambda_corr_enc),
        ("hist", c.hist, w.lambda_hist),
    ];
    let mut total = 0.0;
    for (name, v, lambda) in terms {
        if !v.is_finite() {
            return Err(Error::invalid(format!("component {name} is not finite: {v}")));
        }
        total += lambda * v;
    }
    Ok(total)
}
