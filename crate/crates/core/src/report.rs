//! Report bundles: JSON summaries, CSV tables and SVG figures.
//!
//! Output bytes depend only on the report contents, never on the output
//! directory, time or environment.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::histogram::{gaussian_reference, SoftHistogram};
use crate::lab::{ExperimentConfig, ExperimentReport};
use crate::numeric::CorrMatrix;
use crate::prdc::PrdcScores;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: Value,
    /// Artifact file names relative to the bundle directory.
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub manifest: Manifest,
    pub dir: PathBuf,
    pub paths: Vec<PathBuf>,
    pub summary: Value,
}

/// What [`emit_report`] can render.
pub enum ReportInput<'a> {
    Experiment {
        report: &'a ExperimentReport,
        config: Option<&'a ExperimentConfig>,
    },
    Prdc(&'a PrdcScores),
}

struct Writer<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.names.push(name.to_string());
        Ok(())
    }
}

fn pretty(v: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn emit_report(input: &ReportInput<'_>, dir: &Path) -> Result<ReportBundle> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = Writer {
        dir,
        names: Vec::new(),
    };
    let (seed, config, summary) = match input {
        ReportInput::Experiment { report, config } => {
            write_experiment(&mut w, report)?;
            let config = match config {
                Some(c) => serde_json::to_value(c)?,
                None => Value::Null,
            };
            (Some(report.seed), config, experiment_summary(report))
        }
        ReportInput::Prdc(scores) => {
            w.put("scores.json", pretty(scores)?)?;
            let config = json!({ "k": scores.k });
            (None, config, serde_json::to_value(scores)?)
        }
    };
    let manifest = Manifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        seed,
        config,
        artifacts: w.names.clone(),
    };
    w.put("manifest.json", pretty(&manifest)?)?;
    let paths = w.names.iter().map(|n| dir.join(n)).collect();
    Ok(ReportBundle {
        manifest,
        dir: dir.to_path_buf(),
        paths,
        summary,
    })
}

fn experiment_summary(r: &ExperimentReport) -> Value {
    json!({
        "condition": r.condition,
        "seed": r.seed,
        "with_pretraining": r.with_pretraining,
        "min_std": r.min_std(),
        "max_std": r.max_std(),
        "corr_mean_abs_off_identity": r.corr_mean_abs_off_identity,
        "hist_kl_mean": r.hist_kl_mean,
        "classifier_accuracy": r.classifier_accuracy,
        "class_retention_accuracy": r.class_retention_accuracy,
        "final_loss": r.loss_trace.last(),
    })
}

fn write_experiment(w: &mut Writer<'_>, r: &ExperimentReport) -> Result<()> {
    w.put("report.json", pretty(r)?)?;

    let mut stats = String::from("dim,mean,std,hist_kl\n");
    for d in 0..r.dims() {
        let _ = writeln!(stats, "{d},{:?},{:?},{:?}", r.stats.mean[d], r.stats.std[d], r.hist_kl[d]);
    }
    w.put("stats.csv", stats)?;
    w.put("corr.csv", corr_csv(&r.corr))?;

    let mut trace = String::from("step,loss\n");
    for (i, v) in r.loss_trace.iter().enumerate() {
        let _ = writeln!(trace, "{i},{v:?}");
    }
    w.put("loss_trace.csv", trace)?;

    for (d, h) in r.histograms.iter().enumerate() {
        w.put(&format!("hist_dim{d}.csv"), histogram_csv(h))?;
    }
    w.put("histograms.svg", histograms_svg(&r.histograms))?;
    w.put("corr.svg", corr_svg(&r.corr))?;
    Ok(())
}

pub fn histogram_csv(h: &SoftHistogram) -> String {
    let mut s = String::from("center,freq\n");
    for (c, f) in h.centers.iter().zip(&h.freqs) {
        let _ = writeln!(s, "{c:?},{f:?}");
    }
    s
}

pub fn corr_csv(c: &CorrMatrix) -> String {
    let mut s = String::new();
    for p in 0..c.dim() {
        let row: Vec<String> = (0..c.dim()).map(|q| format!("{:?}", c.get(p, q))).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

const PANEL_W: f64 = 240.0;
const PANEL_H: f64 = 140.0;

/// One bar chart per dimension with the N(0, 1) reference overlaid.
pub fn histograms_svg(hists: &[SoftHistogram]) -> String {
    let cols = 4usize;
    let rows = hists.len().div_ceil(cols).max(1);
    let width = cols as f64 * PANEL_W;
    let height = rows as f64 * PANEL_H;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for (d, h) in hists.iter().enumerate() {
        let ox = (d % cols) as f64 * PANEL_W;
        let oy = (d / cols) as f64 * PANEL_H;
        let reference = gaussian_reference(&h.spec);
        let peak = h
            .freqs
            .iter()
            .chain(&reference.freqs)
            .cloned()
            .fold(0.0, f64::max)
            .max(1e-12);
        let plot_w = PANEL_W - 20.0;
        let plot_h = PANEL_H - 36.0;
        let bar_w = plot_w / h.freqs.len() as f64;
        let base = oy + 20.0 + plot_h;
        let _ = writeln!(s, r#"<g id="dim{d}">"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">feature {d}</text>"#,
            ox + 10.0,
            oy + 14.0
        );
        for (k, f) in h.freqs.iter().enumerate() {
            let bh = f / peak * plot_h;
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4c72b0"/>"##,
                ox + 10.0 + k as f64 * bar_w,
                base - bh,
                bar_w.max(0.5),
                bh
            );
        }
        let pts: Vec<String> = reference
            .freqs
            .iter()
            .enumerate()
            .map(|(k, f)| {
                format!(
                    "{:.2},{:.2}",
                    ox + 10.0 + (k as f64 + 0.5) * bar_w,
                    base - f / peak * plot_h
                )
            })
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#dd8452" stroke-width="1.5"/>"##,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="#333333"/>"##,
            ox + 10.0,
            ox + 10.0 + plot_w
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

/// Heat map of `|CorrMat|`, darker for larger magnitude.
pub fn corr_svg(c: &CorrMatrix) -> String {
    let d = c.dim();
    let cell = 32.0;
    let size = d as f64 * cell + 40.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for p in 0..d {
        for q in 0..d {
            let v = c.get(p, q).abs().clamp(0.0, 1.0);
            let shade = (255.0 * (1.0 - v)).round() as u8;
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{cell}" height="{cell}" fill="#{shade:02x}{shade:02x}ff" stroke="#cccccc"><title>{p},{q}: {:.4}</title></rect>"##,
                20.0 + q as f64 * cell,
                20.0 + p as f64 * cell,
                c.get(p, q)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::{soft_hist, HistogramSpec};

    #[test]
    fn prdc_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let scores = PrdcScores {
            precision: 0.5,
            recall: 0.25,
            density: 1.5,
            coverage: 0.75,
            k: 5,
            n_real: 10,
            n_fake: 12,
        };
        let b = emit_report(&ReportInput::Prdc(&scores), dir.path()).unwrap();
        assert!(b.paths.iter().all(|p| p.exists()));
        let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("scores.json")).unwrap()).unwrap();
        for key in ["precision", "recall", "density", "coverage"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn histogram_csv_rows() {
        let spec = HistogramSpec::new(1.0, 0.0, 2, 0.1).unwrap();
        let h = soft_hist(&[0.25], &spec).unwrap();
        let csv = histogram_csv(&h);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("center,freq\n0.25,"));
    }

    #[test]
    fn svg_is_well_formed_ish() {
        let spec = HistogramSpec::default();
        let h = soft_hist(&[0.0, 1.0], &spec).unwrap();
        let svg = histograms_svg(&[h.clone(), h]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<g id=").count(), 2);
    }
}
