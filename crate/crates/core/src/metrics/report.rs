use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::{image_ciede2000, psnr, ssim};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::synth::{Manifest, Split};

/// Token written for an infinite PSNR (identical images).
pub const INF_TOKEN: &str = "inf";

fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(INF_TOKEN)
    } else {
        s.serialize_f64(*v)
    }
}

pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        INF_TOKEN.to_string()
    } else {
        format!("{v:.4}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageMetrics {
    pub index: usize,
    pub name: String,
    #[serde(serialize_with = "ser_db")]
    pub psnr: f64,
    pub ssim: f64,
    pub ciede2000: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub parameters: usize,
    pub config_digest: String,
    pub rows: Vec<ImageMetrics>,
    #[serde(serialize_with = "ser_db")]
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub mean_ciede2000: f64,
    /// Rows that could not be read, with the reason.
    pub skipped: Vec<String>,
}

impl MetricsReport {
    /// Builds a report whose means are the arithmetic means of `rows`, summed
    /// in row order.
    pub fn new(
        parameters: usize,
        config_digest: String,
        rows: Vec<ImageMetrics>,
        skipped: Vec<String>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("no images were evaluated".into()));
        }
        let n = rows.len() as f64;
        let mean = |f: fn(&ImageMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            parameters,
            config_digest,
            mean_psnr: mean(|r| r.psnr),
            mean_ssim: mean(|r| r.ssim),
            mean_ciede2000: mean(|r| r.ciede2000),
            rows,
            skipped,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// Aligned summary table followed by per-image rows.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:>10} {:>8} {:>10}",
            "Parameters", "PSNR", "SSIM", "CIEDE2000"
        );
        let _ = writeln!(
            s,
            "{:<12} {:>10} {:>8.4} {:>10.4}",
            self.parameters,
            format_db(self.mean_psnr),
            self.mean_ssim,
            self.mean_ciede2000
        );
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<8} {:<24} {:>10} {:>8} {:>10}",
            "index", "image", "PSNR", "SSIM", "CIEDE2000"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<8} {:<24} {:>10} {:>8.4} {:>10.4}",
                r.index,
                r.name,
                format_db(r.psnr),
                r.ssim,
                r.ciede2000
            );
        }
        if !self.skipped.is_empty() {
            let _ = writeln!(s, "\nskipped {} rows", self.skipped.len());
            for k in &self.skipped {
                let _ = writeln!(s, "  {k}");
            }
        }
        let _ = writeln!(s, "config digest {}", self.config_digest);
        s
    }
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn config_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn image_metrics(index: usize, name: String, output: &Image, clean: &Image) -> Result<ImageMetrics> {
    Ok(ImageMetrics {
        index,
        name,
        psnr: psnr(output, clean)?,
        ssim: ssim(output, clean)?,
        ciede2000: image_ciede2000(output, clean)?,
    })
}

/// Runs `desmoke` on every smoky image of `split` and scores it against the
/// clean image. Unreadable rows are skipped and listed in the report.
pub fn evaluate_dataset<F>(
    root: impl AsRef<Path>,
    manifest: &Manifest,
    split: Split,
    parameters: usize,
    config_digest: String,
    desmoke: F,
) -> Result<MetricsReport>
where
    F: Fn(&Image) -> Result<Image> + Sync,
{
    let root = root.as_ref();
    let rows: Vec<_> = manifest.split(split).collect();
    if rows.is_empty() {
        return Err(Error::Data(format!("manifest has no {split} rows")));
    }
    let results: Vec<std::result::Result<ImageMetrics, String>> = rows
        .par_iter()
        .map(|row| {
            let load = |p: &str| Image::load_png(root.join(p)).map_err(|e| format!("{}: {e}", row.index));
            let syn = load(&row.syn)?;
            let clean = load(&row.clean)?;
            let out = desmoke(&syn).map_err(|e| format!("{}: {e}", row.index))?;
            image_metrics(row.index, row.syn.clone(), &out, &clean).map_err(|e| format!("{}: {e}", row.index))
        })
        .collect();
    let mut good = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(m) => good.push(m),
            Err(e) => {
                eprintln!("warning: skipping row {e}");
                skipped.push(e);
            }
        }
    }
    MetricsReport::new(parameters, config_digest, good, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, procedural_tissue, DensityTier, Source};

    #[test]
    fn identity_model_reproduces_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let sources: Vec<Source> = (0..4)
            .map(|i| Source {
                name: format!("{i}.png"),
                image: procedural_tissue(i, 16, 16),
            })
            .collect();
        let m = generate_dataset(&sources, dir.path(), 8, 2, DensityTier::Medium).unwrap();
        let report = evaluate_dataset(dir.path(), &m, Split::Test, 0, config_digest(""), |i| Ok(i.clone())).unwrap();
        assert!(!report.rows.is_empty());
        for r in &report.rows {
            let row = &m.rows[r.index];
            let syn = Image::load_png(dir.path().join(&row.syn)).unwrap();
            let clean = Image::load_png(dir.path().join(&row.clean)).unwrap();
            assert_eq!(r.psnr, psnr(&syn, &clean).unwrap());
        }
        let n = report.rows.len() as f64;
        assert_eq!(report.mean_ssim, report.rows.iter().map(|r| r.ssim).sum::<f64>() / n);
        assert!(report.to_json().contains("\"mean_ssim\""));
        assert!(report.to_table().starts_with("Parameters"));

        std::fs::remove_file(dir.path().join(&report.rows[0].name)).unwrap();
        let again = evaluate_dataset(dir.path(), &m, Split::Test, 0, String::new(), |i| Ok(i.clone())).unwrap();
        assert_eq!(again.skipped.len(), 1);
    }

    #[test]
    fn empty_manifest_is_an_error() {
        let r = evaluate_dataset(".", &Manifest::default(), Split::Test, 0, String::new(), |i| {
            Ok(i.clone())
        });
        assert!(r.is_err());
    }

    #[test]
    fn infinite_psnr_serializes_as_token() {
        let row = ImageMetrics {
            index: 0,
            name: "a".into(),
            psnr: f64::INFINITY,
            ssim: 1.0,
            ciede2000: 0.0,
        };
        let rep = MetricsReport::new(5, "d".into(), vec![row], vec![]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(v["mean_psnr"], INF_TOKEN);
        assert_eq!(v["rows"][0]["psnr"], INF_TOKEN);
    }
}
