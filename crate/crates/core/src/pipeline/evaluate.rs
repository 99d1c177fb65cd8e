use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, ManifestEntry, Split};
use super::run::{denoised_path, DenoiseRun};
use crate::error::{Error, Result};
use crate::metrics::{compare_images, inf_as_string, MetricsReport, PixelScale};
use crate::spectrogram::{Orientation, SpectrumImage};

#[derive(Debug, Clone, Copy)]
pub enum ImageSource<'a> {
    /// `<dir>/<entry id>.png`, as written by `run_denoiser`.
    Dir(&'a Path),
    /// The noisy inputs themselves: the no-denoising baseline.
    Noisy,
    Clean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub model: String,
    pub id: String,
    pub subject_id: usize,
    pub gait_index: usize,
    pub orientation: Orientation,
    pub snr_tag: String,
    #[serde(flatten)]
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub count: usize,
    pub ssim: f64,
    #[serde(with = "inf_as_string")]
    pub psnr_db: f64,
    pub mse: f64,
    pub vif: f64,
}

impl MeanMetrics {
    fn from_reports<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> Self {
        let mut m = MeanMetrics::default();
        for r in reports {
            m.count += 1;
            m.ssim += r.ssim;
            m.psnr_db += r.psnr_db;
            m.mse += r.mse;
            m.vif += r.vif;
        }
        if m.count > 0 {
            let n = m.count as f64;
            m.ssim /= n;
            m.psnr_db /= n;
            m.mse /= n;
            m.vif /= n;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub model: String,
    pub mean: MeanMetrics,
    pub runtime_ms_per_image: Option<f64>,
    pub per_subject: BTreeMap<usize, MeanMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub pixel_scale: PixelScale,
    pub data_range: f64,
    pub rows: Vec<MethodSummary>,
}

fn load_source(
    manifest: &DatasetManifest,
    root: &Path,
    source: ImageSource<'_>,
    e: &ManifestEntry,
) -> Result<SpectrumImage> {
    match source {
        ImageSource::Dir(dir) => SpectrumImage::load_png(&denoised_path(dir, e)),
        ImageSource::Noisy => manifest.load_noisy(root, e),
        ImageSource::Clean => manifest.load_clean(root, e),
    }
}

/// Scores every test entry of `source` against its clean counterpart.
pub fn evaluate(
    manifest: &DatasetManifest,
    root: &Path,
    source: ImageSource<'_>,
    model: &str,
    scale: PixelScale,
) -> Result<(MethodSummary, Vec<EntryRecord>)> {
    let entries: Vec<&ManifestEntry> = manifest.entries_in(Split::Test).collect();
    if entries.is_empty() {
        return Err(Error::Dataset("manifest has no test entries".into()));
    }
    if let ImageSource::Dir(dir) = source {
        let missing: Vec<String> = entries
            .iter()
            .filter(|e| !denoised_path(dir, e).is_file())
            .map(|e| e.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingEntries(missing));
        }
    }

    let records: Vec<EntryRecord> = entries
        .par_iter()
        .map(|e| {
            let clean = manifest.load_clean(root, e)?;
            let candidate = load_source(manifest, root, source, e)?;
            Ok(EntryRecord {
                model: model.to_owned(),
                id: e.id.clone(),
                subject_id: e.subject_id,
                gait_index: e.gait_index,
                orientation: e.orientation,
                snr_tag: e.snr_tag.clone(),
                metrics: compare_images(&clean, &candidate, scale)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut by_subject: BTreeMap<usize, Vec<&MetricsReport>> = BTreeMap::new();
    for r in &records {
        by_subject.entry(r.subject_id).or_default().push(&r.metrics);
    }
    let runtime = match source {
        ImageSource::Dir(dir) => DenoiseRun::load(dir)?.and_then(|r| r.mean_millis()),
        _ => None,
    };
    let summary = MethodSummary {
        model: model.to_owned(),
        mean: MeanMetrics::from_reports(records.iter().map(|r| &r.metrics)),
        runtime_ms_per_image: runtime,
        per_subject: by_subject
            .into_iter()
            .map(|(s, v)| (s, MeanMetrics::from_reports(v)))
            .collect(),
    };
    Ok((summary, records))
}

fn fmt_psnr(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_owned()
    } else {
        format!("{v:.2}")
    }
}

impl ComparisonTable {
    pub fn new(scale: PixelScale) -> Self {
        Self {
            pixel_scale: scale,
            data_range: scale.data_range(),
            rows: Vec::new(),
        }
    }

    pub fn row(&self, model: &str) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.model == model)
    }

    /// Tab-separated table with columns `Model SSIM PSNR(dB) MSE VIF`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("Model\tSSIM\tPSNR(dB)\tMSE\tVIF\n");
        for r in &self.rows {
            let m = &r.mean;
            let _ = writeln!(
                out,
                "{}\t{:.4}\t{}\t{:.1}\t{:.5}",
                r.model,
                m.ssim,
                fmt_psnr(m.psnr_db),
                m.mse,
                m.vif
            );
        }
        out
    }

    /// Writes `table.tsv`, `comparison.json` and `records.jsonl` into `dir`.
    pub fn write(&self, records: &[EntryRecord], dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(path, e))
        };
        write("table.tsv", self.to_tsv())?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        write("comparison.json", json)?;
        let mut lines = String::new();
        for r in records {
            lines.push_str(&serde_json::to_string(r)?);
            lines.push('\n');
        }
        write("records.jsonl", lines)
    }
}
