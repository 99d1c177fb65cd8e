use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, ManifestEntry, Split};
use crate::denoise::{apply_cfar, gamma_correct, CfarParams, GammaParams};
use crate::error::{Error, Result};
use crate::spectrogram::{image_to_slice, quantize, SpectrumImage};

pub const RUN_FILE: &str = "denoise.json";

/// Classical parameters, optionally overridden per subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSubject<P> {
    pub default: P,
    #[serde(default)]
    pub subjects: BTreeMap<usize, P>,
}

impl<P: Clone> PerSubject<P> {
    pub fn uniform(default: P) -> Self {
        Self {
            default,
            subjects: BTreeMap::new(),
        }
    }

    pub fn for_subject(&self, subject: usize) -> &P {
        self.subjects.get(&subject).unwrap_or(&self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Cfar(PerSubject<CfarParams>),
    Gamma(PerSubject<GammaParams>),
    /// Images produced elsewhere, as `<dir>/<entry id>.png`.
    External(PathBuf),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Cfar(_) => "CFAR",
            Method::Gamma(_) => "Gamma",
            Method::External(_) => "External",
        }
    }
}

/// Denoises one noisy image with a classical method.
pub fn denoise_cfar(noisy: &SpectrumImage, params: &CfarParams, range_db: f64) -> Result<SpectrumImage> {
    let slice = image_to_slice(noisy, range_db, Default::default());
    let params = CfarParams {
        floor_db: params.floor_db.max(-range_db),
        ..*params
    };
    let mut out = quantize(&apply_cfar(&slice, &params)?)?;
    out.meta = noisy.meta.clone();
    Ok(out)
}

pub fn denoise_gamma(noisy: &SpectrumImage, params: &GammaParams) -> Result<SpectrumImage> {
    gamma_correct(noisy, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryTiming {
    pub id: String,
    /// Wall-clock inference time; absent for external results without timing.
    pub millis: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseRun {
    pub method: String,
    pub split: Split,
    pub params: serde_json::Value,
    pub entries: Vec<EntryTiming>,
}

impl DenoiseRun {
    pub fn mean_millis(&self) -> Option<f64> {
        let times: Vec<f64> = self.entries.iter().filter_map(|e| e.millis).collect();
        (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64)
    }

    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(RUN_FILE);
        if !path.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(path, e))?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(RUN_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn denoised_path(dir: &Path, entry: &ManifestEntry) -> PathBuf {
    dir.join(format!("{}.png", entry.id))
}

/// Writes one denoised image per test entry into `out_dir` (keyed by entry
/// id) plus a `denoise.json` with per-image timing.
pub fn run_denoiser(manifest: &DatasetManifest, root: &Path, method: &Method, out_dir: &Path) -> Result<DenoiseRun> {
    let entries: Vec<&ManifestEntry> = manifest.entries_in(Split::Test).collect();
    if entries.is_empty() {
        return Err(Error::Dataset("manifest has no test entries".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let range = manifest.range_db();

    let timings: Vec<EntryTiming> = match method {
        Method::External(src) => {
            let missing: Vec<String> = entries
                .iter()
                .filter(|e| !denoised_path(src, e).is_file())
                .map(|e| e.id.clone())
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingEntries(missing));
            }
            let source_times: BTreeMap<String, Option<f64>> = DenoiseRun::load(src)?
                .map(|r| r.entries.into_iter().map(|t| (t.id, t.millis)).collect())
                .unwrap_or_default();
            let same_dir = fs::canonicalize(src).ok() == fs::canonicalize(out_dir).ok();
            entries
                .iter()
                .map(|e| {
                    if !same_dir {
                        let (from, to) = (denoised_path(src, e), denoised_path(out_dir, e));
                        fs::copy(&from, &to).map_err(|err| Error::io(from, err))?;
                    }
                    Ok(EntryTiming {
                        id: e.id.clone(),
                        millis: source_times.get(&e.id).copied().flatten(),
                    })
                })
                .collect::<Result<_>>()?
        }
        _ => entries
            .par_iter()
            .map(|e| {
                let noisy = manifest.load_noisy(root, e)?;
                let start = Instant::now();
                let out = match method {
                    Method::Cfar(p) => denoise_cfar(&noisy, p.for_subject(e.subject_id), range)?,
                    Method::Gamma(p) => denoise_gamma(&noisy, p.for_subject(e.subject_id))?,
                    Method::External(_) => unreachable!(),
                };
                let millis = start.elapsed().as_secs_f64() * 1e3;
                out.save_png(&denoised_path(out_dir, e))?;
                Ok(EntryTiming {
                    id: e.id.clone(),
                    millis: Some(millis),
                })
            })
            .collect::<Result<_>>()?,
    };

    let params = match method {
        Method::Cfar(p) => serde_json::to_value(p)?,
        Method::Gamma(p) => serde_json::to_value(p)?,
        Method::External(src) => serde_json::json!({ "source": src.display().to_string() }),
    };
    let run = DenoiseRun {
        method: method.name().to_owned(),
        split: Split::Test,
        params,
        entries: timings,
    };
    run.save(out_dir)?;
    Ok(run)
}
