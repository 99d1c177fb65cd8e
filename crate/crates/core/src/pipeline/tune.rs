use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, ManifestEntry, Split};
use super::run::{denoise_cfar, denoise_gamma, PerSubject};
use crate::denoise::{CfarParams, GammaParams};
use crate::error::{Error, Result};
use crate::metrics::{ssim, PixelScale};
use crate::spectrogram::SpectrumImage;

#[derive(Debug, Clone, PartialEq)]
pub enum TuneGrid {
    Cfar(Vec<CfarParams>),
    Gamma(Vec<GammaParams>),
}

impl TuneGrid {
    pub fn cfar(guards: &[usize], trainings: &[usize], pfas: &[f64], floor_db: f64) -> Result<Self> {
        let mut points = Vec::new();
        for &g in guards {
            for &t in trainings {
                for &p in pfas {
                    points.push(CfarParams::new(g, t, p, floor_db)?);
                }
            }
        }
        Ok(TuneGrid::Cfar(points))
    }

    pub fn gamma(gammas: &[f64]) -> Result<Self> {
        Ok(TuneGrid::Gamma(
            gammas.iter().map(|&g| GammaParams::new(g)).collect::<Result<_>>()?,
        ))
    }

    pub fn len(&self) -> usize {
        match self {
            TuneGrid::Cfar(v) => v.len(),
            TuneGrid::Gamma(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectChoice<P> {
    pub params: P,
    pub mean_ssim: f64,
    pub slices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TunedParams {
    Cfar {
        subjects: BTreeMap<usize, SubjectChoice<CfarParams>>,
    },
    Gamma {
        subjects: BTreeMap<usize, SubjectChoice<GammaParams>>,
    },
}

impl TunedParams {
    /// Per-subject parameters with `fallback` for subjects that were not tuned.
    pub fn cfar_params(&self, fallback: CfarParams) -> Option<PerSubject<CfarParams>> {
        match self {
            TunedParams::Cfar { subjects } => Some(PerSubject {
                default: fallback,
                subjects: subjects.iter().map(|(&s, c)| (s, c.params)).collect(),
            }),
            _ => None,
        }
    }

    pub fn gamma_params(&self, fallback: GammaParams) -> Option<PerSubject<GammaParams>> {
        match self {
            TunedParams::Gamma { subjects } => Some(PerSubject {
                default: fallback,
                subjects: subjects.iter().map(|(&s, c)| (s, c.params)).collect(),
            }),
            _ => None,
        }
    }
}

struct TunePair {
    noisy: SpectrumImage,
    clean: ndarray::Array2<f64>,
}

fn argmax<P: Copy + Send + Sync>(
    grid: &[P],
    pairs: &[TunePair],
    scale: PixelScale,
    denoise: impl Fn(&SpectrumImage, &P) -> Result<SpectrumImage> + Sync,
) -> Result<SubjectChoice<P>> {
    let scores: Vec<f64> = grid
        .par_iter()
        .map(|p| {
            let mut total = 0.0;
            for pair in pairs {
                let out = denoise(&pair.noisy, p)?;
                total += ssim(&pair.clean, &scale.plane(&out), scale.data_range())?;
            }
            Ok(total / pairs.len() as f64)
        })
        .collect::<Result<_>>()?;
    // first maximum wins so results do not depend on float ties
    let (best, &score) =
        scores.iter().enumerate().fold(
            (0, &f64::NEG_INFINITY),
            |acc, (i, s)| if *s > *acc.1 { (i, s) } else { acc },
        );
    Ok(SubjectChoice {
        params: grid[best],
        mean_ssim: score,
        slices: pairs.len(),
    })
}

/// Per-subject argmax-SSIM grid search over each held-out subject's tune
/// split. Test-split images are never read.
pub fn tune_classical(
    manifest: &DatasetManifest,
    root: &Path,
    grid: &TuneGrid,
    scale: PixelScale,
) -> Result<TunedParams> {
    if grid.is_empty() {
        return Err(Error::param("grid", "tuning grid is empty"));
    }
    let mut by_subject: BTreeMap<usize, Vec<&ManifestEntry>> = BTreeMap::new();
    for e in manifest.entries_in(Split::Tune) {
        by_subject.entry(e.subject_id).or_default().push(e);
    }
    if by_subject.is_empty() {
        return Err(Error::Dataset("manifest has no tune entries".into()));
    }
    let range = manifest.range_db();

    let mut cfar = BTreeMap::new();
    let mut gamma = BTreeMap::new();
    for (subject, entries) in by_subject {
        let pairs: Vec<TunePair> = entries
            .iter()
            .map(|e| {
                Ok(TunePair {
                    noisy: manifest.load_noisy(root, e)?,
                    clean: scale.plane(&manifest.load_clean(root, e)?),
                })
            })
            .collect::<Result<_>>()?;
        match grid {
            TuneGrid::Cfar(points) => {
                cfar.insert(
                    subject,
                    argmax(points, &pairs, scale, |img, p| denoise_cfar(img, p, range))?,
                );
            }
            TuneGrid::Gamma(points) => {
                gamma.insert(subject, argmax(points, &pairs, scale, denoise_gamma)?);
            }
        }
    }
    Ok(match grid {
        TuneGrid::Cfar(_) => TunedParams::Cfar { subjects: cfar },
        TuneGrid::Gamma(_) => TunedParams::Gamma { subjects: gamma },
    })
}
