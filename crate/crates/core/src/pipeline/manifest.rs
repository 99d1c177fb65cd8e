use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::GaitProfile;
use crate::radar::RadarConfig;
use crate::spectrogram::{Orientation, SnrTag, SpectrumImage, StftParams};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    /// Extra recordings of test subjects, reserved for classical parameter tuning.
    Tune,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_subjects: usize,
    pub seconds_per_subject: f64,
    pub train_subjects: usize,
    /// Length of the separate tuning recording made for every test subject.
    pub tune_seconds: f64,
    pub snr_levels_db: Vec<f64>,
    /// Levels cycled over test and tune slices; empty means `snr_levels_db`.
    pub test_snr_levels_db: Vec<f64>,
    pub dynamic_range_db: f64,
    pub image_size: usize,
    /// Per-subject half-gait duration is drawn uniformly from this range.
    pub half_gait_range_s: [f64; 2],
    /// Base profile jittered per subject; `None` uses the default walker.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_profile: Option<GaitProfile>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self::desk_scale()
    }
}

impl DatasetConfig {
    /// 22 subjects, 180 s each, 15 for training.
    pub fn full_scale() -> Self {
        Self {
            n_subjects: 22,
            seconds_per_subject: 180.0,
            train_subjects: 15,
            tune_seconds: 10.0,
            ..Self::desk_scale()
        }
    }

    /// 6 subjects, 30 s each, 4 for training.
    pub fn desk_scale() -> Self {
        Self {
            n_subjects: 6,
            seconds_per_subject: 30.0,
            train_subjects: 4,
            tune_seconds: 6.0,
            snr_levels_db: vec![10.0, 5.0, 0.0],
            test_snr_levels_db: Vec::new(),
            dynamic_range_db: 45.0,
            image_size: crate::spectrogram::IMAGE_SIZE,
            half_gait_range_s: crate::gait::HALF_GAIT_RANGE_S,
            base_profile: None,
        }
    }

    pub fn test_levels(&self) -> &[f64] {
        if self.test_snr_levels_db.is_empty() {
            &self.snr_levels_db
        } else {
            &self.test_snr_levels_db
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::param("n_subjects", "must be >= 1"));
        }
        if self.train_subjects >= self.n_subjects {
            return Err(Error::param(
                "train_subjects",
                format!(
                    "must be < n_subjects ({}), got {}",
                    self.n_subjects, self.train_subjects
                ),
            ));
        }
        if !(self.seconds_per_subject > 0.0) || !(self.tune_seconds >= 0.0) {
            return Err(Error::param("seconds_per_subject", "durations must be positive"));
        }
        if self.snr_levels_db.is_empty() {
            return Err(Error::param("snr_levels_db", "need at least one SNR level"));
        }
        if self
            .snr_levels_db
            .iter()
            .chain(&self.test_snr_levels_db)
            .any(|v| !v.is_finite())
        {
            return Err(Error::param("snr_levels_db", "levels must be finite"));
        }
        if !(self.dynamic_range_db > 0.0) {
            return Err(Error::param("dynamic_range_db", "must be positive"));
        }
        let [lo, hi] = self.half_gait_range_s;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::param("half_gait_range_s", format!("invalid range [{lo}, {hi}]")));
        }
        if self.image_size < 16 {
            return Err(Error::param("image_size", "must be >= 16"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: usize,
    pub split: Split,
    pub profile: GaitProfile,
    pub recording_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_recording_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub tool: String,
    pub tool_version: String,
    pub seed: u64,
    pub radar: RadarConfig,
    pub stft: StftParams,
    pub dataset: DatasetConfig,
    pub subjects: Vec<SubjectRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub subject_id: usize,
    pub gait_index: usize,
    pub orientation: Orientation,
    pub snr_tag: String,
    pub snr_db: f64,
    pub noise_seed: u64,
    pub split: Split,
    pub clean_path: String,
    pub noisy_path: String,
}

impl ManifestEntry {
    pub fn snr(&self) -> SnrTag {
        SnrTag::Db(self.snr_db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub generation_config: GenerationConfig,
    pub entries: Vec<ManifestEntry>,
}

pub fn subject_dir(subject_id: usize) -> String {
    format!("s{subject_id:02}")
}

pub fn slice_file(gait_index: usize, orientation: Orientation) -> String {
    format!("{gait_index:04}_{orientation}.png")
}

pub fn entry_id(subject_id: usize, gait_index: usize, orientation: Orientation, snr: &SnrTag) -> String {
    format!(
        "{}_{gait_index:04}_{orientation}_{}",
        subject_dir(subject_id),
        snr.label()
    )
}

pub fn clean_rel_path(subject_id: usize, gait_index: usize, orientation: Orientation) -> String {
    format!(
        "clean/{}/{}",
        subject_dir(subject_id),
        slice_file(gait_index, orientation)
    )
}

pub fn noisy_rel_path(subject_id: usize, gait_index: usize, orientation: Orientation, snr: &SnrTag) -> String {
    format!(
        "noisy/{}/{}/{}",
        snr.label(),
        subject_dir(subject_id),
        slice_file(gait_index, orientation)
    )
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Loads `<root>/manifest.json`, or the file itself when given one.
    pub fn open(path: &Path) -> Result<(Self, PathBuf)> {
        let (file, root) = if path.is_dir() {
            (path.join(MANIFEST_FILE), path.to_owned())
        } else {
            (path.to_owned(), path.parent().map(Path::to_owned).unwrap_or_default())
        };
        Ok((Self::load(&file)?, root))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let path = root.join(MANIFEST_FILE);
        fs::write(&path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn range_db(&self) -> f64 {
        self.generation_config.dataset.dynamic_range_db
    }

    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn subjects_in(&self, split: Split) -> BTreeSet<usize> {
        self.entries_in(split).map(|e| e.subject_id).collect()
    }

    pub fn load_clean(&self, root: &Path, entry: &ManifestEntry) -> Result<SpectrumImage> {
        SpectrumImage::load_png(&root.join(&entry.clean_path))
    }

    pub fn load_noisy(&self, root: &Path, entry: &ManifestEntry) -> Result<SpectrumImage> {
        SpectrumImage::load_png(&root.join(&entry.noisy_path))
    }

    /// Checks split hygiene, pairing consistency and SNR coverage. With
    /// `check_files`, also confirms every referenced image exists.
    pub fn validate(&self, root: Option<&Path>) -> Result<()> {
        let fail = |m: String| Err(Error::Dataset(m));
        let train = self.subjects_in(Split::Train);
        let held_out: BTreeSet<usize> = self
            .subjects_in(Split::Test)
            .union(&self.subjects_in(Split::Tune))
            .copied()
            .collect();
        if let Some(s) = train.intersection(&held_out).next() {
            return fail(format!("subject {s} appears in both train and held-out splits"));
        }

        let mut ids = BTreeSet::new();
        let mut train_levels: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
        for e in &self.entries {
            if !ids.insert(e.id.as_str()) {
                return fail(format!("duplicate entry id {}", e.id));
            }
            let tag = e.snr();
            if e.clean_path != clean_rel_path(e.subject_id, e.gait_index, e.orientation)
                || e.noisy_path != noisy_rel_path(e.subject_id, e.gait_index, e.orientation, &tag)
                || e.snr_tag != tag.label()
            {
                return fail(format!("entry {} does not match its clean counterpart layout", e.id));
            }
            if e.split == Split::Train {
                train_levels
                    .entry((e.subject_id, e.gait_index))
                    .or_default()
                    .push(e.snr_tag.clone());
            }
            if let Some(root) = root {
                for p in [&e.clean_path, &e.noisy_path] {
                    if !root.join(p).is_file() {
                        return fail(format!("entry {} references missing file {p}", e.id));
                    }
                }
            }
        }
        let mut expected: Vec<String> = self
            .generation_config
            .dataset
            .snr_levels_db
            .iter()
            .map(|&v| SnrTag::Db(v).label())
            .collect();
        expected.sort();
        for ((subject, gait), mut levels) in train_levels {
            levels.sort();
            if levels != expected {
                return fail(format!(
                    "train slice s{subject:02}/{gait:04} carries SNR levels {levels:?}, expected {expected:?}"
                ));
            }
        }
        Ok(())
    }
}
