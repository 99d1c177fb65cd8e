use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::manifest::*;
use crate::corruption::{add_awgn, stream_seed, NoiseSpec};
use crate::error::{Error, Result};
use crate::gait::{synthesize_baseband, GaitProfile};
use crate::radar::RadarConfig;
use crate::spectrogram::{
    normalize_gait, quantize, resize_slice, segment_half_gaits, stft_spectrogram, Orientation, SnrTag, Spectrogram,
    StftParams,
};

// Stream tags keep every random draw independent of work order.
const STREAM_PROFILE: u64 = 0;
const STREAM_RECORDING: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_TUNE_RECORDING: u64 = 3;

/// Normalized, image-sized clean half-gait slices of one recording.
pub fn clean_slices(
    profile: &GaitProfile,
    radar: &RadarConfig,
    stft: &StftParams,
    dataset: &DatasetConfig,
    seconds: f64,
    seed: u64,
) -> Result<Vec<Spectrogram>> {
    let signal = synthesize_baseband(profile, radar, seconds, seed)?;
    let spec = stft_spectrogram(&signal, radar, stft)?;
    segment_half_gaits(&spec, profile.half_gait_duration_s)?
        .iter()
        .map(|s| resize_slice(&normalize_gait(s, dataset.dynamic_range_db)?, dataset.image_size))
        .collect()
}

pub fn plan_subjects(seed: u64, dataset: &DatasetConfig) -> Vec<SubjectRecord> {
    (0..dataset.n_subjects)
        .map(|id| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &[STREAM_PROFILE, id as u64]));
            let profile = match &dataset.base_profile {
                Some(base) => base.jittered(&mut rng, dataset.half_gait_range_s),
                None => {
                    let speed = rng.random_range(1.4..=1.6);
                    GaitProfile::default_walker(speed, 0.5).jittered(&mut rng, dataset.half_gait_range_s)
                }
            };
            let split = if id < dataset.train_subjects {
                Split::Train
            } else {
                Split::Test
            };
            SubjectRecord {
                subject_id: id,
                split,
                profile,
                recording_seed: stream_seed(seed, &[STREAM_RECORDING, id as u64]),
                tune_recording_seed: (split == Split::Test && dataset.tune_seconds > 0.0)
                    .then(|| stream_seed(seed, &[STREAM_TUNE_RECORDING, id as u64])),
            }
        })
        .collect()
}

struct Recording<'a> {
    subject: &'a SubjectRecord,
    split: Split,
    seconds: f64,
    seed: u64,
    first_gait: usize,
}

/// Simulates every subject, writes clean and noisy PNGs under `out_dir`
/// and the manifest at its root. Output depends only on the arguments.
pub fn make_dataset(
    seed: u64,
    radar: &RadarConfig,
    stft: &StftParams,
    dataset: &DatasetConfig,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    dataset.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let subjects = plan_subjects(seed, dataset);

    let per_subject: Vec<Vec<ManifestEntry>> = subjects
        .par_iter()
        .map(|subject| -> Result<Vec<ManifestEntry>> {
            let main = Recording {
                subject,
                split: subject.split,
                seconds: dataset.seconds_per_subject,
                seed: subject.recording_seed,
                first_gait: 0,
            };
            let mut entries = write_recording(&main, seed, radar, stft, dataset, out_dir)?;
            if let Some(tune_seed) = subject.tune_recording_seed {
                let tune = Recording {
                    subject,
                    split: Split::Tune,
                    seconds: dataset.tune_seconds,
                    seed: tune_seed,
                    first_gait: entries.iter().map(|e| e.gait_index + 1).max().unwrap_or(0),
                };
                entries.extend(write_recording(&tune, seed, radar, stft, dataset, out_dir)?);
            }
            Ok(entries)
        })
        .collect::<Result<_>>()?;

    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        generation_config: GenerationConfig {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            seed,
            radar: *radar,
            stft: *stft,
            dataset: dataset.clone(),
            subjects,
        },
        entries: per_subject.into_iter().flatten().collect(),
    };
    manifest.validate(None)?;
    manifest.save(out_dir)?;
    Ok(manifest)
}

fn write_recording(
    rec: &Recording<'_>,
    seed: u64,
    radar: &RadarConfig,
    stft: &StftParams,
    dataset: &DatasetConfig,
    out_dir: &Path,
) -> Result<Vec<ManifestEntry>> {
    let subject_id = rec.subject.subject_id;
    let slices = clean_slices(&rec.subject.profile, radar, stft, dataset, rec.seconds, rec.seed)?;
    let mut entries = Vec::new();
    for (k, slice) in slices.iter().enumerate() {
        let gait_index = rec.first_gait + k;
        let orientation = slice.orientation.unwrap_or(Orientation::for_slice(k));
        let clean_rel = clean_rel_path(subject_id, gait_index, orientation);
        write_image(slice, &out_dir.join(&clean_rel))?;

        let levels: Vec<(usize, f64)> = match rec.split {
            Split::Train => dataset.snr_levels_db.iter().copied().enumerate().collect(),
            Split::Test | Split::Tune => {
                let levels = dataset.test_levels();
                let idx = k % levels.len();
                vec![(idx, levels[idx])]
            }
        };
        for (level_idx, snr_db) in levels {
            let tag = SnrTag::Db(snr_db);
            let noise_seed = stream_seed(
                seed,
                &[STREAM_NOISE, subject_id as u64, gait_index as u64, level_idx as u64],
            );
            let noisy = add_awgn(slice, &NoiseSpec::new(snr_db, noise_seed)?)?;
            let noisy_rel = noisy_rel_path(subject_id, gait_index, orientation, &tag);
            write_image(&noisy, &out_dir.join(&noisy_rel))?;
            entries.push(ManifestEntry {
                id: entry_id(subject_id, gait_index, orientation, &tag),
                subject_id,
                gait_index,
                orientation,
                snr_tag: tag.label(),
                snr_db,
                noise_seed,
                split: rec.split,
                clean_path: clean_rel.clone(),
                noisy_path: noisy_rel,
            });
        }
    }
    Ok(entries)
}

fn write_image(slice: &Spectrogram, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    quantize(slice)?.save_png(path)
}
