use std::fs;
use std::path::Path;

use microdoppler::denoise::{CfarParams, GammaParams};
use microdoppler::metrics::PixelScale;
use microdoppler::pipeline::*;
use microdoppler::spectrogram::{segment_half_gaits, Spectrogram, StftParams};
use microdoppler::{Error, RadarConfig};
use ndarray::Array2;

fn small_config() -> DatasetConfig {
    DatasetConfig {
        n_subjects: 3,
        seconds_per_subject: 3.0,
        train_subjects: 2,
        tune_seconds: 2.0,
        half_gait_range_s: [0.5, 0.5],
        ..DatasetConfig::desk_scale()
    }
}

fn build(dir: &Path, cfg: &DatasetConfig, seed: u64) -> DatasetManifest {
    make_dataset(seed, &RadarConfig::default(), &StftParams::default(), cfg, dir).unwrap()
}

#[test]
fn dataset_layout_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let m = build(dir.path(), &small_config(), 1);
    // 3 s at 0.5 s half gait: 6 slices per recording, 4 in the 2 s tuning recording
    assert_eq!(m.entries_in(Split::Train).count(), 2 * 6 * 3);
    assert_eq!(m.entries_in(Split::Test).count(), 6);
    assert_eq!(m.entries_in(Split::Tune).count(), 4);
    m.validate(Some(dir.path())).unwrap();

    let e = m.entries_in(Split::Test).next().unwrap();
    assert_eq!(e.clean_path, "clean/s02/0000_L.png");
    assert_eq!(e.noisy_path, "noisy/10dB/s02/0000_L.png");
    assert_eq!(e.id, "s02_0000_L_10dB");
    let test_levels: Vec<&str> = m.entries_in(Split::Test).map(|e| e.snr_tag.as_str()).collect();
    assert_eq!(test_levels, ["10dB", "5dB", "0dB", "10dB", "5dB", "0dB"]);

    let tune_gaits: Vec<usize> = m.entries_in(Split::Tune).map(|e| e.gait_index).collect();
    assert_eq!(tune_gaits, [6, 7, 8, 9]);

    let img = m.load_noisy(dir.path(), e).unwrap();
    assert_eq!((img.width(), img.height()), (256, 256));
    assert!(img.is_gray());

    let (reloaded, root) = DatasetManifest::open(dir.path()).unwrap();
    assert_eq!(reloaded, m);
    assert_eq!(root, dir.path());
}

#[test]
fn single_subject_one_second() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig {
        n_subjects: 1,
        seconds_per_subject: 1.0,
        train_subjects: 0,
        tune_seconds: 0.0,
        half_gait_range_s: [0.5, 0.5],
        ..DatasetConfig::desk_scale()
    };
    let m = build(dir.path(), &cfg, 3);
    let clean: std::collections::BTreeSet<_> = m.entries.iter().map(|e| e.clean_path.clone()).collect();
    assert_eq!(clean.len(), 2);
}

#[test]
fn invalid_split_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig {
        train_subjects: 3,
        ..small_config()
    };
    let err = make_dataset(1, &RadarConfig::default(), &StftParams::default(), &cfg, dir.path());
    assert!(matches!(
        err,
        Err(Error::InvalidParameter {
            name: "train_subjects",
            ..
        })
    ));
}

#[test]
fn slice_count_arithmetic() {
    // frames at 4 ms: desk preset 30 s and the full 180 s recordings
    let spec = |cols| {
        let mut s = Spectrogram::from_values(Array2::zeros((4, cols)), RadarConfig::default());
        s.hop = 16;
        s
    };
    let desk = segment_half_gaits(&spec(7_500), 0.5).unwrap().len();
    assert_eq!(6 * desk, 360);
    let full = segment_half_gaits(&spec(45_000), 0.5).unwrap().len();
    assert_eq!(full, 360);
    assert_eq!(15 * full * 3, 16_200);
    assert_eq!(7 * full, 2_520);
}

#[test]
fn manifest_validation_catches_problems() {
    let dir = tempfile::tempdir().unwrap();
    let m = build(dir.path(), &small_config(), 2);

    let mut leaked = m.clone();
    let idx = leaked.entries.iter().position(|e| e.split == Split::Test).unwrap();
    leaked.entries[idx].split = Split::Train;
    assert!(matches!(leaked.validate(None), Err(Error::Dataset(_))));

    let mut short = m.clone();
    let idx = short.entries.iter().position(|e| e.split == Split::Train).unwrap();
    short.entries.remove(idx);
    assert!(short.validate(None).is_err());

    let mut mismatched = m.clone();
    mismatched.entries[0].clean_path = "clean/s09/0000_L.png".into();
    assert!(mismatched.validate(None).is_err());

    fs::remove_file(dir.path().join(&m.entries[0].noisy_path)).unwrap();
    assert!(m.validate(Some(dir.path())).is_err());
}

#[test]
fn denoise_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    let m = build(&root, &small_config(), 4);

    // gamma 1 leaves the PNGs byte-identical
    let out = dir.path().join("gamma1");
    let gamma1 = Method::Gamma(PerSubject::uniform(GammaParams::new(1.0).unwrap()));
    let run = run_denoiser(&m, &root, &gamma1, &out).unwrap();
    assert_eq!(run.entries.len(), 6);
    for e in m.entries_in(Split::Test) {
        let a = fs::read(root.join(&e.noisy_path)).unwrap();
        let b = fs::read(denoised_path(&out, e)).unwrap();
        assert_eq!(a, b);
    }

    let cfar_out = dir.path().join("cfar");
    let cfar = Method::Cfar(PerSubject::uniform(CfarParams::new(2, 4, 1e-2, -45.0).unwrap()));
    let run = run_denoiser(&m, &root, &cfar, &cfar_out).unwrap();
    assert!(run.entries.iter().all(|t| t.millis.is_some()));
    for e in m.entries_in(Split::Test) {
        assert!(denoised_path(&cfar_out, e).is_file());
    }
    assert_eq!(DenoiseRun::load(&cfar_out).unwrap().unwrap().method, "CFAR");

    let scale = PixelScale::Native16;
    let (noisy_row, _) = evaluate(&m, &root, ImageSource::Noisy, "Noisy", scale).unwrap();
    let (passthrough, _) = evaluate(&m, &root, ImageSource::Dir(&out), "Passthrough", scale).unwrap();
    assert_eq!(noisy_row.mean, passthrough.mean);
    assert!(passthrough.runtime_ms_per_image.is_some());

    let (clean_row, records) = evaluate(&m, &root, ImageSource::Clean, "Clean", scale).unwrap();
    assert_eq!(clean_row.mean.ssim, 1.0);
    assert_eq!(clean_row.mean.mse, 0.0);
    assert_eq!(clean_row.mean.psnr_db, f64::INFINITY);
    assert_eq!(records.len(), 6);
    assert_eq!(clean_row.per_subject.len(), 1);

    let mut table = ComparisonTable::new(scale);
    table.rows.push(noisy_row);
    table.rows.push(clean_row);
    let tsv = table.to_tsv();
    assert!(tsv.starts_with("Model\tSSIM\tPSNR(dB)\tMSE\tVIF\n"));
    assert!(tsv.contains("Clean\t1.0000\tinf\t0.0\t1.00000"));
    let report_dir = dir.path().join("report");
    table.write(&records, &report_dir).unwrap();
    let lines = fs::read_to_string(report_dir.join("records.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 6);
    let parsed: ComparisonTable =
        serde_json::from_str(&fs::read_to_string(report_dir.join("comparison.json")).unwrap()).unwrap();
    assert_eq!(parsed.rows.len(), 2);
}

#[test]
fn external_method() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    let m = build(&root, &small_config(), 5);

    let ext = dir.path().join("ext");
    fs::create_dir_all(&ext).unwrap();
    let test: Vec<_> = m.entries_in(Split::Test).collect();
    for e in &test[1..] {
        fs::copy(root.join(&e.clean_path), denoised_path(&ext, e)).unwrap();
    }
    let out = dir.path().join("ext_out");
    match run_denoiser(&m, &root, &Method::External(ext.clone()), &out) {
        Err(Error::MissingEntries(ids)) => assert_eq!(ids, vec![test[0].id.clone()]),
        other => panic!("expected missing entries, got {other:?}"),
    }
    fs::copy(root.join(&test[0].clean_path), denoised_path(&ext, test[0])).unwrap();
    let run = run_denoiser(&m, &root, &Method::External(ext), &out).unwrap();
    assert!(run.entries.iter().all(|t| t.millis.is_none()));
    let (row, _) = evaluate(&m, &root, ImageSource::Dir(&out), "External", PixelScale::Native16).unwrap();
    assert_eq!(row.mean.ssim, 1.0);
    assert_eq!(row.mean.mse, 0.0);
    assert_eq!(row.runtime_ms_per_image, None);

    let incomplete = dir.path().join("incomplete");
    fs::create_dir_all(&incomplete).unwrap();
    assert!(matches!(
        evaluate(&m, &root, ImageSource::Dir(&incomplete), "x", PixelScale::Native16),
        Err(Error::MissingEntries(ids)) if ids.len() == 6
    ));
}

#[test]
fn tuning_uses_only_tune_split() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig {
        n_subjects: 4,
        train_subjects: 1,
        test_snr_levels_db: vec![0.0],
        ..small_config()
    };
    let m = build(dir.path(), &cfg, 6);
    // no test image may be needed for tuning
    for e in m.entries_in(Split::Test) {
        fs::remove_file(dir.path().join(&e.noisy_path)).unwrap();
    }

    let grid = TuneGrid::gamma(&[0.5, 1.0, 2.0, 3.0]).unwrap();
    let tuned = tune_classical(&m, dir.path(), &grid, PixelScale::Native16).unwrap();
    let TunedParams::Gamma { subjects } = &tuned else {
        panic!("wrong method")
    };
    assert_eq!(subjects.keys().copied().collect::<Vec<_>>(), [1, 2, 3]);
    for choice in subjects.values() {
        assert!(choice.params.gamma > 1.0, "{choice:?}");
        assert_eq!(choice.slices, 4);
    }

    let single = TuneGrid::cfar(&[1], &[3], &[0.1], -45.0).unwrap();
    let TunedParams::Cfar { subjects } = tune_classical(&m, dir.path(), &single, PixelScale::Native16).unwrap() else {
        panic!("wrong method")
    };
    let only = CfarParams::new(1, 3, 0.1, -45.0).unwrap();
    assert!(subjects.values().all(|c| c.params == only));

    assert!(tune_classical(&m, dir.path(), &TuneGrid::Gamma(vec![]), PixelScale::Native16).is_err());

    let json = serde_json::to_string(&tuned).unwrap();
    let back: TunedParams = serde_json::from_str(&json).unwrap();
    assert_eq!(back, tuned);
    let per_subject = back.gamma_params(GammaParams::new(1.0).unwrap()).unwrap();
    assert!(per_subject.for_subject(2).gamma > 1.0);
    assert_eq!(per_subject.for_subject(0).gamma, 1.0);
}
