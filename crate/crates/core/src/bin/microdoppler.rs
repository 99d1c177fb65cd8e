use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use microdoppler::corruption::ResidualAccumulator;
use microdoppler::denoise::{CfarParams, GammaParams};
use microdoppler::gait::GaitProfile;
use microdoppler::metrics::PixelScale;
use microdoppler::pipeline::{
    evaluate, make_dataset, run_denoiser, tune_classical, ComparisonTable, DatasetConfig, DatasetManifest, DenoiseRun,
    ImageSource, Method, PerSubject, Split, TuneGrid, TunedParams,
};
use microdoppler::spectrogram::{from_image, StftParams};
use microdoppler::{Error, RadarConfig, Result};

#[derive(Parser)]
#[command(
    name = "microdoppler",
    version,
    about = "Micro-Doppler spectrogram simulation, denoising and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed (default 42)
    #[arg(long)]
    seed: Option<u64>,
    /// Output location
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate subjects and write clean/noisy image pairs with a manifest
    MakeDataset {
        #[command(flatten)]
        common: Common,
        /// Dataset size preset (default desk)
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Number of subjects
        #[arg(long)]
        subjects: Option<usize>,
        /// Recording length per subject in seconds
        #[arg(long)]
        seconds: Option<f64>,
        /// Number of training subjects
        #[arg(long)]
        train_subjects: Option<usize>,
        /// Training SNR levels in dB, comma separated
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr: Option<Vec<f64>>,
        /// Test and tune SNR levels in dB, cycled over slices
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        test_snr: Option<Vec<f64>>,
        /// Base gait profile (TOML) jittered per subject
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Denoise every test-split noisy image
    Denoise {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Dataset root or manifest.json
        #[arg(long)]
        manifest: PathBuf,
        /// CFAR guard cells per side
        #[arg(long)]
        guard: Option<usize>,
        /// CFAR training cells per side
        #[arg(long)]
        train: Option<usize>,
        /// CFAR false-alarm probability
        #[arg(long)]
        pfa: Option<f64>,
        /// Gamma exponent
        #[arg(long)]
        gamma: Option<f64>,
        /// Per-subject parameters written by `tune`
        #[arg(long)]
        tuned: Option<PathBuf>,
        /// Directory of externally denoised images keyed by entry id
        #[arg(long)]
        external: Option<PathBuf>,
    },
    /// Score denoised sets against clean references
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Dataset root or manifest.json
        #[arg(long)]
        manifest: PathBuf,
        /// Denoised directory, optionally as LABEL=DIR; repeatable
        #[arg(long)]
        denoised: Vec<String>,
        /// Add the no-denoising row
        #[arg(long)]
        baseline: bool,
        #[arg(long, value_enum)]
        pixel_scale: Option<ScaleArg>,
    },
    /// Per-subject grid search of classical parameters on the tune split
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: ClassicalArg,
        /// Dataset root or manifest.json
        #[arg(long)]
        manifest: PathBuf,
        /// Gamma grid, comma separated
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        /// CFAR guard grid
        #[arg(long, value_delimiter = ',')]
        guards: Option<Vec<usize>>,
        /// CFAR training grid
        #[arg(long, value_delimiter = ',')]
        trains: Option<Vec<usize>>,
        /// CFAR false-alarm grid
        #[arg(long, value_delimiter = ',')]
        pfas: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        pixel_scale: Option<ScaleArg>,
    },
    /// Histogram and moments of noisy minus clean (dB)
    ResidualStats {
        #[command(flatten)]
        common: Common,
        /// Dataset root or manifest.json
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
        /// Restrict to one SNR level
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 101)]
        bins: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Cfar,
    Gamma,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassicalArg {
    Cfar,
    Gamma,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Native16,
    Eight,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Tune,
    Test,
}

#[derive(Deserialize)]
#[serde(default)]
struct CfarSection {
    guard: usize,
    train: usize,
    pfa: f64,
}

impl Default for CfarSection {
    fn default() -> Self {
        Self {
            guard: 2,
            train: 4,
            pfa: 1e-2,
        }
    }
}

#[derive(Deserialize)]
#[serde(default)]
struct GammaSection {
    gamma: f64,
}

impl Default for GammaSection {
    fn default() -> Self {
        Self { gamma: 2.0 }
    }
}

#[derive(Deserialize)]
#[serde(default)]
struct TuneSection {
    gammas: Vec<f64>,
    guards: Vec<usize>,
    trains: Vec<usize>,
    pfas: Vec<f64>,
}

impl Default for TuneSection {
    fn default() -> Self {
        Self {
            gammas: vec![0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0],
            guards: vec![1, 2, 4],
            trains: vec![2, 4, 8],
            pfas: vec![0.3, 0.1, 1e-2, 1e-3],
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct FileConfig {
    seed: Option<u64>,
    pixel_scale: Option<PixelScale>,
    radar: RadarConfig,
    stft: StftParams,
    dataset: DatasetConfig,
    cfar: CfarSection,
    gamma: GammaSection,
    tune: TuneSection,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_owned(),
                    source: e,
                })?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    fn scale(&self, arg: Option<ScaleArg>) -> PixelScale {
        match arg {
            Some(ScaleArg::Native16) => PixelScale::Native16,
            Some(ScaleArg::Eight) => PixelScale::Eight,
            None => self.pixel_scale.unwrap_or_default(),
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_owned(),
            source: e,
        })?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MakeDataset {
            common,
            preset,
            subjects,
            seconds,
            train_subjects,
            snr,
            test_snr,
            profile,
        } => {
            let cfg = FileConfig::load(common.config.as_deref())?;
            let mut dataset = match preset {
                Some(Preset::Desk) => DatasetConfig::desk_scale(),
                Some(Preset::Full) => DatasetConfig::full_scale(),
                None => cfg.dataset.clone(),
            };
            if let Some(v) = subjects {
                dataset.n_subjects = v;
            }
            if let Some(v) = seconds {
                dataset.seconds_per_subject = v;
            }
            if let Some(v) = train_subjects {
                dataset.train_subjects = v;
            }
            if let Some(v) = snr {
                dataset.snr_levels_db = v;
            }
            if let Some(v) = test_snr {
                dataset.test_snr_levels_db = v;
            }
            if let Some(p) = profile {
                let text = fs::read_to_string(&p).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
                dataset.base_profile = Some(GaitProfile::load_toml(&text)?);
            }
            let seed = common.seed.or(cfg.seed).unwrap_or(42);
            let manifest = make_dataset(seed, &cfg.radar, &cfg.stft, &dataset, &common.out)?;
            let count = |s: Split| manifest.entries_in(s).count();
            println!(
                "wrote {} entries to {} (train {}, tune {}, test {})",
                manifest.entries.len(),
                common.out.display(),
                count(Split::Train),
                count(Split::Tune),
                count(Split::Test)
            );
        }
        Command::Denoise {
            common,
            method,
            manifest,
            guard,
            train,
            pfa,
            gamma,
            tuned,
            external,
        } => {
            let cfg = FileConfig::load(common.config.as_deref())?;
            let (m, root) = DatasetManifest::open(&manifest)?;
            let tuned: Option<TunedParams> = match tuned {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| Error::Io {
                        path: p.clone(),
                        source: e,
                    })?;
                    Some(serde_json::from_str(&text)?)
                }
                None => None,
            };
            let method = match method {
                MethodArg::Cfar => {
                    let params = CfarParams::new(
                        guard.unwrap_or(cfg.cfar.guard),
                        train.unwrap_or(cfg.cfar.train),
                        pfa.unwrap_or(cfg.cfar.pfa),
                        -m.range_db(),
                    )?;
                    Method::Cfar(match &tuned {
                        Some(t) => t
                            .cfar_params(params)
                            .ok_or_else(|| Error::Config("tuned file is not for cfar".into()))?,
                        None => PerSubject::uniform(params),
                    })
                }
                MethodArg::Gamma => {
                    let params = GammaParams::new(gamma.unwrap_or(cfg.gamma.gamma))?;
                    Method::Gamma(match &tuned {
                        Some(t) => t
                            .gamma_params(params)
                            .ok_or_else(|| Error::Config("tuned file is not for gamma".into()))?,
                        None => PerSubject::uniform(params),
                    })
                }
                MethodArg::External => {
                    Method::External(external.ok_or_else(|| Error::Config("--external <dir> is required".into()))?)
                }
            };
            let run = run_denoiser(&m, &root, &method, &common.out)?;
            match run.mean_millis() {
                Some(ms) => println!("{}: {} images, {ms:.2} ms/image", run.method, run.entries.len()),
                None => println!("{}: {} images", run.method, run.entries.len()),
            }
        }
        Command::Evaluate {
            common,
            manifest,
            denoised,
            baseline,
            pixel_scale,
        } => {
            let cfg = FileConfig::load(common.config.as_deref())?;
            let scale = cfg.scale(pixel_scale);
            let (m, root) = DatasetManifest::open(&manifest)?;
            let mut table = ComparisonTable::new(scale);
            let mut records = Vec::new();
            if baseline {
                let (row, recs) = evaluate(&m, &root, ImageSource::Noisy, "Noisy", scale)?;
                table.rows.push(row);
                records.extend(recs);
            }
            for spec in &denoised {
                let (label, dir) = match spec.split_once('=') {
                    Some((l, d)) => (l.to_owned(), PathBuf::from(d)),
                    None => {
                        let dir = PathBuf::from(spec);
                        let label = DenoiseRun::load(&dir)?
                            .map(|r| r.method)
                            .unwrap_or_else(|| spec.clone());
                        (label, dir)
                    }
                };
                let (row, recs) = evaluate(&m, &root, ImageSource::Dir(&dir), &label, scale)?;
                table.rows.push(row);
                records.extend(recs);
            }
            if table.rows.is_empty() {
                return Err(Error::Config(
                    "nothing to evaluate: pass --denoised or --baseline".into(),
                ));
            }
            table.write(&records, &common.out)?;
            print!("{}", table.to_tsv());
        }
        Command::Tune {
            common,
            method,
            manifest,
            gammas,
            guards,
            trains,
            pfas,
            pixel_scale,
        } => {
            let cfg = FileConfig::load(common.config.as_deref())?;
            let scale = cfg.scale(pixel_scale);
            let (m, root) = DatasetManifest::open(&manifest)?;
            let grid = match method {
                ClassicalArg::Gamma => TuneGrid::gamma(&gammas.unwrap_or(cfg.tune.gammas))?,
                ClassicalArg::Cfar => TuneGrid::cfar(
                    &guards.unwrap_or(cfg.tune.guards),
                    &trains.unwrap_or(cfg.tune.trains),
                    &pfas.unwrap_or(cfg.tune.pfas),
                    -m.range_db(),
                )?,
            };
            let tuned = tune_classical(&m, &root, &grid, scale)?;
            write_json(&common.out, &tuned)?;
            println!("{}", serde_json::to_string_pretty(&tuned)?);
        }
        Command::ResidualStats {
            common,
            manifest,
            split,
            snr,
            bins,
        } => {
            let (m, root) = DatasetManifest::open(&manifest)?;
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Tune => Split::Tune,
                SplitArg::Test => Split::Test,
            };
            let range = m.range_db();
            let mut acc = ResidualAccumulator::default();
            for e in m.entries_in(split).filter(|e| snr.is_none_or(|s| s == e.snr_db)) {
                let noisy = from_image(&m.load_noisy(&root, e)?, range);
                let clean = from_image(&m.load_clean(&root, e)?, range);
                acc.push_pair(&noisy, &clean)?;
            }
            let stats = acc.finish(bins)?;
            write_json(&common.out, &stats)?;
            println!(
                "pixels {} mean {:.4} dB std {:.4} dB skew {:.4} excess kurtosis {:.4}",
                stats.pixel_count, stats.mean_db, stats.std_db, stats.skewness, stats.excess_kurtosis
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
