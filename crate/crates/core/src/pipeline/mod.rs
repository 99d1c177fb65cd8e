//! Dataset generation, denoiser runs, evaluation and classical tuning.
//!
//! Layout of a dataset root:
//!
//! ```text
//! <root>/manifest.json
//! <root>/clean/<subject>/<gait>_<orient>.png
//! <root>/noisy/<snr>/<subject>/<gait>_<orient>.png
//! ```

mod evaluate;
mod generate;
mod manifest;
mod run;
mod tune;

pub use evaluate::{evaluate, ComparisonTable, EntryRecord, ImageSource, MeanMetrics, MethodSummary};
pub use generate::{clean_slices, make_dataset, plan_subjects};
pub use manifest::*;
pub use run::{
    denoise_cfar, denoise_gamma, denoised_path, run_denoiser, DenoiseRun, EntryTiming, Method, PerSubject, RUN_FILE,
};
pub use tune::{tune_classical, SubjectChoice, TuneGrid, TunedParams};
