//! Experiment runner: grids, per-trial records, summaries and output files.

pub mod emit;
pub mod experiments;
pub mod stats;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::audio::{load_wav, DelaySpec, DistortionKind, PcmSignal};
use crate::auth::{AttackKind, CodeParams, ProtocolConfig, Stage, TUNED_GUARD_SECS};
use crate::datalink::{AlphaStrategy, ArqPolicy, SyncPattern};
use crate::error::{Error, Result};
use crate::watermark::{
    validate_alpha, Backend, ChannelCalibration, ChannelCondition, Condition, FrameChannel,
    IdleModel, SpreadSpectrumChannel, StatisticalChannel,
};

pub use emit::{read_csv, read_jsonl, write_csv, write_jsonl, write_plot_data, Format, Tabular};
pub use experiments::{replay, run_experiment, AblationConfig, ExperimentReport};
pub use stats::{wilson_interval, Rate, Spread};

pub const COVERAGES: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BitAccuracy,
    SyncEval,
    Ablation,
    ProtocolStages,
    RetryComparison,
    Timing,
    Attacks,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::BitAccuracy,
        ExperimentKind::SyncEval,
        ExperimentKind::Ablation,
        ExperimentKind::ProtocolStages,
        ExperimentKind::RetryComparison,
        ExperimentKind::Timing,
        ExperimentKind::Attacks,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::BitAccuracy => "bit_accuracy",
            ExperimentKind::SyncEval => "sync_eval",
            ExperimentKind::Ablation => "ablation",
            ExperimentKind::ProtocolStages => "protocol_stages",
            ExperimentKind::RetryComparison => "retry_comparison",
            ExperimentKind::Timing => "timing",
            ExperimentKind::Attacks => "attacks",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::Parse(format!("unknown experiment {s:?}")))
    }
}

/// Clean plus every distortion kind at each coverage level.
pub fn full_grid() -> Vec<ChannelCondition> {
    let mut grid = vec![ChannelCondition::clean()];
    for kind in DistortionKind::DISTORTIONS {
        grid.extend(COVERAGES.iter().map(|&c| ChannelCondition::new(kind, c)));
    }
    grid
}

/// Clean plus every distortion kind at one coverage level.
pub fn grid_at(coverage: f64) -> Vec<ChannelCondition> {
    let mut grid = vec![ChannelCondition::clean()];
    grid.extend(
        DistortionKind::DISTORTIONS
            .iter()
            .map(|&k| ChannelCondition::new(k, coverage)),
    );
    grid
}

/// Everything needed to run (and rerun) one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    pub backend: Backend,
    pub conditions: Vec<ChannelCondition>,
    pub alphas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Output stem; `.csv`, `.jsonl` and `_summary.csv` are appended.
    pub output: Option<PathBuf>,
    /// Calibration table; the bundled one when absent.
    pub calibration: Option<PathBuf>,
    /// Mean burst length in frames; enables the Gilbert-Elliott channel.
    pub burst_frames: Option<f64>,
    /// Directory of 8 kHz mono WAV carriers for the spread-spectrum backend.
    pub corpus: Option<PathBuf>,
    pub delay: DelaySpec,
    pub idle: IdleModel,
    pub protocol: ProtocolConfig,
    pub patterns: Vec<SyncPattern>,
    pub bits_per_trial: usize,
    pub message_bits: usize,
    pub ablation_code: CodeParams,
    pub strategies: Vec<AlphaStrategy>,
    pub attacks: Vec<AttackKind>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec::for_experiment(ExperimentKind::ProtocolStages, Backend::Statistical)
    }
}

impl ExperimentSpec {
    /// Default trials per cell for a backend.
    pub fn default_trials(backend: Backend) -> usize {
        match backend {
            Backend::Statistical => 200,
            Backend::SpreadSpectrum => 50,
        }
    }

    /// The grid and settings used for each experiment by default.
    pub fn for_experiment(experiment: ExperimentKind, backend: Backend) -> Self {
        let base = ExperimentSpec {
            experiment,
            backend,
            conditions: full_grid(),
            alphas: vec![0.6],
            trials: Self::default_trials(backend),
            seed: 0,
            output: None,
            calibration: None,
            burst_frames: None,
            corpus: None,
            delay: DelaySpec::default(),
            idle: IdleModel::default(),
            protocol: ProtocolConfig::default(),
            patterns: SyncPattern::study_candidates(),
            bits_per_trial: 1000,
            message_bits: 32,
            ablation_code: CodeParams { m: 6, t: 5 },
            strategies: vec![AlphaStrategy::Constant, AlphaStrategy::Adaptive],
            attacks: AttackKind::ALL.to_vec(),
        };
        match experiment {
            ExperimentKind::BitAccuracy => ExperimentSpec {
                alphas: vec![0.6, 0.8, 1.0],
                delay: DelaySpec::none(),
                bits_per_trial: match backend {
                    Backend::Statistical => 1000,
                    Backend::SpreadSpectrum => 200,
                },
                ..base
            },
            ExperimentKind::SyncEval => base,
            ExperimentKind::Ablation => ExperimentSpec {
                conditions: vec![ChannelCondition::clean()],
                alphas: vec![1.0],
                ..base
            },
            ExperimentKind::ProtocolStages => ExperimentSpec {
                protocol: ProtocolConfig {
                    arq: ArqPolicy::single_attempt(),
                    ..ProtocolConfig::default()
                },
                ..base
            },
            ExperimentKind::RetryComparison => ExperimentSpec {
                conditions: grid_at(0.2),
                ..base
            },
            ExperimentKind::Timing => ExperimentSpec {
                conditions: grid_at(0.2),
                protocol: ProtocolConfig {
                    guard_secs: TUNED_GUARD_SECS,
                    ..ProtocolConfig::default()
                },
                ..base
            },
            ExperimentKind::Attacks => ExperimentSpec {
                conditions: vec![ChannelCondition::clean()],
                trials: 1000,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.conditions.is_empty() || self.alphas.is_empty() {
            return Err(Error::InvalidConfig("empty condition or alpha grid".into()));
        }
        for &a in &self.alphas {
            validate_alpha(a)?;
        }
        if self.backend == Backend::Statistical {
            let cal = self.load_calibration()?;
            for cond in &self.conditions {
                for &alpha in &self.alphas {
                    cal.crossover(&Condition::from_channel(cond, alpha))?;
                }
            }
        }
        match self.experiment {
            ExperimentKind::SyncEval if self.patterns.is_empty() => Err(Error::InvalidConfig(
                "sync_eval needs at least one pattern".into(),
            )),
            ExperimentKind::RetryComparison | ExperimentKind::Timing
                if self.strategies.is_empty() =>
            {
                Err(Error::InvalidConfig("no alpha strategies given".into()))
            }
            ExperimentKind::Attacks if self.attacks.is_empty() => {
                Err(Error::InvalidConfig("no attack kinds given".into()))
            }
            ExperimentKind::BitAccuracy if self.bits_per_trial == 0 => {
                Err(Error::InvalidConfig("bits_per_trial must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn load_calibration(&self) -> Result<ChannelCalibration> {
        let cal = match &self.calibration {
            Some(path) => ChannelCalibration::load(path)?,
            None => ChannelCalibration::bundled(),
        };
        Ok(cal.with_bursts(self.burst_frames))
    }

    /// Channel for this spec's backend.
    pub fn build_channel(&self) -> Result<Arc<dyn FrameChannel>> {
        Ok(match self.backend {
            Backend::Statistical => Arc::new(
                StatisticalChannel::new(Arc::new(self.load_calibration()?), self.delay)
                    .with_idle(self.idle),
            ),
            Backend::SpreadSpectrum => {
                let channel = SpreadSpectrumChannel::new(self.delay);
                match &self.corpus {
                    Some(dir) => Arc::new(channel.with_corpus(load_corpus(dir)?)?),
                    None => Arc::new(channel),
                }
            }
        })
    }

    /// Reads a JSON spec; missing fields take the experiment's defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let experiment = match value.get("experiment") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => ExperimentKind::ProtocolStages,
        };
        let backend = match value.get("backend") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => Backend::Statistical,
        };
        let mut merged = serde_json::to_value(Self::for_experiment(experiment, backend))?;
        if let (Some(base), Some(over)) = (merged.as_object_mut(), value.as_object()) {
            for (k, v) in over {
                base.insert(k.clone(), v.clone());
            }
        }
        Ok(serde_json::from_value(merged)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// All `.wav` files in `dir`, sorted by name.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Vec<PcmSignal>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .is_some_and(|ext| ext.eq_ignore_ascii_case("wav"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no .wav files in {}",
            dir.as_ref().display()
        )));
    }
    paths.iter().map(load_wav).collect()
}

/// One trial: its inputs (enough to rerun it) and what happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: ExperimentKind,
    pub backend: Backend,
    pub kind: DistortionKind,
    pub coverage: f64,
    pub alpha: f64,
    /// Sync pattern, ablation configuration, alpha strategy or attack kind.
    pub variant: String,
    pub trial: usize,
    pub seed: u64,
    /// For attack records: the attacker was accepted.
    pub success: bool,
    pub start_ok: Option<bool>,
    pub challenge_ok: Option<bool>,
    pub response_ok: Option<bool>,
    pub finish_ok: Option<bool>,
    pub failed_stage: Option<Stage>,
    pub attempts: Option<usize>,
    pub final_alpha: Option<f64>,
    pub bits: Option<usize>,
    pub bit_errors: Option<usize>,
    pub perfect_chunks: Option<usize>,
    pub corrected: Option<usize>,
    pub sync_offset: Option<usize>,
    pub true_offset: Option<usize>,
    pub delay_samples: Option<usize>,
    pub elapsed_secs: Option<f64>,
    /// For attack records: MAC verification ran on a forged response.
    pub mac_verified: Option<bool>,
}

impl TrialRecord {
    pub fn new(
        experiment: ExperimentKind,
        backend: Backend,
        condition: &ChannelCondition,
        alpha: f64,
        variant: impl Into<String>,
        trial: usize,
        seed: u64,
    ) -> Self {
        TrialRecord {
            experiment,
            backend,
            kind: condition.kind,
            coverage: condition.coverage,
            alpha,
            variant: variant.into(),
            trial,
            seed,
            success: false,
            start_ok: None,
            challenge_ok: None,
            response_ok: None,
            finish_ok: None,
            failed_stage: None,
            attempts: None,
            final_alpha: None,
            bits: None,
            bit_errors: None,
            perfect_chunks: None,
            corrected: None,
            sync_offset: None,
            true_offset: None,
            delay_samples: None,
            elapsed_secs: None,
            mac_verified: None,
        }
    }

    pub fn condition(&self) -> ChannelCondition {
        ChannelCondition::new(self.kind, self.coverage)
    }

    pub fn stage_ok(&self, stage: Stage) -> Option<bool> {
        match stage {
            Stage::Start => self.start_ok,
            Stage::Challenge => self.challenge_ok,
            Stage::Response => self.response_ok,
            Stage::Finish => self.finish_ok,
        }
    }
}

/// One aggregate number with its interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: ExperimentKind,
    pub variant: String,
    /// `clean`, `kind@NN%`, or a pooled label such as `dist` or `all`.
    pub condition: String,
    pub alpha: Option<f64>,
    pub attempt: Option<usize>,
    pub metric: String,
    pub n: usize,
    pub value: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl SummaryRow {
    pub fn rate(
        experiment: ExperimentKind,
        variant: impl Into<String>,
        condition: impl Into<String>,
        alpha: Option<f64>,
        metric: impl Into<String>,
        rate: Rate,
    ) -> Self {
        SummaryRow {
            experiment,
            variant: variant.into(),
            condition: condition.into(),
            alpha,
            attempt: None,
            metric: metric.into(),
            n: rate.trials,
            value: rate.value,
            lo: Some(rate.lo),
            hi: Some(rate.hi),
        }
    }

    pub fn value(
        experiment: ExperimentKind,
        variant: impl Into<String>,
        condition: impl Into<String>,
        metric: impl Into<String>,
        n: usize,
        value: f64,
    ) -> Self {
        SummaryRow {
            experiment,
            variant: variant.into(),
            condition: condition.into(),
            alpha: None,
            attempt: None,
            metric: metric.into(),
            n,
            value,
            lo: None,
            hi: None,
        }
    }

    pub fn with_attempt(mut self, attempt: usize) -> Self {
        self.attempt = Some(attempt);
        self
    }
}

/// Label used in summaries for a channel condition.
pub fn condition_label(cond: &ChannelCondition) -> String {
    if cond.kind == DistortionKind::Clean {
        "clean".into()
    } else {
        format!("{}@{:.0}", cond.kind, cond.coverage * 100.0)
    }
}
