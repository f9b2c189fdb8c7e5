use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::DistortionKind;
use crate::auth::{
    run_attack_trial, run_session, AttackKind, CallerProfile, KeyStore, Protocol, ProtocolConfig,
    ReceiverEndpoint, SessionOutcome, SharedKey, Stage,
};
use crate::bits::Bitstream;
use crate::datalink::{find_sync, AlphaStrategy, Link, LinkConfig, SyncPattern};
use crate::error::{Error, Result};
use crate::gf_bch::BchCode;
use crate::seed::derive_seed;
use crate::watermark::{
    hard_bits, ChannelCondition, Condition, FrameChannel, Listen, FRAME_SAMPLES,
};

use super::emit::{write_csv, write_jsonl};
use super::stats::{Rate, Spread};
use super::{condition_label, ExperimentKind, ExperimentSpec, SummaryRow, TrialRecord};

/// Chunk length for the perfect-recovery statistic.
const CHUNK_BITS: usize = 16;
/// Contact used for honest sessions.
const CONTACT: &str = "alice";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationConfig {
    /// ECC but no preamble; the receiver decodes the nominal frame grid.
    NoSync,
    /// Preamble with a raw, uncoded payload.
    SyncOnly,
    Full,
}

impl AblationConfig {
    pub const ALL: [AblationConfig; 3] = [
        AblationConfig::NoSync,
        AblationConfig::SyncOnly,
        AblationConfig::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationConfig::NoSync => "no_sync",
            AblationConfig::SyncOnly => "sync_only",
            AblationConfig::Full => "full",
        }
    }

    fn link_config(self, base: &LinkConfig) -> LinkConfig {
        let sync = base.sync.clone().or_else(|| Some(SyncPattern::default()));
        match self {
            AblationConfig::NoSync => LinkConfig {
                sync: None,
                ecc: true,
                ..base.clone()
            },
            AblationConfig::SyncOnly => LinkConfig {
                sync,
                ecc: false,
                ..base.clone()
            },
            AblationConfig::Full => LinkConfig {
                sync,
                ecc: true,
                ..base.clone()
            },
        }
    }
}

impl fmt::Display for AblationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        AblationConfig::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| Error::Parse(format!("unknown ablation configuration {s:?}")))
    }
}

/// What varies besides the channel condition and alpha.
#[derive(Debug, Clone, PartialEq)]
enum Variant {
    None,
    Pattern(SyncPattern),
    Ablation(AblationConfig),
    Strategy(AlphaStrategy),
    Attack(AttackKind),
}

impl Variant {
    fn label(&self) -> String {
        match self {
            Variant::None => String::new(),
            Variant::Pattern(p) => p.to_string(),
            Variant::Ablation(c) => c.to_string(),
            Variant::Strategy(s) => s.to_string(),
            Variant::Attack(k) => k.to_string(),
        }
    }

    fn parse(experiment: ExperimentKind, label: &str) -> Result<Self> {
        Ok(match experiment {
            ExperimentKind::BitAccuracy | ExperimentKind::ProtocolStages => Variant::None,
            ExperimentKind::SyncEval => Variant::Pattern(label.parse()?),
            ExperimentKind::Ablation => Variant::Ablation(label.parse()?),
            ExperimentKind::RetryComparison | ExperimentKind::Timing => {
                Variant::Strategy(label.parse()?)
            }
            ExperimentKind::Attacks => Variant::Attack(label.parse()?),
        })
    }
}

#[derive(Debug, Clone)]
struct Cell {
    variant: Variant,
    condition: ChannelCondition,
    alpha: f64,
}

/// Per-cell objects built once and shared by the cell's trials.
enum Prepared {
    Nothing,
    Link(Link),
    Protocol(Box<Protocol>),
}

fn cells(spec: &ExperimentSpec) -> Vec<Cell> {
    let variants: Vec<Variant> = match spec.experiment {
        ExperimentKind::BitAccuracy | ExperimentKind::ProtocolStages => vec![Variant::None],
        ExperimentKind::SyncEval => spec
            .patterns
            .iter()
            .cloned()
            .map(Variant::Pattern)
            .collect(),
        ExperimentKind::Ablation => AblationConfig::ALL
            .into_iter()
            .map(Variant::Ablation)
            .collect(),
        ExperimentKind::RetryComparison | ExperimentKind::Timing => spec
            .strategies
            .iter()
            .copied()
            .map(Variant::Strategy)
            .collect(),
        ExperimentKind::Attacks => spec.attacks.iter().copied().map(Variant::Attack).collect(),
    };
    let mut out = Vec::new();
    for variant in &variants {
        for condition in &spec.conditions {
            for &alpha in &spec.alphas {
                out.push(Cell {
                    variant: variant.clone(),
                    condition: *condition,
                    alpha,
                });
            }
        }
    }
    out
}

fn protocol_for(spec: &ExperimentSpec, cell: &Cell) -> Result<Protocol> {
    let mut config: ProtocolConfig = spec.protocol.clone();
    config.initial_alpha = cell.alpha;
    if let Variant::Strategy(s) = cell.variant {
        config.arq.strategy = s;
    }
    Protocol::new(config)
}

fn prepare(spec: &ExperimentSpec, cell: &Cell) -> Result<Prepared> {
    Ok(match &cell.variant {
        Variant::Pattern(pattern) => {
            let code = spec.protocol.beacon_code.build()?;
            let config = LinkConfig {
                sync: Some(pattern.clone()),
                ..spec.protocol.link.clone()
            };
            Prepared::Link(Link::new(Arc::new(code), config)?)
        }
        Variant::Ablation(c) => {
            let code = spec.ablation_code.build()?;
            Prepared::Link(Link::new(
                Arc::new(code),
                c.link_config(&spec.protocol.link),
            )?)
        }
        Variant::Strategy(_) | Variant::Attack(_) => {
            Prepared::Protocol(Box::new(protocol_for(spec, cell)?))
        }
        Variant::None => match spec.experiment {
            ExperimentKind::ProtocolStages => {
                Prepared::Protocol(Box::new(protocol_for(spec, cell)?))
            }
            _ => Prepared::Nothing,
        },
    })
}

/// Trial seed. The variant is left out so every variant of a cell sees the
/// same channel draws, which pairs comparisons between them.
fn trial_seed(spec: &ExperimentSpec, cell: &Cell, trial: usize) -> u64 {
    derive_seed(
        spec.seed,
        &[
            spec.experiment as u64,
            cell.condition.kind as u64,
            (cell.condition.coverage * 1000.0).round() as u64,
            (cell.alpha * 1000.0).round() as u64,
            trial as u64,
        ],
    )
}

fn run_trial(
    spec: &ExperimentSpec,
    channel: &dyn FrameChannel,
    cell: &Cell,
    prepared: &Prepared,
    trial: usize,
    seed: u64,
) -> Result<TrialRecord> {
    let mut rec = TrialRecord::new(
        spec.experiment,
        spec.backend,
        &cell.condition,
        cell.alpha,
        cell.variant.label(),
        trial,
        seed,
    );
    match (spec.experiment, prepared, &cell.variant) {
        (ExperimentKind::BitAccuracy, _, _) => bit_trial(spec, channel, cell, seed, &mut rec)?,
        (ExperimentKind::SyncEval, Prepared::Link(link), _) => {
            sync_trial(link, channel, cell, seed, &mut rec)?
        }
        (ExperimentKind::Ablation, Prepared::Link(link), _) => {
            ablation_trial(spec, link, channel, cell, seed, &mut rec)?
        }
        (ExperimentKind::Attacks, Prepared::Protocol(p), Variant::Attack(kind)) => {
            if let Some(t) = run_attack_trial(*kind, p, channel, &cell.condition, seed)? {
                rec.success = t.accepted;
                rec.response_ok = Some(t.datalink_passed);
                rec.mac_verified = Some(t.verified);
            }
        }
        (_, Prepared::Protocol(p), _) => {
            let out = honest_session(p, channel, &cell.condition, seed)?;
            fill_session(&mut rec, &out);
        }
        _ => unreachable!("cell prepared for a different experiment"),
    }
    Ok(rec)
}

fn bit_trial(
    spec: &ExperimentSpec,
    channel: &dyn FrameChannel,
    cell: &Cell,
    seed: u64,
    rec: &mut TrialRecord,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let bits = Bitstream::random(spec.bits_per_trial, &mut rng);
    let slack = spec.delay.max_delay_samples() / FRAME_SAMPLES + 1;
    let rx = channel.transmit(
        &bits,
        cell.alpha,
        &cell.condition,
        &Listen::new(slack),
        derive_seed(seed, &[1]),
    )?;
    let offset = rx.true_offset.unwrap_or(0);
    let got = hard_bits(&rx.decoded[offset..offset + bits.len()]);
    let errors = got.hamming_distance(&bits);
    let perfect = (0..bits.len() / CHUNK_BITS)
        .filter(|c| {
            let r = c * CHUNK_BITS..(c + 1) * CHUNK_BITS;
            got[r.clone()] == bits[r]
        })
        .count();
    rec.success = errors == 0;
    rec.bits = Some(bits.len());
    rec.bit_errors = Some(errors);
    rec.perfect_chunks = Some(perfect);
    rec.true_offset = rx.true_offset;
    rec.delay_samples = Some(rx.delay_samples);
    Ok(())
}

fn sync_trial(
    link: &Link,
    channel: &dyn FrameChannel,
    cell: &Cell,
    seed: u64,
    rec: &mut TrialRecord,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let message = Bitstream::random(8, &mut rng);
    let frame = link.frame_bits(&message)?;
    let rx = channel.transmit(
        &frame,
        cell.alpha,
        &cell.condition,
        &link.listen(),
        derive_seed(seed, &[1]),
    )?;
    let pattern = link
        .config()
        .sync
        .as_ref()
        .expect("sync study links carry a pattern");
    let search = link.search().expect("sync study links carry a pattern");
    let found = find_sync(&rx.decoded, pattern, &search).ok();
    rec.sync_offset = found.map(|m| m.offset);
    rec.true_offset = rx.true_offset;
    rec.delay_samples = Some(rx.delay_samples);
    rec.success = found.is_some() && rec.sync_offset == rx.true_offset;
    Ok(())
}

fn ablation_trial(
    spec: &ExperimentSpec,
    link: &Link,
    channel: &dyn FrameChannel,
    cell: &Cell,
    seed: u64,
    rec: &mut TrialRecord,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let message = Bitstream::random(spec.message_bits, &mut rng);
    let ex = link.exchange(
        channel,
        &message,
        cell.alpha,
        &cell.condition,
        derive_seed(seed, &[1]),
    )?;
    rec.success = ex.is_correct(&message);
    if let Ok(r) = &ex.outcome {
        rec.corrected = Some(r.corrected);
        rec.sync_offset = r.sync.map(|m| m.offset);
    }
    rec.true_offset = ex.true_offset;
    rec.delay_samples = Some(ex.delay_samples);
    Ok(())
}

/// One honest caller/receiver run with keys and nonces derived from `seed`.
pub fn honest_session(
    protocol: &Protocol,
    channel: &dyn FrameChannel,
    condition: &ChannelCondition,
    seed: u64,
) -> Result<SessionOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let key = SharedKey::random(&mut rng);
    let mut store = KeyStore::new();
    store.insert(CONTACT, key.clone());
    let mut receiver = ReceiverEndpoint::seeded(Arc::new(store), derive_seed(seed, &[1]));
    let caller = CallerProfile::honest(CONTACT, key);
    run_session(
        protocol,
        channel,
        &caller,
        &mut receiver,
        condition,
        derive_seed(seed, &[2]),
    )
}

fn fill_session(rec: &mut TrialRecord, out: &SessionOutcome) {
    rec.success = out.success();
    rec.start_ok = out.stages.start;
    rec.challenge_ok = out.stages.challenge;
    rec.response_ok = out.stages.response;
    rec.finish_ok = out.stages.finish;
    rec.failed_stage = out.failed_stage;
    rec.attempts = Some(out.attempt_number());
    rec.final_alpha = Some(out.final_alpha);
    rec.elapsed_secs = Some(out.elapsed_secs);
}

/// Records plus aggregate rows for one experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentReport {
    /// First summary row matching metric, variant and condition label.
    pub fn find(&self, metric: &str, variant: &str, condition: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.metric == metric && r.variant == variant && r.condition == condition)
    }

    /// Like [`find`](Self::find) for a specific attempt.
    pub fn find_attempt(
        &self,
        metric: &str,
        variant: &str,
        condition: &str,
        attempt: usize,
    ) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| {
            r.metric == metric
                && r.variant == variant
                && r.condition == condition
                && r.attempt == Some(attempt)
        })
    }

    /// Writes `<stem>.csv`, `<stem>.jsonl` and `<stem>_summary.csv`.
    pub fn write(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let name = stem
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.spec.experiment.to_string());
        let with = |suffix: &str| stem.with_file_name(format!("{name}{suffix}"));
        write_csv(&self.records, with(".csv"))?;
        write_jsonl(&self.records, with(".jsonl"))?;
        write_csv(&self.summary, with("_summary.csv"))
    }
}

/// Runs every trial of every cell in parallel and aggregates.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let channel = spec.build_channel()?;
    let cells = cells(spec);
    let prepared: Vec<Prepared> = cells
        .iter()
        .map(|c| prepare(spec, c))
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.trials).map(move |t| (c, t)))
        .collect();
    let records: Vec<TrialRecord> = tasks
        .par_iter()
        .map(|&(c, t)| {
            let seed = trial_seed(spec, &cells[c], t);
            run_trial(spec, channel.as_ref(), &cells[c], &prepared[c], t, seed)
        })
        .collect::<Result<_>>()?;
    let summary = summarize(spec, &records)?;
    Ok(ExperimentReport {
        spec: spec.clone(),
        records,
        summary,
    })
}

/// Reruns one recorded trial from its seed.
pub fn replay(spec: &ExperimentSpec, record: &TrialRecord) -> Result<TrialRecord> {
    if record.experiment != spec.experiment || record.backend != spec.backend {
        return Err(Error::InvalidConfig(format!(
            "record is from {}/{}, spec is {}/{}",
            record.experiment, record.backend, spec.experiment, spec.backend
        )));
    }
    let cell = Cell {
        variant: Variant::parse(record.experiment, &record.variant)?,
        condition: record.condition(),
        alpha: record.alpha,
    };
    let channel = spec.build_channel()?;
    let prepared = prepare(spec, &cell)?;
    run_trial(
        spec,
        channel.as_ref(),
        &cell,
        &prepared,
        record.trial,
        record.seed,
    )
}

/// Groups records by key, preserving first-seen order.
fn group<K: Ord + Clone>(
    records: &[TrialRecord],
    key: impl Fn(&TrialRecord) -> K,
) -> Vec<(K, Vec<&TrialRecord>)> {
    let mut order: Vec<K> = Vec::new();
    let mut map: BTreeMap<K, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        let k = key(r);
        if !map.contains_key(&k) {
            order.push(k.clone());
        }
        map.entry(k).or_default().push(r);
    }
    order
        .into_iter()
        .map(|k| {
            let v = map.remove(&k).expect("grouped key");
            (k, v)
        })
        .collect()
}

fn label(r: &TrialRecord) -> String {
    condition_label(&r.condition())
}

fn is_distorted(r: &TrialRecord) -> bool {
    r.kind != DistortionKind::Clean
}

fn summarize(spec: &ExperimentSpec, records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    let exp = spec.experiment;
    let mut rows = Vec::new();
    let alpha_key = |r: &TrialRecord| (r.alpha * 1000.0).round() as i64;
    match exp {
        ExperimentKind::BitAccuracy => {
            let cal = spec.load_calibration()?;
            for ((cond, _), rs) in group(records, |r| (label(r), alpha_key(r))) {
                let alpha = rs[0].alpha;
                let bits: usize = rs.iter().filter_map(|r| r.bits).sum();
                let errors: usize = rs.iter().filter_map(|r| r.bit_errors).sum();
                let chunks = bits / CHUNK_BITS;
                let perfect: usize = rs.iter().filter_map(|r| r.perfect_chunks).sum();
                let acc = Rate::new(bits - errors, bits);
                rows.push(SummaryRow::rate(
                    exp,
                    "",
                    &cond,
                    Some(alpha),
                    "bit_accuracy",
                    acc,
                ));
                if let Ok(expected) =
                    cal.bit_accuracy(&Condition::from_channel(&rs[0].condition(), alpha))
                {
                    let mut row =
                        SummaryRow::value(exp, "", &cond, "expected_accuracy", 0, expected);
                    row.alpha = Some(alpha);
                    rows.push(row);
                }
                rows.push(SummaryRow::rate(
                    exp,
                    "",
                    &cond,
                    Some(alpha),
                    "perfect_16",
                    Rate::new(perfect, chunks),
                ));
                let mut row = SummaryRow::value(
                    exp,
                    "",
                    &cond,
                    "perfect_16_independent",
                    chunks,
                    acc.value.powi(16),
                );
                row.alpha = Some(alpha);
                rows.push(row);
            }
        }
        ExperimentKind::SyncEval => {
            for ((variant, cond, _), rs) in
                group(records, |r| (r.variant.clone(), label(r), alpha_key(r)))
            {
                let rate = Rate::from_flags(rs.iter().map(|r| r.success));
                rows.push(SummaryRow::rate(
                    exp,
                    variant,
                    cond,
                    Some(rs[0].alpha),
                    "accuracy",
                    rate,
                ));
            }
            let distorted: Vec<TrialRecord> = records
                .iter()
                .filter(|r| is_distorted(r))
                .cloned()
                .collect();
            for ((variant, _), rs) in group(&distorted, |r| (r.variant.clone(), alpha_key(r))) {
                let rate = Rate::from_flags(rs.iter().map(|r| r.success));
                rows.push(SummaryRow::rate(
                    exp,
                    variant,
                    "dist",
                    Some(rs[0].alpha),
                    "accuracy",
                    rate,
                ));
            }
        }
        ExperimentKind::Ablation => {
            for ((variant, cond, _), rs) in
                group(records, |r| (r.variant.clone(), label(r), alpha_key(r)))
            {
                let rate = Rate::from_flags(rs.iter().map(|r| r.success));
                rows.push(SummaryRow::rate(
                    exp,
                    variant,
                    cond,
                    Some(rs[0].alpha),
                    "frame_success",
                    rate,
                ));
            }
        }
        ExperimentKind::ProtocolStages => {
            let stage_rows = |rows: &mut Vec<SummaryRow>, cond: &str, rs: &[&TrialRecord]| {
                let alpha = Some(rs[0].alpha);
                for stage in Stage::ALL {
                    let rate = Rate::from_flags(rs.iter().filter_map(|r| r.stage_ok(stage)));
                    rows.push(SummaryRow::rate(exp, "", cond, alpha, stage.as_str(), rate));
                }
                let overall = Rate::from_flags(rs.iter().map(|r| r.success));
                rows.push(SummaryRow::rate(exp, "", cond, alpha, "overall", overall));
            };
            for ((cond, _), rs) in group(records, |r| (label(r), alpha_key(r))) {
                stage_rows(&mut rows, &cond, &rs);
            }
            let distorted: Vec<&TrialRecord> = records.iter().filter(|r| is_distorted(r)).collect();
            if !distorted.is_empty() {
                stage_rows(&mut rows, "dist", &distorted);
            }
            let failures: Vec<&TrialRecord> = records.iter().filter(|r| !r.success).collect();
            for stage in Stage::ALL {
                let count = failures
                    .iter()
                    .filter(|r| r.failed_stage == Some(stage))
                    .count();
                rows.push(SummaryRow::rate(
                    exp,
                    stage.as_str(),
                    "all",
                    None,
                    "failure_share",
                    Rate::new(count, failures.len()),
                ));
            }
        }
        ExperimentKind::RetryComparison => {
            let max_attempts = spec.protocol.arq.max_attempts;
            let curve =
                |rows: &mut Vec<SummaryRow>, variant: &str, cond: &str, rs: &[&TrialRecord]| {
                    let alpha = Some(rs[0].alpha);
                    for k in 1..=max_attempts {
                        let rate = Rate::from_flags(
                            rs.iter().map(|r| r.success && r.attempts.unwrap_or(0) <= k),
                        );
                        rows.push(
                            SummaryRow::rate(exp, variant, cond, alpha, "success_by_attempt", rate)
                                .with_attempt(k),
                        );
                    }
                    let fin = Rate::from_flags(rs.iter().map(|r| r.success));
                    rows.push(SummaryRow::rate(
                        exp,
                        variant,
                        cond,
                        alpha,
                        "final_success",
                        fin,
                    ));
                };
            for ((variant, cond, _), rs) in
                group(records, |r| (r.variant.clone(), label(r), alpha_key(r)))
            {
                curve(&mut rows, &variant, &cond, &rs);
            }
            let distorted: Vec<TrialRecord> = records
                .iter()
                .filter(|r| is_distorted(r))
                .cloned()
                .collect();
            for (variant, rs) in group(&distorted, |r| r.variant.clone()) {
                curve(&mut rows, &variant, "dist", &rs);
            }
        }
        ExperimentKind::Timing => {
            let mut zero_guard = spec.protocol.clone();
            zero_guard.guard_secs = 0.0;
            let bit_budget = Protocol::new(zero_guard)?.single_attempt_secs();
            let configured = Protocol::new(spec.protocol.clone())?.single_attempt_secs();
            rows.push(SummaryRow::value(
                exp,
                "",
                "all",
                "bit_budget_secs",
                0,
                bit_budget,
            ));
            rows.push(SummaryRow::value(
                exp,
                "",
                "all",
                "single_attempt_secs",
                0,
                configured,
            ));
            let mut by_variant = group(records, |r| r.variant.clone());
            by_variant.push(("all".to_string(), records.iter().collect()));
            for (variant, rs) in by_variant {
                let successes: Vec<&TrialRecord> =
                    rs.iter().copied().filter(|r| r.success).collect();
                let mut by_attempt: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
                for r in &successes {
                    if let (Some(a), Some(t)) = (r.attempts, r.elapsed_secs) {
                        by_attempt.entry(a).or_default().push(t);
                    }
                }
                for (attempt, times) in by_attempt {
                    let s = Spread::of(&times).expect("non-empty group");
                    for (metric, v) in [
                        ("elapsed_mean", s.mean),
                        ("elapsed_min", s.min),
                        ("elapsed_max", s.max),
                    ] {
                        rows.push(
                            SummaryRow::value(exp, &variant, "all", metric, s.n, v)
                                .with_attempt(attempt),
                        );
                    }
                }
                let all_times: Vec<f64> = successes.iter().filter_map(|r| r.elapsed_secs).collect();
                if let Some(s) = Spread::of(&all_times) {
                    rows.push(SummaryRow::value(
                        exp,
                        &variant,
                        "all",
                        "elapsed_mean",
                        s.n,
                        s.mean,
                    ));
                }
            }
        }
        ExperimentKind::Attacks => {
            for ((variant, cond), rs) in group(records, |r| (r.variant.clone(), label(r))) {
                let alpha = Some(rs[0].alpha);
                let ran: Vec<&&TrialRecord> =
                    rs.iter().filter(|r| r.mac_verified.is_some()).collect();
                let acc = Rate::from_flags(ran.iter().map(|r| r.success));
                rows.push(SummaryRow::rate(
                    exp,
                    &variant,
                    &cond,
                    alpha,
                    "acceptance",
                    acc,
                ));
                let dl = Rate::from_flags(ran.iter().filter_map(|r| r.response_ok));
                rows.push(SummaryRow::rate(
                    exp,
                    &variant,
                    &cond,
                    alpha,
                    "datalink_pass",
                    dl,
                ));
                let ver = Rate::from_flags(ran.iter().filter_map(|r| r.mac_verified));
                rows.push(SummaryRow::rate(
                    exp,
                    &variant,
                    &cond,
                    alpha,
                    "mac_verified",
                    ver,
                ));
                rows.push(SummaryRow::value(
                    exp,
                    &variant,
                    &cond,
                    "skipped",
                    rs.len(),
                    (rs.len() - ran.len()) as f64,
                ));
            }
        }
    }
    Ok(rows)
}

/// Shortest single-transmission airtime of a BCH code, for reports.
pub fn codeword_secs(code: &BchCode, sync_bits: usize) -> f64 {
    (code.n() + sync_bits) as f64 * crate::watermark::FRAME_SECS
}
