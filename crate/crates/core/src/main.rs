use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use callshield::audio::{
    apply_distortion, load_wav, save_wav, DistortionKind, DistortionSpec, PcmSignal,
};
use callshield::auth::{
    run_session, AttackKind, CallerProfile, KeyStore, Protocol, ReceiverEndpoint,
};
use callshield::datalink::{AlphaStrategy, Link, LinkConfig};
use callshield::gf_bch::BchCode;
use callshield::harness::{
    read_csv, run_experiment, write_plot_data, ExperimentKind, ExperimentReport, ExperimentSpec,
    SummaryRow,
};
use callshield::watermark::{
    synthetic_speech, Backend, ChannelCondition, SpreadSpectrumCodec, DEFAULT_PN_SEED,
    FRAME_SAMPLES,
};
use callshield::{Bitstream, Error, Result};

#[derive(Parser)]
#[command(
    name = "callshield",
    version,
    about = "Caller authentication over an audio watermark channel"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Channel backend: statistical or spread_spectrum.
    #[arg(long, global = true)]
    backend: Option<Backend>,
    /// Output stem for experiment results, or output directory for `plot`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON experiment spec; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Trials per grid cell.
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Encode or decode a hex bitstream with a BCH code.
    Bch {
        #[command(subcommand)]
        op: BchOp,
    },
    /// Apply one distortion to a WAV file.
    Distort {
        #[arg(long)]
        kind: DistortionKind,
        #[arg(long)]
        coverage: f64,
        input: PathBuf,
        output: PathBuf,
    },
    /// Frame a message into a WAV file or recover it from one.
    Datalink {
        #[command(subcommand)]
        op: DatalinkOp,
    },
    /// Sync pattern detection accuracy.
    SyncEval,
    /// Frame success with and without sync and ECC.
    Ablation,
    /// Protocol sessions and attacks.
    Auth {
        #[command(subcommand)]
        op: AuthOp,
    },
    /// Attack simulation.
    Attack(AttackArgs),
    /// Any experiment, typically driven by --config.
    Sweep {
        #[arg(long)]
        experiment: Option<ExperimentKind>,
    },
    /// Authentication time by number of attempts.
    Timing,
    /// Gnuplot data files from summary CSVs.
    Plot {
        /// `*_summary.csv` files written by the experiment commands.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BchOp {
    Encode {
        /// Field degree; the code length is 2^m - 1.
        #[arg(long, default_value_t = 5)]
        m: u32,
        #[arg(long, default_value_t = 5)]
        t: usize,
        /// Message length in bits; defaults to k.
        #[arg(long)]
        bits: Option<usize>,
        hex: String,
    },
    Decode {
        #[arg(long, default_value_t = 5)]
        m: u32,
        #[arg(long, default_value_t = 5)]
        t: usize,
        hex: String,
    },
}

#[derive(Args)]
struct LinkArgs {
    /// Message length in bits.
    #[arg(long)]
    bits: usize,
    /// Field degree of the BCH code.
    #[arg(long, default_value_t = 9)]
    m: u32,
    #[arg(long, default_value_t = 55)]
    t: usize,
}

#[derive(Subcommand)]
enum DatalinkOp {
    /// Embed sync + codeword into a carrier WAV (or synthetic speech).
    Send {
        #[command(flatten)]
        link: LinkArgs,
        /// Message as hex.
        #[arg(long)]
        message: String,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Carrier WAV; synthetic speech when absent.
        #[arg(long)]
        carrier: Option<PathBuf>,
        /// Silence-free lead-in before the first frame, in milliseconds.
        #[arg(long, default_value_t = 0.0)]
        offset_ms: f64,
        output: PathBuf,
    },
    /// Find the preamble in a WAV file and decode the message.
    Recv {
        #[command(flatten)]
        link: LinkArgs,
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum AuthOp {
    /// Honest authentication sessions.
    Run {
        #[arg(long, default_value = "clean")]
        distortion: DistortionKind,
        #[arg(long, default_value_t = 0.0)]
        coverage: f64,
        #[arg(long, default_value_t = 0.6)]
        alpha: f64,
        #[arg(long, default_value = "adaptive")]
        strategy: AlphaStrategy,
        /// Transmissions allowed per phase.
        #[arg(long, default_value_t = 3)]
        attempts: usize,
        /// Key store (JSON contact -> hex key); runs one verbose session.
        #[arg(long)]
        keystore: Option<PathBuf>,
        #[arg(long, requires = "keystore")]
        contact: Option<String>,
    },
    /// Attack simulation.
    Attack(AttackArgs),
}

#[derive(Args)]
struct AttackArgs {
    /// Attack kind; all kinds when absent.
    #[arg(long)]
    kind: Option<AttackKind>,
    #[arg(long, default_value = "clean")]
    distortion: DistortionKind,
    #[arg(long, default_value_t = 0.0)]
    coverage: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = cli.common;
    match cli.command {
        Command::Bch { op } => bch(op),
        Command::Distort {
            kind,
            coverage,
            input,
            output,
        } => distort(kind, coverage, common.seed.unwrap_or(0), &input, &output),
        Command::Datalink { op } => datalink(op, common.seed.unwrap_or(0)),
        Command::SyncEval => experiment(&common, ExperimentKind::SyncEval, |_| {}),
        Command::Ablation => experiment(&common, ExperimentKind::Ablation, |_| {}),
        Command::Timing => experiment(&common, ExperimentKind::Timing, |_| {}),
        Command::Sweep { experiment: kind } => {
            let kind = match (kind, &common.config) {
                (Some(k), _) => k,
                (None, Some(path)) => ExperimentSpec::load(path)?.experiment,
                (None, None) => {
                    return Err(Error::InvalidConfig(
                        "sweep needs --experiment or --config".into(),
                    ))
                }
            };
            experiment(&common, kind, |_| {})
        }
        Command::Attack(args)
        | Command::Auth {
            op: AuthOp::Attack(args),
        } => attack(&common, args),
        Command::Auth {
            op:
                AuthOp::Run {
                    distortion,
                    coverage,
                    alpha,
                    strategy,
                    attempts,
                    keystore,
                    contact,
                },
        } => {
            let condition = ChannelCondition::new(distortion, coverage);
            let configure = move |spec: &mut ExperimentSpec| {
                spec.conditions = vec![condition];
                spec.alphas = vec![alpha];
                spec.strategies = vec![strategy];
                spec.protocol.arq.max_attempts = attempts;
            };
            match keystore {
                Some(path) => {
                    let contact = contact
                        .ok_or_else(|| Error::InvalidConfig("--contact is required".into()))?;
                    single_session(&common, &path, &contact, configure)
                }
                None => experiment(&common, ExperimentKind::RetryComparison, configure),
            }
        }
        Command::Plot { inputs } => {
            let mut rows: Vec<SummaryRow> = Vec::new();
            for path in &inputs {
                rows.extend(read_csv::<SummaryRow>(path)?);
            }
            let dir = common.out.unwrap_or_else(|| PathBuf::from("plots"));
            let written = write_plot_data(&rows, &dir)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn bch(op: BchOp) -> Result<()> {
    match op {
        BchOp::Encode { m, t, bits, hex } => {
            let code = BchCode::new(m, t)?;
            let message = Bitstream::from_hex(&hex, bits.unwrap_or(code.k()))?;
            let codeword = code.encode(&message)?;
            println!("code: ({}, {}, {})", code.n(), code.k(), code.t());
            println!("codeword: {}", codeword.to_hex());
            println!("bits: {}", codeword.len());
        }
        BchOp::Decode { m, t, hex } => {
            let code = BchCode::new(m, t)?;
            let received = Bitstream::from_hex(&hex, code.n())?;
            let out = code.decode(&received)?;
            println!("message: {}", out.message.to_hex());
            println!("corrected: {}", out.corrected);
        }
    }
    Ok(())
}

fn distort(
    kind: DistortionKind,
    coverage: f64,
    seed: u64,
    input: &Path,
    output: &Path,
) -> Result<()> {
    let signal = load_wav(input)?;
    let out = apply_distortion(&signal, &DistortionSpec::new(kind, coverage, seed))?;
    save_wav(&out.signal, output)?;
    println!(
        "{}",
        serde_json::json!({
            "kind": kind,
            "coverage": coverage,
            "seed": seed,
            "segments": out.segments,
            "drawn": out.drawn,
            "clipped": out.clipped,
        })
    );
    Ok(())
}

fn build_link(args: &LinkArgs) -> Result<Link> {
    Link::new(
        Arc::new(BchCode::new(args.m, args.t)?),
        LinkConfig::default(),
    )
}

fn datalink(op: DatalinkOp, seed: u64) -> Result<()> {
    let codec = SpreadSpectrumCodec::new(DEFAULT_PN_SEED);
    match op {
        DatalinkOp::Send {
            link,
            message,
            alpha,
            carrier,
            offset_ms,
            output,
        } => {
            let l = build_link(&link)?;
            let bits = l.frame_bits(&Bitstream::from_hex(&message, link.bits)?)?;
            let start = (offset_ms * 8.0).round() as usize;
            let needed = start + (bits.len() + 1) * FRAME_SAMPLES;
            let host = match carrier {
                Some(path) => load_wav(path)?,
                None => synthetic_speech(needed, seed),
            };
            let marked = codec.embed_stream_at(&bits, &host, alpha, start)?;
            save_wav(&marked, &output)?;
            println!("frame bits: {}", bits.len());
            println!("duration: {:.2} s", marked.duration_secs());
        }
        DatalinkOp::Recv { link, input } => {
            let l = build_link(&link)?;
            let signal = load_wav(input)?;
            let frames = signal.len() / FRAME_SAMPLES;
            let phase = codec.acquire_phase(&signal, frames);
            let usable = (signal.len() - phase) / FRAME_SAMPLES;
            let aligned = PcmSignal::new(signal.samples()[phase..].to_vec())?;
            let decoded = codec.decode_stream(&aligned, 0, usable)?;
            match l.receive(&decoded, link.bits) {
                Ok(r) => {
                    let offset = r.sync.map(|s| s.offset).unwrap_or(0);
                    println!("message: {}", r.message.to_hex());
                    println!("corrected: {}", r.corrected);
                    println!("start: {} samples", phase + offset * FRAME_SAMPLES);
                }
                Err(failure) => {
                    return Err(Error::Format(format!("no message recovered: {failure:?}")))
                }
            }
        }
    }
    Ok(())
}

/// Spec for `kind`: defaults, then the config file, then flags.
fn build_spec(common: &Common, kind: ExperimentKind) -> Result<ExperimentSpec> {
    let mut spec = match &common.config {
        Some(path) => {
            let spec = ExperimentSpec::load(path)?;
            if spec.experiment == kind {
                spec
            } else {
                // The file's settings apply on top of this command's defaults.
                let mut value: serde_json::Value =
                    serde_json::from_str(&std::fs::read_to_string(path)?)?;
                value["experiment"] = serde_json::to_value(kind)?;
                ExperimentSpec::from_json(&value.to_string())?
            }
        }
        None => {
            ExperimentSpec::for_experiment(kind, common.backend.unwrap_or(Backend::Statistical))
        }
    };
    if let Some(backend) = common.backend {
        if backend != spec.backend {
            spec.backend = backend;
            if common.trials.is_none() && common.config.is_none() {
                spec.trials = ExperimentSpec::default_trials(backend);
            }
        }
    }
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(trials) = common.trials {
        spec.trials = trials;
    }
    if let Some(out) = &common.out {
        spec.output = Some(out.clone());
    }
    Ok(spec)
}

fn experiment(
    common: &Common,
    kind: ExperimentKind,
    configure: impl FnOnce(&mut ExperimentSpec),
) -> Result<()> {
    let mut spec = build_spec(common, kind)?;
    configure(&mut spec);
    let report = run_experiment(&spec)?;
    print_summary(&report);
    if let Some(stem) = &spec.output {
        report.write(stem)?;
        eprintln!(
            "wrote {}.{{csv,jsonl}} and {}_summary.csv",
            stem.display(),
            stem.display()
        );
    }
    Ok(())
}

fn attack(common: &Common, args: AttackArgs) -> Result<()> {
    let condition = ChannelCondition::new(args.distortion, args.coverage);
    experiment(common, ExperimentKind::Attacks, |spec| {
        spec.conditions = vec![condition];
        if let Some(kind) = args.kind {
            spec.attacks = vec![kind];
        }
    })
}

fn single_session(
    common: &Common,
    keystore: &Path,
    contact: &str,
    configure: impl FnOnce(&mut ExperimentSpec),
) -> Result<()> {
    let mut spec = build_spec(common, ExperimentKind::RetryComparison)?;
    configure(&mut spec);
    spec.validate()?;
    let store = KeyStore::load(keystore)?;
    let key = store
        .get(contact)
        .cloned()
        .ok_or_else(|| Error::KeyStore(format!("no key for contact {contact:?}")))?;
    let mut config = spec.protocol.clone();
    config.initial_alpha = spec.alphas[0];
    config.arq.strategy = spec.strategies[0];
    let protocol = Protocol::new(config)?;
    let channel = spec.build_channel()?;
    let mut receiver = ReceiverEndpoint::seeded(Arc::new(store), spec.seed);
    let caller = CallerProfile::honest(contact, key);
    let out = run_session(
        &protocol,
        channel.as_ref(),
        &caller,
        &mut receiver,
        &spec.conditions[0],
        spec.seed,
    )?;
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn print_summary(report: &ExperimentReport) {
    println!(
        "{:<16} {:<24} {:<16} {:>5} {:>7} {:>6} {:>8} {:>17}",
        "variant", "metric", "condition", "alpha", "attempt", "n", "value", "95% CI"
    );
    for row in &report.summary {
        let ci = match (row.lo, row.hi) {
            (Some(lo), Some(hi)) => format!("[{lo:.3}, {hi:.3}]"),
            _ => String::new(),
        };
        println!(
            "{:<16} {:<24} {:<16} {:>5} {:>7} {:>6} {:>8.4} {:>17}",
            row.variant,
            row.metric,
            row.condition,
            row.alpha.map(|a| format!("{a:.1}")).unwrap_or_default(),
            row.attempt.map(|a| a.to_string()).unwrap_or_default(),
            row.n,
            row.value,
            ci
        );
    }
}
