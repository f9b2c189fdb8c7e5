use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use serde::{Deserialize, Serialize};

use crate::bits::Bitstream;
use crate::datalink::{ArqPolicy, Exchange, Link, LinkConfig};
use crate::error::{Error, Result};
use crate::gf_bch::BchCode;
use crate::seed::derive_seed;
use crate::watermark::{validate_alpha, ChannelCondition, FrameChannel, FRAME_SECS, SAMPLE_SECS};

use super::keystore::KeyStore;
use super::mac::{
    compute_mac, verify_mac, Challenge, MacResponse, SharedKey, CHALLENGE_BITS, MAC_BITS,
};

pub const START_BEACON: &str = "10110010";
pub const FINISH_BEACON: &str = "01001101";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeParams {
    pub m: u32,
    pub t: usize,
}

impl CodeParams {
    pub fn build(&self) -> Result<BchCode> {
        BchCode::new(self.m, self.t)
    }
}

/// Per-attempt deadlines in simulated seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timers {
    pub start_secs: f64,
    pub challenge_secs: f64,
    pub response_secs: f64,
    pub finish_secs: f64,
}

impl Default for Timers {
    fn default() -> Self {
        Timers {
            start_secs: 10.0,
            challenge_secs: 30.0,
            response_secs: 30.0,
            finish_secs: 10.0,
        }
    }
}

impl Timers {
    fn for_stage(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Start => self.start_secs,
            Stage::Challenge => self.challenge_secs,
            Stage::Response => self.response_secs,
            Stage::Finish => self.finish_secs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    /// Code for the 8-bit start and finish beacons.
    pub beacon_code: CodeParams,
    /// Code for the 128-bit challenge and response.
    pub payload_code: CodeParams,
    pub link: LinkConfig,
    pub arq: ArqPolicy,
    pub initial_alpha: f64,
    pub timers: Timers,
    /// Silence inserted once at the start of each phase.
    pub guard_secs: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            beacon_code: CodeParams { m: 5, t: 5 },
            payload_code: CodeParams { m: 9, t: 55 },
            link: LinkConfig::default(),
            arq: ArqPolicy::default(),
            initial_alpha: 0.6,
            timers: Timers::default(),
            guard_secs: 0.5,
        }
    }
}

/// Guard that makes a single-attempt run last 54.8 s of audio.
pub const TUNED_GUARD_SECS: f64 = 2.26;

/// Built protocol: both links plus the configuration.
#[derive(Debug, Clone)]
pub struct Protocol {
    config: ProtocolConfig,
    beacon_link: Link,
    payload_link: Link,
}

impl Protocol {
    pub fn new(config: ProtocolConfig) -> Result<Self> {
        validate_alpha(config.initial_alpha)?;
        config.arq.validate()?;
        if config.guard_secs.is_nan() || config.guard_secs < 0.0 {
            return Err(Error::InvalidConfig("guard_secs must be >= 0".into()));
        }
        let beacon_code = config.beacon_code.build()?;
        let payload_code = config.payload_code.build()?;
        if beacon_code.k() < START_BEACON.len() {
            return Err(Error::InvalidConfig(format!(
                "beacon code k={} cannot hold an 8-bit beacon",
                beacon_code.k()
            )));
        }
        if payload_code.k() < CHALLENGE_BITS {
            return Err(Error::InvalidConfig(format!(
                "payload code k={} cannot hold 128 bits",
                payload_code.k()
            )));
        }
        Ok(Protocol {
            beacon_link: Link::new(Arc::new(beacon_code), config.link.clone())?,
            payload_link: Link::new(Arc::new(payload_code), config.link.clone())?,
            config,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn beacon_link(&self) -> &Link {
        &self.beacon_link
    }

    pub fn payload_link(&self) -> &Link {
        &self.payload_link
    }

    fn link(&self, stage: Stage) -> &Link {
        match stage {
            Stage::Start | Stage::Finish => &self.beacon_link,
            Stage::Challenge | Stage::Response => &self.payload_link,
        }
    }

    /// On-air bits of one transmission in `stage`.
    pub fn frame_bits(&self, stage: Stage) -> usize {
        let link = self.link(stage);
        let sync = link.config().sync.as_ref().map_or(0, |s| s.len());
        let payload = if link.config().ecc {
            link.code().n()
        } else {
            match stage {
                Stage::Start | Stage::Finish => START_BEACON.len(),
                Stage::Challenge => CHALLENGE_BITS,
                Stage::Response => MAC_BITS,
            }
        };
        sync + payload
    }

    /// Audio time of a run where every phase succeeds first time.
    pub fn single_attempt_secs(&self) -> f64 {
        Stage::ALL
            .iter()
            .map(|&s| self.frame_bits(s) as f64 * FRAME_SECS + self.config.guard_secs)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Start,
    Challenge,
    Response,
    Finish,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::Start,
        Stage::Challenge,
        Stage::Response,
        Stage::Finish,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Start => "start",
            Stage::Challenge => "challenge",
            Stage::Response => "response",
            Stage::Finish => "finish",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Caller,
    Receiver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    AwaitChallenge,
    AwaitResponse,
    AwaitFinish,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseAttempts {
    pub start: usize,
    pub challenge: usize,
    pub response: usize,
    pub finish: usize,
}

impl PhaseAttempts {
    pub fn max(&self) -> usize {
        self.start
            .max(self.challenge)
            .max(self.response)
            .max(self.finish)
    }

    fn bump(&mut self, stage: Stage) -> usize {
        let slot = match stage {
            Stage::Start => &mut self.start,
            Stage::Challenge => &mut self.challenge,
            Stage::Response => &mut self.response,
            Stage::Finish => &mut self.finish,
        };
        *slot += 1;
        *slot
    }

    fn get(&self, stage: Stage) -> usize {
        match stage {
            Stage::Start => self.start,
            Stage::Challenge => self.challenge,
            Stage::Response => self.response,
            Stage::Finish => self.finish,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub time_secs: f64,
    pub direction: Direction,
    pub stage: Stage,
    pub attempt: usize,
    pub alpha: f64,
    /// Message bits sent, or decoded on receipt (`None` if nothing decoded).
    pub bits: Option<Bitstream>,
}

/// One endpoint's view of the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub role: Role,
    pub phase: Phase,
    pub alpha: f64,
    pub attempts: PhaseAttempts,
    pub timers: Timers,
    pub transcript: Vec<TranscriptEntry>,
}

impl SessionState {
    fn new(role: Role, alpha: f64, timers: Timers) -> Self {
        SessionState {
            role,
            phase: Phase::Idle,
            alpha,
            attempts: PhaseAttempts::default(),
            timers,
            transcript: Vec::new(),
        }
    }

    fn log(
        &mut self,
        time_secs: f64,
        direction: Direction,
        stage: Stage,
        attempt: usize,
        bits: Option<Bitstream>,
    ) {
        self.transcript.push(TranscriptEntry {
            time_secs,
            direction,
            stage,
            attempt,
            alpha: self.alpha,
            bits,
        });
    }
}

/// How the calling party answers a challenge.
#[derive(Debug, Clone, PartialEq)]
pub enum ResponseStrategy {
    ComputeMac,
    /// Sends a previously observed response verbatim.
    Replay(MacResponse),
    /// Sends a fresh random 128-bit value.
    Random,
}

#[derive(Debug, Clone)]
pub struct CallerProfile {
    /// Identity presented by the telephony layer (caller id).
    pub claimed_id: String,
    pub key: SharedKey,
    pub response: ResponseStrategy,
    pub sends_beacon: bool,
}

impl CallerProfile {
    pub fn honest(claimed_id: impl Into<String>, key: SharedKey) -> Self {
        CallerProfile {
            claimed_id: claimed_id.into(),
            key,
            response: ResponseStrategy::ComputeMac,
            sends_beacon: true,
        }
    }

    /// A caller that never starts the protocol.
    pub fn silent(claimed_id: impl Into<String>) -> Self {
        CallerProfile {
            claimed_id: claimed_id.into(),
            key: SharedKey::from_bytes([0; 32]),
            response: ResponseStrategy::Random,
            sends_beacon: false,
        }
    }
}

/// Answering side: key store, nonce source and replay cache.
#[derive(Debug)]
pub struct ReceiverEndpoint {
    keystore: Arc<KeyStore>,
    replay_cache: HashSet<(u64, u64)>,
    rng: ChaCha20Rng,
}

impl ReceiverEndpoint {
    /// Nonces from OS entropy.
    pub fn new(keystore: Arc<KeyStore>) -> Self {
        Self::with_rng(keystore, ChaCha20Rng::from_entropy())
    }

    /// Reproducible nonces for experiments.
    pub fn seeded(keystore: Arc<KeyStore>, seed: u64) -> Self {
        Self::with_rng(keystore, ChaCha20Rng::seed_from_u64(seed))
    }

    fn with_rng(keystore: Arc<KeyStore>, rng: ChaCha20Rng) -> Self {
        ReceiverEndpoint {
            keystore,
            replay_cache: HashSet::new(),
            rng,
        }
    }

    pub fn keystore(&self) -> &KeyStore {
        &self.keystore
    }

    /// A challenge never issued to a completed session.
    pub fn fresh_challenge(&mut self) -> Challenge {
        loop {
            let c = Challenge::random(&mut self.rng);
            if !self.replay_cache.contains(&(c.session, c.nonce)) {
                return c;
            }
        }
    }

    /// Accepts `mac` for `contact` once per challenge.
    pub fn verify_response(
        &mut self,
        contact: &str,
        challenge: &Challenge,
        mac: &MacResponse,
    ) -> bool {
        let Some(key) = self.keystore.get(contact) else {
            return false;
        };
        let key_ok = verify_mac(key, challenge, mac);
        if key_ok
            && self
                .replay_cache
                .insert((challenge.session, challenge.nonce))
        {
            return true;
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Authenticated {
        contact: String,
    },
    /// No valid start beacon, or the claimed contact has no key.
    Unauthenticated,
    /// Responses arrived but none verified.
    Rejected,
    /// A phase ran out of attempts before a decision.
    Failed,
}

/// Final status of each stage; `None` when the stage was never reached.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageResults {
    pub start: Option<bool>,
    pub challenge: Option<bool>,
    pub response: Option<bool>,
    pub finish: Option<bool>,
}

impl StageResults {
    pub fn get(&self, stage: Stage) -> Option<bool> {
        match stage {
            Stage::Start => self.start,
            Stage::Challenge => self.challenge,
            Stage::Response => self.response,
            Stage::Finish => self.finish,
        }
    }

    fn set(&mut self, stage: Stage, ok: bool) {
        let slot = match stage {
            Stage::Start => &mut self.start,
            Stage::Challenge => &mut self.challenge,
            Stage::Response => &mut self.response,
            Stage::Finish => &mut self.finish,
        };
        *slot = Some(ok);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub verdict: Verdict,
    /// The caller received the finish beacon.
    pub caller_completed: bool,
    pub failed_stage: Option<Stage>,
    pub stages: StageResults,
    pub attempts: PhaseAttempts,
    /// Failures followed by a retransmission, across all phases.
    pub retries: usize,
    pub mac_rejections: usize,
    /// Frames whose payload was delivered by the data link, per stage.
    pub delivered_frames: usize,
    pub elapsed_secs: f64,
    pub final_alpha: f64,
    pub caller: SessionState,
    pub receiver: SessionState,
}

impl SessionOutcome {
    /// Both ends finished: receiver authenticated and caller saw the finish beacon.
    pub fn success(&self) -> bool {
        matches!(self.verdict, Verdict::Authenticated { .. }) && self.caller_completed
    }

    pub fn receiver_accepted(&self) -> bool {
        matches!(self.verdict, Verdict::Authenticated { .. })
    }

    /// 1 for a first-try run, plus one per retransmission. Under the adaptive
    /// strategy attempt `k` runs at `initial_alpha + (k - 1)·step`.
    pub fn attempt_number(&self) -> usize {
        1 + self.retries
    }
}

/// Lock-step driver state shared by both endpoints.
struct Driver<'a> {
    protocol: &'a Protocol,
    channel: &'a dyn FrameChannel,
    condition: &'a ChannelCondition,
    seed: u64,
    clock: f64,
    alpha: f64,
    attempts: PhaseAttempts,
    guarded: [bool; 4],
    retries: usize,
    delivered_frames: usize,
    caller: SessionState,
    receiver: SessionState,
}

impl Driver<'_> {
    /// One transmission from `sender`; returns the decoded message if the
    /// link delivered it before the stage timer expired.
    fn send(
        &mut self,
        stage: Stage,
        sender: Role,
        message: &Bitstream,
    ) -> Result<Option<Bitstream>> {
        let attempt = self.attempts.bump(stage);
        if !self.guarded[stage as usize] {
            self.guarded[stage as usize] = true;
            self.clock += self.protocol.config.guard_secs;
        }
        self.caller.alpha = self.alpha;
        self.receiver.alpha = self.alpha;
        self.caller.attempts = self.attempts;
        self.receiver.attempts = self.attempts;
        let (tx, rx) = match sender {
            Role::Caller => (&mut self.caller, &mut self.receiver),
            Role::Receiver => (&mut self.receiver, &mut self.caller),
        };
        tx.log(
            self.clock,
            Direction::Sent,
            stage,
            attempt,
            Some(message.clone()),
        );

        let seed = derive_seed(self.seed, &[stage as u64, attempt as u64]);
        let link = self.protocol.link(stage);
        let ex: Exchange =
            link.exchange(self.channel, message, self.alpha, self.condition, seed)?;
        let airtime = ex.frame_bits as f64 * FRAME_SECS;
        self.clock += airtime;
        let in_time = airtime + ex.delay_samples as f64 * SAMPLE_SECS
            <= self.protocol.config.timers.for_stage(stage);
        let decoded = ex.delivered().filter(|_| in_time).cloned();
        rx.log(
            self.clock,
            Direction::Received,
            stage,
            attempt,
            decoded.clone(),
        );
        if decoded.is_some() {
            self.delivered_frames += 1;
        }
        Ok(decoded)
    }

    fn can_retry(&self, stage: Stage) -> bool {
        self.attempts.get(stage) < self.protocol.config.arq.max_attempts
    }

    /// Records a failure that will be retried and applies the strength schedule.
    fn schedule_retry(&mut self) {
        self.retries += 1;
        self.alpha = self.protocol.config.arq.next_alpha(self.alpha);
    }

    /// Sends until the receiver decodes something accepted by `accept`.
    fn deliver(
        &mut self,
        stage: Stage,
        sender: Role,
        message: &Bitstream,
        accept: impl Fn(&Bitstream) -> bool,
    ) -> Result<Option<Bitstream>> {
        while self.can_retry(stage) {
            match self.send(stage, sender, message)? {
                Some(got) if accept(&got) => return Ok(Some(got)),
                _ if self.can_retry(stage) => self.schedule_retry(),
                _ => {}
            }
        }
        Ok(None)
    }
}

fn conclude(
    d: Driver,
    verdict: Verdict,
    caller_completed: bool,
    failed_stage: Option<Stage>,
    stages: StageResults,
    mac_rejections: usize,
) -> Result<SessionOutcome> {
    let mut caller = d.caller;
    let mut receiver = d.receiver;
    caller.phase = if caller_completed {
        Phase::Done
    } else {
        Phase::Failed
    };
    receiver.phase = if matches!(verdict, Verdict::Authenticated { .. }) {
        Phase::Done
    } else {
        Phase::Failed
    };
    Ok(SessionOutcome {
        verdict,
        caller_completed,
        failed_stage,
        stages,
        attempts: d.attempts,
        retries: d.retries,
        mac_rejections,
        delivered_frames: d.delivered_frames,
        elapsed_secs: d.clock,
        final_alpha: d.alpha,
        caller,
        receiver,
    })
}

/// Runs one authentication attempt between `caller` and `receiver` over `channel`.
pub fn run_session(
    protocol: &Protocol,
    channel: &dyn FrameChannel,
    caller: &CallerProfile,
    receiver: &mut ReceiverEndpoint,
    condition: &ChannelCondition,
    seed: u64,
) -> Result<SessionOutcome> {
    let cfg = protocol.config();
    let mut d = Driver {
        protocol,
        channel,
        condition,
        seed,
        clock: 0.0,
        alpha: cfg.initial_alpha,
        attempts: PhaseAttempts::default(),
        guarded: [false; 4],
        retries: 0,
        delivered_frames: 0,
        caller: SessionState::new(Role::Caller, cfg.initial_alpha, cfg.timers),
        receiver: SessionState::new(Role::Receiver, cfg.initial_alpha, cfg.timers),
    };
    let mut stages = StageResults::default();
    let mut mac_rejections = 0;
    let mut attacker_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xA77AC4]));

    // Start: caller announces itself.
    if !caller.sends_beacon {
        d.clock += cfg.timers.start_secs;
        return conclude(
            d,
            Verdict::Unauthenticated,
            false,
            Some(Stage::Start),
            stages,
            0,
        );
    }
    let start: Bitstream = START_BEACON.parse().expect("valid beacon");
    d.caller.phase = Phase::AwaitChallenge;
    let got = d.deliver(Stage::Start, Role::Caller, &start, |b| *b == start)?;
    stages.set(Stage::Start, got.is_some());
    if got.is_none() {
        return conclude(
            d,
            Verdict::Unauthenticated,
            false,
            Some(Stage::Start),
            stages,
            0,
        );
    }
    if receiver.keystore().get(&caller.claimed_id).is_none() {
        return conclude(
            d,
            Verdict::Unauthenticated,
            false,
            Some(Stage::Start),
            stages,
            0,
        );
    }

    // Challenge and response; a MAC mismatch restarts from a fresh challenge.
    loop {
        let challenge = receiver.fresh_challenge();
        d.receiver.phase = Phase::AwaitResponse;
        let seen = d.deliver(
            Stage::Challenge,
            Role::Receiver,
            &challenge.to_bits(),
            |_| true,
        )?;
        let Some(seen) = seen else {
            stages.set(Stage::Challenge, false);
            return conclude(
                d,
                Verdict::Failed,
                false,
                Some(Stage::Challenge),
                stages,
                mac_rejections,
            );
        };
        stages.set(Stage::Challenge, true);
        let seen = Challenge::from_bits(&seen)?;
        let response = match &caller.response {
            ResponseStrategy::ComputeMac => compute_mac(&caller.key, &seen),
            ResponseStrategy::Replay(mac) => *mac,
            ResponseStrategy::Random => MacResponse::random(&mut attacker_rng),
        };
        d.caller.phase = Phase::AwaitFinish;
        let got = d.deliver(Stage::Response, Role::Caller, &response.to_bits(), |_| true)?;
        let Some(got) = got else {
            stages.set(Stage::Response, false);
            return conclude(
                d,
                Verdict::Failed,
                false,
                Some(Stage::Response),
                stages,
                mac_rejections,
            );
        };
        let mac = MacResponse::from_bits(&got)?;
        if receiver.verify_response(&caller.claimed_id, &challenge, &mac) {
            stages.set(Stage::Response, true);
            break;
        }
        mac_rejections += 1;
        if !d.can_retry(Stage::Challenge) || !d.can_retry(Stage::Response) {
            stages.set(Stage::Response, false);
            return conclude(
                d,
                Verdict::Rejected,
                false,
                Some(Stage::Response),
                stages,
                mac_rejections,
            );
        }
        d.schedule_retry();
    }

    // Finish: receiver confirms.
    let verdict = Verdict::Authenticated {
        contact: caller.claimed_id.clone(),
    };
    let finish_beacon: Bitstream = FINISH_BEACON.parse().expect("valid beacon");
    let got = d.deliver(Stage::Finish, Role::Receiver, &finish_beacon, |b| {
        *b == finish_beacon
    })?;
    stages.set(Stage::Finish, got.is_some());
    let failed = got.is_none().then_some(Stage::Finish);
    conclude(d, verdict, got.is_some(), failed, stages, mac_rejections)
}
