use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bits::Bitstream;
use crate::error::{Error, Result};
use crate::gf_bch::BchCode;
use crate::watermark::{hard_bits, ChannelCondition, DecodedBit, FrameChannel, Listen};

use super::sync::{find_sync, SyncMatch, SyncPattern, SyncSearch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    /// Preamble; `None` sends bare payloads decoded from the nominal frame grid.
    pub sync: Option<SyncPattern>,
    /// Defaults to the pattern's own threshold (4 of 15 bits).
    pub sync_threshold: Option<usize>,
    pub confidence_floor: f64,
    /// Frames of slack the receiver searches past the nominal start.
    pub search_window: usize,
    /// Without ECC the payload is the raw message.
    pub ecc: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            sync: Some(SyncPattern::default()),
            sync_threshold: None,
            confidence_floor: 0.2,
            search_window: 8,
            ecc: true,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence_floor) {
            return Err(Error::InvalidConfig(format!(
                "confidence floor {} outside [0, 1]",
                self.confidence_floor
            )));
        }
        if let (Some(sync), Some(t)) = (&self.sync, self.sync_threshold) {
            if t >= sync.len() {
                return Err(Error::InvalidConfig(format!(
                    "sync threshold {t} accepts any {}-bit window",
                    sync.len()
                )));
            }
        }
        Ok(())
    }
}

/// Why a single reception produced no message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkFailure {
    SyncNotFound,
    Uncorrectable,
    Truncated,
}

impl fmt::Display for LinkFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkFailure::SyncNotFound => "sync_not_found",
            LinkFailure::Uncorrectable => "uncorrectable",
            LinkFailure::Truncated => "truncated",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Received {
    pub message: Bitstream,
    pub corrected: usize,
    pub sync: Option<SyncMatch>,
}

/// One transmission and its reception.
#[derive(Debug, Clone)]
pub struct Exchange {
    pub outcome: std::result::Result<Received, LinkFailure>,
    pub delay_samples: usize,
    pub true_offset: Option<usize>,
    pub frame_bits: usize,
}

impl Exchange {
    pub fn delivered(&self) -> Option<&Bitstream> {
        self.outcome.as_ref().ok().map(|r| &r.message)
    }

    /// Delivered and equal to what was sent.
    pub fn is_correct(&self, sent: &Bitstream) -> bool {
        self.delivered() == Some(sent)
    }

    /// Whether the located preamble sits at the true offset.
    pub fn sync_correct(&self) -> bool {
        match (&self.outcome, self.true_offset) {
            (Ok(Received { sync: Some(m), .. }), Some(t)) => m.offset == t,
            _ => false,
        }
    }
}

/// Sender and receiver halves of the data link for one code and preamble.
#[derive(Debug, Clone)]
pub struct Link {
    code: Arc<BchCode>,
    config: LinkConfig,
}

impl Link {
    pub fn new(code: Arc<BchCode>, config: LinkConfig) -> Result<Self> {
        config.validate()?;
        Ok(Link { code, config })
    }

    pub fn code(&self) -> &BchCode {
        &self.code
    }

    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn search(&self) -> Option<SyncSearch> {
        self.config.sync.as_ref().map(|sync| SyncSearch {
            threshold: self
                .config
                .sync_threshold
                .unwrap_or_else(|| sync.default_threshold()),
            confidence_floor: self.config.confidence_floor,
            window: self.config.search_window,
        })
    }

    fn payload_len(&self, message_len: usize) -> usize {
        if self.config.ecc {
            self.code.n()
        } else {
            message_len
        }
    }

    /// Bits put on the air for `message`.
    pub fn frame_bits(&self, message: &Bitstream) -> Result<Bitstream> {
        let payload = if self.config.ecc {
            self.code.encode(message)?
        } else {
            message.clone()
        };
        Ok(match &self.config.sync {
            Some(sync) => sync.bits().concat(&payload),
            None => payload,
        })
    }

    /// Receiver listening parameters matching this link.
    pub fn listen(&self) -> Listen {
        Listen {
            extra_frames: self.config.search_window,
            align_phase: self.config.sync.is_some(),
        }
    }

    /// Locates the preamble and decodes a `message_len`-bit message.
    pub fn receive(
        &self,
        decoded: &[DecodedBit],
        message_len: usize,
    ) -> std::result::Result<Received, LinkFailure> {
        let (start, sync) = match (&self.config.sync, self.search()) {
            (Some(pattern), Some(search)) => {
                let found =
                    find_sync(decoded, pattern, &search).map_err(|_| LinkFailure::SyncNotFound)?;
                (found.offset + pattern.len(), Some(found))
            }
            _ => (0, None),
        };
        let end = start + self.payload_len(message_len);
        if end > decoded.len() {
            return Err(LinkFailure::Truncated);
        }
        let payload = hard_bits(&decoded[start..end]);
        if !self.config.ecc {
            return Ok(Received {
                message: payload,
                corrected: 0,
                sync,
            });
        }
        let out = self
            .code
            .decode(&payload)
            .map_err(|_| LinkFailure::Uncorrectable)?;
        Ok(Received {
            message: out.message.truncated(message_len),
            corrected: out.corrected,
            sync,
        })
    }

    /// Sends `message` once through `channel` and decodes it at the far end.
    pub fn exchange(
        &self,
        channel: &dyn FrameChannel,
        message: &Bitstream,
        alpha: f64,
        condition: &ChannelCondition,
        seed: u64,
    ) -> Result<Exchange> {
        let bits = self.frame_bits(message)?;
        let rx = channel.transmit(&bits, alpha, condition, &self.listen(), seed)?;
        Ok(Exchange {
            outcome: self.receive(&rx.decoded, message.len()),
            delay_samples: rx.delay_samples,
            true_offset: rx.true_offset,
            frame_bits: bits.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::DelaySpec;
    use crate::watermark::{ChannelCalibration, StatisticalChannel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn channel() -> StatisticalChannel {
        StatisticalChannel::new(
            Arc::new(ChannelCalibration::bundled()),
            DelaySpec::default(),
        )
    }

    fn link(config: LinkConfig) -> Link {
        Link::new(Arc::new(BchCode::new(5, 5).unwrap()), config).unwrap()
    }

    #[test]
    fn delivers_any_payload_unchanged_on_strong_channel() {
        let link = Link::new(Arc::new(BchCode::new(6, 5).unwrap()), LinkConfig::default()).unwrap();
        let ch = channel();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ok = 0;
        for seed in 0..300 {
            let message = Bitstream::random(32, &mut rng);
            let ex = link
                .exchange(&ch, &message, 1.0, &ChannelCondition::clean(), seed)
                .unwrap();
            if let Ok(r) = &ex.outcome {
                assert_eq!(r.message.len(), 32);
            }
            ok += usize::from(ex.is_correct(&message));
        }
        assert!(ok >= 290, "{ok}");
    }

    #[test]
    fn located_offset_decodes_iff_error_weight_within_t() {
        let link = link(LinkConfig::default());
        let ch = channel();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cond = ChannelCondition::new(crate::audio::DistortionKind::WhiteNoise, 0.8);
        for seed in 0..500 {
            let message = Bitstream::random(11, &mut rng);
            let sent = link.frame_bits(&message).unwrap();
            let rx = ch
                .transmit(&sent, 0.6, &cond, &link.listen(), seed)
                .unwrap();
            let Ok(found) = find_sync(
                &rx.decoded,
                &SyncPattern::default(),
                &link.search().unwrap(),
            ) else {
                continue;
            };
            if Some(found.offset) != rx.true_offset {
                continue;
            }
            let start = found.offset + 15;
            let weight =
                hard_bits(&rx.decoded[start..start + 31]).hamming_distance(&sent.slice(15, 46));
            let outcome = link.receive(&rx.decoded, 11);
            if weight <= 5 {
                assert_eq!(outcome.unwrap().message, message);
            } else {
                assert_ne!(outcome.ok().map(|r| r.message), Some(message.clone()));
            }
        }
    }

    #[test]
    fn raw_payload_without_ecc() {
        let link = link(LinkConfig {
            ecc: false,
            ..LinkConfig::default()
        });
        let msg: Bitstream = "1100".parse().unwrap();
        assert_eq!(link.frame_bits(&msg).unwrap().len(), 19);
    }

    #[test]
    fn no_sync_reads_nominal_grid() {
        let link = link(LinkConfig {
            sync: None,
            ..LinkConfig::default()
        });
        assert!(!link.listen().align_phase);
        let ch =
            StatisticalChannel::new(Arc::new(ChannelCalibration::bundled()), DelaySpec::none());
        let msg: Bitstream = "10110010".parse().unwrap();
        let ok = (0..100)
            .filter(|&s| {
                link.exchange(&ch, &msg, 1.0, &ChannelCondition::clean(), s)
                    .unwrap()
                    .is_correct(&msg)
            })
            .count();
        assert!(ok >= 95, "{ok}");
    }

    #[test]
    fn invalid_threshold_rejected() {
        let config = LinkConfig {
            sync_threshold: Some(15),
            ..LinkConfig::default()
        };
        assert!(Link::new(Arc::new(BchCode::new(5, 5).unwrap()), config).is_err());
    }
}
