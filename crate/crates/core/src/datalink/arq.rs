use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::Bitstream;
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::watermark::{validate_alpha, ChannelCondition, FrameChannel};

use super::link::{Link, LinkFailure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaStrategy {
    Constant,
    Adaptive,
}

impl fmt::Display for AlphaStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlphaStrategy::Constant => "constant",
            AlphaStrategy::Adaptive => "adaptive",
        })
    }
}

impl FromStr for AlphaStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" | "constant_alpha" => Ok(AlphaStrategy::Constant),
            "adaptive" | "adaptive_alpha" => Ok(AlphaStrategy::Adaptive),
            other => Err(Error::Parse(format!("unknown alpha strategy {other:?}"))),
        }
    }
}

/// Retransmission budget and strength schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArqPolicy {
    pub max_attempts: usize,
    pub strategy: AlphaStrategy,
    pub alpha_step: f64,
    pub alpha_cap: f64,
}

impl Default for ArqPolicy {
    fn default() -> Self {
        ArqPolicy {
            max_attempts: 3,
            strategy: AlphaStrategy::Constant,
            alpha_step: 0.1,
            alpha_cap: 1.0,
        }
    }
}

impl ArqPolicy {
    pub fn adaptive() -> Self {
        ArqPolicy {
            strategy: AlphaStrategy::Adaptive,
            ..ArqPolicy::default()
        }
    }

    pub fn single_attempt() -> Self {
        ArqPolicy {
            max_attempts: 1,
            ..ArqPolicy::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_attempts == 0 {
            return Err(Error::InvalidConfig("max_attempts must be >= 1".into()));
        }
        if self.alpha_step.is_nan() || self.alpha_step < 0.0 {
            return Err(Error::InvalidConfig("alpha_step must be >= 0".into()));
        }
        validate_alpha(self.alpha_cap)
    }

    /// Strength to use after a failure at `alpha`.
    pub fn next_alpha(&self, alpha: f64) -> f64 {
        match self.strategy {
            AlphaStrategy::Constant => alpha,
            AlphaStrategy::Adaptive => {
                // Rounded so repeated steps land exactly on table columns.
                let raised = ((alpha + self.alpha_step) * 1e6).round() / 1e6;
                raised.min(self.alpha_cap).max(alpha)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: usize,
    pub alpha: f64,
    pub delay_samples: usize,
    pub true_offset: Option<usize>,
    pub sync_offset: Option<usize>,
    pub corrected: Option<usize>,
    pub failure: Option<LinkFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryReport {
    /// What the receiver accepted, if anything.
    pub delivered: Option<Bitstream>,
    pub attempts: Vec<AttemptRecord>,
}

impl DeliveryReport {
    pub fn attempt_count(&self) -> usize {
        self.attempts.len()
    }

    pub fn is_correct(&self, sent: &Bitstream) -> bool {
        self.delivered.as_ref() == Some(sent)
    }

    /// The accepted message, or a delivery failure if the budget ran out.
    pub fn into_result(self) -> Result<(Bitstream, usize)> {
        let attempts = self.attempts.len();
        self.delivered
            .map(|m| (m, attempts))
            .ok_or(Error::DeliveryFailure { attempts })
    }
}

/// Stop-and-wait delivery. The receiver's accept/reject decision reaches the
/// sender out of band; on rejection the frame is resent, at a raised strength
/// under the adaptive strategy, until the attempt budget runs out.
pub fn send_message(
    channel: &dyn FrameChannel,
    link: &Link,
    message: &Bitstream,
    condition: &ChannelCondition,
    alpha: f64,
    policy: &ArqPolicy,
    seed: u64,
) -> Result<DeliveryReport> {
    policy.validate()?;
    validate_alpha(alpha)?;
    let mut alpha = alpha.min(policy.alpha_cap);
    let mut attempts = Vec::new();
    for attempt in 1..=policy.max_attempts {
        let ex = link.exchange(
            channel,
            message,
            alpha,
            condition,
            derive_seed(seed, &[attempt as u64]),
        )?;
        let (sync_offset, corrected) = match &ex.outcome {
            Ok(r) => (r.sync.map(|m| m.offset), Some(r.corrected)),
            Err(_) => (None, None),
        };
        attempts.push(AttemptRecord {
            attempt,
            alpha,
            delay_samples: ex.delay_samples,
            true_offset: ex.true_offset,
            sync_offset,
            corrected,
            failure: ex.outcome.as_ref().err().copied(),
        });
        if let Ok(r) = ex.outcome {
            return Ok(DeliveryReport {
                delivered: Some(r.message),
                attempts,
            });
        }
        alpha = policy.next_alpha(alpha);
    }
    Ok(DeliveryReport {
        delivered: None,
        attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{DelaySpec, DistortionKind};
    use crate::datalink::LinkConfig;
    use crate::gf_bch::BchCode;
    use crate::watermark::{ChannelCalibration, StatisticalChannel};
    use std::sync::Arc;

    fn setup() -> (StatisticalChannel, Link) {
        (
            StatisticalChannel::new(
                Arc::new(ChannelCalibration::bundled()),
                DelaySpec::default(),
            ),
            Link::new(Arc::new(BchCode::new(5, 5).unwrap()), LinkConfig::default()).unwrap(),
        )
    }

    #[test]
    fn adaptive_alpha_is_monotone_and_capped() {
        let policy = ArqPolicy::adaptive();
        let mut alpha = 0.6;
        let mut seen = vec![alpha];
        for _ in 0..6 {
            alpha = policy.next_alpha(alpha);
            seen.push(alpha);
        }
        assert_eq!(seen, vec![0.6, 0.7, 0.8, 0.9, 1.0, 1.0, 1.0]);
        assert_eq!(ArqPolicy::default().next_alpha(0.6), 0.6);
    }

    #[test]
    fn attempts_bounded_and_alphas_rise() {
        let (ch, link) = setup();
        let msg: Bitstream = "10110010".parse().unwrap();
        let cond = ChannelCondition::new(DistortionKind::WhiteNoise, 0.8);
        let policy = ArqPolicy::adaptive();
        let mut saw_retry = false;
        for seed in 0..300 {
            let report = send_message(&ch, &link, &msg, &cond, 0.6, &policy, seed).unwrap();
            assert!(report.attempt_count() <= 3);
            let alphas: Vec<f64> = report.attempts.iter().map(|a| a.alpha).collect();
            assert!(alphas.windows(2).all(|w| w[1] > w[0]));
            saw_retry |= report.attempt_count() > 1;
            if report.delivered.is_none() {
                assert_eq!(report.attempt_count(), 3);
                assert!(matches!(
                    report.into_result(),
                    Err(Error::DeliveryFailure { attempts: 3 })
                ));
            }
        }
        assert!(saw_retry);
    }

    #[test]
    fn clean_first_attempt_rate() {
        let (ch, link) = setup();
        let msg: Bitstream = "10110010".parse().unwrap();
        let ok = (0..1000)
            .filter(|&seed| {
                let r = send_message(
                    &ch,
                    &link,
                    &msg,
                    &ChannelCondition::clean(),
                    0.6,
                    &ArqPolicy::single_attempt(),
                    seed,
                )
                .unwrap();
                r.is_correct(&msg)
            })
            .count();
        // Sync miss and > 5 errors in 31 bits at p = 0.08 leave about 96%.
        assert!((930..=985).contains(&ok), "{ok}");
    }
}
