use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Success count over trials with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub successes: usize,
    pub trials: usize,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Rate {
    pub fn new(successes: usize, trials: usize) -> Self {
        assert!(successes <= trials, "{successes} successes out of {trials}");
        let (lo, hi) = wilson_interval(successes, trials);
        let value = if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        };
        Rate {
            successes,
            trials,
            value,
            lo,
            hi,
        }
    }

    pub fn from_flags(flags: impl IntoIterator<Item = bool>) -> Self {
        let (s, n) = flags
            .into_iter()
            .fold((0, 0), |(s, n), ok| (s + usize::from(ok), n + 1));
        Rate::new(s, n)
    }

    /// Whether the interval intersects `[target - tol, target + tol]`.
    pub fn overlaps(&self, target: f64, tol: f64) -> bool {
        self.hi >= target - tol && self.lo <= target + tol
    }
}

/// Wilson score interval at 95% confidence; `(0, 1)` for no trials.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// Mean, minimum and maximum of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Spread> {
        if values.is_empty() {
            return None;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Spread {
            n: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min,
            max,
        })
    }
}
