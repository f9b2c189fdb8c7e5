use std::f64::consts::PI;

/// Direct-form I second-order section.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl Biquad {
    fn from_normalized(b: [f64; 3], a: [f64; 3]) -> Self {
        Biquad {
            b0: b[0] / a[0],
            b1: b[1] / a[0],
            b2: b[2] / a[0],
            a1: a[1] / a[0],
            a2: a[2] / a[0],
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    /// Bilinear-transform lowpass with quality factor `q`.
    pub fn lowpass(cutoff_hz: f64, q: f64, sample_rate: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate;
        let alpha = w0.sin() / (2.0 * q);
        let cos = w0.cos();
        Self::from_normalized(
            [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0],
            [1.0 + alpha, -2.0 * cos, 1.0 - alpha],
        )
    }

    pub fn highpass(cutoff_hz: f64, q: f64, sample_rate: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate;
        let alpha = w0.sin() / (2.0 * q);
        let cos = w0.cos();
        Self::from_normalized(
            [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0],
            [1.0 + alpha, -2.0 * cos, 1.0 - alpha],
        )
    }

    /// Constant 0 dB peak-gain bandpass.
    pub fn bandpass(center_hz: f64, q: f64, sample_rate: f64) -> Self {
        let w0 = 2.0 * PI * center_hz / sample_rate;
        let alpha = w0.sin() / (2.0 * q);
        let cos = w0.cos();
        Self::from_normalized([alpha, 0.0, -alpha], [1.0 + alpha, -2.0 * cos, 1.0 - alpha])
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b1 * self.x1 + self.b2 * self.x2
            - self.a1 * self.y1
            - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }

    pub fn reset(&mut self) {
        self.x1 = 0.0;
        self.x2 = 0.0;
        self.y1 = 0.0;
        self.y2 = 0.0;
    }
}

/// Even-order Butterworth filter built from cascaded biquads.
#[derive(Debug, Clone)]
pub struct ButterworthCascade {
    sections: Vec<Biquad>,
}

impl ButterworthCascade {
    pub fn lowpass(order: usize, cutoff_hz: f64, sample_rate: f64) -> Self {
        ButterworthCascade {
            sections: section_qs(order)
                .map(|q| Biquad::lowpass(cutoff_hz, q, sample_rate))
                .collect(),
        }
    }

    pub fn highpass(order: usize, cutoff_hz: f64, sample_rate: f64) -> Self {
        ButterworthCascade {
            sections: section_qs(order)
                .map(|q| Biquad::highpass(cutoff_hz, q, sample_rate))
                .collect(),
        }
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        self.sections.iter_mut().fold(x, |acc, s| s.process(acc))
    }

    pub fn process_block(&mut self, block: &mut [f64]) {
        for s in block {
            *s = self.process(*s);
        }
    }
}

/// Section quality factors of an even-order Butterworth prototype.
fn section_qs(order: usize) -> impl Iterator<Item = f64> {
    assert!(
        order >= 2 && order.is_multiple_of(2),
        "Butterworth order must be even"
    );
    (0..order / 2).map(move |k| {
        let theta = PI * (2 * k + 1) as f64 / (2 * order) as f64;
        1.0 / (2.0 * theta.sin())
    })
}
