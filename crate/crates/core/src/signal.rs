//! Time-domain signals: sampled waveforms and drive descriptions.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::plan::ToneSet;

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Waveform {
    pub samples: Vec<f64>,
    /// Sample interval (s).
    pub dt: f64,
    /// Time of the first sample (s).
    pub t0: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, dt: f64, t0: f64) -> Self {
        Waveform { samples, dt, t0 }
    }

    pub fn zeros(len: usize, dt: f64, t0: f64) -> Self {
        Waveform::new(alloc::vec![0.0; len], dt, t0)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn peak_to_peak(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if self.samples.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }

    /// Linear interpolation; zero outside the sampled span.
    pub fn value_at(&self, t: f64) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let x = (t - self.t0) / self.dt;
        if x < 0.0 || x > (self.len() - 1) as f64 {
            return 0.0;
        }
        let i = x.floor() as usize;
        if i + 1 >= self.len() {
            return self.samples[self.len() - 1];
        }
        let f = x - i as f64;
        self.samples[i] + f * (self.samples[i + 1] - self.samples[i])
    }

    /// Elementwise sum; both waveforms must share the time grid.
    pub fn add(&self, other: &Waveform) -> Waveform {
        assert_eq!(self.len(), other.len());
        Waveform::new(
            self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect(),
            self.dt,
            self.t0,
        )
    }

    pub fn scaled(&self, alpha: f64) -> Waveform {
        Waveform::new(self.samples.iter().map(|v| v * alpha).collect(), self.dt, self.t0)
    }
}

/// Trapezoid: linear rise, flat top, linear fall, starting at `delay`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrapezoidPulse {
    pub amplitude: f64,
    pub delay: f64,
    pub rise: f64,
    /// Duration of the flat top.
    pub width: f64,
    pub fall: f64,
}

impl TrapezoidPulse {
    /// 1 ns edges around a 5 ns flat top, starting at t = 0.
    pub fn standard(amplitude: f64) -> Self {
        TrapezoidPulse {
            amplitude,
            delay: 0.0,
            rise: 1e-9,
            width: 5e-9,
            fall: 1e-9,
        }
    }

    pub fn end(&self) -> f64 {
        self.delay + self.rise + self.width + self.fall
    }

    pub fn support(&self) -> f64 {
        self.rise + self.width + self.fall
    }

    pub fn value(&self, t: f64) -> f64 {
        let x = t - self.delay;
        let v0 = self.amplitude;
        if x <= 0.0 || x >= self.support() {
            0.0
        } else if x < self.rise {
            v0 * x / self.rise
        } else if x <= self.rise + self.width {
            v0
        } else {
            v0 * (self.support() - x) / self.fall
        }
    }

    /// Value of the pulse train with period `period`.
    pub fn periodic_value(&self, t: f64, period: f64) -> f64 {
        let mut x = (t - self.delay) % period;
        if x < 0.0 {
            x += period;
        }
        self.value(self.delay + x)
    }

    /// Mean power of the pulse train over one period: `V0^2 (tw + tr/3 + tf/3) / T`.
    pub fn mean_square(&self, period: f64) -> f64 {
        self.amplitude * self.amplitude * (self.width + self.rise / 3.0 + self.fall / 3.0) / period
    }

    /// Two-sided Fourier coefficient of the pulse train at harmonic `k`.
    pub fn fourier_coefficient(&self, k: i64, period: f64) -> Complex64 {
        let v0 = self.amplitude;
        if k == 0 {
            return Complex64::new(v0 * (self.width + 0.5 * self.rise + 0.5 * self.fall) / period, 0.0);
        }
        // piecewise linear with compact support: (jw)^2 F = sum of slope
        // steps times exp(-jw t_i)
        let w = 2.0 * PI * k as f64 / period;
        let t1 = self.delay;
        let t2 = t1 + self.rise;
        let t3 = t2 + self.width;
        let t4 = t3 + self.fall;
        let steps = [
            (t1, v0 / self.rise),
            (t2, -v0 / self.rise),
            (t3, -v0 / self.fall),
            (t4, v0 / self.fall),
        ];
        let mut s = Complex64::new(0.0, 0.0);
        for (t, ds) in steps {
            s += Complex64::from_polar(ds, -w * t);
        }
        -s / (w * w * period)
    }
}

/// Drive applied to a system during a transient.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal {
    Zero,
    Tones(ToneSet),
    Pulse(TrapezoidPulse),
    /// Linearly interpolated samples, zero outside their span.
    Sampled(Waveform),
}

impl InputSignal {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            InputSignal::Zero => 0.0,
            InputSignal::Tones(ts) => (0..ts.frequencies.len())
                .map(|m| ts.amplitudes[m] * (ts.omega(m) * t).cos())
                .sum(),
            InputSignal::Pulse(p) => p.value(t),
            InputSignal::Sampled(w) => w.value_at(t),
        }
    }

    /// Bound on `|u(t)|`, used to scale the blow-up check.
    pub fn scale(&self) -> f64 {
        match self {
            InputSignal::Zero => 0.0,
            InputSignal::Tones(ts) => ts.peak(),
            InputSignal::Pulse(p) => p.amplitude.abs(),
            InputSignal::Sampled(w) => w.max_abs(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> InputSignal {
        match self {
            InputSignal::Zero => InputSignal::Zero,
            InputSignal::Tones(ts) => InputSignal::Tones(ts.scaled(alpha)),
            InputSignal::Pulse(p) => InputSignal::Pulse(TrapezoidPulse {
                amplitude: p.amplitude * alpha,
                ..*p
            }),
            InputSignal::Sampled(w) => InputSignal::Sampled(w.scaled(alpha)),
        }
    }
}
