//! Time-domain responses of a kernel set to periodic inputs.
//!
//! The input is a discrete two-sided spectrum `c_k` on harmonics of `1/T`.
//! The order-`n` output is
//! `y_n(t) = 1/n! * sum H_n(f_k1..f_kn) c_k1..c_kn exp(j 2 pi (f_k1+..+f_kn) t)`
//! over all ordered `n`-tuples of retained bins. Tuples are visited as
//! multisets with their multiplicity and accumulated on sum-frequency bins.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::kernel::KernelSetArchive;
use crate::mixing::factorial;
use crate::signal::{TrapezoidPulse, Waveform};
use crate::systems::VolterraOracle;

/// Hermitian two-sided line spectrum with period `period`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpectrum {
    pub period: f64,
    /// `(bin, c_bin)` pairs; iteration follows this order.
    lines: Vec<(i64, Complex64)>,
}

impl DiscreteSpectrum {
    /// From the DC term and positive bins; negative bins are their conjugates.
    pub fn from_one_sided(period: f64, dc: f64, positive: &[(i64, Complex64)]) -> Self {
        let mut lines = Vec::with_capacity(2 * positive.len() + 1);
        if dc != 0.0 {
            lines.push((0, Complex64::new(dc, 0.0)));
        }
        for &(k, c) in positive {
            assert!(k > 0, "positive bins only");
            lines.push((k, c));
            lines.push((-k, c.conj()));
        }
        DiscreteSpectrum { period, lines }
    }

    /// Arbitrary ordering of a two-sided line list. Returns `None` unless the
    /// list is exactly Hermitian with a real DC term and no repeated bins.
    pub fn from_lines(period: f64, lines: Vec<(i64, Complex64)>) -> Option<Self> {
        let map: BTreeMap<i64, Complex64> = lines.iter().copied().collect();
        if map.len() != lines.len() {
            return None;
        }
        for (&k, &c) in &map {
            if k == 0 {
                if c.im != 0.0 {
                    return None;
                }
            } else if map.get(&-k) != Some(&c.conj()) {
                return None;
            }
        }
        Some(DiscreteSpectrum { period, lines })
    }

    pub fn lines(&self) -> &[(i64, Complex64)] {
        &self.lines
    }

    pub fn fundamental_hz(&self) -> f64 {
        1.0 / self.period
    }

    pub fn max_bin(&self) -> i64 {
        self.lines.iter().map(|(k, _)| k.abs()).max().unwrap_or(0)
    }

    /// Mean square of the periodic signal, `sum |c_k|^2`.
    pub fn power(&self) -> f64 {
        self.lines.iter().map(|(_, c)| c.norm_sqr()).sum()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        DiscreteSpectrum {
            period: self.period,
            lines: self.lines.iter().map(|&(k, c)| (k, c * alpha)).collect(),
        }
    }

    /// Real signal `sum c_k exp(j 2 pi k t / T)` at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let w = 2.0 * PI / self.period;
        self.lines
            .iter()
            .map(|&(k, c)| (c * Complex64::from_polar(1.0, w * k as f64 * t)).re)
            .sum()
    }
}

/// Bookkeeping for bins dropped when building a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SpectrumInfo {
    pub retained_bins: usize,
    pub retained_power: f64,
    pub total_power: f64,
}

impl SpectrumInfo {
    pub fn dropped_fraction(&self) -> f64 {
        if self.total_power > 0.0 {
            ((self.total_power - self.retained_power) / self.total_power).max(0.0)
        } else {
            0.0
        }
    }
}

/// Pulse train spectrum with at most `max_bins` positive bins; bins below
/// `bin_cap * max|c|` are dropped.
pub fn spectrum_of_pulse(
    pulse: &TrapezoidPulse,
    period: f64,
    max_bins: usize,
    bin_cap: f64,
) -> (DiscreteSpectrum, SpectrumInfo) {
    let c0 = pulse.fourier_coefficient(0, period).re;
    let pos: Vec<(i64, Complex64)> = (1..=max_bins as i64)
        .map(|k| (k, pulse.fourier_coefficient(k, period)))
        .collect();
    finish_spectrum(period, c0, pos, bin_cap, pulse.mean_square(period))
}

/// Spectrum of one period of a sampled waveform (`w` spans exactly `T`).
pub fn spectrum_of_waveform(w: &Waveform, max_bins: usize, bin_cap: f64) -> (DiscreteSpectrum, SpectrumInfo) {
    let n = w.len();
    let period = n as f64 * w.dt;
    let kmax = max_bins.min(n.saturating_sub(1) / 2);
    let dft = |k: usize| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &v) in w.samples.iter().enumerate() {
            acc += Complex64::from_polar(v, -2.0 * PI * ((k * i) % n) as f64 / n as f64);
        }
        // shift to absolute time t0
        acc / n as f64 * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * w.t0 / period)
    };
    let c0 = dft(0).re;
    let pos: Vec<(i64, Complex64)> = (1..=kmax).map(|k| (k as i64, dft(k))).collect();
    let total = w.samples.iter().map(|v| v * v).sum::<f64>() / n as f64;
    finish_spectrum(period, c0, pos, bin_cap, total)
}

fn finish_spectrum(
    period: f64,
    c0: f64,
    pos: Vec<(i64, Complex64)>,
    bin_cap: f64,
    total_power: f64,
) -> (DiscreteSpectrum, SpectrumInfo) {
    let peak = pos.iter().map(|(_, c)| c.norm()).fold(c0.abs(), f64::max);
    let cut = bin_cap * peak;
    let kept: Vec<(i64, Complex64)> = pos.into_iter().filter(|(_, c)| c.norm() >= cut).collect();
    let dc = if c0.abs() >= cut { c0 } else { 0.0 };
    let spec = DiscreteSpectrum::from_one_sided(period, dc, &kept);
    let info = SpectrumInfo {
        retained_bins: spec.lines.len(),
        retained_power: spec.power(),
        total_power,
    };
    (spec, info)
}

/// Anything that can supply symmetric kernel values at real frequencies.
pub trait KernelSource {
    fn max_order(&self) -> usize;
    fn kernel(&self, freqs_hz: &[f64]) -> Result<Complex64, SynthError>;
    /// Frequencies beyond this return zero kernels; bins past it are skipped.
    fn reach_hz(&self, _order: usize) -> f64 {
        f64::INFINITY
    }
}

impl KernelSource for KernelSetArchive {
    fn max_order(&self) -> usize {
        KernelSetArchive::max_order(self)
    }

    fn kernel(&self, freqs_hz: &[f64]) -> Result<Complex64, SynthError> {
        let grid = self
            .grid(freqs_hz.len())
            .ok_or(SynthError::MissingOrder(freqs_hz.len()))?;
        Ok(grid.query_interpolated(freqs_hz)?)
    }

    fn reach_hz(&self, order: usize) -> f64 {
        self.grid(order).map_or(0.0, |g| g.reach_hz())
    }
}

/// Oracle kernels up to `max_order` as a synthesis source.
pub struct OracleSource<'a, O: VolterraOracle + ?Sized> {
    pub oracle: &'a O,
    pub max_order: usize,
}

impl<'a, O: VolterraOracle + ?Sized> KernelSource for OracleSource<'a, O> {
    fn max_order(&self) -> usize {
        self.max_order
    }

    fn kernel(&self, freqs_hz: &[f64]) -> Result<Complex64, SynthError> {
        if freqs_hz.len() > self.max_order {
            return Err(SynthError::MissingOrder(freqs_hz.len()));
        }
        self.oracle
            .kernel(freqs_hz)
            .map_err(|_| SynthError::MissingOrder(freqs_hz.len()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SynthSettings {
    /// Upper bound on multisets visited per order; the smallest input bins
    /// are dropped (deterministically) until the count fits.
    pub max_tuples: u64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings { max_tuples: 50_000_000 }
    }
}

/// Output line spectrum of one order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderSpectrum {
    pub order: usize,
    pub period: f64,
    /// Output coefficient per sum-frequency bin.
    pub lines: BTreeMap<i64, Complex64>,
    /// Input bins actually used.
    pub bins_used: usize,
    /// Input bins skipped as beyond the kernel reach or by the tuple cap.
    pub bins_skipped: usize,
    /// Share of input power in skipped bins.
    pub skipped_power_fraction: f64,
}

impl OrderSpectrum {
    /// `(real part, imaginary part)` of the output at `t`.
    pub fn eval_complex(&self, t: f64) -> Complex64 {
        let w = 2.0 * PI / self.period;
        self.lines
            .iter()
            .map(|(&k, &c)| c * Complex64::from_polar(1.0, w * k as f64 * t))
            .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let s = alpha.powi(self.order as i32);
        let mut out = self.clone();
        out.lines.values_mut().for_each(|c| *c *= s);
        out
    }
}

fn multiset_count(bins: usize, n: usize) -> u64 {
    // C(bins + n - 1, n)
    let mut c: u128 = 1;
    for i in 0..n as u128 {
        c = c * (bins as u128 + i) / (i + 1);
    }
    c.min(u64::MAX as u128) as u64
}

/// Neumaier-compensated complex accumulator.
#[derive(Clone, Copy, Default)]
struct Acc {
    sum: Complex64,
    comp: Complex64,
}

impl Acc {
    fn add(&mut self, v: Complex64) {
        self.sum.re = two_sum(self.sum.re, v.re, &mut self.comp.re);
        self.sum.im = two_sum(self.sum.im, v.im, &mut self.comp.im);
    }

    fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

fn two_sum(a: f64, b: f64, comp: &mut f64) -> f64 {
    let s = a + b;
    if a.abs() >= b.abs() {
        *comp += (a - s) + b;
    } else {
        *comp += (b - s) + a;
    }
    s
}

/// Order-`n` output spectrum.
pub fn synthesize_order_spectrum<K: KernelSource + ?Sized>(
    source: &K,
    spectrum: &DiscreteSpectrum,
    n: usize,
    settings: &SynthSettings,
) -> Result<OrderSpectrum, SynthError> {
    if n == 0 || n > source.max_order() {
        return Err(SynthError::MissingOrder(n));
    }
    let f0 = spectrum.fundamental_hz();
    let reach = source.reach_hz(n);
    let mut used: Vec<(i64, Complex64)> = spectrum
        .lines()
        .iter()
        .copied()
        .filter(|(k, _)| (*k as f64 * f0).abs() <= reach)
        .collect();
    if multiset_count(used.len(), n) > settings.max_tuples {
        // keep the largest bins, dropping conjugate pairs together
        let mut ranked: Vec<(i64, f64)> = used.iter().map(|&(k, c)| (k.abs(), c.norm())).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.dedup_by_key(|r| r.0);
        let mut keep = ranked.len();
        let lines_for = |keep: usize| -> usize { ranked[..keep].iter().map(|r| if r.0 == 0 { 1 } else { 2 }).sum() };
        while keep > 0 && multiset_count(lines_for(keep), n) > settings.max_tuples {
            keep -= 1;
        }
        let allowed: Vec<i64> = ranked[..keep].iter().map(|r| r.0).collect();
        used.retain(|(k, _)| allowed.contains(&k.abs()));
    }
    let used_power: f64 = used.iter().map(|(_, c)| c.norm_sqr()).sum();
    let total_power = spectrum.power();

    let m = used.len();
    let freqs: Vec<f64> = used.iter().map(|(k, _)| *k as f64 * f0).collect();
    let mut acc: BTreeMap<i64, Acc> = BTreeMap::new();
    let inv_fact: Vec<f64> = (0..=n as u32).map(|k| 1.0 / factorial(k) as f64).collect();
    let mut idx = vec![0usize; n];
    let mut args = vec![0.0; n];
    if m > 0 {
        'outer: loop {
            // weight = multiplicity / n! = 1 / prod(count_i!)
            let mut weight = 1.0;
            let mut run = 1;
            for i in 1..n {
                if idx[i] == idx[i - 1] {
                    run += 1;
                } else {
                    weight *= inv_fact[run];
                    run = 1;
                }
            }
            weight *= inv_fact[run];
            let mut prod = Complex64::new(weight, 0.0);
            let mut bin = 0i64;
            for (a, &i) in args.iter_mut().zip(&idx) {
                *a = freqs[i];
                prod *= used[i].1;
                bin += used[i].0;
            }
            let h = source.kernel(&args)?;
            acc.entry(bin).or_default().add(h * prod);

            // next non-decreasing index tuple
            let mut p = n;
            loop {
                if p == 0 {
                    break 'outer;
                }
                p -= 1;
                if idx[p] + 1 < m {
                    let v = idx[p] + 1;
                    for q in idx[p..].iter_mut() {
                        *q = v;
                    }
                    break;
                }
            }
        }
    }
    let lines = acc.into_iter().map(|(k, a)| (k, a.value())).collect();
    Ok(OrderSpectrum {
        order: n,
        period: spectrum.period,
        lines,
        bins_used: m,
        bins_skipped: spectrum.lines().len() - m,
        skipped_power_fraction: if total_power > 0.0 {
            ((total_power - used_power) / total_power).max(0.0)
        } else {
            0.0
        },
    })
}

/// Real waveform of one order at `times`, with the imaginary residue
/// `max|Im| / max|Re|` of the complex sum.
pub fn render(order: &OrderSpectrum, times: &[f64]) -> (Vec<f64>, f64) {
    let vals: Vec<Complex64> = times.iter().map(|&t| order.eval_complex(t)).collect();
    let re_max = vals.iter().fold(0.0, |m, v| m.max(v.re.abs()));
    let im_max = vals.iter().fold(0.0, |m, v| m.max(v.im.abs()));
    let residue = if re_max > 0.0 { im_max / re_max } else { im_max };
    (vals.iter().map(|v| v.re).collect(), residue)
}

/// Evenly spaced sample times `t0, t0 + dt, ..`.
pub fn sample_times(t0: f64, dt: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| t0 + i as f64 * dt).collect()
}

/// Order-`n` response sampled on `count` points from `t0` with step `dt`.
pub fn synthesize_order<K: KernelSource + ?Sized>(
    source: &K,
    spectrum: &DiscreteSpectrum,
    n: usize,
    t0: f64,
    dt: f64,
    count: usize,
    settings: &SynthSettings,
) -> Result<Waveform, SynthError> {
    let s = synthesize_order_spectrum(source, spectrum, n, settings)?;
    let (y, _) = render(&s, &sample_times(t0, dt, count));
    Ok(Waveform::new(y, dt, t0))
}

/// Per-order responses and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedResponse {
    pub orders: Vec<Waveform>,
    pub total: Waveform,
    /// Imaginary residue of each order (relative to its peak).
    pub imaginary_residue: Vec<f64>,
    pub spectra: Vec<OrderSpectrum>,
}

impl OrderedResponse {
    /// Rebuild from order spectra (e.g. after scaling by `alpha^n`).
    pub fn from_spectra(spectra: Vec<OrderSpectrum>, t0: f64, dt: f64, count: usize) -> Self {
        let times = sample_times(t0, dt, count);
        let mut orders = Vec::new();
        let mut residue = Vec::new();
        let mut total = Waveform::zeros(count, dt, t0);
        for s in &spectra {
            let (y, r) = render(s, &times);
            let w = Waveform::new(y, dt, t0);
            total = total.add(&w);
            orders.push(w);
            residue.push(r);
        }
        OrderedResponse {
            orders,
            total,
            imaginary_residue: residue,
            spectra,
        }
    }

    /// Same input scaled by `alpha`: order `n` scales by `alpha^n`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let w = &self.total;
        Self::from_spectra(
            self.spectra.iter().map(|s| s.scaled(alpha)).collect(),
            w.t0,
            w.dt,
            w.len(),
        )
    }
}

/// Orders `1..=max_order` of `source`.
pub fn synthesize_total<K: KernelSource + ?Sized>(
    source: &K,
    spectrum: &DiscreteSpectrum,
    t0: f64,
    dt: f64,
    count: usize,
    settings: &SynthSettings,
) -> Result<OrderedResponse, SynthError> {
    let spectra = (1..=source.max_order())
        .map(|n| synthesize_order_spectrum(source, spectrum, n, settings))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OrderedResponse::from_spectra(spectra, t0, dt, count))
}
