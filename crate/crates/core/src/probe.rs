//! Time-domain probing: fixed-step RK4 transients, bin-exact phasor
//! capture, and spectral datasets built either from transients or
//! directly from analytic kernels.
//!
//! Phasor convention: `B_k` is the coefficient of `exp(j (k.w) t)` in the
//! output, so a component at `w > 0` reads `2 Re{B e^{jwt}}` and a tone
//! `A cos(wt)` captures as `A/2`. The DC entry is the mean itself.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{ProbeError, SystemError};
use crate::mixing::{canonicalize_index, enumerate_output_indices_with_dc, gterms_at_index, FrequencyIndex};
use crate::plan::{validate_plan, SweepPlan, ToneSet};
use crate::signal::{InputSignal, Waveform};
use crate::systems::{NonlinearSystem, VolterraOracle};

/// Transient and capture parameters for one probing run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ProbeSettings {
    /// Samples in the captured record (one resolution period).
    pub samples_per_record: usize,
    /// RK4 steps per output sample.
    pub substeps: usize,
    /// Explicit settle time (s); `None` uses the time-constant rule.
    pub settle: Option<f64>,
    /// Settle time in units of the slowest time constant.
    pub settle_time_constants: f64,
    /// Lower bound on the settle time (s).
    pub min_settle: f64,
    /// RK4 steps required per period of the fastest input tone.
    pub steps_per_period: f64,
    /// Blow-up threshold relative to the input scale.
    pub blowup_factor: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            samples_per_record: 32768,
            substeps: 1,
            settle: None,
            settle_time_constants: 50.0,
            min_settle: 200e-9,
            steps_per_period: 20.0,
            blowup_factor: 1e6,
        }
    }
}

impl ProbeSettings {
    pub fn settle_time<S: NonlinearSystem + ?Sized>(&self, sys: &S) -> f64 {
        self.settle
            .unwrap_or_else(|| (self.settle_time_constants * sys.slowest_time_constant()).max(self.min_settle))
    }
}

/// How a dataset was produced.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CaptureInfo {
    pub method: String,
    pub sample_rate_hz: f64,
    pub record_length_s: f64,
    pub settle_time_s: f64,
    pub substeps: usize,
}

/// Input evaluated on the half-step grid `t_j = j h / 2`.
enum HalfStepInput<'a> {
    /// Integer tone frequencies on a cosine table covering one period.
    Table {
        table: Vec<f64>,
        bins: Vec<u64>,
        amplitudes: &'a [f64],
    },
    Direct {
        signal: &'a InputSignal,
        half_h: f64,
    },
}

impl<'a> HalfStepInput<'a> {
    fn new(signal: &'a InputSignal, h: f64) -> Self {
        if let InputSignal::Tones(ts) = signal {
            // half steps per period of the resolution frequency
            let per = 2.0 / (ts.delta_f_hz * h);
            let size = per.round();
            if (per - size).abs() < 1e-6 * size && size >= 1.0 && size <= (1u64 << 24) as f64 {
                let size = size as usize;
                let table = (0..size).map(|i| (2.0 * PI * i as f64 / size as f64).cos()).collect();
                return HalfStepInput::Table {
                    table,
                    bins: ts
                        .frequencies
                        .iter()
                        .map(|&f| f.rem_euclid(size as i64) as u64)
                        .collect(),
                    amplitudes: &ts.amplitudes,
                };
            }
        }
        HalfStepInput::Direct {
            signal,
            half_h: 0.5 * h,
        }
    }

    #[inline]
    fn at(&self, j: u64) -> f64 {
        match self {
            HalfStepInput::Table {
                table,
                bins,
                amplitudes,
            } => {
                let size = table.len() as u64;
                let mut u = 0.0;
                for (b, a) in bins.iter().zip(amplitudes.iter()) {
                    u += a * table[((b * (j % size)) % size) as usize];
                }
                u
            }
            HalfStepInput::Direct { signal, half_h } => signal.value(j as f64 * half_h),
        }
    }
}

/// Integrate from the zero state and return `samples` output points spaced
/// `dt`, starting at t = 0, with `substeps` RK4 steps per sample.
pub fn transient<S: NonlinearSystem + ?Sized>(
    sys: &S,
    input: &InputSignal,
    samples: usize,
    dt: f64,
    substeps: usize,
    blowup_factor: f64,
) -> Result<Waveform, ProbeError> {
    let substeps = substeps.max(1);
    let n = sys.state_dim();
    let h = dt / substeps as f64;
    let u = HalfStepInput::new(input, h);
    let limit = blowup_factor * if input.scale() > 0.0 { input.scale() } else { 1.0 };

    let mut x = vec![0.0; n];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y = Vec::with_capacity(samples);
    let per_sample = 2 * substeps as u64;

    for i in 0..samples {
        let j0 = i as u64 * per_sample;
        y.push(sys.output(&x, u.at(j0)));
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= limit) {
            return Err(ProbeError::Unstable {
                time: i as f64 * dt,
                norm,
            });
        }
        if i + 1 == samples {
            break;
        }
        for s in 0..substeps as u64 {
            let j = j0 + 2 * s;
            let (u0, um, u1) = (u.at(j), u.at(j + 1), u.at(j + 2));
            sys.derivative(&x, u0, &mut k1);
            for q in 0..n {
                tmp[q] = x[q] + 0.5 * h * k1[q];
            }
            sys.derivative(&tmp, um, &mut k2);
            for q in 0..n {
                tmp[q] = x[q] + 0.5 * h * k2[q];
            }
            sys.derivative(&tmp, um, &mut k3);
            for q in 0..n {
                tmp[q] = x[q] + h * k3[q];
            }
            sys.derivative(&tmp, u1, &mut k4);
            for q in 0..n {
                x[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
            }
        }
    }
    Ok(Waveform::new(y, dt, 0.0))
}

/// Read the phasor of every canonical index with `|k|_1 <= max_mixing_order`
/// (DC included) from the record `[settle, settle + record)` of `y`.
///
/// `tones` are integer multiples of `delta_f_hz`; every product must land on
/// a DFT bin of the record.
pub fn capture_phasors(
    y: &Waveform,
    tones: &[i64],
    delta_f_hz: f64,
    max_mixing_order: u32,
    settle: f64,
    record: f64,
) -> Result<BTreeMap<FrequencyIndex, Complex64>, ProbeError> {
    let n_f = record / y.dt;
    let n = n_f.round();
    if n < 1.0 || (n_f - n).abs() > 1e-6 * n {
        return Err(ProbeError::BadRecord(alloc::format!(
            "record {record:e} s is not a whole number of {:e} s samples",
            y.dt
        )));
    }
    let n = n as usize;
    let start_f = (settle - y.t0) / y.dt;
    let start = start_f.round().max(0.0) as usize;
    if start + n > y.len() {
        return Err(ProbeError::WaveformTooShort {
            needed: start + n,
            available: y.len(),
        });
    }
    let bins_per_unit = delta_f_hz * record;
    let mut wanted = Vec::new();
    for k in enumerate_output_indices_with_dc(tones.len(), max_mixing_order) {
        let units = k.frequency(tones);
        let bin_f = units as f64 * bins_per_unit;
        let bin = bin_f.round();
        if (bin_f - bin).abs() > 1e-9 * bin_f.abs().max(1.0) {
            return Err(ProbeError::BinMisaligned { index: k, bin: bin_f });
        }
        let bin = bin as i64;
        if 2 * bin.unsigned_abs() as usize >= n {
            return Err(ProbeError::AboveNyquist { index: k, bin });
        }
        wanted.push((k, bin));
    }

    let twiddle: Vec<Complex64> = (0..n)
        .map(|i| Complex64::from_polar(1.0, -2.0 * PI * i as f64 / n as f64))
        .collect();
    let rec = &y.samples[start..start + n];
    let t_start = y.t0 + start as f64 * y.dt;
    let mut out = BTreeMap::new();
    for (k, bin) in wanted {
        let step = bin.rem_euclid(n as i64) as usize;
        let mut idx = 0usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for &v in rec {
            acc += twiddle[idx] * v;
            idx += step;
            if idx >= n {
                idx -= n;
            }
        }
        acc /= n as f64;
        // undo the record's start phase exp(j w t_start)
        let rot = if y.t0 == 0.0 {
            twiddle[((bin.rem_euclid(n as i64) as u128 * start as u128) % n as u128) as usize]
        } else {
            Complex64::from_polar(1.0, -2.0 * PI * bin as f64 / record * t_start)
        };
        out.insert(k, acc * rot);
    }
    Ok(out)
}

/// One large-signal operating point: transient to steady state, then capture.
pub fn probe_lsop<S: NonlinearSystem + ?Sized>(
    sys: &S,
    tones: &ToneSet,
    max_mixing_order: u32,
    settings: &ProbeSettings,
) -> Result<BTreeMap<FrequencyIndex, Complex64>, ProbeError> {
    let n = settings.samples_per_record;
    let record = 1.0 / tones.delta_f_hz;
    let dt = record / n as f64;
    let h = dt / settings.substeps.max(1) as f64;
    let f_max = tones.max_frequency_hz();
    if f_max > 0.0 {
        let limit = 1.0 / (settings.steps_per_period * f_max);
        if h > limit {
            return Err(ProbeError::StepTooLarge { dt: h, limit });
        }
    }
    let settle_samples = (settings.settle_time(sys) / dt).ceil() as usize;
    let y = transient(
        sys,
        &InputSignal::Tones(tones.clone()),
        settle_samples + n,
        dt,
        settings.substeps,
        settings.blowup_factor,
    )?;
    capture_phasors(
        &y,
        &tones.frequencies,
        tones.delta_f_hz,
        max_mixing_order,
        settle_samples as f64 * dt,
        record,
    )
}

/// Output phasors keyed by (triplet, amplitude row, canonical index).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectralDataset {
    pub plan_id: String,
    pub tones: usize,
    pub capture: CaptureInfo,
    entries: BTreeMap<(usize, usize), BTreeMap<FrequencyIndex, Complex64>>,
}

impl SpectralDataset {
    pub fn new(plan_id: String, tones: usize, capture: CaptureInfo) -> Self {
        SpectralDataset {
            plan_id,
            tones,
            capture,
            entries: BTreeMap::new(),
        }
    }

    /// Store one phasor; non-canonical indices are folded with conjugation.
    pub fn insert(&mut self, triplet: usize, row: usize, k: &FrequencyIndex, b: Complex64) {
        let (c, flip) = canonicalize_index(k);
        let b = if flip { b.conj() } else { b };
        self.entries.entry((triplet, row)).or_default().insert(c, b);
    }

    pub fn insert_lsop(&mut self, triplet: usize, row: usize, phasors: BTreeMap<FrequencyIndex, Complex64>) {
        for (k, b) in phasors {
            self.insert(triplet, row, &k, b);
        }
    }

    /// Phasor at any index (the conjugate is returned for `-k`).
    pub fn get(&self, triplet: usize, row: usize, k: &FrequencyIndex) -> Option<Complex64> {
        let (c, flip) = canonicalize_index(k);
        let b = *self.entries.get(&(triplet, row))?.get(&c)?;
        Some(if flip { b.conj() } else { b })
    }

    pub fn lsop(&self, triplet: usize, row: usize) -> Option<&BTreeMap<FrequencyIndex, Complex64>> {
        self.entries.get(&(triplet, row))
    }

    pub fn lsops(&self) -> impl Iterator<Item = (&(usize, usize), &BTreeMap<FrequencyIndex, Complex64>)> {
        self.entries.iter()
    }

    /// Number of (triplet, row) operating points.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn remove(&mut self, triplet: usize, row: usize, k: &FrequencyIndex) -> Option<Complex64> {
        let (c, _) = canonicalize_index(k);
        self.entries.get_mut(&(triplet, row))?.remove(&c)
    }
}

/// Capture metadata for transient probing with `settings`.
pub fn transient_capture_info<S: NonlinearSystem + ?Sized>(
    sys: &S,
    plan: &SweepPlan,
    settings: &ProbeSettings,
) -> CaptureInfo {
    let record = 1.0 / plan.delta_f_hz;
    let dt = record / settings.samples_per_record as f64;
    CaptureInfo {
        method: String::from("rk4-transient"),
        sample_rate_hz: 1.0 / dt,
        record_length_s: record,
        settle_time_s: (settings.settle_time(sys) / dt).ceil() * dt,
        substeps: settings.substeps,
    }
}

/// Pre-flight checks shared by sequential and parallel probing.
pub fn check_probe_plan<S: NonlinearSystem + ?Sized>(sys: &S, plan: &SweepPlan) -> Result<(), ProbeError> {
    let report = validate_plan(plan);
    if !report.is_ok() {
        return Err(ProbeError::InvalidPlan(report.collisions.len()));
    }
    if let Some(bound) = sys.saturation_bound() {
        crate::plan::check_amplitude_bound(plan, bound)?;
    }
    Ok(())
}

/// Probe every (triplet, amplitude row) of `plan` in order.
pub fn generate_dataset<S: NonlinearSystem + ?Sized>(
    sys: &S,
    plan: &SweepPlan,
    settings: &ProbeSettings,
) -> Result<SpectralDataset, ProbeError> {
    check_probe_plan(sys, plan)?;
    let mut ds = SpectralDataset::new(
        plan.id.clone(),
        plan.tones(),
        transient_capture_info(sys, plan, settings),
    );
    for t in 0..plan.triplet_count() {
        for row in 0..plan.amplitudes.len() {
            let phasors = probe_lsop(sys, &plan.tone_set(t, row), plan.max_mixing_order, settings)?;
            ds.insert_lsop(t, row, phasors);
        }
    }
    Ok(ds)
}

/// Phasors of one triplet computed from kernels: every index gets
/// `sum_g coefficient_g(V) * H(g)` over groups of order `<= truncation`.
pub fn analytic_triplet<O: VolterraOracle + ?Sized>(
    oracle: &O,
    plan: &SweepPlan,
    triplet: usize,
    truncation: usize,
) -> Result<Vec<BTreeMap<FrequencyIndex, Complex64>>, SystemError> {
    let f_hz = plan.triplet_hz(triplet);
    let mut terms = Vec::new();
    for k in enumerate_output_indices_with_dc(plan.tones(), plan.max_mixing_order) {
        let mut group = Vec::new();
        for g in gterms_at_index(&k, truncation) {
            let args: Vec<f64> = g
                .arguments()
                .0
                .iter()
                .map(|a| if a.negative { -f_hz[a.tone] } else { f_hz[a.tone] })
                .collect();
            group.push((oracle.kernel(&args)?, g));
        }
        terms.push((k, group));
    }
    Ok(plan
        .amplitudes
        .iter()
        .map(|v| {
            terms
                .iter()
                .map(|(k, group)| {
                    let b = group
                        .iter()
                        .map(|(h, g)| *h * g.coefficient(v))
                        .fold(Complex64::new(0.0, 0.0), |a, b| a + b);
                    (k.clone(), b)
                })
                .collect()
        })
        .collect())
}

pub fn analytic_capture_info(truncation: usize) -> CaptureInfo {
    CaptureInfo {
        method: alloc::format!("analytic-order{truncation}"),
        ..CaptureInfo::default()
    }
}

/// Exact dataset from oracle kernels, no time stepping.
pub fn generate_dataset_analytic<O: VolterraOracle + ?Sized>(
    oracle: &O,
    plan: &SweepPlan,
    truncation: usize,
) -> Result<SpectralDataset, SystemError> {
    let mut ds = SpectralDataset::new(plan.id.clone(), plan.tones(), analytic_capture_info(truncation));
    for t in 0..plan.triplet_count() {
        for (row, phasors) in analytic_triplet(oracle, plan, t, truncation)?.into_iter().enumerate() {
            ds.insert_lsop(t, row, phasors);
        }
    }
    Ok(ds)
}
