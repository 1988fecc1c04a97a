//! Multi-tone sweep plans: tone axes on a common frequency resolution,
//! per-triplet collision checks and amplitude schedules.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::ProbeError;
use crate::mixing::{all_indices, gterms_at_index, FrequencyIndex};

/// Reference impedance used for dBm conversion.
pub const Z0_OHMS: f64 = 50.0;

/// Default seed for jittered amplitude rows.
pub const DEFAULT_SCHEDULE_SEED: u64 = 0x5eed;

/// One swept tone: `count` points from `start` in increments of `step`,
/// all in units of the plan resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ToneAxis {
    pub start: i64,
    pub step: i64,
    pub count: usize,
}

impl ToneAxis {
    /// Axis from inclusive start/stop; `stop` must lie on the step grid.
    pub fn from_range(start: i64, step: i64, stop: i64) -> Option<Self> {
        if step <= 0 || stop < start || (stop - start) % step != 0 {
            return None;
        }
        Some(ToneAxis {
            start,
            step,
            count: ((stop - start) / step + 1) as usize,
        })
    }

    pub fn stop(&self) -> i64 {
        self.start + self.step * (self.count as i64 - 1)
    }

    pub fn point(&self, i: usize) -> i64 {
        self.start + self.step * i as i64
    }

    pub fn points(&self) -> Vec<i64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }
}

/// Tone frequencies (integer multiples of `delta_f_hz`) with real peak
/// amplitudes in volts; all phases are zero.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ToneSet {
    pub delta_f_hz: f64,
    pub frequencies: Vec<i64>,
    pub amplitudes: Vec<f64>,
}

impl ToneSet {
    pub fn new(delta_f_hz: f64, frequencies: Vec<i64>, amplitudes: Vec<f64>) -> Self {
        assert_eq!(frequencies.len(), amplitudes.len());
        ToneSet {
            delta_f_hz,
            frequencies,
            amplitudes,
        }
    }

    pub fn frequency_hz(&self, m: usize) -> f64 {
        self.frequencies[m] as f64 * self.delta_f_hz
    }

    pub fn omega(&self, m: usize) -> f64 {
        2.0 * core::f64::consts::PI * self.frequency_hz(m)
    }

    pub fn max_frequency_hz(&self) -> f64 {
        self.frequencies.iter().copied().max().unwrap_or(0) as f64 * self.delta_f_hz
    }

    /// Worst-case peak of the summed tones.
    pub fn peak(&self) -> f64 {
        self.amplitudes.iter().map(|v| v.abs()).sum()
    }

    /// Same frequencies with every amplitude multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut t = self.clone();
        t.amplitudes.iter_mut().for_each(|v| *v *= alpha);
        t
    }
}

/// Frequency sweep plus amplitude schedule.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SweepPlan {
    pub id: String,
    pub delta_f_hz: f64,
    pub axes: Vec<ToneAxis>,
    pub max_mixing_order: u32,
    /// One amplitude vector (V, one entry per tone) per probing row.
    pub amplitudes: Vec<Vec<f64>>,
}

impl SweepPlan {
    pub fn tones(&self) -> usize {
        self.axes.len()
    }

    pub fn triplet_count(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    /// Frequencies of triplet `id` (row-major, first axis slowest).
    pub fn triplet(&self, id: usize) -> Vec<i64> {
        let mut rem = id;
        let mut out = vec![0; self.axes.len()];
        for (m, axis) in self.axes.iter().enumerate().rev() {
            out[m] = axis.point(rem % axis.count);
            rem /= axis.count;
        }
        out
    }

    pub fn triplet_hz(&self, id: usize) -> Vec<f64> {
        self.triplet(id)
            .into_iter()
            .map(|f| f as f64 * self.delta_f_hz)
            .collect()
    }

    /// Sorted union of all axis points; the shared kernel lattice.
    pub fn lattice(&self) -> Vec<i64> {
        let mut l: Vec<i64> = self.axes.iter().flat_map(|a| a.points()).collect();
        l.sort_unstable();
        l.dedup();
        l
    }

    pub fn tone_set(&self, triplet: usize, row: usize) -> ToneSet {
        ToneSet::new(self.delta_f_hz, self.triplet(triplet), self.amplitudes[row].clone())
    }

    /// Highest frequency appearing on any axis (Hz).
    pub fn max_tone_hz(&self) -> f64 {
        self.axes.iter().map(|a| a.stop()).max().unwrap_or(0) as f64 * self.delta_f_hz
    }
}

/// dBm into peak volts across `z0`: `sqrt(2 z0 10^((P-30)/10))`.
pub fn dbm_to_peak_volts(dbm: f64, z0: f64) -> f64 {
    (2.0 * z0 * 10f64.powf((dbm - 30.0) / 10.0)).sqrt()
}

/// Cross product of `levels_dbm` over every tone (first tone slowest),
/// followed by `n_extra` rows whose per-tone levels are drawn uniformly in
/// dB between the lowest and highest level.
pub fn amplitude_schedule(levels_dbm: &[f64], tones: usize, z0: f64, n_extra: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(!levels_dbm.is_empty(), "at least one power level is required");
    let volts: Vec<f64> = levels_dbm.iter().map(|&p| dbm_to_peak_volts(p, z0)).collect();
    let mut rows = Vec::new();
    let mut idx = vec![0usize; tones];
    'outer: loop {
        rows.push(idx.iter().map(|&i| volts[i]).collect());
        let mut pos = tones;
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < volts.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
    let lo = levels_dbm.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = levels_dbm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_extra {
        rows.push(
            (0..tones)
                .map(|_| {
                    let p = if hi > lo { rng.gen_range(lo..hi) } else { lo };
                    dbm_to_peak_volts(p, z0)
                })
                .collect(),
        );
    }
    rows
}

/// Largest least-squares unknown count over all output indices, including DC.
pub fn max_unknowns(tones: usize, max_mixing_order: u32, truncation_order: usize) -> usize {
    all_indices(tones, max_mixing_order)
        .into_iter()
        .filter(FrequencyIndex::is_canonical)
        .map(|k| gterms_at_index(&k, truncation_order).len())
        .max()
        .unwrap_or(0)
}

/// Default redundancy: two extra rows per unknown of the largest system.
pub fn default_extra_rows(tones: usize, max_mixing_order: u32, truncation_order: usize) -> usize {
    2 * max_unknowns(tones, max_mixing_order, truncation_order)
}

/// Axes 7/41/87 MHz, 120 MHz step, `points` per axis, at 1 MHz resolution.
/// `points = 18` reaches 2.047/2.081/2.127 GHz.
pub fn standard_axes(points: usize) -> Vec<ToneAxis> {
    [7, 41, 87]
        .iter()
        .map(|&start| ToneAxis {
            start,
            step: 120,
            count: points,
        })
        .collect()
}

/// The full three-tone sweep (18 points per axis) with a {5, 10} dBm schedule.
pub fn build_standard_plan() -> SweepPlan {
    build_reduced_plan(18)
}

/// Same starts and step as [`build_standard_plan`] with fewer points per axis.
pub fn build_reduced_plan(points: usize) -> SweepPlan {
    let id = if points == 18 {
        String::from("standard")
    } else {
        alloc::format!("standard-{points}pt")
    };
    SweepPlan {
        id,
        delta_f_hz: 1e6,
        axes: standard_axes(points),
        max_mixing_order: 3,
        amplitudes: amplitude_schedule(
            &[5.0, 10.0],
            3,
            Z0_OHMS,
            default_extra_rows(3, 3, 3),
            DEFAULT_SCHEDULE_SEED,
        ),
    }
}

/// Two mixing vectors landing on the same frequency within one triplet.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Collision {
    pub triplet: usize,
    pub a: FrequencyIndex,
    pub b: FrequencyIndex,
    /// Shared frequency in units of the plan resolution.
    pub frequency: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PlanReport {
    pub triplets_checked: usize,
    pub collisions: Vec<Collision>,
}

impl PlanReport {
    pub fn is_ok(&self) -> bool {
        self.collisions.is_empty()
    }
}

/// Pairs of distinct mixing vectors (both signs and zero included, so
/// products landing on another's negation or on DC are caught) with equal
/// integer frequency.
pub fn triplet_collisions(frequencies: &[i64], max_mixing_order: u32) -> Vec<(FrequencyIndex, FrequencyIndex, i64)> {
    let mut sums: Vec<(i64, FrequencyIndex)> = all_indices(frequencies.len(), max_mixing_order)
        .into_iter()
        .map(|k| (k.frequency(frequencies), k))
        .collect();
    sums.sort();
    let mut out = Vec::new();
    let mut i = 0;
    while i < sums.len() {
        let mut j = i + 1;
        while j < sums.len() && sums[j].0 == sums[i].0 {
            j += 1;
        }
        for a in i..j {
            for b in a + 1..j {
                let (ka, kb) = (&sums[a].1, &sums[b].1);
                // report each coincidence once: keep the pair whose first
                // member is canonical, or the DC pair
                if ka.is_canonical() || kb.is_canonical() {
                    out.push((ka.clone(), kb.clone(), sums[i].0));
                }
            }
        }
        i = j;
    }
    out
}

pub fn validate_plan(plan: &SweepPlan) -> PlanReport {
    let mut report = PlanReport {
        triplets_checked: plan.triplet_count(),
        collisions: Vec::new(),
    };
    for t in 0..plan.triplet_count() {
        let f = plan.triplet(t);
        for (a, b, frequency) in triplet_collisions(&f, plan.max_mixing_order) {
            report.collisions.push(Collision {
                triplet: t,
                a,
                b,
                frequency,
            });
        }
    }
    report
}

/// Every row's summed tone peak must stay below `bound` volts.
pub fn check_amplitude_bound(plan: &SweepPlan, bound: f64) -> Result<(), ProbeError> {
    for row in &plan.amplitudes {
        let peak: f64 = row.iter().map(|v| v.abs()).sum();
        if peak > bound {
            return Err(ProbeError::AmplitudeAboveBound { amplitude: peak, bound });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_axes_and_first_triplet() {
        let p = build_standard_plan();
        assert_eq!(p.axes[0].count, 18);
        assert_eq!(p.axes[0].stop(), 2047);
        assert_eq!(p.axes[1].stop(), 2081);
        assert_eq!(p.axes[2].stop(), 2127);
        assert_eq!(p.triplet(0), vec![7, 41, 87]);
        assert_eq!(p.triplet(1), vec![7, 41, 207]);
        assert_eq!(p.triplet(p.triplet_count() - 1), vec![2047, 2081, 2127]);
        assert_eq!(ToneAxis::from_range(7, 120, 2047), Some(p.axes[0]));
    }

    #[test]
    fn merged_lattice_step_is_40_mhz() {
        let l = build_standard_plan().lattice();
        assert_eq!(l.len(), 54);
        let mean = (l[53] - l[0]) as f64 / 53.0;
        assert_eq!(mean, 40.0);
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_peak_volts(10.0, 50.0) - 1.0).abs() < 1e-12);
        assert!((dbm_to_peak_volts(5.0, 50.0) - 0.562341).abs() < 1e-6);
    }

    #[test]
    fn schedule_shape() {
        let s = amplitude_schedule(&[5.0, 10.0], 3, 50.0, 8, 1);
        assert_eq!(s.len(), 16);
        let lo = dbm_to_peak_volts(5.0, 50.0);
        let hi = dbm_to_peak_volts(10.0, 50.0);
        assert_eq!(s[0], vec![lo, lo, lo]);
        assert_eq!(s[1], vec![lo, lo, hi]);
        assert_eq!(s[7], vec![hi, hi, hi]);
        for row in &s[8..] {
            assert!(row.iter().all(|&v| v >= lo && v <= hi));
        }
        assert_eq!(s, amplitude_schedule(&[5.0, 10.0], 3, 50.0, 8, 1));
        assert_eq!(max_unknowns(3, 3, 3), 4);
    }

    #[test]
    fn harmonic_overlap_detected() {
        let c = triplet_collisions(&[10, 20, 37], 3);
        assert!(c.iter().any(|(a, b, _)| {
            let pair = [a.0.clone(), b.0.clone()];
            pair.contains(&vec![2, 0, 0]) && pair.contains(&vec![0, 1, 0])
        }));
        let c = triplet_collisions(&[10, 23, 33], 3);
        assert!(c.iter().any(|(a, b, _)| {
            let pair = [a.0.clone(), b.0.clone()];
            pair.contains(&vec![1, 1, 0]) && pair.contains(&vec![0, 0, 1])
        }));
    }

    #[test]
    fn amplitude_bound() {
        let mut p = build_reduced_plan(2);
        assert!(check_amplitude_bound(&p, 3.1).is_ok());
        p.amplitudes = vec![vec![0.05, 0.05, 0.05]];
        assert!(matches!(
            check_amplitude_bound(&p, 0.07),
            Err(ProbeError::AmplitudeAboveBound { .. })
        ));
    }
}
