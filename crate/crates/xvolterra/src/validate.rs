//! Time-domain and kernel-level comparison of an archive against its system.

use serde::{Deserialize, Serialize};
use xvolterra_core::analysis::{nrmse, separate_orders};
use xvolterra_core::kernel::{KernelGrid, KernelSetArchive};
use xvolterra_core::mixing::FrequencyIndex;
use xvolterra_core::plan::SweepPlan;
use xvolterra_core::probe::probe_lsop;
use xvolterra_core::synth::SpectrumInfo;
use xvolterra_core::systems::VolterraOracle;
use xvolterra_core::Complex64;

use crate::config::{ReferenceSystem, RunConfig};
use crate::error::Result;
use crate::pipeline::{direct_pulse, synthesize_pulse};

/// Bound on store symmetry defects (relative).
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Bound on the synthesizer's drive-scaling defect (relative to each order's peak).
pub const SYNTH_SCALING_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `true` when the value must stay at or below the limit.
    pub upper: bool,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            upper: true,
            passed: value <= limit,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            upper: false,
            passed: value >= limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveResult {
    pub scale: f64,
    pub amplitude_v: f64,
    pub total_nrmse: f64,
    pub linear_nrmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelErrors {
    pub order: usize,
    pub points: usize,
    pub max_relative: f64,
    pub median_relative: f64,
    /// Points where the oracle kernel is exactly zero; left out of the relative figures.
    pub zero_reference_points: usize,
    pub max_abs_at_zero: f64,
    /// Slice frequency (Hz) for third-order comparisons.
    pub slice_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SymmetryAudit {
    pub h2_points: usize,
    pub h2_permutation: f64,
    pub h2_conjugate: f64,
    pub h2_interpolated_permutation: f64,
    pub h2_interpolated_conjugate: f64,
    pub h3_slice_points: usize,
    pub h3_slice_permutation: f64,
    /// Largest `|S(-f1,-f2) - conj S(f1,f2)| / |S|` on the slice; the slice
    /// has no conjugate symmetry of its own, so this is not small in general.
    pub h3_slice_conjugate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub index: FrequencyIndex,
    pub order: u32,
    pub drop_db: f64,
    pub expected_db: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScalingAudit {
    /// Largest relative defect of `y_n(a u) = a^n y_n(u)` in the synthesizer.
    pub synthesizer: f64,
    /// Probed phasor drops for a 3 dB input drop.
    pub probed: Vec<ScalingRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub system_id: String,
    /// The archive reproduces the system exactly in principle (no orders above its truncation).
    pub exact_model: bool,
    pub spectrum: SpectrumInfo,
    pub skipped_power_fraction: Vec<f64>,
    pub drives: Vec<DriveResult>,
    /// Synthesized order `n` against the order split of the direct responses.
    pub order_nrmse: Vec<Option<f64>>,
    pub linear_ratio: f64,
    pub kernels: Vec<KernelErrors>,
    pub even_order_ratio: Option<f64>,
    pub symmetry: SymmetryAudit,
    pub scaling: ScalingAudit,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    let d = (a - b).norm();
    if d == 0.0 {
        0.0
    } else {
        d / b.norm()
    }
}

/// `max` that keeps NaN, so a missing value fails its check.
fn worse(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Lattice value (units of the resolution) nearest `hz`.
pub fn nearest_lattice(grid: &KernelGrid, hz: f64) -> i64 {
    let target = hz / grid.delta_f_hz();
    grid.lattice()
        .iter()
        .copied()
        .min_by(|a, b| (*a as f64 - target).abs().total_cmp(&(*b as f64 - target).abs()))
        .unwrap_or(0)
}

/// Measured points of `grid` compared with the oracle. Third-order points
/// are restricted to those with an argument of magnitude `slice`.
pub fn kernel_errors<O: VolterraOracle + ?Sized>(
    grid: &KernelGrid,
    oracle: &O,
    slice: Option<i64>,
) -> Result<(KernelErrors, Vec<f64>)> {
    let df = grid.delta_f_hz();
    let mut errs = Vec::new();
    let mut zero_points = 0;
    let mut max_abs_at_zero = 0.0f64;
    for (key, value, _) in grid.samples() {
        if let Some(s) = slice {
            if !key.iter().any(|a| a.abs() == s) {
                continue;
            }
        }
        let hz: Vec<f64> = key.iter().map(|&a| a as f64 * df).collect();
        let want = oracle.kernel(&hz)?;
        if want.norm() == 0.0 {
            zero_points += 1;
            max_abs_at_zero = max_abs_at_zero.max(value.norm());
        } else {
            errs.push(rel(value, want));
        }
    }
    let out = KernelErrors {
        order: grid.order(),
        points: errs.len(),
        max_relative: errs.iter().copied().fold(0.0, f64::max),
        median_relative: median(errs.clone()),
        zero_reference_points: zero_points,
        max_abs_at_zero,
        slice_hz: slice.map(|s| s as f64 * df),
    };
    Ok((out, errs))
}

/// Largest even-order sample magnitude over the largest odd-order one.
pub fn even_order_ratio(archive: &KernelSetArchive) -> Option<f64> {
    let mut even = 0.0f64;
    let mut odd = 0.0f64;
    for g in archive.grids() {
        let m = g.samples().fold(0.0f64, |m, (_, v, _)| m.max(v.norm()));
        if g.order() % 2 == 0 {
            even = even.max(m);
        } else {
            odd = odd.max(m);
        }
    }
    (archive.max_order() >= 2 && odd > 0.0).then(|| even / odd)
}

pub fn symmetry_audit(archive: &KernelSetArchive, slice_hz: f64) -> Result<SymmetryAudit> {
    let mut a = SymmetryAudit::default();
    if let Some(g) = archive.grid(2) {
        let df = g.delta_f_hz();
        // off-lattice probe points: shifted by fractions of the smallest lattice step
        let step = g.lattice().windows(2).map(|w| w[1] - w[0]).min().unwrap_or(1) as f64 * df;
        for (key, v, _) in g.samples() {
            let (x, y) = (key[0], key[1]);
            a.h2_points += 1;
            let swapped = g.query_exact(&[y, x]).unwrap_or(Complex64::new(f64::NAN, 0.0));
            let negated = g.query_exact(&[-x, -y]).unwrap_or(Complex64::new(f64::NAN, 0.0));
            a.h2_permutation = worse(a.h2_permutation, rel(swapped, v));
            a.h2_conjugate = worse(a.h2_conjugate, rel(negated, v.conj()));
            let (fx, fy) = (x as f64 * df + 0.37 * step, y as f64 * df - 0.21 * step);
            let q = g.query_interpolated(&[fx, fy])?;
            if q.norm() > 0.0 {
                a.h2_interpolated_permutation =
                    worse(a.h2_interpolated_permutation, rel(g.query_interpolated(&[fy, fx])?, q));
                a.h2_interpolated_conjugate = worse(
                    a.h2_interpolated_conjugate,
                    rel(g.query_interpolated(&[-fx, -fy])?, q.conj()),
                );
            }
        }
    }
    if let Some(g) = archive.grid(3) {
        let df = g.delta_f_hz();
        let s = nearest_lattice(g, slice_hz);
        let sh = s as f64 * df;
        for (key, _, _) in g.samples() {
            // slice coordinates: the key with one `+s` removed
            let Some(pos) = key.iter().position(|&a| a == s) else {
                continue;
            };
            let rest: Vec<f64> = key
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != pos)
                .map(|(_, &a)| a as f64 * df)
                .collect();
            let (f1, f2) = (rest[0], rest[1]);
            let v = g.query_interpolated(&[f1, f2, sh])?;
            if v.norm() == 0.0 {
                continue;
            }
            a.h3_slice_points += 1;
            a.h3_slice_permutation = worse(a.h3_slice_permutation, rel(g.query_interpolated(&[f2, f1, sh])?, v));
            a.h3_slice_conjugate = worse(
                a.h3_slice_conjugate,
                rel(g.query_interpolated(&[-f1, -f2, sh])?, v.conj()),
            );
        }
    }
    Ok(a)
}

/// Pure order-2 and order-3 mixing vectors on the first tones.
pub fn pure_indices(tones: usize) -> Vec<FrequencyIndex> {
    let mut out = Vec::new();
    if tones >= 2 {
        let mut k = vec![0; tones];
        k[0] = 1;
        k[1] = 1;
        out.push(FrequencyIndex::new(k.clone()));
        if tones >= 3 {
            k[2] = 1;
        } else {
            k[0] = 2;
        }
        out.push(FrequencyIndex::new(k));
    }
    out
}

/// Probe one triplet at its first amplitude row and 3 dB below, and report
/// the drop at pure-order indices. Indices whose phasor is below `floor` V
/// are left out.
pub fn probed_scaling(
    sys: &ReferenceSystem,
    plan: &SweepPlan,
    triplet: usize,
    settings: &xvolterra_core::probe::ProbeSettings,
    floor: f64,
) -> Result<Vec<ScalingRow>> {
    let hi = plan.tone_set(triplet, 0);
    let lo = hi.scaled(10f64.powf(-3.0 / 20.0));
    let bh = probe_lsop(sys, &hi, plan.max_mixing_order, settings)?;
    let bl = probe_lsop(sys, &lo, plan.max_mixing_order, settings)?;
    let mut rows = Vec::new();
    for k in pure_indices(plan.tones()) {
        let (Some(h), Some(l)) = (bh.get(&k), bl.get(&k)) else {
            continue;
        };
        if h.norm() <= floor {
            continue;
        }
        rows.push(ScalingRow {
            order: k.order(),
            drop_db: 20.0 * (h.norm() / l.norm()).log10(),
            expected_db: 3.0 * k.order() as f64,
            index: k,
        });
    }
    Ok(rows)
}

/// Run every comparison configured in `cfg.validation`.
pub fn validate(
    cfg: &RunConfig,
    sys: &ReferenceSystem,
    archive: &KernelSetArchive,
    plan: &SweepPlan,
) -> Result<ValidationReport> {
    let v = &cfg.validation;
    let syn = &cfg.synthesis;
    let exact_model = sys.max_order().is_some_and(|m| m <= archive.max_order());
    let mut checks = Vec::new();

    let (base, spectrum) = synthesize_pulse(archive, syn, 1.0)?;
    let mut drives = Vec::new();
    let mut direct = Vec::new();
    for &scale in &v.drive_scales {
        let reference = direct_pulse(sys, syn, scale, v.substeps)?;
        let pred = base.scaled(scale);
        drives.push(DriveResult {
            scale,
            amplitude_v: syn.pulse.amplitude * scale,
            total_nrmse: nrmse(&pred.total.samples, &reference.samples),
            linear_nrmse: nrmse(&pred.orders[0].samples, &reference.samples),
        });
        direct.push(reference);
    }

    let mut order_nrmse = Vec::new();
    if !v.drive_scales.is_empty() {
        let parts = separate_orders(&direct, &v.drive_scales);
        // responses were taken at drive scales relative to the base pulse
        for (n, part) in parts.iter().enumerate().take(archive.max_order()) {
            if part.samples.iter().all(|&x| x == 0.0) {
                order_nrmse.push(None);
            } else {
                order_nrmse.push(Some(nrmse(&base.orders[n].samples, &part.samples)));
            }
        }
    }

    let primary = drives.iter().find(|d| d.scale == 1.0).or(drives.first()).cloned();
    let mut linear_ratio = f64::NAN;
    if let Some(d) = &primary {
        checks.push(Check::at_most("total nrmse", d.total_nrmse, v.total_nrmse_max));
        linear_ratio = d.linear_nrmse / d.total_nrmse;
        if let Some(min) = v.linear_ratio_min {
            checks.push(Check::at_least("linear-only nrmse / total nrmse", linear_ratio, min));
        }
    }
    if v.require_monotone {
        let mut by_scale = drives.clone();
        by_scale.sort_by(|a, b| b.scale.total_cmp(&a.scale));
        let worst = by_scale
            .windows(2)
            .map(|w| w[1].total_nrmse - w[0].total_nrmse)
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::at_most("nrmse growth as drive falls", worst.max(0.0), 0.0));
    }

    let mut kernels = Vec::new();
    for g in archive.grids() {
        if g.is_empty() || g.order() > 3 {
            continue;
        }
        let slice = (g.order() == 3).then(|| nearest_lattice(g, v.slice_frequency_hz));
        let (row, _) = match kernel_errors(g, sys, slice) {
            Ok(r) => r,
            // oracle orders beyond its range leave the table out
            Err(crate::error::Error::System(_)) => continue,
            Err(e) => return Err(e),
        };
        if exact_model {
            if let Some(&tol) = v.kernel_tolerance.get(g.order() - 1) {
                checks.push(Check::at_most(
                    format!("H{} max relative error", g.order()),
                    row.max_relative,
                    tol,
                ));
            }
        }
        kernels.push(row);
    }

    let even = even_order_ratio(archive);
    if sys.is_odd() {
        if let Some(r) = even {
            checks.push(Check::at_most("even/odd kernel magnitude", r, v.even_order_ratio_max));
        }
    }

    let symmetry = symmetry_audit(archive, v.slice_frequency_hz)?;
    if symmetry.h2_points > 0 {
        checks.push(Check::at_most(
            "H2 permutation symmetry",
            symmetry.h2_permutation,
            SYMMETRY_TOLERANCE,
        ));
        checks.push(Check::at_most(
            "H2 conjugate symmetry",
            symmetry.h2_conjugate,
            SYMMETRY_TOLERANCE,
        ));
    }
    if symmetry.h3_slice_points > 0 {
        checks.push(Check::at_most(
            "H3 slice permutation symmetry",
            symmetry.h3_slice_permutation,
            SYMMETRY_TOLERANCE,
        ));
    }

    let mut synth_scaling = 0.0f64;
    for &scale in &v.drive_scales {
        let (direct_syn, _) = synthesize_pulse(archive, syn, scale)?;
        let scaled = base.scaled(scale);
        for (a, b) in direct_syn.orders.iter().zip(&scaled.orders) {
            let peak = b.max_abs();
            if peak == 0.0 {
                continue;
            }
            let d = a
                .samples
                .iter()
                .zip(&b.samples)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            synth_scaling = synth_scaling.max(d / peak);
        }
    }
    checks.push(Check::at_most(
        "synthesizer drive scaling",
        synth_scaling,
        SYNTH_SCALING_TOLERANCE,
    ));

    let mut probed = Vec::new();
    if v.scaling_triplet < plan.triplet_count() && !plan.amplitudes.is_empty() {
        probed = probed_scaling(sys, plan, v.scaling_triplet, &cfg.probe.settings(plan), 1e-9)?;
        if exact_model {
            for r in &probed {
                checks.push(Check::at_most(
                    format!("probed {} drop deviation (dB)", r.index),
                    (r.drop_db - r.expected_db).abs(),
                    v.scaling_tolerance_db,
                ));
            }
        }
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        system_id: archive.metadata.system_id.clone(),
        exact_model,
        spectrum,
        skipped_power_fraction: base.spectra.iter().map(|s| s.skipped_power_fraction).collect(),
        drives,
        order_nrmse,
        linear_ratio,
        kernels,
        even_order_ratio: even,
        symmetry,
        scaling: ScalingAudit {
            synthesizer: synth_scaling,
            probed,
        },
        checks,
        passed,
    })
}

impl ValidationReport {
    /// Plain-text summary for the terminal.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "system {} (exact model: {})\n",
            self.system_id, self.exact_model
        ));
        for d in &self.drives {
            s.push_str(&format!(
                "  drive {:>8.4} V  total nrmse {:>10.3e}  linear-only {:>10.3e}\n",
                d.amplitude_v, d.total_nrmse, d.linear_nrmse
            ));
        }
        for (n, e) in self.order_nrmse.iter().enumerate() {
            if let Some(e) = e {
                s.push_str(&format!("  order {} nrmse {:.3e}\n", n + 1, e));
            }
        }
        for k in &self.kernels {
            s.push_str(&format!(
                "  H{} points {:>6}  max rel {:>10.3e}  median rel {:>10.3e}\n",
                k.order, k.points, k.max_relative, k.median_relative
            ));
            if k.zero_reference_points > 0 {
                s.push_str(&format!(
                    "     {} points where the oracle is zero, largest |H| {:.3e}\n",
                    k.zero_reference_points, k.max_abs_at_zero
                ));
            }
        }
        for c in &self.checks {
            s.push_str(&format!(
                "  [{}] {}: {:.4e} ({} {:.4e})\n",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.value,
                if c.upper { "<=" } else { ">=" },
                c.limit
            ));
        }
        s.push_str(if self.passed {
            "validation passed\n"
        } else {
            "validation FAILED\n"
        });
        s
    }
}
