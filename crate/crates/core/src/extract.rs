//! Kernel separation by least squares over the amplitude schedule.
//!
//! For a fixed triplet and output index `k`, each amplitude row gives one
//! equation `B_k(V) = sum_g c_g(V) H_g`, with real coefficients `c_g` from
//! [`GTermDescriptor::coefficient`] and one complex unknown per kernel
//! group of order `<= M`. Systems are solved by SVD (minimum-norm least
//! squares); the real coefficient matrix is shared by the real and
//! imaginary parts of the right-hand side.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::ExtractError;
use crate::kernel::{canonical_args, ArchiveMetadata, FillReport, KernelGrid, KernelSetArchive};
use crate::mixing::{
    enumerate_output_indices, enumerate_output_indices_with_dc, gterms_at_index, FrequencyIndex, GTermDescriptor,
};
use crate::plan::SweepPlan;
use crate::probe::SpectralDataset;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct ExtractionSettings {
    /// Highest kernel order kept in every system.
    pub truncation_order: usize,
    /// Solve low orders first on the smallest-amplitude rows, then the rest.
    pub two_stage: bool,
    /// Orders `<= stage1_max_order` are fixed by the first stage.
    pub stage1_max_order: usize,
    /// First stage fits the whole truncated model on its rows (keeping only
    /// the low orders); otherwise it fits the low orders alone.
    pub stage1_full_model: bool,
    /// Fraction of rows, smallest amplitude first, used by the first stage;
    /// extended row by row until the first-stage system has full rank.
    pub stage1_row_fraction: f64,
    /// Scale columns to unit norm before solving.
    pub column_scaling: bool,
    /// Singular values below this fraction of the largest count as zero.
    pub rank_tolerance: f64,
    /// Residual above this fraction of the right-hand side norm raises a warning.
    pub residual_tolerance: f64,
    /// Right-hand sides below this norm (V) are treated as noise for warnings.
    pub residual_floor: f64,
    /// Include the DC index (second-order kernels at `(w, -w)`).
    pub include_dc: bool,
    /// Fraction of systems that must resolve for the archive to be accepted.
    pub min_resolved_fraction: f64,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        ExtractionSettings {
            truncation_order: 3,
            two_stage: true,
            stage1_max_order: 1,
            stage1_full_model: true,
            stage1_row_fraction: 0.5,
            column_scaling: true,
            rank_tolerance: 1e-12,
            residual_tolerance: 1e-3,
            residual_floor: 1e-12,
            include_dc: true,
            min_resolved_fraction: 0.95,
        }
    }
}

impl ExtractionSettings {
    pub fn single_stage() -> Self {
        ExtractionSettings {
            two_stage: false,
            ..Self::default()
        }
    }
}

/// Kernel groups at `k` of order `1..=max_order`, ascending in order.
pub fn unknowns_at_index(k: &FrequencyIndex, max_order: usize) -> Vec<GTermDescriptor> {
    gterms_at_index(k, max_order)
}

/// Least-squares system for one output index of one triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct LsSystem {
    pub triplet: usize,
    pub index: FrequencyIndex,
    pub unknowns: Vec<GTermDescriptor>,
    /// Row-major coefficients, `rows x unknowns`.
    pub coefficients: Vec<Vec<f64>>,
    pub rhs: Vec<Complex64>,
    /// Amplitude row ids, parallel to `coefficients`.
    pub row_ids: Vec<usize>,
    /// Peak drive of each row (sum of tone amplitudes).
    pub row_drive: Vec<f64>,
}

impl LsSystem {
    pub fn rows(&self) -> usize {
        self.rhs.len()
    }
}

pub fn build_ls_system(
    dataset: &SpectralDataset,
    plan: &SweepPlan,
    triplet: usize,
    k: &FrequencyIndex,
    settings: &ExtractionSettings,
) -> Result<LsSystem, ExtractError> {
    let unknowns = unknowns_at_index(k, settings.truncation_order);
    let mut sys = LsSystem {
        triplet,
        index: k.clone(),
        unknowns,
        coefficients: Vec::new(),
        rhs: Vec::new(),
        row_ids: Vec::new(),
        row_drive: Vec::new(),
    };
    for (row, v) in plan.amplitudes.iter().enumerate() {
        let b = dataset.get(triplet, row, k).ok_or_else(|| ExtractError::MissingEntry {
            triplet,
            amplitude: row,
            index: k.clone(),
        })?;
        sys.coefficients
            .push(sys.unknowns.iter().map(|g| g.coefficient(v)).collect());
        sys.rhs.push(b);
        sys.row_ids.push(row);
        sys.row_drive.push(v.iter().map(|a| a.abs()).sum());
    }
    Ok(sys)
}

/// Solution of one system with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LsSolution {
    pub values: Vec<(GTermDescriptor, Complex64)>,
    pub rank: usize,
    /// Largest over smallest singular value of the (scaled) final system.
    pub condition: f64,
    pub residual_norm: f64,
    pub rhs_norm: f64,
    pub residual_warning: bool,
    /// Rows used by the first stage, when two stages ran.
    pub stage1_rows: Option<usize>,
}

struct Dense {
    values: Vec<Complex64>,
    rank: usize,
    condition: f64,
}

/// Minimum-norm solution of `A x = b` for real `A` and complex `b`.
fn solve_dense(a: &DMatrix<f64>, b: &[Complex64], scaling: bool, rank_tol: f64) -> Dense {
    let (rows, cols) = a.shape();
    let mut scale = vec![1.0; cols];
    let mut m = a.clone();
    if scaling {
        for (j, s) in scale.iter_mut().enumerate() {
            let norm = m.column(j).norm();
            if norm > 0.0 {
                *s = 1.0 / norm;
                m.column_mut(j).scale_mut(*s);
            }
        }
    }
    let svd = m.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let eps = rank_tol * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let re = DVector::from_iterator(rows, b.iter().map(|z| z.re));
    let im = DVector::from_iterator(rows, b.iter().map(|z| z.im));
    let xr = svd.solve(&re, eps).expect("SVD computed with U and V");
    let xi = svd.solve(&im, eps).expect("SVD computed with U and V");
    Dense {
        values: (0..cols).map(|j| Complex64::new(xr[j], xi[j]) * scale[j]).collect(),
        rank,
        condition,
    }
}

fn matrix_of(sys: &LsSystem, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| sys.coefficients[rows[i]][cols[j]])
}

/// Condition number of the system's coefficient matrix as it would be solved.
pub fn condition_number(sys: &LsSystem, column_scaling: bool) -> f64 {
    let rows: Vec<usize> = (0..sys.rows()).collect();
    let cols: Vec<usize> = (0..sys.unknowns.len()).collect();
    let zeros = vec![Complex64::new(0.0, 0.0); rows.len()];
    solve_dense(&matrix_of(sys, &rows, &cols), &zeros, column_scaling, 0.0).condition
}

pub fn solve_ls(sys: &LsSystem, settings: &ExtractionSettings) -> Result<LsSolution, ExtractError> {
    let nu = sys.unknowns.len();
    let nr = sys.rows();
    if nr < nu {
        return Err(ExtractError::Underdetermined { rows: nr, unknowns: nu });
    }
    if nu == 0 {
        let rhs_norm = sys.rhs.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        return Ok(LsSolution {
            values: Vec::new(),
            rank: 0,
            condition: 1.0,
            residual_norm: rhs_norm,
            rhs_norm,
            residual_warning: false,
            stage1_rows: None,
        });
    }
    let all_rows: Vec<usize> = (0..nr).collect();
    let low: Vec<usize> = (0..nu)
        .filter(|&j| sys.unknowns[j].order() <= settings.stage1_max_order)
        .collect();
    let high: Vec<usize> = (0..nu)
        .filter(|&j| sys.unknowns[j].order() > settings.stage1_max_order)
        .collect();

    let mut x = vec![Complex64::new(0.0, 0.0); nu];
    let mut stage1_rows = None;
    let (rank, condition) = if settings.two_stage && !low.is_empty() && !high.is_empty() {
        // smallest drive first, ties by row id
        let mut order = all_rows.clone();
        order.sort_by(|&a, &b| sys.row_drive[a].total_cmp(&sys.row_drive[b]).then(a.cmp(&b)));
        let cols1: Vec<usize> = if settings.stage1_full_model {
            (0..nu).collect()
        } else {
            low.clone()
        };
        let mut take = ((settings.stage1_row_fraction * nr as f64).ceil() as usize).clamp(cols1.len(), nr);
        let stage1 = loop {
            let rows = &order[..take];
            let rhs: Vec<Complex64> = rows.iter().map(|&r| sys.rhs[r]).collect();
            let d = solve_dense(
                &matrix_of(sys, rows, &cols1),
                &rhs,
                settings.column_scaling,
                settings.rank_tolerance,
            );
            if d.rank == cols1.len() || take == nr {
                break d;
            }
            take += 1;
        };
        if stage1.rank < cols1.len() {
            return Err(ExtractError::RankDeficient {
                rank: stage1.rank,
                unknowns: cols1.len(),
                condition: stage1.condition,
            });
        }
        stage1_rows = Some(take);
        for (pos, &j) in cols1.iter().enumerate() {
            if low.contains(&j) {
                x[j] = stage1.values[pos];
            }
        }
        let rhs2: Vec<Complex64> = (0..nr)
            .map(|r| {
                let known: Complex64 = low
                    .iter()
                    .map(|&j| x[j] * sys.coefficients[r][j])
                    .fold(Complex64::new(0.0, 0.0), |a, b| a + b);
                sys.rhs[r] - known
            })
            .collect();
        let d = solve_dense(
            &matrix_of(sys, &all_rows, &high),
            &rhs2,
            settings.column_scaling,
            settings.rank_tolerance,
        );
        if d.rank < high.len() {
            return Err(ExtractError::RankDeficient {
                rank: d.rank,
                unknowns: high.len(),
                condition: d.condition,
            });
        }
        for (pos, &j) in high.iter().enumerate() {
            x[j] = d.values[pos];
        }
        (stage1.rank + d.rank, stage1.condition.max(d.condition))
    } else {
        let cols: Vec<usize> = (0..nu).collect();
        let d = solve_dense(
            &matrix_of(sys, &all_rows, &cols),
            &sys.rhs,
            settings.column_scaling,
            settings.rank_tolerance,
        );
        if d.rank < nu {
            return Err(ExtractError::RankDeficient {
                rank: d.rank,
                unknowns: nu,
                condition: d.condition,
            });
        }
        x = d.values;
        (d.rank, d.condition)
    };

    let mut res2 = 0.0;
    let mut rhs2 = 0.0;
    for r in 0..nr {
        let fit: Complex64 = (0..nu)
            .map(|j| x[j] * sys.coefficients[r][j])
            .fold(Complex64::new(0.0, 0.0), |a, b| a + b);
        res2 += (sys.rhs[r] - fit).norm_sqr();
        rhs2 += sys.rhs[r].norm_sqr();
    }
    let residual_norm = res2.sqrt();
    let rhs_norm = rhs2.sqrt();
    Ok(LsSolution {
        values: sys.unknowns.iter().cloned().zip(x).collect(),
        rank,
        condition,
        residual_norm,
        rhs_norm,
        residual_warning: residual_norm > settings.residual_tolerance * rhs_norm.max(settings.residual_floor),
        stage1_rows,
    })
}

/// One recovered kernel sample, ready for grid insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSample {
    pub order: usize,
    /// Signed argument frequencies in units of the plan resolution.
    pub args: Vec<i64>,
    pub value: Complex64,
}

/// Per-index diagnostics kept in extraction reports.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IndexDiagnostics {
    pub triplet: usize,
    pub index: FrequencyIndex,
    pub unknowns: usize,
    pub condition: f64,
    pub relative_residual: f64,
    pub residual_warning: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IndexFailure {
    pub triplet: usize,
    pub index: FrequencyIndex,
    pub reason: String,
}

/// Everything recovered from one triplet.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TripletExtraction {
    pub triplet: usize,
    pub samples: Vec<KernelSample>,
    pub diagnostics: Vec<IndexDiagnostics>,
    pub failures: Vec<IndexFailure>,
}

impl TripletExtraction {
    /// Distinct canonical points recovered per order (index 0 is order 1).
    pub fn canonical_counts(&self, max_order: usize) -> Vec<usize> {
        let mut sets = vec![BTreeSet::new(); max_order];
        for s in &self.samples {
            if s.order <= max_order {
                sets[s.order - 1].insert(canonical_args(&s.args).0);
            }
        }
        sets.iter().map(BTreeSet::len).collect()
    }
}

fn output_indices(plan: &SweepPlan, settings: &ExtractionSettings) -> Vec<FrequencyIndex> {
    if settings.include_dc {
        enumerate_output_indices_with_dc(plan.tones(), plan.max_mixing_order)
    } else {
        enumerate_output_indices(plan.tones(), plan.max_mixing_order)
    }
}

pub fn extract_triplet(
    dataset: &SpectralDataset,
    plan: &SweepPlan,
    triplet: usize,
    settings: &ExtractionSettings,
) -> TripletExtraction {
    let freqs = plan.triplet(triplet);
    let mut out = TripletExtraction {
        triplet,
        ..TripletExtraction::default()
    };
    for k in output_indices(plan, settings) {
        let solved = build_ls_system(dataset, plan, triplet, &k, settings)
            .and_then(|sys| solve_ls(&sys, settings).map(|s| (sys, s)));
        match solved {
            Ok((sys, sol)) => {
                if sys.unknowns.is_empty() {
                    continue;
                }
                out.diagnostics.push(IndexDiagnostics {
                    triplet,
                    index: k.clone(),
                    unknowns: sys.unknowns.len(),
                    condition: sol.condition,
                    relative_residual: if sol.rhs_norm > 0.0 {
                        sol.residual_norm / sol.rhs_norm
                    } else {
                        0.0
                    },
                    residual_warning: sol.residual_warning,
                });
                for (g, value) in sol.values {
                    out.samples.push(KernelSample {
                        order: g.order(),
                        args: g.argument_frequencies(&freqs),
                        value,
                    });
                }
            }
            Err(e) => out.failures.push(IndexFailure {
                triplet,
                index: k,
                reason: e.to_string(),
            }),
        }
    }
    out
}

/// Summary of a whole extraction.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ExtractionReport {
    pub triplets: usize,
    pub systems_total: usize,
    pub systems_resolved: usize,
    pub residual_warnings: usize,
    pub max_condition: f64,
    pub max_relative_residual: f64,
    /// Distinct canonical points per order after merging all triplets.
    pub canonical_points: Vec<usize>,
    pub failures: Vec<IndexFailure>,
    pub fill: Vec<FillReport>,
}

impl ExtractionReport {
    pub fn resolved_fraction(&self) -> f64 {
        if self.systems_total == 0 {
            1.0
        } else {
            self.systems_resolved as f64 / self.systems_total as f64
        }
    }
}

/// Merge per-triplet results (in the order given) into frozen grids.
pub fn assemble_archive<I>(
    plan: &SweepPlan,
    settings: &ExtractionSettings,
    system_id: &str,
    results: I,
) -> Result<(KernelSetArchive, ExtractionReport), ExtractError>
where
    I: IntoIterator<Item = TripletExtraction>,
{
    let lattice = plan.lattice();
    let mut grids: Vec<KernelGrid> = (1..=settings.truncation_order)
        .map(|n| KernelGrid::new(n, lattice.clone(), plan.delta_f_hz))
        .collect();
    let mut report = ExtractionReport::default();
    for r in results {
        report.triplets += 1;
        report.systems_total += r.diagnostics.len() + r.failures.len();
        report.systems_resolved += r.diagnostics.len();
        for d in &r.diagnostics {
            report.residual_warnings += usize::from(d.residual_warning);
            report.max_condition = report.max_condition.max(d.condition);
            report.max_relative_residual = report.max_relative_residual.max(d.relative_residual);
        }
        report.failures.extend(r.failures);
        for s in r.samples {
            grids[s.order - 1].insert(&s.args, s.value)?;
        }
    }
    report.canonical_points = grids.iter().map(KernelGrid::len).collect();
    let metadata = ArchiveMetadata {
        system_id: system_id.to_string(),
        plan_id: plan.id.clone(),
        truncation_order: settings.truncation_order,
        extraction: settings.clone(),
    };
    let mut archive = KernelSetArchive::new(metadata, grids);
    report.fill = archive.freeze()?;
    if report.resolved_fraction() < settings.min_resolved_fraction {
        return Err(ExtractError::Incomplete {
            resolved: report.systems_resolved,
            total: report.systems_total,
        });
    }
    Ok((archive, report))
}

/// Extract every triplet of `plan` in order.
pub fn extract(
    dataset: &SpectralDataset,
    plan: &SweepPlan,
    settings: &ExtractionSettings,
    system_id: &str,
) -> Result<(KernelSetArchive, ExtractionReport), ExtractError> {
    check_settings(plan, settings)?;
    assemble_archive(
        plan,
        settings,
        system_id,
        (0..plan.triplet_count()).map(|t| extract_triplet(dataset, plan, t, settings)),
    )
}

pub fn check_settings(plan: &SweepPlan, settings: &ExtractionSettings) -> Result<(), ExtractError> {
    if settings.truncation_order > plan.max_mixing_order as usize || settings.truncation_order == 0 {
        return Err(ExtractError::OrderAbovePlan {
            order: settings.truncation_order,
            max_mixing_order: plan.max_mixing_order as usize,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys_from(unknowns: Vec<GTermDescriptor>, amps: &[Vec<f64>], truth: &[Complex64]) -> LsSystem {
        let coefficients: Vec<Vec<f64>> = amps
            .iter()
            .map(|v| unknowns.iter().map(|g| g.coefficient(v)).collect())
            .collect();
        let rhs = coefficients
            .iter()
            .map(|row| {
                row.iter()
                    .zip(truth)
                    .map(|(c, h)| h * *c)
                    .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
            })
            .collect();
        LsSystem {
            triplet: 0,
            index: unknowns[0].k.clone(),
            unknowns,
            coefficients,
            rhs,
            row_ids: (0..amps.len()).collect(),
            row_drive: amps.iter().map(|v| v.iter().sum()).collect(),
        }
    }

    #[test]
    fn unknown_lists() {
        let k = FrequencyIndex::new(vec![0, 0, 1]);
        let u = unknowns_at_index(&k, 3);
        assert_eq!(u.len(), 4);
        assert_eq!(u[0].order(), 1);
        assert_eq!(unknowns_at_index(&FrequencyIndex::new(vec![0, 0, 3]), 3).len(), 1);
        let u5 = unknowns_at_index(&k, 5);
        assert!(u5.iter().any(|g| g.to_string() == "H5(w3,w3,w3,-w3,-w3)"));
    }

    #[test]
    fn recovers_exact_model() {
        let k = FrequencyIndex::new(vec![0, 0, 1]);
        let unknowns = unknowns_at_index(&k, 3);
        let truth = [
            Complex64::new(0.9, -0.2),
            Complex64::new(-2.0, 1.0),
            Complex64::new(3.0, 0.5),
            Complex64::new(-1.0, -4.0),
        ];
        let amps: Vec<Vec<f64>> = crate::plan::amplitude_schedule(&[5.0, 10.0], 3, 50.0, 8, 3);
        let s = sys_from(unknowns, &amps, &truth);
        for settings in [ExtractionSettings::default(), ExtractionSettings::single_stage()] {
            let sol = solve_ls(&s, &settings).unwrap();
            for ((_, v), t) in sol.values.iter().zip(&truth) {
                assert!((v - t).norm() < 1e-9 * t.norm(), "{v} vs {t}");
            }
            assert!(sol.residual_norm <= 1e-10 * sol.rhs_norm);
        }
    }

    #[test]
    fn single_unknown_is_ratio_average() {
        let k = FrequencyIndex::new(vec![0, 0, 3]);
        let unknowns = unknowns_at_index(&k, 3);
        let amps = vec![vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 2.0]];
        let c: Vec<f64> = amps.iter().map(|v| unknowns[0].coefficient(v)).collect();
        let mut s = sys_from(unknowns, &amps, &[Complex64::new(1.0, 0.0)]);
        s.rhs = vec![Complex64::new(c[0] * 1.0, 0.0), Complex64::new(c[1] * 1.0, 0.0)];
        let sol = solve_ls(&s, &ExtractionSettings::default()).unwrap();
        assert!((sol.values[0].1 - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn too_few_rows_and_rank_loss() {
        let k = FrequencyIndex::new(vec![0, 0, 1]);
        let unknowns = unknowns_at_index(&k, 3);
        let amps = vec![vec![1.0, 1.0, 1.0]; 2];
        let s = sys_from(unknowns.clone(), &amps, &[Complex64::new(1.0, 0.0); 4]);
        assert!(matches!(
            solve_ls(&s, &ExtractionSettings::default()),
            Err(ExtractError::Underdetermined { rows: 2, unknowns: 4 })
        ));
        let amps = vec![vec![1.0, 1.0, 1.0]; 6];
        let s = sys_from(unknowns, &amps, &[Complex64::new(1.0, 0.0); 4]);
        assert!(matches!(
            solve_ls(&s, &ExtractionSettings::single_stage()),
            Err(ExtractError::RankDeficient { rank: 1, .. })
        ));
    }
}
