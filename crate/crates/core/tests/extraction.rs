use xvolterra_core::extract::*;
use xvolterra_core::kernel::KernelSetArchive;
use xvolterra_core::mixing::FrequencyIndex;
use xvolterra_core::plan::*;
use xvolterra_core::probe::{generate_dataset_analytic, SpectralDataset};
use xvolterra_core::systems::{BenchmarkSystem, VolterraOracle, WienerHammerstein};

fn max_relative_error<O: VolterraOracle>(archive: &KernelSetArchive, oracle: &O, order: usize) -> f64 {
    let grid = archive.grid(order).unwrap();
    let df = grid.delta_f_hz();
    grid.samples()
        .map(|(args, value, _)| {
            let hz: Vec<f64> = args.iter().map(|&f| f as f64 * df).collect();
            let want = oracle.kernel(&hz).unwrap();
            (value - want).norm() / want.norm()
        })
        .fold(0.0, f64::max)
}

fn plan_with_levels(points: usize, levels: &[f64]) -> SweepPlan {
    SweepPlan {
        amplitudes: amplitude_schedule(levels, 3, Z0_OHMS, default_extra_rows(3, 3, 3), DEFAULT_SCHEDULE_SEED),
        ..build_reduced_plan(points)
    }
}

#[test]
fn analytic_round_trip_recovers_oracle() {
    let sys = BenchmarkSystem::standard();
    let plan = build_reduced_plan(3);
    let ds = generate_dataset_analytic(&sys, &plan, 3).unwrap();
    let (archive, report) = extract(&ds, &plan, &ExtractionSettings::default(), "benchmark").unwrap();
    assert!(report.failures.is_empty());
    assert_eq!(report.residual_warnings, 0);
    assert!(
        report.max_relative_residual <= 1e-10,
        "{}",
        report.max_relative_residual
    );
    for n in 1..=3 {
        let e = max_relative_error(&archive, &sys, n);
        assert!(e <= 1e-8, "order {n}: {e}");
    }
}

#[test]
fn every_triplet_records_all_indices() {
    let sys = BenchmarkSystem::standard();
    let plan = build_reduced_plan(2);
    let ds = generate_dataset_analytic(&sys, &plan, 3).unwrap();
    let settings = ExtractionSettings {
        include_dc: false,
        ..ExtractionSettings::default()
    };
    for t in 0..plan.triplet_count() {
        let r = extract_triplet(&ds, &plan, t, &settings);
        assert_eq!(r.canonical_counts(3), vec![3, 9, 28], "triplet {t}");
    }
}

#[test]
fn column_scaling_is_a_reparameterization() {
    let sys = WienerHammerstein::polynomial(vec![1.0, 0.3, -0.05, 0.02, 0.003]);
    let plan = build_reduced_plan(3);
    let ds = generate_dataset_analytic(&sys, &plan, 5).unwrap();
    for two_stage in [false, true] {
        let scaled = ExtractionSettings {
            two_stage,
            ..ExtractionSettings::default()
        };
        let raw = ExtractionSettings {
            column_scaling: false,
            ..scaled.clone()
        };
        let (a, _) = extract(&ds, &plan, &scaled, "p").unwrap();
        let (b, _) = extract(&ds, &plan, &raw, "p").unwrap();
        for n in 1..=3 {
            let (ga, gb) = (a.grid(n).unwrap(), b.grid(n).unwrap());
            for ((ka, va, _), (kb, vb, _)) in ga.samples().zip(gb.samples()) {
                assert_eq!(ka, kb);
                assert!((va - vb).norm() <= 1e-10 * va.norm(), "{ka:?}: {va} vs {vb}");
            }
        }
    }
}

#[test]
fn wider_level_spread_conditions_better() {
    let sys = BenchmarkSystem::standard();
    let k = FrequencyIndex(vec![0, 0, 1]);
    let cond = |levels: &[f64]| {
        let plan = plan_with_levels(2, levels);
        let ds = generate_dataset_analytic(&sys, &plan, 3).unwrap();
        let s = build_ls_system(&ds, &plan, 0, &k, &ExtractionSettings::default()).unwrap();
        (condition_number(&s, true), condition_number(&s, false))
    };
    let narrow = cond(&[5.0, 6.0]);
    let wide = cond(&[5.0, 10.0]);
    assert!(wide.0 < narrow.0, "{wide:?} vs {narrow:?}");
    assert!(wide.1 < narrow.1, "{wide:?} vs {narrow:?}");
}

#[test]
fn missing_entries_are_isolated() {
    let sys = BenchmarkSystem::standard();
    let plan = build_reduced_plan(2);
    let mut ds: SpectralDataset = generate_dataset_analytic(&sys, &plan, 3).unwrap();
    let k = FrequencyIndex(vec![1, 1, 1]);
    ds.remove(3, 0, &k).unwrap();
    let (archive, report) = extract(&ds, &plan, &ExtractionSettings::default(), "benchmark").unwrap();
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].triplet, 3);
    assert_eq!(report.failures[0].index, k);
    assert!(report.resolved_fraction() < 1.0);
    assert!(!archive.grid(3).unwrap().is_empty());
}

#[test]
fn truncation_bias_and_two_stage_remedy() {
    // true system carries orders four and five; extraction keeps three
    let sys = WienerHammerstein::polynomial(vec![1.0, 0.3, -0.05, 0.02, 0.003]);
    let h1_error = |levels: &[f64], settings: &ExtractionSettings| {
        let plan = plan_with_levels(3, levels);
        let ds = generate_dataset_analytic(&sys, &plan, 5).unwrap();
        let (archive, _) = extract(&ds, &plan, settings, "p").unwrap();
        max_relative_error(&archive, &sys, 1)
    };
    let single = ExtractionSettings::single_stage();
    let two = ExtractionSettings::default();
    let e_single = h1_error(&[5.0, 10.0], &single);
    let e_two = h1_error(&[5.0, 10.0], &two);
    assert!(e_two < e_single, "two-stage {e_two:.3e} vs single {e_single:.3e}");
    assert!(e_single > 1e-4, "truncation bias should be visible: {e_single:.3e}");
    let e_low = h1_error(&[-5.0, 0.0], &two);
    assert!(e_low < e_two, "lower drive {e_low:.3e} vs {e_two:.3e}");
}

#[test]
fn plan_above_truncation_is_rejected() {
    let plan = build_reduced_plan(2);
    let settings = ExtractionSettings {
        truncation_order: 4,
        ..ExtractionSettings::default()
    };
    assert!(check_settings(&plan, &settings).is_err());
}
