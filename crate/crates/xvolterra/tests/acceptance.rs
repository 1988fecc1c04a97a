//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestRunner};

use xvolterra::config::{RunConfig, SystemConfig};
use xvolterra::enumerate::enumerate;
use xvolterra::pipeline::{analytic_dataset, direct_pulse, extract_archive, probe_dataset, synthesize_pulse};
use xvolterra::validate::{even_order_ratio, kernel_errors, nearest_lattice, probed_scaling, symmetry_audit};
use xvolterra_core::analysis::nrmse;
use xvolterra_core::kernel::{canonical_args, KernelGrid, KernelSetArchive};
use xvolterra_core::mixing::*;
use xvolterra_core::plan::{build_standard_plan, validate_plan, SweepPlan};
use xvolterra_core::systems::LinearBlock;
use xvolterra_core::Complex64;

type Verdict = Result<(bool, String), String>;

struct Run {
    cfg: RunConfig,
    sys: xvolterra::config::ReferenceSystem,
    plan: SweepPlan,
    archive: KernelSetArchive,
    probe_secs: f64,
}

fn transient_run(cfg: RunConfig) -> xvolterra::Result<Run> {
    let sys = cfg.system.build()?;
    let plan = cfg.plan.build(cfg.seed, cfg.extraction.truncation_order)?;
    let start = Instant::now();
    let ds = probe_dataset(&sys, &plan, &cfg.probe.settings(&plan))?;
    let probe_secs = start.elapsed().as_secs_f64();
    let (archive, _) = extract_archive(&ds, &plan, &cfg.extraction, cfg.system.id())?;
    Ok(Run {
        cfg,
        sys,
        plan,
        archive,
        probe_secs,
    })
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn enumeration() -> Verdict {
    let start = Instant::now();
    let e = enumerate(3, 3).map_err(|e| e.to_string())?;
    // independent count straight from the index tables
    let direct: Vec<usize> = (1..=3)
        .map(|n| enumerate_kernels_for_order(3, 3, n).iter().map(|(_, g)| g.len()).sum())
        .collect();
    let freqs = enumerate_output_indices(3, 3).len();
    let secs = start.elapsed().as_secs_f64();
    let ok =
        e.frequency_count == 31 && freqs == 31 && e.kernel_counts == [3, 9, 28] && direct == [3, 9, 28] && secs < 1.0;
    Ok((
        ok,
        format!(
            "{} frequencies, kernels {:?} (direct {:?}), {secs:.3} s",
            e.frequency_count, e.kernel_counts, direct
        ),
    ))
}

fn plan_validity() -> Verdict {
    let start = Instant::now();
    let plan = build_standard_plan();
    let stops: Vec<i64> = plan.axes.iter().map(|a| a.stop()).collect();
    let report = validate_plan(&plan);
    let mut bad = RunConfig::default();
    bad.plan.starts = vec![10, 20, 30];
    bad.plan.step = 10;
    bad.plan.points = 4;
    let bad_plan = bad.plan.build(bad.seed, 3).map_err(|e| e.to_string())?;
    let bad_report = validate_plan(&bad_plan);
    let secs = start.elapsed().as_secs_f64();
    let ok = stops == [2047, 2081, 2127] && report.is_ok() && !bad_report.is_ok() && secs < 10.0;
    Ok((
        ok,
        format!(
            "stops {stops:?} MHz, {} triplets clean; commensurate plan: {} collisions; {secs:.2} s",
            report.triplets_checked,
            bad_report.collisions.len()
        ),
    ))
}

fn oracle_round_trip() -> Verdict {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let sys = cfg.system.build().map_err(|e| e.to_string())?;
    let plan = build_standard_plan();
    let ds = analytic_dataset(&sys, &plan, 3).map_err(|e| e.to_string())?;
    let (archive, report) = extract_archive(&ds, &plan, &cfg.extraction, "benchmark").map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut points = 0;
    let mut zero_ok = true;
    for g in archive.grids() {
        let (e, _) = kernel_errors(g, &sys, None).map_err(|e| e.to_string())?;
        worst = worst.max(e.max_relative);
        points += e.points + e.zero_reference_points;
        let peak = g.samples().fold(0.0f64, |m, (_, v, _)| m.max(v.norm()));
        zero_ok &= e.max_abs_at_zero <= 1e-6 * peak;
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-6 && zero_ok && report.systems_resolved == report.systems_total && secs < 60.0;
    Ok((
        ok,
        format!(
            "{points} lattice points, max relative error {worst:.2e}, {}/{} systems, {secs:.1} s",
            report.systems_resolved, report.systems_total
        ),
    ))
}

fn simulated_extraction(run: &Run) -> Verdict {
    let ladder = LinearBlock::default_ladder();
    let h1 = run.archive.grid(1).ok_or("no H1")?;
    let df = h1.delta_f_hz();
    let h1_err = h1
        .samples()
        .map(|(k, v, _)| rel(v, ladder.transfer_hz(k[0] as f64 * df)))
        .fold(0.0f64, f64::max);
    let h2 = run.archive.grid(2).ok_or("no H2")?;
    let (e2, _) = kernel_errors(h2, &run.sys, None).map_err(|e| e.to_string())?;
    let h3 = run.archive.grid(3).ok_or("no H3")?;
    let slice = nearest_lattice(h3, 0.5e9);
    let (e3, _) = kernel_errors(h3, &run.sys, Some(slice)).map_err(|e| e.to_string())?;
    let ok = h1_err <= 0.02
        && e2.max_relative <= 0.05
        && e2.zero_reference_points == 0
        && e3.max_relative <= 0.05
        && e3.points > 0
        && e3.zero_reference_points == 0;
    Ok((
        ok,
        format!(
            "H1 {h1_err:.2e} over {} pts, H2 {:.2e} over {} pts, H3 slice at {} MHz {:.2e} over {} pts (probing {:.1} s)",
            h1.samples().count(),
            e2.max_relative,
            e2.points,
            slice,
            e3.max_relative,
            e3.points,
            run.probe_secs
        ),
    ))
}

fn symmetry(run: &Run) -> Verdict {
    let a = symmetry_audit(&run.archive, 0.5e9).map_err(|e| e.to_string())?;
    // the slice keeps the f1 <-> f2 plane only; its conjugate partner has -f3
    let ok = a.h2_points > 0
        && a.h2_permutation <= 1e-12
        && a.h2_conjugate <= 1e-12
        && a.h3_slice_points > 0
        && a.h3_slice_permutation <= 1e-12
        && a.h3_slice_conjugate > 1e-2;
    Ok((
        ok,
        format!(
            "H2 perm {:.1e} conj {:.1e} over {} pts; H3 slice perm {:.1e}, conj deviation {:.2} over {} pts",
            a.h2_permutation,
            a.h2_conjugate,
            a.h2_points,
            a.h3_slice_permutation,
            a.h3_slice_conjugate,
            a.h3_slice_points
        ),
    ))
}

fn order_scaling(run: &Run) -> Verdict {
    let settings = run.cfg.probe.settings(&run.plan);
    let last = run.plan.triplet_count() - 1;
    let mut worst = 0.0f64;
    let mut rows = 0;
    let mut seen = [false; 2];
    for t in [0, last / 2, last] {
        for r in probed_scaling(&run.sys, &run.plan, t, &settings, 1e-9).map_err(|e| e.to_string())? {
            worst = worst.max((r.drop_db - r.expected_db).abs());
            seen[r.order as usize - 2] = true;
            rows += 1;
        }
    }
    let syn = &run.cfg.synthesis;
    let (base, _) = synthesize_pulse(&run.archive, syn, 1.0).map_err(|e| e.to_string())?;
    let mut synth = 0.0f64;
    for alpha in [0.3, 0.7] {
        let (y, _) = synthesize_pulse(&run.archive, syn, alpha).map_err(|e| e.to_string())?;
        let s = base.scaled(alpha);
        for (a, b) in y.orders.iter().zip(&s.orders) {
            let peak = b.max_abs();
            let d = a
                .samples
                .iter()
                .zip(&b.samples)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            synth = synth.max(d / peak);
        }
    }
    let ok = seen == [true, true] && worst <= 0.1 && synth <= 1e-12;
    Ok((
        ok,
        format!("probed drop deviation {worst:.2e} dB over {rows} indices on 3 triplets; synthesizer scaling defect {synth:.1e}"),
    ))
}

fn pulse_nrmse(run: &Run, scale: f64) -> Result<(f64, f64), String> {
    let syn = &run.cfg.synthesis;
    let (y, _) = synthesize_pulse(&run.archive, syn, scale).map_err(|e| e.to_string())?;
    let direct = direct_pulse(&run.sys, syn, scale, run.cfg.validation.substeps).map_err(|e| e.to_string())?;
    Ok((
        nrmse(&y.total.samples, &direct.samples),
        nrmse(&y.orders[0].samples, &direct.samples),
    ))
}

fn time_domain(run: &Run) -> Verdict {
    let (total, linear) = pulse_nrmse(run, 1.0)?;
    let ratio = linear / total;
    Ok((
        total <= 0.05 && ratio >= 3.0,
        format!(
            "{} V pulse: total nrmse {total:.3e}, linear-only {linear:.3e} (ratio {ratio:.1})",
            run.cfg.synthesis.pulse.amplitude
        ),
    ))
}

fn surrogate(run: &Run) -> Verdict {
    let even = even_order_ratio(&run.archive).ok_or("no kernels")?;
    let mut errs = Vec::new();
    for scale in [1.0, 0.5, 0.25] {
        errs.push(pulse_nrmse(run, scale)?.0);
    }
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let amp = run.cfg.synthesis.pulse.amplitude;
    Ok((
        even <= 1e-3 && errs[0] <= 0.10 && monotone,
        format!(
            "even/odd {even:.1e}; nrmse at {amp} / {} / {} V: {:.3e} / {:.3e} / {:.3e} (probing {:.1} s)",
            amp / 2.0,
            amp / 4.0,
            errs[0],
            errs[1],
            errs[2],
            run.probe_secs
        ),
    ))
}

fn index_strategy() -> impl Strategy<Value = Vec<i32>> {
    (1usize..=4).prop_flat_map(|m| proptest::collection::vec(-3i32..=3, m))
}

fn lattice_and_args() -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
    (proptest::collection::btree_set(1i64..400, 2..8), 1usize..=3).prop_flat_map(|(set, n)| {
        let lattice: Vec<i64> = set.into_iter().collect();
        let pick = proptest::collection::vec((0..lattice.len(), any::<bool>()), n);
        (Just(lattice), pick).prop_map(|(l, p)| {
            let args = p.iter().map(|&(i, neg)| if neg { -l[i] } else { l[i] }).collect();
            (l, args)
        })
    })
}

fn properties() -> Verdict {
    let config = Config {
        cases: 1000,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    };
    let mut failures = Vec::new();
    let mut note = |name: &str, r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };

    let r = TestRunner::new(config.clone()).run(&index_strategy(), |k| {
        let k = FrequencyIndex(k);
        if k.is_dc() {
            return Ok(());
        }
        let (c, flipped) = canonicalize_index(&k);
        prop_assert!(c.is_canonical());
        prop_assert!(!canonicalize_index(&c).1);
        prop_assert_eq!(flipped, c != k);
        prop_assert!(k.is_canonical() != k.negated().is_canonical());
        Ok(())
    });
    note("canonicalization", r.map_err(|e| e.to_string()));

    let r = TestRunner::new(config.clone()).run(&(1usize..=4, 1usize..=4), |(m, n)| {
        let total: u64 = all_indices(m, n as u32)
            .iter()
            .flat_map(|k| gterms_at_order(k, n))
            .map(|g| g.multiplicity())
            .sum();
        prop_assert_eq!(total, count_terms(m, n as u32));
        Ok(())
    });
    note("multiplicity sums", r.map_err(|e| e.to_string()));

    let r = TestRunner::new(config.clone()).run(&(index_strategy(), 0u32..=2), |(k, extra)| {
        let k = FrequencyIndex(k);
        if k.is_dc() {
            return Ok(());
        }
        let tones = k.tones();
        let r: Vec<u32> = (0..tones).map(|m| if m == 0 { extra } else { 0 }).collect();
        let g = GTermDescriptor::new(k.clone(), r);
        let (canon, flipped) = canonicalize_kernel_args(&g.arguments(), tones);
        let d = canon.descriptor(tones);
        prop_assert!(d.k.is_canonical());
        prop_assert_eq!(flipped, !k.is_canonical());
        prop_assert_eq!(d.multiplicity(), g.multiplicity());
        Ok(())
    });
    note("kernel-key symmetry", r.map_err(|e| e.to_string()));

    let values = (-1.0f64..1.0, -1.0f64..1.0);
    let r = TestRunner::new(config).run(&(lattice_and_args(), values), |((lattice, args), (re, im))| {
        let v = Complex64::new(re, im);
        let mut grid = KernelGrid::new(args.len(), lattice, 1e6);
        grid.insert(&args, v).unwrap();
        let base = grid.query_exact(&args).unwrap();
        let mut p = args.clone();
        p.reverse();
        prop_assert_eq!(grid.query_exact(&p).unwrap(), base);
        p.rotate_left(1);
        prop_assert_eq!(grid.query_exact(&p).unwrap(), base);
        let neg: Vec<i64> = args.iter().map(|x| -x).collect();
        prop_assert_eq!(grid.query_exact(&neg).unwrap(), base.conj());
        let (key, flip) = canonical_args(&args);
        prop_assert_eq!(grid.query_exact(&key).unwrap(), if flip { base.conj() } else { base });
        Ok(())
    });
    note("store symmetry", r.map_err(|e| e.to_string()));

    Ok((
        failures.is_empty(),
        if failures.is_empty() {
            "4 properties x 1000 cases, seed 0x5eed".into()
        } else {
            failures.join("; ")
        },
    ))
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Verdict)> = Vec::new();
    results.push((1, "enumeration exactness", enumeration()));
    results.push((2, "plan validity", plan_validity()));
    results.push((3, "oracle round trip", oracle_round_trip()));

    let mut bench = RunConfig::default();
    bench.plan.points = 6;
    match transient_run(bench) {
        Ok(run) => {
            results.push((4, "simulated-data extraction", simulated_extraction(&run)));
            results.push((5, "symmetry audit", symmetry(&run)));
            results.push((6, "order scaling", order_scaling(&run)));
            results.push((7, "time-domain end to end", time_domain(&run)));
        }
        Err(e) => {
            for (i, name) in [
                (4, "simulated-data extraction"),
                (5, "symmetry audit"),
                (6, "order scaling"),
                (7, "time-domain end to end"),
            ] {
                results.push((i, name, Err(format!("benchmark run failed: {e}"))));
            }
        }
    }

    let mut sur = RunConfig::default();
    sur.system = serde_json::from_str(r#"{"kind": "surrogate"}"#).expect("surrogate config");
    assert!(matches!(sur.system, SystemConfig::Surrogate { .. }));
    sur.plan.points = 6;
    sur.plan.levels_dbm = vec![-30.0, -20.0];
    sur.synthesis.pulse.amplitude = 0.2;
    results.push((
        8,
        "surrogate amplifier",
        transient_run(sur)
            .map_err(|e| e.to_string())
            .and_then(|run| surrogate(&run)),
    ));
    results.push((9, "property suite", properties()));

    let mut all = true;
    for (i, name, verdict) in &results {
        let (ok, detail) = match verdict {
            Ok((ok, d)) => (*ok, d.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= ok;
        println!("criterion {i} {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
