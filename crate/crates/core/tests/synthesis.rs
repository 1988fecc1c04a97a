use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use xvolterra_core::analysis::nrmse;
use xvolterra_core::extract::{extract, ExtractionSettings};
use xvolterra_core::plan::build_reduced_plan;
use xvolterra_core::probe::{generate_dataset_analytic, transient};
use xvolterra_core::signal::{InputSignal, TrapezoidPulse};
use xvolterra_core::synth::*;
use xvolterra_core::systems::{BenchmarkSystem, LinearBlock};
use xvolterra_core::Complex64;

fn pulse_spectrum(v0: f64) -> DiscreteSpectrum {
    let p = TrapezoidPulse::standard(v0);
    spectrum_of_pulse(&p, 4.0 * p.support(), 40, 0.0).0
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn peak(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn orders_scale_as_powers_of_drive() {
    let sys = BenchmarkSystem::standard();
    let src = OracleSource {
        oracle: &sys,
        max_order: 3,
    };
    let s = SynthSettings::default();
    let base = synthesize_total(&src, &pulse_spectrum(1.0), 0.0, 0.1e-9, 200, &s).unwrap();
    for alpha in [0.5, 0.2, 1.7] {
        let direct = synthesize_total(&src, &pulse_spectrum(alpha), 0.0, 0.1e-9, 200, &s).unwrap();
        let scaled = base.scaled(alpha);
        for n in 0..3 {
            let want: Vec<f64> = base.orders[n]
                .samples
                .iter()
                .map(|v| v * alpha.powi(n as i32 + 1))
                .collect();
            let tol = 1e-12 * peak(&want);
            assert!(max_abs_diff(&direct.orders[n].samples, &want) <= tol, "order {}", n + 1);
            assert!(max_abs_diff(&scaled.orders[n].samples, &want) <= tol, "order {}", n + 1);
        }
    }
}

#[test]
fn line_order_does_not_matter() {
    let sys = BenchmarkSystem::standard();
    let src = OracleSource {
        oracle: &sys,
        max_order: 3,
    };
    let s = SynthSettings::default();
    let spec = pulse_spectrum(1.0);
    let base = synthesize_total(&src, &spec, 0.0, 0.1e-9, 200, &s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..3 {
        let mut lines = spec.lines().to_vec();
        lines.shuffle(&mut rng);
        let shuffled = DiscreteSpectrum::from_lines(spec.period, lines).unwrap();
        let y = synthesize_total(&src, &shuffled, 0.0, 0.1e-9, 200, &s).unwrap();
        for n in 0..3 {
            let d = max_abs_diff(&y.orders[n].samples, &base.orders[n].samples);
            assert!(d <= 1e-12 * peak(&base.orders[n].samples), "order {}: {d}", n + 1);
        }
    }
}

#[test]
fn responses_are_real() {
    let sys = BenchmarkSystem::standard();
    let src = OracleSource {
        oracle: &sys,
        max_order: 3,
    };
    let y = synthesize_total(&src, &pulse_spectrum(1.0), 0.0, 0.1e-9, 300, &SynthSettings::default()).unwrap();
    for r in &y.imaginary_residue {
        assert!(*r <= 1e-10, "{r}");
    }
}

#[test]
fn zero_input_gives_zero_output() {
    let sys = BenchmarkSystem::standard();
    let src = OracleSource {
        oracle: &sys,
        max_order: 3,
    };
    let empty = DiscreteSpectrum::from_lines(1e-8, Vec::new()).unwrap();
    let y = synthesize_total(&src, &empty, 0.0, 1e-10, 20, &SynthSettings::default()).unwrap();
    assert!(y.total.samples.iter().all(|&v| v == 0.0));
}

#[test]
fn linear_archive_filters_the_input() {
    let lpf = LinearBlock::default_ladder();
    let plan = build_reduced_plan(4);
    let ds = generate_dataset_analytic(&lpf, &plan, 1).unwrap();
    let settings = ExtractionSettings {
        truncation_order: 1,
        ..ExtractionSettings::default()
    };
    let (archive, _) = extract(&ds, &plan, &settings, "lpf").unwrap();
    let spec = pulse_spectrum(1.0);
    let dt = 0.1e-9;
    let y = synthesize_total(&archive, &spec, 0.0, dt, 250, &SynthSettings::default()).unwrap();

    // direct filtering: every input line times the stored transfer at its frequency
    let grid = archive.grid(1).unwrap();
    let f0 = spec.fundamental_hz();
    let filtered: Vec<(f64, Complex64)> = spec
        .lines()
        .iter()
        .map(|&(k, c)| {
            let f = k as f64 * f0;
            (f, c * grid.query_interpolated(&[f]).unwrap())
        })
        .collect();
    let want: Vec<f64> = (0..250)
        .map(|i| {
            let t = i as f64 * dt;
            filtered
                .iter()
                .map(|&(f, c)| (c * Complex64::from_polar(1.0, 2.0 * PI * f * t)).re)
                .sum()
        })
        .collect();
    assert!(max_abs_diff(&y.total.samples, &want) <= 1e-9 * peak(&want));
}

#[test]
fn exact_kernels_reproduce_the_transient() {
    let sys = BenchmarkSystem::standard();
    let src = OracleSource {
        oracle: &sys,
        max_order: 3,
    };
    let p = TrapezoidPulse::standard(1.0);
    let (spec, info) = spectrum_of_pulse(&p, 4.0 * p.support(), 80, 0.0);
    assert!(info.dropped_fraction() < 1e-3);
    let dt = 0.05e-9;
    let count = ((p.end() + 20e-9) / dt) as usize + 1;
    let y = synthesize_total(&src, &spec, 0.0, dt, count, &SynthSettings::default()).unwrap();
    let direct = transient(&sys, &InputSignal::Pulse(p), count, dt, 10, 1e6).unwrap();
    let e = nrmse(&y.total.samples, &direct.samples);
    assert!(e <= 0.01, "nrmse {e}");
}
