//! Subcommand bodies. Human-readable progress goes to `out`; artifacts go
//! to the configured paths.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use xvolterra_core::plan::{validate_plan, PlanReport, SweepPlan};

use crate::config::{content_hash, ProbeMethod, RunConfig};
use crate::enumerate::enumerate;
use crate::error::{Error, Result};
use crate::format::{
    read_archive, read_dataset, read_plan, write_archive, write_atomic, write_dataset, write_json, write_plan,
    write_waveform_csv, ENUMERATION_FORMAT, VALIDATION_FORMAT,
};
use crate::pipeline::{analytic_dataset, extract_archive, missing_entries, probe_dataset, synthesize_pulse};
use crate::validate::validate;

/// Missing entries listed in error messages.
const LISTED_MISSING: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// Artifacts were produced but a check failed.
    ValidationFailed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Ok => 0,
            Outcome::ValidationFailed => 2,
        }
    }
}

// progress output is best effort
macro_rules! say {
    ($out:expr, $($arg:tt)*) => {{
        let _ = writeln!($out, $($arg)*);
    }};
}

fn report_collisions(out: &mut dyn Write, report: &PlanReport) {
    say!(
        out,
        "plan FAILS the distinct-product check: {} collisions over {} triplets",
        report.collisions.len(),
        report.triplets_checked
    );
    for c in report.collisions.iter().take(LISTED_MISSING) {
        say!(
            out,
            "  triplet {}: {} and {} both land on {} x df",
            c.triplet,
            c.a,
            c.b,
            c.frequency
        );
    }
}

/// Plan from `plan.file` when set, otherwise from the plan artifact.
fn load_plan(cfg: &RunConfig) -> Result<SweepPlan> {
    match &cfg.plan.file {
        Some(p) => read_plan(p),
        None => read_plan(&cfg.paths.plan()),
    }
}

pub fn cmd_enumerate(out_dir: &Path, tones: usize, order: u32, out: &mut dyn Write) -> Result<Outcome> {
    let e = enumerate(tones, order)?;
    let text = e.to_text();
    let hash = content_hash(&(tones, order));
    write_atomic(&out_dir.join(format!("enumerate-{tones}-{order}.txt")), text.as_bytes())?;
    write_json(
        &out_dir.join(format!("enumerate-{tones}-{order}.json")),
        ENUMERATION_FORMAT,
        &hash,
        &e,
    )?;
    let _ = out.write_all(text.as_bytes());
    Ok(Outcome::Ok)
}

pub fn cmd_plan(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let plan = match &cfg.plan.file {
        Some(p) => read_plan(p)?,
        None => cfg.plan.build(cfg.seed, cfg.extraction.truncation_order)?,
    };
    let report = validate_plan(&plan);
    let path = cfg.paths.plan();
    write_plan(&path, &cfg.hash(), &plan, &report)?;
    say!(
        out,
        "plan {}: {} tones, {} triplets x {} amplitude rows, top tone {:.4} GHz -> {}",
        plan.id,
        plan.tones(),
        plan.triplet_count(),
        plan.amplitudes.len(),
        plan.max_tone_hz() / 1e9,
        path.display()
    );
    if report.is_ok() {
        say!(
            out,
            "all {} triplets have distinct mixing products",
            report.triplets_checked
        );
        Ok(Outcome::Ok)
    } else {
        report_collisions(out, &report);
        Ok(Outcome::ValidationFailed)
    }
}

pub fn cmd_probe(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let plan = load_plan(cfg)?;
    let report = validate_plan(&plan);
    if !report.is_ok() {
        report_collisions(out, &report);
        return Ok(Outcome::ValidationFailed);
    }
    let sys = cfg.system.build()?;
    let start = Instant::now();
    let ds = match cfg.probe.method {
        ProbeMethod::Transient => {
            let settings = cfg.probe.settings(&plan);
            say!(
                out,
                "probing {} operating points: {} samples/record, {} RK4 substeps",
                plan.triplet_count() * plan.amplitudes.len(),
                settings.samples_per_record,
                settings.substeps
            );
            probe_dataset(&sys, &plan, &settings)?
        }
        ProbeMethod::Analytic => analytic_dataset(&sys, &plan, cfg.probe.analytic_truncation)?,
    };
    let path = cfg.paths.dataset();
    write_dataset(&path, &cfg.hash(), &ds, &plan)?;
    say!(
        out,
        "dataset ({}) with {} operating points in {:.1} s -> {}",
        ds.capture.method,
        ds.len(),
        start.elapsed().as_secs_f64(),
        path.display()
    );
    Ok(Outcome::Ok)
}

pub fn cmd_extract(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let plan = load_plan(cfg)?;
    let ds = read_dataset(&cfg.paths.dataset())?;
    if ds.plan_id != plan.id {
        return Err(Error::Malformed(format!(
            "dataset was taken with plan `{}`, not `{}`",
            ds.plan_id, plan.id
        )));
    }
    let missing = missing_entries(&ds, &plan, &cfg.extraction);
    if !missing.is_empty() {
        let first: Vec<String> = missing
            .iter()
            .take(LISTED_MISSING)
            .map(|(t, r, k)| format!("triplet {t} row {r} index {k}"))
            .collect();
        for f in &first {
            say!(out, "missing: {f}");
        }
        return Err(Error::MissingEntries {
            count: missing.len(),
            first,
        });
    }
    let start = Instant::now();
    let (archive, report) = extract_archive(&ds, &plan, &cfg.extraction, cfg.system.id())?;
    let path = cfg.paths.archive();
    write_archive(&path, &cfg.hash(), &archive, Some(&report))?;
    say!(
        out,
        "{} of {} systems resolved ({} residual warnings, max condition {:.3e}) in {:.1} s",
        report.systems_resolved,
        report.systems_total,
        report.residual_warnings,
        report.max_condition,
        start.elapsed().as_secs_f64()
    );
    for (n, (pts, fill)) in report.canonical_points.iter().zip(&report.fill).enumerate() {
        say!(
            out,
            "  H{}: {} measured points, {} interpolated, {} held",
            n + 1,
            pts,
            fill.interpolated,
            fill.held
        );
    }
    say!(out, "archive -> {}", path.display());
    Ok(Outcome::Ok)
}

pub fn cmd_synthesize(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let (archive, _) = read_archive(&cfg.paths.archive())?;
    let (y, info) = synthesize_pulse(&archive, &cfg.synthesis, 1.0)?;
    let path = cfg.paths.waveform();
    write_waveform_csv(&path, &cfg.hash(), &y.orders, &y.total)?;
    say!(
        out,
        "{} input bins, dropped input power {:.2e}",
        info.retained_bins,
        info.dropped_fraction()
    );
    for (n, (w, s)) in y.orders.iter().zip(&y.spectra).enumerate() {
        say!(
            out,
            "  y{}: peak {:.4e} V, {} bins beyond kernel reach ({:.2e} of input power)",
            n + 1,
            w.max_abs(),
            s.bins_skipped,
            s.skipped_power_fraction
        );
    }
    say!(out, "waveform ({} samples) -> {}", y.total.len(), path.display());
    Ok(Outcome::Ok)
}

pub fn cmd_validate(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let (archive, _) = read_archive(&cfg.paths.archive())?;
    let plan = load_plan(cfg)?;
    let sys = cfg.system.build()?;
    let report = validate(cfg, &sys, &archive, &plan)?;
    let path = cfg.paths.report();
    write_json(&path, VALIDATION_FORMAT, &cfg.hash(), &report)?;
    let _ = out.write_all(report.summary().as_bytes());
    say!(out, "report -> {}", path.display());
    Ok(if report.passed {
        Outcome::Ok
    } else {
        Outcome::ValidationFailed
    })
}
