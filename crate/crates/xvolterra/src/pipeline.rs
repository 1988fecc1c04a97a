//! Parallel drivers over the core pipeline stages.
//!
//! Work items run on the current rayon pool and are collected in item
//! order, so outputs do not depend on the thread count.

use rayon::prelude::*;
use xvolterra_core::extract::{
    assemble_archive, check_settings, extract_triplet, ExtractionReport, ExtractionSettings,
};
use xvolterra_core::kernel::KernelSetArchive;
use xvolterra_core::mixing::{enumerate_output_indices, enumerate_output_indices_with_dc, FrequencyIndex};
use xvolterra_core::plan::SweepPlan;
use xvolterra_core::probe::{
    analytic_capture_info, analytic_triplet, check_probe_plan, probe_lsop, transient, transient_capture_info,
    ProbeSettings, SpectralDataset,
};
use xvolterra_core::signal::{InputSignal, TrapezoidPulse, Waveform};
use xvolterra_core::synth::{spectrum_of_pulse, synthesize_total, KernelSource, OrderedResponse, SpectrumInfo};
use xvolterra_core::systems::{NonlinearSystem, VolterraOracle};

use crate::config::SynthesisConfig;
use crate::error::{Error, Result};

/// Transient probing of every (triplet, row) of `plan`.
pub fn probe_dataset<S>(sys: &S, plan: &SweepPlan, settings: &ProbeSettings) -> Result<SpectralDataset>
where
    S: NonlinearSystem + Sync + ?Sized,
{
    check_probe_plan(sys, plan)?;
    let rows = plan.amplitudes.len();
    let items: Vec<(usize, usize)> = (0..plan.triplet_count())
        .flat_map(|t| (0..rows).map(move |r| (t, r)))
        .collect();
    let results: Vec<_> = items
        .par_iter()
        .map(|&(t, r)| probe_lsop(sys, &plan.tone_set(t, r), plan.max_mixing_order, settings))
        .collect();
    let mut ds = SpectralDataset::new(
        plan.id.clone(),
        plan.tones(),
        transient_capture_info(sys, plan, settings),
    );
    for (&(t, r), phasors) in items.iter().zip(results) {
        ds.insert_lsop(t, r, phasors?);
    }
    Ok(ds)
}

/// Phasors computed from oracle kernels up to `truncation`.
pub fn analytic_dataset<O>(oracle: &O, plan: &SweepPlan, truncation: usize) -> Result<SpectralDataset>
where
    O: VolterraOracle + Sync + ?Sized,
{
    let results: Vec<_> = (0..plan.triplet_count())
        .into_par_iter()
        .map(|t| analytic_triplet(oracle, plan, t, truncation))
        .collect();
    let mut ds = SpectralDataset::new(plan.id.clone(), plan.tones(), analytic_capture_info(truncation));
    for (t, rows) in results.into_iter().enumerate() {
        for (r, phasors) in rows?.into_iter().enumerate() {
            ds.insert_lsop(t, r, phasors);
        }
    }
    Ok(ds)
}

/// Entries the extractor will ask for but `ds` lacks, as `(triplet, row, index)`.
pub fn missing_entries(
    ds: &SpectralDataset,
    plan: &SweepPlan,
    settings: &ExtractionSettings,
) -> Vec<(usize, usize, FrequencyIndex)> {
    let indices = if settings.include_dc {
        enumerate_output_indices_with_dc(plan.tones(), plan.max_mixing_order)
    } else {
        enumerate_output_indices(plan.tones(), plan.max_mixing_order)
    };
    let mut out = Vec::new();
    for t in 0..plan.triplet_count() {
        for r in 0..plan.amplitudes.len() {
            for k in &indices {
                if ds.get(t, r, k).is_none() {
                    out.push((t, r, k.clone()));
                }
            }
        }
    }
    out
}

/// Per-triplet extraction in parallel, merged in triplet order.
pub fn extract_archive(
    ds: &SpectralDataset,
    plan: &SweepPlan,
    settings: &ExtractionSettings,
    system_id: &str,
) -> Result<(KernelSetArchive, ExtractionReport)> {
    check_settings(plan, settings)?;
    if ds.tones != plan.tones() {
        return Err(Error::Malformed(format!(
            "dataset has {} tones, plan has {}",
            ds.tones,
            plan.tones()
        )));
    }
    let results: Vec<_> = (0..plan.triplet_count())
        .into_par_iter()
        .map(|t| extract_triplet(ds, plan, t, settings))
        .collect();
    Ok(assemble_archive(plan, settings, system_id, results)?)
}

/// Pulse train spectrum for the configured stimulus scaled by `scale`.
pub fn stimulus_spectrum(cfg: &SynthesisConfig, scale: f64) -> (xvolterra_core::synth::DiscreteSpectrum, SpectrumInfo) {
    let pulse = TrapezoidPulse {
        amplitude: cfg.pulse.amplitude * scale,
        ..cfg.pulse
    };
    spectrum_of_pulse(&pulse, cfg.period(), cfg.max_bins, cfg.bin_cap)
}

/// Synthesized response to the configured pulse over the configured window.
pub fn synthesize_pulse<K: KernelSource + ?Sized>(
    source: &K,
    cfg: &SynthesisConfig,
    scale: f64,
) -> Result<(OrderedResponse, SpectrumInfo)> {
    let (spec, info) = stimulus_spectrum(cfg, scale);
    let y = synthesize_total(source, &spec, 0.0, cfg.dt, cfg.sample_count(), &cfg.settings())?;
    Ok((y, info))
}

/// Direct transient response to the configured pulse from rest.
pub fn direct_pulse<S: NonlinearSystem + ?Sized>(
    sys: &S,
    cfg: &SynthesisConfig,
    scale: f64,
    substeps: usize,
) -> Result<Waveform> {
    let pulse = TrapezoidPulse {
        amplitude: cfg.pulse.amplitude * scale,
        ..cfg.pulse
    };
    Ok(transient(
        sys,
        &InputSignal::Pulse(pulse),
        cfg.sample_count(),
        cfg.dt,
        substeps,
        1e6,
    )?)
}
