//! Run configuration: everything a command needs to reproduce its outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use xvolterra_core::extract::ExtractionSettings;
use xvolterra_core::plan::{
    amplitude_schedule, default_extra_rows, SweepPlan, ToneAxis, DEFAULT_SCHEDULE_SEED, Z0_OHMS,
};
use xvolterra_core::probe::ProbeSettings;
use xvolterra_core::signal::TrapezoidPulse;
use xvolterra_core::synth::SynthSettings;
use xvolterra_core::systems::{
    BenchmarkSystem, LadderSpec, LinearBlock, NonlinearSystem, Nonlinearity, VolterraOracle, WienerHammerstein,
    REFERENCE_OHMS, SURROGATE_POST_GAIN, SURROGATE_PRE_GAIN, SURROGATE_VSAT,
};
use xvolterra_core::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Informational; the subcommand on the command line wins.
    pub command: Option<String>,
    pub paths: Paths,
    /// Seed for the jittered rows of the amplitude schedule.
    pub seed: u64,
    pub system: SystemConfig,
    pub plan: PlanConfig,
    pub probe: ProbeConfig,
    pub extraction: ExtractionSettings,
    pub synthesis: SynthesisConfig,
    pub validation: ValidationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            paths: Paths::default(),
            seed: DEFAULT_SCHEDULE_SEED,
            system: SystemConfig::default(),
            plan: PlanConfig::default(),
            probe: ProbeConfig::default(),
            extraction: ExtractionSettings::default(),
            synthesis: SynthesisConfig::default(),
            validation: ValidationConfig::default(),
        }
    }
}

/// Artifact locations. Relative paths resolve against `out`; unset paths
/// take the standard file names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out: PathBuf,
    pub plan: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub archive: Option<PathBuf>,
    pub waveform: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            out: PathBuf::from("out"),
            plan: None,
            dataset: None,
            archive: None,
            waveform: None,
            report: None,
        }
    }
}

impl Paths {
    fn resolve(&self, p: &Option<PathBuf>, default: &str) -> PathBuf {
        match p {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => self.out.join(p),
            None => self.out.join(default),
        }
    }

    pub fn plan(&self) -> PathBuf {
        self.resolve(&self.plan, "plan.json")
    }

    pub fn dataset(&self) -> PathBuf {
        self.resolve(&self.dataset, "dataset.json")
    }

    pub fn archive(&self) -> PathBuf {
        self.resolve(&self.archive, "archive.json")
    }

    pub fn waveform(&self) -> PathBuf {
        self.resolve(&self.waveform, "waveform.csv")
    }

    pub fn report(&self) -> PathBuf {
        self.resolve(&self.report, "validation.json")
    }
}

/// Reference system under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    /// Three identical ladders feeding two multipliers.
    Benchmark {
        #[serde(default)]
        ladder: LadderSpec,
        #[serde(default = "reference_ohms")]
        multiplier_ohms: f64,
    },
    /// Saturating amplifier stand-in.
    Surrogate {
        #[serde(default = "surrogate_vsat")]
        vsat: f64,
        #[serde(default = "surrogate_pre_gain")]
        pre_gain: f64,
        #[serde(default = "surrogate_post_gain")]
        post_gain: f64,
    },
    /// A single ladder, exactly linear.
    Ladder {
        #[serde(default)]
        ladder: LadderSpec,
    },
    WienerHammerstein {
        #[serde(default)]
        pre: LadderSpec,
        nonlinearity: Nonlinearity,
        #[serde(default)]
        post: LadderSpec,
        #[serde(default)]
        input_bound: Option<f64>,
    },
}

fn reference_ohms() -> f64 {
    REFERENCE_OHMS
}

fn surrogate_vsat() -> f64 {
    SURROGATE_VSAT
}

fn surrogate_pre_gain() -> f64 {
    SURROGATE_PRE_GAIN
}

fn surrogate_post_gain() -> f64 {
    SURROGATE_POST_GAIN
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig::Benchmark {
            ladder: LadderSpec::default(),
            multiplier_ohms: REFERENCE_OHMS,
        }
    }
}

impl SystemConfig {
    pub fn id(&self) -> &'static str {
        match self {
            SystemConfig::Benchmark { .. } => "benchmark",
            SystemConfig::Surrogate { .. } => "surrogate",
            SystemConfig::Ladder { .. } => "ladder",
            SystemConfig::WienerHammerstein { .. } => "wiener-hammerstein",
        }
    }

    pub fn build(&self) -> Result<ReferenceSystem> {
        Ok(match self {
            SystemConfig::Benchmark {
                ladder,
                multiplier_ohms,
            } => {
                let h = LinearBlock::ladder(ladder)?;
                let mut sys = BenchmarkSystem::new(h.clone(), h.clone(), h);
                sys.multiplier_ohms = *multiplier_ohms;
                ReferenceSystem::Benchmark(sys)
            }
            SystemConfig::Surrogate {
                vsat,
                pre_gain,
                post_gain,
            } => {
                if !(*vsat > 0.0 && *pre_gain > 0.0) {
                    return Err(Error::Config("surrogate vsat and pre_gain must be positive".into()));
                }
                ReferenceSystem::Chain(WienerHammerstein {
                    pre: LinearBlock::ladder(&LadderSpec::with_gain(*pre_gain))?,
                    nonlinearity: Nonlinearity::SoftSaturation { vsat: *vsat, gain: 1.0 },
                    post: LinearBlock::ladder(&LadderSpec::with_gain(*post_gain))?,
                    input_bound: Some(vsat / pre_gain),
                    label: "surrogate-amplifier".into(),
                })
            }
            SystemConfig::Ladder { ladder } => ReferenceSystem::Linear(LinearBlock::ladder(ladder)?),
            SystemConfig::WienerHammerstein {
                pre,
                nonlinearity,
                post,
                input_bound,
            } => ReferenceSystem::Chain(WienerHammerstein {
                pre: LinearBlock::ladder(pre)?,
                nonlinearity: nonlinearity.clone(),
                post: LinearBlock::ladder(post)?,
                input_bound: *input_bound,
                label: "wiener-hammerstein".into(),
            }),
        })
    }
}

/// Any configured system, usable both as a transient model and as an oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSystem {
    Benchmark(BenchmarkSystem),
    Chain(WienerHammerstein),
    Linear(LinearBlock),
}

macro_rules! delegate {
    ($self:ident, $s:ident => $e:expr) => {
        match $self {
            ReferenceSystem::Benchmark($s) => $e,
            ReferenceSystem::Chain($s) => $e,
            ReferenceSystem::Linear($s) => $e,
        }
    };
}

impl ReferenceSystem {
    /// True when every even-order kernel vanishes identically.
    pub fn is_odd(&self) -> bool {
        match self {
            ReferenceSystem::Chain(wh) => wh.nonlinearity.is_odd(),
            ReferenceSystem::Linear(_) => true,
            ReferenceSystem::Benchmark(_) => false,
        }
    }
}

impl NonlinearSystem for ReferenceSystem {
    fn state_dim(&self) -> usize {
        delegate!(self, s => s.state_dim())
    }

    fn derivative(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        delegate!(self, s => s.derivative(x, u, dx))
    }

    fn output(&self, x: &[f64], u: f64) -> f64 {
        delegate!(self, s => s.output(x, u))
    }

    fn slowest_time_constant(&self) -> f64 {
        delegate!(self, s => s.slowest_time_constant())
    }

    fn saturation_bound(&self) -> Option<f64> {
        delegate!(self, s => s.saturation_bound())
    }
}

impl VolterraOracle for ReferenceSystem {
    fn max_order(&self) -> Option<usize> {
        delegate!(self, s => s.max_order())
    }

    fn kernel(&self, freqs_hz: &[f64]) -> std::result::Result<Complex64, xvolterra_core::error::SystemError> {
        delegate!(self, s => s.kernel(freqs_hz))
    }
}

/// Sweep plan parameters, or an existing plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    /// Load this plan instead of building one.
    pub file: Option<PathBuf>,
    pub id: Option<String>,
    pub delta_f_hz: f64,
    /// Axis starts in units of `delta_f_hz`, one per tone.
    pub starts: Vec<i64>,
    pub step: i64,
    pub points: usize,
    pub max_mixing_order: u32,
    pub levels_dbm: Vec<f64>,
    /// Jittered rows after the level cross product; unset uses the default redundancy.
    pub extra_rows: Option<usize>,
    pub z0: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            file: None,
            id: None,
            delta_f_hz: 1e6,
            starts: vec![7, 41, 87],
            step: 120,
            points: 18,
            max_mixing_order: 3,
            levels_dbm: vec![5.0, 10.0],
            extra_rows: None,
            z0: Z0_OHMS,
        }
    }
}

impl PlanConfig {
    pub fn build(&self, seed: u64, truncation_order: usize) -> Result<SweepPlan> {
        if self.starts.is_empty() || self.points == 0 || self.step <= 0 {
            return Err(Error::Config("plan needs tones, points > 0 and step > 0".into()));
        }
        if self.levels_dbm.is_empty() {
            return Err(Error::Config("plan needs at least one power level".into()));
        }
        if !(self.delta_f_hz > 0.0) {
            return Err(Error::Config("delta_f_hz must be positive".into()));
        }
        let tones = self.starts.len();
        let extra = self
            .extra_rows
            .unwrap_or_else(|| default_extra_rows(tones, self.max_mixing_order, truncation_order));
        Ok(SweepPlan {
            id: self
                .id
                .clone()
                .unwrap_or_else(|| format!("sweep-{tones}x{}pt", self.points)),
            delta_f_hz: self.delta_f_hz,
            axes: self
                .starts
                .iter()
                .map(|&start| ToneAxis {
                    start,
                    step: self.step,
                    count: self.points,
                })
                .collect(),
            max_mixing_order: self.max_mixing_order,
            amplitudes: amplitude_schedule(&self.levels_dbm, tones, self.z0, extra, seed),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMethod {
    /// RK4 transient to steady state, then an exact-bin DFT.
    Transient,
    /// Phasors computed from the system's oracle kernels.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub method: ProbeMethod,
    /// Highest oracle order included by the analytic method.
    pub analytic_truncation: usize,
    pub samples_per_record: usize,
    /// RK4 steps per sample; unset picks the smallest count meeting the step bound.
    pub substeps: Option<usize>,
    pub settle: Option<f64>,
    pub settle_time_constants: f64,
    pub min_settle: f64,
    pub steps_per_period: f64,
    pub blowup_factor: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        let s = ProbeSettings::default();
        ProbeConfig {
            method: ProbeMethod::Transient,
            analytic_truncation: 3,
            samples_per_record: s.samples_per_record,
            substeps: None,
            settle: s.settle,
            settle_time_constants: s.settle_time_constants,
            min_settle: s.min_settle,
            steps_per_period: s.steps_per_period,
            blowup_factor: s.blowup_factor,
        }
    }
}

impl ProbeConfig {
    pub fn settings(&self, plan: &SweepPlan) -> ProbeSettings {
        let substeps = self.substeps.unwrap_or_else(|| {
            auto_substeps(
                1.0 / plan.delta_f_hz / self.samples_per_record as f64,
                plan.max_tone_hz(),
                self.steps_per_period,
            )
        });
        ProbeSettings {
            samples_per_record: self.samples_per_record,
            substeps,
            settle: self.settle,
            settle_time_constants: self.settle_time_constants,
            min_settle: self.min_settle,
            steps_per_period: self.steps_per_period,
            blowup_factor: self.blowup_factor,
        }
    }
}

/// Smallest substep count with `dt / substeps <= 1 / (steps_per_period * f_max)`.
pub fn auto_substeps(dt: f64, f_max: f64, steps_per_period: f64) -> usize {
    if f_max <= 0.0 {
        return 1;
    }
    let limit = 1.0 / (steps_per_period * f_max);
    let mut s = ((dt / limit).ceil() as usize).max(1);
    while dt / s as f64 > limit {
        s += 1;
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub pulse: TrapezoidPulse,
    /// Periodic extension length in units of the pulse support.
    pub period_factor: f64,
    /// Positive input bins kept.
    pub max_bins: usize,
    /// Bins below this fraction of the largest are dropped.
    pub bin_cap: f64,
    /// Output sample step (s).
    pub dt: f64,
    /// Output window extends this far past the pulse end (s).
    pub window_after: f64,
    pub max_tuples: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            pulse: TrapezoidPulse::standard(1.0),
            period_factor: 4.0,
            max_bins: 200,
            bin_cap: 0.0,
            dt: 0.05e-9,
            window_after: 20e-9,
            max_tuples: SynthSettings::default().max_tuples,
        }
    }
}

impl SynthesisConfig {
    pub fn period(&self) -> f64 {
        self.period_factor * self.pulse.support()
    }

    /// Samples from t = 0 through the pulse end plus `window_after`.
    pub fn sample_count(&self) -> usize {
        ((self.pulse.end() + self.window_after) / self.dt).round() as usize + 1
    }

    pub fn settings(&self) -> SynthSettings {
        SynthSettings {
            max_tuples: self.max_tuples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    /// Drive scales of the direct transients used to split the reference into orders.
    pub drive_scales: Vec<f64>,
    pub total_nrmse_max: f64,
    /// Required ratio of the linear-only error to the total error; unset skips the check.
    pub linear_ratio_min: Option<f64>,
    /// Total error must fall at every smaller drive scale.
    pub require_monotone: bool,
    /// Per-order relative kernel tolerance (index 0 is order 1).
    pub kernel_tolerance: Vec<f64>,
    /// Third-order kernels are compared on the slice through the lattice value nearest this.
    pub slice_frequency_hz: f64,
    /// Even-order kernel magnitudes relative to odd ones, checked on odd systems.
    pub even_order_ratio_max: f64,
    /// Expected drop (dB) of pure order-n indices per 3 dB input drop is 3n, within this.
    pub scaling_tolerance_db: f64,
    /// Triplet probed for the scaling audit.
    pub scaling_triplet: usize,
    /// RK4 steps per output sample of the direct transient.
    pub substeps: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            drive_scales: vec![1.0, 0.5, 0.25],
            total_nrmse_max: 0.05,
            linear_ratio_min: Some(3.0),
            require_monotone: false,
            kernel_tolerance: vec![0.02, 0.05, 0.05],
            slice_frequency_hz: 0.5e9,
            even_order_ratio_max: 1e-3,
            scaling_tolerance_db: 0.1,
            scaling_triplet: 0,
            substeps: 10,
        }
    }
}

#[derive(Serialize)]
struct HashedContent<'a> {
    seed: u64,
    system: &'a SystemConfig,
    plan: &'a PlanConfig,
    probe: &'a ProbeConfig,
    extraction: &'a ExtractionSettings,
    synthesis: &'a SynthesisConfig,
    validation: &'a ValidationConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// SHA-256 (hex) of the settings that determine artifact contents.
    /// Paths and the command name are left out.
    pub fn hash(&self) -> String {
        content_hash(&HashedContent {
            seed: self.seed,
            system: &self.system,
            plan: &self.plan,
            probe: &self.probe,
            extraction: &self.extraction,
            synthesis: &self.synthesis,
            validation: &self.validation,
        })
    }
}

/// SHA-256 (hex) of the canonical JSON encoding of `value`.
pub fn content_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configuration serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn hash_ignores_paths() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.paths.out = PathBuf::from("elsewhere");
        b.command = Some("probe".into());
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn auto_substeps_meets_bound() {
        let dt = 1e-6 / 32768.0;
        assert_eq!(auto_substeps(dt, 2.127e9, 20.0), 2);
        assert_eq!(auto_substeps(dt, 687e6, 20.0), 1);
    }

    #[test]
    fn system_variants_parse() {
        let s: SystemConfig = serde_json::from_str(r#"{"kind":"surrogate"}"#).unwrap();
        assert!(s.build().unwrap().is_odd());
        let s: SystemConfig =
            serde_json::from_str(r#"{"kind":"wiener_hammerstein","nonlinearity":{"Polynomial":[1.0,0.1]}}"#).unwrap();
        assert!(!s.build().unwrap().is_odd());
    }
}
