//! Error types shared across the core crate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::mixing::FrequencyIndex;

/// Errors raised by the kernel store.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelError {
    /// A frequency argument does not sit on the grid lattice.
    OffLattice {
        /// Position of the offending argument in the tuple.
        axis: usize,
        /// The offending frequency, in units of the lattice resolution.
        value: i64,
    },
    /// Argument count does not match the grid order.
    OrderMismatch { expected: usize, got: usize },
    /// The grid has no samples, or has not been frozen.
    EmptyGrid,
    /// Dense storage for the requested order and lattice would be too large.
    TooLarge { entries: u128 },
    /// Lattices of two grids being merged differ.
    LatticeMismatch,
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::OffLattice { axis, value } => {
                write!(f, "argument {axis} ({value} x df) is not on the kernel lattice")
            }
            KernelError::OrderMismatch { expected, got } => {
                write!(f, "expected {expected} kernel arguments, got {got}")
            }
            KernelError::EmptyGrid => f.write_str("kernel grid is empty or not frozen"),
            KernelError::TooLarge { entries } => {
                write!(f, "dense kernel storage would need {entries} entries")
            }
            KernelError::LatticeMismatch => f.write_str("kernel grids have different lattices"),
        }
    }
}

/// Errors raised by the time-domain probing engine.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeError {
    /// The state norm exceeded the blow-up threshold.
    Unstable { time: f64, norm: f64 },
    /// A mixing product does not land on a DFT bin of the record.
    BinMisaligned { index: FrequencyIndex, bin: f64 },
    /// A mixing product is at or above the Nyquist bin.
    AboveNyquist { index: FrequencyIndex, bin: i64 },
    /// The waveform is too short for the requested settle + record window.
    WaveformTooShort { needed: usize, available: usize },
    /// Record length does not span a whole number of samples.
    BadRecord(String),
    /// The step does not resolve the fastest input frequency.
    StepTooLarge { dt: f64, limit: f64 },
    /// Plan failed collision validation.
    InvalidPlan(usize),
    /// Amplitude schedule exceeds the system saturation bound.
    AmplitudeAboveBound { amplitude: f64, bound: f64 },
}

impl fmt::Display for ProbeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbeError::Unstable { time, norm } => {
                write!(f, "transient blew up at t = {time:e} s (state norm {norm:e})")
            }
            ProbeError::BinMisaligned { index, bin } => {
                write!(f, "mixing product {index} falls between DFT bins (bin {bin})")
            }
            ProbeError::AboveNyquist { index, bin } => {
                write!(f, "mixing product {index} (bin {bin}) is above Nyquist")
            }
            ProbeError::WaveformTooShort { needed, available } => {
                write!(f, "waveform has {available} samples, capture needs {needed}")
            }
            ProbeError::BadRecord(msg) => write!(f, "bad record window: {msg}"),
            ProbeError::StepTooLarge { dt, limit } => {
                write!(f, "time step {dt:e} s exceeds limit {limit:e} s")
            }
            ProbeError::InvalidPlan(n) => write!(f, "plan has {n} mixing-product collisions"),
            ProbeError::AmplitudeAboveBound { amplitude, bound } => {
                write!(f, "tone amplitude {amplitude} V exceeds saturation bound {bound} V")
            }
        }
    }
}

/// Errors raised while assembling or solving least-squares systems.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtractError {
    /// A required phasor is absent from the dataset.
    MissingEntry {
        triplet: usize,
        amplitude: usize,
        index: FrequencyIndex,
    },
    /// Fewer rows than unknowns.
    Underdetermined {
        rows: usize,
        unknowns: usize,
    },
    /// Numerical rank below the unknown count.
    RankDeficient {
        rank: usize,
        unknowns: usize,
        condition: f64,
    },
    /// Too few points resolved for the archive to be usable.
    Incomplete {
        resolved: usize,
        total: usize,
    },
    /// Truncation order is larger than the plan's maximum mixing order.
    OrderAbovePlan {
        order: usize,
        max_mixing_order: usize,
    },
    Kernel(KernelError),
}

impl From<KernelError> for ExtractError {
    fn from(e: KernelError) -> Self {
        ExtractError::Kernel(e)
    }
}

impl fmt::Display for ExtractError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtractError::MissingEntry {
                triplet,
                amplitude,
                index,
            } => write!(
                f,
                "dataset has no phasor for triplet {triplet}, amplitude {amplitude}, index {index}"
            ),
            ExtractError::Underdetermined { rows, unknowns } => {
                write!(f, "{rows} rows for {unknowns} unknowns")
            }
            ExtractError::RankDeficient {
                rank,
                unknowns,
                condition,
            } => write!(f, "rank {rank} < {unknowns} unknowns (condition number {condition:e})"),
            ExtractError::Incomplete { resolved, total } => {
                write!(f, "only {resolved} of {total} kernel points resolved")
            }
            ExtractError::OrderAbovePlan {
                order,
                max_mixing_order,
            } => write!(
                f,
                "truncation order {order} exceeds plan mixing order {max_mixing_order}"
            ),
            ExtractError::Kernel(e) => write!(f, "{e}"),
        }
    }
}

/// Errors raised by the synthesizer.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    /// The archive does not contain the requested order.
    MissingOrder(usize),
    Kernel(KernelError),
}

impl From<KernelError> for SynthError {
    fn from(e: KernelError) -> Self {
        SynthError::Kernel(e)
    }
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::MissingOrder(n) => write!(f, "archive has no order-{n} kernel"),
            SynthError::Kernel(e) => write!(f, "{e}"),
        }
    }
}

/// Errors raised by reference-system construction and oracle queries.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemError {
    /// Oracle order outside the supported range.
    OrderOutOfRange { order: usize, max: usize },
    /// The linear block has a pole in the closed right half plane.
    Unstable(Vec<(f64, f64)>),
    /// Element values must be positive and finite.
    BadElement(&'static str),
}

impl fmt::Display for SystemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemError::OrderOutOfRange { order, max } => {
                write!(f, "kernel order {order} outside 1..={max}")
            }
            SystemError::Unstable(poles) => write!(f, "unstable linear block, poles {poles:?}"),
            SystemError::BadElement(name) => write!(f, "element {name} must be positive"),
        }
    }
}

impl core::error::Error for KernelError {}

impl core::error::Error for ProbeError {}

impl core::error::Error for ExtractError {}

impl core::error::Error for SynthError {}

impl core::error::Error for SystemError {}
