//! Reference systems with closed-form Volterra kernels.
//!
//! * [`LinearBlock`]: lumped LC low-pass ladder in state-space form.
//! * [`BenchmarkSystem`]: three blocks and two buffered multipliers,
//!   `y = a + a*b + a*b*c`, exactly third order.
//! * [`WienerHammerstein`]: block, memoryless nonlinearity, block. With a
//!   soft saturator it is the amplifier surrogate; with a polynomial it is
//!   a known finite-order test system.
//!
//! Kernels follow the convention `y_n(t) = 1/n! * sum H_n(w1..wn) U(w1)..U(wn)`,
//! so a product of `n` linear outputs has the permutation sum as its kernel.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::SystemError;
use crate::kernel::canonical_args_f64;

/// Default termination and multiplier impedance.
pub const REFERENCE_OHMS: f64 = 50.0;
/// Ladder series inductance.
pub const LADDER_L: f64 = 42.52e-9;
/// Ladder shunt capacitance.
pub const LADDER_C: f64 = 8.5e-12;
/// Input-referred saturation limit of the amplifier surrogate.
pub const SURROGATE_VSAT: f64 = 0.070;

/// Time-invariant system driven by one scalar input.
pub trait NonlinearSystem {
    fn state_dim(&self) -> usize;
    /// `dx = f(x, u)`.
    fn derivative(&self, x: &[f64], u: f64, dx: &mut [f64]);
    fn output(&self, x: &[f64], u: f64) -> f64;
    /// Longest time constant of the linear dynamics (s).
    fn slowest_time_constant(&self) -> f64;
    /// Input peak above which the system leaves its intended operating range.
    fn saturation_bound(&self) -> Option<f64> {
        None
    }
}

/// Analytic kernels of a reference system.
pub trait VolterraOracle {
    /// Highest nonzero order, or `None` when every order may be nonzero.
    fn max_order(&self) -> Option<usize>;
    /// Symmetric kernel of order `freqs_hz.len()` at signed frequencies (Hz).
    fn kernel(&self, freqs_hz: &[f64]) -> Result<Complex64, SystemError>;
}

/// Element values of a doubly terminated pi ladder (C - L - C).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct LadderSpec {
    pub source_ohms: f64,
    pub load_ohms: f64,
    pub c1: f64,
    pub l: f64,
    pub c2: f64,
    /// Output scale; the default 1 gives unity passband gain.
    pub gain: f64,
}

impl Default for LadderSpec {
    fn default() -> Self {
        LadderSpec {
            source_ohms: REFERENCE_OHMS,
            load_ohms: REFERENCE_OHMS,
            c1: LADDER_C,
            l: LADDER_L,
            c2: LADDER_C,
            gain: 1.0,
        }
    }
}

impl LadderSpec {
    pub fn with_gain(gain: f64) -> Self {
        LadderSpec {
            gain,
            ..Self::default()
        }
    }
}

/// Single-input single-output state-space block `x' = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBlock {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: f64,
    slowest_tau: f64,
}

impl LinearBlock {
    /// `a` is row-major `n x n`. Rejects blocks with poles in the closed
    /// right half plane.
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, d: f64) -> Result<Self, SystemError> {
        let n = b.len();
        assert_eq!(a.len(), n * n);
        assert_eq!(c.len(), n);
        let poles = poles(n, &a);
        if poles.iter().any(|p| !(p.0 < 0.0)) {
            return Err(SystemError::Unstable(poles));
        }
        let slowest_re = poles.iter().map(|p| -p.0).fold(f64::INFINITY, f64::min);
        Ok(LinearBlock {
            n,
            a,
            b,
            c,
            d,
            slowest_tau: if n == 0 { 0.0 } else { 1.0 / slowest_re },
        })
    }

    /// States `[v1, iL, v2]`; output `gain * 2 * v2` (unity passband for
    /// matched terminations).
    pub fn ladder(spec: &LadderSpec) -> Result<Self, SystemError> {
        let LadderSpec {
            source_ohms: rs,
            load_ohms: rl,
            c1,
            l,
            c2,
            gain,
        } = *spec;
        for (name, v) in [("Rs", rs), ("RL", rl), ("C1", c1), ("L", l), ("C2", c2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SystemError::BadElement(name));
            }
        }
        let a = vec![
            -1.0 / (rs * c1),
            -1.0 / c1,
            0.0,
            1.0 / l,
            0.0,
            -1.0 / l,
            0.0,
            1.0 / c2,
            -1.0 / (rl * c2),
        ];
        let b = vec![1.0 / (rs * c1), 0.0, 0.0];
        let c = vec![0.0, 0.0, gain * (rs + rl) / rl];
        LinearBlock::new(a, b, c, 0.0)
    }

    /// The default ladder: 8.5 pF / 42.52 nH / 8.5 pF between 50 ohm ends.
    pub fn default_ladder() -> Self {
        Self::ladder(&LadderSpec::default()).expect("default ladder is stable")
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn slowest_time_constant(&self) -> f64 {
        self.slowest_tau
    }

    /// `C (jwI - A)^-1 B + D` at angular frequency `omega`.
    pub fn analytic_transfer(&self, omega: f64) -> Complex64 {
        let n = self.n;
        if n == 0 {
            return Complex64::new(self.d, 0.0);
        }
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j {
                Complex64::new(0.0, omega)
            } else {
                Complex64::new(0.0, 0.0)
            };
            diag - Complex64::new(self.a[i * n + j], 0.0)
        });
        let rhs = DVector::from_fn(n, |i, _| Complex64::new(self.b[i], 0.0));
        let x = m.lu().solve(&rhs).expect("stable block has no imaginary-axis poles");
        let mut y = Complex64::new(self.d, 0.0);
        for i in 0..n {
            y += x[i] * self.c[i];
        }
        y
    }

    /// Transfer at a frequency in Hz.
    pub fn transfer_hz(&self, f: f64) -> Complex64 {
        self.analytic_transfer(2.0 * core::f64::consts::PI * f)
    }

    #[inline]
    pub fn derivative(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            let mut s = self.b[i] * u;
            for j in 0..n {
                s += row[j] * x[j];
            }
            dx[i] = s;
        }
    }

    #[inline]
    pub fn output(&self, x: &[f64], u: f64) -> f64 {
        let mut y = self.d * u;
        for i in 0..self.n {
            y += self.c[i] * x[i];
        }
        y
    }
}

fn poles(n: usize, a: &[f64]) -> Vec<(f64, f64)> {
    if n == 0 {
        return Vec::new();
    }
    let m = DMatrix::from_row_slice(n, n, a);
    m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
}

/// Multiplier branch current for the port law `i3 = (v1 v2 - v3) / zf`.
/// The buffered output node sits where this current vanishes, `v3 = v1 v2`.
pub fn evaluate_memoryless(v1: f64, v2: f64, v3: f64, zf: f64) -> f64 {
    (v1 * v2 - v3) / zf
}

/// `y = a + a*b + a*b*c` with `a`, `b`, `c` three linear blocks sharing the input.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSystem {
    pub blocks: [LinearBlock; 3],
    pub multiplier_ohms: f64,
}

impl BenchmarkSystem {
    pub fn new(a: LinearBlock, b: LinearBlock, c: LinearBlock) -> Self {
        BenchmarkSystem {
            blocks: [a, b, c],
            multiplier_ohms: REFERENCE_OHMS,
        }
    }

    /// Three identical default ladders.
    pub fn standard() -> Self {
        let h = LinearBlock::default_ladder();
        Self::new(h.clone(), h.clone(), h)
    }

    fn block_outputs(&self, x: &[f64], u: f64) -> [f64; 3] {
        let mut off = 0;
        let mut out = [0.0; 3];
        for (o, blk) in out.iter_mut().zip(&self.blocks) {
            *o = blk.output(&x[off..off + blk.state_dim()], u);
            off += blk.state_dim();
        }
        out
    }
}

impl NonlinearSystem for BenchmarkSystem {
    fn state_dim(&self) -> usize {
        self.blocks.iter().map(LinearBlock::state_dim).sum()
    }

    fn derivative(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let mut off = 0;
        for blk in &self.blocks {
            let n = blk.state_dim();
            blk.derivative(&x[off..off + n], u, &mut dx[off..off + n]);
            off += n;
        }
    }

    fn output(&self, x: &[f64], u: f64) -> f64 {
        let [a, b, c] = self.block_outputs(x, u);
        // buffered multipliers sit at zero branch current: v3 = v1 * v2
        let ab = a * b;
        a + ab + ab * c
    }

    fn slowest_time_constant(&self) -> f64 {
        self.blocks
            .iter()
            .map(LinearBlock::slowest_time_constant)
            .fold(0.0, f64::max)
    }
}

/// Evaluate `eval` on the canonical ordering of `freqs_hz` so permuted and
/// negated queries give bit-identical (conjugated) results.
fn symmetric<F>(freqs_hz: &[f64], eval: F) -> Result<Complex64, SystemError>
where
    F: FnOnce(&[f64]) -> Result<Complex64, SystemError>,
{
    let (q, flip) = canonical_args_f64(freqs_hz);
    let mut v = eval(&q)?;
    if q.iter().zip(q.iter().rev()).all(|(a, b)| *a == -*b) {
        v.im = 0.0;
    }
    Ok(if flip { v.conj() } else { v })
}

/// Sum of `prod_i f(args[perm[i]])` over all orderings assigning the
/// factors to arguments.
fn permutation_sum(factors: &[&LinearBlock], freqs_hz: &[f64]) -> Complex64 {
    let n = factors.len();
    let table: Vec<Vec<Complex64>> = factors
        .iter()
        .map(|blk| freqs_hz.iter().map(|&f| blk.transfer_hz(f)).collect())
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = Complex64::new(0.0, 0.0);
    permute(&mut perm, 0, &mut |p| {
        let mut prod = Complex64::new(1.0, 0.0);
        for (blk, &arg) in p.iter().enumerate() {
            prod *= table[blk][arg];
        }
        total += prod;
    });
    total
}

fn permute(p: &mut [usize], k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

impl VolterraOracle for BenchmarkSystem {
    fn max_order(&self) -> Option<usize> {
        Some(3)
    }

    /// Orders above three are identically zero.
    fn kernel(&self, freqs_hz: &[f64]) -> Result<Complex64, SystemError> {
        let [a, b, c] = &self.blocks;
        symmetric(freqs_hz, |f| match f.len() {
            0 => Err(SystemError::OrderOutOfRange { order: 0, max: 3 }),
            1 => Ok(a.transfer_hz(f[0])),
            2 => Ok(permutation_sum(&[a, b], f)),
            3 => Ok(permutation_sum(&[a, b, c], f)),
            _ => Ok(Complex64::new(0.0, 0.0)),
        })
    }
}

/// Memoryless map between the two blocks of a [`WienerHammerstein`] chain.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Nonlinearity {
    /// `vsat * tanh(gain * v / vsat)`.
    SoftSaturation { vsat: f64, gain: f64 },
    /// `sum_n coeffs[n-1] * v^n`.
    Polynomial(Vec<f64>),
}

/// Odd Taylor coefficients of tanh up to x^9.
const TANH_SERIES: [(usize, f64); 5] = [
    (1, 1.0),
    (3, -1.0 / 3.0),
    (5, 2.0 / 15.0),
    (7, -17.0 / 315.0),
    (9, 62.0 / 2835.0),
];

impl Nonlinearity {
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            Nonlinearity::SoftSaturation { vsat, gain } => vsat * (gain * v / vsat).tanh(),
            Nonlinearity::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| (acc + a) * v),
        }
    }

    /// Power-series coefficient of `v^n`; `None` beyond the tabulated range.
    pub fn series_coefficient(&self, n: usize) -> Option<f64> {
        match self {
            Nonlinearity::SoftSaturation { vsat, gain } => {
                if n > 9 {
                    return None;
                }
                let c = TANH_SERIES.iter().find(|(k, _)| *k == n).map_or(0.0, |(_, c)| *c);
                Some(c * gain.powi(n as i32) * vsat.powi(1 - n as i32))
            }
            Nonlinearity::Polynomial(c) => Some(c.get(n.wrapping_sub(1)).copied().unwrap_or(0.0)),
        }
    }

    pub fn is_odd(&self) -> bool {
        match self {
            Nonlinearity::SoftSaturation { .. } => true,
            Nonlinearity::Polynomial(c) => c.iter().skip(1).step_by(2).all(|&a| a == 0.0),
        }
    }
}

/// Block, memoryless nonlinearity, block.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerHammerstein {
    pub pre: LinearBlock,
    pub nonlinearity: Nonlinearity,
    pub post: LinearBlock,
    /// Input peak at which the nonlinearity input reaches its limit.
    pub input_bound: Option<f64>,
    pub label: String,
}

/// The amplifier stand-in is a saturating Wiener-Hammerstein chain.
pub type SurrogateAmplifier = WienerHammerstein;

/// Input pad ahead of the surrogate's saturator.
pub const SURROGATE_PRE_GAIN: f64 = 0.25;
/// Output gain after the surrogate's saturator.
pub const SURROGATE_POST_GAIN: f64 = 10.0;

impl WienerHammerstein {
    /// Ladder pad (gain 0.25), `70 mV * tanh(v / 70 mV)`, ladder (gain 10).
    /// The saturation limit referred to the input is `70 mV / 0.25`.
    pub fn surrogate_amplifier() -> Self {
        let pre = LinearBlock::ladder(&LadderSpec::with_gain(SURROGATE_PRE_GAIN)).expect("default ladder is stable");
        let post = LinearBlock::ladder(&LadderSpec::with_gain(SURROGATE_POST_GAIN)).expect("default ladder is stable");
        WienerHammerstein {
            pre,
            nonlinearity: Nonlinearity::SoftSaturation {
                vsat: SURROGATE_VSAT,
                gain: 1.0,
            },
            post,
            input_bound: Some(SURROGATE_VSAT / SURROGATE_PRE_GAIN),
            label: String::from("surrogate-amplifier"),
        }
    }

    /// Default ladders around a polynomial with coefficients of `v, v^2, ...`.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let h = LinearBlock::default_ladder();
        WienerHammerstein {
            pre: h.clone(),
            nonlinearity: Nonlinearity::Polynomial(coeffs),
            post: h,
            input_bound: None,
            label: String::from("polynomial-wh"),
        }
    }
}

impl NonlinearSystem for WienerHammerstein {
    fn state_dim(&self) -> usize {
        self.pre.state_dim() + self.post.state_dim()
    }

    fn derivative(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let np = self.pre.state_dim();
        let (xp, xq) = x.split_at(np);
        let (dp, dq) = dx.split_at_mut(np);
        self.pre.derivative(xp, u, dp);
        let v = self.nonlinearity.eval(self.pre.output(xp, u));
        self.post.derivative(xq, v, dq);
    }

    fn output(&self, x: &[f64], u: f64) -> f64 {
        let np = self.pre.state_dim();
        let v = self.nonlinearity.eval(self.pre.output(&x[..np], u));
        self.post.output(&x[np..], v)
    }

    fn slowest_time_constant(&self) -> f64 {
        self.pre.slowest_time_constant().max(self.post.slowest_time_constant())
    }

    fn saturation_bound(&self) -> Option<f64> {
        self.input_bound
    }
}

impl VolterraOracle for WienerHammerstein {
    fn max_order(&self) -> Option<usize> {
        match &self.nonlinearity {
            Nonlinearity::SoftSaturation { .. } => None,
            Nonlinearity::Polynomial(c) => Some(c.len()),
        }
    }

    /// `n! a_n H_pre(w1)..H_pre(wn) H_post(w1+..+wn)`.
    fn kernel(&self, freqs_hz: &[f64]) -> Result<Complex64, SystemError> {
        let n = freqs_hz.len();
        let a = self
            .nonlinearity
            .series_coefficient(n)
            .filter(|_| n > 0)
            .ok_or(SystemError::OrderOutOfRange { order: n, max: 9 })?;
        if a == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        symmetric(freqs_hz, |f| {
            let mut h = Complex64::new(a * factorial_f64(n), 0.0);
            for &x in f {
                h *= self.pre.transfer_hz(x);
            }
            Ok(h * self.post.transfer_hz(f.iter().sum()))
        })
    }
}

fn factorial_f64(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Linear block as a system in its own right.
impl NonlinearSystem for LinearBlock {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn derivative(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        LinearBlock::derivative(self, x, u, dx)
    }

    fn output(&self, x: &[f64], u: f64) -> f64 {
        LinearBlock::output(self, x, u)
    }

    fn slowest_time_constant(&self) -> f64 {
        self.slowest_tau
    }
}

impl VolterraOracle for LinearBlock {
    fn max_order(&self) -> Option<usize> {
        Some(1)
    }

    fn kernel(&self, freqs_hz: &[f64]) -> Result<Complex64, SystemError> {
        match freqs_hz.len() {
            0 => Err(SystemError::OrderOutOfRange { order: 0, max: 1 }),
            1 => symmetric(freqs_hz, |f| Ok(self.transfer_hz(f[0]))),
            _ => Ok(Complex64::new(0.0, 0.0)),
        }
    }
}
