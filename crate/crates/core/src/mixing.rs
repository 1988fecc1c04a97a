//! Intermodulation index bookkeeping for M-tone probing.
//!
//! An output frequency `k1*w1 + ... + kM*wM` is named by its integer mixing
//! vector [`FrequencyIndex`]. Because the time signals are real, `k` and `-k`
//! carry the same information; only the canonical member of each pair is
//! recorded (the first nonzero entry is positive).
//!
//! All symmetric kernels of order `n` landing on the same index are grouped
//! by [`GTermDescriptor`]: tone `m` contributes `|k_m| + r_m` arguments with
//! the sign of `k_m` and `r_m` arguments with the opposite sign, so that
//! `sum(|k_m| + 2 r_m) = n`.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Signed mixing vector `[k1, .., kM]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
pub struct FrequencyIndex(pub Vec<i32>);

impl FrequencyIndex {
    pub fn new(k: Vec<i32>) -> Self {
        FrequencyIndex(k)
    }

    pub fn zero(tones: usize) -> Self {
        FrequencyIndex(vec![0; tones])
    }

    pub fn tones(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.0
    }

    /// Total mixing order `|k|_1`.
    pub fn order(&self) -> u32 {
        self.0.iter().map(|k| k.unsigned_abs()).sum()
    }

    pub fn is_dc(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }

    /// The first nonzero entry is positive (the zero vector counts as canonical).
    pub fn is_canonical(&self) -> bool {
        match self.0.iter().find(|&&k| k != 0) {
            Some(&k) => k > 0,
            None => true,
        }
    }

    pub fn negated(&self) -> Self {
        FrequencyIndex(self.0.iter().map(|k| -k).collect())
    }

    /// `sum k_m f_m` for integer tone frequencies.
    pub fn frequency(&self, tones: &[i64]) -> i64 {
        self.0.iter().zip(tones).map(|(&k, &f)| i64::from(k) * f).sum()
    }

    /// `sum k_m f_m` for real tone frequencies.
    pub fn frequency_hz(&self, tones: &[f64]) -> f64 {
        self.0.iter().zip(tones).map(|(&k, &f)| f64::from(k) * f).sum()
    }
}

impl fmt::Display for FrequencyIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        f.write_str("]")
    }
}

/// Replace `k` by `-k` when `k` is not canonical. The flag reports whether
/// the phasor at `k` is the conjugate of the one stored at the returned index.
pub fn canonicalize_index(k: &FrequencyIndex) -> (FrequencyIndex, bool) {
    if k.is_canonical() {
        (k.clone(), false)
    } else {
        (k.negated(), true)
    }
}

/// Ordering used for every emitted index list: ascending `|k|_1`, then
/// descending lexicographic on `k`.
pub fn index_order(a: &FrequencyIndex, b: &FrequencyIndex) -> Ordering {
    a.order().cmp(&b.order()).then_with(|| b.0.cmp(&a.0))
}

/// Every `k` with `|k|_1 <= max_order`, both signs, including the zero vector.
pub fn all_indices(tones: usize, max_order: u32) -> Vec<FrequencyIndex> {
    let bound = max_order as i32;
    let mut out = Vec::new();
    let mut k = vec![-bound; tones];
    if tones == 0 {
        return out;
    }
    loop {
        let idx = FrequencyIndex(k.clone());
        if idx.order() <= max_order {
            out.push(idx);
        }
        // odometer increment
        let mut pos = tones;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if k[pos] < bound {
                k[pos] += 1;
                break;
            }
            k[pos] = -bound;
        }
    }
}

/// Canonical output indices with `1 <= |k|_1 <= max_mixing_order`.
///
/// For three tones at mixing order three this is the 31-frequency list; the
/// DC vector is not included (see [`enumerate_output_indices_with_dc`]).
pub fn enumerate_output_indices(tones: usize, max_mixing_order: u32) -> Vec<FrequencyIndex> {
    let mut out: Vec<FrequencyIndex> = all_indices(tones, max_mixing_order)
        .into_iter()
        .filter(|k| !k.is_dc() && k.is_canonical())
        .collect();
    out.sort_by(index_order);
    out
}

/// [`enumerate_output_indices`] preceded by the DC vector.
pub fn enumerate_output_indices_with_dc(tones: usize, max_mixing_order: u32) -> Vec<FrequencyIndex> {
    let mut out = vec![FrequencyIndex::zero(tones)];
    out.extend(enumerate_output_indices(tones, max_mixing_order));
    out
}

/// One group of identical symmetric kernel instances at index `k` and order `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GTermDescriptor {
    pub k: FrequencyIndex,
    pub r: Vec<u32>,
}

impl GTermDescriptor {
    pub fn new(k: FrequencyIndex, r: Vec<u32>) -> Self {
        debug_assert_eq!(k.tones(), r.len());
        GTermDescriptor { k, r }
    }

    /// Kernel order `sum(|k_m| + 2 r_m)`.
    pub fn order(&self) -> usize {
        self.k
            .0
            .iter()
            .zip(&self.r)
            .map(|(k, r)| (k.unsigned_abs() + 2 * r) as usize)
            .sum()
    }

    /// Number of kernel instances in the group: `n! / prod (|k_m|+r_m)! r_m!`.
    pub fn multiplicity(&self) -> u64 {
        let mut m = factorial(self.order() as u32);
        for (k, r) in self.k.0.iter().zip(&self.r) {
            m /= factorial(k.unsigned_abs() + r) * factorial(*r);
        }
        m
    }

    /// Coefficient multiplying the kernel in the output phasor at `k` when
    /// the tones have real amplitudes `v` (zero phases).
    pub fn coefficient(&self, amplitudes: &[f64]) -> f64 {
        let mut c = 1.0;
        for ((k, r), v) in self.k.0.iter().zip(&self.r).zip(amplitudes) {
            let pos = k.unsigned_abs() + r;
            let half = 0.5 * v;
            c *= powi(half, pos + r) / (factorial(pos) * factorial(*r)) as f64;
        }
        c
    }

    /// Argument tuple in the grouped layout: for each tone, `|k_m|+r_m`
    /// copies with the sign of `k_m` followed by `r_m` of the opposite sign.
    pub fn arguments(&self) -> KernelArgumentTuple {
        let mut args = Vec::with_capacity(self.order());
        for (m, (k, r)) in self.k.0.iter().zip(&self.r).enumerate() {
            let lead_negative = *k < 0;
            for _ in 0..(k.unsigned_abs() + r) {
                args.push(SignedTone {
                    tone: m,
                    negative: lead_negative,
                });
            }
            for _ in 0..*r {
                args.push(SignedTone {
                    tone: m,
                    negative: !lead_negative,
                });
            }
        }
        KernelArgumentTuple(args)
    }

    /// Kernel arguments as signed integer frequencies.
    pub fn argument_frequencies(&self, tones: &[i64]) -> Vec<i64> {
        self.arguments()
            .0
            .iter()
            .map(|a| if a.negative { -tones[a.tone] } else { tones[a.tone] })
            .collect()
    }
}

impl fmt::Display for GTermDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H{}{}", self.order(), self.arguments())
    }
}

/// All `(k, r)` solutions at index `k` with order `n`.
pub fn gterms_at_order(k: &FrequencyIndex, n: usize) -> Vec<GTermDescriptor> {
    let base = k.order() as usize;
    if n < base || !(n - base).is_multiple_of(2) {
        return Vec::new();
    }
    let pairs = ((n - base) / 2) as u32;
    compositions(pairs, k.tones())
        .into_iter()
        .map(|r| GTermDescriptor::new(k.clone(), r))
        .collect()
}

/// All `(k, r)` solutions at index `k` with order `1..=max_order`, ascending in order.
pub fn gterms_at_index(k: &FrequencyIndex, max_order: usize) -> Vec<GTermDescriptor> {
    (1..=max_order).flat_map(|n| gterms_at_order(k, n)).collect()
}

/// Weak compositions of `total` into `parts` nonnegative integers, ordered so
/// that mass sits on the last tone first (matches the listing `r3, r2, r1`).
fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; parts];
    fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == 0 {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let p = pos - 1;
        if p == 0 {
            cur[0] = left;
            out.push(cur.clone());
            cur[0] = 0;
            return;
        }
        for v in (0..=left).rev() {
            cur[p] = v;
            rec(p, left - v, cur, out);
        }
        cur[p] = 0;
    }
    if parts == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(parts, total, &mut cur, &mut out);
    out
}

/// Order-`n` kernel groups for every canonical output index (DC excluded),
/// in [`enumerate_output_indices`] order; indices without order-`n`
/// kernels are omitted.
pub fn enumerate_kernels_for_order(
    tones: usize,
    max_mixing_order: u32,
    n: usize,
) -> Vec<(FrequencyIndex, Vec<GTermDescriptor>)> {
    enumerate_output_indices(tones, max_mixing_order)
        .into_iter()
        .filter_map(|k| {
            let terms = gterms_at_order(&k, n);
            (!terms.is_empty()).then_some((k, terms))
        })
        .collect()
}

/// Number of summands of the `n`-th order output under `M`-tone drive, `(2M)^n`.
pub fn count_terms(tones: usize, n: u32) -> u64 {
    (2 * tones as u64).pow(n)
}

/// One kernel argument: `+w_m` or `-w_m` (tone ids are zero based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignedTone {
    pub tone: usize,
    pub negative: bool,
}

impl SignedTone {
    pub fn pos(tone: usize) -> Self {
        SignedTone { tone, negative: false }
    }

    pub fn neg(tone: usize) -> Self {
        SignedTone { tone, negative: true }
    }
}

impl fmt::Display for SignedTone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative {
            f.write_str("-")?;
        }
        write!(f, "w{}", self.tone + 1)
    }
}

/// Ordered list of kernel arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KernelArgumentTuple(pub Vec<SignedTone>);

impl KernelArgumentTuple {
    /// The grouped descriptor this tuple belongs to (up to permutation).
    pub fn descriptor(&self, tones: usize) -> GTermDescriptor {
        let mut plus = vec![0u32; tones];
        let mut minus = vec![0u32; tones];
        for a in &self.0 {
            if a.negative {
                minus[a.tone] += 1;
            } else {
                plus[a.tone] += 1;
            }
        }
        let k = plus.iter().zip(&minus).map(|(&p, &q)| p as i32 - q as i32).collect();
        let r = plus.iter().zip(&minus).map(|(&p, &q)| p.min(q)).collect();
        GTermDescriptor::new(FrequencyIndex(k), r)
    }

    pub fn negated(&self) -> Self {
        KernelArgumentTuple(
            self.0
                .iter()
                .map(|a| SignedTone {
                    tone: a.tone,
                    negative: !a.negative,
                })
                .collect(),
        )
    }
}

impl fmt::Display for KernelArgumentTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// Bring a kernel argument tuple into the grouped layout at a canonical
/// index, negating every argument (and flagging conjugation) if needed.
pub fn canonicalize_kernel_args(args: &KernelArgumentTuple, tones: usize) -> (KernelArgumentTuple, bool) {
    let g = args.descriptor(tones);
    let (k, flipped) = canonicalize_index(&g.k);
    let canon = GTermDescriptor::new(k, g.r);
    (canon.arguments(), flipped)
}

/// `n!` for small `n` (exact up to 20).
pub fn factorial(n: u32) -> u64 {
    (1..=u64::from(n)).product()
}

pub(crate) fn powi(x: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= x;
    }
    acc
}
