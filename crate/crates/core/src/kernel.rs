//! Symmetric kernel storage on a swept frequency lattice.
//!
//! Samples are keyed by a canonical signed argument tuple: arguments sorted
//! in descending order, and the whole tuple negated (value conjugated) when
//! the negated tuple sorts lexicographically higher. Every permutation and
//! the global sign flip of an argument tuple therefore resolve to the same
//! stored sample.
//!
//! All axes share one lattice (the union of the sweep axes), expressed in
//! integer multiples of the plan resolution. After [`KernelGrid::freeze`]
//! the grid also carries a dense table over the signed lattice in which
//! never-swept points are filled from their neighbours; interpolated
//! queries read only that table.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use num_complex::Complex64;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::KernelError;
use crate::extract::ExtractionSettings;

/// Upper bound on dense table entries built by [`KernelGrid::freeze`].
pub const MAX_DENSE_ENTRIES: usize = 1 << 25;

/// Canonical form of a signed integer argument tuple.
pub fn canonical_args(args: &[i64]) -> (Vec<i64>, bool) {
    let mut pos: Vec<i64> = args.to_vec();
    pos.sort_unstable_by(|a, b| b.cmp(a));
    let neg: Vec<i64> = pos.iter().rev().map(|v| -v).collect();
    if neg > pos {
        (neg, true)
    } else {
        (pos, false)
    }
}

/// Canonical form of a real argument tuple; same rule as [`canonical_args`].
pub fn canonical_args_f64(args: &[f64]) -> (Vec<f64>, bool) {
    let mut pos: Vec<f64> = args.to_vec();
    pos.sort_unstable_by(|a, b| b.total_cmp(a));
    let neg: Vec<f64> = pos.iter().rev().map(|v| -v).collect();
    let cmp = neg
        .iter()
        .zip(&pos)
        .map(|(a, b)| a.total_cmp(b))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal);
    if cmp == Ordering::Greater {
        (neg, true)
    } else {
        (pos, false)
    }
}

fn is_self_conjugate(canon: &[i64]) -> bool {
    canon.iter().zip(canon.iter().rev()).all(|(a, b)| *a == -*b)
}

/// Interpolate between two complex samples in magnitude and wrapped phase.
pub(crate) fn lerp_polar(a: Complex64, b: Complex64, t: f64) -> Complex64 {
    if t == 0.0 {
        return a;
    }
    if t == 1.0 {
        return b;
    }
    let (ma, pa) = (a.norm(), a.arg());
    let (mb, pb) = (b.norm(), b.arg());
    let d = wrap_phase(pb - pa);
    Complex64::from_polar(ma + t * (mb - ma), pa + t * d)
}

/// Wrap into (-pi, pi].
pub(crate) fn wrap_phase(mut d: f64) -> f64 {
    while d > PI {
        d -= 2.0 * PI;
    }
    while d <= -PI {
        d += 2.0 * PI;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Sample {
    sum: Complex64,
    count: u32,
}

impl Sample {
    fn mean(&self) -> Complex64 {
        self.sum / f64::from(self.count)
    }
}

/// Outcome of the hole-filling pass in [`KernelGrid::freeze`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FillReport {
    /// Canonical lattice points.
    pub canonical_points: usize,
    /// Canonical points holding measured samples.
    pub measured: usize,
    /// Canonical points filled by two-sided interpolation along lattice lines.
    pub interpolated: usize,
    /// Canonical points filled by holding the nearest known neighbour.
    pub held: usize,
}

#[derive(Debug, Clone)]
struct Dense {
    values: Vec<Complex64>,
    fill: FillReport,
}

/// Order-`n` kernel samples on the lattice.
#[derive(Debug, Clone)]
pub struct KernelGrid {
    order: usize,
    delta_f_hz: f64,
    lattice: Vec<i64>,
    signed_hz: Vec<f64>,
    samples: BTreeMap<Vec<i64>, Sample>,
    dense: Option<Dense>,
}

impl KernelGrid {
    /// `lattice` holds the positive swept frequencies in units of `delta_f_hz`.
    pub fn new(order: usize, mut lattice: Vec<i64>, delta_f_hz: f64) -> Self {
        assert!(order >= 1, "kernel order must be at least 1");
        lattice.retain(|&f| f > 0);
        lattice.sort_unstable();
        lattice.dedup();
        let signed_hz = lattice
            .iter()
            .rev()
            .map(|&f| -(f as f64) * delta_f_hz)
            .chain(lattice.iter().map(|&f| f as f64 * delta_f_hz))
            .collect();
        KernelGrid {
            order,
            delta_f_hz,
            lattice,
            signed_hz,
            samples: BTreeMap::new(),
            dense: None,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn delta_f_hz(&self) -> f64 {
        self.delta_f_hz
    }

    pub fn lattice(&self) -> &[i64] {
        &self.lattice
    }

    pub fn is_frozen(&self) -> bool {
        self.dense.is_some()
    }

    pub fn fill_report(&self) -> Option<FillReport> {
        self.dense.as_ref().map(|d| d.fill)
    }

    /// Number of distinct canonical measured points.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn check_args(&self, args: &[i64]) -> Result<(), KernelError> {
        if args.len() != self.order {
            return Err(KernelError::OrderMismatch {
                expected: self.order,
                got: args.len(),
            });
        }
        for (axis, &f) in args.iter().enumerate() {
            if self.lattice.binary_search(&f.abs()).is_err() {
                return Err(KernelError::OffLattice { axis, value: f });
            }
        }
        Ok(())
    }

    /// Store a sample; repeated insertions at one canonical point average.
    /// Invalidates any frozen table.
    pub fn insert(&mut self, args: &[i64], value: Complex64) -> Result<(), KernelError> {
        self.check_args(args)?;
        let (key, flip) = canonical_args(args);
        let mut v = if flip { value.conj() } else { value };
        if is_self_conjugate(&key) {
            v.im = 0.0;
        }
        self.insert_canonical(key, v, 1);
        Ok(())
    }

    fn insert_canonical(&mut self, key: Vec<i64>, sum: Complex64, count: u32) {
        self.dense = None;
        self.samples
            .entry(key)
            .and_modify(|s| {
                s.sum += sum;
                s.count += count;
            })
            .or_insert(Sample { sum, count });
    }

    /// Merge another grid's samples into this one (sample-count weighted).
    pub fn merge(&mut self, other: &KernelGrid) -> Result<(), KernelError> {
        if other.order != self.order || other.lattice != self.lattice {
            return Err(KernelError::LatticeMismatch);
        }
        for (k, s) in &other.samples {
            self.insert_canonical(k.clone(), s.sum, s.count);
        }
        Ok(())
    }

    /// Measured value at an exact lattice tuple, or `None` if never swept.
    pub fn query_exact(&self, args: &[i64]) -> Option<Complex64> {
        if args.len() != self.order {
            return None;
        }
        let (key, flip) = canonical_args(args);
        let v = self.samples.get(&key)?.mean();
        Some(if flip { v.conj() } else { v })
    }

    /// Canonical measured samples: `(key, mean value, count)`.
    pub fn samples(&self) -> impl Iterator<Item = (&[i64], Complex64, u32)> + '_ {
        self.samples.iter().map(|(k, s)| (k.as_slice(), s.mean(), s.count))
    }

    /// Canonical samples as stored: `(key, running sum, count)`.
    pub fn accumulated(&self) -> impl Iterator<Item = (&[i64], Complex64, u32)> + '_ {
        self.samples.iter().map(|(k, s)| (k.as_slice(), s.sum, s.count))
    }

    /// Restore a sample from its running sum and count (used when loading
    /// archives; the round trip is exact).
    pub fn insert_accumulated(&mut self, args: &[i64], sum: Complex64, count: u32) -> Result<(), KernelError> {
        self.check_args(args)?;
        let (key, flip) = canonical_args(args);
        let mut v = if flip { sum.conj() } else { sum };
        if is_self_conjugate(&key) {
            v.im = 0.0;
        }
        self.insert_canonical(key, v, count.max(1));
        Ok(())
    }

    fn width(&self) -> usize {
        2 * self.lattice.len()
    }

    fn position_of(&self, f: i64) -> usize {
        let l = self.lattice.len();
        let i = self
            .lattice
            .binary_search(&f.abs())
            .expect("frequency checked against lattice");
        if f > 0 {
            l + i
        } else {
            l - 1 - i
        }
    }

    fn flat(&self, pos: &[usize]) -> usize {
        let w = self.width();
        pos.iter().rev().fold(0, |acc, &p| acc * w + p)
    }

    fn unflat(&self, mut flat: usize, out: &mut [usize]) {
        let w = self.width();
        for p in out.iter_mut() {
            *p = flat % w;
            flat /= w;
        }
    }

    /// Canonicalize a tuple of signed lattice positions; same rule as
    /// [`canonical_args`] since position order follows frequency order.
    fn canonical_positions(&self, pos: &[usize]) -> (Vec<usize>, bool) {
        let w = self.width();
        let mut p: Vec<usize> = pos.to_vec();
        p.sort_unstable_by(|a, b| b.cmp(a));
        let neg: Vec<usize> = p.iter().rev().map(|&v| w - 1 - v).collect();
        if neg > p {
            (neg, true)
        } else {
            (p, false)
        }
    }

    /// Build the dense table: measured samples plus neighbour-filled holes.
    pub fn freeze(&mut self) -> Result<FillReport, KernelError> {
        if self.samples.is_empty() {
            return Err(KernelError::EmptyGrid);
        }
        let w = self.width();
        let entries = (w as u128).pow(self.order as u32);
        if entries > MAX_DENSE_ENTRIES as u128 {
            return Err(KernelError::TooLarge { entries });
        }
        let total = entries as usize;
        let mut values = vec![Complex64::new(0.0, 0.0); total];
        let mut known = vec![false; total];

        let mut fill = FillReport::default();
        let mut pos = vec![0usize; self.order];
        let mut canonical = Vec::new();
        for flat in 0..total {
            self.unflat(flat, &mut pos);
            let (c, _) = self.canonical_positions(&pos);
            if c == pos {
                canonical.push(flat);
            }
        }
        fill.canonical_points = canonical.len();

        for (key, s) in &self.samples {
            let p: Vec<usize> = key.iter().map(|&f| self.position_of(f)).collect();
            self.set_images(&mut values, &mut known, &p, s.mean());
            fill.measured += 1;
        }

        let mut missing: Vec<usize> = canonical.iter().copied().filter(|&f| !known[f]).collect();
        let mut one_sided = false;
        while !missing.is_empty() {
            let mut estimates = Vec::new();
            let mut still = Vec::new();
            for &flat in &missing {
                self.unflat(flat, &mut pos);
                match self.estimate(&values, &known, &pos, one_sided) {
                    Some(v) => estimates.push((flat, v)),
                    None => still.push(flat),
                }
            }
            if estimates.is_empty() {
                if one_sided {
                    // isolated region with no known neighbour on any line
                    break;
                }
                one_sided = true;
                continue;
            }
            for (flat, v) in estimates {
                self.unflat(flat, &mut pos);
                self.set_images(&mut values, &mut known, &pos, v);
                if one_sided {
                    fill.held += 1;
                } else {
                    fill.interpolated += 1;
                }
            }
            one_sided = false;
            missing = still;
        }
        self.dense = Some(Dense { values, fill });
        Ok(fill)
    }

    fn set_images(&self, values: &mut [Complex64], known: &mut [bool], pos: &[usize], value: Complex64) {
        let w = self.width();
        let (canon, flip) = self.canonical_positions(pos);
        let mut v = if flip { value.conj() } else { value };
        let self_conj = canon.iter().zip(canon.iter().rev()).all(|(a, b)| *a == w - 1 - *b);
        if self_conj {
            v.im = 0.0;
        }
        let mut perm = canon.clone();
        for_each_permutation(&mut perm, &mut |p| {
            let f = self.flat(p);
            values[f] = v;
            known[f] = true;
            let neg: Vec<usize> = p.iter().map(|&x| w - 1 - x).collect();
            let f = self.flat(&neg);
            values[f] = v.conj();
            known[f] = true;
        });
    }

    /// Estimate a missing point from known neighbours along each lattice line.
    fn estimate(&self, values: &[Complex64], known: &[bool], pos: &[usize], one_sided: bool) -> Option<Complex64> {
        let w = self.width();
        let mut mags = 0.0;
        let mut phasor = Complex64::new(0.0, 0.0);
        let mut n = 0usize;
        let mut best_hold: Option<(f64, Complex64)> = None;
        let mut probe = pos.to_vec();
        for axis in 0..self.order {
            let here = pos[axis];
            let mut lo = None;
            for p in (0..here).rev() {
                probe[axis] = p;
                if known[self.flat(&probe)] {
                    lo = Some(p);
                    break;
                }
            }
            let mut hi = None;
            for p in here + 1..w {
                probe[axis] = p;
                if known[self.flat(&probe)] {
                    hi = Some(p);
                    break;
                }
            }
            probe[axis] = here;
            let value_at = |p: usize, probe: &mut Vec<usize>| {
                probe[axis] = p;
                let v = values[self.flat(probe)];
                probe[axis] = here;
                v
            };
            match (lo, hi) {
                (Some(a), Some(b)) => {
                    let fa = self.signed_hz[a];
                    let fb = self.signed_hz[b];
                    let t = (self.signed_hz[here] - fa) / (fb - fa);
                    let v = lerp_polar(value_at(a, &mut probe), value_at(b, &mut probe), t);
                    mags += v.norm();
                    if v.norm() > 0.0 {
                        phasor += v / v.norm();
                    }
                    n += 1;
                }
                (Some(p), None) | (None, Some(p)) if one_sided => {
                    let d = (self.signed_hz[p] - self.signed_hz[here]).abs();
                    if best_hold.is_none_or(|(bd, _)| d < bd) {
                        best_hold = Some((d, value_at(p, &mut probe)));
                    }
                }
                _ => {}
            }
        }
        if n > 0 {
            let mag = mags / n as f64;
            let phase = if phasor.norm() > 0.0 { phasor.arg() } else { 0.0 };
            return Some(Complex64::from_polar(mag, phase));
        }
        best_hold.map(|(_, v)| v)
    }

    /// Lowest swept frequency (Hz).
    pub fn min_frequency_hz(&self) -> f64 {
        self.lattice.first().map_or(0.0, |&f| f as f64 * self.delta_f_hz)
    }

    /// Highest swept frequency (Hz).
    pub fn max_frequency_hz(&self) -> f64 {
        self.lattice.last().map_or(0.0, |&f| f as f64 * self.delta_f_hz)
    }

    /// Frequency beyond which interpolated queries return zero: the band
    /// edge plus half the last lattice step.
    pub fn reach_hz(&self) -> f64 {
        let n = self.lattice.len();
        let half_step = if n >= 2 {
            0.5 * (self.lattice[n - 1] - self.lattice[n - 2]) as f64 * self.delta_f_hz
        } else {
            0.5 * self.delta_f_hz
        };
        self.max_frequency_hz() + half_step
    }

    /// Kernel value at arbitrary real frequencies (Hz).
    ///
    /// The tuple is canonicalized, then interpolated multilinearly in
    /// magnitude and wrapped phase over the signed-lattice cell that contains
    /// it. Between `-f_min` and `+f_min` the cell spans the conjugate pair, so
    /// magnitude is held flat down to DC while phase passes through zero.
    /// Returns zero if any argument lies beyond [`Self::reach_hz`].
    pub fn query_interpolated(&self, args: &[f64]) -> Result<Complex64, KernelError> {
        let dense = self.dense.as_ref().ok_or(KernelError::EmptyGrid)?;
        if args.len() != self.order {
            return Err(KernelError::OrderMismatch {
                expected: self.order,
                got: args.len(),
            });
        }
        let reach = self.reach_hz();
        if args.iter().any(|f| f.abs() > reach) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let (q, flip) = canonical_args_f64(args);
        let n = self.order;
        let last = self.signed_hz.len() - 1;
        let mut cells = [(0usize, 0usize, 0.0f64); 8];
        let mut cells_vec;
        let cells: &mut [(usize, usize, f64)] = if n <= 8 {
            &mut cells[..n]
        } else {
            cells_vec = vec![(0usize, 0usize, 0.0f64); n];
            &mut cells_vec
        };
        for (c, &x) in cells.iter_mut().zip(&q) {
            *c = if x <= self.signed_hz[0] {
                (0, 0, 0.0)
            } else if x >= self.signed_hz[last] {
                (last, last, 0.0)
            } else {
                let hi = self.signed_hz.partition_point(|&s| s <= x);
                let lo = hi - 1;
                let t = (x - self.signed_hz[lo]) / (self.signed_hz[hi] - self.signed_hz[lo]);
                (lo, hi, t)
            };
        }
        // gather 2^n corners, axis 0 as the least significant bit
        let corners = 1usize << n;
        let mut buf: Vec<Complex64> = Vec::with_capacity(corners);
        let mut pos = vec![0usize; n];
        for c in 0..corners {
            for (axis, p) in pos.iter_mut().enumerate() {
                let (lo, hi, _) = cells[axis];
                *p = if c >> axis & 1 == 1 { hi } else { lo };
            }
            buf.push(dense.values[self.flat(&pos)]);
        }
        let mut len = corners;
        for &(_, _, t) in cells.iter() {
            len /= 2;
            for i in 0..len {
                buf[i] = lerp_polar(buf[2 * i], buf[2 * i + 1], t);
            }
        }
        let mut v = buf[0];
        if q.iter().zip(q.iter().rev()).all(|(a, b)| *a == -*b) {
            v.im = 0.0;
        }
        Ok(if flip { v.conj() } else { v })
    }
}

fn for_each_permutation(items: &mut [usize], f: &mut dyn FnMut(&[usize])) {
    fn heap(k: usize, a: &mut [usize], f: &mut dyn FnMut(&[usize])) {
        if k <= 1 {
            f(a);
            return;
        }
        heap(k - 1, a, f);
        for i in 0..k - 1 {
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, f);
        }
    }
    let n = items.len();
    heap(n, items, f);
}

/// Provenance of a kernel archive.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ArchiveMetadata {
    pub system_id: String,
    pub plan_id: String,
    pub truncation_order: usize,
    pub extraction: ExtractionSettings,
}

/// Kernel grids for orders `1..=M`.
#[derive(Debug, Clone)]
pub struct KernelSetArchive {
    pub metadata: ArchiveMetadata,
    grids: Vec<KernelGrid>,
}

impl KernelSetArchive {
    /// `grids[i]` must have order `i + 1`.
    pub fn new(metadata: ArchiveMetadata, grids: Vec<KernelGrid>) -> Self {
        for (i, g) in grids.iter().enumerate() {
            assert_eq!(g.order(), i + 1, "kernel grids must be contiguous from order 1");
        }
        KernelSetArchive { metadata, grids }
    }

    pub fn max_order(&self) -> usize {
        self.grids.len()
    }

    pub fn grid(&self, order: usize) -> Option<&KernelGrid> {
        order.checked_sub(1).and_then(|i| self.grids.get(i))
    }

    pub fn grid_mut(&mut self, order: usize) -> Option<&mut KernelGrid> {
        order.checked_sub(1).and_then(|i| self.grids.get_mut(i))
    }

    pub fn grids(&self) -> &[KernelGrid] {
        &self.grids
    }

    /// Freeze every grid; empty grids are left unfrozen.
    pub fn freeze(&mut self) -> Result<Vec<FillReport>, KernelError> {
        let mut out = Vec::new();
        for g in &mut self.grids {
            if g.is_empty() {
                out.push(FillReport::default());
            } else {
                out.push(g.freeze()?);
            }
        }
        Ok(out)
    }

    /// Copy holding only orders `1..=max_order`.
    pub fn truncated(&self, max_order: usize) -> Self {
        let mut a = self.clone();
        a.grids.truncate(max_order);
        a.metadata.truncation_order = a.grids.len();
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn canonical_rule() {
        assert_eq!(canonical_args(&[161, 127, -161]), (vec![161, 127, -161], false));
        assert_eq!(canonical_args(&[-161, 127, 161]), (vec![161, 127, -161], false));
        assert_eq!(canonical_args(&[-5, -3, -1]), (vec![5, 3, 1], true));
        assert_eq!(canonical_args(&[4, -4]), (vec![4, -4], false));
        assert_eq!(canonical_args(&[-7]), (vec![7], true));
    }

    #[test]
    fn permutation_and_conjugate_queries() {
        let mut g = KernelGrid::new(3, vec![127, 161, 207], 1e6);
        let v = c(0.25, -0.75);
        g.insert(&[127, 161, -161], v).unwrap();
        assert_eq!(g.query_exact(&[-161, 127, 161]), Some(v));
        assert_eq!(g.query_exact(&[161, -161, 127]), Some(v));
        assert_eq!(g.query_exact(&[-127, -161, 161]), Some(v.conj()));
        assert_eq!(g.query_exact(&[127, 127, 127]), None);
    }

    #[test]
    fn duplicate_insertions_average() {
        let mut g = KernelGrid::new(1, vec![7, 41], 1e6);
        g.insert(&[7], c(1.0, 0.0)).unwrap();
        g.insert(&[-7], c(3.0, 2.0)).unwrap();
        assert_eq!(g.query_exact(&[7]), Some(c(2.0, -1.0)));
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn off_lattice_rejected_with_axis() {
        let mut g = KernelGrid::new(2, vec![7, 41], 1e6);
        assert_eq!(
            g.insert(&[7, 40], c(1.0, 0.0)),
            Err(KernelError::OffLattice { axis: 1, value: 40 })
        );
        assert_eq!(
            g.insert(&[0, 7], c(1.0, 0.0)),
            Err(KernelError::OffLattice { axis: 0, value: 0 })
        );
    }

    #[test]
    fn interpolation_reproduces_lattice_points() {
        let lattice = vec![10, 20, 30, 40];
        let mut g = KernelGrid::new(2, lattice.clone(), 1e6);
        for &a in &lattice {
            for &b in &lattice {
                for (sa, sb) in [(1, 1), (1, -1)] {
                    let (fa, fb) = (sa * a, sb * b);
                    let v = c((fa + 2 * fb) as f64 * 0.01, (fa * fb) as f64 * 1e-4);
                    if g.query_exact(&[fa, fb]).is_none() {
                        g.insert(&[fa, fb], v).unwrap();
                    }
                }
            }
        }
        g.freeze().unwrap();
        for (key, v, _) in g.samples().map(|(k, v, n)| (k.to_vec(), v, n)).collect::<Vec<_>>() {
            let hz: Vec<f64> = key.iter().map(|&f| f as f64 * 1e6).collect();
            assert_eq!(g.query_interpolated(&hz).unwrap(), v);
        }
    }

    #[test]
    fn beyond_reach_is_zero_and_dc_is_real() {
        let mut g = KernelGrid::new(1, vec![7, 41, 87], 1e6);
        g.insert(&[7], Complex64::from_polar(1.0, -0.3)).unwrap();
        g.insert(&[41], Complex64::from_polar(0.9, -1.0)).unwrap();
        g.insert(&[87], Complex64::from_polar(0.8, -2.0)).unwrap();
        g.freeze().unwrap();
        assert_eq!(g.reach_hz(), 87e6 + 23e6);
        assert_eq!(g.query_interpolated(&[111e6]).unwrap(), c(0.0, 0.0));
        assert_ne!(g.query_interpolated(&[109e6]).unwrap(), c(0.0, 0.0));
        let dc = g.query_interpolated(&[0.0]).unwrap();
        assert_eq!(dc.im, 0.0);
        assert!((dc.re - 1.0).abs() < 1e-12);
        // magnitude held flat below the lowest sample
        let low = g.query_interpolated(&[3e6]).unwrap();
        assert!((low.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holes_are_filled_on_freeze() {
        let lattice = vec![1, 2, 3, 4, 5];
        let mut g = KernelGrid::new(1, lattice.clone(), 1.0);
        for &f in &[1, 2, 4, 5] {
            g.insert(&[f], c(f as f64, 0.0)).unwrap();
        }
        let report = g.freeze().unwrap();
        assert_eq!(report.measured, 4);
        assert_eq!(report.interpolated, 1);
        assert!((g.query_interpolated(&[3.0]).unwrap() - c(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn permutation_count() {
        let mut v = vec![1, 2, 3];
        let mut n = 0;
        for_each_permutation(&mut v, &mut |_| n += 1);
        assert_eq!(n, 6);
    }
}
