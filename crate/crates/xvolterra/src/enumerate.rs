//! Output-frequency and kernel tables for `M` tones at mixing order `M0`.

use serde::{Deserialize, Serialize};
use xvolterra_core::mixing::{
    enumerate_kernels_for_order, enumerate_output_indices, factorial, gterms_at_index, FrequencyIndex, GTermDescriptor,
};

use crate::error::{Error, Result};

pub const MAX_TONES: usize = 8;
pub const MAX_MIXING_ORDER: u32 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTerm {
    pub order: usize,
    pub kernel: String,
    pub r: Vec<u32>,
    pub multiplicity: u64,
    /// Coefficient of the kernel in the output phasor, in tone amplitudes `V1..VM`.
    pub coefficient: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub k: FrequencyIndex,
    pub order: u32,
    pub frequency: String,
    pub terms: Vec<KernelTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSection {
    pub order: usize,
    pub count: usize,
    pub entries: Vec<(FrequencyIndex, Vec<String>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    pub tones: usize,
    pub max_mixing_order: u32,
    pub frequency_count: usize,
    pub kernel_counts: Vec<usize>,
    pub frequencies: Vec<FrequencyRow>,
    pub orders: Vec<OrderSection>,
}

/// `w1+w2-w3`, `2w1-w2`; the zero vector is `0`.
pub fn frequency_expr(k: &FrequencyIndex) -> String {
    let mut s = String::new();
    for (m, &c) in k.as_slice().iter().enumerate() {
        if c == 0 {
            continue;
        }
        if c < 0 {
            s.push('-');
        } else if !s.is_empty() {
            s.push('+');
        }
        if c.abs() != 1 {
            s.push_str(&c.abs().to_string());
        }
        s.push_str(&format!("w{}", m + 1));
    }
    if s.is_empty() {
        s.push('0');
    }
    s
}

/// Symbolic `prod (V_m/2)^(|k_m|+2r_m) / ((|k_m|+r_m)! r_m!)`, reduced.
pub fn coefficient_expr(g: &GTermDescriptor) -> String {
    let mut num = String::new();
    let mut den: u64 = 1;
    for (m, (k, r)) in g.k.as_slice().iter().zip(&g.r).enumerate() {
        let lead = k.unsigned_abs() + r;
        let e = lead + r;
        if e > 0 {
            num.push_str(&format!("V{}", m + 1));
            if e > 1 {
                num.push_str(&format!("^{e}"));
            }
        }
        den *= (1u64 << e) * factorial(lead) * factorial(*r);
    }
    if num.is_empty() {
        num.push('1');
    }
    if den == 1 {
        num
    } else {
        format!("{num}/{den}")
    }
}

fn term(g: &GTermDescriptor) -> KernelTerm {
    KernelTerm {
        order: g.order(),
        kernel: g.to_string(),
        r: g.r.clone(),
        multiplicity: g.multiplicity(),
        coefficient: coefficient_expr(g),
    }
}

pub fn enumerate(tones: usize, max_mixing_order: u32) -> Result<Enumeration> {
    if tones == 0 || tones > MAX_TONES {
        return Err(Error::Config(format!(
            "tone count must be in 1..={MAX_TONES}, got {tones}"
        )));
    }
    if max_mixing_order == 0 || max_mixing_order > MAX_MIXING_ORDER {
        return Err(Error::Config(format!(
            "mixing order must be in 1..={MAX_MIXING_ORDER}, got {max_mixing_order}"
        )));
    }
    let frequencies: Vec<FrequencyRow> = enumerate_output_indices(tones, max_mixing_order)
        .into_iter()
        .map(|k| FrequencyRow {
            order: k.order(),
            frequency: frequency_expr(&k),
            terms: gterms_at_index(&k, max_mixing_order as usize)
                .iter()
                .map(term)
                .collect(),
            k,
        })
        .collect();
    let orders: Vec<OrderSection> = (1..=max_mixing_order as usize)
        .map(|n| {
            let entries: Vec<(FrequencyIndex, Vec<String>)> = enumerate_kernels_for_order(tones, max_mixing_order, n)
                .into_iter()
                .map(|(k, gs)| (k, gs.iter().map(ToString::to_string).collect()))
                .collect();
            OrderSection {
                order: n,
                count: entries.iter().map(|(_, g)| g.len()).sum(),
                entries,
            }
        })
        .collect();
    Ok(Enumeration {
        tones,
        max_mixing_order,
        frequency_count: frequencies.len(),
        kernel_counts: orders.iter().map(|o| o.count).collect(),
        frequencies,
        orders,
    })
}

impl Enumeration {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "tones M = {}, mixing order M0 = {}\n{} output frequencies (DC excluded)\n",
            self.tones, self.max_mixing_order, self.frequency_count
        );
        for (n, c) in self.kernel_counts.iter().enumerate() {
            s.push_str(&format!("order {}: {} kernels\n", n + 1, c));
        }
        let kw = self
            .frequencies
            .iter()
            .map(|r| r.k.to_string().len())
            .max()
            .unwrap_or(0);
        let fw = self.frequencies.iter().map(|r| r.frequency.len()).max().unwrap_or(0);
        s.push_str("\nOutput frequencies\n");
        for (i, row) in self.frequencies.iter().enumerate() {
            let terms: Vec<String> = row
                .terms
                .iter()
                .map(|t| format!("{} {}", t.coefficient, t.kernel))
                .collect();
            s.push_str(&format!(
                "{:>4}  {:<kw$}  {:<fw$}  {}\n",
                i + 1,
                row.k.to_string(),
                row.frequency,
                terms.join(" + "),
            ));
        }
        for sec in &self.orders {
            s.push_str(&format!("\nOrder {} kernels ({})\n", sec.order, sec.count));
            for (k, gs) in &sec.entries {
                s.push_str(&format!("  {:<kw$}  {}\n", k.to_string(), gs.join(", ")));
            }
        }
        s
    }
}
