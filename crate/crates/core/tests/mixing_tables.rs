use std::collections::BTreeMap;

use xvolterra_core::mixing::*;
use xvolterra_core::plan::dbm_to_peak_volts;

/// Every ordered tuple of signed tones of length `n` (the raw expansion of
/// the n-th power of a multi-tone input).
fn signed_tuples(tones: usize, n: usize) -> Vec<Vec<(usize, bool)>> {
    let alphabet: Vec<(usize, bool)> = (0..tones).flat_map(|m| [(m, false), (m, true)]).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                alphabet.iter().map(move |&a| {
                    let mut t = t.clone();
                    t.push(a);
                    t
                })
            })
            .collect();
    }
    out
}

fn tuple_index(t: &[(usize, bool)], tones: usize) -> Vec<i32> {
    let mut k = vec![0; tones];
    for &(m, neg) in t {
        k[m] += if neg { -1 } else { 1 };
    }
    k
}

/// Expansion coefficient of the kernel group at `g`, counted term by term.
fn brute_coefficient(g: &GTermDescriptor, v: &[f64]) -> f64 {
    let tones = v.len();
    let n = g.order();
    let mut count = 0u64;
    let mut weight = 0.0;
    for t in signed_tuples(tones, n) {
        let tuple = KernelArgumentTuple(
            t.iter()
                .map(|&(tone, negative)| SignedTone { tone, negative })
                .collect(),
        );
        if tuple.descriptor(tones) == *g {
            count += 1;
            weight = t.iter().map(|&(m, _)| v[m] / 2.0).product::<f64>();
        }
    }
    count as f64 * weight / factorial(n as u32) as f64
}

fn descriptor(k: [i32; 3], r: [u32; 3]) -> GTermDescriptor {
    GTermDescriptor::new(FrequencyIndex(k.to_vec()), r.to_vec())
}

#[test]
fn three_tone_counts() {
    assert_eq!(enumerate_output_indices(3, 3).len(), 31);
    let kernels: Vec<usize> = (1..=3)
        .map(|n| enumerate_kernels_for_order(3, 3, n).iter().map(|(_, g)| g.len()).sum())
        .collect();
    assert_eq!(kernels, vec![3, 9, 28]);
    assert_eq!(enumerate_kernels_for_order(3, 3, 3).len(), 22);
    assert_eq!(count_terms(3, 3), 216);
    assert_eq!(enumerate_output_indices(1, 1), vec![FrequencyIndex(vec![1])]);
}

#[test]
fn two_tone_listing_matches_brute_force() {
    let mut brute = std::collections::BTreeSet::new();
    for a in -2i32..=2 {
        for b in -2i32..=2 {
            if a.abs() + b.abs() == 0 || a.abs() + b.abs() > 2 {
                continue;
            }
            let k = if a > 0 || (a == 0 && b > 0) {
                vec![a, b]
            } else {
                vec![-a, -b]
            };
            brute.insert(k);
        }
    }
    let got: std::collections::BTreeSet<Vec<i32>> = enumerate_output_indices(2, 2).into_iter().map(|k| k.0).collect();
    assert_eq!(got, brute);
    assert_eq!(got.len(), 6);
}

#[test]
fn multiplicities_match_tuple_counts() {
    for n in 1..=4usize {
        let mut counts: BTreeMap<GTermDescriptor, u64> = BTreeMap::new();
        for t in signed_tuples(3, n) {
            let tuple = KernelArgumentTuple(
                t.iter()
                    .map(|&(tone, negative)| SignedTone { tone, negative })
                    .collect(),
            );
            *counts.entry(tuple.descriptor(3)).or_default() += 1;
        }
        for (g, c) in &counts {
            assert_eq!(g.multiplicity(), *c, "{g}");
            assert_eq!(
                tuple_index(
                    &g.arguments().0.iter().map(|a| (a.tone, a.negative)).collect::<Vec<_>>(),
                    3
                ),
                g.k.0
            );
        }
        assert_eq!(counts.values().sum::<u64>(), count_terms(3, n as u32));
    }
}

#[test]
fn text_multiplicity_examples() {
    assert_eq!(descriptor([1, 0, 0], [1, 0, 0]).multiplicity(), 3);
    assert_eq!(descriptor([1, 0, 0], [0, 1, 0]).multiplicity(), 6);
    assert_eq!(descriptor([0, 0, 1], [0, 0, 0]).multiplicity(), 1);
}

#[test]
fn coefficients_match_expansion() {
    let v = [0.37, 0.81, 1.3];
    for n in 1..=5 {
        for k in all_indices(3, n as u32)
            .into_iter()
            .filter(|k| k.is_canonical() || k.is_dc())
        {
            for g in gterms_at_order(&k, n) {
                let want = brute_coefficient(&g, &v);
                let got = g.coefficient(&v);
                assert!((got - want).abs() <= 1e-14 * want.abs(), "{g}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn table_rows() {
    let (v1, v2, v3) = (0.3, 0.7, 1.1);
    let v = [v1, v2, v3];
    let rows: Vec<(GTermDescriptor, f64)> = vec![
        (descriptor([0, 0, 1], [0, 0, 0]), v3 / 2.0),
        (descriptor([0, 0, 1], [0, 0, 1]), v3.powi(3) / 16.0),
        (descriptor([0, 0, 1], [0, 1, 0]), v3 * v2 * v2 / 8.0),
        (descriptor([0, 0, 1], [1, 0, 0]), v3 * v1 * v1 / 8.0),
        (descriptor([0, 0, 1], [0, 0, 2]), v3.powi(5) / 384.0),
        (descriptor([0, 0, 2], [0, 0, 0]), v3 * v3 / 8.0),
        (descriptor([0, 0, 2], [0, 0, 1]), v3.powi(4) / 96.0),
        (descriptor([0, 0, 2], [0, 1, 0]), v3 * v3 * v2 * v2 / 32.0),
        (descriptor([0, 0, 3], [0, 0, 0]), v3.powi(3) / 48.0),
        (descriptor([0, 0, 3], [0, 0, 1]), v3.powi(5) / 768.0),
        (descriptor([0, 0, 3], [0, 1, 0]), v3.powi(3) * v2 * v2 / 192.0),
        (descriptor([0, 1, -2], [0, 0, 0]), v2 * v3 * v3 / 16.0),
        (descriptor([0, 1, -2], [0, 0, 1]), v2 * v3.powi(4) / 192.0),
    ];
    for (g, want) in rows {
        let got = g.coefficient(&v);
        assert!((got - want).abs() <= 1e-15 * want, "{g}: {got} vs {want}");
    }
}

#[test]
fn index_at_one_third_order_point() {
    let k = FrequencyIndex(vec![0, 0, 1]);
    let names: Vec<String> = gterms_at_index(&k, 3).iter().map(|g| g.to_string()).collect();
    assert_eq!(names.len(), 4);
    assert_eq!(names[0], "H1(w3)");
    assert!(names.contains(&"H3(w3,w3,-w3)".to_string()));
}

#[test]
fn canonicalization_examples() {
    let c = |k: [i32; 3]| {
        let (k, f) = canonicalize_index(&FrequencyIndex(k.to_vec()));
        (k.0, f)
    };
    assert_eq!(c([0, 0, -1]), (vec![0, 0, 1], true));
    assert_eq!(c([1, -2, 0]), (vec![1, -2, 0], false));
    assert_eq!(c([-1, 2, 0]), (vec![1, -2, 0], true));

    let t = KernelArgumentTuple(vec![SignedTone::pos(1), SignedTone::neg(1), SignedTone::pos(0)]);
    let (canon, flipped) = canonicalize_kernel_args(&t, 3);
    assert!(!flipped);
    assert_eq!(canon.to_string(), "(w1,w2,-w2)");

    let t = KernelArgumentTuple(vec![SignedTone::neg(0), SignedTone::neg(1), SignedTone::pos(2)]);
    let (canon, flipped) = canonicalize_kernel_args(&t, 3);
    assert!(flipped);
    assert_eq!(canon.to_string(), "(w1,w2,-w3)");
}

#[test]
fn dbm_conversion() {
    // P = V^2 / (2 Z0)
    for dbm in [-30.0, 0.0, 5.0, 10.0] {
        let v = dbm_to_peak_volts(dbm, 50.0);
        let p_watts = v * v / (2.0 * 50.0);
        assert!((10.0 * (p_watts * 1e3).log10() - dbm).abs() < 1e-12);
    }
    assert!((dbm_to_peak_volts(10.0, 50.0) - 1.0).abs() < 1e-4);
    assert!((dbm_to_peak_volts(5.0, 50.0) - 0.5623).abs() < 1e-4);
}
