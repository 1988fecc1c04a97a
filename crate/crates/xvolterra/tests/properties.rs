use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

use xvolterra::format::{decode_complex, encode_complex, ArchiveBody};
use xvolterra_core::kernel::{ArchiveMetadata, KernelGrid, KernelSetArchive};
use xvolterra_core::Complex64;

fn config() -> Config {
    Config {
        cases: 1000,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

/// Any bit pattern, NaNs and infinities included.
fn raw_complex() -> impl Strategy<Value = Complex64> {
    (any::<u64>(), any::<u64>()).prop_map(|(a, b)| Complex64::new(f64::from_bits(a), f64::from_bits(b)))
}

fn finite_complex() -> impl Strategy<Value = Complex64> {
    (-1e3f64..1e3, -1e3f64..1e3).prop_map(|(re, im)| Complex64::new(re, im))
}

type Draw = Vec<(Vec<(usize, bool)>, Complex64)>;

/// Lattice plus, per order 1..=3, signed picks from it and a value each.
fn archive_inputs() -> impl Strategy<Value = (Vec<i64>, Vec<Draw>)> {
    proptest::collection::btree_set(1i64..60, 2..6).prop_flat_map(|set| {
        let lattice: Vec<i64> = set.into_iter().collect();
        let len = lattice.len();
        let draws: Vec<_> = (1..=3usize)
            .map(|n| {
                proptest::collection::vec(
                    (proptest::collection::vec((0..len, any::<bool>()), n), finite_complex()),
                    1..12,
                )
            })
            .collect();
        (Just(lattice), draws)
    })
}

fn build(lattice: &[i64], draws: &[Draw]) -> KernelSetArchive {
    let grids = draws
        .iter()
        .enumerate()
        .map(|(i, draw)| {
            let mut g = KernelGrid::new(i + 1, lattice.to_vec(), 1e6);
            for (picks, v) in draw {
                let args: Vec<i64> = picks
                    .iter()
                    .map(|&(j, neg)| if neg { -lattice[j] } else { lattice[j] })
                    .collect();
                g.insert(&args, *v).unwrap();
            }
            g
        })
        .collect();
    let meta = ArchiveMetadata {
        system_id: "prop".into(),
        plan_id: "prop".into(),
        truncation_order: 3,
        ..ArchiveMetadata::default()
    };
    let mut archive = KernelSetArchive::new(meta, grids);
    archive.freeze().unwrap();
    archive
}

fn same_bits(a: Complex64, b: Complex64) -> bool {
    a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn complex_encoding_is_bit_exact(values in proptest::collection::vec(raw_complex(), 0..40)) {
        let back = decode_complex(&encode_complex(&values)).unwrap();
        prop_assert_eq!(back.len(), values.len());
        for (a, b) in values.iter().zip(&back) {
            prop_assert!(same_bits(*a, *b));
        }
    }

    #[test]
    fn archive_body_survives_json((lattice, draws) in archive_inputs(), probe in proptest::collection::vec(-70.0f64..70.0, 3)) {
        let archive = build(&lattice, &draws);
        let text = serde_json::to_string(&ArchiveBody::from_archive(&archive, None)).unwrap();
        let body: ArchiveBody = serde_json::from_str(&text).unwrap();
        let (back, report) = body.into_archive().unwrap();
        prop_assert!(report.is_none());
        prop_assert_eq!(&back.metadata, &archive.metadata);
        for (a, b) in archive.grids().iter().zip(back.grids()) {
            prop_assert_eq!(a.fill_report(), b.fill_report());
            let sa: Vec<_> = a.accumulated().collect();
            let sb: Vec<_> = b.accumulated().collect();
            prop_assert_eq!(sa.len(), sb.len());
            for ((ka, va, ca), (kb, vb, cb)) in sa.into_iter().zip(sb) {
                prop_assert_eq!(ka, kb);
                prop_assert_eq!(ca, cb);
                prop_assert!(same_bits(va, vb));
            }
            let f = &probe[..a.order()];
            match (a.query_interpolated(f), b.query_interpolated(f)) {
                (Ok(va), Ok(vb)) => prop_assert!(same_bits(va, vb)),
                (ra, rb) => prop_assert_eq!(ra.is_err(), rb.is_err()),
            }
        }
    }

    #[test]
    fn truncated_sums_are_rejected(values in proptest::collection::vec(finite_complex(), 1..20), cut in 1usize..16) {
        let text = encode_complex(&values);
        prop_assume!(cut < text.len());
        let short = &text[..text.len() - cut];
        // base64 of 16-byte records never decodes to a whole number of records when shortened
        prop_assert!(decode_complex(short).is_err());
    }
}
