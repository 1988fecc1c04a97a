//! Waveform comparison and amplitude-scaling order separation.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::signal::Waveform;

/// RMS difference divided by the reference's peak-to-peak range.
pub fn nrmse(prediction: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(prediction.len(), reference.len());
    if reference.is_empty() {
        return 0.0;
    }
    let mse = prediction
        .iter()
        .zip(reference)
        .map(|(p, r)| (p - r) * (p - r))
        .sum::<f64>()
        / reference.len() as f64;
    let (lo, hi) = reference
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    mse.sqrt() / (hi - lo)
}

/// Split responses measured at input scales `alphas` into orders
/// `1..=alphas.len()`, assuming `y(alpha) = sum_n alpha^n y_n` exactly.
pub fn separate_orders(responses: &[Waveform], alphas: &[f64]) -> Vec<Waveform> {
    let m = alphas.len();
    assert_eq!(responses.len(), m);
    let len = responses[0].len();
    let v = DMatrix::from_fn(m, m, |i, j| alphas[i].powi(j as i32 + 1));
    let lu = v.lu();
    let mut out: Vec<Vec<f64>> = (0..m).map(|_| Vec::with_capacity(len)).collect();
    for s in 0..len {
        let rhs = DVector::from_fn(m, |i, _| responses[i].samples[s]);
        let x = lu
            .solve(&rhs)
            .expect("distinct scales give a regular Vandermonde matrix");
        for (o, xi) in out.iter_mut().zip(x.iter()) {
            o.push(*xi);
        }
    }
    out.into_iter()
        .map(|y| Waveform::new(y, responses[0].dt, responses[0].t0))
        .collect()
}
