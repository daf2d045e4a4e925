//! Overlap between adjacent binned quadrature measurements.
//!
//! The exact value is `delta^2 / (2 pi) * S(1)^2`, where `S` is the radial
//! prolate spheroidal function of order zero at bandwidth `delta^2 / 4`.
//! The same number is the largest eigenvalue of the time-frequency
//! concentration operator at that bandwidth, which the tests compare against.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Largest bin width for which the series evaluation is trusted.
pub const EXACT_DELTA_MAX: f64 = 4.0;

const LEGENDRE_TERMS: usize = 40;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapMode {
    Approx,
    #[default]
    Exact,
}

/// Overlap `c(delta)` for bin width `delta` in outcome units.
pub fn overlap_c(delta: f64, mode: OverlapMode) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("{delta} must be positive")));
    }
    let approx = delta * delta / (2.0 * PI);
    match mode {
        OverlapMode::Approx => Ok(approx),
        OverlapMode::Exact => {
            if delta > EXACT_DELTA_MAX {
                return Err(invalid(
                    "delta",
                    format!("{delta} above {EXACT_DELTA_MAX}, where the series is not trusted"),
                ));
            }
            let s = radial_at_one(delta * delta / 4.0);
            Ok(approx * s * s)
        }
    }
}

/// `S_00^(1)(c, 1)` normalised so that it tends to 1 as `c -> 0`.
pub fn radial_at_one(c: f64) -> f64 {
    let d = legendre_coefficients(c);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &di) in d.iter().enumerate() {
        let r = 2 * i;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        num += sign * di * spherical_bessel_j(r, c);
        den += di;
    }
    num / den
}

/// Expansion coefficients `d_r` (even `r`) of the angular function in
/// Legendre polynomials, from the lowest eigenpair of the three-term
/// recurrence.
fn legendre_coefficients(c: f64) -> Vec<f64> {
    let c2 = c * c;
    let nt = LEGENDRE_TERMS;
    let rf = |i: usize| (2 * i) as f64;
    let alpha = |r: f64| (r + 2.0) * (r + 1.0) * c2 / ((2.0 * r + 3.0) * (2.0 * r + 5.0));
    let beta = |r: f64| {
        r * (r + 1.0) + (2.0 * r * (r + 1.0) - 1.0) * c2 / ((2.0 * r - 1.0) * (2.0 * r + 3.0))
    };
    let gamma = |r: f64| r * (r - 1.0) * c2 / ((2.0 * r - 3.0) * (2.0 * r - 1.0));

    // Symmetrise: off-diagonals sqrt(alpha_i gamma_{i+1}); d = D^{-1} w with
    // D_{i+1} / D_i = sqrt(alpha_i / gamma_{i+1}) = sqrt((2r+1)/(2r+5)).
    let mut t = DMatrix::<f64>::zeros(nt, nt);
    for i in 0..nt {
        t[(i, i)] = beta(rf(i));
        if i + 1 < nt {
            let off = (alpha(rf(i)) * gamma(rf(i + 1))).sqrt();
            t[(i, i + 1)] = off;
            t[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(t);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let w = eig.eigenvectors.column(imin);
    let mut d = Vec::with_capacity(nt);
    let mut scale = 1.0;
    for i in 0..nt {
        if i > 0 {
            let r = rf(i - 1);
            scale *= ((2.0 * r + 1.0) / (2.0 * r + 5.0)).sqrt();
        }
        d.push(w[i] / scale);
    }
    if d[0] < 0.0 {
        d.iter_mut().for_each(|x| *x = -*x);
    }
    d
}

/// Spherical Bessel function of the first kind by its power series; accurate
/// for the small arguments used here.
fn spherical_bessel_j(n: usize, x: f64) -> f64 {
    let mut lead = 1.0;
    for i in 1..=n {
        lead *= x / (2 * i + 1) as f64;
    }
    let h = -0.5 * x * x;
    let mut term = lead;
    let mut sum = lead;
    for k in 1..200 {
        term *= h / (k as f64 * (2 * n + 2 * k + 1) as f64);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}
