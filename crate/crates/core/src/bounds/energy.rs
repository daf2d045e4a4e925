//! Energy test: a beam splitter of transmittance `T` mixes Bob's signal
//! with vacuum, the reflected port is mixed with a second vacuum on a
//! balanced splitter and both outputs are homodyned against a threshold
//! `alpha`. All amplitudes are in outcome units.

use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

use crate::error::{invalid, Error, Result};
use crate::gaussian::VACUUM_OUTCOME_VARIANCE;

/// A probability held as its natural log so that tiny values survive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub ln: f64,
}

impl TailBound {
    pub fn from_ln(ln: f64) -> Self {
        Self { ln: ln.min(0.0) }
    }

    pub fn value(&self) -> f64 {
        self.ln.exp()
    }

    pub fn log2(&self) -> f64 {
        self.ln / LN_2
    }
}

fn check_transmittance(t: f64) -> Result<()> {
    if !(t > 0.5 && t < 1.0) {
        return Err(invalid("transmittance", format!("{t} outside (1/2, 1)")));
    }
    Ok(())
}

/// Ratio between the test-port amplitude and the signal amplitude that the
/// test can certify.
pub fn mu_test(t: f64) -> f64 {
    ((1.0 - t) / (2.0 * t)).sqrt()
}

fn lambda_bs(t: f64) -> f64 {
    let x = (2.0 * t - 1.0) / t;
    x * x
}

/// Prefactor of the tail bound; depends only on `T`.
pub fn gamma_prefactor(t: f64) -> f64 {
    let l = lambda_bs(t);
    0.5 * ((1.0 + l).sqrt() + (1.0 + 1.0 / l).sqrt())
}

/// Bound on the probability that a mode with amplitude above `m_range`
/// passes a test with threshold `alpha`.
pub fn big_gamma(m_range: f64, t: f64, alpha: f64) -> Result<TailBound> {
    check_transmittance(t)?;
    if !(m_range > 0.0 && m_range.is_finite()) {
        return Err(invalid("m_range", format!("{m_range} must be positive")));
    }
    if !(alpha >= 0.0) {
        return Err(invalid("alpha", format!("{alpha} must be non-negative")));
    }
    let mu = mu_test(t);
    let limit = mu * m_range;
    if alpha > limit {
        return Err(Error::EnergyTestPrecondition { alpha, limit });
    }
    let l = lambda_bs(t);
    let z = mu * m_range - alpha;
    let ln = gamma_prefactor(t).ln() - 2.0 * z * z / (t * (1.0 + l));
    Ok(TailBound::from_ln(ln))
}

/// Standard deviation of each test-port outcome for an honest Bob mode with
/// vacuum-unit variance `v_b`.
pub fn energy_test_sigma(v_b: f64, t: f64) -> f64 {
    (VACUUM_OUTCOME_VARIANCE * ((1.0 - t) * v_b + t + 1.0) / 2.0).sqrt()
}

/// Bound on the chance that any of `n_tot` honest rounds trips the test.
pub fn abort_bound(sigma_t: f64, n_tot: f64, alpha: f64) -> f64 {
    (8.0 * PI).sqrt() * sigma_t * n_tot * (-alpha * alpha / (2.0 * sigma_t * sigma_t)).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaCalibration {
    pub alpha: f64,
    /// Set when the abort bound is already below `eps_t` at `alpha = 0`.
    pub degenerate: bool,
}

/// Threshold at which [`abort_bound`] equals `eps_t`.
pub fn alpha_for(sigma_t: f64, n_tot: f64, eps_t: f64) -> Result<AlphaCalibration> {
    if !(sigma_t > 0.0) {
        return Err(invalid("sigma_t", format!("{sigma_t} must be positive")));
    }
    if !(eps_t > 0.0 && eps_t < 1.0) {
        return Err(invalid("eps_t", format!("{eps_t} outside (0, 1)")));
    }
    let arg = (8.0 * PI).sqrt() * sigma_t * n_tot / eps_t;
    if arg <= 1.0 {
        return Ok(AlphaCalibration {
            alpha: 0.0,
            degenerate: true,
        });
    }
    Ok(AlphaCalibration {
        alpha: (2.0 * sigma_t * sigma_t * arg.ln()).sqrt(),
        degenerate: false,
    })
}

/// Smallest multiple of `delta` for which `2 sqrt(2 n Gamma) <= eps_2`.
pub fn choose_m_range(t: f64, alpha: f64, n: u64, eps_2: f64, delta: f64) -> Result<f64> {
    check_transmittance(t)?;
    if !(delta > 0.0) {
        return Err(invalid("delta", format!("{delta} must be positive")));
    }
    if n == 0 {
        return Err(invalid("n", "needs at least one key round"));
    }
    let target = 2.0 * (eps_2 / 2.0).ln() - (2.0 * n as f64).ln();
    let excess = gamma_prefactor(t).ln() - target;
    let z = if excess > 0.0 {
        (t * (1.0 + lambda_bs(t)) / 2.0 * excess).sqrt()
    } else {
        0.0
    };
    let mut m = ((alpha + z) / mu_test(t) / delta).ceil().max(1.0) * delta;
    while 2.0 * (2.0 * n as f64 * big_gamma(m, t, alpha)?.value()).sqrt() > eps_2 {
        m += delta;
    }
    Ok(m)
}
