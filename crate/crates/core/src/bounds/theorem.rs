//! Pieces of the finite-size key-length bound: the max-entropy function,
//! the PE variance proxy and the statistical margin on the index distance.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::bounds::energy::TailBound;
use crate::bounds::params::{LogBase, PEStats, RoundCounts, SecurityBudget};

/// `log2 gamma(t)` with `gamma(t) = (t + sqrt(1+t^2)) (t / (sqrt(1+t^2) - 1))^t`.
pub fn log2_gamma(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let s = (1.0 + t * t).sqrt();
    // t / (s - 1) = (s + 1) / t
    (t.asinh() + t * ((s + 1.0) / t).ln()) / LN_2
}

pub fn gamma_fn(t: f64) -> f64 {
    log2_gamma(t).exp2()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaStar {
    pub value: f64,
    /// The variance proxy came out negative and was floored at zero.
    pub floored: bool,
}

/// Upper estimate of the standard deviation of the per-round index distance.
pub fn sigma_star(counts: &RoundCounts, stats: &PEStats, nu: f64, delta: f64) -> SigmaStar {
    let f = counts.k as f64 / counts.n_cap as f64;
    let shift = nu / (delta * delta);
    let ya = stats.v_ya_pe + shift;
    let yb = stats.v_yb_pe + shift;
    let s2 = f * (stats.v_d_pe - f * stats.d_pe * stats.d_pe)
        + f * (stats.v_ya_pe + stats.v_yb_pe + 2.0 * shift)
        + 2.0 * f * (ya.max(0.0) * yb.max(0.0)).sqrt();
    if s2 < 0.0 {
        SigmaStar {
            value: 0.0,
            floored: true,
        }
    } else {
        SigmaStar {
            value: s2.sqrt(),
            floored: false,
        }
    }
}

/// Budget left once smoothing and the energy test have taken their share.
pub fn energy_slack(budget: &SecurityBudget, n: u64, gamma: TailBound) -> f64 {
    budget.eps_s - budget.eps_1 - 2.0 * (2.0 * n as f64 * gamma.value()).sqrt()
}

/// Failure budget left for the distance estimate at moment slack `nu`.
/// `None` when the energy test has used everything up.
pub fn xi_fn(
    budget: &SecurityBudget,
    counts: &RoundCounts,
    gamma: TailBound,
    nu: f64,
    m_range: f64,
) -> Option<f64> {
    let slack = energy_slack(budget, counts.n, gamma);
    if slack <= 0.0 {
        return None;
    }
    let (n, m) = (counts.n as f64, counts.m as f64);
    let q = nu / m_range;
    Some(slack * slack - 2.0 * (-2.0 * q * q * n * m * m / ((n + m) * (m + 1.0))).exp())
}

/// Smallest `nu` in `[0, M^2]` with positive `xi`, by bisection to a
/// relative width of `1e-6`. The returned point is always on the valid side.
pub fn smallest_nu(
    budget: &SecurityBudget,
    counts: &RoundCounts,
    gamma: TailBound,
    m_range: f64,
) -> Option<f64> {
    let xi = |nu: f64| xi_fn(budget, counts, gamma, nu, m_range);
    let mut hi = m_range * m_range;
    if xi(hi)? <= 0.0 {
        return None;
    }
    let mut lo = 0.0;
    if xi(lo)? > 0.0 {
        return Some(0.0);
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if xi(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Margin added to the observed distance. Zero once `xi >= 1`.
pub fn mu_stat(counts: &RoundCounts, sigma_star: f64, xi: f64, m_over_delta: f64, base: LogBase) -> f64 {
    if xi >= 1.0 {
        return 0.0;
    }
    let l = base.log_inv(xi);
    let (n, k) = (counts.n as f64, counts.k as f64);
    (2.0 * l).sqrt() * (n + k) * sigma_star / (k * n.sqrt())
        + 4.0 * m_over_delta * l / 3.0 * (n + k) / (n * k)
}

/// Smoothing loss charged to the energy test when it passes with probability `p_pass`.
pub fn epsilon_tilde(n: u64, gamma: TailBound, p_pass: f64) -> f64 {
    (2.0 * n as f64 * gamma.value() / p_pass).sqrt()
}
