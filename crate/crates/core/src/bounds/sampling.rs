//! Tail bounds for random sampling without replacement from a population of
//! bin indices in `1..=2M/delta`.

use crate::bounds::energy::TailBound;

/// Chance that the second moment of the `n` unsampled values exceeds that of
/// the `m` sampled ones by more than `nu`.
pub fn serfling_bound(n: u64, m: u64, nu: f64, m_over_delta: f64) -> TailBound {
    if nu <= 0.0 || n == 0 || m == 0 {
        return TailBound::from_ln(0.0);
    }
    let (n, m) = (n as f64, m as f64);
    let l4 = m_over_delta.powi(4);
    TailBound::from_ln(-2.0 * nu * nu * n * m * m / (l4 * (n + m) * (m + 1.0)))
}

/// Chance that the mean index distance over `n` key rounds exceeds the PE
/// estimate from `k` rounds by more than `mu`. `sigma` is the population
/// standard deviation and `n_cap = n + k`.
pub fn bernstein_bound(n: u64, k: u64, n_cap: u64, mu: f64, sigma: f64, m_over_delta: f64) -> TailBound {
    if mu <= 0.0 || n == 0 || k == 0 {
        return TailBound::from_ln(0.0);
    }
    let frac = k as f64 / n_cap as f64;
    let num = mu * mu * n as f64 * frac * frac;
    let den = 2.0 * sigma * sigma + 4.0 * mu / 3.0 * frac * m_over_delta;
    TailBound::from_ln(-num / den)
}
