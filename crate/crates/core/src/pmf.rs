//! Joint distribution of Alice's scaled index and Bob's index for one
//! quadrature of a Gaussian state, plus the statistics derived from it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::bounds::params::PEStats;
use crate::discretization::Binning;
use crate::error::{invalid, Error, Result};
use crate::gaussian::{Mode, Quadrature, Scaling, TwoModeCovariance};

/// Half-width of the integration window in standard deviations.
pub const DEFAULT_TRUNCATION: f64 = 10.0;

const GL2: [(f64, f64); 1] = [(0.577_350_269_189_625_8, 1.0)];
const GL4: [(f64, f64); 2] = [
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];
const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// Rule for a piece whose width is `rho` times the shortest length scale of
/// the integrand. Two nodes at `rho <= 0.02` leave a relative error near 1e-10.
fn rule_for(rho: f64) -> &'static [(f64, f64)] {
    if rho <= 0.02 {
        &GL2
    } else if rho <= 0.1 {
        &GL4
    } else {
        &GL8
    }
}

/// Zero-mean bivariate normal of (scaled Alice outcome, Bob outcome).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BivariateOutcome {
    pub var_x: f64,
    pub var_y: f64,
    pub cov_xy: f64,
}

impl BivariateOutcome {
    pub fn from_state(cov: &TwoModeCovariance, scaling: &Scaling, quad: Quadrature) -> Self {
        let t = scaling.get(quad);
        Self {
            var_x: t * t * cov.outcome_variance(Mode::A, quad),
            var_y: cov.outcome_variance(Mode::B, quad),
            cov_xy: t * cov.outcome_covariance(quad),
        }
    }

    /// Variance of `x - y`.
    pub fn var_diff(&self) -> f64 {
        self.var_x + self.var_y - 2.0 * self.cov_xy
    }

    fn conditional(&self) -> (f64, f64) {
        let slope = self.cov_xy / self.var_y;
        let var = (self.var_x - self.cov_xy * slope).max(0.0);
        (slope, var.sqrt())
    }
}

/// Sparse table: one row per Bob index, each holding a contiguous run of
/// Alice indices starting at `x_start`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPmf {
    pub binning: Binning,
    pub rows: Vec<PmfRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PmfRow {
    pub y: u32,
    pub x_start: u32,
    pub probs: Vec<f64>,
}

pub fn joint_pmf(
    cov: &TwoModeCovariance,
    scaling: &Scaling,
    quad: Quadrature,
    binning: &Binning,
) -> Result<JointPmf> {
    joint_pmf_gaussian(
        &BivariateOutcome::from_state(cov, scaling, quad),
        binning,
        DEFAULT_TRUNCATION,
    )
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Probability between two standardised points, taking the complement on
/// the upper side so that upper-tail cells keep their relative precision.
fn normal_mass(za: f64, zb: f64) -> f64 {
    if za >= 0.0 {
        std_normal_cdf(-za) - std_normal_cdf(-zb)
    } else if zb <= 0.0 {
        std_normal_cdf(zb) - std_normal_cdf(za)
    } else {
        1.0 - std_normal_cdf(za) - std_normal_cdf(-zb)
    }
}

pub fn joint_pmf_gaussian(
    dist: &BivariateOutcome,
    binning: &Binning,
    trunc_sigmas: f64,
) -> Result<JointPmf> {
    if !(dist.var_y > 0.0) {
        return Err(Error::NonPositiveVariance(dist.var_y));
    }
    if !(dist.var_x > 0.0) {
        return Err(Error::NonPositiveVariance(dist.var_x));
    }
    if !(trunc_sigmas > 0.0) {
        return Err(invalid("trunc_sigmas", "must be positive"));
    }
    let (slope, sc) = dist.conditional();
    let sy = dist.var_y.sqrt();
    let wy = trunc_sigmas * sy;
    // Below this the conditional spread is far inside one bin of any usable width.
    let degenerate = sc <= 1e-9 * sy;
    let wc = trunc_sigmas * sc;
    let k = binning.bins;
    let edge = |i: u32| binning.upper_edge(i);

    let j_lo = binning.bin_index(-wy);
    let j_hi = binning.bin_index(wy);

    let mut rows: Vec<PmfRow> = (j_lo..=j_hi)
        .into_par_iter()
        .filter_map(|j| {
            let a = if j == 1 { -wy } else { edge(j - 1).max(-wy) };
            let b = if j == k { wy } else { edge(j).min(wy) };
            if b <= a {
                return None;
            }
            let (m1, m2) = (slope * a, slope * b);
            let i_lo = binning.bin_index(m1.min(m2) - wc);
            let i_hi = binning.bin_index(m1.max(m2) + wc);
            let ncell = (i_hi - i_lo + 1) as usize;
            let mut probs = vec![0.0; ncell];

            if degenerate {
                // x = slope * y exactly: split the row where slope * y crosses an x edge.
                for (cell, pr) in probs.iter_mut().enumerate() {
                    let i = i_lo + cell as u32;
                    let xl = if i == 1 { f64::NEG_INFINITY } else { edge(i - 1) };
                    let xh = if i == k { f64::INFINITY } else { edge(i) };
                    let (yl, yh) = if slope > 0.0 { (xl / slope, xh / slope) } else { (xh / slope, xl / slope) };
                    let (lo, hi) = (yl.max(a), yh.min(b));
                    if hi > lo {
                        *pr += normal_mass(lo / sy, hi / sy);
                    }
                }
                return Some(PmfRow { y: j, x_start: i_lo, probs });
            }

            let width = b - a;
            let pieces = ((width / (0.5 * sy)).ceil())
                .max((width * slope.abs() / (0.5 * sc)).ceil())
                .max(1.0) as usize;
            let mut z = vec![0.0; ncell + 1];

            let h = width / pieces as f64;
            let rule = rule_for((h / sy).max(h * slope.abs() / sc));
            for p in 0..pieces {
                let c = a + (p as f64 + 0.5) * h;
                for &(node, weight) in rule {
                    for s in [-1.0, 1.0] {
                        let y = c + s * node * 0.5 * h;
                        let w = weight * 0.5 * h * (-0.5 * y * y / dist.var_y).exp()
                            / (sy * (2.0 * PI).sqrt());
                        let mu = slope * y;
                        z[0] = f64::NEG_INFINITY;
                        z[ncell] = f64::INFINITY;
                        for (e, ze) in z.iter_mut().enumerate().take(ncell).skip(1) {
                            *ze = (edge(i_lo + e as u32 - 1) - mu) / sc;
                        }
                        for (cell, pr) in probs.iter_mut().enumerate() {
                            *pr += w * normal_mass(z[cell], z[cell + 1]);
                        }
                    }
                }
            }
            Some(PmfRow {
                y: j,
                x_start: i_lo,
                probs,
            })
        })
        .collect();

    // Mass beyond the Y window goes to the cell at the window edge.
    let tail = std_normal_cdf(-trunc_sigmas);
    for (yv, row_pick) in [(-wy, 0usize), (wy, rows.len().saturating_sub(1))] {
        if let Some(row) = rows.get_mut(row_pick) {
            let i = binning
                .bin_index(slope * yv)
                .clamp(row.x_start, row.x_start + row.probs.len() as u32 - 1);
            row.probs[(i - row.x_start) as usize] += tail;
        }
    }

    Ok(JointPmf {
        binning: *binning,
        rows,
    })
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Statistics of a [`JointPmf`]. Entropies are in bits; moments are in index units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmfSummary {
    pub total_mass: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub h_joint: f64,
    pub mean_abs_diff: f64,
    pub mean_sq_diff: f64,
    pub m2_x: f64,
    pub m2_y: f64,
}

impl PmfSummary {
    pub fn mutual_information(&self) -> f64 {
        self.h_x + self.h_y - self.h_joint
    }

    pub fn var_abs_diff(&self) -> f64 {
        (self.mean_sq_diff - self.mean_abs_diff * self.mean_abs_diff).max(0.0)
    }
}

impl JointPmf {
    pub fn total_mass(&self) -> f64 {
        self.rows.iter().flat_map(|r| r.probs.iter()).sum()
    }

    /// Iterates `(x, y, p)` over the stored cells.
    pub fn cells(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.rows.iter().flat_map(|r| {
            r.probs
                .iter()
                .enumerate()
                .map(move |(i, &p)| (r.x_start + i as u32, r.y, p))
        })
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.rows
            .binary_search_by_key(&y, |r| r.y)
            .ok()
            .and_then(|ri| {
                let r = &self.rows[ri];
                x.checked_sub(r.x_start)
                    .and_then(|i| r.probs.get(i as usize).copied())
            })
            .unwrap_or(0.0)
    }

    pub fn summary(&self) -> PmfSummary {
        let k = self.binning.bins as usize;
        let c = self.binning.center_index();
        let mut px = vec![0.0; k + 1];
        let mut s = PmfSummary {
            total_mass: 0.0,
            h_x: 0.0,
            h_y: 0.0,
            h_joint: 0.0,
            mean_abs_diff: 0.0,
            mean_sq_diff: 0.0,
            m2_x: 0.0,
            m2_y: 0.0,
        };
        for row in &self.rows {
            let mut py = 0.0;
            let dy = row.y as f64 - c;
            for (i, &p) in row.probs.iter().enumerate() {
                let x = row.x_start as usize + i;
                px[x] += p;
                py += p;
                s.h_joint += plogp(p);
                let d = (x as f64 - row.y as f64).abs();
                s.mean_abs_diff += p * d;
                s.mean_sq_diff += p * d * d;
                let dx = x as f64 - c;
                s.m2_x += p * dx * dx;
            }
            s.total_mass += py;
            s.h_y += plogp(py);
            s.m2_y += py * dy * dy;
        }
        s.h_x = px.iter().map(|&p| plogp(p)).sum();
        s
    }
}

/// Reconciliation leakage per key symbol: `H(X_B) - beta I(X_A; X_B)`.
pub fn leak_per_symbol(summary: &PmfSummary, beta: f64) -> f64 {
    summary.h_y - beta * summary.mutual_information()
}

/// Expected PE statistics for a given binning and the abort threshold obtained
/// by adding `margin_sigmas` standard errors (over `k` PE rounds) to the mean distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeForecast {
    pub stats: PEStats,
    pub d0: f64,
    /// Variance of the per-round index distance.
    pub var_abs_diff: f64,
    /// Upper estimate `sigma_diff sqrt(2/pi) / delta + 1` from the continuous distribution.
    pub continuous_bound: f64,
}

pub fn pe_forecast(
    summary: &PmfSummary,
    dist: &BivariateOutcome,
    delta: f64,
    margin_sigmas: f64,
    k: u64,
) -> PeForecast {
    let var_abs = summary.var_abs_diff();
    let d0 = if k == 0 {
        f64::INFINITY
    } else {
        summary.mean_abs_diff + margin_sigmas * (var_abs / k as f64).sqrt()
    };
    PeForecast {
        stats: PEStats {
            d_pe: summary.mean_abs_diff,
            v_d_pe: summary.mean_sq_diff,
            v_ya_pe: summary.m2_x,
            v_yb_pe: summary.m2_y,
        },
        d0,
        var_abs_diff: var_abs,
        continuous_bound: dist.var_diff().sqrt() * (2.0 / PI).sqrt() / delta + 1.0,
    }
}

/// PE forecast straight from the state, on the phase quadrature.
pub fn expected_pe_stats(
    cov: &TwoModeCovariance,
    scaling: &Scaling,
    binning: &Binning,
    margin_sigmas: f64,
    k: u64,
) -> Result<PeForecast> {
    let pmf = joint_pmf(cov, scaling, Quadrature::P, binning)?;
    let dist = BivariateOutcome::from_state(cov, scaling, Quadrature::P);
    Ok(pe_forecast(&pmf.summary(), &dist, binning.delta, margin_sigmas, k))
}
