//! Reference computations for the integration tests, written independently
//! of the library's numerical routes, plus the frozen constants they back.
//!
//! High-precision constants come from `tests/oracles/goldens.py` (mpmath).
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cvqkd_core::bounds::{
    bernstein_bound, big_gamma, gamma_fn, gamma_prefactor, mu_stat, mu_test, overlap_c,
    serfling_bound, sigma_star, xi_fn, TailBound,
};
use cvqkd_core::discretization::{dist_d, dist_d2, moment_m2, BinnedString, Binning};
use cvqkd_core::gaussian::{
    build_tmss, gaussian_entropy, homodyne_condition, scaling_factors, symplectic_spectrum,
    vn_entropy,
};
use cvqkd_core::keyrate::{asymptotic_rates, distance_scenario, ChannelModel};
use cvqkd_core::pmf::{joint_pmf_gaussian, leak_per_symbol, pe_forecast, BivariateOutcome};
use cvqkd_core::simulator::{mc_verify_energy_test, mc_verify_sampling_bounds, PopulationSpec, SamplingReport};
use cvqkd_core::{
    ChannelParams, LogBase, Mode, OverlapMode, PEStats, ProtocolParams, Quadrature, RoundCounts,
    SecurityBudget,
};

pub const TMSS_11_16_A: f64 = 26.199985586645698591;
pub const TMSS_11_16_B: f64 = 1.7782794100389228012;
pub const TMSS_11_16_C: f64 = 26.139567079052284327;
pub const VN_TMSS_11_16: f64 = 2.377173331853495814;
pub const B_BLOCK_ETA05_EX001: f64 = 13.604992793322849295;
pub const TQ_ETA05: f64 = 0.7204748295147312748;
pub const OVERLAP_APPROX_0_1: f64 = 0.0015915494309189533577;
pub const GAMMA_AT_1: f64 = 5.8284271247461900976;
pub const BIG_GAMMA_PREFACTOR_T099: f64 = 1.4142682241899517411;
pub const LOG2_BIG_GAMMA_8000_099_28: f64 = -430104.12601830702044;
pub const LN_SERFLING_EXAMPLE: f64 = -2499.75002499750025;
pub const LN_BERNSTEIN_EXAMPLE: f64 = -9.375;
pub const SIGMA_STAR_MODEL: f64 = 11.660830789337105295;
pub const XI_MID: f64 = 2.2519215587728428912e-19;
pub const MU_STAT_EXAMPLE: f64 = 0.037908902300206644538;
pub const ETA_16KM: f64 = 0.54530141229349357327;
pub const ETA_50KM: f64 = 0.905;
pub const H_VACUUM_OUTCOME: f64 = 1.5470955851806411027;
pub const R_UR_VACUUM: f64 = -0.44269504088896340736;
pub const R_UR_PURE_11DB: f64 = 3.2114258634871351753;
pub const R_UR_ZERO_ETA_11_16: f64 = 0.69948774868966830954;
pub const R_UR_ZERO_ETA_60DB: f64 = 0.73575861810150274469;

/// Exact overlaps frozen from the concentration-operator oracle below.
pub const OVERLAP_EXACT: [(f64, f64); 4] = [
    (0.5, 0.039771473250082144),
    (1.0, 0.15805672744823074),
    (2.0, 0.5725817806378951),
    (4.0, 0.9958854904296499),
];

/// One named comparison with its outcome.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), ok, detail: detail.into() }
    }

    /// `|got - want| <= tol * max(1, |want|)`.
    pub fn close(name: impl Into<String>, got: f64, want: f64, tol: f64) -> Self {
        let err = (got - want).abs();
        let ok = err <= tol * want.abs().max(1.0);
        Self::new(name, ok, format!("got {got:.15e}, want {want:.15e}, tol {tol:e}"))
    }

    pub fn within_se(name: impl Into<String>, observed: f64, expected: f64, se: f64, sigmas: f64) -> Self {
        let ok = (observed - expected).abs() <= sigmas * se;
        Self::new(
            name,
            ok,
            format!("observed {observed:.6e}, expected {expected:.6e}, se {se:.3e}, limit {sigmas} se"),
        )
    }

    pub fn bound(name: impl Into<String>, bound: f64, frequency: f64, stderr: f64) -> Self {
        let ok = bound >= frequency - 3.0 * stderr;
        Self::new(
            name,
            ok,
            format!("bound {bound:.4e} vs frequency {frequency:.4e} (se {stderr:.2e})"),
        )
    }
}

pub fn all_ok(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.ok)
}

/// Panics with every failed check listed.
pub fn assert_checks(checks: &[Check]) {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.ok)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    assert!(failed.is_empty(), "failed checks:\n{}", failed.join("\n"));
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

// ---------------------------------------------------------------------------
// Quadrature and special functions

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Largest eigenvalue of the operator `f -> int_{-1}^{1} sin(b(x-y)) / (pi (x-y)) f(y) dy`,
/// i.e. the maximum of the concentration ratio, by Nystrom discretisation and
/// power iteration on the Rayleigh quotient.
pub fn concentration_eigenvalue(bandwidth: f64, nodes: usize) -> f64 {
    let (x, w) = gauss_legendre(nodes);
    let kernel = |a: f64, b: f64| {
        let d = a - b;
        if d.abs() < 1e-14 {
            bandwidth / std::f64::consts::PI
        } else {
            (bandwidth * d).sin() / (std::f64::consts::PI * d)
        }
    };
    let a: Vec<Vec<f64>> = (0..nodes)
        .map(|i| (0..nodes).map(|j| w[i].sqrt() * kernel(x[i], x[j]) * w[j].sqrt()).collect())
        .collect();
    let mut v: Vec<f64> = w.iter().map(|wi| wi.sqrt()).collect();
    let mut lambda = 0.0;
    for _ in 0..5000 {
        let av: Vec<f64> = a.iter().map(|row| row.iter().zip(&v).map(|(p, q)| p * q).sum()).collect();
        let norm = av.iter().map(|z| z * z).sum::<f64>().sqrt();
        let vv = v.iter().map(|z| z * z).sum::<f64>();
        let next = v.iter().zip(&av).map(|(p, q)| p * q).sum::<f64>() / vv;
        v = av.iter().map(|z| z / norm).collect();
        if (next - lambda).abs() < 1e-16 {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}

/// Symplectic eigenvalues from the invariants `Delta = det A + det B + 2 det C`
/// and `det Gamma`.
pub fn invariant_spectrum(a: [[f64; 2]; 2], b: [[f64; 2]; 2], c: [[f64; 2]; 2], det_full: f64) -> (f64, f64) {
    let det2 = |m: [[f64; 2]; 2]| m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let delta = det2(a) + det2(b) + 2.0 * det2(c);
    let disc = (delta * delta - 4.0 * det_full).max(0.0).sqrt();
    (((delta - disc) / 2.0).sqrt(), ((delta + disc) / 2.0).sqrt())
}

/// `g(nu)` summed directly from the thermal occupation distribution.
pub fn thermal_entropy_by_sum(nu: f64) -> f64 {
    let nbar = (nu - 1.0) / 2.0;
    let q = nbar / (nbar + 1.0);
    let mut s = 0.0;
    let mut p = 1.0 / (nbar + 1.0);
    for _ in 0..20_000 {
        if p > 0.0 {
            s -= p * p.log2();
        }
        p *= q;
        if p < 1e-300 {
            break;
        }
    }
    s
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

// ---------------------------------------------------------------------------
// Binned bivariate normal by direct two-dimensional integration

/// Probability of the cell `[x0, x1] x [y0, y1]` under a zero-mean bivariate
/// normal, by tensor Gauss-Legendre on pieces no wider than `piece`.
pub fn cell_mass_2d(dist: &BivariateOutcome, x: (f64, f64), y: (f64, f64), piece: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let det = dist.var_x * dist.var_y - dist.cov_xy * dist.cov_xy;
    let (ixx, iyy, ixy) = (dist.var_y / det, dist.var_x / det, -dist.cov_xy / det);
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
    let dens = |u: f64, v: f64| norm * (-0.5 * (ixx * u * u + 2.0 * ixy * u * v + iyy * v * v)).exp();
    let split = |(a, b): (f64, f64)| {
        let n = ((b - a) / piece).ceil().max(1.0) as usize;
        (0..n).map(move |i| (a + (b - a) * i as f64 / n as f64, a + (b - a) * (i + 1) as f64 / n as f64))
    };
    let (nodes, weights) = rule;
    let mut total = 0.0;
    for (xa, xb) in split(x) {
        let (xm, xh) = (0.5 * (xa + xb), 0.5 * (xb - xa));
        for (ya, yb) in split(y) {
            let (ym, yh) = (0.5 * (ya + yb), 0.5 * (yb - ya));
            let mut s = 0.0;
            for (i, &u) in nodes.iter().enumerate() {
                for (j, &v) in nodes.iter().enumerate() {
                    s += weights[i] * weights[j] * dens(xm + xh * u, ym + yh * v);
                }
            }
            total += s * xh * yh;
        }
    }
    total
}

/// Dense table `p[y][x]` (0-based bins) over a binning that covers the
/// distribution widely enough for the overflow cells to be negligible.
/// Cells farther than `reach` conditional deviations from the regression
/// line are skipped.
pub fn direct_table(dist: &BivariateOutcome, binning: &Binning, reach: f64) -> Vec<Vec<f64>> {
    let k = binning.bins as usize;
    let slope = dist.cov_xy / dist.var_y;
    let sc = (dist.var_x - dist.cov_xy * slope).sqrt();
    let sy = dist.var_y.sqrt();
    let rule = gauss_legendre(6);
    let piece = 0.25 * sc.min(sy);
    let lo_edge = |i: usize| -binning.m_range + i as f64 * binning.delta;
    (0..k)
        .map(|j| {
            let (y0, y1) = (lo_edge(j), lo_edge(j + 1));
            let mut row = vec![0.0; k];
            if y1 < -reach * sy || y0 > reach * sy {
                return row;
            }
            let (c0, c1) = (slope * y0, slope * y1);
            let (cmin, cmax) = (c0.min(c1) - reach * sc, c0.max(c1) + reach * sc);
            for (i, cell) in row.iter_mut().enumerate() {
                let (x0, x1) = (lo_edge(i), lo_edge(i + 1));
                if x1 < cmin || x0 > cmax {
                    continue;
                }
                *cell = cell_mass_2d(dist, (x0, x1), (y0, y1), piece, &rule);
            }
            row
        })
        .collect()
}

pub struct TableStats {
    pub mass: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub h_joint: f64,
    pub mean_abs: f64,
}

pub fn table_stats(t: &[Vec<f64>]) -> TableStats {
    let plogp = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    let k = t.len();
    let mut px = vec![0.0; k];
    let mut s = TableStats { mass: 0.0, h_x: 0.0, h_y: 0.0, h_joint: 0.0, mean_abs: 0.0 };
    for (j, row) in t.iter().enumerate() {
        let py: f64 = row.iter().sum();
        s.h_y += plogp(py);
        s.mass += py;
        for (i, &p) in row.iter().enumerate() {
            px[i] += p;
            s.h_joint += plogp(p);
            s.mean_abs += p * (i as f64 - j as f64).abs();
        }
    }
    s.h_x = px.into_iter().map(plogp).sum();
    s
}

// ---------------------------------------------------------------------------
// Individual oracle checks. Each returns one or more named comparisons.

pub fn check_tmss() -> Vec<Check> {
    let s = build_tmss(11.0, 16.0).unwrap();
    vec![
        Check::close("tmss a (11/16 dB)", s.gamma_a[(0, 0)], TMSS_11_16_A, 1e-13),
        Check::close(
            "tmss b (11/16 dB)",
            (s.gamma_a[(0, 0)].powi(2) - s.gamma_cor[(0, 0)].powi(2)).sqrt(),
            TMSS_11_16_B,
            1e-12,
        ),
        Check::close("tmss c (11/16 dB)", s.gamma_cor[(0, 0)], TMSS_11_16_C, 1e-13),
    ]
}

pub fn check_channel_block() -> Vec<Check> {
    let ch = ChannelParams::new(11.0, 16.0, 0.0, 0.5, 0.01, 0.95).unwrap();
    let s = ch.state().unwrap();
    let ch0 = ChannelParams::new(11.0, 16.0, 0.0, 0.5, 0.0, 0.95).unwrap();
    let t = scaling_factors(&ch0.state().unwrap()).unwrap();
    vec![
        Check::close("B block diagonal at eta_B=0.5, eta_ex=0.01", s.gamma_b[(0, 0)], B_BLOCK_ETA05_EX001, 1e-13),
        Check::close("|t_q| at eta_B=0.5", t.t_q.abs(), TQ_ETA05, 1e-13),
        Check::close("|t_p| equals |t_q| for the symmetric state", t.t_p.abs(), TQ_ETA05, 1e-13),
    ]
}

pub fn check_symplectic_spectrum() -> Vec<Check> {
    let mut out = Vec::new();
    let states = [
        ("pure 11/16 dB", ChannelParams::new(11.0, 16.0, 0.0, 0.0, 0.0, 1.0).unwrap()),
        ("eta_B=0.5, eta_ex=0.01", ChannelParams::new(11.0, 16.0, 0.0, 0.5, 0.01, 1.0).unwrap()),
        ("eta_A=0.2, eta_B=0.7, eta_ex=0.05", ChannelParams::new(8.0, 14.0, 0.2, 0.7, 0.05, 1.0).unwrap()),
    ];
    for (name, ch) in states {
        let s = ch.state().unwrap();
        let m = |x: &nalgebra::Matrix2<f64>| [[x[(0, 0)], x[(0, 1)]], [x[(1, 0)], x[(1, 1)]]];
        let (lo, hi) = invariant_spectrum(m(&s.gamma_a), m(&s.gamma_b), m(&s.gamma_cor), s.full().determinant());
        let (llo, lhi) = symplectic_spectrum(&s).unwrap();
        out.push(Check::close(format!("nu_min {name}"), llo, lo, 1e-9));
        out.push(Check::close(format!("nu_max {name}"), lhi, hi, 1e-9));
    }
    let (lo, hi) = symplectic_spectrum(&build_tmss(11.0, 16.0).unwrap()).unwrap();
    out.push(Check::close("tmss spectrum equals b (lower)", lo, TMSS_11_16_B, 1e-12));
    out.push(Check::close("tmss spectrum equals b (upper)", hi, TMSS_11_16_B, 1e-12));
    out
}

pub fn check_vn_entropy() -> Vec<Check> {
    let s = build_tmss(11.0, 16.0).unwrap();
    let got = vn_entropy(&s).unwrap();
    vec![
        Check::close("S(tmss 11/16) against mpmath", got, VN_TMSS_11_16, 1e-12),
        Check::close("S(tmss 11/16) against thermal sum", got, 2.0 * thermal_entropy_by_sum(TMSS_11_16_B), 1e-10),
    ]
}

/// Regression of sampled `q_A` and `p_A` on `q_B` for the pure state, against
/// the conditional blocks.
pub fn check_conditioning() -> Vec<Check> {
    let s = build_tmss(11.0, 16.0).unwrap();
    let cond = homodyne_condition(&s, Mode::B, Quadrature::Q);
    let (a, c) = (s.gamma_a[(0, 0)], s.gamma_cor[(0, 0)]);
    let n = 400_000usize;
    let mut r = rng(77);
    // Outcome units: covariance [[a, c], [c, a]] / 2 for (q_A, q_B); p_A independent of q_B.
    let h = 0.5f64;
    let l11 = (h * a).sqrt();
    let l21 = h * c / l11;
    let l22 = (h * a - l21 * l21).sqrt();
    let (mut sxx, mut sxy, mut syy, mut spp, mut spy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        let (z1, z2, z3) = (normal(&mut r), normal(&mut r), normal(&mut r));
        let qb = l11 * z1;
        let qa = l21 * z1 + l22 * z2;
        let pa = (h * a).sqrt() * z3;
        sxx += qa * qa;
        sxy += qa * qb;
        syy += qb * qb;
        spp += pa * pa;
        spy += pa * qb;
    }
    let nf = n as f64;
    let resid_q = (sxx - sxy * sxy / syy) / nf;
    let resid_p = (spp - spy * spy / syy) / nf;
    let vq = h * cond[(0, 0)];
    let vp = h * cond[(1, 1)];
    vec![
        Check::close("conditional q block is a - c^2/a", cond[(0, 0)], a - c * c / a, 1e-12),
        Check::close("conditional p block is a", cond[(1, 1)], a, 1e-12),
        Check::within_se("regression residual of q_A on q_B", resid_q, vq, vq * (2.0 / nf).sqrt(), 5.0),
        Check::within_se("regression residual of p_A on q_B", resid_p, vp, vp * (2.0 / nf).sqrt(), 5.0),
    ]
}

pub fn check_vacuum_entropy() -> Vec<Check> {
    let v = ChannelParams::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0).unwrap().state().unwrap();
    let h = gaussian_entropy(v.outcome_variance(Mode::B, Quadrature::P));
    vec![Check::close("h(P_B) of vacuum", h, H_VACUUM_OUTCOME, 1e-14)]
}

pub fn check_overlap() -> Vec<Check> {
    let mut out = vec![Check::close(
        "overlap approx delta=0.1",
        overlap_c(0.1, OverlapMode::Approx).unwrap(),
        OVERLAP_APPROX_0_1,
        1e-15,
    )];
    for (delta, frozen) in OVERLAP_EXACT {
        let oracle = concentration_eigenvalue(delta * delta / 4.0, 48);
        let lib = overlap_c(delta, OverlapMode::Exact).unwrap();
        out.push(Check::close(format!("overlap exact delta={delta} vs concentration oracle"), lib, oracle, 1e-10));
        out.push(Check::close(format!("overlap exact delta={delta} vs frozen"), lib, frozen, 1e-12));
    }
    out
}

pub fn check_gamma_functions() -> Vec<Check> {
    let t = 0.99;
    let m = 100.0;
    let at_edge = big_gamma(m, t, mu_test(t) * m).unwrap();
    vec![
        Check::close("gamma(1) = (1+sqrt 2)^2", gamma_fn(1.0), GAMMA_AT_1, 1e-13),
        Check::close("Gamma prefactor at T=0.99", gamma_prefactor(t), BIG_GAMMA_PREFACTOR_T099, 1e-14),
        Check::close("Gamma at alpha = mu_test M is capped at 1", at_edge.value(), 1.0, 0.0),
        Check::close(
            "log2 Gamma(M=8000, T=0.99, alpha=28)",
            big_gamma(8000.0, t, 28.0).unwrap().log2(),
            LOG2_BIG_GAMMA_8000_099_28,
            1e-12,
        ),
    ]
}

pub fn check_sampling_closed_forms() -> Vec<Check> {
    vec![
        Check::close("ln Serfling(n=m=1e4, M/delta=10, nu=50)", serfling_bound(10_000, 10_000, 50.0, 10.0).ln, LN_SERFLING_EXAMPLE, 1e-13),
        Check::close(
            "ln Bernstein(n=k=1e6, sigma=1, M/delta=100, mu=0.01)",
            bernstein_bound(1_000_000, 1_000_000, 2_000_000, 0.01, 1.0, 100.0).ln,
            LN_BERNSTEIN_EXAMPLE,
            1e-13,
        ),
    ]
}

pub fn check_theorem_terms() -> Vec<Check> {
    let counts = RoundCounts { n: 810_000_000, k: 10_000_000, m: 100_000_000, n_cap: 820_000_000 };
    let stats = PEStats { d_pe: 6.0412, v_d_pe: 56.733, v_ya_pe: 2721.05, v_yb_pe: 2720.98 };
    let ss = sigma_star(&counts, &stats, 0.131, 0.05);
    let budget = SecurityBudget { eps_s: 1e-9, eps_c: 1e-9, eps_1: 5e-10, eps_2: 1e-10, eps_t: 1e-9 };
    let xi = xi_fn(&budget, &counts, TailBound::from_ln(1e-31f64.ln()), 0.2, 210.0).unwrap();
    let c2 = RoundCounts { n: 1_000_000, k: 1_000_000, m: 1_000_000, n_cap: 2_000_000 };
    let mu = mu_stat(&c2, 1.0, 2f64.powi(-60), 100.0, LogBase::Two);
    vec![
        Check::close("sigma* at 50% loss model statistics", ss.value, SIGMA_STAR_MODEL, 1e-12),
        Check::close("xi at a mid-range point", xi, XI_MID, 1e-9 * XI_MID),
        Check::close("mu_stat example", mu, MU_STAT_EXAMPLE, 1e-13),
    ]
}

pub fn check_distances_brute_force() -> Vec<Check> {
    let b = Binning::new(5.0, 0.5).unwrap();
    let mut r = rng(11);
    let mut out = Vec::new();
    for trial in 0..3 {
        let n = 1000 + 17 * trial;
        let x: Vec<u32> = (0..n).map(|_| r.random_range(1..=b.bins)).collect();
        let mut y = x.clone();
        for i in (1..n).rev() {
            let j = r.random_range(0..=i);
            y.swap(i, j);
        }
        let (mut s1, mut s2, mut m2) = (0i64, 0i64, 0i64);
        for i in 0..n {
            let d = x[i] as i64 - y[i] as i64;
            s1 += d.abs();
            s2 += d * d;
            let e = 2 * x[i] as i64 - b.bins as i64;
            m2 += e * e;
        }
        let xs = BinnedString::new(x, b).unwrap();
        let ys = BinnedString::new(y, b).unwrap();
        out.push(Check::close(format!("d brute force #{trial}"), dist_d(&xs, &ys).unwrap(), s1 as f64 / n as f64, 1e-14));
        out.push(Check::close(format!("d2 brute force #{trial}"), dist_d2(&xs, &ys).unwrap(), s2 as f64 / n as f64, 1e-14));
        out.push(Check::close(format!("m2 brute force #{trial}"), moment_m2(&xs), m2 as f64 / (4.0 * n as f64), 1e-14));
    }
    out
}

/// Second moment of a binned Gaussian string against the bin-probability sum.
pub fn check_moment_monte_carlo() -> Check {
    let b = Binning::new(6.0, 0.25).unwrap();
    let sd = 1.7;
    let c = b.center_index();
    let mut expected = 0.0;
    let mut expected_sq = 0.0;
    for k in 1..=b.bins {
        let lo = if k == 1 { f64::NEG_INFINITY } else { b.upper_edge(k - 1) };
        let hi = if k == b.bins { f64::INFINITY } else { b.upper_edge(k) };
        let p = std_normal_cdf(hi / sd) - std_normal_cdf(lo / sd);
        let d2 = (k as f64 - c).powi(2);
        expected += p * d2;
        expected_sq += p * d2 * d2;
    }
    let n = 200_000;
    let mut r = rng(5);
    let q: Vec<f64> = (0..n).map(|_| sd * normal(&mut r)).collect();
    let s = BinnedString::from_outcomes(&q, b);
    let se = ((expected_sq - expected * expected) / n as f64).sqrt();
    Check::within_se("m2 of a binned Gaussian string", moment_m2(&s), expected, se, 5.0)
}

/// Near-deterministic correlation: table against sampled pairs and the
/// straddle bound `P(|x - y| > delta)` on cells two or more apart.
pub fn check_correlated_pmf() -> Vec<Check> {
    let delta = 0.2;
    let b = Binning::new(8.0, delta).unwrap();
    let sd_c = 0.2 * delta;
    let var = 1.0;
    let dist = BivariateOutcome { var_x: var + sd_c * sd_c, var_y: var, cov_xy: var };
    let pmf = joint_pmf_gaussian(&dist, &b, 10.0).unwrap();
    let far: f64 = pmf.cells().filter(|&(x, y, _)| x.abs_diff(y) >= 2).map(|c| c.2).sum();
    let off: f64 = pmf.cells().filter(|&(x, y, _)| x != y).map(|c| c.2).sum();
    let straddle = 2.0 * std_normal_cdf(-delta / dist.var_diff().sqrt());

    let n = 400_000;
    let mut r = rng(21);
    let mut hits = 0u64;
    for _ in 0..n {
        let y = normal(&mut r);
        let x = y + sd_c * normal(&mut r);
        if b.bin_index(x) != b.bin_index(y) {
            hits += 1;
        }
    }
    let f = hits as f64 / n as f64;
    let se = (f * (1.0 - f) / n as f64).sqrt();

    let exact = BivariateOutcome { var_x: 1.0, var_y: 1.0, cov_xy: 1.0 };
    let pe = joint_pmf_gaussian(&exact, &b, 10.0).unwrap();
    let off_exact: f64 = pe.cells().filter(|&(x, y, _)| x != y).map(|c| c.2).sum();
    vec![
        Check::within_se("off-diagonal mass against sampled pairs", off, f, se.max(1e-6), 5.0),
        Check::new("mass two or more cells apart below straddle bound", far <= straddle, format!("{far:.3e} <= {straddle:.3e}")),
        Check::new("exact correlation keeps mass on the diagonal", off_exact < 1e-9, format!("off-diagonal {off_exact:.3e}")),
    ]
}

/// Leakage at 11/16 dB, eta_B = 0.5, delta = 0.1, beta = 0.95 against a dense
/// table integrated cell by cell.
pub fn check_leakage_direct_sum() -> Vec<Check> {
    let ch = ChannelParams::new(11.0, 16.0, 0.0, 0.5, 0.0, 0.95).unwrap();
    let s = ch.state().unwrap();
    let t = scaling_factors(&s).unwrap();
    // Built by hand from the covariance entries rather than `from_state`.
    let h = 0.5;
    let dist = BivariateOutcome {
        var_x: t.t_q * t.t_q * h * s.gamma_a[(0, 0)],
        var_y: h * s.gamma_b[(0, 0)],
        cov_xy: t.t_q * h * s.gamma_cor[(0, 0)],
    };
    let b = Binning::new(30.0, 0.1).unwrap();
    let table = direct_table(&dist, &b, 12.0);
    let ts = table_stats(&table);
    let oracle = ts.h_y - 0.95 * (ts.h_x + ts.h_y - ts.h_joint);
    let pmf = joint_pmf_gaussian(&dist, &b, 10.0).unwrap();
    let lib = leak_per_symbol(&pmf.summary(), 0.95);
    let model = ChannelModel::new(&ch).unwrap();
    let cached = model.inputs(0.1, 30.0).unwrap().leak_per_symbol;
    vec![
        Check::close("direct table mass", ts.mass, 1.0, 1e-10),
        Check::close("leak per symbol vs direct summation", lib, oracle, 1e-8),
        Check::close("channel-model leak vs direct summation", cached, oracle, 1e-8),
        Check::close("mean |x-y| vs direct summation", pmf.summary().mean_abs_diff, ts.mean_abs, 1e-8),
    ]
}

/// Expected index distance of independent outcomes against sampled pairs.
pub fn check_uncorrelated_forecast() -> Check {
    let b = Binning::new(10.0, 0.5).unwrap();
    let dist = BivariateOutcome { var_x: 1.3, var_y: 0.8, cov_xy: 0.0 };
    let summary = joint_pmf_gaussian(&dist, &b, 10.0).unwrap().summary();
    let fc = pe_forecast(&summary, &dist, b.delta, 0.0, 1000);
    let n = 200_000;
    let mut r = rng(8);
    let mut s = 0.0;
    for _ in 0..n {
        let x = dist.var_x.sqrt() * normal(&mut r);
        let y = dist.var_y.sqrt() * normal(&mut r);
        s += (b.bin_index(x) as f64 - b.bin_index(y) as f64).abs();
    }
    let se = (fc.var_abs_diff / n as f64).sqrt();
    Check::within_se("E[d] of independent outcomes vs sampled", s / n as f64, fc.stats.d_pe, se, 5.0)
}

pub fn check_asymptotic_closed_forms() -> Vec<Check> {
    let vac = asymptotic_rates(&ChannelParams::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0).unwrap()).unwrap();
    let pure = asymptotic_rates(&ChannelParams::new(11.0, 11.0, 0.0, 0.0, 0.0, 1.0).unwrap()).unwrap();
    vec![
        Check::close("r_UR of vacuum", vac.r_ur, R_UR_VACUUM, 1e-13),
        Check::close("r_UR of pure 11 dB lossless", pure.r_ur, R_UR_PURE_11DB, 1e-12),
        Check::close("16 km scenario loss", distance_scenario(16.0, 0.2, 0.05), ETA_16KM, 1e-14),
        Check::close("50 km scenario loss", distance_scenario(50.0, 0.2, 0.05), ETA_50KM, 1e-14),
    ]
}

/// Energy-test report at a small range with the tail bound near 1e-2.
pub fn energy_test_checks(trials: u64) -> Vec<Check> {
    let ch = ChannelParams::reference(0.5, 0.95);
    let t = 0.99;
    let (m_range, alpha) = cvqkd_core::simulator::observable_attack_params(t, 40.0, 1e-2);
    let pp = ProtocolParams { n_tot: 20.0, r: 0.1, delta: 0.5, m_range, alpha, transmittance: t, d0: 1e9 };
    let rep = mc_verify_energy_test(&ch, &pp, trials, 2024).unwrap();
    let mut honest_tight = pp;
    // A threshold at about 2.5 sigma_t makes honest aborts frequent enough to see.
    honest_tight.alpha = 2.5 * ChannelModel::new(&ch).unwrap().sigma_t(t);
    let rep2 = mc_verify_energy_test(&ch, &honest_tight, trials, 2025).unwrap();
    vec![
        Check::bound("attack pass frequency under Gamma (Gamma near 1e-2)", rep.attack_pass.bound, rep.attack_pass.frequency, rep.attack_pass.stderr),
        Check::bound("honest abort frequency under abort bound", rep2.honest_abort.bound, rep2.honest_abort.frequency, rep2.honest_abort.stderr),
        Check::new(
            "test-port deviation matches sigma_t",
            rep.sigma_t.verdict,
            format!("observed {:.6}, expected {:.6}, se {:.2e}", rep.sigma_t.observed, rep.sigma_t.expected, rep.sigma_t.stderr),
        ),
    ]
}

pub fn sampling_checks(trials: u64) -> (Vec<Check>, SamplingReport) {
    let spec = PopulationSpec::adversarial_bimodal(200, 200, 20, 0.5, 0.1);
    let rep = mc_verify_sampling_bounds(&spec, trials, 99).unwrap();
    (
        vec![
            Check::bound("Serfling bound on bimodal population (bound 0.1)", rep.serfling.bound, rep.serfling.frequency, rep.serfling.stderr),
            Check::bound("Bernstein bound on bimodal population (bound 0.1)", rep.bernstein.bound, rep.bernstein.frequency, rep.bernstein.stderr),
        ],
        rep,
    )
}
