use serde::{Deserialize, Serialize};

use crate::bounds::{
    big_gamma, epsilon_tilde, log2_gamma, mu_stat, overlap_c, sigma_star, smallest_nu, xi_fn,
    LogBase, OverlapMode, PEStats, ProtocolParams, RoundCounts, SecurityBudget, TailBound,
};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyRateOptions {
    pub overlap: OverlapMode,
    pub log_base: LogBase,
    /// Standard errors added to the expected distance to set `d0`.
    pub pe_margin_sigmas: f64,
    pub p_pass: f64,
}

impl Default for KeyRateOptions {
    fn default() -> Self {
        Self {
            overlap: OverlapMode::Exact,
            log_base: LogBase::Two,
            pe_margin_sigmas: 5.0,
            p_pass: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroKeyReason {
    EmptyRounds,
    EnergyTestBudgetExhausted,
    NoValidNu,
    NonPositiveLength,
}

impl ZeroKeyReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            ZeroKeyReason::EmptyRounds => "empty_rounds",
            ZeroKeyReason::EnergyTestBudgetExhausted => "energy_test_budget_exhausted",
            ZeroKeyReason::NoValidNu => "no_valid_nu",
            ZeroKeyReason::NonPositiveLength => "non_positive_length",
        }
    }
}

/// The four terms of the key length, in bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyTerms {
    pub uncertainty: f64,
    pub max_entropy: f64,
    pub leak_ir: f64,
    pub correction: f64,
}

impl KeyTerms {
    pub fn raw(&self) -> f64 {
        self.uncertainty - self.max_entropy - self.leak_ir - self.correction
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChosenParams {
    pub r: f64,
    pub delta: f64,
    pub m_range: f64,
    pub alpha: f64,
    pub d0: f64,
    pub nu: f64,
    pub xi: f64,
    pub mu_stat: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub key_length: f64,
    pub rate: f64,
    pub n_tot: f64,
    pub counts: RoundCounts,
    pub chosen: ChosenParams,
    /// Present whenever the assembly got far enough to evaluate every term.
    pub terms: Option<KeyTerms>,
    pub log2_big_gamma: f64,
    pub eps_tilde: f64,
    pub sigma_star: f64,
    pub sigma_star_floored: bool,
    pub reason: Option<ZeroKeyReason>,
}

impl KeyRateResult {
    /// Key length before flooring at zero; `-inf` if the bound broke down earlier.
    pub fn raw_length(&self) -> f64 {
        self.terms.map(|t| t.raw()).unwrap_or(f64::NEG_INFINITY)
    }

    pub fn leak_ir(&self) -> f64 {
        self.terms.map(|t| t.leak_ir).unwrap_or(0.0)
    }
}

pub fn round_counts_from(n_tot: f64, r: f64) -> RoundCounts {
    RoundCounts::from_total(n_tot, r)
}

/// Key length for given protocol settings and PE statistics. `leak_per_symbol`
/// is the reconciliation leakage per key round; the total charged is `n` times it.
pub fn finite_key_length(
    pp: &ProtocolParams,
    budget: &SecurityBudget,
    stats: &PEStats,
    counts: &RoundCounts,
    leak_per_symbol: f64,
    options: &KeyRateOptions,
) -> Result<KeyRateResult> {
    pp.validate()?;
    budget.validate()?;
    let mut out = KeyRateResult {
        key_length: 0.0,
        rate: 0.0,
        n_tot: pp.n_tot,
        counts: *counts,
        chosen: ChosenParams {
            r: pp.r,
            delta: pp.delta,
            m_range: pp.m_range,
            alpha: pp.alpha,
            d0: pp.d0,
            nu: 0.0,
            xi: 0.0,
            mu_stat: 0.0,
        },
        terms: None,
        log2_big_gamma: 0.0,
        eps_tilde: 0.0,
        sigma_star: 0.0,
        sigma_star_floored: false,
        reason: None,
    };
    if counts.is_degenerate() {
        out.reason = Some(ZeroKeyReason::EmptyRounds);
        return Ok(out);
    }
    let gamma = big_gamma(pp.m_range, pp.transmittance, pp.alpha)?;
    out.log2_big_gamma = gamma.log2();
    out.eps_tilde = epsilon_tilde(counts.n, gamma, options.p_pass);

    let Some(nu_min) = smallest_nu(budget, counts, gamma, pp.m_range) else {
        out.reason = Some(
            if xi_fn(budget, counts, gamma, 0.0, pp.m_range).is_none() {
                ZeroKeyReason::EnergyTestBudgetExhausted
            } else {
                ZeroKeyReason::NoValidNu
            },
        );
        return Ok(out);
    };
    let (nu, xi, mu, sig) = best_nu(pp, budget, stats, counts, gamma, nu_min, options.log_base);
    out.chosen.nu = nu;
    out.chosen.xi = xi;
    out.chosen.mu_stat = mu;
    out.sigma_star = sig.value;
    out.sigma_star_floored = sig.floored;

    let n = counts.n as f64;
    let c = overlap_c(pp.delta, options.overlap)?;
    let terms = KeyTerms {
        uncertainty: n * (-c.log2()),
        max_entropy: n * log2_gamma(pp.d0 + mu),
        leak_ir: n * leak_per_symbol,
        correction: -(budget.eps_1 * budget.eps_1 * budget.eps_c).log2() - 2.0,
    };
    let raw = terms.raw();
    out.terms = Some(terms);
    if raw > 0.0 {
        out.key_length = raw;
        out.rate = raw / pp.n_tot;
    } else {
        out.reason = Some(ZeroKeyReason::NonPositiveLength);
    }
    Ok(out)
}

/// Any `nu` with positive `xi` gives a valid bound; pick the one that
/// minimises the margin, searching `ln(nu / nu_min)` by golden section.
fn best_nu(
    pp: &ProtocolParams,
    budget: &SecurityBudget,
    stats: &PEStats,
    counts: &RoundCounts,
    gamma: TailBound,
    nu_min: f64,
    base: LogBase,
) -> (f64, f64, f64, crate::bounds::SigmaStar) {
    let eval = |nu: f64| {
        let xi = xi_fn(budget, counts, gamma, nu, pp.m_range).unwrap_or(0.0);
        let sig = sigma_star(counts, stats, nu, pp.delta);
        let mu = if xi > 0.0 {
            mu_stat(counts, sig.value, xi, pp.m_over_delta(), base)
        } else {
            f64::INFINITY
        };
        (nu, xi, mu, sig)
    };
    let u_max = ((pp.m_range * pp.m_range) / nu_min).ln().clamp(0.0, 10.0);
    let at = |u: f64| eval(nu_min * u.exp());
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, u_max);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = at(x1);
    let mut f2 = at(x2);
    for _ in 0..60 {
        if f1.2 <= f2.2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = at(x2);
        }
        if b - a < 1e-9 {
            break;
        }
    }
    let mut best = if f1.2 <= f2.2 { f1 } else { f2 };
    for cand in [at(0.0), at(u_max)] {
        if cand.2 < best.2 {
            best = cand;
        }
    }
    best
}
