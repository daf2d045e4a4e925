use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Security parameters. `eps_s` is the secrecy target, `eps_c` correctness,
/// `eps_1` the smoothing share, `eps_2` the energy-test share and `eps_t`
/// the honest abort probability of the energy test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityBudget {
    pub eps_s: f64,
    pub eps_c: f64,
    pub eps_1: f64,
    pub eps_2: f64,
    pub eps_t: f64,
}

impl Default for SecurityBudget {
    fn default() -> Self {
        Self::with_targets(1e-9, 1e-9)
    }
}

impl SecurityBudget {
    /// `eps_1 = eps_s / 2`, `eps_2 = eps_s / 10`, `eps_t = 1e-9`.
    pub fn with_targets(eps_s: f64, eps_c: f64) -> Self {
        Self {
            eps_s,
            eps_c,
            eps_1: eps_s / 2.0,
            eps_2: eps_s / 10.0,
            eps_t: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_s", self.eps_s),
            ("eps_c", self.eps_c),
            ("eps_1", self.eps_1),
            ("eps_2", self.eps_2),
            ("eps_t", self.eps_t),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(name, format!("{v} outside (0, 1)")));
            }
        }
        if self.eps_1 + self.eps_2 >= self.eps_s {
            return Err(invalid("eps_1", "eps_1 + eps_2 must stay below eps_s"));
        }
        Ok(())
    }
}

/// Rounds used for the key (`n`), phase PE (`k`) and each party's
/// energy-moment estimate (`m`). `n_cap = n + k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundCounts {
    pub n: u64,
    pub k: u64,
    pub m: u64,
    pub n_cap: u64,
}

impl RoundCounts {
    /// Expected allocation when each party picks the phase basis with probability `r`.
    pub fn from_total(n_tot: f64, r: f64) -> Self {
        let floor = |x: f64| (x * (1.0 + 1e-12)).floor().max(0.0) as u64;
        let n = floor((1.0 - r) * (1.0 - r) * n_tot);
        let k = floor(r * r * n_tot);
        let m = floor(r * n_tot);
        Self {
            n,
            k,
            m,
            n_cap: n + k,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.n == 0 || self.k == 0 || self.m == 0
    }
}

/// Protocol settings. `m_range` and `alpha` are in outcome units;
/// `d0` is the PE abort threshold on the mean index distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n_tot: f64,
    pub r: f64,
    pub delta: f64,
    pub m_range: f64,
    pub alpha: f64,
    pub transmittance: f64,
    pub d0: f64,
}

impl ProtocolParams {
    pub fn counts(&self) -> RoundCounts {
        RoundCounts::from_total(self.n_tot, self.r)
    }

    pub fn m_over_delta(&self) -> f64 {
        self.m_range / self.delta
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_tot >= 1.0 && self.n_tot.is_finite()) {
            return Err(invalid("n_tot", format!("{} must be at least 1", self.n_tot)));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(invalid("r", format!("{} outside (0, 1)", self.r)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta", format!("{} must be positive", self.delta)));
        }
        if !(self.m_range >= self.delta && self.m_range.is_finite()) {
            return Err(invalid("m_range", format!("{} must be at least delta", self.m_range)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("{} must be non-negative", self.alpha)));
        }
        if !(self.transmittance > 0.5 && self.transmittance < 1.0) {
            return Err(invalid(
                "transmittance",
                format!("{} outside (1/2, 1)", self.transmittance),
            ));
        }
        if !(self.d0 >= 0.0 && self.d0.is_finite()) {
            return Err(invalid("d0", format!("{} must be non-negative", self.d0)));
        }
        Ok(())
    }
}

/// Observed PE statistics: mean index distance on the phase rounds, its
/// variance, and the second moments of each party's phase indices about the
/// range centre.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PEStats {
    pub d_pe: f64,
    pub v_d_pe: f64,
    pub v_ya_pe: f64,
    pub v_yb_pe: f64,
}

/// Base of the logarithm inside the statistical correction term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    Two,
    E,
}

impl LogBase {
    pub fn log_inv(&self, xi: f64) -> f64 {
        match self {
            LogBase::Two => -xi.log2(),
            LogBase::E => -xi.ln(),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "2" => Ok(LogBase::Two),
            "e" => Ok(LogBase::E),
            other => Err(format!("unknown log base `{other}` (expected 2 or e)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_at_tenth() {
        let c = RoundCounts::from_total(1e9, 0.1);
        assert_eq!((c.n, c.k, c.m), (810_000_000, 10_000_000, 100_000_000));
        assert_eq!(c.n_cap, 820_000_000);
    }

    #[test]
    fn tiny_totals_are_degenerate() {
        assert!(RoundCounts::from_total(10.0, 0.1).is_degenerate());
    }

    #[test]
    fn default_budget_split() {
        let b = SecurityBudget::default();
        assert_eq!(b.eps_1, 5e-10);
        assert_eq!(b.eps_2, 1e-10);
        b.validate().unwrap();
    }
}
