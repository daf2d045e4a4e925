//! Two-mode Gaussian states: the squeezed source, the lossy/noisy channel and
//! the entropies that feed the key-rate formulas.
//!
//! Covariance matrices are stored with vacuum variance 1. Homodyne outcomes
//! are reported with vacuum variance [`VACUUM_OUTCOME_VARIANCE`], so an
//! outcome variance is `VACUUM_OUTCOME_VARIANCE * gamma[i][i]`. Everything
//! that touches binned outcomes (widths, ranges, thresholds, differential
//! entropies) works in outcome units.

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

use crate::error::{invalid, Error, Result};

/// Outcome variance of a vacuum quadrature.
pub const VACUUM_OUTCOME_VARIANCE: f64 = 0.5;

/// Symplectic eigenvalues this far below 1 are clipped to 1; further below is an error.
pub const SYMPLECTIC_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    Q,
    P,
}

impl Quadrature {
    fn index(self) -> usize {
        match self {
            Quadrature::Q => 0,
            Quadrature::P => 1,
        }
    }
}

/// Covariance matrix of a two-mode state, split into 2x2 blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoModeCovariance {
    pub gamma_a: Matrix2<f64>,
    pub gamma_b: Matrix2<f64>,
    /// Rows index Alice's quadratures, columns Bob's.
    pub gamma_cor: Matrix2<f64>,
}

impl TwoModeCovariance {
    pub fn vacuum() -> Self {
        Self {
            gamma_a: Matrix2::identity(),
            gamma_b: Matrix2::identity(),
            gamma_cor: Matrix2::zeros(),
        }
    }

    pub fn full(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.gamma_a);
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(&self.gamma_b);
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(&self.gamma_cor);
        m.fixed_view_mut::<2, 2>(2, 0)
            .copy_from(&self.gamma_cor.transpose());
        m
    }

    pub fn from_full(m: &Matrix4<f64>) -> Result<Self> {
        let asym = (m - m.transpose()).abs().max();
        if asym > 1e-12 * m.abs().max().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self {
            gamma_a: m.fixed_view::<2, 2>(0, 0).into(),
            gamma_b: m.fixed_view::<2, 2>(2, 2).into(),
            gamma_cor: m.fixed_view::<2, 2>(0, 2).into(),
        })
    }

    fn block(&self, mode: Mode) -> &Matrix2<f64> {
        match mode {
            Mode::A => &self.gamma_a,
            Mode::B => &self.gamma_b,
        }
    }

    /// Outcome variance of a homodyne measurement of `quad` on `mode`.
    pub fn outcome_variance(&self, mode: Mode, quad: Quadrature) -> f64 {
        let i = quad.index();
        VACUUM_OUTCOME_VARIANCE * self.block(mode)[(i, i)]
    }

    /// Outcome covariance between Alice's and Bob's `quad` measurements.
    pub fn outcome_covariance(&self, quad: Quadrature) -> f64 {
        let i = quad.index();
        VACUUM_OUTCOME_VARIANCE * self.gamma_cor[(i, i)]
    }

    /// Checks that every symplectic eigenvalue is at least 1.
    pub fn is_physical(&self) -> bool {
        symplectic_spectrum(self)
            .map(|(lo, _)| lo >= 1.0 - SYMPLECTIC_TOLERANCE)
            .unwrap_or(false)
    }
}

/// Source and channel description. Squeezing values are in dB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub lambda_sq: f64,
    pub lambda_asq: f64,
    /// Loss on Alice's arm.
    pub eta_a: f64,
    /// Loss on Bob's arm.
    pub eta_b: f64,
    /// Excess noise in vacuum units.
    pub eta_ex: f64,
    /// Reconciliation efficiency.
    pub beta: f64,
}

impl ChannelParams {
    pub fn new(
        lambda_sq: f64,
        lambda_asq: f64,
        eta_a: f64,
        eta_b: f64,
        eta_ex: f64,
        beta: f64,
    ) -> Result<Self> {
        let p = Self {
            lambda_sq,
            lambda_asq,
            eta_a,
            eta_b,
            eta_ex,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    /// 11 dB squeezing, 16 dB antisqueezing, lossless Alice, no excess noise.
    pub fn reference(eta_b: f64, beta: f64) -> Self {
        Self {
            lambda_sq: 11.0,
            lambda_asq: 16.0,
            eta_a: 0.0,
            eta_b,
            eta_ex: 0.0,
            beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_sq", self.lambda_sq), ("lambda_asq", self.lambda_asq)] {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(name, format!("{v} must be a finite non-negative dB value")));
            }
        }
        if self.lambda_asq < self.lambda_sq {
            return Err(Error::AntisqueezingBelowSqueezing {
                sq: self.lambda_sq,
                asq: self.lambda_asq,
            });
        }
        for (name, v) in [("eta_a", self.eta_a), ("eta_b", self.eta_b)] {
            if !(0.0..1.0).contains(&v) {
                return Err(invalid(name, format!("{v} outside [0, 1)")));
            }
        }
        if !self.eta_ex.is_finite() || self.eta_ex < 0.0 {
            return Err(invalid("eta_ex", format!("{} must be non-negative", self.eta_ex)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(invalid("beta", format!("{} outside (0, 1]", self.beta)));
        }
        Ok(())
    }

    /// State shared after the channel.
    pub fn state(&self) -> Result<TwoModeCovariance> {
        self.validate()?;
        let tmss = build_tmss(self.lambda_sq, self.lambda_asq)?;
        Ok(apply_channel(&tmss, self))
    }
}

/// Source state from squeezing and antisqueezing in dB.
pub fn build_tmss(lambda_sq: f64, lambda_asq: f64) -> Result<TwoModeCovariance> {
    if !lambda_sq.is_finite() || !lambda_asq.is_finite() || lambda_sq < 0.0 {
        return Err(invalid("lambda_sq", "squeezing values must be finite and non-negative"));
    }
    if lambda_asq < lambda_sq {
        return Err(Error::AntisqueezingBelowSqueezing {
            sq: lambda_sq,
            asq: lambda_asq,
        });
    }
    let a = 0.5 * (10f64.powf(lambda_sq / 10.0) + 10f64.powf(lambda_asq / 10.0));
    let b = 10f64.powf((lambda_asq - lambda_sq) / 20.0);
    // (a - b)(a + b) keeps precision when a and b are close.
    let c = ((a - b) * (a + b)).max(0.0).sqrt();
    Ok(TwoModeCovariance {
        gamma_a: Matrix2::identity() * a,
        gamma_b: Matrix2::identity() * a,
        gamma_cor: Matrix2::new(c, 0.0, 0.0, -c),
    })
}

/// Loss on both arms, then excess noise on Bob, all in vacuum units.
pub fn apply_channel(cov: &TwoModeCovariance, ch: &ChannelParams) -> TwoModeCovariance {
    let ta = 1.0 - ch.eta_a;
    let tb = 1.0 - ch.eta_b;
    TwoModeCovariance {
        gamma_a: cov.gamma_a * ta + Matrix2::identity() * ch.eta_a,
        gamma_b: cov.gamma_b * tb + Matrix2::identity() * (ch.eta_b + ch.eta_ex * tb),
        gamma_cor: cov.gamma_cor * (ta * tb).sqrt(),
    }
}

/// Factors that rescale Alice's outcomes onto Bob's, per quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub t_q: f64,
    pub t_p: f64,
}

impl Scaling {
    pub fn get(&self, quad: Quadrature) -> f64 {
        match quad {
            Quadrature::Q => self.t_q,
            Quadrature::P => self.t_p,
        }
    }
}

/// Ratio of Bob's to Alice's standard deviation, signed like the correlation
/// so that scaled outcomes are positively correlated.
pub fn scaling_factors(cov: &TwoModeCovariance) -> Result<Scaling> {
    let one = |quad: Quadrature| -> Result<f64> {
        let va = cov.outcome_variance(Mode::A, quad);
        let vb = cov.outcome_variance(Mode::B, quad);
        if va <= 0.0 {
            return Err(Error::NonPositiveVariance(va));
        }
        if vb <= 0.0 {
            return Err(Error::NonPositiveVariance(vb));
        }
        let sign = if cov.outcome_covariance(quad) < 0.0 { -1.0 } else { 1.0 };
        Ok(sign * (vb / va).sqrt())
    };
    Ok(Scaling {
        t_q: one(Quadrature::Q)?,
        t_p: one(Quadrature::P)?,
    })
}

fn omega4() -> Matrix4<f64> {
    let mut w = Matrix4::zeros();
    w[(0, 1)] = 1.0;
    w[(1, 0)] = -1.0;
    w[(2, 3)] = 1.0;
    w[(3, 2)] = -1.0;
    w
}

/// Symplectic eigenvalues `(smaller, larger)` from the spectrum of `Omega * Gamma`.
pub fn symplectic_spectrum(cov: &TwoModeCovariance) -> Result<(f64, f64)> {
    let g = cov.full();
    let asym = (g - g.transpose()).abs().max();
    if asym > 1e-12 * g.abs().max().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let ev = (omega4() * g).complex_eigenvalues();
    let mut nu: Vec<f64> = ev.iter().map(|z| z.im.abs()).collect();
    nu.sort_by(|a, b| a.total_cmp(b));
    // The spectrum is {±i nu1, ±i nu2}; average each pair.
    Ok((0.5 * (nu[0] + nu[1]), 0.5 * (nu[2] + nu[3])))
}

/// Symplectic eigenvalue of a single mode.
pub fn single_mode_nu(block: &Matrix2<f64>) -> f64 {
    block.determinant().max(0.0).sqrt()
}

/// Thermal entropy in bits of a mode with symplectic eigenvalue `nu`.
pub fn g_entropy(nu: f64) -> Result<f64> {
    if !nu.is_finite() {
        return Err(Error::Unphysical(nu));
    }
    if nu < 1.0 - SYMPLECTIC_TOLERANCE {
        return Err(Error::Unphysical(nu));
    }
    let x = (nu - 1.0) / 2.0;
    if x <= 1e-300 {
        return Ok(0.0);
    }
    // (x+1) log(x+1) - x log x, with the first term expanded for tiny x.
    let first = if x < 1e-8 {
        x * (1.0 + 0.5 * x) / std::f64::consts::LN_2
    } else {
        (x + 1.0) * (x + 1.0).log2()
    };
    Ok(first - x * x.log2())
}

/// Von Neumann entropy in bits of the two-mode state.
pub fn vn_entropy(cov: &TwoModeCovariance) -> Result<f64> {
    let (lo, hi) = symplectic_spectrum(cov)?;
    Ok(g_entropy(lo)? + g_entropy(hi)?)
}

/// Covariance of the unmeasured mode after homodyning `quad` on `measured`.
pub fn homodyne_condition(
    cov: &TwoModeCovariance,
    measured: Mode,
    quad: Quadrature,
) -> Matrix2<f64> {
    let (rest, meas, cross) = match measured {
        Mode::B => (cov.gamma_a, cov.gamma_b, cov.gamma_cor),
        Mode::A => (cov.gamma_b, cov.gamma_a, cov.gamma_cor.transpose()),
    };
    let i = quad.index();
    let v = meas[(i, i)];
    if v <= 0.0 {
        return rest;
    }
    let col = cross.column(i);
    rest - col * col.transpose() / v
}

/// Differential entropy in bits of a Gaussian with the given outcome variance.
pub fn gaussian_entropy(outcome_variance: f64) -> f64 {
    0.5 * (2.0 * PI * E * outcome_variance).log2()
}

/// Entropies used by the asymptotic rates, in bits and outcome units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadEntropies {
    pub h_qb: f64,
    pub h_pb: f64,
    pub h_pb_given_pa: f64,
    pub h_pa_given_pb: f64,
    /// Conditioned on Alice's whole mode.
    pub h_pb_given_a: f64,
    /// Conditioned on a purification of the shared state.
    pub h_qb_given_e: f64,
    pub h_pb_given_e: f64,
}

pub fn quad_entropies(cov: &TwoModeCovariance) -> Result<QuadEntropies> {
    let vqb = cov.outcome_variance(Mode::B, Quadrature::Q);
    let vpb = cov.outcome_variance(Mode::B, Quadrature::P);
    let vpa = cov.outcome_variance(Mode::A, Quadrature::P);
    let cp = cov.outcome_covariance(Quadrature::P);
    for v in [vqb, vpb, vpa] {
        if v <= 0.0 {
            return Err(Error::NonPositiveVariance(v));
        }
    }
    let h_qb = gaussian_entropy(vqb);
    let h_pb = gaussian_entropy(vpb);
    let h_pb_given_pa = gaussian_entropy(vpb - cp * cp / vpa);
    let h_pa_given_pb = gaussian_entropy(vpa - cp * cp / vpb);

    let s_a = g_entropy(single_mode_nu(&cov.gamma_a))?;
    let s_ab = vn_entropy(cov)?;
    let s_a_qb = g_entropy(single_mode_nu(&homodyne_condition(cov, Mode::B, Quadrature::Q)))?;
    let s_a_pb = g_entropy(single_mode_nu(&homodyne_condition(cov, Mode::B, Quadrature::P)))?;

    Ok(QuadEntropies {
        h_qb,
        h_pb,
        h_pb_given_pa,
        h_pa_given_pb,
        h_pb_given_a: h_pb + s_a_pb - s_a,
        h_qb_given_e: h_qb + s_a_qb - s_ab,
        h_pb_given_e: h_pb + s_a_pb - s_ab,
    })
}
