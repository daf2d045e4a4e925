use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Mutex;

use super::finite::{finite_key_length, round_counts_from, KeyRateOptions, KeyRateResult};
use crate::bounds::{
    alpha_for, choose_m_range, energy_test_sigma, PEStats, ProtocolParams, RoundCounts,
    SecurityBudget,
};
use crate::discretization::Binning;
use crate::error::{invalid, Result};
use crate::gaussian::{scaling_factors, ChannelParams, Quadrature, Scaling, TwoModeCovariance};
use crate::pmf::{joint_pmf_gaussian, leak_per_symbol, pe_forecast, BivariateOutcome, PmfSummary, DEFAULT_TRUNCATION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub transmittance: f64,
    pub r_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub refine_rounds: usize,
    pub options: KeyRateOptions,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let r_grid = (1..=49).map(|i| i as f64 * 0.02).collect();
        let delta_grid = (0..16).map(|i| 0.01 * 100f64.powf(i as f64 / 15.0)).collect();
        Self {
            transmittance: 0.99,
            r_grid,
            delta_grid,
            refine_rounds: 3,
            options: KeyRateOptions::default(),
        }
    }
}

/// Binned-model statistics for one bin width. They do not depend on `M` as
/// long as `M` is a multiple of the bin width and covers the integration window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInputs {
    pub delta: f64,
    /// `M` the tables were built with; any larger multiple of `delta` gives the same numbers.
    pub m_reference: f64,
    pub leak_per_symbol: f64,
    pub key: PmfSummary,
    pub pe: PmfSummary,
    pub pe_dist: BivariateOutcome,
}

/// The shared state of a channel plus a per-bin-width cache of its binned statistics.
pub struct ChannelModel {
    pub channel: ChannelParams,
    pub cov: TwoModeCovariance,
    pub scaling: Scaling,
    cache: Mutex<BTreeMap<u64, ModelInputs>>,
}

impl ChannelModel {
    pub fn new(channel: &ChannelParams) -> Result<Self> {
        let cov = channel.state()?;
        let scaling = scaling_factors(&cov)?;
        Ok(Self {
            channel: *channel,
            cov,
            scaling,
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    /// Energy-test port deviation for the larger of Bob's two quadrature variances.
    pub fn sigma_t(&self, transmittance: f64) -> f64 {
        let vb = self.cov.gamma_b[(0, 0)].max(self.cov.gamma_b[(1, 1)]);
        energy_test_sigma(vb, transmittance)
    }

    pub fn outcome(&self, quad: Quadrature) -> BivariateOutcome {
        BivariateOutcome::from_state(&self.cov, &self.scaling, quad)
    }

    fn reference_range(&self, delta: f64) -> f64 {
        let s = [Quadrature::Q, Quadrature::P]
            .iter()
            .map(|&q| {
                let d = self.outcome(q);
                d.var_x.max(d.var_y).sqrt()
            })
            .fold(0.0, f64::max);
        ((DEFAULT_TRUNCATION + 2.0) * s / delta).ceil().max(1.0) * delta
    }

    /// Statistics at bin width `delta` for a range `m_range` (a multiple of `delta`).
    pub fn inputs(&self, delta: f64, m_range: f64) -> Result<ModelInputs> {
        let m_ref = self.reference_range(delta);
        let steps = m_range / delta;
        if m_range + 1e-9 * delta < m_ref || (steps - steps.round()).abs() > 1e-6 {
            return self.compute(delta, m_range);
        }
        let key = delta.to_bits();
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(*hit);
        }
        let v = self.compute(delta, m_ref)?;
        self.cache.lock().expect("cache poisoned").insert(key, v);
        Ok(v)
    }

    fn compute(&self, delta: f64, m_range: f64) -> Result<ModelInputs> {
        let binning = Binning::new(m_range, delta)?;
        let dq = self.outcome(Quadrature::Q);
        let dp = self.outcome(Quadrature::P);
        let key = joint_pmf_gaussian(&dq, &binning, DEFAULT_TRUNCATION)?.summary();
        let pe = if dp == dq {
            key
        } else {
            joint_pmf_gaussian(&dp, &binning, DEFAULT_TRUNCATION)?.summary()
        };
        Ok(ModelInputs {
            delta,
            m_reference: m_range,
            leak_per_symbol: leak_per_symbol(&key, self.channel.beta),
            key,
            pe,
            pe_dist: dp,
        })
    }
}

/// Calibrated settings for one `(r, delta)` candidate.
pub fn calibrate(
    model: &ChannelModel,
    budget: &SecurityBudget,
    n_tot: f64,
    r: f64,
    delta: f64,
    settings: &OptimizerSettings,
) -> Result<(ProtocolParams, RoundCounts, PEStats, f64)> {
    let t = settings.transmittance;
    let counts = round_counts_from(n_tot, r);
    let alpha = alpha_for(model.sigma_t(t), n_tot, budget.eps_t)?.alpha;
    let m_range = choose_m_range(t, alpha, counts.n.max(1), budget.eps_2, delta)?;
    let inputs = model.inputs(delta, m_range)?;
    let fc = pe_forecast(
        &inputs.pe,
        &inputs.pe_dist,
        delta,
        settings.options.pe_margin_sigmas,
        counts.k,
    );
    let pp = ProtocolParams {
        n_tot,
        r,
        delta,
        m_range,
        alpha,
        transmittance: t,
        d0: if fc.d0.is_finite() { fc.d0 } else { 0.0 },
    };
    Ok((pp, counts, fc.stats, inputs.leak_per_symbol))
}

/// Key length at one `(r, delta)` candidate with model-predicted statistics.
pub fn evaluate_point(
    model: &ChannelModel,
    budget: &SecurityBudget,
    n_tot: f64,
    r: f64,
    delta: f64,
    settings: &OptimizerSettings,
) -> Result<KeyRateResult> {
    let (pp, counts, stats, leak) = calibrate(model, budget, n_tot, r, delta, settings)?;
    finite_key_length(&pp, budget, &stats, &counts, leak, &settings.options)
}

fn better(a: &KeyRateResult, b: &KeyRateResult) -> bool {
    let (ra, rb) = (a.raw_length(), b.raw_length());
    if ra != rb {
        return ra > rb;
    }
    (a.chosen.r, a.chosen.delta) < (b.chosen.r, b.chosen.delta)
}

fn golden_max(lo: f64, hi: f64, iters: usize, mut f: impl FnMut(f64) -> f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
}

/// Best key rate over `(r, delta)` for a channel.
pub fn optimize_keyrate(
    ch: &ChannelParams,
    budget: &SecurityBudget,
    n_tot: f64,
    settings: &OptimizerSettings,
) -> Result<KeyRateResult> {
    optimize_with_model(&ChannelModel::new(ch)?, budget, n_tot, settings)
}

pub fn optimize_with_model(
    model: &ChannelModel,
    budget: &SecurityBudget,
    n_tot: f64,
    settings: &OptimizerSettings,
) -> Result<KeyRateResult> {
    budget.validate()?;
    if settings.r_grid.is_empty() || settings.delta_grid.is_empty() {
        return Err(invalid("grid", "optimizer grids must be non-empty"));
    }
    let eval = |r: f64, delta: f64| evaluate_point(model, budget, n_tot, r, delta, settings).ok();

    let mut best: Option<KeyRateResult> = None;
    let offer = |cand: Option<KeyRateResult>, best: &mut Option<KeyRateResult>| {
        if let Some(c) = cand {
            if best.as_ref().map_or(true, |b| better(&c, b)) {
                *best = Some(c);
            }
        }
    };

    for &delta in &settings.delta_grid {
        // Fill the cache once per width before fanning out over r.
        let _ = eval(settings.r_grid[0], delta);
        let row: Vec<Option<KeyRateResult>> = settings
            .r_grid
            .par_iter()
            .map(|&r| eval(r, delta))
            .collect();
        for c in row {
            offer(c, &mut best);
        }
    }

    let Some(mut cur) = best else {
        return Err(invalid("grid", "no candidate could be evaluated"));
    };

    let dr = grid_step(&settings.r_grid).unwrap_or(0.02);
    let ratio = grid_ratio(&settings.delta_grid).unwrap_or(1.36);
    let (dmin, dmax) = bounds(&settings.delta_grid);
    for round in 0..settings.refine_rounds {
        let shrink = 0.5f64.powi(round as i32);

        let delta = cur.chosen.delta;
        let (lo, hi) = ((cur.chosen.r - dr * shrink).max(1e-4), (cur.chosen.r + dr * shrink).min(1.0 - 1e-4));
        let mut local = Some(cur);
        golden_max(lo, hi, 24, |r| {
            let c = eval(r, delta);
            let v = c.as_ref().map_or(f64::NEG_INFINITY, |c| c.raw_length());
            offer(c, &mut local);
            v
        });
        cur = local.expect("seeded");

        let r = cur.chosen.r;
        let ld = cur.chosen.delta.ln();
        let span = ratio.ln() * shrink;
        let (lo, hi) = ((ld - span).max(dmin.ln()), (ld + span).min(dmax.ln()));
        let mut local = Some(cur);
        if hi > lo {
            golden_max(lo, hi, 5, |x| {
                let c = eval(r, x.exp());
                let v = c.as_ref().map_or(f64::NEG_INFINITY, |c| c.raw_length());
                offer(c, &mut local);
                v
            });
        }
        cur = local.expect("seeded");
    }
    Ok(cur)
}

fn grid_step(g: &[f64]) -> Option<f64> {
    (g.len() > 1).then(|| (g[g.len() - 1] - g[0]) / (g.len() - 1) as f64)
}

fn grid_ratio(g: &[f64]) -> Option<f64> {
    (g.len() > 1 && g[0] > 0.0).then(|| (g[g.len() - 1] / g[0]).powf(1.0 / (g.len() - 1) as f64))
}

fn bounds(g: &[f64]) -> (f64, f64) {
    g.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Key length for given settings with the leakage computed from the channel model.
pub fn finite_key_from_channel(
    ch: &ChannelParams,
    pp: &ProtocolParams,
    budget: &SecurityBudget,
    stats: &PEStats,
    counts: &RoundCounts,
    options: &KeyRateOptions,
) -> Result<KeyRateResult> {
    let model = ChannelModel::new(ch)?;
    let inputs = model.inputs(pp.delta, pp.m_range)?;
    finite_key_length(pp, budget, stats, counts, inputs.leak_per_symbol, options)
}
