//! Monte Carlo runs of the honest protocol on sampled Gaussian data, and
//! empirical checks of the tail bounds.
//!
//! Rounds are processed in blocks; block `b` draws from its own ChaCha
//! stream `b` under the master seed and all aggregates are integer sums, so
//! a run does not depend on how blocks are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{abort_bound, big_gamma, bernstein_bound, mu_test, serfling_bound, PEStats, ProtocolParams};
use crate::discretization::Binning;
use crate::error::{invalid, Result};
use crate::gaussian::{scaling_factors, ChannelParams, Mode, Quadrature, TwoModeCovariance, VACUUM_OUTCOME_VARIANCE};
use crate::keyrate::ChannelModel;

pub const DEFAULT_BLOCK: u64 = 1_000_000;

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub alice_basis: Quadrature,
    pub bob_basis: Quadrature,
    pub x_a: f64,
    pub x_b: f64,
    pub idx_a: u32,
    pub idx_b: u32,
    pub q_t1: f64,
    pub p_t2: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisCounts {
    pub qq: u64,
    pub qp: u64,
    pub pq: u64,
    pub pp: u64,
}

impl BasisCounts {
    pub fn total(&self) -> u64 {
        self.qq + self.qp + self.pq + self.pp
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub seed: u64,
    pub n_tot: u64,
    pub basis_counts: BasisCounts,
    /// Statistics over the rounds where both chose the phase quadrature.
    pub pe_stats: PEStats,
    /// Mean index distance over the key rounds.
    pub key_distance: f64,
    pub energy_failures: u64,
    pub max_test_abs: f64,
    pub energy_aborted: bool,
    pub pe_aborted: bool,
    pub aborted: bool,
    /// The first rounds in order, up to the requested count.
    pub rounds: Vec<RoundRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub block_size: u64,
    pub keep_rounds: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            block_size: DEFAULT_BLOCK,
            keep_rounds: 0,
        }
    }
}

/// Sampling parameters of one quadrature: Bob's deviation, the regression of
/// Alice on Bob and the residual deviation.
#[derive(Clone, Copy, Debug)]
struct PairSampler {
    sa: f64,
    sb: f64,
    slope: f64,
    resid: f64,
}

impl PairSampler {
    fn new(cov: &TwoModeCovariance, quad: Quadrature) -> Self {
        let va = cov.outcome_variance(Mode::A, quad);
        let vb = cov.outcome_variance(Mode::B, quad);
        let c = cov.outcome_covariance(quad);
        let slope = c / vb;
        Self {
            sa: va.sqrt(),
            sb: vb.sqrt(),
            slope,
            resid: (va - c * slope).max(0.0).sqrt(),
        }
    }

    fn correlated(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let xb = self.sb * normal(rng);
        (self.slope * xb + self.resid * normal(rng), xb)
    }

    fn independent(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        (self.sa * normal(rng), self.sb * normal(rng))
    }
}

#[derive(Clone, Debug, Default)]
struct Agg {
    counts: BasisCounts,
    pe_abs: u64,
    pe_sq: u128,
    /// Sums of `(2 idx - K)^2`, i.e. four times the squared distance from the centre.
    pe_m2a: u128,
    pe_m2b: u128,
    key_abs: u64,
    failures: u64,
    max_abs: f64,
    rounds: Vec<RoundRecord>,
}

impl Agg {
    fn merge(mut self, o: Agg, keep: usize) -> Agg {
        self.counts.qq += o.counts.qq;
        self.counts.qp += o.counts.qp;
        self.counts.pq += o.counts.pq;
        self.counts.pp += o.counts.pp;
        self.pe_abs += o.pe_abs;
        self.pe_sq += o.pe_sq;
        self.pe_m2a += o.pe_m2a;
        self.pe_m2b += o.pe_m2b;
        self.key_abs += o.key_abs;
        self.failures += o.failures;
        self.max_abs = self.max_abs.max(o.max_abs);
        let room = keep.saturating_sub(self.rounds.len());
        self.rounds.extend(o.rounds.into_iter().take(room));
        self
    }
}

pub fn run_protocol(ch: &ChannelParams, pp: &ProtocolParams, seed: u64) -> Result<SimRecord> {
    run_protocol_with(ch, pp, seed, &SimOptions::default())
}

pub fn run_protocol_with(
    ch: &ChannelParams,
    pp: &ProtocolParams,
    seed: u64,
    opts: &SimOptions,
) -> Result<SimRecord> {
    pp.validate()?;
    if opts.block_size == 0 {
        return Err(invalid("block_size", "must be positive"));
    }
    let model = ChannelModel::new(ch)?;
    let cov = model.cov;
    let scaling = scaling_factors(&cov)?;
    let binning = Binning::new(pp.m_range, pp.delta)?;
    let sampler_q = PairSampler::new(&cov, Quadrature::Q);
    let sampler_p = PairSampler::new(&cov, Quadrature::P);
    let sigma_t = model.sigma_t(pp.transmittance);
    let n_tot = pp.n_tot.round() as u64;
    let k2 = binning.bins as i64;
    let nblocks = n_tot.div_ceil(opts.block_size);

    let run_block = |b: u64| -> Agg {
        let mut rng = block_rng(seed, b);
        let start = b * opts.block_size;
        let len = opts.block_size.min(n_tot - start);
        let mut agg = Agg::default();
        let keep = if start < opts.keep_rounds as u64 {
            (opts.keep_rounds as u64 - start).min(len) as usize
        } else {
            0
        };
        agg.rounds.reserve(keep);
        for i in 0..len {
            let a_phase = rng.random::<f64>() < pp.r;
            let b_phase = rng.random::<f64>() < pp.r;
            let (qa, qb) = match (a_phase, b_phase) {
                (false, false) => sampler_q.correlated(&mut rng),
                (true, true) => sampler_p.correlated(&mut rng),
                (false, true) => (sampler_q.independent(&mut rng).0, sampler_p.independent(&mut rng).1),
                (true, false) => (sampler_p.independent(&mut rng).0, sampler_q.independent(&mut rng).1),
            };
            let qt1 = sigma_t * normal(&mut rng);
            let pt2 = sigma_t * normal(&mut rng);
            let a_quad = if a_phase { Quadrature::P } else { Quadrature::Q };
            let b_quad = if b_phase { Quadrature::P } else { Quadrature::Q };
            let ia = binning.bin_index(scaling.get(a_quad) * qa);
            let ib = binning.bin_index(qb);
            let m = qt1.abs().max(pt2.abs());
            agg.max_abs = agg.max_abs.max(m);
            if m > pp.alpha {
                agg.failures += 1;
            }
            let d = (ia as i64 - ib as i64).unsigned_abs();
            match (a_phase, b_phase) {
                (false, false) => {
                    agg.counts.qq += 1;
                    agg.key_abs += d;
                }
                (true, true) => {
                    agg.counts.pp += 1;
                    agg.pe_abs += d;
                    agg.pe_sq += (d as u128) * (d as u128);
                    let ca = (2 * ia as i64 - k2).unsigned_abs() as u128;
                    let cb = (2 * ib as i64 - k2).unsigned_abs() as u128;
                    agg.pe_m2a += ca * ca;
                    agg.pe_m2b += cb * cb;
                }
                (false, true) => agg.counts.qp += 1,
                (true, false) => agg.counts.pq += 1,
            }
            if (i as usize) < keep {
                agg.rounds.push(RoundRecord {
                    alice_basis: a_quad,
                    bob_basis: b_quad,
                    x_a: qa,
                    x_b: qb,
                    idx_a: ia,
                    idx_b: ib,
                    q_t1: qt1,
                    p_t2: pt2,
                });
            }
        }
        agg
    };

    let keep = opts.keep_rounds;
    let parts: Vec<Agg> = (0..nblocks).into_par_iter().map(run_block).collect();
    let agg = parts
        .into_iter()
        .fold(Agg::default(), |acc, p| acc.merge(p, keep));

    let k = agg.counts.pp;
    let kf = k.max(1) as f64;
    let pe_stats = PEStats {
        d_pe: if k == 0 { 0.0 } else { agg.pe_abs as f64 / kf },
        v_d_pe: if k == 0 { 0.0 } else { agg.pe_sq as f64 / kf },
        v_ya_pe: if k == 0 { 0.0 } else { agg.pe_m2a as f64 / (4.0 * kf) },
        v_yb_pe: if k == 0 { 0.0 } else { agg.pe_m2b as f64 / (4.0 * kf) },
    };
    let key_distance = if agg.counts.qq == 0 {
        0.0
    } else {
        agg.key_abs as f64 / agg.counts.qq as f64
    };
    let energy_aborted = agg.failures > 0;
    let pe_aborted = k > 0 && pe_stats.d_pe > pp.d0;
    Ok(SimRecord {
        seed,
        n_tot,
        basis_counts: agg.counts,
        pe_stats,
        key_distance,
        energy_failures: agg.failures,
        max_test_abs: agg.max_abs,
        energy_aborted,
        pe_aborted,
        aborted: energy_aborted || pe_aborted,
        rounds: agg.rounds,
    })
}

/// A bound compared with an observed frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: f64,
    pub frequency: f64,
    pub stderr: f64,
    pub verdict: bool,
}

impl BoundCheck {
    fn new(bound: f64, hits: u64, trials: u64) -> Self {
        let f = hits as f64 / trials as f64;
        let se = (f * (1.0 - f) / trials as f64).sqrt();
        Self {
            bound,
            frequency: f,
            stderr: se,
            verdict: bound >= f - 3.0 * se,
        }
    }
}

/// A closed-form value compared with a sample estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementCheck {
    pub expected: f64,
    pub observed: f64,
    pub stderr: f64,
    pub verdict: bool,
}

impl AgreementCheck {
    pub fn new(expected: f64, observed: f64, stderr: f64, sigmas: f64) -> Self {
        Self {
            expected,
            observed,
            stderr,
            verdict: (observed - expected).abs() <= sigmas * stderr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTestReport {
    /// Honest runs of `n_tot` rounds that trip the test, against the abort bound.
    pub honest_abort: BoundCheck,
    /// Displaced signals at the range edge that pass, against the tail bound.
    pub attack_pass: BoundCheck,
    /// Test-port deviation from explicit mode mixing against the closed form.
    pub sigma_t: AgreementCheck,
}

impl EnergyTestReport {
    pub fn all_pass(&self) -> bool {
        self.honest_abort.verdict && self.attack_pass.verdict && self.sigma_t.verdict
    }
}

/// `(M, alpha)` at which the tail bound is about `target`, for observable attack frequencies.
pub fn observable_attack_params(t: f64, m_range: f64, target: f64) -> (f64, f64) {
    let l = ((2.0 * t - 1.0) / t).powi(2);
    let z = (t * (1.0 + l) / 2.0 * (crate::bounds::gamma_prefactor(t) / target).ln()).sqrt();
    (m_range, (mu_test(t) * m_range - z).max(0.0))
}

const TRIAL_BLOCK: u64 = 10_000;

/// Checks the energy test with explicit beam-splitter mixing. Each honest
/// trial runs `pp.n_tot` rounds; each attack trial is one displaced signal
/// whose transmitted amplitude equals `pp.m_range`.
pub fn mc_verify_energy_test(
    ch: &ChannelParams,
    pp: &ProtocolParams,
    trials: u64,
    seed: u64,
) -> Result<EnergyTestReport> {
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    let model = ChannelModel::new(ch)?;
    let t = pp.transmittance;
    if !(t > 0.5 && t < 1.0) {
        return Err(invalid("transmittance", format!("{t} outside (1/2, 1)")));
    }
    let rounds = pp.n_tot.round().max(1.0) as u64;
    let gb = model.cov.gamma_b * VACUUM_OUTCOME_VARIANCE;
    // Cholesky factor of Bob's 2x2 outcome covariance.
    let l11 = gb[(0, 0)].sqrt();
    let l21 = gb[(1, 0)] / l11;
    let l22 = (gb[(1, 1)] - l21 * l21).max(0.0).sqrt();
    let sv = VACUUM_OUTCOME_VARIANCE.sqrt();
    let (st, ct) = (t.sqrt(), (1.0 - t).sqrt());
    let h = std::f64::consts::FRAC_1_SQRT_2;

    let nblocks = trials.div_ceil(TRIAL_BLOCK);
    // (aborts, sum q_t1, sum q_t1^2, samples, attack passes)
    let parts: Vec<(u64, f64, f64, u64, u64)> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b);
            let len = TRIAL_BLOCK.min(trials - b * TRIAL_BLOCK);
            let (mut aborts, mut s1, mut s2, mut ns, mut passes) = (0u64, 0.0, 0.0, 0u64, 0u64);
            for _ in 0..len {
                let mut tripped = false;
                for _ in 0..rounds {
                    let z1 = normal(&mut rng);
                    let z2 = normal(&mut rng);
                    let (sq, sp) = (l11 * z1, l21 * z1 + l22 * z2);
                    let (aq, ap) = (sv * normal(&mut rng), sv * normal(&mut rng));
                    let (bq, bp) = (sv * normal(&mut rng), sv * normal(&mut rng));
                    let rq = ct * sq - st * aq;
                    let rp = ct * sp - st * ap;
                    let qt1 = h * (rq + bq);
                    let pt2 = h * (rp - bp);
                    s1 += qt1;
                    s2 += qt1 * qt1;
                    ns += 1;
                    if qt1.abs() > pp.alpha || pt2.abs() > pp.alpha {
                        tripped = true;
                    }
                }
                if tripped {
                    aborts += 1;
                }
                // Transmitted amplitude pinned at M; the reflected port then
                // carries sqrt((1-T)/T) M minus the vacuum it was mixed with.
                let aq = sv * normal(&mut rng);
                let bq = sv * normal(&mut rng);
                let sq = (pp.m_range - ct * aq) / st;
                let qt1 = h * (ct * sq - st * aq + bq);
                if qt1.abs() <= pp.alpha {
                    passes += 1;
                }
            }
            (aborts, s1, s2, ns, passes)
        })
        .collect();
    let (aborts, s1, s2, ns, passes) = parts.into_iter().fold((0, 0.0, 0.0, 0, 0), |a, p| {
        (a.0 + p.0, a.1 + p.1, a.2 + p.2, a.3 + p.3, a.4 + p.4)
    });
    let sigma_t = model.sigma_t(t);
    let mean = s1 / ns as f64;
    let sd = (s2 / ns as f64 - mean * mean).max(0.0).sqrt();
    let gamma = big_gamma(pp.m_range, t, pp.alpha)?.value();
    Ok(EnergyTestReport {
        honest_abort: BoundCheck::new(abort_bound(sigma_t, rounds as f64, pp.alpha).min(1.0), aborts, trials),
        attack_pass: BoundCheck::new(gamma, passes, trials),
        sigma_t: AgreementCheck::new(sigma_t, sd, sd / (2.0 * ns as f64).sqrt(), 5.0),
    })
}

/// Populations for the sampling checks. Values are bin indices in `1..=bins`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub bins: u32,
    /// Moment test: the whole population, the sample size and the slack.
    pub moment_values: Vec<u32>,
    pub moment_sample: usize,
    pub nu: f64,
    /// Distance test: per-round index distances, the PE sample size and the slack.
    pub distances: Vec<u32>,
    pub distance_sample: usize,
    pub mu: f64,
}

impl PopulationSpec {
    /// Two-point populations at the extremes of the alphabet, with the slacks
    /// set so that both bounds equal `target`.
    pub fn adversarial_bimodal(n: usize, m: usize, bins: u32, fraction: f64, target: f64) -> Self {
        let total = n + m;
        let high = ((fraction * total as f64).round() as usize).min(total);
        let moment_values: Vec<u32> = (0..total).map(|i| if i < high { bins } else { 1 }).collect();
        let distances: Vec<u32> = (0..total).map(|i| if i < high { bins - 1 } else { 0 }).collect();
        let half = bins as f64 / 2.0;
        let (nf, mf) = (n as f64, m as f64);
        let nu = (-target.ln() * half.powi(4) * (nf + mf) * (mf + 1.0) / (2.0 * nf * mf * mf)).sqrt();
        let sigma = population_sd(&distances);
        // Solve mu^2 a = L (2 s^2 + b mu) for mu.
        let frac = mf / (nf + mf);
        let a = nf * frac * frac;
        let l = -target.ln();
        let bb = 4.0 / 3.0 * frac * half;
        let mu = (l * bb + ((l * bb).powi(2) + 8.0 * a * l * sigma * sigma).sqrt()) / (2.0 * a);
        Self {
            bins,
            moment_values,
            moment_sample: m,
            nu,
            distances,
            distance_sample: m,
            mu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.moment_sample == 0 || self.moment_sample >= self.moment_values.len() {
            return Err(invalid("moment_sample", "must be between 1 and the population size"));
        }
        if self.distance_sample == 0 || self.distance_sample >= self.distances.len() {
            return Err(invalid("distance_sample", "must be between 1 and the population size"));
        }
        if self.moment_values.len().max(self.distances.len()) > 1_000_000 {
            return Err(invalid("population", "at most 1e6 entries"));
        }
        if self.moment_values.iter().any(|&v| v == 0 || v > self.bins) {
            return Err(invalid("moment_values", "indices must lie in 1..=bins"));
        }
        if self.distances.iter().any(|&v| v >= self.bins) {
            return Err(invalid("distances", "distances must be below bins"));
        }
        Ok(())
    }
}

fn population_sd(v: &[u32]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().map(|&x| x as f64).sum::<f64>() / n;
    (v.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub serfling: BoundCheck,
    pub bernstein: BoundCheck,
}

/// Draws `sample` positions without replacement and returns the sum of
/// `f` over them.
fn sample_sum(rng: &mut ChaCha8Rng, perm: &mut [usize], sample: usize, f: impl Fn(usize) -> f64) -> f64 {
    let n = perm.len();
    let mut s = 0.0;
    for i in 0..sample {
        let j = rng.random_range(i..n);
        perm.swap(i, j);
        s += f(perm[i]);
    }
    s
}

pub fn mc_verify_sampling_bounds(spec: &PopulationSpec, trials: u64, seed: u64) -> Result<SamplingReport> {
    spec.validate()?;
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    let half = spec.bins as f64 / 2.0;
    let m2: Vec<f64> = spec.moment_values.iter().map(|&v| (v as f64 - half).powi(2)).collect();
    let dist: Vec<f64> = spec.distances.iter().map(|&v| v as f64).collect();
    let m2_total: f64 = m2.iter().sum();
    let d_total: f64 = dist.iter().sum();
    let (ms, mn) = (spec.moment_sample, spec.moment_values.len() - spec.moment_sample);
    let (ks, kn) = (spec.distance_sample, spec.distances.len() - spec.distance_sample);

    let nblocks = trials.div_ceil(TRIAL_BLOCK);
    let parts: Vec<(u64, u64)> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            // Sampling checks use streams above the ones of the energy test.
            let mut rng = block_rng(seed, (1 << 40) + b);
            let len = TRIAL_BLOCK.min(trials - b * TRIAL_BLOCK);
            let mut pm: Vec<usize> = (0..m2.len()).collect();
            let mut pd: Vec<usize> = (0..dist.len()).collect();
            let (mut hs, mut hb) = (0u64, 0u64);
            for _ in 0..len {
                let s = sample_sum(&mut rng, &mut pm, ms, |i| m2[i]);
                let key_m2 = (m2_total - s) / mn as f64;
                if key_m2 >= s / ms as f64 + spec.nu {
                    hs += 1;
                }
                let s = sample_sum(&mut rng, &mut pd, ks, |i| dist[i]);
                let key_d = (d_total - s) / kn as f64;
                if key_d >= s / ks as f64 + spec.mu {
                    hb += 1;
                }
            }
            (hs, hb)
        })
        .collect();
    let (hs, hb) = parts.into_iter().fold((0, 0), |a, p| (a.0 + p.0, a.1 + p.1));
    let sigma = population_sd(&spec.distances);
    let n_cap = spec.distances.len() as u64;
    Ok(SamplingReport {
        serfling: BoundCheck::new(
            serfling_bound(mn as u64, ms as u64, spec.nu, half).value(),
            hs,
            trials,
        ),
        bernstein: BoundCheck::new(
            bernstein_bound(kn as u64, ks as u64, n_cap, spec.mu, sigma, half).value(),
            hb,
            trials,
        ),
    })
}

/// Sample covariance of `samples` correlated outcome pairs of one quadrature,
/// entry by entry against the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub var_a: AgreementCheck,
    pub var_b: AgreementCheck,
    pub cov_ab: AgreementCheck,
}

pub fn sample_covariance(ch: &ChannelParams, quad: Quadrature, samples: u64, seed: u64) -> Result<CovarianceReport> {
    if samples < 2 {
        return Err(invalid("samples", "need at least two"));
    }
    let cov = ch.state()?;
    let sampler = PairSampler::new(&cov, quad);
    let nblocks = samples.div_ceil(DEFAULT_BLOCK);
    let parts: Vec<[f64; 5]> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b);
            let len = DEFAULT_BLOCK.min(samples - b * DEFAULT_BLOCK);
            let mut s = [0.0; 5];
            for _ in 0..len {
                let (a, bb) = sampler.correlated(&mut rng);
                s[0] += a * a;
                s[1] += bb * bb;
                s[2] += a * bb;
                s[3] += a;
                s[4] += bb;
            }
            s
        })
        .collect();
    let mut s = [0.0; 5];
    for p in parts {
        for i in 0..5 {
            s[i] += p[i];
        }
    }
    let n = samples as f64;
    let va = cov.outcome_variance(Mode::A, quad);
    let vb = cov.outcome_variance(Mode::B, quad);
    let c = cov.outcome_covariance(quad);
    let ea = s[0] / n - (s[3] / n).powi(2);
    let eb = s[1] / n - (s[4] / n).powi(2);
    let ec = s[2] / n - s[3] * s[4] / (n * n);
    Ok(CovarianceReport {
        var_a: AgreementCheck::new(va, ea, va * (2.0 / n).sqrt(), 5.0),
        var_b: AgreementCheck::new(vb, eb, vb * (2.0 / n).sqrt(), 5.0),
        cov_ab: AgreementCheck::new(c, ec, ((va * vb + c * c) / n).sqrt(), 5.0),
    })
}
