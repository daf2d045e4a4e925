pub mod energy;
pub mod overlap;
pub mod params;
pub mod sampling;
pub mod theorem;

pub use energy::{
    abort_bound, alpha_for, big_gamma, choose_m_range, energy_test_sigma, gamma_prefactor, mu_test,
    AlphaCalibration, TailBound,
};
pub use overlap::{overlap_c, OverlapMode};
pub use params::{LogBase, PEStats, ProtocolParams, RoundCounts, SecurityBudget};
pub use sampling::{bernstein_bound, serfling_bound};
pub use theorem::{
    energy_slack, epsilon_tilde, gamma_fn, log2_gamma, mu_stat, sigma_star, smallest_nu, xi_fn,
    SigmaStar,
};
