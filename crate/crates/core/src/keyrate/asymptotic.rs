use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::Result;
use crate::gaussian::{quad_entropies, ChannelParams};

/// Asymptotic rates in bits per round: the uncertainty-relation bound, the
/// optimal reverse-reconciliation rate and the direct-reconciliation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRates {
    pub r_ur: f64,
    pub r_opt: f64,
    pub r_dr: f64,
}

pub fn asymptotic_rates(ch: &ChannelParams) -> Result<AsymptoticRates> {
    let e = quad_entropies(&ch.state()?)?;
    let l2pi = (2.0 * PI).log2();
    Ok(AsymptoticRates {
        r_ur: l2pi - 2.0 * e.h_pb_given_pa,
        r_opt: e.h_pb_given_e - e.h_pb_given_pa,
        r_dr: l2pi - 2.0 * e.h_pa_given_pb,
    })
}

/// Slack in the uncertainty relation, with Alice's side held as a quantum
/// system and after her phase measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UrGap {
    pub gap_quantum: f64,
    pub gap_classical: f64,
}

pub fn ur_gap(ch: &ChannelParams) -> Result<UrGap> {
    let e = quad_entropies(&ch.state()?)?;
    let l2pi = (2.0 * PI).log2();
    Ok(UrGap {
        gap_quantum: e.h_qb_given_e + e.h_pb_given_a - l2pi,
        gap_classical: e.h_qb_given_e + e.h_pb_given_pa - l2pi,
    })
}

/// Bob's loss after `km` of fibre plus a fixed coupling loss.
pub fn distance_scenario(km: f64, db_per_km: f64, coupling_loss: f64) -> f64 {
    1.0 - 10f64.powf(-db_per_km * km / 10.0) * (1.0 - coupling_loss)
}
