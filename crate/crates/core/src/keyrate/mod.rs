mod asymptotic;
mod finite;
mod optimize;

pub use asymptotic::{asymptotic_rates, distance_scenario, ur_gap, AsymptoticRates, UrGap};
pub use finite::{
    finite_key_length, round_counts_from, ChosenParams, KeyRateOptions, KeyRateResult, KeyTerms,
    ZeroKeyReason,
};
pub use optimize::{
    calibrate, evaluate_point, finite_key_from_channel, optimize_keyrate, optimize_with_model,
    ChannelModel, ModelInputs, OptimizerSettings,
};
