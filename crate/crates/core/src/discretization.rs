//! Binning of outcomes into `2M/delta` intervals of width `delta` over
//! `[-M, M]`; anything outside lands in the first or last bin.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub m_range: f64,
    pub delta: f64,
    /// Number of bins, `2M/delta`.
    pub bins: u32,
}

impl Binning {
    pub fn new(m_range: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid("delta", format!("{delta} must be positive")));
        }
        if !(m_range > 0.0 && m_range.is_finite()) {
            return Err(invalid("m_range", format!("{m_range} must be positive")));
        }
        let ratio = 2.0 * m_range / delta;
        let bins = ratio.round();
        if (ratio - bins).abs() > 1e-6 * ratio.max(1.0) || bins < 1.0 {
            return Err(invalid(
                "m_range",
                format!("2M/delta = {ratio} is not a positive integer"),
            ));
        }
        if bins > u32::MAX as f64 {
            return Err(invalid("m_range", format!("{bins} bins is too many")));
        }
        Ok(Self {
            m_range,
            delta,
            bins: bins as u32,
        })
    }

    /// Upper edge of bin `k`; bin 0 is a virtual bin ending at `-M`.
    pub fn upper_edge(&self, k: u32) -> f64 {
        -self.m_range + k as f64 * self.delta
    }

    pub fn center_index(&self) -> f64 {
        self.bins as f64 / 2.0
    }

    /// Bin (1-based) of outcome `q`.
    pub fn bin_index(&self, q: f64) -> u32 {
        let raw = ((q + self.m_range) / self.delta).ceil();
        raw.clamp(1.0, self.bins as f64) as u32
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinnedString {
    pub binning: Binning,
    pub values: Vec<u32>,
}

impl BinnedString {
    pub fn from_outcomes(outcomes: &[f64], binning: Binning) -> Self {
        Self {
            binning,
            values: outcomes.iter().map(|&q| binning.bin_index(q)).collect(),
        }
    }

    pub fn new(values: Vec<u32>, binning: Binning) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|&&v| v == 0 || v > binning.bins) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                max: binning.bins,
            });
        }
        Ok(Self { binning, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn paired<'a>(a: &'a BinnedString, b: &'a BinnedString) -> Result<impl Iterator<Item = f64> + 'a> {
    if a.binning != b.binning {
        return Err(Error::BinningMismatch);
    }
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| (x as f64 - y as f64).abs()))
}

/// Mean absolute index difference.
pub fn dist_d(a: &BinnedString, b: &BinnedString) -> Result<f64> {
    let n = a.len();
    let s: f64 = paired(a, b)?.sum();
    Ok(if n == 0 { 0.0 } else { s / n as f64 })
}

/// Mean squared index difference.
pub fn dist_d2(a: &BinnedString, b: &BinnedString) -> Result<f64> {
    let n = a.len();
    let s: f64 = paired(a, b)?.map(|d| d * d).sum();
    Ok(if n == 0 { 0.0 } else { s / n as f64 })
}

/// Mean squared distance of the indices from the range centre `M/delta`.
pub fn moment_m2(a: &BinnedString) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let c = a.binning.center_index();
    a.values
        .iter()
        .map(|&x| {
            let d = x as f64 - c;
            d * d
        })
        .sum::<f64>()
        / a.len() as f64
}
