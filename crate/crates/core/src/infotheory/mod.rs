//! Mutual information and MMSE of discrete inputs, their tabulated profiles,
//! and the analytic surrogates used by the sub-optimal allocators.

mod awgn;
mod cache;
mod profile;
mod surrogate;

pub use awgn::{mi_bicm, mi_cm, mmse_cm, AwgnEvaluator, AwgnPoint, DEFAULT_QUAD_ORDER};
pub use cache::{read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};
pub use profile::{shared_profile, GridSpec, MiProfile, ProfileStore, RawTable};
pub use surrogate::{
    approx_params, beta_r, delta_r, i_approx, i_ref, i_tw, ref_params, ApproxCurve, ApproxParams, RefParams,
};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Decoder {
    Cm,
    Bicm,
}

impl Decoder {
    pub fn as_str(self) -> &'static str {
        match self {
            Decoder::Cm => "cm",
            Decoder::Bicm => "bicm",
        }
    }
}

impl fmt::Display for Decoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cm" => Ok(Decoder::Cm),
            "bicm" => Ok(Decoder::Bicm),
            other => Err(Error::UnknownName(format!("decoder '{other}'"))),
        }
    }
}

/// A monotone SNR-to-rate curve with its MMSE (scaled derivative) and inverses.
///
/// `mmse(rho) = ln2 * d mi / d rho` for every implementation.
pub trait MiCurve: Send + Sync {
    fn name(&self) -> String;

    /// Saturation rate; infinite for Gaussian inputs.
    fn max_rate(&self) -> f64;

    fn mi(&self, rho: f64) -> f64;

    fn mmse(&self, rho: f64) -> f64;

    /// Smallest `rho` with `mmse(rho) = v`; `v >= mmse(0)` maps to 0.
    fn inv_mmse(&self, v: f64) -> Result<f64>;

    /// Smallest `rho` with `mi(rho) = v`.
    fn inv_mi(&self, v: f64) -> Result<f64>;

    /// `inv_mmse(exp(ln_v))` for arguments whose exponential would underflow.
    /// Values `ln_v >= 0` are clamped to `v = 1`.
    fn inv_mmse_ln(&self, ln_v: f64) -> Result<f64> {
        self.inv_mmse(ln_v.min(0.0).exp())
    }
}

/// Gaussian-input reference: `log2(1+rho)` with MMSE `1/(1+rho)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianInput;

impl MiCurve for GaussianInput {
    fn name(&self) -> String {
        "gaussian".into()
    }

    fn max_rate(&self) -> f64 {
        f64::INFINITY
    }

    fn mi(&self, rho: f64) -> f64 {
        rho.max(0.0).ln_1p() / std::f64::consts::LN_2
    }

    fn mmse(&self, rho: f64) -> f64 {
        1.0 / (1.0 + rho.max(0.0))
    }

    fn inv_mmse(&self, v: f64) -> Result<f64> {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidArgument(format!("MMSE value {v} outside (0, 1]")));
        }
        Ok((1.0 / v - 1.0).max(0.0))
    }

    fn inv_mmse_ln(&self, ln_v: f64) -> Result<f64> {
        if ln_v.is_nan() {
            return Err(Error::InvalidArgument("NaN MMSE value".into()));
        }
        Ok((-ln_v.min(0.0)).exp_m1())
    }

    fn inv_mi(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rate {v} must be finite and nonnegative"
            )));
        }
        Ok((v * std::f64::consts::LN_2).exp_m1())
    }
}
