//! Closed-form stand-ins for the MI curve: truncated log (water-filling target),
//! the refined three-piece bound, and the exponential approximation.

use std::f64::consts::LN_2;

use super::{Decoder, MiCurve, MiProfile};
use crate::error::{Error, Result};
use crate::solver::{solve_increasing, Side};

/// Parameters of the refined bound: `log2(1+rho)` up to `alpha`, then
/// `kappa*log2(rho) + a`, flat beyond the design cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefParams {
    /// Tangency point of the fit; informational only.
    pub rho0: f64,
    pub kappa: f64,
    pub a: f64,
    pub alpha: f64,
}

/// `M (1 - exp(-c1 rho^c2))^c3` with its tabulated worst-case overshoot `delta_r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub delta_r: f64,
}

impl RefParams {
    /// Gap between the two branches at `alpha`.
    pub fn continuity_gap(&self) -> f64 {
        ((1.0 + self.alpha).log2() - (self.kappa * self.alpha.log2() + self.a)).abs()
    }

    /// The published constants are rounded; the gap at `alpha` is a few
    /// millibits for some entries, so the check here is deliberately loose.
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::InvalidArgument(format!("kappa {} outside (0,1)", self.kappa)));
        }
        if !(self.alpha > 0.0) || !self.a.is_finite() {
            return Err(Error::InvalidArgument("alpha must be positive".into()));
        }
        if self.continuity_gap() > 1e-2 {
            return Err(Error::InvalidArgument(format!(
                "branches disagree by {} bits at alpha",
                self.continuity_gap()
            )));
        }
        Ok(())
    }

    /// Same `kappa, a` with `alpha` re-solved so that the bound is exactly continuous.
    pub fn with_exact_alpha(&self) -> Result<Self> {
        let g = |x: f64| (1.0 + x).log2() - self.kappa * x.log2() - self.a;
        // g < 0 just left of the crossing and grows like (1-kappa) log2(x) beyond it
        let alpha = solve_increasing(g, 0.0, self.alpha / 2.0, self.alpha * 2.0, Side::Above, 0.0)?;
        Ok(Self { alpha, ..*self })
    }
}

/// Published refined-bound constants for `(constellation, decoder)`.
pub fn ref_params(constellation: &str, decoder: Decoder) -> Result<RefParams> {
    let (rho0, kappa, a, alpha) = match (canonical(constellation)?, decoder) {
        ("qpsk", _) => (3.0, 0.3528, 1.1327, 1.585),
        ("8psk", Decoder::Cm) => (7.0, 0.4693, 1.1397, 2.1677),
        ("8psk", Decoder::Bicm) => (7.0, 0.4744, 1.1234, 2.0922),
        ("16qam", Decoder::Cm) => (15.0, 0.56, 1.347, 5.8884),
        ("16qam", Decoder::Bicm) => (15.0, 0.5608, 1.3452, 5.8264),
        ("64qam", Decoder::Cm) => (63.0, 0.6581, 1.5255, 18.954),
        ("64qam", Decoder::Bicm) => (63.0, 0.6460, 1.5978, 19.8884),
        (c, _) => return Err(Error::UnknownName(format!("refined-bound parameters for '{c}'"))),
    };
    Ok(RefParams { rho0, kappa, a, alpha })
}

/// Published exponential-approximation constants for `(constellation, decoder)`.
pub fn approx_params(constellation: &str, decoder: Decoder) -> Result<ApproxParams> {
    let (c1, c2, c3, delta_r) = match (canonical(constellation)?, decoder) {
        ("qpsk", _) => (0.77, 0.87, 1.16, 0.0033),
        ("8psk", Decoder::Cm) => (0.61, 0.68, 1.45, 0.0241),
        ("8psk", Decoder::Bicm) => (0.81, 0.06, 1.75, 0.0223),
        ("16qam", Decoder::Cm) => (0.48, 0.61, 1.48, 0.0414),
        ("16qam", Decoder::Bicm) => (0.59, 0.06, 1.65, 0.0259),
        ("64qam", Decoder::Cm) => (0.47, 0.44, 1.87, 0.0977),
        ("64qam", Decoder::Bicm) => (0.4, 0.05, 1.63, 0.0656),
        (c, _) => return Err(Error::UnknownName(format!("approximation parameters for '{c}'"))),
    };
    Ok(ApproxParams { c1, c2, c3, delta_r })
}

fn canonical(name: &str) -> Result<&'static str> {
    match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
        "qpsk" | "4psk" | "4qam" => Ok("qpsk"),
        "8psk" => Ok("8psk"),
        "16qam" => Ok("16qam"),
        "64qam" => Ok("64qam"),
        other => Err(Error::UnknownName(format!("constellation '{other}'"))),
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")))
    }
}

/// `log2(1+rho)` truncated at `beta`.
pub fn i_tw(rho: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok((rho.max(0.0).min(beta)).ln_1p() / LN_2)
}

pub fn i_ref(rho: f64, rp: &RefParams, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if beta < rp.alpha {
        return Err(Error::InvalidArgument(format!(
            "beta {beta} below the knee alpha {}",
            rp.alpha
        )));
    }
    let rho = rho.max(0.0);
    Ok(if rho <= rp.alpha {
        rho.ln_1p() / LN_2
    } else {
        rp.kappa * rho.min(beta).log2() + rp.a
    })
}

pub fn i_approx(rho: f64, ap: &ApproxParams, m: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    m * (-(-ap.c1 * rho.powf(ap.c2)).exp_m1()).powf(ap.c3)
}

/// `max_rho (I~(rho) - I(rho))` over the profile grid.
pub fn delta_r(profile: &MiProfile, ap: &ApproxParams) -> f64 {
    let m = profile.bits_per_symbol() as f64;
    profile
        .rho_grid()
        .iter()
        .zip(profile.mi_table())
        .map(|(&r, &i)| i_approx(r, ap, m) - i)
        .fold(0.0, f64::max)
}

/// Smallest truncation level for which truncated water-filling keeps the
/// Singleton-bound diversity at rate `r` over `blocks` blocks.
pub fn beta_r(profile: &dyn MiCurve, blocks: usize, r: f64, bits: u32) -> Result<f64> {
    let m = bits as f64;
    if !(r > 0.0 && r < m) || blocks == 0 {
        return Err(Error::InvalidArgument(format!("rate {r} outside (0, {m})")));
    }
    let b = blocks as f64;
    let x = b * (1.0 - r / m);
    if (x - x.round()).abs() < 1e-9 {
        return Err(Error::SingletonDiscontinuity { rate: r, blocks, bits });
    }
    profile.inv_mi(b * r / (b - x.floor()))
}

/// The exponential approximation viewed as an MI curve.
#[derive(Debug, Clone, Copy)]
pub struct ApproxCurve {
    pub params: ApproxParams,
    pub m: f64,
}

impl MiCurve for ApproxCurve {
    fn name(&self) -> String {
        "approx".into()
    }

    fn max_rate(&self) -> f64 {
        self.m
    }

    fn mi(&self, rho: f64) -> f64 {
        i_approx(rho, &self.params, self.m)
    }

    fn mmse(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return if self.params.c2 < 1.0 { f64::INFINITY } else { 0.0 };
        }
        let ApproxParams { c1, c2, c3, .. } = self.params;
        let e = (-c1 * rho.powf(c2)).exp();
        let base = 1.0 - e;
        // ln2 * dI/drho
        LN_2 * self.m * c3 * base.powf(c3 - 1.0) * e * c1 * c2 * rho.powf(c2 - 1.0)
    }

    fn inv_mmse(&self, _v: f64) -> Result<f64> {
        Err(Error::InvalidArgument(
            "the exponential approximation has no monotone MMSE inverse".into(),
        ))
    }

    fn inv_mi(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) {
            return Err(Error::InvalidArgument(format!("rate {v} must be nonnegative")));
        }
        if v >= self.m {
            return Err(Error::Infeasible(format!("rate {v} at or above {}", self.m)));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        let ApproxParams { c1, c2, c3, .. } = self.params;
        let inner = -(-(v / self.m).powf(1.0 / c3)).ln_1p() / c1;
        Ok(inner.powf(1.0 / c2))
    }
}
