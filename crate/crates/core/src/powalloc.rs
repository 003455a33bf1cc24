//! Short-term (per-codeword) power allocation rules.
//!
//! Every non-uniform rule here is a one-parameter family of power vectors,
//! nondecreasing in a water level. Short-term rules pick the level that meets
//! the mean-power budget; the minimum-power rules in [`crate::longterm`] pick
//! it to meet a target rate. Sharing the family is what makes the two dual.

use crate::error::{Error, Result};
use crate::infotheory::{MiCurve, RefParams};
use crate::solver::{solve_increasing, Side};

/// Relative tolerance on the mean-power equation.
pub const POWER_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StScheme {
    Uniform,
    Optimal,
    Twf {
        beta: f64,
    },
    Ref {
        beta: f64,
        params: RefParams,
    },
    /// Classical water-filling for Gaussian inputs (`beta = inf`).
    WaterFilling,
}

impl StScheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StScheme::Twf { beta } => check_beta(beta),
            StScheme::Ref { beta, params } => check_ref(&params, beta),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            StScheme::Uniform => "uniform".into(),
            StScheme::Optimal => "optimal".into(),
            StScheme::Twf { beta } => format!("twf(beta={beta})"),
            StScheme::Ref { beta, .. } => format!("ref(beta={beta})"),
            StScheme::WaterFilling => "waterfilling".into(),
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")))
    }
}

fn check_ref(rp: &RefParams, beta: f64) -> Result<()> {
    check_beta(beta)?;
    rp.validate()?;
    if beta < rp.alpha {
        return Err(Error::InvalidArgument(format!(
            "beta {beta} below the knee alpha {}",
            rp.alpha
        )));
    }
    if rp.kappa * (rp.alpha + 1.0) > rp.alpha {
        return Err(Error::InvalidArgument("refined bound branches overlap".into()));
    }
    Ok(())
}

fn check_gains(gamma: &[f64]) -> Result<()> {
    if gamma.is_empty() {
        return Err(Error::InvalidArgument("empty gain vector".into()));
    }
    if gamma.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidArgument("gains must be positive and finite".into()));
    }
    Ok(())
}

fn check_power(p: f64) -> Result<()> {
    if p >= 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "power must be finite and nonnegative, got {p}"
        )))
    }
}

pub fn mean(p: &[f64]) -> f64 {
    p.iter().sum::<f64>() / p.len() as f64
}

/// `(1/B) sum_b I(p_b gamma_b)`.
pub fn rate_of(curve: &dyn MiCurve, p: &[f64], gamma: &[f64]) -> f64 {
    p.iter().zip(gamma).map(|(&pb, &g)| curve.mi(pb * g)).sum::<f64>() / p.len() as f64
}

/// Water-level families shared by the short- and long-term rules.
#[derive(Clone, Copy)]
pub(crate) enum Family<'a> {
    /// Level `t = ln(nu)`, `p_b = MMSE^{-1}(min{1, 1/(nu gamma_b)}) / gamma_b`.
    Optimal {
        curve: &'a dyn MiCurve,
    },
    Twf {
        beta: f64,
    },
    Ref {
        beta: f64,
        rp: RefParams,
    },
}

impl Family<'_> {
    pub(crate) fn fill(&self, level: f64, gamma: &[f64], out: &mut [f64]) -> Result<()> {
        match *self {
            Family::Optimal { curve } => {
                for (o, &g) in out.iter_mut().zip(gamma) {
                    *o = curve.inv_mmse_ln(-level - g.ln())? / g;
                }
            }
            Family::Twf { beta } => {
                for (o, &g) in out.iter_mut().zip(gamma) {
                    *o = (beta / g).min((level - 1.0 / g).max(0.0));
                }
            }
            Family::Ref { beta, rp } => {
                for (o, &g) in out.iter_mut().zip(gamma) {
                    *o = ref_branch(level, g, beta, &rp);
                }
            }
        }
        Ok(())
    }

    /// A level at which every block gets zero power.
    pub(crate) fn zero_level(&self, gamma: &[f64]) -> f64 {
        let gmax = gamma.iter().cloned().fold(0.0, f64::max);
        match *self {
            Family::Optimal { curve } => -gmax.ln() - curve.mmse(0.0).ln(),
            Family::Twf { .. } | Family::Ref { .. } => 0.0,
        }
    }

    /// The level beyond which nothing changes, when there is one.
    pub(crate) fn saturation_level(&self, gamma: &[f64]) -> Option<f64> {
        let inv_gmin = gamma.iter().map(|g| 1.0 / g).fold(0.0, f64::max);
        match *self {
            Family::Optimal { .. } => None,
            Family::Twf { beta } => Some((beta + 1.0) * inv_gmin),
            Family::Ref { beta, rp } => Some(beta / rp.kappa * inv_gmin),
        }
    }

    /// Grows an upper bracket until `f(level) >= target`.
    pub(crate) fn bracket_above<F>(&self, gamma: &[f64], mut f: F, target: f64) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if let Some(sat) = self.saturation_level(gamma) {
            return Ok(sat);
        }
        let lo = self.zero_level(gamma);
        let mut step = 1.0;
        for _ in 0..64 {
            let hi = lo + step;
            if f(hi)? >= target {
                return Ok(hi);
            }
            step *= 2.0;
        }
        Err(Error::Bracket(format!("no level reaches {target}")))
    }

    /// Level whose mean power is the largest not exceeding `p`.
    pub(crate) fn level_for_power(&self, gamma: &[f64], p: f64, buf: &mut [f64]) -> Result<f64> {
        let mut err = None;
        let mut mean_at = |t: f64| -> Result<f64> {
            self.fill(t, gamma, buf)?;
            Ok(mean(buf))
        };
        let lo = self.zero_level(gamma);
        let hi = self.bracket_above(gamma, &mut mean_at, p)?;
        let t = solve_increasing(
            |t| match mean_at(t) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            },
            p,
            lo,
            hi,
            Side::Below,
            POWER_RTOL * p,
        );
        if let Some(e) = err {
            return Err(e);
        }
        t
    }
}

/// Refined truncated water-filling, boundaries resolved to the lower-power side.
fn ref_branch(eta: f64, g: f64, beta: f64, rp: &RefParams) -> f64 {
    let k = rp.kappa;
    if eta > beta / (k * g) {
        beta / g
    } else if eta > rp.alpha / (k * g) {
        (k * eta).min(beta / g)
    } else if eta > (rp.alpha + 1.0) / g {
        rp.alpha / g
    } else if eta > 1.0 / g {
        (eta - 1.0 / g).min(rp.alpha / g)
    } else {
        0.0
    }
}

pub fn alloc_uniform(blocks: usize, p: f64) -> Result<Vec<f64>> {
    check_power(p)?;
    Ok(vec![p; blocks])
}

/// Mercury/water-filling: maximizes `sum_b I(p_b gamma_b)` with mean power `p`.
pub fn alloc_optimal_st(curve: &dyn MiCurve, gamma: &[f64], p: f64) -> Result<Vec<f64>> {
    check_gains(gamma)?;
    check_power(p)?;
    let mut out = vec![0.0; gamma.len()];
    if p == 0.0 {
        return Ok(out);
    }
    let fam = Family::Optimal { curve };
    let t = fam.level_for_power(gamma, p, &mut out)?;
    fam.fill(t, gamma, &mut out)?;
    Ok(out)
}

/// Water-filling capped at `beta / gamma_b`.
pub fn alloc_twf(gamma: &[f64], p: f64, beta: f64) -> Result<Vec<f64>> {
    check_gains(gamma)?;
    check_power(p)?;
    check_beta(beta)?;
    let full: Vec<f64> = gamma.iter().map(|g| beta / g).collect();
    if mean(&full) <= p {
        return Ok(full);
    }
    let mut out = vec![0.0; gamma.len()];
    if p == 0.0 {
        return Ok(out);
    }
    let fam = Family::Twf { beta };
    let t = fam.level_for_power(gamma, p, &mut out)?;
    fam.fill(t, gamma, &mut out)?;
    Ok(out)
}

/// Refined truncated water-filling with the three-piece bound.
pub fn alloc_ref(gamma: &[f64], p: f64, rp: &RefParams, beta: f64) -> Result<Vec<f64>> {
    check_gains(gamma)?;
    check_power(p)?;
    check_ref(rp, beta)?;
    let full: Vec<f64> = gamma.iter().map(|g| beta / g).collect();
    if mean(&full) < p {
        return Ok(full);
    }
    let mut out = vec![0.0; gamma.len()];
    if p == 0.0 {
        return Ok(out);
    }
    let fam = Family::Ref { beta, rp: *rp };
    let t = fam.level_for_power(gamma, p, &mut out)?;
    fam.fill(t, gamma, &mut out)?;
    Ok(out)
}

/// Classical water-filling `(eta - 1/gamma_b)_+`, solved exactly by sorting.
pub fn alloc_waterfilling(gamma: &[f64], p: f64) -> Result<Vec<f64>> {
    check_gains(gamma)?;
    check_power(p)?;
    let mut inv: Vec<f64> = gamma.iter().map(|g| 1.0 / g).collect();
    inv.sort_by(|a, b| a.total_cmp(b));
    let budget = p * gamma.len() as f64;
    let mut eta = inv[0];
    let mut acc = 0.0;
    for (k, &v) in inv.iter().enumerate() {
        // with the k+1 strongest blocks active: eta = (budget + sum 1/gamma) / (k+1)
        acc += v;
        let level = (budget + acc) / (k + 1) as f64;
        if k + 1 == inv.len() || level <= inv[k + 1] {
            eta = level;
            break;
        }
    }
    Ok(gamma.iter().map(|g| (eta - 1.0 / g).max(0.0)).collect())
}

/// Power vector for any short-term scheme.
pub fn allocate(scheme: &StScheme, curve: &dyn MiCurve, gamma: &[f64], p: f64) -> Result<Vec<f64>> {
    match scheme {
        StScheme::Uniform => alloc_uniform(gamma.len(), p),
        StScheme::Optimal => alloc_optimal_st(curve, gamma, p),
        StScheme::Twf { beta } => alloc_twf(gamma, p, *beta),
        StScheme::Ref { beta, params } => alloc_ref(gamma, p, params, *beta),
        StScheme::WaterFilling => alloc_waterfilling(gamma, p),
    }
}

/// Optimal SNR exponent divided by m: `1 + floor(B (1 - R/M))`.
pub fn singleton_bound(blocks: usize, bits: u32, r: f64) -> Result<u32> {
    let m = bits as f64;
    if !(r > 0.0 && r <= m) {
        return Err(Error::InvalidArgument(format!("rate {r} outside (0, {m}]")));
    }
    Ok(1 + (blocks as f64 * (1.0 - r / m) + 1e-12).floor() as u32)
}

/// Diversity guaranteed by truncated water-filling with cap `beta`.
pub fn d_beta(curve: &dyn MiCurve, blocks: usize, r: f64, beta: f64) -> Result<u32> {
    check_beta(beta)?;
    let ib = curve.mi(beta);
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("rate {r} must be positive")));
    }
    // tolerate round-off when beta itself came from inverting the curve
    if r > ib * (1.0 + 1e-12) {
        return Err(Error::Infeasible(format!(
            "rate {r} exceeds I(beta) = {ib}; truncated water-filling cannot reach it"
        )));
    }
    Ok(1 + (blocks as f64 * (1.0 - r / ib) + 1e-12).max(0.0).floor() as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::{ref_params, shared_profile, Decoder, GaussianInput};

    #[test]
    fn uniform() {
        assert_eq!(alloc_uniform(4, 2.0).unwrap(), vec![2.0; 4]);
        assert_eq!(alloc_uniform(1, 0.3).unwrap(), vec![0.3]);
        assert!(alloc_uniform(2, -1.0).is_err());
    }

    #[test]
    fn waterfilling_closed_form() {
        // gamma = (1, 0.25), P = 1: eta - 1 + eta - 4 = 2 has eta = 3.5 > 4? no,
        // so only the first block is active: p = (2, 0)
        assert_eq!(alloc_waterfilling(&[1.0, 0.25], 1.0).unwrap(), vec![2.0, 0.0]);
        let p = alloc_waterfilling(&[1.0, 0.5], 2.0).unwrap();
        // eta = (4 + 1 + 2) / 2 = 3.5
        assert!((p[0] - 2.5).abs() < 1e-15 && (p[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_profile_reduces_to_waterfilling() {
        let g = GaussianInput;
        for (gamma, p) in [
            (vec![1.0, 0.25], 1.0),
            (vec![1.0, 0.5], 2.0),
            (vec![3.0, 0.1, 0.7, 1.2], 0.8),
        ] {
            let a = alloc_optimal_st(&g, &gamma, p).unwrap();
            let b = alloc_waterfilling(&gamma, p).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn single_block_takes_everything() {
        let q = shared_profile("qpsk", Decoder::Cm).unwrap();
        for p in [0.01, 1.0, 100.0] {
            let v = alloc_optimal_st(q.as_ref(), &[0.37], p).unwrap();
            assert!((v[0] / p - 1.0).abs() < 1e-9);
        }
        let rp = ref_params("qpsk", Decoder::Cm).unwrap();
        // small P keeps eta below (alpha+1)/gamma: plain water-filling
        let v = alloc_ref(&[1.0], 0.5, &rp, 10.0).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn twf_branches() {
        assert_eq!(alloc_twf(&[1.0; 4], 2.0, 1.0).unwrap(), vec![1.0; 4]);
        let v = alloc_twf(&[1.0, 1.0], 1.0, 10.0).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-9 && (v[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ref_saturation_branch() {
        let rp = ref_params("qpsk", Decoder::Cm).unwrap();
        let gamma = [2.0, 0.5, 1.0];
        let full: f64 = gamma.iter().map(|g| 10.0 / g).sum::<f64>() / 3.0;
        let v = alloc_ref(&gamma, full * 1.01, &rp, 10.0).unwrap();
        for (p, g) in v.iter().zip(&gamma) {
            assert_eq!(*p, 10.0 / g);
        }
    }

    #[test]
    fn ref_branch_is_continuous() {
        let rp = ref_params("qpsk", Decoder::Cm).unwrap();
        let (g, beta) = (0.8, 12.0);
        let knots = [
            1.0 / g,
            (rp.alpha + 1.0) / g,
            rp.alpha / (rp.kappa * g),
            beta / (rp.kappa * g),
        ];
        for k in knots {
            let a = ref_branch(k * (1.0 - 1e-12), g, beta, &rp);
            let b = ref_branch(k * (1.0 + 1e-12), g, beta, &rp);
            assert!((a - b).abs() < 1e-9, "jump at {k}");
        }
        assert!((ref_branch((rp.alpha + 1.0) / g, g, beta, &rp) - rp.alpha / g).abs() < 1e-12);
    }

    #[test]
    fn singleton_values() {
        assert_eq!(singleton_bound(4, 2, 1.0).unwrap(), 3);
        assert_eq!(singleton_bound(4, 4, 1.0).unwrap(), 4);
        assert_eq!(singleton_bound(4, 2, 1.7).unwrap(), 1);
        assert!(singleton_bound(4, 2, 2.5).is_err());
    }

    #[test]
    fn d_beta_values() {
        let q = shared_profile("qpsk", Decoder::Cm).unwrap();
        // I(beta) = M numerically
        assert_eq!(
            d_beta(q.as_ref(), 4, 0.9, 1e4).unwrap(),
            singleton_bound(4, 2, 0.9).unwrap()
        );
        let b = q.inv_mi(1.8).unwrap();
        assert_eq!(d_beta(q.as_ref(), 4, 0.9, b).unwrap(), 3);
        let b = q.inv_mi(1.7).unwrap();
        assert_eq!(d_beta(q.as_ref(), 4, 1.7, b).unwrap(), 1);
        assert!(d_beta(q.as_ref(), 4, 1.9, b).is_err());
    }
}
