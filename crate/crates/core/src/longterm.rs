//! Long-term (average over codewords) power allocation: minimum-power rules
//! that meet the rate on every transmitted codeword, the silence threshold
//! `s`, and the transmit-or-stay-silent policy.

use rayon::prelude::*;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fading::FadingModel;
use crate::infotheory::{ApproxCurve, ApproxParams, MiCurve, RefParams};
use crate::powalloc::{mean, rate_of, Family};
use crate::rng::sample_rng;
use crate::solver::{solve_increasing, Side};

/// Absolute tolerance on the rate equation (bits per symbol).
pub const RATE_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LtInner {
    Optimal,
    Twf { beta: f64 },
    Ref { beta: f64, params: RefParams },
}

/// A minimum-power rule at a fixed rate, optionally solved on the exponential
/// approximation with its rate margin instead of the true MI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LtScheme {
    pub inner: LtInner,
    pub rate: f64,
    pub approx: Option<ApproxParams>,
}

impl LtScheme {
    pub fn new(inner: LtInner, rate: f64) -> Self {
        Self {
            inner,
            rate,
            approx: None,
        }
    }

    pub fn with_approx(mut self, ap: ApproxParams) -> Self {
        self.approx = Some(ap);
        self
    }

    pub fn label(&self) -> String {
        let base = match self.inner {
            LtInner::Optimal => "lt-optimal".to_string(),
            LtInner::Twf { beta } => format!("lt-twf(beta={beta})"),
            LtInner::Ref { beta, .. } => format!("lt-ref(beta={beta})"),
        };
        if self.approx.is_some() {
            format!("{base}+approx")
        } else {
            base
        }
    }

    /// Rejects rates no codeword could reach under this rule.
    pub fn check_feasible(&self, curve: &dyn MiCurve) -> Result<()> {
        let m = curve.max_rate();
        let r = self.rate;
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("rate {r} must be positive")));
        }
        if r >= m {
            return Err(Error::Infeasible(format!("rate {r} not below the saturation rate {m}")));
        }
        let (rate_curve, target): (Box<dyn MiCurve>, f64) = match self.approx {
            Some(ap) => {
                if self.inner == LtInner::Optimal {
                    return Err(Error::InvalidArgument(
                        "the rate-margin path applies to truncated schemes only".into(),
                    ));
                }
                (Box::new(ApproxCurve { params: ap, m }), r + ap.delta_r)
            }
            None => (Box::new(CurveRef(curve)), r),
        };
        let cap = match self.inner {
            LtInner::Optimal => return Ok(()),
            LtInner::Twf { beta } => {
                check_positive(beta)?;
                rate_curve.mi(beta)
            }
            LtInner::Ref { beta, params } => {
                if beta < params.alpha {
                    return Err(Error::InvalidArgument(format!(
                        "beta {beta} below the knee alpha {}",
                        params.alpha
                    )));
                }
                rate_curve.mi(beta)
            }
        };
        if target > cap * (1.0 + 1e-12) {
            return Err(Error::Infeasible(format!(
                "rate {target} above the capped per-block rate {cap}"
            )));
        }
        Ok(())
    }
}

fn check_positive(beta: f64) -> Result<()> {
    if beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")))
    }
}

struct CurveRef<'a>(&'a dyn MiCurve);

impl MiCurve for CurveRef<'_> {
    fn name(&self) -> String {
        self.0.name()
    }
    fn max_rate(&self) -> f64 {
        self.0.max_rate()
    }
    fn mi(&self, rho: f64) -> f64 {
        self.0.mi(rho)
    }
    fn mmse(&self, rho: f64) -> f64 {
        self.0.mmse(rho)
    }
    fn inv_mmse(&self, v: f64) -> Result<f64> {
        self.0.inv_mmse(v)
    }
    fn inv_mi(&self, v: f64) -> Result<f64> {
        self.0.inv_mi(v)
    }
    fn inv_mmse_ln(&self, ln_v: f64) -> Result<f64> {
        self.0.inv_mmse_ln(ln_v)
    }
}

fn check_gains(gamma: &[f64]) -> Result<()> {
    if gamma.is_empty() || gamma.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidArgument("gains must be positive and finite".into()));
    }
    Ok(())
}

/// Smallest level of `fam` whose rate under `rate_curve` reaches `target`.
fn solve_rate(fam: Family<'_>, rate_curve: &dyn MiCurve, gamma: &[f64], target: f64) -> Result<Vec<f64>> {
    let mut buf = vec![0.0; gamma.len()];
    let mut err = None;
    let rate_at = |t: f64, buf: &mut [f64]| -> Result<f64> {
        fam.fill(t, gamma, buf)?;
        Ok(rate_of(rate_curve, buf, gamma))
    };
    let lo = fam.zero_level(gamma);
    let hi = fam.bracket_above(gamma, |t| rate_at(t, &mut buf), target)?;
    let top = rate_at(hi, &mut buf)?;
    if top < target {
        if top >= target - RATE_TOL {
            // the capped rate meets the target up to round-off
            return Ok(buf);
        }
        return Err(Error::Infeasible(format!("rate {target} above reachable {top}")));
    }
    let t = solve_increasing(
        |t| match rate_at(t, &mut buf) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        target,
        lo,
        hi,
        Side::Above,
        RATE_TOL,
    );
    if let Some(e) = err {
        return Err(e);
    }
    fam.fill(t?, gamma, &mut buf)?;
    Ok(buf)
}

/// Minimum mean power meeting rate `r` with the true MI curve.
pub fn min_power_opt(curve: &dyn MiCurve, gamma: &[f64], r: f64) -> Result<Vec<f64>> {
    check_gains(gamma)?;
    LtScheme::new(LtInner::Optimal, r).check_feasible(curve)?;
    solve_rate(Family::Optimal { curve }, curve, gamma, r)
}

/// Truncated water-filling shape with the level set on the true MI.
pub fn min_power_tw(curve: &dyn MiCurve, gamma: &[f64], r: f64, beta: f64) -> Result<Vec<f64>> {
    check_gains(gamma)?;
    LtScheme::new(LtInner::Twf { beta }, r).check_feasible(curve)?;
    solve_rate(Family::Twf { beta }, curve, gamma, r)
}

/// Refined truncated water-filling shape with the level set on the true MI.
pub fn min_power_ref(curve: &dyn MiCurve, gamma: &[f64], r: f64, rp: &RefParams, beta: f64) -> Result<Vec<f64>> {
    check_gains(gamma)?;
    LtScheme::new(LtInner::Ref { beta, params: *rp }, r).check_feasible(curve)?;
    solve_rate(Family::Ref { beta, rp: *rp }, curve, gamma, r)
}

/// Minimum-power vector for `scheme`; with `approx` set the level solves
/// `sum I~(wp_b gamma_b) = B (R + delta_r)`, which guarantees the true rate.
pub fn min_power(scheme: &LtScheme, curve: &dyn MiCurve, gamma: &[f64]) -> Result<Vec<f64>> {
    check_gains(gamma)?;
    scheme.check_feasible(curve)?;
    let fam = match scheme.inner {
        LtInner::Optimal => Family::Optimal { curve },
        LtInner::Twf { beta } => Family::Twf { beta },
        LtInner::Ref { beta, params } => Family::Ref { beta, rp: params },
    };
    match scheme.approx {
        None => solve_rate(fam, curve, gamma, scheme.rate),
        Some(ap) => {
            let approx = ApproxCurve {
                params: ap,
                m: curve.max_rate(),
            };
            solve_rate(fam, &approx, gamma, scheme.rate + ap.delta_r)
        }
    }
}

/// Sorted per-codeword minimum mean powers and their prefix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    w: Vec<f64>,
    /// `prefix[k]` = sum of the `k` smallest entries of `w`
    prefix: Vec<f64>,
}

impl CalibrationTable {
    pub fn from_samples(mut w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InsufficientData("no calibration samples".into()));
        }
        if w.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidArgument("calibration powers must be nonnegative".into()));
        }
        w.sort_by(|a, b| a.total_cmp(b));
        let mut prefix = Vec::with_capacity(w.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &v in &w {
            acc += v;
            prefix.push(acc);
        }
        Ok(Self { w, prefix })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.w
    }

    /// Empirical zero-outage threshold power, the sample mean of `w`
    /// (infinite if any codeword is infeasible).
    pub fn p_th(&self) -> f64 {
        self.prefix[self.w.len()] / self.w.len() as f64
    }

    /// Share of the total power carried by the largest `frac` of samples.
    pub fn tail_mass(&self, frac: f64) -> f64 {
        let n = self.w.len();
        let k = ((n as f64 * frac).ceil() as usize).clamp(1, n);
        let total = self.prefix[n];
        if !(total > 0.0) || !total.is_finite() {
            return if total.is_infinite() { 1.0 } else { 0.0 };
        }
        (total - self.prefix[n - k]) / total
    }

    /// Average power spent when codewords with `w > s` stay silent, linearly
    /// interpolated between order statistics so that it is continuous in `s`.
    pub fn p_of_s(&self, s: f64) -> f64 {
        let n = self.w.len();
        let nf = n as f64;
        if s == f64::INFINITY {
            return self.p_th();
        }
        // k samples at or below s
        let k = self.w.partition_point(|&v| v <= s);
        if k == n {
            return self.prefix[n] / nf;
        }
        let (w_lo, s_lo) = if k == 0 {
            (0.0, 0.0)
        } else {
            (self.w[k - 1], self.prefix[k])
        };
        let w_hi = self.w[k];
        if !w_hi.is_finite() || w_hi <= w_lo {
            return s_lo / nf;
        }
        let f = (s - w_lo) / (w_hi - w_lo);
        (s_lo + f * w_hi) / nf
    }

    /// Threshold meeting the long-term budget `p`; infinite when transmitting
    /// on every codeword already fits.
    pub fn threshold(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::InvalidArgument(format!("power must be positive, got {p}")));
        }
        let n = self.w.len();
        let nf = n as f64;
        if self.p_th() <= p {
            return Ok(f64::INFINITY);
        }
        let budget = p * nf;
        // largest k with prefix[k] <= budget; k < n because the total exceeds it
        let k = self.prefix.partition_point(|&v| v <= budget) - 1;
        let w_lo = if k == 0 { 0.0 } else { self.w[k - 1] };
        let w_hi = self.w[k];
        if !w_hi.is_finite() {
            return Ok(w_lo);
        }
        let f = ((budget - self.prefix[k]) / w_hi).clamp(0.0, 1.0);
        Ok(w_lo + f * (w_hi - w_lo))
    }

    /// Writes `quantile,w` rows plus the threshold for `p` as comment lines.
    pub fn write_csv<W: Write>(&self, out: &mut W, p: f64, quantiles: &[f64]) -> Result<()> {
        writeln!(out, "# p_target,{p:e}")?;
        writeln!(out, "# s,{:e}", self.threshold(p)?)?;
        writeln!(out, "# p_th,{:e}", self.p_th())?;
        writeln!(out, "# tail_mass_0.1pct,{:e}", self.tail_mass(1e-3))?;
        writeln!(out, "quantile,w")?;
        let n = self.w.len();
        for &q in quantiles {
            let idx = ((q * (n - 1) as f64).round() as usize).min(n - 1);
            writeln!(out, "{q},{:e}", self.w[idx])?;
        }
        Ok(())
    }
}

/// Mean minimum power of sample `i` under `seed`; infinite for codewords the
/// rule cannot serve.
pub fn sample_min_power(
    scheme: &LtScheme,
    curve: &dyn MiCurve,
    fading: &FadingModel,
    seed: u64,
    index: u64,
) -> Result<f64> {
    let gamma = fading.sample(&mut sample_rng(seed, index));
    match min_power(scheme, curve, &gamma) {
        Ok(w) => Ok(mean(&w)),
        Err(Error::Infeasible(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Draws `n` gain vectors from stream `seed` and tabulates their minimum powers.
pub fn calibrate(
    scheme: &LtScheme,
    curve: &dyn MiCurve,
    fading: &FadingModel,
    n: usize,
    seed: u64,
) -> Result<CalibrationTable> {
    scheme.check_feasible(curve)?;
    let w: Result<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| sample_min_power(scheme, curve, fading, seed, i))
        .collect();
    CalibrationTable::from_samples(w?)
}

/// Threshold `s` for long-term budget `p` together with its calibration table.
pub fn calibrate_threshold(
    scheme: &LtScheme,
    curve: &dyn MiCurve,
    fading: &FadingModel,
    p: f64,
    n: usize,
    seed: u64,
) -> Result<(f64, CalibrationTable)> {
    let table = calibrate(scheme, curve, fading, n, seed)?;
    Ok((table.threshold(p)?, table))
}

/// Transmit the minimum-power vector if it fits under `s`, else stay silent.
/// Returns the power vector and whether the codeword is in outage.
pub fn lt_policy(wp: Vec<f64>, s: f64) -> (Vec<f64>, bool) {
    if mean(&wp) <= s {
        (wp, false)
    } else {
        (vec![0.0; wp.len()], true)
    }
}

/// Long-term exponent implied by a short-term exponent `d`.
pub fn predict_dlt(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!("exponent must be positive, got {d}")));
    }
    if d == 1.0 {
        return Err(Error::BoundaryExponent);
    }
    Ok(if d > 1.0 { f64::INFINITY } else { d / (1.0 - d) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::{shared_profile, Decoder};

    #[test]
    fn dlt_prediction() {
        assert!((predict_dlt(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(predict_dlt(3.0).unwrap(), f64::INFINITY);
        assert!((predict_dlt(0.25).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(predict_dlt(1.0), Err(Error::BoundaryExponent)));
        assert!(predict_dlt(0.0).is_err());
    }

    #[test]
    fn single_block_min_power_inverts_mi() {
        let q = shared_profile("qpsk", Decoder::Cm).unwrap();
        for (g, r) in [(1.0, 1.0), (0.3, 0.4), (2.5, 1.9)] {
            let w = min_power_opt(q.as_ref(), &[g], r).unwrap();
            let want = q.inv_mi(r).unwrap() / g;
            assert!((w[0] / want - 1.0).abs() < 1e-8, "{w:?} vs {want}");
        }
        assert!(min_power_opt(q.as_ref(), &[1.0], 2.0).is_err());
        assert!(min_power_opt(q.as_ref(), &[1.0], 0.0).is_err());
    }

    #[test]
    fn tw_equal_gains() {
        let q = shared_profile("qpsk", Decoder::Cm).unwrap();
        let w = min_power_tw(q.as_ref(), &[0.5; 4], 1.2, 50.0).unwrap();
        let want = q.inv_mi(1.2).unwrap() / 0.5;
        for v in w {
            assert!((v / want - 1.0).abs() < 1e-8);
        }
        assert!(matches!(
            min_power_tw(q.as_ref(), &[1.0; 4], 1.5, 1.0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn threshold_on_small_table() {
        let t = CalibrationTable::from_samples(vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(t.p_th(), 2.5);
        assert_eq!(t.threshold(3.0).unwrap(), f64::INFINITY);
        assert_eq!(t.threshold(2.5).unwrap(), f64::INFINITY);
        for p in [0.1, 0.25, 0.6, 1.0, 1.7, 2.4] {
            let s = t.threshold(p).unwrap();
            assert!((t.p_of_s(s) - p).abs() < 1e-12, "p={p} s={s}");
        }
        // p(s) is exact at order statistics
        assert!((t.p_of_s(2.0) - 0.75).abs() < 1e-15);
        assert!((t.tail_mass(0.25) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn policy_silences_expensive_codewords() {
        let (p, out) = lt_policy(vec![1.0, 3.0], 1.5);
        assert!(out && p == vec![0.0, 0.0]);
        let (p, out) = lt_policy(vec![1.0, 2.0], f64::INFINITY);
        assert!(!out && p == vec![1.0, 2.0]);
    }
}
