//! Monte Carlo outage estimation, SNR-exponent fits and horizontal gaps
//! between outage curves.

use rayon::prelude::*;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fading::FadingModel;
use crate::infotheory::MiCurve;
use crate::longterm::{calibrate, min_power, CalibrationTable, LtScheme};
use crate::powalloc::{allocate, mean, StScheme};
use crate::rng::{derive_seed, sample_rng};

/// Samples per parallel work item; fixed so counts do not depend on the pool.
const CHUNK: usize = 4096;

/// Slack used when a cheap bound decides the optimal short-term outcome.
const BOUND_EPS: f64 = 1e-9;

/// `(1/B) sum_b I(p_b gamma_b)`.
pub fn instantaneous_mi(curve: &dyn MiCurve, p: &[f64], gamma: &[f64]) -> Result<f64> {
    if p.len() != gamma.len() {
        return Err(Error::DimensionMismatch(p.len(), gamma.len()));
    }
    if p.is_empty() {
        return Err(Error::InvalidArgument("empty power vector".into()));
    }
    Ok(p.iter().zip(gamma).map(|(&pb, &g)| curve.mi(pb * g)).sum::<f64>() / p.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutageScheme {
    Short(StScheme),
    /// Long-term rule; its `rate` field is replaced by the campaign rate.
    Long(LtScheme),
}

impl OutageScheme {
    pub fn label(&self) -> String {
        match self {
            OutageScheme::Short(s) => s.label(),
            OutageScheme::Long(l) => l.label(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub samples: usize,
    /// Calibration draws for long-term thresholds.
    pub cal_samples: usize,
    pub seed: u64,
    /// Evaluate every power point instead of searching the monotone boundary.
    pub full_sweep: bool,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            cal_samples: samples,
            seed,
            full_sweep: false,
        }
    }

    pub fn evaluation_seed(&self) -> u64 {
        derive_seed(self.seed, "evaluation")
    }

    pub fn calibration_seed(&self) -> u64 {
        derive_seed(self.seed, "calibration")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutagePoint {
    pub p_db: f64,
    pub count: u64,
    pub n: u64,
    pub outage: f64,
    /// 95% half-width.
    pub ci: f64,
    /// Fewer than ten outage events.
    pub low_count: bool,
}

impl OutagePoint {
    pub fn new(p_db: f64, count: u64, n: u64) -> Self {
        let outage = count as f64 / n as f64;
        Self {
            p_db,
            count,
            n,
            outage,
            ci: ci_half_width(count, n),
            low_count: count < 10,
        }
    }

    pub fn rel_ci(&self) -> f64 {
        if self.outage > 0.0 {
            self.ci / self.outage
        } else {
            f64::INFINITY
        }
    }
}

/// 95% half-width: Wilson below 30 events, normal approximation above.
pub fn ci_half_width(count: u64, n: u64) -> f64 {
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = count as f64 / nf;
    if (count as f64) < 30.0 {
        let z2 = z * z;
        z / (1.0 + z2 / nf) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt()
    } else {
        z * (p * (1.0 - p) / nf).sqrt()
    }
}

/// Long-term thresholds and calibration summary for one curve.
#[derive(Debug, Clone, PartialEq)]
pub struct LtCalibration {
    pub p_th: f64,
    pub tail_mass: f64,
    /// Threshold `s` per power point.
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutageCurve {
    pub scheme: String,
    pub rate: f64,
    pub fading: String,
    pub points: Vec<OutagePoint>,
    /// Reason when the scheme cannot serve this rate; every point is then outage.
    pub infeasible: Option<String>,
    pub calibration: Option<LtCalibration>,
}

impl OutageCurve {
    pub fn from_counts(scheme: String, rate: f64, fading: String, p_db: &[f64], counts: &[u64], n: u64) -> Self {
        Self {
            scheme,
            rate,
            fading,
            points: p_db
                .iter()
                .zip(counts)
                .map(|(&x, &c)| OutagePoint::new(x, c, n))
                .collect(),
            infeasible: None,
            calibration: None,
        }
    }

    pub fn p_db(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.p_db).collect()
    }

    pub fn outages(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.outage).collect()
    }

    /// CSV with columns `scheme,P_dB,outage,ci,N`; `fits` are appended as comment rows.
    pub fn write_csv<W: Write>(&self, out: &mut W, fits: &[SlopeFit]) -> Result<()> {
        writeln!(out, "scheme,P_dB,outage,ci,N")?;
        let name = csv_field(&self.scheme);
        if let Some(why) = &self.infeasible {
            writeln!(out, "{name},infeasible,1,0,0")?;
            writeln!(out, "# infeasible: {why}")?;
        }
        for p in &self.points {
            writeln!(out, "{name},{},{:e},{:e},{}", p.p_db, p.outage, p.ci, p.n)?;
        }
        for f in fits {
            writeln!(
                out,
                "# slope,{:.6},{},{},{:e},{}",
                f.d_hat, f.window.0, f.window.1, f.residual, f.points_used
            )?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn check_grid(p_db: &[f64]) -> Result<()> {
    if p_db.is_empty() {
        return Err(Error::InvalidArgument("empty power grid".into()));
    }
    if p_db.iter().any(|x| !x.is_finite()) || p_db.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "power grid must be finite and strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Sums per-point counts over all samples, in fixed chunks so the result is
/// independent of the worker count. `per_sample` adds one sample's outcomes.
fn count_parallel<F>(n: usize, points: usize, blocks: usize, per_sample: F) -> Result<Vec<u64>>
where
    F: Fn(u64, &mut [f64], &mut [u64]) -> Result<()> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; points];
            let mut gamma = vec![0.0; blocks];
            let end = ((c + 1) * CHUNK).min(n);
            for i in c * CHUNK..end {
                per_sample(i as u64, &mut gamma, &mut counts)?;
            }
            Ok(counts)
        })
        .try_reduce(
            || vec![0u64; points],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )
}

/// Short-term outcome of one realization at linear power `p`.
fn st_success(scheme: &StScheme, curve: &dyn MiCurve, gamma: &[f64], r: f64, p: f64) -> Result<bool> {
    if *scheme == StScheme::Optimal {
        let b = gamma.len() as f64;
        let uniform = gamma.iter().map(|&g| curve.mi(p * g)).sum::<f64>() / b;
        if uniform >= r + BOUND_EPS {
            return Ok(true);
        }
        // no block can hold more than the whole budget
        let upper = gamma.iter().map(|&g| curve.mi(b * p * g)).sum::<f64>() / b;
        if upper < r - BOUND_EPS {
            return Ok(false);
        }
    }
    let alloc = allocate(scheme, curve, gamma, p)?;
    Ok(instantaneous_mi(curve, &alloc, gamma)? >= r)
}

/// Marks outages of one realization over the ascending power grid `p_lin`.
fn st_sample(
    scheme: &StScheme,
    curve: &dyn MiCurve,
    gamma: &[f64],
    r: f64,
    p_lin: &[f64],
    full_sweep: bool,
    counts: &mut [u64],
) -> Result<()> {
    if full_sweep {
        for (c, &p) in counts.iter_mut().zip(p_lin) {
            if !st_success(scheme, curve, gamma, r, p)? {
                *c += 1;
            }
        }
        return Ok(());
    }
    // outage is nonincreasing in P: find the first success
    let (mut lo, mut hi) = (0usize, p_lin.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if st_success(scheme, curve, gamma, r, p_lin[mid])? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    for c in &mut counts[..lo] {
        *c += 1;
    }
    Ok(())
}

/// Outage curve of `scheme` at rate `r` over the power grid `p_db`.
///
/// Evaluation draws come from the `evaluation` stream of `cfg.seed`, so all
/// schemes run on the same realizations; long-term thresholds are calibrated
/// on the independent `calibration` stream.
pub fn estimate_outage(
    scheme: &OutageScheme,
    curve: &dyn MiCurve,
    fading: &FadingModel,
    r: f64,
    p_db: &[f64],
    cfg: &McConfig,
) -> Result<OutageCurve> {
    check_grid(p_db)?;
    if cfg.samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate {r} must be positive")));
    }
    let p_lin: Vec<f64> = p_db.iter().map(|&x| db_to_lin(x)).collect();
    let n = cfg.samples;
    let eval_seed = cfg.evaluation_seed();
    let blocks = fading.blocks();
    let label = scheme.label();
    let desc = fading.describe();
    match scheme {
        OutageScheme::Short(st) => {
            st.validate()?;
            let counts = count_parallel(n, p_lin.len(), blocks, |i, gamma, counts| {
                fading.sample_into(&mut sample_rng(eval_seed, i), gamma);
                st_sample(st, curve, gamma, r, &p_lin, cfg.full_sweep, counts)
            })?;
            Ok(OutageCurve::from_counts(label, r, desc, p_db, &counts, n as u64))
        }
        OutageScheme::Long(lt) => {
            let lt = LtScheme { rate: r, ..*lt };
            if let Err(e) = lt.check_feasible(curve) {
                if let Error::Infeasible(why) = e {
                    let all = vec![n as u64; p_db.len()];
                    let mut c = OutageCurve::from_counts(label, r, desc, p_db, &all, n as u64);
                    c.infeasible = Some(why);
                    return Ok(c);
                }
                return Err(e);
            }
            let table = calibrate(&lt, curve, fading, cfg.cal_samples, cfg.calibration_seed())?;
            let s: Vec<f64> = p_lin.iter().map(|&p| table.threshold(p)).collect::<Result<_>>()?;
            let counts = count_parallel(n, p_lin.len(), blocks, |i, gamma, counts| {
                fading.sample_into(&mut sample_rng(eval_seed, i), gamma);
                let w = match min_power(&lt, curve, gamma) {
                    Ok(wp) => mean(&wp),
                    Err(Error::Infeasible(_)) => f64::INFINITY,
                    Err(e) => return Err(e),
                };
                // thresholds grow with P, so outages form a prefix
                let k = s.partition_point(|&sk| w > sk);
                for c in &mut counts[..k] {
                    *c += 1;
                }
                Ok(())
            })?;
            let mut c = OutageCurve::from_counts(label, r, desc, p_db, &counts, n as u64);
            c.calibration = Some(LtCalibration {
                p_th: table.p_th(),
                tail_mass: table.tail_mass(1e-3),
                thresholds: s,
            });
            Ok(c)
        }
    }
}

/// Curves traced by sweeping the threshold over `s_db` on one sample of minimum
/// powers: the dual short-term curve (outage vs `s`) and the long-term curve
/// (the same outage vs the spent average power `P(s)`).
pub fn threshold_sweep(
    table: &CalibrationTable,
    s_db: &[f64],
    label: &str,
    rate: f64,
    fading: &str,
) -> Result<(OutageCurve, OutageCurve)> {
    check_grid(s_db)?;
    let n = table.len() as u64;
    let w = table.sorted();
    let mut dual = Vec::with_capacity(s_db.len());
    let mut long = Vec::with_capacity(s_db.len());
    for &x in s_db {
        let s = db_to_lin(x);
        let count = (w.len() - w.partition_point(|&v| v <= s)) as u64;
        dual.push(OutagePoint::new(x, count, n));
        long.push(OutagePoint::new(10.0 * table.p_of_s(s).log10(), count, n));
    }
    let mk = |suffix: &str, points| OutageCurve {
        scheme: format!("{label}{suffix}"),
        rate,
        fading: fading.to_string(),
        points,
        infeasible: None,
        calibration: None,
    };
    Ok((mk("-dual", dual), mk("", long)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub d_hat: f64,
    /// dB range of the points used.
    pub window: (f64, f64),
    /// RMS residual of the fit in log10 units.
    pub residual: f64,
    pub points_used: usize,
}

fn usable(p: &OutagePoint) -> bool {
    p.outage > 0.0 && p.count >= 20 && p.rel_ci() < 0.2
}

fn fit_points(pts: &[&OutagePoint]) -> Result<SlopeFit> {
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable points in the fit window, need 3",
            pts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.p_db / 10.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.outage.log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("fit points share one abscissa".into()));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    let lo = pts.iter().map(|p| p.p_db).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.p_db).fold(f64::NEG_INFINITY, f64::max);
    Ok(SlopeFit {
        d_hat: -slope,
        window: (lo, hi),
        residual: (rss / n).sqrt(),
        points_used: pts.len(),
    })
}

/// Least-squares exponent over the points with `lo_db <= P_dB <= hi_db`.
/// Points below 20 events or with relative CI of 20% or more are dropped.
pub fn fit_exponent(curve: &OutageCurve, lo_db: f64, hi_db: f64) -> Result<SlopeFit> {
    let pts: Vec<&OutagePoint> = curve
        .points
        .iter()
        .filter(|p| p.p_db >= lo_db && p.p_db <= hi_db && usable(p))
        .collect();
    fit_points(&pts)
}

/// Exponent over the points whose outage lies in `[p_min, p_max]`.
pub fn fit_exponent_between(curve: &OutageCurve, p_min: f64, p_max: f64) -> Result<SlopeFit> {
    let pts: Vec<&OutagePoint> = curve
        .points
        .iter()
        .filter(|p| p.outage >= p_min && p.outage <= p_max && usable(p))
        .collect();
    fit_points(&pts)
}

/// dB at which the curve first drops to `target`, interpolating log10 outage
/// linearly in dB.
pub fn crossing_db(curve: &OutageCurve, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!("target outage {target} outside (0, 1)")));
    }
    let lt = target.log10();
    for w in curve.points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.outage >= target && b.outage <= target && b.outage > 0.0 {
            if a.outage == b.outage {
                return Ok(a.p_db);
            }
            let (ya, yb) = (a.outage.log10(), b.outage.log10());
            return Ok(a.p_db + (lt - ya) / (yb - ya) * (b.p_db - a.p_db));
        }
    }
    Err(Error::InsufficientData(format!(
        "curve '{}' does not bracket outage {target}",
        curve.scheme
    )))
}

/// Extra power (dB) curve `b` needs over curve `a` to reach `target` outage.
pub fn gain_at(a: &OutageCurve, b: &OutageCurve, target: f64) -> Result<f64> {
    Ok(crossing_db(b, target)? - crossing_db(a, target)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::GaussianInput;

    fn synthetic(f: impl Fn(f64) -> f64, xs: &[f64]) -> OutageCurve {
        let n = 1_000_000_000u64;
        let counts: Vec<u64> = xs.iter().map(|&x| (f(x) * n as f64).round() as u64).collect();
        OutageCurve::from_counts("syn".into(), 1.0, "none".into(), xs, &counts, n)
    }

    #[test]
    fn mi_of_power_vector() {
        let g = GaussianInput;
        assert_eq!(instantaneous_mi(&g, &[0.0; 3], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!(matches!(
            instantaneous_mi(&g, &[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch(1, 2))
        ));
        let a = instantaneous_mi(&g, &[1.0, 2.0, 0.5], &[3.0, 0.1, 2.0]).unwrap();
        let b = instantaneous_mi(&g, &[0.5, 1.0, 2.0], &[2.0, 3.0, 0.1]).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn exact_power_law_slope() {
        let xs: Vec<f64> = (0..8).map(|i| 5.0 + 2.0 * i as f64).collect();
        let c = synthetic(|x| 0.5 * db_to_lin(x).powi(-3), &xs);
        let fit = fit_exponent(&c, 0.0, 100.0).unwrap();
        assert!((fit.d_hat - 3.0).abs() < 0.01, "{fit:?}");
        assert!(fit_exponent(&c, 5.0, 7.0).is_err());
    }

    #[test]
    fn shifted_curve_gain() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let a = synthetic(|x| db_to_lin(x).powi(-2).min(1.0), &xs);
        let b = synthetic(|x| db_to_lin(x - 5.0).powi(-2).min(1.0), &xs);
        assert!(gain_at(&a, &a, 1e-3).unwrap().abs() < 1e-12);
        assert!((gain_at(&a, &b, 1e-3).unwrap() - 5.0).abs() < 1e-6);
        assert!(gain_at(&a, &b, 1e-9).is_err());
    }

    #[test]
    fn ci_choice() {
        // Wilson for few events stays positive at zero count
        assert!(ci_half_width(0, 1000) > 0.0);
        let normal = 1.959_963_984_540_054 * (0.1f64 * 0.9 / 1000.0).sqrt();
        assert!((ci_half_width(100, 1000) - normal).abs() < 1e-15);
        assert!(OutagePoint::new(0.0, 5, 1000).low_count);
    }

    #[test]
    fn csv_layout() {
        let c = synthetic(|_| 0.5, &[0.0, 1.0]);
        let mut buf = Vec::new();
        c.write_csv(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scheme,P_dB,outage,ci,N");
        assert!(lines[1].starts_with("syn,0,5e-1,"));
        assert_eq!(lines.len(), 3);
    }
}
