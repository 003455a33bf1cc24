//! Point evaluations of CM/BICM mutual information and MMSE by quadrature.

use num_complex::Complex64;
use std::f64::consts::LN_2;
use std::sync::OnceLock;

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::quadrature::GaussHermite;

pub const DEFAULT_QUAD_ORDER: usize = 32;

/// Values at one SNR. `mi_bicm` is `NaN` unless requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwgnPoint {
    pub mi_cm: f64,
    pub mi_bicm: f64,
    pub mmse: f64,
}

/// Evaluates `E_X E_Z[...]` for `Y = sqrt(rho) X + Z`, `Z ~ CN(0,1)`, with a
/// product Gauss-Hermite rule over the noise.
#[derive(Debug, Clone)]
pub struct AwgnEvaluator {
    points: Vec<Complex64>,
    labels: Vec<u32>,
    bits: u32,
    rule: Vec<(Complex64, f64)>,
    order: usize,
}

impl AwgnEvaluator {
    pub fn new(c: &Constellation, order: usize) -> Self {
        Self {
            points: c.points().to_vec(),
            labels: c.labels().to_vec(),
            bits: c.bits_per_symbol(),
            rule: GaussHermite::new(order).complex_gaussian_rule(),
            order,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// One pass over `(x, z)` that yields CM MI, MMSE and optionally BICM MI.
    pub fn eval(&self, rho: f64, with_bicm: bool) -> AwgnPoint {
        let n = self.points.len();
        let m = self.bits as usize;
        if rho == 0.0 {
            return AwgnPoint {
                mi_cm: 0.0,
                mi_bicm: if with_bicm { 0.0 } else { f64::NAN },
                mmse: self.points.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64,
            };
        }
        let s = rho.sqrt();
        let mut e = vec![0.0; n];
        let mut d = vec![Complex64::new(0.0, 0.0); n];
        let mut bit_sums = vec![0.0; m];
        let (mut lse_acc, mut mmse_acc, mut bicm_acc) = (0.0, 0.0, 0.0);
        for (i, &x) in self.points.iter().enumerate() {
            for (k, &xp) in self.points.iter().enumerate() {
                d[k] = s * (x - xp);
            }
            let lx = self.labels[i];
            let (mut lse_x, mut mmse_x, mut bicm_x) = (0.0, 0.0, 0.0);
            for &(z, w) in &self.rule {
                // e_k = |z|² - |d_k + z|², zero for k = i
                let mut emax = 0.0f64;
                for k in 0..n {
                    let dk = d[k];
                    let v = -dk.norm_sqr() - 2.0 * (dk.re * z.re + dk.im * z.im);
                    e[k] = v;
                    emax = emax.max(v);
                }
                let mut total = 0.0;
                let mut err = Complex64::new(0.0, 0.0);
                bit_sums.iter_mut().for_each(|b| *b = 0.0);
                for k in 0..n {
                    let t = (e[k] - emax).exp();
                    total += t;
                    err += d[k] * t;
                    if with_bicm {
                        // same-bit terms for every label position
                        let same = !(self.labels[k] ^ lx);
                        for (j, b) in bit_sums.iter_mut().enumerate() {
                            if (same >> (m - 1 - j)) & 1 == 1 {
                                *b += t;
                            }
                        }
                    }
                }
                let ln_total = total.ln();
                lse_x += w * (emax + ln_total);
                // x - E[X|y] = sum_k w_k (x - x_k), with d_k = sqrt(rho)(x - x_k)
                mmse_x += w * (err / total).norm_sqr();
                if with_bicm {
                    let mut acc = 0.0;
                    for &b in &bit_sums {
                        acc += ln_total - b.ln();
                    }
                    bicm_x += w * acc;
                }
            }
            lse_acc += lse_x;
            mmse_acc += mmse_x;
            bicm_acc += bicm_x;
        }
        let nf = n as f64;
        let mf = m as f64;
        AwgnPoint {
            mi_cm: (mf - lse_acc / nf / LN_2).clamp(0.0, mf),
            mi_bicm: if with_bicm {
                (mf - bicm_acc / nf / LN_2).clamp(0.0, mf)
            } else {
                f64::NAN
            },
            mmse: (mmse_acc / nf / rho).max(0.0),
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho >= 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "SNR must be finite and nonnegative, got {rho}"
        )))
    }
}

fn default_rule_eval(c: &Constellation) -> AwgnEvaluator {
    // the rule itself is the expensive part to rebuild; points are cheap to copy
    static RULE: OnceLock<Vec<(Complex64, f64)>> = OnceLock::new();
    let rule = RULE
        .get_or_init(|| GaussHermite::new(DEFAULT_QUAD_ORDER).complex_gaussian_rule())
        .clone();
    AwgnEvaluator {
        points: c.points().to_vec(),
        labels: c.labels().to_vec(),
        bits: c.bits_per_symbol(),
        rule,
        order: DEFAULT_QUAD_ORDER,
    }
}

/// Coded-modulation mutual information in bits per symbol.
pub fn mi_cm(c: &Constellation, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(default_rule_eval(c).eval(rho, false).mi_cm)
}

/// BICM mutual information (sum over label positions) in bits per symbol.
pub fn mi_bicm(c: &Constellation, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(default_rule_eval(c).eval(rho, true).mi_bicm)
}

/// `E|X - E[X|Y]|²` for the uniform prior on `c`.
pub fn mmse_cm(c: &Constellation, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(default_rule_eval(c).eval(rho, false).mmse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_snr() {
        let q = Constellation::psk(2).unwrap();
        assert_eq!(mi_cm(&q, 0.0).unwrap(), 0.0);
        assert!((mmse_cm(&q, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let q16 = Constellation::qam(4).unwrap();
        assert_eq!(mi_bicm(&q16, 0.0).unwrap(), 0.0);
        assert!((mmse_cm(&q16, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(mi_cm(&q, -1.0).is_err());
    }

    #[test]
    fn small_snr_matches_first_order_expansion() {
        // I ≈ rho/ln2 and MMSE ≈ 1 for any zero-mean unit-energy input
        let q = Constellation::psk(3).unwrap();
        let rho = 1e-4;
        let i = mi_cm(&q, rho).unwrap();
        assert!((i * LN_2 / rho - 1.0).abs() < 1e-3);
        assert!((mmse_cm(&q, rho).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn qpsk_saturates() {
        let q = Constellation::psk(2).unwrap();
        assert!((mi_cm(&q, 1e4).unwrap() - 2.0).abs() < 1e-3);
        assert!(mmse_cm(&q, 1e4).unwrap() < 1e-6);
    }

    #[test]
    fn qpsk_bicm_equals_cm() {
        let q = Constellation::psk(2).unwrap();
        for rho in [0.01, 0.3, 1.0, 3.0, 10.0, 40.0] {
            let a = mi_cm(&q, rho).unwrap();
            let b = mi_bicm(&q, rho).unwrap();
            assert!((a - b).abs() < 1e-6, "rho={rho}: {a} vs {b}");
        }
    }

    #[test]
    fn qpsk_is_two_bpsk_channels() {
        // QPSK at rho equals 2x BPSK at rho/2 (per-dimension SNR halves)
        let q = Constellation::psk(2).unwrap();
        let b = Constellation::psk(1).unwrap();
        for rho in [0.2, 2.0, 8.0] {
            let iq = mi_cm(&q, rho).unwrap();
            let ib = mi_cm(&b, rho / 2.0).unwrap();
            assert!((iq - 2.0 * ib).abs() < 1e-9);
        }
    }

    #[test]
    fn mmse_is_scaled_mi_derivative() {
        let q = Constellation::psk(2).unwrap();
        let h = 1e-3;
        let fd = LN_2 * (mi_cm(&q, 2.0 + h).unwrap() - mi_cm(&q, 2.0 - h).unwrap()) / (2.0 * h);
        assert!((fd - mmse_cm(&q, 2.0).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn bicm_below_cm_for_16qam() {
        let c = Constellation::qam(4).unwrap();
        let ev = AwgnEvaluator::new(&c, DEFAULT_QUAD_ORDER);
        let p = ev.eval(10.0, true);
        assert!(p.mi_bicm <= p.mi_cm);
        assert!(p.mi_cm - p.mi_bicm < 0.1);
    }
}
