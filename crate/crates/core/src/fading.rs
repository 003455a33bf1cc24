//! Fading gain generators: i.i.d. Nakagami-m blocks and OFDM subcarriers
//! obtained from a tapped power delay profile.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::{gamma_lr, ln_gamma};
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// Exact zeros from underflow are replaced by this so that `1/gamma` stays finite.
pub const MIN_GAIN: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NakagamiSpec {
    pub m: f64,
    pub blocks: usize,
}

impl NakagamiSpec {
    pub fn new(m: f64, blocks: usize) -> Result<Self> {
        if !(m >= 0.5 && m.is_finite()) {
            return Err(Error::InvalidArgument(format!("Nakagami m must be >= 0.5, got {m}")));
        }
        if blocks == 0 {
            return Err(Error::InvalidArgument("need at least one block".into()));
        }
        Ok(Self { m, blocks })
    }
}

/// Unit-mean power gain density of Nakagami-m fading.
pub fn nakagami_pdf(m: f64, xi: f64) -> f64 {
    if xi < 0.0 {
        return 0.0;
    }
    if xi == 0.0 {
        return match m.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => 1.0,
            _ => 0.0,
        };
    }
    (m * m.ln() + (m - 1.0) * xi.ln() - m * xi - ln_gamma(m)).exp()
}

/// `P(gamma <= xi)`, the regularized lower incomplete gamma `P(m, m xi)`.
pub fn nakagami_cdf(m: f64, xi: f64) -> f64 {
    if xi <= 0.0 {
        return 0.0;
    }
    gamma_lr(m, m * xi)
}

/// Nakagami shape matching a Rician channel with K-factor `k`.
pub fn m_from_rician_k(k: f64) -> Result<f64> {
    if !(k >= 0.0) {
        return Err(Error::InvalidArgument(format!("K-factor must be nonnegative, got {k}")));
    }
    Ok((k + 1.0).powi(2) / (2.0 * k + 1.0))
}

/// Tapped delay line in linear power, normalized to unit total power.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmSpec {
    subcarriers: usize,
    delays: Vec<usize>,
    powers: Vec<f64>,
    /// `twiddle[b * L + l] = exp(-j 2 pi delay_l b / B)`
    twiddle: Vec<Complex64>,
}

impl OfdmSpec {
    /// Builds from `(delay index, power in dB)` rows.
    pub fn new(subcarriers: usize, taps: &[(usize, f64)]) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidArgument("empty power delay profile".into()));
        }
        if subcarriers < taps.len() {
            return Err(Error::InvalidArgument(format!(
                "{subcarriers} subcarriers cannot resolve {} taps",
                taps.len()
            )));
        }
        if taps.iter().any(|t| !t.1.is_finite()) {
            return Err(Error::InvalidArgument("tap powers must be finite".into()));
        }
        let lin: Vec<f64> = taps.iter().map(|t| 10f64.powf(t.1 / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        let powers: Vec<f64> = lin.iter().map(|p| p / total).collect();
        let delays: Vec<usize> = taps.iter().map(|t| t.0).collect();
        let mut twiddle = Vec::with_capacity(subcarriers * taps.len());
        for b in 0..subcarriers {
            for &l in &delays {
                // reduce the phase index first to keep the argument small
                let k = (l * b) % subcarriers;
                twiddle.push(Complex64::from_polar(1.0, -2.0 * PI * k as f64 / subcarriers as f64));
            }
        }
        Ok(Self {
            subcarriers,
            delays,
            powers,
            twiddle,
        })
    }

    /// Parses `delay_index, power_db` rows; `#` comments and a header line are skipped.
    pub fn parse_pdp(text: &str) -> Result<Vec<(usize, f64)>> {
        let mut taps = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let (a, b) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => return Err(Error::Config(format!("PDP line {}: expected two columns", n + 1))),
            };
            match (a.parse::<usize>(), b.parse::<f64>()) {
                (Ok(d), Ok(p)) => taps.push((d, p)),
                _ if taps.is_empty() && a.parse::<f64>().is_err() => continue, // header
                _ => return Err(Error::Config(format!("PDP line {}: cannot parse '{line}'", n + 1))),
            }
        }
        Ok(taps)
    }

    pub fn from_file(path: &Path, subcarriers: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::new(subcarriers, &Self::parse_pdp(&text)?)
    }

    /// The normalized ETSI BRAN-A profile at 50 ns tap spacing.
    pub fn bran_a(subcarriers: usize) -> Result<Self> {
        Self::new(subcarriers, &BRAN_A)
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    /// Linear tap powers summing to one.
    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    /// Correlation coefficient of subcarrier power gains `delta` bins apart.
    pub fn gain_correlation(&self, delta: usize) -> f64 {
        let b = self.subcarriers as f64;
        let r: Complex64 = self
            .delays
            .iter()
            .zip(&self.powers)
            .map(|(&l, &p)| p * Complex64::from_polar(1.0, -2.0 * PI * (l * delta) as f64 / b))
            .sum();
        r.norm_sqr()
    }
}

pub const BRAN_A: [(usize, f64); 9] = [
    (1, -3.4630),
    (2, -4.6006),
    (3, -8.9151),
    (4, -12.8223),
    (5, -19.9222),
    (6, -21.1202),
    (7, -25.4329),
    (8, -29.7891),
    (9, -34.1993),
];

#[derive(Debug, Clone, PartialEq)]
pub enum FadingModel {
    Nakagami(NakagamiSpec),
    Ofdm(OfdmSpec),
}

impl FadingModel {
    pub fn blocks(&self) -> usize {
        match self {
            FadingModel::Nakagami(s) => s.blocks,
            FadingModel::Ofdm(s) => s.subcarriers,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FadingModel::Nakagami(s) => format!("nakagami(m={}, B={})", s.m, s.blocks),
            FadingModel::Ofdm(s) => format!("ofdm(B={}, taps={})", s.subcarriers, s.delays.len()),
        }
    }

    /// Fills `out` (length `blocks()`) with one realization.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.blocks());
        match self {
            FadingModel::Nakagami(s) => {
                let g = Gamma::new(s.m, 1.0 / s.m).expect("validated shape");
                for v in out.iter_mut() {
                    *v = g.sample(rng).max(MIN_GAIN);
                }
            }
            FadingModel::Ofdm(s) => {
                let nt = s.delays.len();
                let taps: Vec<Complex64> = s
                    .powers
                    .iter()
                    .map(|&p| {
                        let sd = (p / 2.0).sqrt();
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(sd * re, sd * im)
                    })
                    .collect();
                for (b, v) in out.iter_mut().enumerate() {
                    let tw = &s.twiddle[b * nt..(b + 1) * nt];
                    let y: Complex64 = taps.iter().zip(tw).map(|(a, w)| a * w).sum();
                    *v = y.norm_sqr().max(MIN_GAIN);
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.blocks()];
        self.sample_into(rng, &mut out);
        out
    }
}
