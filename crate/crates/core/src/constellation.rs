//! Unit-energy PSK and square QAM signal sets with Gray labeling.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A labeled complex signal set with unit average energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    name: String,
    bits_per_symbol: u32,
    points: Vec<Complex64>,
    labels: Vec<u32>,
}

/// Index sets `sets[j][q]`: points whose label carries bit `q` in position `j`.
///
/// Position `j = 0` is the most significant label bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPartition {
    sets: Vec<[Vec<usize>; 2]>,
}

fn gray(k: u32) -> u32 {
    k ^ (k >> 1)
}

impl Constellation {
    /// Builds a constellation from raw points, normalizing to unit average energy.
    pub fn from_points(name: &str, points: Vec<Complex64>, labels: Vec<u32>) -> Result<Self> {
        let n = points.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidConstellation(format!("size {n} is not a power of two")));
        }
        if labels.len() != n {
            return Err(Error::InvalidConstellation("label count mismatch".into()));
        }
        let mut seen = vec![false; n];
        for &l in &labels {
            let l = l as usize;
            if l >= n || seen[l] {
                return Err(Error::InvalidConstellation("labels are not a permutation".into()));
            }
            seen[l] = true;
        }
        let energy: f64 = points.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64;
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(Error::InvalidConstellation("zero energy".into()));
        }
        let scale = energy.sqrt().recip();
        Ok(Self {
            name: name.to_string(),
            bits_per_symbol: n.trailing_zeros(),
            points: points.into_iter().map(|x| x * scale).collect(),
            labels,
        })
    }

    /// `2^m` points equally spaced on the unit circle, Gray labeled in angular order.
    ///
    /// QPSK sits at odd multiples of 45 degrees so that it coincides with 4-QAM.
    pub fn psk(m: u32) -> Result<Self> {
        let name = match m {
            1 => "bpsk",
            2 => "qpsk",
            3 => "8psk",
            _ => return Err(Error::UnsupportedOrder(format!("PSK with M={m}"))),
        };
        let n = 1u32 << m;
        let offset = if m == 2 { PI / 4.0 } else { 0.0 };
        let points = (0..n)
            .map(|k| Complex64::from_polar(1.0, offset + 2.0 * PI * k as f64 / n as f64))
            .collect();
        let labels = (0..n).map(gray).collect();
        Self::from_points(name, points, labels)
    }

    /// Square `2^(m/2) x 2^(m/2)` QAM; the in-phase Gray code occupies the high label bits.
    pub fn qam(m: u32) -> Result<Self> {
        if m == 0 || !m.is_multiple_of(2) || m > 6 {
            return Err(Error::UnsupportedOrder(format!("square QAM with M={m}")));
        }
        let half = m / 2;
        let side = 1u32 << half;
        let level = |i: u32| 2.0 * i as f64 - (side as f64 - 1.0);
        let mut points = Vec::with_capacity(1 << m);
        let mut labels = Vec::with_capacity(1 << m);
        for i in 0..side {
            for q in 0..side {
                points.push(Complex64::new(level(i), level(q)));
                labels.push((gray(i) << half) | gray(q));
            }
        }
        let name = match m {
            2 => "4qam",
            4 => "16qam",
            _ => "64qam",
        };
        Self::from_points(name, points, labels)
    }

    /// Looks up a constellation by its short name (`qpsk`, `8psk`, `16qam`, ...).
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "bpsk" | "2psk" => Self::psk(1),
            "qpsk" | "4psk" => Self::psk(2),
            "8psk" => Self::psk(3),
            "4qam" => Self::qam(2),
            "16qam" => Self::qam(4),
            "64qam" => Self::qam(6),
            other => Err(Error::UnknownName(format!("constellation '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Bit `j` (0 = MSB) of the label of point `idx`.
    pub fn label_bit(&self, idx: usize, j: u32) -> u32 {
        (self.labels[idx] >> (self.bits_per_symbol - 1 - j)) & 1
    }

    pub fn bit_partition(&self) -> BitPartition {
        let m = self.bits_per_symbol;
        let sets = (0..m)
            .map(|j| {
                let mut s: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
                for idx in 0..self.len() {
                    s[self.label_bit(idx, j) as usize].push(idx);
                }
                s
            })
            .collect();
        BitPartition { sets }
    }
}

impl BitPartition {
    pub fn positions(&self) -> usize {
        self.sets.len()
    }

    pub fn set(&self, position: usize, bit: usize) -> &[usize] {
        &self.sets[position][bit]
    }
}
