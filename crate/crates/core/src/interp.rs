//! Shape-preserving piecewise-cubic Hermite interpolation.

/// Piecewise cubic Hermite interpolant that is monotone whenever the data are.
///
/// Slopes are either supplied (and then limited by the Fritsch-Carlson
/// condition) or estimated with the Fritsch-Butland harmonic mean.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn secants(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| (yw[1] - yw[0]) / (xw[1] - xw[0]))
        .collect()
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert!(x.len() == y.len() && x.len() >= 2);
        let del = secants(&x, &y);
        let n = x.len();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let (a, b) = (del[i - 1], del[i]);
            if a * b > 0.0 {
                let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                d[i] = (w1 + w2) / (w1 / a + w2 / b);
            }
        }
        d[0] = Self::end_slope(
            x[1] - x[0],
            x[2.min(n - 1)] - x[1],
            del[0],
            *del.get(1).unwrap_or(&del[0]),
        );
        d[n - 1] = Self::end_slope(
            x[n - 1] - x[n - 2],
            x[n - 2] - x[n.saturating_sub(3)],
            del[n - 2],
            del[n.saturating_sub(3).min(n - 2)],
        );
        let mut s = Self { x, y, d };
        s.limit(&del);
        s
    }

    /// Hermite interpolant with prescribed knot slopes, limited to stay monotone.
    pub fn with_slopes(x: Vec<f64>, y: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert!(x.len() == y.len() && y.len() == slopes.len() && x.len() >= 2);
        let del = secants(&x, &y);
        let mut s = Self { x, y, d: slopes };
        s.limit(&del);
        s
    }

    fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
        if h1 <= 0.0 {
            return del0;
        }
        let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
        if d * del0 <= 0.0 {
            0.0
        } else if del0 * del1 <= 0.0 && d.abs() > 3.0 * del0.abs() {
            3.0 * del0
        } else {
            d
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn limit(&mut self, del: &[f64]) {
        let n = self.x.len();
        for k in 0..n - 1 {
            let dk = del[k];
            if dk == 0.0 {
                self.d[k] = 0.0;
                self.d[k + 1] = 0.0;
                continue;
            }
            // slopes must agree in sign with the secant
            if self.d[k] * dk < 0.0 {
                self.d[k] = 0.0;
            }
            if self.d[k + 1] * dk < 0.0 {
                self.d[k + 1] = 0.0;
            }
            let a = self.d[k] / dk;
            let b = self.d[k + 1] / dk;
            let r = a * a + b * b;
            if r > 9.0 {
                let t = 3.0 / r.sqrt();
                self.d[k] = t * a * dk;
                self.d[k + 1] = t * b * dk;
            }
        }
    }

    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    pub fn slopes(&self) -> &[f64] {
        &self.d
    }

    /// Segment index `k` with `x[k] <= t < x[k+1]`, clamped to the table.
    #[inline]
    pub fn segment(&self, t: f64) -> usize {
        let i = self.x.partition_point(|&v| v <= t);
        i.saturating_sub(1).min(self.x.len() - 2)
    }

    #[inline]
    pub fn eval_segment(&self, k: usize, t: f64) -> f64 {
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }

    #[inline]
    pub fn derivative_segment(&self, k: usize, t: f64) -> f64 {
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let dh00 = (6.0 * s2 - 6.0 * s) / h;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = (-6.0 * s2 + 6.0 * s) / h;
        let dh11 = 3.0 * s2 - 2.0 * s;
        dh00 * self.y[k] + dh10 * self.d[k] + dh01 * self.y[k + 1] + dh11 * self.d[k + 1]
    }

    /// Evaluates inside the table; outside it the end values are held.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        self.eval_segment(self.segment(t), t)
    }

    /// Solves `eval(t) = v` for a monotone interpolant, returning the smallest such
    /// `t` inside the table, or `None` when `v` lies outside the range of values.
    pub fn invert(&self, v: f64) -> Option<f64> {
        let n = self.x.len();
        let increasing = self.y[n - 1] >= self.y[0];
        let (lo_v, hi_v) = if increasing {
            (self.y[0], self.y[n - 1])
        } else {
            (self.y[n - 1], self.y[0])
        };
        if !(v >= lo_v && v <= hi_v) {
            return None;
        }
        // first knot whose value reaches v
        let j = if increasing {
            self.y.partition_point(|&y| y < v)
        } else {
            self.y.partition_point(|&y| y > v)
        };
        if j == 0 {
            return Some(self.x[0]);
        }
        if self.y[j] == v {
            // leftmost knot attaining v (plateaus)
            let mut i = j;
            while i > 0 && self.y[i - 1] == v {
                i -= 1;
            }
            return Some(self.x[i]);
        }
        let k = j - 1;
        let sign = if increasing { 1.0 } else { -1.0 };
        let (mut a, mut b) = (self.x[k], self.x[k + 1]);
        let mut t = a + (b - a) * (v - self.y[k]) / (self.y[k + 1] - self.y[k]);
        for _ in 0..100 {
            let f = sign * (self.eval_segment(k, t) - v);
            if f == 0.0 {
                return Some(t);
            }
            if f > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let df = sign * self.derivative_segment(k, t);
            if df > 0.0 && (f / df).abs() <= 1e-15 * t.abs() {
                break;
            }
            let newton = t - f / df;
            t = if df > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a <= 4.0 * f64::EPSILON * b.abs().max(1e-300) {
                break;
            }
        }
        Some(t.clamp(self.x[k], self.x[k + 1]))
    }
}
