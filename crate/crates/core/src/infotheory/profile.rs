//! Tabulated, invertible MI/MMSE curves for one (constellation, decoder) pair.

use log::{info, warn};
use rayon::prelude::*;
use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use super::awgn::{AwgnEvaluator, DEFAULT_QUAD_ORDER};
use super::cache;
use super::{Decoder, MiCurve};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;

/// MMSE values below this are treated as numerically zero and replaced by a
/// log-linear tail.
const MMSE_FLOOR: f64 = 1e-10;

/// SNR grid in dB (plus the exact point `rho = 0`) and the quadrature order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub db_min: f64,
    pub db_max: f64,
    pub db_step: f64,
    pub quad_order: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            db_min: -30.0,
            db_max: 40.0,
            db_step: 0.05,
            quad_order: DEFAULT_QUAD_ORDER,
        }
    }
}

impl GridSpec {
    pub fn db_points(&self) -> usize {
        ((self.db_max - self.db_min) / self.db_step).round() as usize + 1
    }

    /// `0` followed by the dB grid in linear scale.
    pub fn rho_values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.db_points() + 1);
        v.push(0.0);
        for i in 0..self.db_points() {
            let db = self.db_min + i as f64 * self.db_step;
            v.push(10f64.powf(db / 10.0));
        }
        v
    }

    fn validate(&self) -> Result<()> {
        if !(self.db_step > 0.0 && self.db_max > self.db_min && self.quad_order >= 2) {
            return Err(Error::InvalidArgument(format!("bad grid {self:?}")));
        }
        Ok(())
    }
}

/// Unprocessed quadrature output. For BICM the MMSE column holds
/// `ln 2` times the finite-difference derivative of the raw MI.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub rho: Vec<f64>,
    pub mi: Vec<f64>,
    pub mmse: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MiProfile {
    constellation: String,
    bits: u32,
    decoder: Decoder,
    grid: GridSpec,
    raw: RawTable,
    mi: Vec<f64>,
    mmse: Vec<f64>,
    mi_interp: MonotoneCubic,
    ln_mmse: MonotoneCubic,
    tail_slope: f64,
}

/// Three-point derivative on a nonuniform grid (one-sided at the ends).
fn derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n];
    for i in 0..n {
        let (a, b, c) = if i == 0 {
            (0, 1, 2)
        } else if i == n - 1 {
            (n - 3, n - 2, n - 1)
        } else {
            (i - 1, i, i + 1)
        };
        // derivative of the Lagrange parabola through (a, b, c) at x[i]
        let t = x[i];
        let (xa, xb, xc) = (x[a], x[b], x[c]);
        let la = ((t - xb) + (t - xc)) / ((xa - xb) * (xa - xc));
        let lb = ((t - xa) + (t - xc)) / ((xb - xa) * (xb - xc));
        let lc = ((t - xa) + (t - xb)) / ((xc - xa) * (xc - xb));
        d[i] = la * y[a] + lb * y[b] + lc * y[c];
    }
    d
}

impl MiProfile {
    /// Evaluates the quadrature on every grid point.
    pub fn build(c: &Constellation, decoder: Decoder, grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        let ev = AwgnEvaluator::new(c, grid.quad_order);
        let rho = grid.rho_values();
        let bicm = decoder == Decoder::Bicm;
        let pts: Vec<_> = rho.par_iter().map(|&r| ev.eval(r, bicm)).collect();
        let raw = match decoder {
            Decoder::Cm => RawTable {
                rho: rho.clone(),
                mi: pts.iter().map(|p| p.mi_cm).collect(),
                mmse: pts.iter().map(|p| p.mmse).collect(),
            },
            Decoder::Bicm => {
                let mi: Vec<f64> = pts.iter().map(|p| p.mi_bicm).collect();
                let mmse = derivative(&rho, &mi).into_iter().map(|v| LN_2 * v).collect();
                RawTable {
                    rho: rho.clone(),
                    mi,
                    mmse,
                }
            }
        };
        Self::from_raw(c.name(), c.bits_per_symbol(), decoder, grid, raw)
    }

    /// Post-processes a raw table: monotone MI in `[0, M]`, nonincreasing MMSE
    /// with a log-linear tail below the numerical floor, and the interpolants.
    pub fn from_raw(constellation: &str, bits: u32, decoder: Decoder, grid: GridSpec, raw: RawTable) -> Result<Self> {
        let n = raw.rho.len();
        if n < 4 || raw.mi.len() != n || raw.mmse.len() != n {
            return Err(Error::InvalidArgument("raw table too short or ragged".into()));
        }
        if raw.rho[0] != 0.0 || raw.rho.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("raw grid must start at 0 and increase".into()));
        }
        if raw.mi.iter().chain(&raw.mmse).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite raw values".into()));
        }
        let mf = bits as f64;
        let rho = raw.rho.clone();

        let mut mi = Vec::with_capacity(n);
        let mut run = 0.0f64;
        for (i, &v) in raw.mi.iter().enumerate() {
            run = if i == 0 { 0.0 } else { run.max(v.clamp(0.0, mf)) };
            mi.push(run);
        }

        let mmse_src = match decoder {
            Decoder::Cm => raw.mmse.clone(),
            // recomputed from the monotone MI so that the slope data agree
            Decoder::Bicm => derivative(&rho, &mi).into_iter().map(|v| LN_2 * v).collect(),
        };
        let mut mmse = Vec::with_capacity(n);
        let mut run = f64::INFINITY;
        for (i, &v) in mmse_src.iter().enumerate() {
            let v = if i == 0 && decoder == Decoder::Cm {
                1.0
            } else {
                v.max(0.0)
            };
            run = run.min(v);
            mmse.push(run);
        }

        // first index below the floor; everything from there on is extrapolated
        let cut = mmse.iter().position(|&v| v < MMSE_FLOOR).unwrap_or(n);
        if cut < 3 {
            return Err(Error::InvalidArgument("MMSE vanishes at the start of the grid".into()));
        }
        let mut ln: Vec<f64> = mmse[..cut].iter().map(|v| v.ln()).collect();
        let mut k = cut - 1;
        let tail_slope = loop {
            let s = (ln[k] - ln[k - 1]) / (rho[k] - rho[k - 1]);
            if s < 0.0 || k == 1 {
                break s.min(-1e-12);
            }
            k -= 1;
        };
        let (r0, l0) = (rho[cut - 1], ln[cut - 1]);
        for &r in &rho[cut..] {
            ln.push(l0 + tail_slope * (r - r0));
        }
        let mmse: Vec<f64> = ln.iter().map(|v| v.exp()).collect();
        let slopes: Vec<f64> = mmse.iter().map(|v| v / LN_2).collect();
        let mi_interp = MonotoneCubic::with_slopes(rho.clone(), mi.clone(), slopes);
        let ln_mmse = MonotoneCubic::new(rho.clone(), ln);

        Ok(Self {
            constellation: constellation.to_string(),
            bits,
            decoder,
            grid,
            raw,
            mi,
            mmse,
            mi_interp,
            ln_mmse,
            tail_slope,
        })
    }

    pub fn constellation(&self) -> &str {
        &self.constellation
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    pub fn decoder(&self) -> Decoder {
        self.decoder
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn raw(&self) -> &RawTable {
        &self.raw
    }

    pub fn rho_grid(&self) -> &[f64] {
        &self.raw.rho
    }

    pub fn mi_table(&self) -> &[f64] {
        &self.mi
    }

    pub fn mmse_table(&self) -> &[f64] {
        &self.mmse
    }

    fn rho_max(&self) -> f64 {
        *self.raw.rho.last().unwrap()
    }

    /// MMSE restricted to the tabulated range.
    pub fn mmse_checked(&self, rho: f64) -> Result<f64> {
        if !(rho >= 0.0 && rho <= self.rho_max()) {
            return Err(Error::OutOfRange {
                value: rho,
                lo: 0.0,
                hi: self.rho_max(),
            });
        }
        Ok(self.mmse(rho))
    }

    /// Largest `|ln2 * dI/drho - MMSE|` over interior grid points, using
    /// central differences of the tabulated MI.
    pub fn gsv_max_deviation(&self) -> f64 {
        let (r, i, m) = (&self.raw.rho, &self.mi, &self.mmse);
        (1..r.len() - 1)
            .map(|k| {
                let fd = LN_2 * (i[k + 1] - i[k - 1]) / (r[k + 1] - r[k - 1]);
                (fd - m[k]).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl MiCurve for MiProfile {
    fn name(&self) -> String {
        format!("{}-{}", self.constellation, self.decoder)
    }

    fn max_rate(&self) -> f64 {
        self.bits as f64
    }

    #[inline]
    fn mi(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            0.0
        } else {
            self.mi_interp.eval(rho)
        }
    }

    #[inline]
    fn mmse(&self, rho: f64) -> f64 {
        let rmax = self.rho_max();
        if rho <= 0.0 {
            self.mmse[0]
        } else if rho >= rmax {
            let l = *self.ln_mmse.ys().last().unwrap();
            (l + self.tail_slope * (rho - rmax)).exp()
        } else {
            self.ln_mmse.eval(rho).exp()
        }
    }

    fn inv_mmse(&self, v: f64) -> Result<f64> {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidArgument(format!("MMSE value {v} outside (0, 1]")));
        }
        self.inv_mmse_ln(v.ln())
    }

    fn inv_mmse_ln(&self, lv: f64) -> Result<f64> {
        if lv.is_nan() {
            return Err(Error::InvalidArgument("NaN MMSE value".into()));
        }
        let ys = self.ln_mmse.ys();
        let (first, last) = (ys[0], *ys.last().unwrap());
        if lv >= first {
            return Ok(0.0);
        }
        if lv < last {
            return Ok(self.rho_max() + (lv - last) / self.tail_slope);
        }
        self.ln_mmse
            .invert(lv)
            .ok_or_else(|| Error::InvalidArgument(format!("MMSE inverse failed at ln v = {lv}")))
    }

    fn inv_mi(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) {
            return Err(Error::InvalidArgument(format!("rate {v} must be nonnegative")));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        let top = *self.mi.last().unwrap();
        if v > top {
            return Err(Error::Infeasible(format!(
                "rate {v} exceeds the largest tabulated MI {top} of {}",
                self.name()
            )));
        }
        self.mi_interp
            .invert(v)
            .ok_or_else(|| Error::InvalidArgument(format!("MI inverse failed at {v}")))
    }
}

/// Memoizing profile source with an optional on-disk cache.
#[derive(Debug, Default)]
pub struct ProfileStore {
    cache_dir: Option<PathBuf>,
    grid: GridSpec,
    memo: Mutex<HashMap<(String, Decoder), Arc<MiProfile>>>,
}

impl ProfileStore {
    pub fn new(cache_dir: Option<PathBuf>) -> Self {
        Self::with_grid(cache_dir, GridSpec::default())
    }

    pub fn with_grid(cache_dir: Option<PathBuf>, grid: GridSpec) -> Self {
        Self {
            cache_dir,
            grid,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn cache_dir(&self) -> Option<&Path> {
        self.cache_dir.as_deref()
    }

    pub fn cache_file(&self, constellation: &str, decoder: Decoder) -> Option<PathBuf> {
        let g = self.grid;
        self.cache_dir.as_ref().map(|d| {
            d.join(format!(
                "{constellation}-{decoder}-{}_{}_{}-q{}.bfprof",
                g.db_min, g.db_max, g.db_step, g.quad_order
            ))
        })
    }

    pub fn get(&self, constellation: &str, decoder: Decoder) -> Result<Arc<MiProfile>> {
        let c = Constellation::by_name(constellation)?;
        let key = (c.name().to_string(), decoder);
        if let Some(p) = self.memo.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.load_or_build(&c, decoder)?);
        Ok(self.memo.lock().unwrap().entry(key).or_insert(p).clone())
    }

    fn load_or_build(&self, c: &Constellation, decoder: Decoder) -> Result<MiProfile> {
        let path = self.cache_file(c.name(), decoder);
        if let Some(path) = &path {
            if path.exists() {
                match cache::read_cache(path, c, decoder, self.grid) {
                    Ok(p) => return Ok(p),
                    Err(e) => warn!("rebuilding {}: {e}", path.display()),
                }
            }
        }
        info!("tabulating {}-{decoder}", c.name());
        let p = MiProfile::build(c, decoder, self.grid)?;
        if let Some(path) = &path {
            if let Err(e) = cache::write_cache(path, &p) {
                warn!("could not write {}: {e}", path.display());
            }
        }
        Ok(p)
    }
}

/// Process-wide store; honours `BLOCKFADE_CACHE_DIR` when set.
pub fn shared_profile(constellation: &str, decoder: Decoder) -> Result<Arc<MiProfile>> {
    static STORE: OnceLock<ProfileStore> = OnceLock::new();
    STORE
        .get_or_init(|| ProfileStore::new(std::env::var_os("BLOCKFADE_CACHE_DIR").map(PathBuf::from)))
        .get(constellation, decoder)
}
