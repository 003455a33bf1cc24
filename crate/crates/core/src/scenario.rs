//! Experiment campaigns described by a TOML file: which input, fading model,
//! rates, allocation schemes and power grid to simulate, and where to write
//! the resulting curves.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fading::{m_from_rician_k, FadingModel, NakagamiSpec, OfdmSpec};
use crate::infotheory::{
    approx_params, beta_r, delta_r, ref_params, Decoder, GaussianInput, MiCurve, MiProfile, ProfileStore, RefParams,
    DEFAULT_QUAD_ORDER,
};
use crate::longterm::{calibrate, LtInner, LtScheme};
use crate::outage::{
    estimate_outage, fit_exponent_between, gain_at, threshold_sweep, McConfig, OutageCurve, OutageScheme, SlopeFit,
};
use crate::powalloc::StScheme;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub constellation: String,
    #[serde(default = "default_decoder")]
    pub decoder: String,
    pub rates: Vec<f64>,
    pub seed: u64,
    pub samples: usize,
    pub cal_samples: Option<usize>,
    pub output: Option<PathBuf>,
    /// Gauss-Hermite nodes per real dimension for the MI/MMSE tables.
    pub quad_order: Option<usize>,
    pub snr: SnrConfig,
    pub fading: FadingConfig,
    #[serde(rename = "scheme", default)]
    pub schemes: Vec<SchemeConfig>,
    #[serde(default)]
    pub report: ReportConfig,
}

fn default_decoder() -> String {
    "cm".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrConfig {
    pub start_db: Option<f64>,
    pub stop_db: Option<f64>,
    pub step_db: Option<f64>,
    pub values_db: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingConfig {
    /// `nakagami` or `ofdm`
    pub model: String,
    pub m: Option<f64>,
    pub rician_k: Option<f64>,
    pub blocks: Option<usize>,
    pub subcarriers: Option<usize>,
    /// `bran-a` or a CSV path relative to the config file
    pub pdp: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub kind: String,
    pub id: Option<String>,
    pub beta: Option<f64>,
    pub beta_db: Option<f64>,
    /// `rate`: the smallest truncation keeping full diversity at each rate
    pub beta_rule: Option<String>,
    #[serde(default)]
    pub approx: bool,
    /// Trace outage against the threshold `s` and against `P(s)` instead of
    /// calibrating at each power point.
    #[serde(default)]
    pub sweep: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default = "default_targets")]
    pub targets: Vec<f64>,
    #[serde(default = "default_window")]
    pub fit_window: [f64; 2],
    pub reference: Option<String>,
}

fn default_targets() -> Vec<f64> {
    vec![1e-3, 1e-4]
}

fn default_window() -> [f64; 2] {
    [1e-4, 1e-1]
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            targets: default_targets(),
            fit_window: default_window(),
            reference: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Uniform,
    Optimal,
    Twf,
    Ref,
    WaterFilling,
    LtOptimal,
    LtTwf,
    LtRef,
}

impl SchemeKind {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "uniform" => Self::Uniform,
            "optimal" => Self::Optimal,
            "twf" => Self::Twf,
            "ref" => Self::Ref,
            "waterfilling" => Self::WaterFilling,
            "lt-optimal" => Self::LtOptimal,
            "lt-twf" => Self::LtTwf,
            "lt-ref" => Self::LtRef,
            other => return Err(Error::Config(format!("unknown scheme kind '{other}'"))),
        })
    }

    fn needs_beta(self) -> bool {
        matches!(self, Self::Twf | Self::Ref | Self::LtTwf | Self::LtRef)
    }

    fn is_long_term(self) -> bool {
        matches!(self, Self::LtOptimal | Self::LtTwf | Self::LtRef)
    }

    fn is_refined(self) -> bool {
        matches!(self, Self::Ref | Self::LtRef)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaChoice {
    None,
    Fixed(f64),
    RateMatched,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSpec {
    pub id: String,
    pub kind: SchemeKind,
    pub beta: BetaChoice,
    pub approx: bool,
    pub sweep: bool,
}

/// Either the Gaussian reference or a discrete constellation with its decoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputSpec {
    Gaussian,
    Discrete { constellation: String, decoder: Decoder },
}

/// A validated campaign.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub input: InputSpec,
    pub rates: Vec<f64>,
    pub p_db: Vec<f64>,
    pub fading: FadingModel,
    /// Data files the fading model was read from, as written in the config.
    pub data_files: Vec<(String, PathBuf)>,
    pub schemes: Vec<SchemeSpec>,
    pub mc: McConfig,
    pub quad_order: usize,
    pub output: PathBuf,
    pub report: ReportConfig,
    pub config_text: String,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str(&text, base)
    }

    /// Parses and validates `text`; relative paths resolve against `base`.
    pub fn from_str(text: &str, base: &Path) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        Self::from_config(cfg, text, base)
    }

    pub fn from_config(cfg: ScenarioConfig, text: &str, base: &Path) -> Result<Self> {
        let input = if cfg.constellation.eq_ignore_ascii_case("gaussian") {
            InputSpec::Gaussian
        } else {
            crate::constellation::Constellation::by_name(&cfg.constellation)
                .map_err(|e| cfg_err(format!("constellation: {e}")))?;
            InputSpec::Discrete {
                constellation: cfg.constellation.to_ascii_lowercase(),
                decoder: cfg.decoder.parse().map_err(|e| cfg_err(format!("decoder: {e}")))?,
            }
        };
        if cfg.rates.is_empty() || cfg.rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(cfg_err("rates: need a nonempty list of positive rates"));
        }
        if cfg.samples == 0 || cfg.cal_samples == Some(0) {
            return Err(cfg_err("samples: must be at least 1"));
        }
        let p_db = snr_grid(&cfg.snr)?;
        let (fading, data_files) = fading_model(&cfg.fading, base)?;
        if cfg.schemes.is_empty() {
            return Err(cfg_err("scheme: at least one [[scheme]] table is required"));
        }
        let mut schemes: Vec<SchemeSpec> = Vec::new();
        for (i, s) in cfg.schemes.iter().enumerate() {
            let spec = scheme_spec(s, &input).map_err(|e| cfg_err(format!("scheme[{i}]: {e}")))?;
            if schemes.iter().any(|o| o.id == spec.id) {
                return Err(cfg_err(format!("scheme[{i}]: duplicate id '{}'", spec.id)));
            }
            schemes.push(spec);
        }
        let r = &cfg.report;
        if r.targets.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(cfg_err("report.targets: outage targets must lie in (0, 1)"));
        }
        if !(r.fit_window[0] > 0.0 && r.fit_window[0] < r.fit_window[1]) {
            return Err(cfg_err("report.fit_window: need 0 < low < high"));
        }
        if let Some(id) = &r.reference {
            if !schemes.iter().any(|s| &s.id == id) {
                return Err(cfg_err(format!("report.reference: no scheme with id '{id}'")));
            }
        }
        let mc = McConfig {
            samples: cfg.samples,
            cal_samples: cfg.cal_samples.unwrap_or(cfg.samples),
            seed: cfg.seed,
            full_sweep: false,
        };
        let quad_order = cfg.quad_order.unwrap_or(DEFAULT_QUAD_ORDER);
        if !(2..=256).contains(&quad_order) {
            return Err(cfg_err("quad_order: must lie in 2..=256"));
        }
        let output = cfg
            .output
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
        Ok(Self {
            name: cfg.name,
            input,
            rates: cfg.rates,
            p_db,
            fading,
            data_files,
            schemes,
            mc,
            quad_order,
            output,
            report: cfg.report,
            config_text: text.to_string(),
        })
    }
}

fn snr_grid(s: &SnrConfig) -> Result<Vec<f64>> {
    let grid = match (&s.values_db, s.start_db, s.stop_db, s.step_db) {
        (Some(v), None, None, None) => v.clone(),
        (None, Some(a), Some(b), Some(step)) => {
            if !(step > 0.0) || !(b >= a) {
                return Err(cfg_err("snr: need start_db <= stop_db and step_db > 0"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            // integer multiples keep the grid free of accumulated drift
            (0..=n).map(|i| a + i as f64 * step).collect()
        }
        _ => return Err(cfg_err("snr: give either values_db or start_db/stop_db/step_db")),
    };
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(cfg_err("snr: grid must be nonempty and strictly ascending"));
    }
    Ok(grid)
}

fn fading_model(f: &FadingConfig, base: &Path) -> Result<(FadingModel, Vec<(String, PathBuf)>)> {
    match f.model.as_str() {
        "nakagami" => {
            if f.subcarriers.is_some() || f.pdp.is_some() {
                return Err(cfg_err("fading: subcarriers/pdp apply to the ofdm model only"));
            }
            let m = match (f.m, f.rician_k) {
                (Some(_), Some(_)) => return Err(cfg_err("fading: give m or rician_k, not both")),
                (Some(m), None) => m,
                (None, Some(k)) => m_from_rician_k(k).map_err(|e| cfg_err(format!("fading: {e}")))?,
                (None, None) => 1.0,
            };
            let blocks = f.blocks.ok_or_else(|| cfg_err("fading.blocks: missing"))?;
            let spec = NakagamiSpec::new(m, blocks).map_err(|e| cfg_err(format!("fading: {e}")))?;
            Ok((FadingModel::Nakagami(spec), Vec::new()))
        }
        "ofdm" => {
            if f.m.is_some() || f.rician_k.is_some() || f.blocks.is_some() {
                return Err(cfg_err("fading: m/rician_k/blocks apply to the nakagami model only"));
            }
            let b = f.subcarriers.ok_or_else(|| cfg_err("fading.subcarriers: missing"))?;
            let pdp = f.pdp.as_deref().unwrap_or("bran-a");
            if pdp == "bran-a" {
                let spec = OfdmSpec::bran_a(b).map_err(|e| cfg_err(format!("fading: {e}")))?;
                return Ok((FadingModel::Ofdm(spec), Vec::new()));
            }
            let path = base.join(pdp);
            let text = fs::read_to_string(&path)
                .map_err(|e| cfg_err(format!("fading.pdp: cannot read {}: {e}", path.display())))?;
            let taps = OfdmSpec::parse_pdp(&text)?;
            let spec = OfdmSpec::new(b, &taps).map_err(|e| cfg_err(format!("fading: {e}")))?;
            Ok((FadingModel::Ofdm(spec), vec![(pdp.to_string(), path)]))
        }
        other => Err(cfg_err(format!("fading.model: unknown model '{other}'"))),
    }
}

fn scheme_spec(s: &SchemeConfig, input: &InputSpec) -> Result<SchemeSpec> {
    let kind = SchemeKind::parse(&s.kind)?;
    let beta = match (s.beta, s.beta_db, s.beta_rule.as_deref()) {
        (None, None, None) => BetaChoice::None,
        (Some(b), None, None) => BetaChoice::Fixed(b),
        (None, Some(db), None) => BetaChoice::Fixed(10f64.powf(db / 10.0)),
        (None, None, Some("rate")) => BetaChoice::RateMatched,
        (None, None, Some(other)) => return Err(cfg_err(format!("unknown beta_rule '{other}'"))),
        _ => return Err(cfg_err("give only one of beta, beta_db, beta_rule")),
    };
    match (kind.needs_beta(), beta) {
        (true, BetaChoice::None) => return Err(cfg_err(format!("'{}' needs a beta", s.kind))),
        (false, BetaChoice::Fixed(_) | BetaChoice::RateMatched) => {
            return Err(cfg_err(format!("'{}' takes no beta", s.kind)))
        }
        (_, BetaChoice::Fixed(b)) if !(b > 0.0 && b.is_finite()) => return Err(cfg_err("beta must be positive")),
        _ => {}
    }
    if s.approx && !matches!(kind, SchemeKind::LtTwf | SchemeKind::LtRef) {
        return Err(cfg_err("approx applies to lt-twf and lt-ref only"));
    }
    if s.sweep && !kind.is_long_term() {
        return Err(cfg_err("sweep applies to long-term schemes only"));
    }
    match input {
        InputSpec::Gaussian => {
            if kind.is_refined() || s.approx || beta == BetaChoice::RateMatched {
                return Err(cfg_err("refined bounds, approx and beta_rule need a discrete input"));
            }
        }
        InputSpec::Discrete { constellation, decoder } => {
            if kind.is_refined() {
                let rp = ref_params(constellation, *decoder)?;
                if let BetaChoice::Fixed(b) = beta {
                    if b < rp.alpha {
                        return Err(cfg_err(format!("beta {b} below the knee alpha {}", rp.alpha)));
                    }
                }
            }
            if s.approx {
                approx_params(constellation, *decoder)?;
            }
        }
    }
    let id = match &s.id {
        Some(id) => id.clone(),
        None => {
            let mut id = s.kind.clone();
            match beta {
                BetaChoice::Fixed(_) => {
                    let b = s.beta.map(|b| format!("-beta{b}"));
                    id += &b.unwrap_or_else(|| format!("-beta{}dB", s.beta_db.unwrap_or(0.0)));
                }
                BetaChoice::RateMatched => id += "-betaR",
                BetaChoice::None => {}
            }
            if s.approx {
                id += "-approx";
            }
            id
        }
    };
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
        return Err(cfg_err(format!("id '{id}' must be nonempty [A-Za-z0-9._-]")));
    }
    Ok(SchemeSpec {
        id,
        kind,
        beta,
        approx: s.approx,
        sweep: s.sweep,
    })
}

/// The MI curve of a scenario input, resolved through a profile store.
pub enum ResolvedInput {
    Gaussian(GaussianInput),
    Profile(Arc<MiProfile>),
}

impl ResolvedInput {
    /// The store's grid must carry the scenario's quadrature order.
    pub fn resolve(input: &InputSpec, store: &ProfileStore) -> Result<Self> {
        Ok(match input {
            InputSpec::Gaussian => Self::Gaussian(GaussianInput),
            InputSpec::Discrete { constellation, decoder } => Self::Profile(store.get(constellation, *decoder)?),
        })
    }

    pub fn curve(&self) -> &dyn MiCurve {
        match self {
            Self::Gaussian(g) => g,
            Self::Profile(p) => p.as_ref(),
        }
    }

    fn profile(&self) -> Option<&MiProfile> {
        match self {
            Self::Gaussian(_) => None,
            Self::Profile(p) => Some(p),
        }
    }
}

/// Result of one (scheme, rate) cell; sweeps produce a dual curve as well.
#[derive(Debug, Clone)]
pub struct CurveResult {
    pub scheme_id: String,
    pub rate: f64,
    pub beta: Option<f64>,
    pub curve: OutageCurve,
    pub dual: Option<OutageCurve>,
    pub fit: Option<SlopeFit>,
    pub dual_fit: Option<SlopeFit>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub results: Vec<CurveResult>,
    /// Output files relative to the output directory, in write order.
    pub files: Vec<String>,
}

fn is_expected_infeasibility(e: &Error) -> bool {
    matches!(e, Error::Infeasible(_) | Error::SingletonDiscontinuity { .. })
}

fn resolve_beta(spec: &SchemeSpec, input: &ResolvedInput, fading: &FadingModel, r: f64) -> Result<Option<f64>> {
    match spec.beta {
        BetaChoice::None => Ok(None),
        BetaChoice::Fixed(b) => Ok(Some(b)),
        BetaChoice::RateMatched => {
            let p = input.profile().expect("validated discrete input");
            beta_r(p, fading.blocks(), r, p.bits_per_symbol()).map(Some)
        }
    }
}

fn refined(input: &ResolvedInput) -> Result<RefParams> {
    let p = input.profile().expect("validated discrete input");
    ref_params(p.constellation(), p.decoder())
}

fn build_scheme(spec: &SchemeSpec, input: &ResolvedInput, beta: Option<f64>, r: f64) -> Result<OutageScheme> {
    let b = || beta.expect("validated beta");
    Ok(match spec.kind {
        SchemeKind::Uniform => OutageScheme::Short(StScheme::Uniform),
        SchemeKind::Optimal => OutageScheme::Short(StScheme::Optimal),
        SchemeKind::WaterFilling => OutageScheme::Short(StScheme::WaterFilling),
        SchemeKind::Twf => OutageScheme::Short(StScheme::Twf { beta: b() }),
        SchemeKind::Ref => OutageScheme::Short(StScheme::Ref {
            beta: b(),
            params: refined(input)?,
        }),
        SchemeKind::LtOptimal | SchemeKind::LtTwf | SchemeKind::LtRef => {
            let inner = match spec.kind {
                SchemeKind::LtOptimal => LtInner::Optimal,
                SchemeKind::LtTwf => LtInner::Twf { beta: b() },
                _ => LtInner::Ref {
                    beta: b(),
                    params: refined(input)?,
                },
            };
            let mut lt = LtScheme::new(inner, r);
            if spec.approx {
                let p = input.profile().expect("validated discrete input");
                let mut ap = approx_params(p.constellation(), p.decoder())?;
                // the margin must cover the approximation error on this profile
                ap.delta_r = delta_r(p, &ap);
                lt = lt.with_approx(ap);
            }
            OutageScheme::Long(lt)
        }
    })
}

fn infeasible_curve(label: String, r: f64, sc: &Scenario, why: String) -> OutageCurve {
    let n = sc.mc.samples as u64;
    let all = vec![n; sc.p_db.len()];
    let mut c = OutageCurve::from_counts(label, r, sc.fading.describe(), &sc.p_db, &all, n);
    c.infeasible = Some(why);
    c
}

fn run_cell(sc: &Scenario, spec: &SchemeSpec, input: &ResolvedInput, r: f64) -> Result<CurveResult> {
    let curve = input.curve();
    let [lo, hi] = sc.report.fit_window;
    let mut res = CurveResult {
        scheme_id: spec.id.clone(),
        rate: r,
        beta: None,
        curve: OutageCurve::from_counts(spec.id.clone(), r, String::new(), &[], &[], 1),
        dual: None,
        fit: None,
        dual_fit: None,
    };
    let outcome = resolve_beta(spec, input, &sc.fading, r).and_then(|beta| {
        res.beta = beta;
        build_scheme(spec, input, beta, r)
    });
    let scheme = match outcome {
        Ok(s) => s,
        Err(e) if is_expected_infeasibility(&e) => {
            res.curve = infeasible_curve(spec.id.clone(), r, sc, e.to_string());
            return Ok(res);
        }
        Err(e) => return Err(e),
    };
    if let (true, OutageScheme::Long(lt)) = (spec.sweep, &scheme) {
        if let Err(e) = lt.check_feasible(curve) {
            if !is_expected_infeasibility(&e) {
                return Err(e);
            }
            res.curve = infeasible_curve(spec.id.clone(), r, sc, e.to_string());
            return Ok(res);
        }
        let table = calibrate(lt, curve, &sc.fading, sc.mc.samples, sc.mc.evaluation_seed())?;
        let (dual, long) = threshold_sweep(&table, &sc.p_db, &spec.id, r, &sc.fading.describe())?;
        res.dual_fit = fit_exponent_between(&dual, lo, hi).ok();
        res.fit = fit_exponent_between(&long, lo, hi).ok();
        res.dual = Some(dual);
        res.curve = long;
        return Ok(res);
    }
    let mut c = estimate_outage(&scheme, curve, &sc.fading, r, &sc.p_db, &sc.mc)?;
    c.scheme = spec.id.clone();
    res.fit = fit_exponent_between(&c, lo, hi).ok();
    res.curve = c;
    Ok(res)
}

fn rate_tag(r: f64) -> String {
    format!("R{r}")
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<String>) -> Result<()> {
    fs::write(dir.join(name), bytes)?;
    files.push(name.to_string());
    Ok(())
}

/// Runs every (rate, scheme) cell and writes curves, summary and manifest
/// into `out_dir`. Infeasible cells become sentinel curves.
pub fn run_scenario(sc: &Scenario, store: &ProfileStore, out_dir: &Path) -> Result<RunReport> {
    if store.grid().quad_order != sc.quad_order {
        return Err(Error::InvalidArgument(format!(
            "profile store uses {} quadrature nodes, scenario asks for {}",
            store.grid().quad_order,
            sc.quad_order
        )));
    }
    fs::create_dir_all(out_dir)?;
    let input = ResolvedInput::resolve(&sc.input, store)?;
    let mut results = Vec::new();
    let mut files = Vec::new();
    for &r in &sc.rates {
        for spec in &sc.schemes {
            log::info!("{}: {} at R={r}", sc.name, spec.id);
            let res = run_cell(sc, spec, &input, r)?;
            if let Some(why) = &res.curve.infeasible {
                log::warn!("{} at R={r}: infeasible ({why})", spec.id);
            }
            let mut buf = Vec::new();
            res.curve.write_csv(&mut buf, res.fit.as_slice())?;
            write_file(out_dir, &format!("{}-{}.csv", spec.id, rate_tag(r)), &buf, &mut files)?;
            if let Some(d) = &res.dual {
                let mut buf = Vec::new();
                d.write_csv(&mut buf, res.dual_fit.as_slice())?;
                write_file(
                    out_dir,
                    &format!("{}-dual-{}.csv", spec.id, rate_tag(r)),
                    &buf,
                    &mut files,
                )?;
            }
            results.push(res);
        }
    }
    let summary = summary_text(sc, &results);
    write_file(out_dir, "summary.txt", summary.as_bytes(), &mut files)?;
    let manifest = manifest_text(sc, out_dir, &files)?;
    fs::write(out_dir.join("manifest.toml"), manifest)?;
    files.push("manifest.toml".into());
    Ok(RunReport { results, files })
}

fn summary_text(sc: &Scenario, results: &[CurveResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {}", sc.name);
    let _ = writeln!(s, "fading {}", sc.fading.describe());
    let _ = writeln!(s, "samples {} calibration {}", sc.mc.samples, sc.mc.cal_samples);
    let [lo, hi] = sc.report.fit_window;
    let _ = writeln!(s, "fit window outage in [{lo:e}, {hi:e}]");
    let reference = sc.report.reference.clone().or_else(|| {
        sc.schemes
            .iter()
            .find(|x| x.kind == SchemeKind::Uniform)
            .map(|x| x.id.clone())
    });
    for &r in &sc.rates {
        let _ = writeln!(s, "\n[rate {r}]");
        let cell: Vec<&CurveResult> = results.iter().filter(|c| c.rate == r).collect();
        let refc = reference
            .as_ref()
            .and_then(|id| cell.iter().find(|c| &c.scheme_id == id));
        for c in &cell {
            let _ = write!(s, "{}", c.scheme_id);
            if let Some(b) = c.beta {
                let _ = write!(s, " beta={b}");
            }
            if let Some(why) = &c.curve.infeasible {
                let _ = writeln!(s, " infeasible: {why}");
                continue;
            }
            match c.fit {
                Some(f) => {
                    let _ = write!(
                        s,
                        " slope={:.3} over {}..{} dB ({} pts)",
                        f.d_hat, f.window.0, f.window.1, f.points_used
                    );
                }
                None => s.push_str(" slope=n/a"),
            }
            if let Some(f) = c.dual_fit {
                let _ = write!(s, " dual_slope={:.3}", f.d_hat);
            }
            if let Some(cal) = &c.curve.calibration {
                let _ = write!(s, " p_th={:e} tail_mass={:e}", cal.p_th, cal.tail_mass);
                if let Some(last) = cal.thresholds.last() {
                    let _ = write!(s, " s_at_max_P={last:e}");
                }
            }
            s.push('\n');
            if let Some(rc) = refc {
                if rc.scheme_id != c.scheme_id && rc.curve.infeasible.is_none() {
                    for &t in &sc.report.targets {
                        match gain_at(&c.curve, &rc.curve, t) {
                            Ok(g) => {
                                let _ = writeln!(s, "  gain over {} at {t:e}: {g:.2} dB", rc.scheme_id);
                            }
                            Err(_) => {
                                let _ = writeln!(s, "  gain over {} at {t:e}: n/a", rc.scheme_id);
                            }
                        }
                    }
                }
            }
        }
    }
    s
}

#[derive(Serialize)]
struct Manifest<'a> {
    scenario: &'a str,
    version: &'a str,
    seed: u64,
    samples: usize,
    cal_samples: usize,
    quad_order: usize,
    config_sha256: String,
    data: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn manifest_text(sc: &Scenario, out_dir: &Path, files: &[String]) -> Result<String> {
    let mut data = Vec::new();
    for (name, path) in &sc.data_files {
        data.push(FileDigest {
            path: name.clone(),
            sha256: sha256_hex(&fs::read(path)?),
        });
    }
    let mut outputs = Vec::new();
    for f in files {
        outputs.push(FileDigest {
            path: f.clone(),
            sha256: sha256_hex(&fs::read(out_dir.join(f))?),
        });
    }
    let m = Manifest {
        scenario: &sc.name,
        version: env!("CARGO_PKG_VERSION"),
        seed: sc.mc.seed,
        samples: sc.mc.samples,
        cal_samples: sc.mc.cal_samples,
        quad_order: sc.quad_order,
        config_sha256: sha256_hex(sc.config_text.as_bytes()),
        data,
        outputs,
    };
    toml::to_string(&m).map_err(|e| Error::Config(format!("manifest: {e}")))
}

/// Profile table with the bound and approximation columns for plotting.
pub fn dump_tables<W: Write>(profile: &MiProfile, beta: f64, out: &mut W) -> Result<()> {
    let name = profile.constellation();
    let dec = profile.decoder();
    let m = profile.bits_per_symbol() as f64;
    let rp = ref_params(name, dec).ok();
    let ap = approx_params(name, dec).ok();
    writeln!(out, "# constellation,{name},{dec}")?;
    writeln!(out, "# beta,{beta}")?;
    if let Some(rp) = &rp {
        writeln!(
            out,
            "# ref,rho0={},kappa={},a={},alpha={}",
            rp.rho0, rp.kappa, rp.a, rp.alpha
        )?;
    }
    if let Some(ap) = &ap {
        writeln!(
            out,
            "# approx,c1={},c2={},c3={},delta_r_table={},delta_r_profile={}",
            ap.c1,
            ap.c2,
            ap.c3,
            ap.delta_r,
            delta_r(profile, ap)
        )?;
    }
    writeln!(out, "rho_db,I,MMSE,I_tw,I_ref,I_approx")?;
    let ref_ok = rp.filter(|p| beta >= p.alpha);
    for ((&rho, &i), &e) in profile
        .rho_grid()
        .iter()
        .zip(profile.mi_table())
        .zip(profile.mmse_table())
    {
        if rho <= 0.0 {
            continue;
        }
        let tw = crate::infotheory::i_tw(rho, beta)?;
        let rf = match &ref_ok {
            Some(p) => crate::infotheory::i_ref(rho, p, beta)?.to_string(),
            None => String::new(),
        };
        let apx = match &ap {
            Some(a) => crate::infotheory::i_approx(rho, a, m).to_string(),
            None => String::new(),
        };
        writeln!(out, "{},{i},{e},{tw},{rf},{apx}", 10.0 * rho.log10())?;
    }
    Ok(())
}
