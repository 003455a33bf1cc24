use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use blockfade::fading::{FadingModel, NakagamiSpec, OfdmSpec};
use blockfade::infotheory::{self, Decoder, MiCurve, MiProfile};
use blockfade::longterm::{self, LtInner, LtScheme};
use blockfade::outage::{self, McConfig, OutageScheme};
use blockfade::powalloc::{self, StScheme};
use blockfade::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::CorruptCache(_) | Error::Bracket(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Tabulated MI/MMSE curve of a constellation under CM or BICM decoding.
#[pyclass(frozen)]
struct Profile {
    inner: Arc<MiProfile>,
}

#[pymethods]
impl Profile {
    #[new]
    #[pyo3(signature = (constellation, decoder = "cm"))]
    fn new(constellation: &str, decoder: &str) -> PyResult<Self> {
        let dec: Decoder = decoder.parse().map_err(to_py)?;
        let inner = infotheory::shared_profile(constellation, dec).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name()
    }

    #[getter]
    fn max_rate(&self) -> f64 {
        self.inner.max_rate()
    }

    fn mi(&self, rho: f64) -> f64 {
        self.inner.mi(rho)
    }

    fn mmse(&self, rho: f64) -> f64 {
        self.inner.mmse(rho)
    }

    fn inv_mi(&self, rate: f64) -> PyResult<f64> {
        self.inner.inv_mi(rate).map_err(to_py)
    }

    fn inv_mmse(&self, v: f64) -> PyResult<f64> {
        self.inner.inv_mmse(v).map_err(to_py)
    }

    fn gsv_max_deviation(&self) -> f64 {
        self.inner.gsv_max_deviation()
    }

    /// `(rho, mi, mmse)` lists on the tabulation grid.
    fn table(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            self.inner.rho_grid().to_vec(),
            self.inner.mi_table().to_vec(),
            self.inner.mmse_table().to_vec(),
        )
    }

    fn __repr__(&self) -> String {
        format!("Profile('{}')", self.inner.name())
    }
}

fn st_scheme(name: &str, beta: Option<f64>, profile: &MiProfile) -> PyResult<StScheme> {
    let need = || beta.ok_or_else(|| PyValueError::new_err(format!("'{name}' needs beta")));
    Ok(match name {
        "uniform" => StScheme::Uniform,
        "optimal" => StScheme::Optimal,
        "waterfilling" => StScheme::WaterFilling,
        "twf" => StScheme::Twf { beta: need()? },
        "ref" => StScheme::Ref {
            beta: need()?,
            params: infotheory::ref_params(profile.constellation(), profile.decoder()).map_err(to_py)?,
        },
        other => return Err(PyValueError::new_err(format!("unknown scheme '{other}'"))),
    })
}

fn lt_inner(name: &str, beta: Option<f64>, profile: &MiProfile) -> PyResult<LtInner> {
    let need = || beta.ok_or_else(|| PyValueError::new_err(format!("'{name}' needs beta")));
    Ok(match name {
        "optimal" => LtInner::Optimal,
        "twf" => LtInner::Twf { beta: need()? },
        "ref" => LtInner::Ref {
            beta: need()?,
            params: infotheory::ref_params(profile.constellation(), profile.decoder()).map_err(to_py)?,
        },
        other => return Err(PyValueError::new_err(format!("unknown long-term scheme '{other}'"))),
    })
}

/// Short-term power vector with mean `power`.
#[pyfunction]
#[pyo3(signature = (profile, gamma, power, scheme = "optimal", beta = None))]
fn allocate(profile: &Profile, gamma: Vec<f64>, power: f64, scheme: &str, beta: Option<f64>) -> PyResult<Vec<f64>> {
    let s = st_scheme(scheme, beta, &profile.inner)?;
    powalloc::allocate(&s, profile.inner.as_ref(), &gamma, power).map_err(to_py)
}

/// Minimum-power vector reaching `rate` on the given gains.
#[pyfunction]
#[pyo3(signature = (profile, gamma, rate, scheme = "optimal", beta = None))]
fn min_power(profile: &Profile, gamma: Vec<f64>, rate: f64, scheme: &str, beta: Option<f64>) -> PyResult<Vec<f64>> {
    let lt = LtScheme::new(lt_inner(scheme, beta, &profile.inner)?, rate);
    longterm::min_power(&lt, profile.inner.as_ref(), &gamma).map_err(to_py)
}

#[pyfunction]
fn instantaneous_mi(profile: &Profile, power: Vec<f64>, gamma: Vec<f64>) -> PyResult<f64> {
    outage::instantaneous_mi(profile.inner.as_ref(), &power, &gamma).map_err(to_py)
}

#[pyfunction]
fn singleton_bound(blocks: usize, bits: u32, rate: f64) -> PyResult<u32> {
    powalloc::singleton_bound(blocks, bits, rate).map_err(to_py)
}

#[pyfunction]
fn predict_dlt(d: f64) -> PyResult<f64> {
    longterm::predict_dlt(d).map_err(to_py)
}

/// Outage curve over `p_db`; long-term schemes are named `lt-optimal`,
/// `lt-twf` and `lt-ref`. Pass `subcarriers` for BRAN-A OFDM instead of
/// Nakagami blocks.
#[pyfunction]
#[pyo3(signature = (profile, scheme, rate, p_db, samples, seed, m = 1.0, blocks = 4, subcarriers = None, beta = None))]
#[allow(clippy::too_many_arguments)]
fn estimate_outage<'py>(
    py: Python<'py>,
    profile: &Profile,
    scheme: &str,
    rate: f64,
    p_db: Vec<f64>,
    samples: usize,
    seed: u64,
    m: f64,
    blocks: usize,
    subcarriers: Option<usize>,
    beta: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let fading = match subcarriers {
        Some(b) => FadingModel::Ofdm(OfdmSpec::bran_a(b).map_err(to_py)?),
        None => FadingModel::Nakagami(NakagamiSpec::new(m, blocks).map_err(to_py)?),
    };
    let s = match scheme.strip_prefix("lt-") {
        Some(inner) => OutageScheme::Long(LtScheme::new(lt_inner(inner, beta, &profile.inner)?, rate)),
        None => OutageScheme::Short(st_scheme(scheme, beta, &profile.inner)?),
    };
    let cfg = McConfig::new(samples, seed);
    let curve = py
        .detach(|| outage::estimate_outage(&s, profile.inner.as_ref(), &fading, rate, &p_db, &cfg))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("scheme", &curve.scheme)?;
    d.set_item("p_db", curve.p_db())?;
    d.set_item("outage", curve.outages())?;
    d.set_item("ci", curve.points.iter().map(|p| p.ci).collect::<Vec<_>>())?;
    d.set_item("n", samples)?;
    d.set_item("infeasible", curve.infeasible.clone())?;
    if let Ok(fit) = outage::fit_exponent_between(&curve, 1e-4, 1e-1) {
        d.set_item("slope", fit.d_hat)?;
    }
    Ok(d)
}

#[pymodule]
fn pyblockfade(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Profile>()?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(min_power, m)?)?;
    m.add_function(wrap_pyfunction!(instantaneous_mi, m)?)?;
    m.add_function(wrap_pyfunction!(singleton_bound, m)?)?;
    m.add_function(wrap_pyfunction!(predict_dlt, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_outage, m)?)?;
    Ok(())
}
