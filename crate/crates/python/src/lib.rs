//! Python bindings. Images cross the boundary as lists of rows with values
//! in `[0, 1]`; kernels and noise are named by the same strings the CLI
//! accepts (`"disc:3"`, `"gauss9:2"`, `"sp"`, `"rv"`, `"mixed"`).

use std::path::PathBuf;

use l0tv_core::harness::{self, KernelSpec, MaskChoice, Quality as CoreQuality, RunSpec, SolverKind};
use l0tv_core::io::{read_image as core_read, write_image as core_write, BitDepth};
use l0tv_core::noise::corrupt_with_indices;
use l0tv_core::{
    build_mask, Error, ImageGrid, LinearOp, NoiseKind, NoiseSpec, OutlierMask, SolveOutput,
    SolverConfig as CoreConfig, TvNorm,
};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

type Rows = Vec<Vec<f64>>;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        Error::NumericalBlowUp { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn grid(rows: Rows) -> PyResult<ImageGrid> {
    ImageGrid::stack(&rows).map_err(py_err)
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn operator(kernel: &str) -> PyResult<LinearOp> {
    parse::<KernelSpec>(kernel)?.op().map_err(py_err)
}

#[pyclass(name = "SolverConfig", module = "l0tv", from_py_object)]
#[derive(Clone)]
struct PySolverConfig {
    inner: CoreConfig,
}

#[pymethods]
impl PySolverConfig {
    #[new]
    #[pyo3(signature = (lam = 1.1, p = 1, max_iters = 300, tol = None, beta0 = None, gamma = None, mu = None))]
    fn new(
        lam: f64,
        p: u8,
        max_iters: usize,
        tol: Option<f64>,
        beta0: Option<f64>,
        gamma: Option<f64>,
        mu: Option<f64>,
    ) -> PyResult<Self> {
        let d = CoreConfig::default();
        let inner = CoreConfig {
            lambda: lam,
            norm: TvNorm::from_p(p).ok_or_else(|| PyValueError::new_err("p must be 1 or 2"))?,
            max_iters,
            tol: tol.unwrap_or(d.tol),
            beta0: beta0.unwrap_or(d.beta0),
            gamma: gamma.unwrap_or(d.gamma),
            mu: mu.unwrap_or(d.mu),
            ..d
        };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn p(&self) -> u8 {
        match self.inner.norm {
            TvNorm::Anisotropic => 1,
            TvNorm::Isotropic => 2,
        }
    }

    #[getter]
    fn max_iters(&self) -> usize {
        self.inner.max_iters
    }

    #[getter]
    fn tol(&self) -> f64 {
        self.inner.tol
    }

    #[getter]
    fn beta0(&self) -> f64 {
        self.inner.beta0
    }

    fn beta_at(&self, k: usize) -> f64 {
        self.inner.beta_at(k)
    }

    fn __repr__(&self) -> String {
        format!(
            "SolverConfig(lam={}, p={}, max_iters={}, tol={})",
            self.inner.lambda,
            self.p(),
            self.inner.max_iters,
            self.inner.tol
        )
    }
}

/// One iteration of the solver trace.
#[pyclass(name = "TraceRow", module = "l0tv", frozen, get_all, from_py_object)]
#[derive(Clone)]
struct PyTraceRow {
    iter: usize,
    objective: f64,
    l0_term: f64,
    tv_term: f64,
    r_grad: f64,
    r_fid: f64,
    r_comp: f64,
    beta: f64,
}

#[pyclass(name = "Restoration", module = "l0tv", frozen, get_all, from_py_object)]
#[derive(Clone)]
struct PyRestoration {
    u: Rows,
    converged: bool,
    iterations: usize,
    best_iter: usize,
    trace: Vec<PyTraceRow>,
}

#[pymethods]
impl PyRestoration {
    fn trace_csv(&self) -> String {
        let mut s = String::from(l0tv_core::solver::TRACE_CSV_HEADER);
        for r in &self.trace {
            s.push_str(&format!(
                "\n{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                r.iter, r.objective, r.l0_term, r.tv_term, r.r_grad, r.r_fid, r.r_comp, r.beta
            ));
        }
        s.push('\n');
        s
    }
}

impl From<SolveOutput> for PyRestoration {
    fn from(out: SolveOutput) -> Self {
        Self {
            u: out.u.unstack(),
            converged: out.converged,
            iterations: out.iterations(),
            best_iter: out.best_iter,
            trace: out
                .trace
                .rows
                .iter()
                .map(|r| PyTraceRow {
                    iter: r.iter,
                    objective: r.objective,
                    l0_term: r.l0_term,
                    tv_term: r.tv_term,
                    r_grad: r.r_grad,
                    r_fid: r.r_fid,
                    r_comp: r.r_comp,
                    beta: r.beta,
                })
                .collect(),
        }
    }
}

/// SNR measures of an image against the clean reference. `snr2_err` uses
/// the reconstruction error as denominator.
#[pyclass(name = "Quality", module = "l0tv", frozen, get_all, from_py_object)]
#[derive(Clone)]
struct PyQuality {
    snr0: f64,
    snr1: f64,
    snr2: f64,
    snr2_err: f64,
}

impl From<CoreQuality> for PyQuality {
    fn from(q: CoreQuality) -> Self {
        Self {
            snr0: q.snr0,
            snr1: q.snr1,
            snr2: q.snr2,
            snr2_err: q.snr2_err,
        }
    }
}

#[pyclass(name = "RunResult", module = "l0tv", frozen, get_all, from_py_object)]
#[derive(Clone)]
struct PyRunResult {
    corrupted: Rows,
    mask: Vec<f64>,
    residual: Rows,
    restoration: PyRestoration,
    input_quality: PyQuality,
    restored_quality: PyQuality,
}

fn config_or_default(config: Option<PySolverConfig>) -> CoreConfig {
    config.map(|c| c.inner).unwrap_or_default()
}

/// Adds impulse noise; returns the corrupted image and the flat
/// (column-major) indices of the corrupted pixels.
#[pyfunction]
#[pyo3(signature = (image, noise = "sp", density = 0.3, seed = 1))]
fn corrupt(image: Rows, noise: &str, density: f64, seed: u64) -> PyResult<(Rows, Vec<usize>)> {
    let spec = NoiseSpec::new(parse(noise)?, density, seed).map_err(py_err)?;
    let c = corrupt_with_indices(&grid(image)?, &spec).map_err(py_err)?;
    Ok((c.image.unstack(), c.indices))
}

/// Known-outlier mask `o` for an observation, 0 where a pixel is flagged.
#[pyfunction]
#[pyo3(signature = (b, noise = "sp"))]
fn outlier_mask(b: Rows, noise: &str) -> PyResult<Rows> {
    let b = grid(b)?;
    let o = build_mask(&b, parse::<NoiseKind>(noise)?);
    b.with_data(o.values().to_vec()).map(|g| g.unstack()).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (b, mask = None, kernel = "identity", config = None))]
fn solve_l0tv(
    py: Python<'_>,
    b: Rows,
    mask: Option<Rows>,
    kernel: &str,
    config: Option<PySolverConfig>,
) -> PyResult<PyRestoration> {
    let b = grid(b)?;
    let op = operator(kernel)?;
    let o = match mask {
        Some(m) => {
            let m = grid(m)?;
            b.same_shape(&m).map_err(py_err)?;
            OutlierMask::new(m.into_data()).map_err(py_err)?
        }
        None => OutlierMask::ones(b.len()),
    };
    let cfg = config_or_default(config);
    py.detach(|| l0tv_core::solve_l0tv(&b, &op, &o, &cfg))
        .map(PyRestoration::from)
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (b, kernel = "identity", config = None))]
fn solve_l1tv(
    py: Python<'_>,
    b: Rows,
    kernel: &str,
    config: Option<PySolverConfig>,
) -> PyResult<PyRestoration> {
    let b = grid(b)?;
    let op = operator(kernel)?;
    let cfg = config_or_default(config);
    py.detach(|| l0tv_core::solve_l1tv(&b, &op, &cfg))
        .map(PyRestoration::from)
        .map_err(py_err)
}

/// Corrupts (and optionally blurs) a clean image, restores it and measures
/// both the observation and the result against the clean image.
#[pyfunction]
#[pyo3(signature = (clean, noise = "sp", density = 0.3, seed = 1, kernel = "identity", solver = "l0tv", mask = "auto", config = None))]
#[allow(clippy::too_many_arguments)]
fn restore(
    py: Python<'_>,
    clean: Rows,
    noise: &str,
    density: f64,
    seed: u64,
    kernel: &str,
    solver: &str,
    mask: &str,
    config: Option<PySolverConfig>,
) -> PyResult<PyRunResult> {
    let clean = grid(clean)?;
    let spec = RunSpec {
        noise: harness::parse_noise(noise).map_err(py_err)?,
        density,
        seed,
        mask: parse::<MaskChoice>(mask)?,
        kernel: parse(kernel)?,
        solver: parse::<SolverKind>(solver)?,
        config: config_or_default(config),
    };
    let out = py.detach(|| harness::run(&clean, &spec, |_, _| {})).map_err(py_err)?;
    Ok(PyRunResult {
        corrupted: out.corrupted.unstack(),
        mask: out.mask.values().to_vec(),
        residual: out.residual.unstack(),
        restoration: out.solve.into(),
        input_quality: out.input_quality.into(),
        restored_quality: out.restored_quality.into(),
    })
}

#[pyfunction]
fn snr(u: Rows, clean: Rows) -> PyResult<PyQuality> {
    CoreQuality::measure(&grid(u)?, &grid(clean)?)
        .map(PyQuality::from)
        .map_err(py_err)
}

/// Kernel weights as rows, e.g. `kernel("disc:3")`.
#[pyfunction]
fn kernel(spec: &str) -> PyResult<Rows> {
    let k = parse::<KernelSpec>(spec)?.kernel().map_err(py_err)?;
    let k = k.unwrap_or_else(l0tv_core::Kernel::delta);
    let (_, cols) = k.shape();
    Ok(k.weights().chunks(cols).map(<[f64]>::to_vec).collect())
}

/// Reads a grayscale PNG or PGM scaled to `[0, 1]`.
#[pyfunction]
fn read_image(path: PathBuf) -> PyResult<Rows> {
    core_read(&path).map(|(g, _)| g.unstack()).map_err(py_err)
}

/// Writes an 8-bit grayscale PNG or PGM, chosen by extension.
#[pyfunction]
fn write_image(path: PathBuf, image: Rows) -> PyResult<()> {
    core_write(&path, &grid(image)?, BitDepth::Eight).map_err(py_err)
}

#[pymodule]
pub fn l0tv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySolverConfig>()?;
    m.add_class::<PyTraceRow>()?;
    m.add_class::<PyRestoration>()?;
    m.add_class::<PyQuality>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(corrupt, m)?)?;
    m.add_function(wrap_pyfunction!(outlier_mask, m)?)?;
    m.add_function(wrap_pyfunction!(solve_l0tv, m)?)?;
    m.add_function(wrap_pyfunction!(solve_l1tv, m)?)?;
    m.add_function(wrap_pyfunction!(restore, m)?)?;
    m.add_function(wrap_pyfunction!(snr, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(read_image, m)?)?;
    m.add_function(wrap_pyfunction!(write_image, m)?)?;
    Ok(())
}
