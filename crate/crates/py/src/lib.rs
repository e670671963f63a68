//! Python bindings: `import pathtele`.
//!
//! Matrices cross the boundary as nested lists of `complex`.
use pathtele_core::analysis::{self, CoherenceGate, SweepPoint};
use pathtele_core::channels::ControlUnitary;
use pathtele_core::protocol::{
    self, Branch, BranchOutcome, ChannelKind, ControlMode, ProtocolConfig,
};
use pathtele_core::qcore::{CMatrix, C64};
use pathtele_core::states::{self, BellLabel};
use pathtele_core::verify::{self, VerifyOptions};
use pathtele_core::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::InvalidConfig(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn rows(m: &CMatrix) -> Vec<Vec<C64>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect())
        .collect()
}

fn parse_branch(s: &str) -> PyResult<Branch> {
    match s {
        "plus" | "+" => Ok(Branch::Plus),
        "minus" | "-" => Ok(Branch::Minus),
        _ => Err(PyValueError::new_err(format!(
            "branch must be 'plus' or 'minus', got {s:?}"
        ))),
    }
}

fn parse_channel(s: &str) -> PyResult<ChannelKind> {
    ChannelKind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| {
            let names: Vec<_> = ChannelKind::ALL.iter().map(|k| k.name()).collect();
            PyValueError::new_err(format!("channel must be one of {names:?}, got {s:?}"))
        })
}

fn parse_bell(s: &str) -> PyResult<BellLabel> {
    match s {
        "phi+" => Ok(BellLabel::PhiPlus),
        "phi-" => Ok(BellLabel::PhiMinus),
        "psi+" => Ok(BellLabel::PsiPlus),
        "psi-" => Ok(BellLabel::PsiMinus),
        _ => Err(PyValueError::new_err(format!(
            "bell label must be phi+, phi-, psi+ or psi-, got {s:?}"
        ))),
    }
}

fn parse_gate(s: &str) -> PyResult<CoherenceGate> {
    match s {
        "hadamard" => Ok(CoherenceGate::Hadamard),
        "matched" => Ok(CoherenceGate::Matched),
        _ => Err(PyValueError::new_err(format!(
            "gate must be 'hadamard' or 'matched', got {s:?}"
        ))),
    }
}

/// Pure single-qubit state `a|0> + sqrt(1-a^2) e^{i eta}|1>`.
#[pyclass(name = "PureQubit", frozen, from_py_object)]
#[derive(Clone)]
struct PyQubit(states::PureQubit);

#[pymethods]
impl PyQubit {
    #[new]
    fn new(a: f64, eta: f64) -> PyResult<Self> {
        states::PureQubit::new(a, eta).map(Self).map_err(to_py)
    }

    /// From the Bloch polar angle `n` in `[0, pi]`.
    #[staticmethod]
    fn from_polar(n: f64, eta: f64) -> PyResult<Self> {
        states::PureQubit::from_polar(n, eta)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn a(&self) -> f64 {
        self.0.a()
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.0.eta()
    }

    #[getter]
    fn polar(&self) -> f64 {
        self.0.polar()
    }

    fn amplitudes(&self) -> Vec<C64> {
        self.0.amplitudes().to_vec()
    }

    fn bloch(&self) -> [f64; 3] {
        protocol::bloch_vector(&self.0)
    }

    fn density(&self) -> Vec<Vec<C64>> {
        rows(self.0.density().matrix())
    }

    fn __repr__(&self) -> String {
        format!("PureQubit(a={}, eta={})", self.0.a(), self.0.eta())
    }
}

/// Control qubit `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
#[pyclass(name = "ControlSpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyControl(states::ControlSpec);

#[pymethods]
impl PyControl {
    #[new]
    fn new(theta_c: f64, phi_c: f64) -> PyResult<Self> {
        states::ControlSpec::with_full_azimuth(theta_c, phi_c)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_interference(x: f64) -> PyResult<Self> {
        states::ControlSpec::from_interference(x)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_coherence(c: f64, phi_c: f64) -> PyResult<Self> {
        states::ControlSpec::from_coherence(c, phi_c)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn theta_c(&self) -> f64 {
        self.0.theta_c()
    }

    #[getter]
    fn phi_c(&self) -> f64 {
        self.0.phi_c()
    }

    #[getter]
    fn interference(&self) -> f64 {
        self.0.interference()
    }

    #[getter]
    fn coherence(&self) -> f64 {
        self.0.coherence()
    }

    fn density(&self) -> Vec<Vec<C64>> {
        rows(self.0.density().matrix())
    }

    fn __repr__(&self) -> String {
        format!(
            "ControlSpec(theta_c={}, phi_c={})",
            self.0.theta_c(),
            self.0.phi_c()
        )
    }
}

/// Two-qubit resource shared between Alice and Bob.
#[pyclass(name = "SharedState", frozen, from_py_object)]
#[derive(Clone)]
struct PyShared(states::SharedState);

#[pymethods]
impl PyShared {
    #[staticmethod]
    fn diagonal(p: [f64; 4]) -> PyResult<Self> {
        states::SharedState::diagonal(p).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn even_parity(p: f64) -> PyResult<Self> {
        states::SharedState::even_parity(p).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn odd_parity(q: f64) -> PyResult<Self> {
        states::SharedState::odd_parity(q).map(Self).map_err(to_py)
    }

    /// Diagonal resource with odd-parity weight `y`, split evenly.
    #[staticmethod]
    fn with_odd_weight(y: f64) -> PyResult<Self> {
        states::SharedState::with_odd_weight(y)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (p, bell = "psi-"))]
    fn werner(p: f64, bell: &str) -> PyResult<Self> {
        states::SharedState::werner(p, parse_bell(bell)?)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn product_mix(r: f64, omega: PyQubit, gamma: PyQubit) -> PyResult<Self> {
        states::SharedState::product_mix(r, omega.0, gamma.0)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn odd_weight(&self) -> Option<f64> {
        self.0.odd_weight()
    }

    fn density(&self) -> PyResult<Vec<Vec<C64>>> {
        let rho = states::build_shared(&self.0).map_err(to_py)?;
        Ok(rows(rho.matrix()))
    }

    fn __repr__(&self) -> String {
        format!("SharedState({:?})", self.0)
    }
}

fn branch_dict<'py>(py: Python<'py>, b: &BranchOutcome) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("probability", b.probability)?;
    d.set_item("fidelity", b.fidelity)?;
    d.set_item("bob_state", b.bob_state.as_ref().map(|s| rows(s.matrix())))?;
    Ok(d)
}

/// One protocol configuration: channel, resource, control and input.
///
/// `unitary` is `"hadamard"` or a `(xi, zeta)` pair for the generic gate.
#[pyclass(name = "Protocol", frozen)]
struct PyProtocol(ProtocolConfig);

#[derive(FromPyObject)]
enum UnitaryArg {
    Named(String),
    Generic(f64, f64),
}

#[pymethods]
impl PyProtocol {
    #[new]
    #[pyo3(signature = (channel, shared, control, input = None, unitary = None, dephased = false))]
    fn new(
        channel: &str,
        shared: PyShared,
        control: PyControl,
        input: Option<PyQubit>,
        unitary: Option<UnitaryArg>,
        dephased: bool,
    ) -> PyResult<Self> {
        let unitary = match unitary {
            None => ControlUnitary::Hadamard,
            Some(UnitaryArg::Named(n)) if n == "hadamard" => ControlUnitary::Hadamard,
            Some(UnitaryArg::Named(n)) => {
                return Err(PyValueError::new_err(format!(
                    "unitary must be 'hadamard' or (xi, zeta), got {n:?}"
                )))
            }
            Some(UnitaryArg::Generic(xi, zeta)) => ControlUnitary::Generic { xi, zeta },
        };
        let mode = if dephased {
            ControlMode::Dephased
        } else {
            ControlMode::Coherent
        };
        let mut cfg = ProtocolConfig::new(parse_channel(channel)?, shared.0, control.0)
            .with_unitary(unitary)
            .with_control_mode(mode);
        if let Some(q) = input {
            cfg = cfg.with_input(q.0);
        }
        cfg.validate().map_err(to_py)?;
        Ok(Self(cfg))
    }

    #[getter]
    fn channel(&self) -> &'static str {
        self.0.channel.name()
    }

    /// `[x_plus, x_minus]` seen by the two branches.
    fn effective_interference(&self) -> [f64; 2] {
        self.0.effective_interference()
    }

    /// Full simulation for the configured input.
    fn run<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = protocol::run(&self.0).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("plus", branch_dict(py, &out.plus)?)?;
        d.set_item("minus", branch_dict(py, &out.minus)?)?;
        Ok(d)
    }

    /// Standard teleportation over the same resource, no control.
    fn run_standard<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = protocol::run_standard(&self.0).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("fidelity", out.fidelity)?;
        d.set_item("bob_state", rows(out.bob_state.matrix()))?;
        Ok(d)
    }

    /// Input-averaged fidelity by quadrature; `None` if the branch never fires.
    fn avg_fidelity(&self, branch: &str) -> PyResult<Option<f64>> {
        analysis::simulated_avg_fidelity(&self.0, parse_branch(branch)?).map_err(to_py)
    }

    #[pyo3(signature = (branch, samples = 10_000, seed = 2024))]
    fn mc_avg_fidelity<'py>(
        &self,
        py: Python<'py>,
        branch: &str,
        samples: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let est = analysis::mc_avg_fidelity(&self.0, parse_branch(branch)?, samples, seed)
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("mean", est.mean)?;
        d.set_item("std_error", est.std_error)?;
        d.set_item("used", est.used)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Protocol({:?})", self.0)
    }
}

fn point(x: f64, y: f64) -> PyResult<SweepPoint> {
    SweepPoint::new(x, y).map_err(to_py)
}

#[pyfunction]
fn avg_fidelity_k(x: f64, y: f64, branch: &str) -> PyResult<f64> {
    Ok(analysis::avg_fidelity_k(
        point(x, y)?,
        parse_branch(branch)?,
    ))
}

#[pyfunction]
fn avg_fidelity_l(x: f64, y: f64, branch: &str) -> PyResult<f64> {
    Ok(analysis::avg_fidelity_l(
        point(x, y)?,
        parse_branch(branch)?,
    ))
}

#[pyfunction]
fn avg_fidelity_werner(p: f64, x: f64, branch: &str) -> PyResult<f64> {
    Ok(analysis::avg_fidelity_werner(p, x, parse_branch(branch)?))
}

#[pyfunction]
fn avg_fidelity_coherence_opt(c: f64) -> f64 {
    analysis::avg_fidelity_coherence_opt(c)
}

/// `(verdict, margin, branch)` with verdict `"K"`, `"L"` or `"none"`.
#[pyfunction]
fn classify_advantage(x: f64, y: f64) -> PyResult<(&'static str, f64, Option<&'static str>)> {
    let v = analysis::classify_advantage(point(x, y)?);
    Ok((v.verdict.name(), v.margin, v.branch.map(Branch::name)))
}

#[pyfunction]
#[pyo3(signature = (c, phi_c, gate = "hadamard"))]
fn coherence_point<'py>(
    py: Python<'py>,
    c: f64,
    phi_c: f64,
    gate: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let p = analysis::coherence_point(c, phi_c, parse_gate(gate)?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("coherence", p.coherence)?;
    d.set_item("phi_c", p.phi_c)?;
    d.set_item("closed_plus", p.closed_plus)?;
    d.set_item("closed_minus", p.closed_minus)?;
    d.set_item("sim_plus", p.sim_plus)?;
    d.set_item("sim_minus", p.sim_minus)?;
    d.set_item("f_max", p.f_max)?;
    d.set_item("f_adv", p.f_adv)?;
    Ok(d)
}

/// Run the acceptance suite, or a subset of criteria by id.
#[pyfunction]
#[pyo3(signature = (seed = 2024, samples = 10_000, trials = 100, tolerance_scale = 1.0, criteria = None))]
fn run_verify<'py>(
    py: Python<'py>,
    seed: u64,
    samples: usize,
    trials: usize,
    tolerance_scale: f64,
    criteria: Option<Vec<u8>>,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = VerifyOptions {
        seed,
        samples,
        trials,
        tolerance_scale,
    };
    let results = match criteria {
        None => verify::run_all(&opts).map_err(to_py)?.criteria,
        Some(ids) => ids
            .into_iter()
            .map(|id| verify::run_criterion(id, &opts))
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py)?,
    };
    let mut all = true;
    let mut list = Vec::with_capacity(results.len());
    for r in &results {
        all &= r.passed;
        let d = PyDict::new(py);
        d.set_item("id", r.id)?;
        d.set_item("name", r.name)?;
        d.set_item("passed", r.passed)?;
        d.set_item("summary", r.summary_line())?;
        let checks = r
            .checks
            .iter()
            .map(|c| {
                let cd = PyDict::new(py);
                cd.set_item("quantity", &c.quantity)?;
                cd.set_item("measured", c.measured)?;
                cd.set_item("tolerance", c.tolerance)?;
                cd.set_item("passed", c.passed)?;
                Ok(cd)
            })
            .collect::<PyResult<Vec<_>>>()?;
        d.set_item("checks", checks)?;
        list.push(d);
    }
    let report = PyDict::new(py);
    report.set_item("suite_version", verify::SUITE_VERSION)?;
    report.set_item("passed", all)?;
    report.set_item("criteria", list)?;
    Ok(report)
}

#[pymodule]
fn pathtele(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQubit>()?;
    m.add_class::<PyControl>()?;
    m.add_class::<PyShared>()?;
    m.add_class::<PyProtocol>()?;
    m.add_function(wrap_pyfunction!(avg_fidelity_k, m)?)?;
    m.add_function(wrap_pyfunction!(avg_fidelity_l, m)?)?;
    m.add_function(wrap_pyfunction!(avg_fidelity_werner, m)?)?;
    m.add_function(wrap_pyfunction!(avg_fidelity_coherence_opt, m)?)?;
    m.add_function(wrap_pyfunction!(classify_advantage, m)?)?;
    m.add_function(wrap_pyfunction!(coherence_point, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add("CLASSICAL_BOUND", analysis::CLASSICAL_BOUND)?;
    m.add("SUITE_VERSION", verify::SUITE_VERSION)?;
    Ok(())
}
