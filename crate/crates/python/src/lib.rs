//! Python module `randabc`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use randabc_core::bench::{fit_rates, records_csv, run_convergence};
use randabc_core::config::ExperimentConfig;
use randabc_core::correctors::{compute_correctors, corrector_residuals, CorrectorOptions};
use randabc_core::field::{build_spectrum, coefficient_field, sample_field, torus_extents, CoefficientMap, CovarianceSpec};
use randabc_core::lattice::{ChargeSpec, Point};
use randabc_core::multipole::{run_algorithm, BoundaryRecipe, Order, Variant};
use randabc_core::optimality::{conditional_variance, lattice_green, optimality_charge, scaling_fit, CorrelationModel};
use randabc_core::solver::{solve, DirichletProblem, SolverConfig};
use randabc_core::{lattice, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NotConverged { .. } | Error::Indefinite { .. } | Error::NotPositiveDefinite(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn point(coords: &[i64]) -> PyResult<Point> {
    if coords.len() > 3 {
        return Err(PyValueError::new_err("at most 3 coordinates"));
    }
    let mut p = [0; 3];
    p[..coords.len()].copy_from_slice(coords);
    Ok(p)
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct LatticeBox(lattice::LatticeBox);

#[pymethods]
impl LatticeBox {
    #[new]
    fn new(dim: usize, half_width: i64) -> PyResult<Self> {
        lattice::LatticeBox::cube(dim, half_width).map(LatticeBox).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn half_width(&self) -> i64 {
        self.0.radius()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("LatticeBox(dim={}, half_width={})", self.0.dim(), self.0.radius())
    }
}

/// Values on the nodes of a box, row-major with axis 0 slowest.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct NodeField(lattice::NodeField);

#[pymethods]
impl NodeField {
    #[new]
    fn new(bx: &LatticeBox, values: Vec<f64>) -> PyResult<Self> {
        lattice::NodeField::from_values(bx.0, values).map(NodeField).map_err(py_err)
    }

    #[getter]
    fn lattice_box(&self) -> LatticeBox {
        LatticeBox(*self.0.lattice_box())
    }

    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn at(&self, coords: Vec<i64>) -> PyResult<f64> {
        self.0
            .get(&point(&coords)?)
            .ok_or_else(|| PyValueError::new_err(format!("{coords:?} outside the box")))
    }

    fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }
}

/// Conductances on the edges `(n, n + e_k)` of a box.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct EdgeField(lattice::EdgeField);

#[pymethods]
impl EdgeField {
    #[staticmethod]
    fn constant(bx: &LatticeBox, value: f64) -> Self {
        EdgeField(lattice::EdgeField::constant(bx.0, value))
    }

    #[getter]
    fn lattice_box(&self) -> LatticeBox {
        LatticeBox(*self.0.lattice_box())
    }

    fn get(&self, coords: Vec<i64>, direction: usize) -> PyResult<f64> {
        self.0
            .get(&point(&coords)?, direction)
            .ok_or_else(|| PyValueError::new_err("edge outside the box"))
    }

    fn min_max(&self) -> (f64, f64) {
        self.0.min_max()
    }
}

fn covariance(kind: &str, theta: f64, beta: Option<f64>) -> PyResult<CovarianceSpec> {
    match kind {
        "gaussian" => Ok(CovarianceSpec::Gaussian { theta }),
        "algebraic" => Ok(CovarianceSpec::Algebraic {
            theta,
            beta: beta.ok_or_else(|| PyValueError::new_err("algebraic covariance needs beta"))?,
        }),
        "delta" => Ok(CovarianceSpec::Delta),
        other => Err(PyValueError::new_err(format!("unknown covariance '{other}'"))),
    }
}

/// Samples `g` on `Q_L` and returns `(g, a)` with the logistic map.
#[pyfunction]
#[pyo3(signature = (dim, half_width, seed, covariance_kind="gaussian", theta=8.0, beta=None))]
fn sample_coefficients(
    dim: usize,
    half_width: i64,
    seed: u64,
    covariance_kind: &str,
    theta: f64,
    beta: Option<f64>,
) -> PyResult<(NodeField, EdgeField)> {
    let spec = covariance(covariance_kind, theta, beta)?;
    let bx = lattice::LatticeBox::cube(dim, half_width).map_err(py_err)?;
    let spectrum = build_spectrum(&spec, &torus_extents(&spec, &bx), Some(1e-3)).map_err(py_err)?;
    let g = sample_field(&spectrum, &bx, seed).map_err(py_err)?.g;
    let a = coefficient_field(&g, &CoefficientMap::Logistic);
    Ok((NodeField(g), EdgeField(a)))
}

/// Solves `(1/M) u - ∇·a∇u = rhs` with Dirichlet data; returns
/// `(u, iterations, relative residual)`.
#[pyfunction]
#[pyo3(signature = (a, rhs, boundary=None, mass_term=0.0, tolerance=1e-9))]
fn solve_dirichlet(
    a: &EdgeField,
    rhs: &NodeField,
    boundary: Option<&NodeField>,
    mass_term: f64,
    tolerance: f64,
) -> PyResult<(NodeField, usize, f64)> {
    let mut problem = DirichletProblem::new(&a.0, mass_term, rhs.0.clone());
    if let Some(b) = boundary {
        problem = problem.boundary_values(b.0.clone());
    }
    let cfg = SolverConfig {
        rel_tolerance: tolerance,
        ..Default::default()
    };
    let sol = solve(&problem, &cfg).map_err(py_err)?;
    Ok((NodeField(sol.u), sol.diagnostics.iterations, sol.diagnostics.final_residual))
}

/// Corrector stage for target half-width `L`; `a` must cover `Q_{2L}`.
/// Returns `(a_hom rows, [φ1_i], max residual)`.
#[pyfunction]
#[pyo3(signature = (a, half_width, second_order=false, epsilon=0.1))]
fn correctors(
    a: &EdgeField,
    half_width: i64,
    second_order: bool,
    epsilon: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<NodeField>, f64)> {
    let opts = CorrectorOptions {
        epsilon,
        second_order,
        ..Default::default()
    };
    let set = compute_correctors(&a.0, half_width, &opts).map_err(py_err)?;
    let res = corrector_residuals(&a.0, &set).map_err(py_err)?;
    let m = set.homogenized.raw();
    let rows = (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect();
    Ok((rows, set.phi1.into_iter().map(NodeField).collect(), res))
}

/// Algorithm on `Q_L` for a unit dipole on the edge `(0, e_1)`.
#[pyfunction]
#[pyo3(signature = (a, half_width, recipe="full"))]
fn run_recipe(a: &EdgeField, half_width: i64, recipe: &str) -> PyResult<NodeField> {
    let d = a.0.lattice_box().dim();
    let variant = Variant::parse(recipe).map_err(py_err)?;
    let charge = ChargeSpec::unit_dipole().edge_charge(d).map_err(py_err)?;
    let recipe = BoundaryRecipe {
        variant,
        order: Order::for_model(d, None),
    };
    run_algorithm(&a.0, &charge, half_width, recipe, &CorrectorOptions::default(), 1.0)
        .map(|s| NodeField(s.u))
        .map_err(py_err)
}

/// Lattice Green function of `-Δ` on `Q_radius`.
#[pyfunction]
fn green_function(dim: usize, radius: i64) -> PyResult<NodeField> {
    lattice_green(dim, radius).map(|g| NodeField(g.values().clone())).map_err(py_err)
}

/// `(estimate, tail bound, converged)` of the conditional variance.
#[pyfunction]
#[pyo3(signature = (dim, beta, half_width, ell=1, truncation=None))]
fn optimality_variance(
    dim: usize,
    beta: f64,
    half_width: i64,
    ell: i64,
    truncation: Option<i64>,
) -> PyResult<(f64, f64, bool)> {
    let rt = truncation.unwrap_or(4 * half_width);
    let model = CorrelationModel::new(dim, beta).map_err(py_err)?;
    let charge = optimality_charge(dim, ell).map_err(py_err)?;
    let green = lattice_green(dim, rt + ell + 2).map_err(py_err)?;
    let v = conditional_variance(model, &charge, half_width, rt, &green).map_err(py_err)?;
    Ok((v.estimate, v.tail_bound, v.converged))
}

/// Log-log least squares: `(slope, stderr, intercept)`.
#[pyfunction]
fn fit_power_law(points: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    scaling_fit(&points)
        .map(|f| (f.slope, f.stderr, f.intercept))
        .map_err(py_err)
}

/// Runs the benchmark for a config text; returns `(records csv, {variant: slope})`.
#[pyfunction]
#[pyo3(name = "bench")]
fn run_bench(config_text: &str) -> PyResult<(String, Vec<(String, f64)>)> {
    let cfg = ExperimentConfig::parse(config_text).map_err(py_err)?;
    let records = run_convergence(&cfg, None).map_err(py_err)?;
    let (fits, _) = fit_rates(&records);
    Ok((
        records_csv(&records),
        fits.iter().map(|f| (f.variant.name().to_string(), f.fit.slope)).collect(),
    ))
}

#[pymodule]
fn randabc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<LatticeBox>()?;
    m.add_class::<NodeField>()?;
    m.add_class::<EdgeField>()?;
    m.add_function(wrap_pyfunction!(sample_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(solve_dirichlet, m)?)?;
    m.add_function(wrap_pyfunction!(correctors, m)?)?;
    m.add_function(wrap_pyfunction!(run_recipe, m)?)?;
    m.add_function(wrap_pyfunction!(green_function, m)?)?;
    m.add_function(wrap_pyfunction!(optimality_variance, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    Ok(())
}
