//! Homogenized Green function, multipole moments, artificial boundary data and
//! the final Dirichlet solve.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::correctors::{compute_correctors, CorrectorOptions, CorrectorSet, HomogenizedModel};
use crate::error::{Error, Result};
use crate::lattice::{restrict_edge_field, EdgeCharge, EdgeField, LatticeBox, NodeField, Point};
use crate::solver::{solve, DirichletProblem, Solution, SolverConfig};

/// Index pairs carrying quadrupole moments in dimension 3.
pub const QUADRUPOLE_PAIRS: [(usize, usize); 5] = [(0, 1), (0, 2), (1, 2), (1, 1), (2, 2)];

/// Whole-space Green function of `-∇·A∇` for a constant SPD matrix `A`.
///
/// With `s = x·A⁻¹x`: `G = s^{-1/2} / (4π√det A)` in dimension 3 and
/// `G = -log(s) / (4π√det A)` in dimension 2.
/// Highest derivative order of `G` the evaluator supports.
pub const MAX_ORDER: usize = 8;

#[derive(Clone, Debug)]
pub struct GreenEvaluator {
    dim: usize,
    inv: [[f64; 3]; 3],
    scale: f64,
}

impl GreenEvaluator {
    pub fn new(model: &HomogenizedModel) -> Self {
        let d = model.dim();
        let mut inv = [[0.0; 3]; 3];
        for r in 0..d {
            for c in 0..d {
                inv[r][c] = model.inverse()[(r, c)];
            }
        }
        GreenEvaluator {
            dim: d,
            inv,
            scale: 1.0 / (4.0 * PI * model.determinant().sqrt()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `n`-th derivative of the radial profile `s ↦ G`.
    fn profile(&self, s: f64, n: usize) -> f64 {
        if self.dim == 3 {
            let mut c = self.scale;
            for m in 0..n {
                c *= -0.5 - m as f64;
            }
            c * s.powf(-0.5 - n as f64)
        } else if n == 0 {
            -self.scale * s.ln()
        } else {
            let fact: f64 = (1..n).map(|m| m as f64).product();
            let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
            sign * self.scale * fact * s.powi(-(n as i32))
        }
    }

    /// Mixed partial derivative `∂_{idx[0]} ∂_{idx[1]} ... G(x)`.
    ///
    /// Faà di Bruno with the quadratic `s`: a sum over partitions of the
    /// derivative indices into singletons (`∂_i s = 2(A⁻¹x)_i`) and pairs
    /// (`∂_ij s = 2A⁻¹_ij`).
    pub fn derivative(&self, x: &[f64; 3], idx: &[usize]) -> f64 {
        assert!(idx.len() <= MAX_ORDER, "derivative order above {MAX_ORDER}");
        let mut y = [0.0; 3];
        let mut s = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                y[r] += self.inv[r][c] * x[c];
            }
            s += x[r] * y[r];
        }
        let mut total = 0.0;
        self.partitions(idx, &y, 0, 1.0, s, &mut total);
        total
    }

    fn partitions(
        &self,
        rest: &[usize],
        y: &[f64; 3],
        blocks: usize,
        weight: f64,
        s: f64,
        total: &mut f64,
    ) {
        let Some((&first, tail)) = rest.split_first() else {
            *total += weight * self.profile(s, blocks);
            return;
        };
        self.partitions(tail, y, blocks + 1, weight * 2.0 * y[first], s, total);
        let mut others = [0usize; MAX_ORDER];
        for m in 0..tail.len() {
            let pair = 2.0 * self.inv[first][tail[m]];
            if pair != 0.0 {
                others[..m].copy_from_slice(&tail[..m]);
                others[m..tail.len() - 1].copy_from_slice(&tail[m + 1..]);
                self.partitions(&others[..tail.len() - 1], y, blocks + 1, weight * pair, s, total);
            }
        }
    }

    pub fn value(&self, x: &[f64; 3]) -> f64 {
        self.derivative(x, &[])
    }

    pub fn gradient(&self, x: &[f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (k, v) in g.iter_mut().enumerate().take(self.dim) {
            *v = self.derivative(x, &[k]);
        }
        g
    }

    pub fn hessian(&self, x: &[f64; 3]) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for r in 0..self.dim {
            for c in r..self.dim {
                let v = self.derivative(x, &[r, c]);
                h[r][c] = v;
                h[c][r] = v;
            }
        }
        h
    }
}

fn to_real(p: &Point) -> [f64; 3] {
    [p[0] as f64, p[1] as f64, p[2] as f64]
}

fn check_clear(charge: &EdgeCharge, x: &[f64; 3]) -> Result<()> {
    for e in charge.edges() {
        let m = e.midpoint();
        if (0..3).all(|k| (x[k] - m[k]).abs() <= 0.5) {
            return Err(Error::Singular([
                x[0].round() as i64,
                x[1].round() as i64,
                x[2].round() as i64,
            ]));
        }
    }
    Ok(())
}

/// Derivative `∂_idx u_hom(x)` of `u_hom = ∫ G ∇·h`, written after summation by
/// parts as `Σ_edges h ∂_k G(x - midpoint)`.
pub fn u_hom_derivative(
    charge: &EdgeCharge,
    green: &GreenEvaluator,
    x: &[f64; 3],
    idx: &[usize],
) -> Result<f64> {
    check_clear(charge, x)?;
    let mut full = Vec::with_capacity(idx.len() + 1);
    let mut total = 0.0;
    for e in charge.edges() {
        let m = e.midpoint();
        let z = [x[0] - m[0], x[1] - m[1], x[2] - m[2]];
        full.clear();
        full.push(e.direction);
        full.extend_from_slice(idx);
        total += e.weight * green.derivative(&z, &full);
    }
    Ok(total)
}

/// Value, gradient or Hessian of `u_hom` (flattened row-major for order 2).
pub fn u_hom_eval(charge: &EdgeCharge, green: &GreenEvaluator, x: &[f64; 3], order: usize) -> Result<Vec<f64>> {
    let d = green.dim();
    match order {
        0 => Ok(vec![u_hom_derivative(charge, green, x, &[])?]),
        1 => (0..d).map(|k| u_hom_derivative(charge, green, x, &[k])).collect(),
        2 => {
            let mut out = vec![0.0; d * d];
            for r in 0..d {
                for c in r..d {
                    let v = u_hom_derivative(charge, green, x, &[r, c])?;
                    out[r * d + c] = v;
                    out[c * d + r] = v;
                }
            }
            Ok(out)
        }
        _ => Err(Error::InvalidArgument(format!("derivative order {order} not supported"))),
    }
}

/// `v_ij = (1 - δ_ij/2)(x_i x_j - (A_ij/A_00) x_0²)`, which satisfies
/// `A:∇²v_ij = 0` for every pair.
pub fn harmonic_polynomial(model: &HomogenizedModel, i: usize, j: usize, x: &[f64; 3]) -> f64 {
    let a = model.matrix();
    let w = if i == j { 0.5 } else { 1.0 };
    w * (x[i] * x[j] - a[(i, j)] / a[(0, 0)] * x[0] * x[0])
}

pub fn harmonic_polynomial_gradient(model: &HomogenizedModel, i: usize, j: usize, x: &[f64; 3]) -> [f64; 3] {
    let a = model.matrix();
    let w = if i == j { 0.5 } else { 1.0 };
    let mut g = [0.0; 3];
    g[i] += w * x[j];
    g[j] += w * x[i];
    g[0] -= w * 2.0 * a[(i, j)] / a[(0, 0)] * x[0];
    g
}

pub fn harmonic_polynomial_hessian(model: &HomogenizedModel, i: usize, j: usize) -> [[f64; 3]; 3] {
    let a = model.matrix();
    let w = if i == j { 0.5 } else { 1.0 };
    let mut h = [[0.0; 3]; 3];
    h[i][j] += w;
    h[j][i] += w;
    h[0][0] -= w * 2.0 * a[(i, j)] / a[(0, 0)];
    h
}

fn support_values(u: &NodeField, charge: &EdgeCharge) -> Result<()> {
    for e in charge.edges() {
        if !u.lattice_box().contains(&e.base) || !u.lattice_box().contains(&e.head()) {
            return Err(Error::BoxMismatch(format!(
                "charge edge at {:?} outside the corrector box",
                e.base
            )));
        }
    }
    Ok(())
}

/// `Σ_edges h ∇ψ` for a node field `ψ`.
fn pair_with_gradient(charge: &EdgeCharge, psi: impl Fn(&Point) -> f64) -> f64 {
    charge
        .edges()
        .iter()
        .map(|e| e.weight * (psi(&e.head()) - psi(&e.base)))
        .sum()
}

/// `ξ1_i = Σ_edges h·∇φ1_i`.
pub fn dipole_coefficients(charge: &EdgeCharge, phi1: &[NodeField]) -> Result<Vec<f64>> {
    phi1.iter()
        .map(|phi| {
            support_values(phi, charge)?;
            Ok(pair_with_gradient(charge, |p| phi.at(p)))
        })
        .collect()
}

/// `ξ2_ij = -Σ_edges h·∇(Σ_k φ1_k ∂_k v_ij + (2 - δ_ij)(φ2_ij - (A_ij/A_00) φ2_00))`
/// for the pairs in [`QUADRUPOLE_PAIRS`].
pub fn quadrupole_coefficients(
    charge: &EdgeCharge,
    phi1: &[NodeField],
    phi2: &[Vec<NodeField>],
    model: &HomogenizedModel,
) -> Result<Vec<((usize, usize), f64)>> {
    if model.dim() != 3 || phi1.len() != 3 || phi2.len() != 3 {
        return Err(Error::InvalidArgument("quadrupole moments need dimension 3".into()));
    }
    for f in phi1.iter().chain(phi2.iter().flatten()) {
        support_values(f, charge)?;
    }
    let a = model.matrix();
    Ok(QUADRUPOLE_PAIRS
        .iter()
        .map(|&(i, j)| {
            let ratio = a[(i, j)] / a[(0, 0)];
            let weight = if i == j { 1.0 } else { 2.0 };
            let psi = |p: &Point| {
                let x = to_real(p);
                let g = harmonic_polynomial_gradient(model, i, j, &x);
                let first: f64 = (0..3).map(|k| phi1[k].at(p) * g[k]).sum();
                first + weight * (phi2[i][j].at(p) - ratio * phi2[0][0].at(p))
            };
            ((i, j), -pair_with_gradient(charge, psi))
        })
        .collect())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MomentCoefficients {
    pub dipole: Vec<f64>,
    pub quadrupole: Vec<((usize, usize), f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Zero,
    NoPole,
    Dipole,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Zero, Variant::NoPole, Variant::Dipole, Variant::Full];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Zero => "zero",
            Variant::NoPole => "nopole",
            Variant::Dipole => "dipole",
            Variant::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(Variant::Zero),
            "nopole" => Ok(Variant::NoPole),
            "dipole" => Ok(Variant::Dipole),
            "full" => Ok(Variant::Full),
            other => Err(Error::Config(format!("unknown recipe '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

impl Order {
    /// Second order only in dimension 3 with covariance decay faster than
    /// `|x|^{-2}`; `decay` of `None` means faster than any power.
    pub fn for_model(dim: usize, decay: Option<f64>) -> Order {
        if dim == 3 && decay.map_or(true, |b| b > 2.0) {
            Order::Second
        } else {
            Order::First
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryRecipe {
    pub variant: Variant,
    pub order: Order,
}

/// Everything the boundary recipes share for one coefficient field and `L`.
#[derive(Clone, Debug)]
pub struct MultipoleContext {
    pub correctors: CorrectorSet,
    pub green: GreenEvaluator,
    pub charge: EdgeCharge,
    pub moments: MomentCoefficients,
    pub order: Order,
}

impl MultipoleContext {
    /// Correctors, Green function and moments for half-width `L`. The dipole
    /// moments are multiplied by `dipole_sign`.
    pub fn build(
        a: &EdgeField,
        charge: &EdgeCharge,
        half_width: i64,
        order: Order,
        opts: &CorrectorOptions,
        dipole_sign: f64,
    ) -> Result<Self> {
        let opts = CorrectorOptions {
            second_order: order == Order::Second,
            ..*opts
        };
        let correctors = compute_correctors(a, half_width, &opts)?;
        let green = GreenEvaluator::new(&correctors.homogenized);
        let mut dipole = dipole_coefficients(charge, &correctors.phi1)?;
        for v in &mut dipole {
            *v *= dipole_sign;
        }
        let quadrupole = match &correctors.phi2 {
            Some(phi2) => quadrupole_coefficients(charge, &correctors.phi1, phi2, &correctors.homogenized)?,
            None => Vec::new(),
        };
        Ok(MultipoleContext {
            correctors,
            green,
            charge: charge.clone(),
            moments: MomentCoefficients { dipole, quadrupole },
            order,
        })
    }

    /// Derivative `∂_idx` of the bracket `u_hom + Σ ξ1 ∂G + Σ ξ2 ∂∂G` with
    /// the multipole terms selected by the flags.
    fn bracket(&self, x: &[f64; 3], idx: &[usize], dipole: bool, quadrupole: bool) -> Result<f64> {
        let mut v = u_hom_derivative(&self.charge, &self.green, x, idx)?;
        let mut full = Vec::with_capacity(idx.len() + 2);
        if dipole {
            for (i, xi) in self.moments.dipole.iter().enumerate() {
                full.clear();
                full.push(i);
                full.extend_from_slice(idx);
                v += xi * self.green.derivative(x, &full);
            }
        }
        if quadrupole {
            for &((i, j), xi) in &self.moments.quadrupole {
                full.clear();
                full.extend_from_slice(&[i, j]);
                full.extend_from_slice(idx);
                v += xi * self.green.derivative(x, &full);
            }
        }
        Ok(v)
    }

    /// Boundary data on `∂Q_L` for a recipe; interior entries are zero.
    pub fn boundary(&self, recipe: BoundaryRecipe, target: &LatticeBox) -> Result<NodeField> {
        let d = target.dim();
        let mut out = NodeField::zeros(*target);
        if recipe.variant == Variant::Zero {
            return Ok(out);
        }
        let second = recipe.order == Order::Second && recipe.variant != Variant::Dipole;
        if second && self.correctors.phi2.is_none() {
            return Err(Error::InvalidArgument("second-order recipe without φ2".into()));
        }
        let dipole = recipe.variant != Variant::NoPole;
        let quadrupole = recipe.variant == Variant::Full && second;
        let phi1 = &self.correctors.phi1;
        let phi2 = self.correctors.phi2.as_ref();
        let nodes = target.boundary_indices();
        let values: Vec<Result<f64>> = nodes
            .par_iter()
            .map(|&i| {
                let p = target.point(i);
                let x = to_real(&p);
                let mut v = self.bracket(&x, &[], dipole, quadrupole)?;
                for k in 0..d {
                    v += phi1[k].at(&p) * self.bracket(&x, &[k], dipole, quadrupole)?;
                }
                if let (true, Some(phi2)) = (second, phi2) {
                    for r in 0..d {
                        for c in 0..d {
                            v += phi2[r][c].at(&p) * self.bracket(&x, &[r, c], dipole, quadrupole)?;
                        }
                    }
                }
                Ok(v)
            })
            .collect();
        for (&i, v) in nodes.iter().zip(values) {
            out.values_mut()[i] = v?;
        }
        Ok(out)
    }
}

/// Solves `-∇·a∇u = ∇·h` on `target` with the given boundary data; `a` may
/// live on a larger box.
pub fn solve_variant(
    a: &EdgeField,
    charge: &EdgeCharge,
    boundary: NodeField,
    cfg: &SolverConfig,
) -> Result<Solution> {
    let target = *boundary.lattice_box();
    let local = restrict_edge_field(a, &target)?;
    let rhs = charge.divergence(&target)?;
    solve(&DirichletProblem::new(&local, 0.0, rhs).boundary_values(boundary), cfg)
}

/// Full pipeline for one recipe: correctors on `Q_{2L}`, boundary on `∂Q_L`,
/// final solve.
pub fn run_algorithm(
    a: &EdgeField,
    charge: &EdgeCharge,
    half_width: i64,
    recipe: BoundaryRecipe,
    opts: &CorrectorOptions,
    dipole_sign: f64,
) -> Result<Solution> {
    let target = LatticeBox::cube(a.lattice_box().dim(), half_width)?;
    if recipe.variant == Variant::Zero {
        return solve_variant(a, charge, NodeField::zeros(target), &opts.solver);
    }
    let ctx = MultipoleContext::build(a, charge, half_width, recipe.order, opts, dipole_sign)?;
    let bnd = ctx.boundary(recipe, &target)?;
    solve_variant(a, charge, bnd, &opts.solver)
}
