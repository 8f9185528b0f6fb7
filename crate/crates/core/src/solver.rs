//! Dirichlet problems for `(1/M) u - ∇·a∇u = rhs` on a lattice box.
//!
//! The iterative path is Jacobi-preconditioned conjugate gradients on the
//! interior unknowns, matrix free. All reductions use fixed-size chunks summed
//! in order, so results do not depend on the rayon thread count.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{check_conductances, discrete_divergence, row_pairs, EdgeField, NodeField};

const CHUNK: usize = 4096;
const MAX_RESTARTS: usize = 4;
pub const DENSE_LIMIT: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    Jacobi,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Stop when `‖b - A x‖ ≤ rel_tolerance ‖b‖` on the interior unknowns.
    pub rel_tolerance: f64,
    /// Iteration cap; `None` means `50 (2L + 1)` for the box radius `L`.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tolerance: 1e-9,
            max_iterations: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "relative tolerance must lie in (0,1), got {}",
                self.rel_tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        Ok(())
    }

    fn iteration_cap(&self, radius: i64) -> usize {
        self.max_iterations
            .unwrap_or(50 * (2 * radius as usize + 1))
    }
}

/// Linear problem on the box of `a`. Boundary nodes take `boundary` values
/// (zero when absent); interior rows of `rhs` are the source.
#[derive(Clone, Debug)]
pub struct DirichletProblem<'a> {
    pub a: &'a EdgeField,
    pub mass_term: f64,
    pub rhs: NodeField,
    pub boundary: Option<NodeField>,
}

impl<'a> DirichletProblem<'a> {
    pub fn new(a: &'a EdgeField, mass_term: f64, rhs: NodeField) -> Self {
        DirichletProblem {
            a,
            mass_term,
            rhs,
            boundary: None,
        }
    }

    /// Right-hand side `∇·F` assembled through the discrete divergence.
    pub fn with_divergence(a: &'a EdgeField, mass_term: f64, flux: &EdgeField) -> Self {
        Self::new(a, mass_term, discrete_divergence(flux))
    }

    pub fn boundary_values(mut self, boundary: NodeField) -> Self {
        self.boundary = Some(boundary);
        self
    }

    fn validate(&self) -> Result<()> {
        let bx = self.a.lattice_box();
        bx.check_same(self.rhs.lattice_box(), "rhs")?;
        if let Some(b) = &self.boundary {
            bx.check_same(b.lattice_box(), "boundary values")?;
        }
        if !(self.mass_term >= 0.0 && self.mass_term.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "mass term must be finite and nonnegative, got {}",
                self.mass_term
            )));
        }
        check_conductances(self.a)
    }

    /// Boundary values on boundary nodes, zero elsewhere.
    fn boundary_field(&self) -> Vec<f64> {
        let bx = self.a.lattice_box();
        let mut xb = vec![0.0; bx.len()];
        if let Some(b) = &self.boundary {
            for i in bx.boundary_indices() {
                xb[i] = b.values()[i];
            }
        }
        xb
    }

    /// Interior right-hand side with the boundary coupling moved over.
    fn reduced_rhs(&self, xb: &[f64]) -> Vec<f64> {
        let bx = self.a.lattice_box();
        let mut b = vec![0.0; bx.len()];
        if self.boundary.is_some() {
            apply_interior(self.a, self.mass_term, xb, &mut b);
        }
        b.par_iter_mut()
            .zip(self.rhs.values().par_iter())
            .for_each(|(bi, &r)| *bi = r - *bi);
        for i in bx.boundary_indices() {
            b[i] = 0.0;
        }
        b
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    /// True relative residual `‖b - A u‖ / ‖b‖` after the solve.
    pub final_residual: f64,
    /// Preconditioned residual norms `sqrt(r·z)` per iteration.
    pub history: Vec<f64>,
    /// Whether `history` is nonincreasing. CG does not guarantee this.
    pub monotone: bool,
    pub restarts: usize,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: NodeField,
    pub diagnostics: SolveDiagnostics,
}

pub(crate) fn interior_mask(bx: &crate::lattice::LatticeBox) -> Vec<bool> {
    let mut mask = vec![false; bx.len()];
    for i in bx.interior_indices() {
        mask[i] = true;
    }
    mask
}

/// Computes `out = (1/M) u - ∇·a∇u` at interior nodes and zero on the boundary.
pub(crate) fn apply_interior(a: &EdgeField, mass: f64, u: &[f64], out: &mut [f64]) {
    let bx = *a.lattice_box();
    let d = bx.dim();
    let last = d - 1;
    let nl = bx.extent(last);
    match d {
        3 => {
            let (s0, s1) = (bx.stride(0), bx.stride(1));
            let (n0, n1) = (bx.extent(0), bx.extent(1));
            let (a0, a1, a2) = (a.dir(0), a.dir(1), a.dir(2));
            out.par_chunks_mut(s0).enumerate().for_each(|(i0, plane)| {
                if i0 == 0 || i0 == n0 - 1 {
                    plane.fill(0.0);
                    return;
                }
                for i1 in 0..n1 {
                    let row = &mut plane[i1 * s1..i1 * s1 + nl];
                    if i1 == 0 || i1 == n1 - 1 {
                        row.fill(0.0);
                        continue;
                    }
                    let start = i0 * s0 + i1 * s1;
                    row[0] = 0.0;
                    row[nl - 1] = 0.0;
                    for j in 1..nl - 1 {
                        let i = start + j;
                        let ui = u[i];
                        row[j] = mass * ui
                            + a0[i] * (ui - u[i + s0])
                            + a0[i - s0] * (ui - u[i - s0])
                            + a1[i] * (ui - u[i + s1])
                            + a1[i - s1] * (ui - u[i - s1])
                            + a2[i] * (ui - u[i + 1])
                            + a2[i - 1] * (ui - u[i - 1]);
                    }
                }
            });
        }
        2 => {
            let s0 = bx.stride(0);
            let n0 = bx.extent(0);
            let (a0, a1) = (a.dir(0), a.dir(1));
            out.par_chunks_mut(s0).enumerate().for_each(|(i0, row)| {
                if i0 == 0 || i0 == n0 - 1 {
                    row.fill(0.0);
                    return;
                }
                let start = i0 * s0;
                row[0] = 0.0;
                row[nl - 1] = 0.0;
                for j in 1..nl - 1 {
                    let i = start + j;
                    let ui = u[i];
                    row[j] = mass * ui
                        + a0[i] * (ui - u[i + s0])
                        + a0[i - s0] * (ui - u[i - s0])
                        + a1[i] * (ui - u[i + 1])
                        + a1[i - 1] * (ui - u[i - 1]);
                }
            });
        }
        _ => {
            let a0 = a.dir(0);
            out.fill(0.0);
            for i in 1..nl - 1 {
                out[i] = mass * u[i] + a0[i] * (u[i] - u[i + 1]) + a0[i - 1] * (u[i] - u[i - 1]);
            }
        }
    }
}

fn diagonal(a: &EdgeField, mass: f64) -> Vec<f64> {
    let bx = a.lattice_box();
    let n = bx.extent(bx.dim() - 1);
    let mut diag = vec![0.0; bx.len()];
    for (start, _, p) in row_pairs(bx, bx) {
        if bx.row_is_boundary(&p) {
            continue;
        }
        for i in start + 1..start + n - 1 {
            let mut v = mass;
            for k in 0..bx.dim() {
                v += a.dir(k)[i] + a.dir(k)[i - bx.stride(k)];
            }
            diag[i] = v;
        }
    }
    diag
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    let partial: Vec<f64> = x
        .par_chunks(CHUNK)
        .zip(y.par_chunks(CHUNK))
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Solves the Dirichlet problem by preconditioned conjugate gradients.
pub fn solve(problem: &DirichletProblem<'_>, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    problem.validate()?;
    let bx = *problem.a.lattice_box();
    let n = bx.len();
    let xb = problem.boundary_field();
    let b = problem.reduced_rhs(&xb);
    let bnorm = norm(&b);

    let assemble = |y: &[f64]| {
        let mut u = xb.clone();
        u.par_iter_mut()
            .zip(y.par_iter())
            .for_each(|(ui, yi)| *ui += yi);
        NodeField::from_values(bx, u).expect("sizes match")
    };

    if bnorm == 0.0 {
        return Ok(Solution {
            u: assemble(&vec![0.0; n]),
            diagnostics: SolveDiagnostics {
                monotone: true,
                ..Default::default()
            },
        });
    }

    let inv_diag: Vec<f64> = match cfg.preconditioner {
        Preconditioner::Jacobi => diagonal(problem.a, problem.mass_term)
            .into_iter()
            .map(|v| if v > 0.0 { 1.0 / v } else { 0.0 })
            .collect(),
        Preconditioner::None => interior_mask(&bx)
            .into_iter()
            .map(|m| if m { 1.0 } else { 0.0 })
            .collect(),
    };
    let cap = cfg.iteration_cap(bx.radius());
    let target = cfg.rel_tolerance * bnorm;
    let mass = problem.mass_term;

    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut diag = SolveDiagnostics {
        monotone: true,
        ..Default::default()
    };

    loop {
        precondition(&inv_diag, &r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        let mut rnorm = norm(&r);
        while rnorm > target {
            if diag.iterations >= cap {
                return Err(Error::NotConverged {
                    iterations: diag.iterations,
                    residual: rnorm / bnorm,
                    best: assemble(&x).into_values(),
                });
            }
            apply_interior(problem.a, mass, &p, &mut ap);
            let curvature = dot(&p, &ap);
            if !(curvature > 0.0) {
                return Err(Error::Indefinite {
                    iteration: diag.iterations,
                    curvature,
                });
            }
            let alpha = rz / curvature;
            let (rz_new, rr) = update_step(alpha, &p, &ap, &inv_diag, &mut x, &mut r, &mut z);
            let pres = rz_new.max(0.0).sqrt();
            if let Some(&prev) = diag.history.last() {
                if pres > prev {
                    diag.monotone = false;
                }
            }
            diag.history.push(pres);
            let beta = rz_new / rz;
            rz = rz_new;
            p.par_iter_mut()
                .zip(z.par_iter())
                .for_each(|(pi, zi)| *pi = zi + beta * *pi);
            rnorm = rr.sqrt();
            diag.iterations += 1;
        }
        // recursive residual converged; confirm with the true residual
        apply_interior(problem.a, mass, &x, &mut ap);
        r.par_iter_mut()
            .zip(b.par_iter())
            .zip(ap.par_iter())
            .for_each(|((ri, bi), ai)| *ri = bi - ai);
        let true_res = norm(&r);
        diag.final_residual = true_res / bnorm;
        if true_res <= target || diag.restarts >= MAX_RESTARTS {
            break;
        }
        diag.restarts += 1;
    }
    if diag.final_residual > cfg.rel_tolerance {
        return Err(Error::NotConverged {
            iterations: diag.iterations,
            residual: diag.final_residual,
            best: assemble(&x).into_values(),
        });
    }
    Ok(Solution {
        u: assemble(&x),
        diagnostics: diag,
    })
}

/// `x += αp`, `r -= α Ap`, `z = D⁻¹r`; returns `(r·z, r·r)` with the same
/// chunked summation order as [`dot`].
#[allow(clippy::too_many_arguments)]
fn update_step(
    alpha: f64,
    p: &[f64],
    ap: &[f64],
    inv_diag: &[f64],
    x: &mut [f64],
    r: &mut [f64],
    z: &mut [f64],
) -> (f64, f64) {
    let partial: Vec<(f64, f64)> = (
        x.par_chunks_mut(CHUNK),
        r.par_chunks_mut(CHUNK),
        z.par_chunks_mut(CHUNK),
        p.par_chunks(CHUNK),
        ap.par_chunks(CHUNK),
        inv_diag.par_chunks(CHUNK),
    )
        .into_par_iter()
        .map(|(x, r, z, p, ap, d)| {
            let (mut rz, mut rr) = (0.0, 0.0);
            for i in 0..x.len() {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
                z[i] = r[i] * d[i];
                rz += r[i] * z[i];
                rr += r[i] * r[i];
            }
            (rz, rr)
        })
        .collect();
    partial.iter().fold((0.0, 0.0), |(a, b), &(c, d)| (a + c, b + d))
}

fn precondition(inv_diag: &[f64], r: &[f64], z: &mut [f64]) {
    z.par_iter_mut()
        .zip(r.par_iter().zip(inv_diag.par_iter()))
        .for_each(|(zi, (ri, di))| *zi = ri * di);
}

/// Relative interior residual `‖(A u)_I - rhs_I‖ / ‖rhs_I‖` of a full field
/// `u` (boundary values included); absolute when `rhs_I` vanishes.
pub fn relative_residual(
    a: &EdgeField,
    mass_term: f64,
    u: &NodeField,
    rhs: &NodeField,
) -> Result<f64> {
    let bx = a.lattice_box();
    bx.check_same(u.lattice_box(), "residual field")?;
    bx.check_same(rhs.lattice_box(), "residual rhs")?;
    let mut au = vec![0.0; bx.len()];
    apply_interior(a, mass_term, u.values(), &mut au);
    let mask = interior_mask(bx);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..bx.len() {
        if mask[i] {
            let r = au[i] - rhs.values()[i];
            num += r * r;
            den += rhs.values()[i] * rhs.values()[i];
        }
    }
    Ok(if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    })
}

/// Direct solve of the explicitly assembled interior system. Test oracle only.
pub fn dense_oracle_solve(problem: &DirichletProblem<'_>) -> Result<NodeField> {
    problem.validate()?;
    let bx = *problem.a.lattice_box();
    let unknowns: Vec<usize> = bx.interior_indices();
    if unknowns.len() > DENSE_LIMIT {
        return Err(Error::SizeGuard(format!(
            "{} unknowns exceed the dense limit of {}",
            unknowns.len(),
            DENSE_LIMIT
        )));
    }
    let mut slot = vec![usize::MAX; bx.len()];
    for (j, &i) in unknowns.iter().enumerate() {
        slot[i] = j;
    }
    let xb = problem.boundary_field();
    let m = unknowns.len();
    let mut mat = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (row, &i) in unknowns.iter().enumerate() {
        let p = bx.point(i);
        let mut diag = problem.mass_term;
        let mut b = problem.rhs.values()[i];
        for k in 0..bx.dim() {
            let s = bx.stride(k);
            let up = problem.a.dir(k)[i];
            let dn = problem.a.dir(k)[i - s];
            diag += up + dn;
            for (nb, c) in [(i + s, up), (i - s, dn)] {
                if slot[nb] != usize::MAX {
                    mat[(row, slot[nb])] -= c;
                } else {
                    b += c * xb[nb];
                }
            }
            let _ = p;
        }
        mat[(row, row)] += diag;
        rhs[row] = b;
    }
    let sol = match mat.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => mat
            .lu()
            .solve(&rhs)
            .ok_or(Error::NotPositiveDefinite(f64::NAN))?,
    };
    let mut u = xb;
    for (j, &i) in unknowns.iter().enumerate() {
        u[i] = sol[j];
    }
    NodeField::from_values(bx, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{apply_operator, LatticeBox};
    use rand::{Rng, SeedableRng};

    fn random_problem(
        bx: LatticeBox,
        r: &mut impl Rng,
    ) -> (EdgeField, NodeField, NodeField) {
        let a = EdgeField::from_fn(bx, |_, _| r.gen_range(1.0..4.0));
        let rhs = NodeField::from_fn(bx, |_| r.gen_range(-1.0..1.0));
        let bnd = NodeField::from_fn(bx, |_| r.gen_range(-1.0..1.0));
        (a, rhs, bnd)
    }

    fn rel_diff(x: &NodeField, y: &NodeField) -> f64 {
        let num: f64 = x.values().iter().zip(y.values()).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = y.values().iter().map(|b| b * b).sum();
        (num / den).sqrt()
    }

    #[test]
    fn linear_boundary_data_is_reproduced() {
        let bx = LatticeBox::cube(3, 4).unwrap();
        let a = EdgeField::constant(bx, 1.0);
        let lin = NodeField::from_fn(bx, |p| p[0] as f64);
        let pb = DirichletProblem::new(&a, 0.0, NodeField::zeros(bx)).boundary_values(lin.clone());
        let sol = solve(&pb, &SolverConfig::default()).unwrap();
        for (u, v) in sol.u.values().iter().zip(lin.values()) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn massive_point_source_matches_dense() {
        let bx = LatticeBox::cube(2, 12).unwrap();
        let a = EdgeField::constant(bx, 1.0);
        let mut rhs = NodeField::zeros(bx);
        rhs.set(&[0, 0, 0], 1.0);
        let pb = DirichletProblem::new(&a, 1.0 / 4.0, rhs);
        let it = solve(&pb, &SolverConfig::default()).unwrap();
        let dense = dense_oracle_solve(&pb).unwrap();
        assert!((it.u.at(&[0, 0, 0]) - dense.at(&[0, 0, 0])).abs() < 1e-9);
    }

    #[test]
    fn random_instances_match_dense() {
        let mut r = rand::rngs::StdRng::seed_from_u64(3);
        for bx in [LatticeBox::cube(3, 3).unwrap(), LatticeBox::cube(2, 6).unwrap()] {
            let (a, rhs, bnd) = random_problem(bx, &mut r);
            let pb = DirichletProblem::new(&a, 0.0, rhs).boundary_values(bnd);
            let it = solve(&pb, &SolverConfig::default()).unwrap();
            let dense = dense_oracle_solve(&pb).unwrap();
            assert!(rel_diff(&it.u, &dense) < 1e-8);
            assert!(it.diagnostics.final_residual <= 1e-9);
        }
    }

    #[test]
    fn dense_zero_problem_and_tridiagonal() {
        let bx = LatticeBox::cube(2, 3).unwrap();
        let a = EdgeField::constant(bx, 1.0);
        let z = dense_oracle_solve(&DirichletProblem::new(&a, 0.0, NodeField::zeros(bx))).unwrap();
        assert_eq!(z.max_abs(), 0.0);

        // one interior row: -u'' = 1 on 5 unknowns with zero ends
        let bx = LatticeBox::with_half_widths(&[1, 3]).unwrap();
        let a = EdgeField::constant(bx, 1.0);
        let rhs = NodeField::constant(bx, 1.0);
        let u = dense_oracle_solve(&DirichletProblem::new(&a, 0.0, rhs.clone())).unwrap();
        // interior row n_0 = 0: tridiagonal 2 on the diagonal after the zero
        // neighbors in axis 0 contribute 2 more, so (4 - shift) system:
        // 4u_j - u_{j-1} - u_{j+1} = 1, u_{±3} = 0, solved by hand below.
        let expected = {
            // Thomas algorithm on j = -2..2
            let n = 5;
            let (mut c, mut d) = (vec![0.0; n], vec![0.0; n]);
            c[0] = -1.0 / 4.0;
            d[0] = 1.0 / 4.0;
            for j in 1..n {
                let m = 4.0 + c[j - 1];
                c[j] = -1.0 / m;
                d[j] = (1.0 + d[j - 1]) / m;
            }
            let mut x = vec![0.0; n];
            x[n - 1] = d[n - 1];
            for j in (0..n - 1).rev() {
                x[j] = d[j] - c[j] * x[j + 1];
            }
            x
        };
        for (j, e) in expected.iter().enumerate() {
            assert!((u.at(&[0, j as i64 - 2, 0]) - e).abs() < 1e-12);
        }
        let it = solve(&DirichletProblem::new(&a, 0.0, rhs), &SolverConfig::default()).unwrap();
        assert!(rel_diff(&it.u, &u) < 1e-9);
    }

    #[test]
    fn dense_guard() {
        let bx = LatticeBox::cube(3, 15).unwrap();
        let a = EdgeField::constant(bx, 1.0);
        assert!(matches!(
            dense_oracle_solve(&DirichletProblem::new(&a, 0.0, NodeField::zeros(bx))),
            Err(Error::SizeGuard(_))
        ));
    }

    #[test]
    fn operator_is_symmetric() {
        let mut r = rand::rngs::StdRng::seed_from_u64(5);
        let bx = LatticeBox::cube(3, 4).unwrap();
        let a = EdgeField::from_fn(bx, |_, _| r.gen_range(1.0..4.0));
        let mask = interior_mask(&bx);
        let mut rand_interior = || {
            (0..bx.len())
                .map(|i| if mask[i] { r.gen_range(-1.0..1.0) } else { 0.0 })
                .collect::<Vec<f64>>()
        };
        let (u, v) = (rand_interior(), rand_interior());
        let (mut au, mut av) = (vec![0.0; bx.len()], vec![0.0; bx.len()]);
        apply_interior(&a, 0.1, &u, &mut au);
        apply_interior(&a, 0.1, &v, &mut av);
        let (x, y) = (dot(&au, &v), dot(&u, &av));
        assert!((x - y).abs() <= 1e-12 * x.abs());
    }

    #[test]
    fn maximum_principle_and_scaling() {
        let mut r = rand::rngs::StdRng::seed_from_u64(11);
        let bx = LatticeBox::cube(2, 8).unwrap();
        let (a, _, bnd) = random_problem(bx, &mut r);
        let pb = DirichletProblem::new(&a, 0.0, NodeField::zeros(bx)).boundary_values(bnd.clone());
        let u = solve(&pb, &SolverConfig::default()).unwrap().u;
        let bidx = bx.boundary_indices();
        let lo = bidx.iter().map(|&i| bnd.values()[i]).fold(f64::INFINITY, f64::min);
        let hi = bidx.iter().map(|&i| bnd.values()[i]).fold(f64::NEG_INFINITY, f64::max);
        for i in bx.interior_indices() {
            assert!(u.values()[i] >= lo - 1e-9 && u.values()[i] <= hi + 1e-9);
        }

        let rhs = NodeField::from_fn(bx, |_| r.gen_range(-1.0..1.0));
        let cfg = SolverConfig {
            rel_tolerance: 1e-13,
            ..Default::default()
        };
        let u1 = solve(&DirichletProblem::new(&a, 0.0, rhs.clone()), &cfg).unwrap().u;
        let c = 2.75;
        let mut ca = a.clone();
        for k in 0..2 {
            ca.dir_mut(k).iter_mut().for_each(|v| *v *= c);
        }
        let mut crhs = rhs;
        crhs.scale(c);
        let u2 = solve(&DirichletProblem::new(&ca, 0.0, crhs), &cfg).unwrap().u;
        assert!(rel_diff(&u2, &u1) < 1e-12);
    }

    #[test]
    fn non_convergence_reports_best_iterate() {
        let mut r = rand::rngs::StdRng::seed_from_u64(1);
        let bx = LatticeBox::cube(2, 10).unwrap();
        let (a, rhs, _) = random_problem(bx, &mut r);
        let cfg = SolverConfig {
            max_iterations: Some(2),
            ..Default::default()
        };
        match solve(&DirichletProblem::new(&a, 0.0, rhs), &cfg) {
            Err(Error::NotConverged { iterations, best, residual }) => {
                assert_eq!(iterations, 2);
                assert_eq!(best.len(), bx.len());
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn residual_matches_operator_application() {
        let mut r = rand::rngs::StdRng::seed_from_u64(2);
        let bx = LatticeBox::cube(3, 3).unwrap();
        let (a, rhs, bnd) = random_problem(bx, &mut r);
        let pb = DirichletProblem::new(&a, 0.5, rhs.clone()).boundary_values(bnd);
        let sol = solve(&pb, &SolverConfig::default()).unwrap();
        let res = relative_residual(&a, 0.5, &sol.u, &rhs).unwrap();
        assert!(res < 1e-8);
        let applied = apply_operator(&a, &sol.u, 0.5).unwrap();
        for i in bx.interior_indices() {
            assert!((applied.values()[i] - rhs.values()[i]).abs() < 1e-7);
        }
    }
}
