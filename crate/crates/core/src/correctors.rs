//! Massive first-order correctors, fluxes, the homogenized coefficient, flux
//! correctors and second-order correctors on nested boxes.
//!
//! With `L` the target half-width: `φ1` lives on `Q_{2L}`, `σ` on
//! `Q_{⌈7L/4⌉}` and `φ2` on `Q_{⌈3L/2⌉}`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{
    discrete_divergence, discrete_gradient, restrict_edge_field, restrict_field, row_pairs, EdgeField,
    LatticeBox, NodeField,
};
use crate::solver::{relative_residual, solve, DirichletProblem, SolveDiagnostics, SolverConfig};

pub const DEFAULT_EPSILON: f64 = 0.1;

/// `M = L^{2(1-ε)}` for `ε ∈ (0, 1/2)`.
pub fn set_mass(half_width: i64, epsilon: f64) -> Result<f64> {
    if half_width < 2 {
        return Err(Error::InvalidArgument(format!("L must be at least 2, got {half_width}")));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidArgument(format!("ε must lie in (0, 1/2), got {epsilon}")));
    }
    Ok((half_width as f64).powf(2.0 * (1.0 - epsilon)))
}

pub fn sigma_half_width(half_width: i64) -> i64 {
    (7 * half_width + 3) / 4
}

pub fn phi2_half_width(half_width: i64) -> i64 {
    (3 * half_width + 1) / 2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightKind {
    /// `Π_k exp(-1/(1 - (n_k/L)²))`
    Bump,
    /// `Π_k (1 - |n_k|/L)`
    Triangular,
}

/// Normalized averaging weight on `Q_L`, zero on the boundary.
pub fn weight_function(dim: usize, half_width: i64, kind: WeightKind) -> Result<NodeField> {
    let bx = LatticeBox::cube(dim, half_width)?;
    let l = half_width as f64;
    let mut w = NodeField::from_fn(bx, |p| {
        if bx.is_boundary_point(p) {
            return 0.0;
        }
        (0..dim)
            .map(|k| {
                let t = p[k] as f64 / l;
                match kind {
                    WeightKind::Bump => (-1.0 / (1.0 - t * t)).exp(),
                    WeightKind::Triangular => 1.0 - t.abs(),
                }
            })
            .product()
    });
    let total: f64 = w.values().iter().sum();
    w.scale(1.0 / total);
    // fold the rounding defect into the centre node
    let center = bx.index_unchecked(&[0, 0, 0]);
    for _ in 0..2 {
        let defect = 1.0 - w.values().iter().sum::<f64>();
        w.values_mut()[center] += defect;
    }
    Ok(w)
}


/// `∇·(a e_i)`.
pub fn first_order_rhs(a: &EdgeField, i: usize) -> NodeField {
    let mut h = EdgeField::zeros(*a.lattice_box());
    h.dir_mut(i).copy_from_slice(a.dir(i));
    discrete_divergence(&h)
}

/// Solves `(1/M)φ - ∇·a∇φ = ∇·(a e_i)` with zero boundary on the box of `a`.
pub fn first_order_corrector(
    a: &EdgeField,
    mass: f64,
    i: usize,
    cfg: &SolverConfig,
) -> Result<(NodeField, SolveDiagnostics)> {
    check_axis(a.lattice_box(), i)?;
    let pb = DirichletProblem::new(a, 1.0 / mass, first_order_rhs(a, i));
    let sol = solve(&pb, cfg)?;
    Ok((sol.u, sol.diagnostics))
}

fn check_axis(bx: &LatticeBox, i: usize) -> Result<()> {
    if i >= bx.dim() {
        return Err(Error::InvalidArgument(format!(
            "index {i} out of range for dimension {}",
            bx.dim()
        )));
    }
    Ok(())
}

/// `q_i = a(e_i + ∇φ_i)`; direction `k` of the result holds `q_ik`.
pub fn flux_field(a: &EdgeField, phi: &NodeField, i: usize) -> Result<EdgeField> {
    a.lattice_box().check_same(phi.lattice_box(), "flux field")?;
    check_axis(a.lattice_box(), i)?;
    let mut q = discrete_gradient(phi);
    let bx = *a.lattice_box();
    // entries without an edge are zero in both `a` and the gradient
    for k in 0..bx.dim() {
        let unit = if k == i { 1.0 } else { 0.0 };
        for (v, &ak) in q.dir_mut(k).iter_mut().zip(a.dir(k)) {
            *v = ak * (unit + *v);
        }
    }
    Ok(q)
}

/// Average of the (up to two) direction-`k` edges incident to each node.
pub fn node_average(h: &EdgeField, k: usize) -> NodeField {
    let bx = *h.lattice_box();
    let s = bx.stride(k);
    let hk = bx.half_width(k);
    let dir = h.dir(k);
    let last = bx.dim() - 1;
    let n = bx.extent(last);
    let mut values = vec![0.0; bx.len()];
    for (start, _, p) in row_pairs(&bx, &bx) {
        let v = &mut values[start..start + n];
        let d = &dir[start..start + n];
        if k == last {
            v[0] = d[0];
            for j in 1..n - 1 {
                v[j] = 0.5 * (d[j - 1] + d[j]);
            }
            v[n - 1] = d[n - 2];
        } else if p[k] == -hk {
            v.copy_from_slice(d);
        } else if p[k] == hk {
            v.copy_from_slice(&dir[start - s..start - s + n]);
        } else {
            let prev = &dir[start - s..start - s + n];
            for j in 0..n {
                v[j] = 0.5 * (prev[j] + d[j]);
            }
        }
    }
    NodeField::from_values(bx, values).expect("sizes match")
}

#[derive(Clone, Debug)]
pub struct HomogenizedModel {
    raw: DMatrix<f64>,
    symmetric: DMatrix<f64>,
    inverse: DMatrix<f64>,
    determinant: f64,
}

impl HomogenizedModel {
    /// Builds the model from a raw estimate; only the symmetric part is used
    /// downstream.
    pub fn from_raw(raw: DMatrix<f64>) -> Result<Self> {
        if !raw.is_square() || !(2..=3).contains(&raw.nrows()) {
            return Err(Error::InvalidArgument("homogenized matrix must be 2×2 or 3×3".into()));
        }
        let symmetric = (&raw + raw.transpose()) * 0.5;
        let chol = symmetric.clone().cholesky().ok_or_else(|| {
            Error::NotPositiveDefinite(symmetric.clone().symmetric_eigenvalues().min())
        })?;
        let inverse = chol.inverse();
        let determinant = chol.determinant();
        Ok(HomogenizedModel {
            raw,
            symmetric,
            inverse,
            determinant,
        })
    }

    pub fn isotropic(dim: usize, value: f64) -> Result<Self> {
        Self::from_raw(DMatrix::identity(dim, dim) * value)
    }

    pub fn dim(&self) -> usize {
        self.raw.nrows()
    }

    pub fn raw(&self) -> &DMatrix<f64> {
        &self.raw
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.symmetric
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn determinant(&self) -> f64 {
        self.determinant
    }

    /// Frobenius norm of `raw - rawᵀ`.
    pub fn asymmetry(&self) -> f64 {
        (&self.raw - self.raw.transpose()).norm()
    }

    /// Ascending eigenvalues of the symmetric part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.symmetric.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// `(a_hom)_{ki} = Σ_n ω(n) q̄_ik(n)` with `q̄` the node-averaged flux.
pub fn homogenized_coefficient(fluxes: &[EdgeField], weight: &NodeField) -> Result<HomogenizedModel> {
    let d = weight.lattice_box().dim();
    if fluxes.len() != d {
        return Err(Error::InvalidArgument(format!("expected {d} fluxes, got {}", fluxes.len())));
    }
    let wbx = weight.lattice_box();
    let mut raw = DMatrix::zeros(d, d);
    for (i, q) in fluxes.iter().enumerate() {
        if !q.lattice_box().contains_box(wbx) {
            return Err(Error::BoxMismatch("flux does not cover the weight support".into()));
        }
        for k in 0..d {
            raw[(k, i)] = weighted_node_average(q, k, weight)?;
        }
    }
    HomogenizedModel::from_raw(raw)
}

/// `Σ_n w(n) mean_k(q)(n)` over the box of `w`.
fn weighted_node_average(q: &EdgeField, k: usize, weight: &NodeField) -> Result<f64> {
    let src = q.lattice_box();
    let wbx = weight.lattice_box();
    if !(0..wbx.dim()).all(|m| src.half_width(m) > wbx.half_width(m)) {
        let qbar = restrict_field(&node_average(q, k), wbx)?;
        return Ok(qbar.values().iter().zip(weight.values()).map(|(q, w)| q * w).sum());
    }
    // both edges of every node exist, so the average is the two-sided one
    let (dir, s) = (q.dir(k), src.stride(k));
    let n = wbx.extent(wbx.dim() - 1);
    let w = weight.values();
    let mut acc = -0.0;
    for (start, from, _) in row_pairs(src, wbx) {
        for j in 0..n {
            acc += 0.5 * (dir[from + j - s] + dir[from + j]) * w[start + j];
        }
    }
    Ok(acc)
}

/// Flux correctors `σ_ijk`, stored for `j < k` only.
#[derive(Clone, Debug)]
pub struct FluxCorrector {
    bx: LatticeBox,
    /// Indexed by `i * pairs + pair(j, k)`.
    fields: Vec<NodeField>,
}

fn pair_index(d: usize, j: usize, k: usize) -> usize {
    // position of (j, k), j < k, in lexicographic order
    (0..j).map(|r| d - 1 - r).sum::<usize>() + (k - j - 1)
}

impl FluxCorrector {
    pub fn zeros(bx: LatticeBox) -> Self {
        let d = bx.dim();
        let pairs = d * (d - 1) / 2;
        FluxCorrector {
            bx,
            fields: vec![NodeField::zeros(bx); d * pairs],
        }
    }

    pub fn lattice_box(&self) -> &LatticeBox {
        &self.bx
    }

    fn slot(&self, i: usize, j: usize, k: usize) -> usize {
        let d = self.bx.dim();
        i * (d * (d - 1) / 2) + pair_index(d, j, k)
    }

    /// The stored field for `j < k`.
    pub fn stored(&self, i: usize, j: usize, k: usize) -> &NodeField {
        assert!(j < k, "only j < k is stored");
        &self.fields[self.slot(i, j, k)]
    }

    /// `σ_ijk` as a full field; skew-symmetric in `(j, k)` by construction.
    pub fn component(&self, i: usize, j: usize, k: usize) -> NodeField {
        match j.cmp(&k) {
            std::cmp::Ordering::Less => self.stored(i, j, k).clone(),
            std::cmp::Ordering::Equal => NodeField::zeros(self.bx),
            std::cmp::Ordering::Greater => {
                let mut f = self.stored(i, k, j).clone();
                f.scale(-1.0);
                f
            }
        }
    }

    /// `σ_ijk` at the node with index `idx`.
    pub fn value(&self, i: usize, j: usize, k: usize, idx: usize) -> f64 {
        match j.cmp(&k) {
            std::cmp::Ordering::Less => self.stored(i, j, k).values()[idx],
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => -self.stored(i, k, j).values()[idx],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.fields.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }
}

/// Moves a node field onto direction-`j` edges by endpoint averaging.
fn edge_mean(u: &NodeField, j: usize, out: &mut EdgeField) {
    let bx = *u.lattice_box();
    let s = bx.stride(j);
    let hj = bx.half_width(j);
    let vals = u.values();
    let last = bx.dim() - 1;
    let n = bx.extent(last);
    let dst = out.dir_mut(j);
    for (start, _, p) in row_pairs(&bx, &bx) {
        let len = match j == last {
            true => n - 1,
            false if p[j] < hj => n,
            false => 0,
        };
        for i in start..start + len {
            dst[i] = 0.5 * (vals[i] + vals[i + s]);
        }
    }
}

/// Right-hand side `∇·(q_ik e_j - q_ij e_k)` on `target`. The fluxes are
/// node-averaged on their own box, restricted, and averaged back onto the
/// edges of the other direction.
pub fn flux_corrector_rhs(
    flux: &EdgeField,
    target: &LatticeBox,
    j: usize,
    k: usize,
) -> Result<NodeField> {
    let qk = restrict_field(&node_average(flux, k), target)?;
    let qj = restrict_field(&node_average(flux, j), target)?;
    Ok(rhs_from_averages(&qk, &qj, j, k))
}

fn rhs_from_averages(qk: &NodeField, qj: &NodeField, j: usize, k: usize) -> NodeField {
    let mut f = EdgeField::zeros(*qk.lattice_box());
    edge_mean(qk, j, &mut f);
    edge_mean(qj, k, &mut f);
    for v in f.dir_mut(k) {
        *v = -*v;
    }
    discrete_divergence(&f)
}

/// Solves `(1/M)σ_ijk - Δσ_ijk = ∇·(q_ik e_j - q_ij e_k)` on `target` for all
/// `i` and `j < k`.
pub fn flux_corrector(
    fluxes: &[EdgeField],
    mass: f64,
    target: LatticeBox,
    cfg: &SolverConfig,
) -> Result<(FluxCorrector, Vec<SolveDiagnostics>)> {
    let d = target.dim();
    let unit = EdgeField::constant(target, 1.0);
    let mut out = FluxCorrector::zeros(target);
    let mut diags = Vec::new();
    for (i, q) in fluxes.iter().enumerate() {
        if !q.lattice_box().contains_box(&target) {
            return Err(Error::BoxMismatch("flux does not cover the σ box".into()));
        }
        let averaged = (0..d)
            .map(|k| restrict_field(&node_average(q, k), &target))
            .collect::<Result<Vec<_>>>()?;
        for j in 0..d {
            for k in j + 1..d {
                let rhs = rhs_from_averages(&averaged[k], &averaged[j], j, k);
                let sol = solve(&DirichletProblem::new(&unit, 1.0 / mass, rhs), cfg)?;
                let slot = out.slot(i, j, k);
                out.fields[slot] = sol.u;
                diags.push(sol.diagnostics);
            }
        }
    }
    Ok((out, diags))
}

/// Right-hand side `∇·F` with `F_k = mean(φ1_i) a δ_kj - mean(σ_ikj)` on the
/// box of `a`.
pub fn second_order_rhs(
    a: &EdgeField,
    phi1_i: &NodeField,
    sigma: &FluxCorrector,
    i: usize,
    j: usize,
) -> Result<NodeField> {
    let bx = *a.lattice_box();
    let phi = restrict_field(phi1_i, &bx)?;
    let mut f = EdgeField::zeros(bx);
    let mut tmp = EdgeField::zeros(bx);
    edge_mean(&phi, j, &mut tmp);
    for (v, (p, c)) in f.dir_mut(j).iter_mut().zip(tmp.dir(j).iter().zip(a.dir(j))) {
        *v = p * c;
    }
    for k in 0..bx.dim() {
        if k == j {
            continue;
        }
        let s = restrict_field(&sigma.component(i, k, j), &bx)?;
        edge_mean(&s, k, &mut tmp);
        for (v, t) in f.dir_mut(k).iter_mut().zip(tmp.dir(k)) {
            *v -= t;
        }
    }
    Ok(discrete_divergence(&f))
}

/// Solves `(1/M)φ2_ij - ∇·a∇φ2_ij = ∇·((φ1_i a - σ_i) e_j)` with zero boundary
/// on the box of `a`.
pub fn second_order_corrector(
    a: &EdgeField,
    phi1_i: &NodeField,
    sigma: &FluxCorrector,
    mass: f64,
    i: usize,
    j: usize,
    cfg: &SolverConfig,
) -> Result<(NodeField, SolveDiagnostics)> {
    if a.lattice_box().dim() != 3 {
        return Err(Error::InvalidArgument(
            "second-order correctors are only used in dimension 3".into(),
        ));
    }
    check_axis(a.lattice_box(), i)?;
    check_axis(a.lattice_box(), j)?;
    let rhs = second_order_rhs(a, phi1_i, sigma, i, j)?;
    let sol = solve(&DirichletProblem::new(a, 1.0 / mass, rhs), cfg)?;
    Ok((sol.u, sol.diagnostics))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectorOptions {
    pub epsilon: f64,
    pub weight: WeightKind,
    pub second_order: bool,
    pub solver: SolverConfig,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        CorrectorOptions {
            epsilon: DEFAULT_EPSILON,
            weight: WeightKind::Bump,
            second_order: false,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CorrectorSet {
    pub half_width: i64,
    pub mass: f64,
    /// On `Q_{2L}`.
    pub phi1: Vec<NodeField>,
    /// On `Q_{2L}`; `flux[i].dir(k)` holds `q_ik`.
    pub flux: Vec<EdgeField>,
    pub homogenized: HomogenizedModel,
    pub sigma: Option<FluxCorrector>,
    /// On `Q_{⌈3L/2⌉}`, indexed `[i][j]`.
    pub phi2: Option<Vec<Vec<NodeField>>>,
    pub diagnostics: Vec<SolveDiagnostics>,
}

impl CorrectorSet {
    pub fn total_iterations(&self) -> usize {
        self.diagnostics.iter().map(|d| d.iterations).sum()
    }
}

/// Runs the corrector stage for target half-width `L`; `a` must cover `Q_{2L}`.
pub fn compute_correctors(a: &EdgeField, half_width: i64, opts: &CorrectorOptions) -> Result<CorrectorSet> {
    let d = a.lattice_box().dim();
    let mass = set_mass(half_width, opts.epsilon)?;
    let outer = LatticeBox::cube(d, 2 * half_width)?;
    let a2 = restrict_edge_field(a, &outer)?;
    let mut diagnostics = Vec::new();
    let mut phi1 = Vec::with_capacity(d);
    let mut flux = Vec::with_capacity(d);
    for i in 0..d {
        let (phi, diag) = first_order_corrector(&a2, mass, i, &opts.solver)?;
        flux.push(flux_field(&a2, &phi, i)?);
        phi1.push(phi);
        diagnostics.push(diag);
    }
    let weight = weight_function(d, half_width, opts.weight)?;
    let homogenized = homogenized_coefficient(&flux, &weight)?;
    let (sigma, phi2) = if opts.second_order {
        if d != 3 {
            return Err(Error::InvalidArgument(
                "second-order correctors are only used in dimension 3".into(),
            ));
        }
        let sbox = LatticeBox::cube(d, sigma_half_width(half_width))?;
        let (sigma, sdiag) = flux_corrector(&flux, mass, sbox, &opts.solver)?;
        diagnostics.extend(sdiag);
        let pbox = LatticeBox::cube(d, phi2_half_width(half_width))?;
        let ap = restrict_edge_field(&a2, &pbox)?;
        let mut phi2 = Vec::with_capacity(d);
        for i in 0..d {
            let mut row = Vec::with_capacity(d);
            for j in 0..d {
                let (f, diag) = second_order_corrector(&ap, &phi1[i], &sigma, mass, i, j, &opts.solver)?;
                row.push(f);
                diagnostics.push(diag);
            }
            phi2.push(row);
        }
        (Some(sigma), Some(phi2))
    } else {
        (None, None)
    };
    Ok(CorrectorSet {
        half_width,
        mass,
        phi1,
        flux,
        homogenized,
        sigma,
        phi2,
        diagnostics,
    })
}

/// Maximum relative residual of every stored corrector re-applied through the
/// operator.
pub fn corrector_residuals(a: &EdgeField, set: &CorrectorSet) -> Result<f64> {
    let d = a.lattice_box().dim();
    let outer = LatticeBox::cube(d, 2 * set.half_width)?;
    let a2 = restrict_edge_field(a, &outer)?;
    let m = 1.0 / set.mass;
    let mut worst: f64 = 0.0;
    for i in 0..d {
        worst = worst.max(relative_residual(&a2, m, &set.phi1[i], &first_order_rhs(&a2, i))?);
    }
    if let Some(sigma) = &set.sigma {
        let unit = EdgeField::constant(*sigma.lattice_box(), 1.0);
        for i in 0..d {
            for j in 0..d {
                for k in j + 1..d {
                    let rhs = flux_corrector_rhs(&set.flux[i], sigma.lattice_box(), j, k)?;
                    worst = worst.max(relative_residual(&unit, m, sigma.stored(i, j, k), &rhs)?);
                }
            }
        }
        if let Some(phi2) = &set.phi2 {
            let pbox = *phi2[0][0].lattice_box();
            let ap = restrict_edge_field(&a2, &pbox)?;
            for i in 0..d {
                for j in 0..d {
                    let rhs = second_order_rhs(&ap, &set.phi1[i], sigma, i, j)?;
                    worst = worst.max(relative_residual(&ap, m, &phi2[i][j], &rhs)?);
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_values() {
        assert_eq!(set_mass(16, 0.5 - 1e-12).unwrap().round(), 16.0);
        assert!((set_mass(64, 0.1).unwrap() - 64f64.powf(1.8)).abs() < 1e-9);
        assert!((set_mass(64, 0.1).unwrap() - 1782.9).abs() < 0.1);
        assert!((set_mass(10, 1e-9).unwrap() - 100.0).abs() < 1e-5);
        assert!(set_mass(16, 0.5).is_err());
        assert!(set_mass(16, 0.0).is_err());
        assert!(set_mass(1, 0.1).is_err());
    }

    #[test]
    fn nested_box_sizes() {
        assert_eq!(sigma_half_width(16), 28);
        assert_eq!(sigma_half_width(5), 9);
        assert_eq!(phi2_half_width(16), 24);
        assert_eq!(phi2_half_width(5), 8);
        for l in 2..40 {
            assert!(phi2_half_width(l) <= sigma_half_width(l));
            assert!(sigma_half_width(l) <= 2 * l);
            assert!(phi2_half_width(l) >= l);
        }
    }

    #[test]
    fn weights_are_normalized() {
        for kind in [WeightKind::Bump, WeightKind::Triangular] {
            let w = weight_function(3, 6, kind).unwrap();
            let total: f64 = w.values().iter().sum();
            assert!((total - 1.0).abs() < 1e-15);
            let bx = *w.lattice_box();
            for i in bx.boundary_indices() {
                assert_eq!(w.values()[i], 0.0);
            }
            assert!(w.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn pair_layout() {
        assert_eq!(pair_index(3, 0, 1), 0);
        assert_eq!(pair_index(3, 0, 2), 1);
        assert_eq!(pair_index(3, 1, 2), 2);
        assert_eq!(pair_index(2, 0, 1), 0);
    }

    #[test]
    fn constant_coefficient_collapse() {
        let a = EdgeField::constant(LatticeBox::cube(3, 8).unwrap(), 2.5);
        let opts = CorrectorOptions {
            second_order: true,
            ..Default::default()
        };
        let set = compute_correctors(&a, 4, &opts).unwrap();
        let h = set.homogenized.matrix();
        for r in 0..3 {
            for c in 0..3 {
                let e = if r == c { 2.5 } else { 0.0 };
                assert!((h[(r, c)] - e).abs() < 1e-10);
            }
        }
        assert!(set.phi1.iter().all(|f| f.max_abs() < 1e-9));
        assert!(set.sigma.as_ref().unwrap().max_abs() < 1e-9);
        assert!(set.phi2.as_ref().unwrap().iter().flatten().all(|f| f.max_abs() < 1e-9));
    }

    #[test]
    fn sigma_is_skew() {
        let bx = LatticeBox::cube(3, 3).unwrap();
        let mut s = FluxCorrector::zeros(bx);
        let slot = s.slot(1, 0, 2);
        s.fields[slot] = NodeField::from_fn(bx, |p| p[0] as f64 + 0.5 * p[1] as f64);
        for idx in 0..bx.len() {
            for j in 0..3 {
                assert_eq!(s.value(1, j, j, idx), 0.0);
                for k in 0..3 {
                    assert_eq!(s.value(1, j, k, idx), -s.value(1, k, j, idx));
                }
            }
        }
        let c = s.component(1, 2, 0);
        assert_eq!(c.values()[5], -s.stored(1, 0, 2).values()[5]);
    }

    #[test]
    fn second_order_rejected_in_two_dimensions() {
        let a = EdgeField::constant(LatticeBox::cube(2, 8).unwrap(), 1.0);
        let opts = CorrectorOptions {
            second_order: true,
            ..Default::default()
        };
        assert!(compute_correctors(&a, 4, &opts).is_err());
    }
}
