//! Discrete calculus on closed boxes `{n ∈ Z^d : |n_k| ≤ L_k}`.
//!
//! Node data is stored in row-major order (axis 0 slowest). Edge data is
//! stored per direction `k` on a node-sized array: the entry at node `n`
//! holds the value on the directed edge `(n, n + e_k)`. Entries at nodes with
//! `n_k = L_k` have no edge and are kept at zero.
//!
//! Sign conventions: `gradient(u)(n, n+e_k) = u(n+e_k) - u(n)` and
//! `divergence(h)(n) = Σ_k h(n, n+e_k) - h(n-e_k, n)`, so that
//! `Σ_edges ∇u·h = -Σ_nodes u ∇·h` whenever `h` vanishes on edges touching the
//! boundary.

use crate::error::{Error, Result};

/// Lattice point; components beyond the box dimension are zero.
pub type Point = [i64; 3];

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeBox {
    dim: usize,
    half: [i64; 3],
    extent: [usize; 3],
    strides: [usize; 3],
    len: usize,
}

impl LatticeBox {
    /// The cube `Q_L = {|n|_∞ ≤ L}` in dimension `dim`.
    pub fn cube(dim: usize, half_width: i64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        Self::with_half_widths(&vec![half_width; dim])
    }

    /// A box with its own half-width per axis (dimension 1 to 3).
    pub fn with_half_widths(half_widths: &[i64]) -> Result<Self> {
        let dim = half_widths.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "dimension must be between 1 and 3, got {dim}"
            )));
        }
        if let Some(&h) = half_widths.iter().find(|&&h| h < 1) {
            return Err(Error::InvalidArgument(format!(
                "half-widths must be positive, got {h}"
            )));
        }
        let mut half = [0i64; 3];
        let mut extent = [1usize; 3];
        for (k, &h) in half_widths.iter().enumerate() {
            half[k] = h;
            extent[k] = (2 * h + 1) as usize;
        }
        let mut strides = [0usize; 3];
        let mut s = 1usize;
        for k in (0..dim).rev() {
            strides[k] = s;
            s *= extent[k];
        }
        Ok(LatticeBox {
            dim,
            half,
            extent,
            strides,
            len: s,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self, axis: usize) -> i64 {
        self.half[axis]
    }

    pub fn half_widths(&self) -> &[i64] {
        &self.half[..self.dim]
    }

    /// Largest half-width; the `L` of a cube.
    pub fn radius(&self) -> i64 {
        self.half_widths().iter().copied().max().unwrap_or(0)
    }

    pub fn extent(&self, axis: usize) -> usize {
        self.extent[axis]
    }

    pub fn extents(&self) -> &[usize] {
        &self.extent[..self.dim]
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of directed edges `(n, n+e_k)` inside the box.
    pub fn num_edges(&self) -> usize {
        (0..self.dim)
            .map(|k| {
                (0..self.dim)
                    .map(|j| if j == k { self.extent[j] - 1 } else { self.extent[j] })
                    .product::<usize>()
            })
            .sum()
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim).all(|k| p[k].abs() <= self.half[k]) && p[self.dim..].iter().all(|&c| c == 0)
    }

    /// True when every node of `other` is a node of `self`.
    pub fn contains_box(&self, other: &LatticeBox) -> bool {
        self.dim == other.dim && (0..self.dim).all(|k| other.half[k] <= self.half[k])
    }

    pub fn index(&self, p: &Point) -> Option<usize> {
        if self.contains(p) {
            Some(self.index_unchecked(p))
        } else {
            None
        }
    }

    #[inline]
    pub fn index_unchecked(&self, p: &Point) -> usize {
        let mut idx = 0usize;
        for k in 0..self.dim {
            idx += (p[k] + self.half[k]) as usize * self.strides[k];
        }
        idx
    }

    #[inline]
    pub fn point(&self, mut idx: usize) -> Point {
        let mut p = [0i64; 3];
        for k in 0..self.dim {
            let c = idx / self.strides[k];
            idx -= c * self.strides[k];
            p[k] = c as i64 - self.half[k];
        }
        p
    }

    pub fn is_boundary_point(&self, p: &Point) -> bool {
        (0..self.dim).any(|k| p[k].abs() == self.half[k])
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.is_boundary_point(&self.point(idx))
    }

    /// Whether the edge `(p, p+e_k)` belongs to the box.
    pub fn has_edge(&self, p: &Point, k: usize) -> bool {
        k < self.dim && self.contains(p) && p[k] < self.half[k]
    }

    pub fn boundary_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len - self.num_interior());
        let n = self.extent(self.dim - 1);
        for (start, _, p) in row_pairs(self, self) {
            if self.row_is_boundary(&p) {
                out.extend(start..start + n);
            } else {
                out.push(start);
                out.push(start + n - 1);
            }
        }
        out
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.num_interior());
        let n = self.extent(self.dim - 1);
        for (start, _, p) in row_pairs(self, self) {
            if !self.row_is_boundary(&p) {
                out.extend(start + 1..start + n - 1);
            }
        }
        out
    }

    /// Whether the row along the last axis starting at `head` lies in the boundary.
    pub(crate) fn row_is_boundary(&self, head: &Point) -> bool {
        (0..self.dim - 1).any(|k| head[k].abs() == self.half[k])
    }

    pub fn num_interior(&self) -> usize {
        (0..self.dim).map(|k| self.extent[k] - 2).product()
    }

    /// Points in storage order.
    pub fn points(&self) -> Points {
        let mut p = [0i64; 3];
        for k in 0..self.dim {
            p[k] = -self.half[k];
        }
        Points {
            half: self.half,
            dim: self.dim,
            next: p,
            remaining: self.len,
        }
    }

    pub(crate) fn check_same(&self, other: &LatticeBox, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::BoxMismatch(format!(
                "{what}: {:?} vs {:?}",
                self.half_widths(),
                other.half_widths()
            )));
        }
        Ok(())
    }
}

/// Row-major walk over the points of a box.
#[derive(Clone, Debug)]
pub struct Points {
    half: [i64; 3],
    dim: usize,
    next: Point,
    remaining: usize,
}

impl Iterator for Points {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let out = self.next;
        for k in (0..self.dim).rev() {
            self.next[k] += 1;
            if self.next[k] <= self.half[k] {
                break;
            }
            self.next[k] = -self.half[k];
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for Points {}

/// Unit vector along `axis`.
pub fn unit(axis: usize) -> Point {
    let mut e = [0i64; 3];
    e[axis] = 1;
    e
}

pub fn add(p: &Point, q: &Point) -> Point {
    [p[0] + q[0], p[1] + q[1], p[2] + q[2]]
}

pub fn sup_norm(p: &Point) -> i64 {
    p.iter().map(|c| c.abs()).max().unwrap_or(0)
}

/// Scalar data on the nodes of a box.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeField {
    bx: LatticeBox,
    values: Vec<f64>,
}

impl NodeField {
    pub fn zeros(bx: LatticeBox) -> Self {
        NodeField {
            values: vec![0.0; bx.len()],
            bx,
        }
    }

    pub fn constant(bx: LatticeBox, c: f64) -> Self {
        NodeField {
            values: vec![c; bx.len()],
            bx,
        }
    }

    pub fn from_fn(bx: LatticeBox, mut f: impl FnMut(&Point) -> f64) -> Self {
        let values = bx.points().map(|p| f(&p)).collect();
        NodeField { bx, values }
    }

    pub fn from_values(bx: LatticeBox, values: Vec<f64>) -> Result<Self> {
        if values.len() != bx.len() {
            return Err(Error::BoxMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                bx.len()
            )));
        }
        Ok(NodeField { bx, values })
    }

    pub fn lattice_box(&self) -> &LatticeBox {
        &self.bx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at `p`; panics when `p` is outside the box.
    pub fn at(&self, p: &Point) -> f64 {
        self.values[self.bx.index(p).expect("point outside box")]
    }

    pub fn get(&self, p: &Point) -> Option<f64> {
        self.bx.index(p).map(|i| self.values[i])
    }

    pub fn set(&mut self, p: &Point, v: f64) {
        let i = self.bx.index(p).expect("point outside box");
        self.values[i] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }
}

/// Scalar data on directed edges `(n, n+e_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeField {
    bx: LatticeBox,
    dirs: Vec<Vec<f64>>,
}

impl EdgeField {
    pub fn zeros(bx: LatticeBox) -> Self {
        EdgeField {
            dirs: vec![vec![0.0; bx.len()]; bx.dim()],
            bx,
        }
    }

    pub fn constant(bx: LatticeBox, c: f64) -> Self {
        let mut out = EdgeField {
            dirs: vec![vec![c; bx.len()]; bx.dim()],
            bx,
        };
        out.clear_missing();
        out
    }

    /// Zeroes the entries at `n_k = L_k`, which carry no edge.
    fn clear_missing(&mut self) {
        let bx = self.bx;
        let last = bx.dim() - 1;
        let n = bx.extent(last);
        for (start, _, p) in row_pairs(&bx, &bx) {
            for k in 0..bx.dim() {
                let row = &mut self.dirs[k][start..start + n];
                if k == last {
                    row[n - 1] = 0.0;
                } else if p[k] == bx.half_width(k) {
                    row.fill(0.0);
                }
            }
        }
    }

    /// Builds the field from `f(base, direction)` over all edges.
    pub fn from_fn(bx: LatticeBox, mut f: impl FnMut(&Point, usize) -> f64) -> Self {
        let mut out = Self::zeros(bx);
        for k in 0..bx.dim() {
            let dir = &mut out.dirs[k];
            for (v, p) in dir.iter_mut().zip(bx.points()) {
                if p[k] < bx.half_width(k) {
                    *v = f(&p, k);
                }
            }
        }
        out
    }

    pub fn lattice_box(&self) -> &LatticeBox {
        &self.bx
    }

    /// Node-indexed storage for direction `k` (entries with `n_k = L_k` are zero).
    pub fn dir(&self, k: usize) -> &[f64] {
        &self.dirs[k]
    }

    pub fn dir_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.dirs[k]
    }

    pub fn get(&self, p: &Point, k: usize) -> Option<f64> {
        if self.bx.has_edge(p, k) {
            Some(self.dirs[k][self.bx.index_unchecked(p)])
        } else {
            None
        }
    }

    pub fn set(&mut self, p: &Point, k: usize, v: f64) {
        assert!(self.bx.has_edge(p, k), "edge outside box");
        let i = self.bx.index_unchecked(p);
        self.dirs[k][i] = v;
    }

    /// Iterates `(base, direction, value)` over every edge of the box.
    pub fn edges(&self) -> impl Iterator<Item = (Point, usize, f64)> + '_ {
        (0..self.bx.dim()).flat_map(move |k| {
            self.bx
                .points()
                .zip(self.dirs[k].iter())
                .filter_map(move |(p, &v)| (p[k] < self.bx.half_width(k)).then_some((p, k, v)))
        })
    }

    /// Edge values in serialization order (direction-major, row-major nodes).
    pub fn compact_values(&self) -> Vec<f64> {
        self.edges().map(|(_, _, v)| v).collect()
    }

    pub fn from_compact(bx: LatticeBox, values: &[f64]) -> Result<Self> {
        if values.len() != bx.num_edges() {
            return Err(Error::BoxMismatch(format!(
                "{} values for {} edges",
                values.len(),
                bx.num_edges()
            )));
        }
        let mut out = Self::zeros(bx);
        let mut it = values.iter();
        for k in 0..bx.dim() {
            for (v, p) in out.dirs[k].iter_mut().zip(bx.points()) {
                if p[k] < bx.half_width(k) {
                    *v = *it.next().expect("length checked");
                }
            }
        }
        Ok(out)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.edges()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, _, v)| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn is_finite(&self) -> bool {
        self.dirs.iter().all(|d| d.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.dirs
            .iter()
            .flat_map(|d| d.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Forward-difference gradient.
pub fn discrete_gradient(u: &NodeField) -> EdgeField {
    let bx = *u.lattice_box();
    let vals = u.values();
    let mut out = EdgeField::zeros(bx);
    let last = bx.dim() - 1;
    let n = bx.extent(last);
    for (start, _, p) in row_pairs(&bx, &bx) {
        for k in 0..bx.dim() {
            let s = bx.stride(k);
            let len = match k == last {
                true => n - 1,
                false if p[k] < bx.half_width(k) => n,
                false => 0,
            };
            let dir = &mut out.dirs[k];
            for i in start..start + len {
                dir[i] = vals[i + s] - vals[i];
            }
        }
    }
    out
}

/// Backward-difference divergence; edges outside the box count as zero.
pub fn discrete_divergence(h: &EdgeField) -> NodeField {
    let bx = *h.lattice_box();
    let mut out = NodeField::zeros(bx);
    let last = bx.dim() - 1;
    let n = bx.extent(last);
    for (start, _, p) in row_pairs(&bx, &bx) {
        let v = &mut out.values[start..start + n];
        for k in 0..bx.dim() {
            let dir = h.dir(k);
            if k == last {
                v[0] += dir[start];
                for j in 1..n {
                    v[j] += dir[start + j] - dir[start + j - 1];
                }
            } else if p[k] > -bx.half_width(k) {
                let s = bx.stride(k);
                for j in 0..n {
                    v[j] += dir[start + j] - dir[start + j - s];
                }
            } else {
                for j in 0..n {
                    v[j] += dir[start + j];
                }
            }
        }
    }
    out
}

/// `(1/M) u - ∇·a∇u` at interior nodes, identity on boundary nodes.
pub fn apply_operator(a: &EdgeField, u: &NodeField, mass_term: f64) -> Result<NodeField> {
    a.lattice_box().check_same(u.lattice_box(), "apply_operator")?;
    check_conductances(a)?;
    if !(mass_term >= 0.0) || !mass_term.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "mass term must be finite and nonnegative, got {mass_term}"
        )));
    }
    let bx = *u.lattice_box();
    let mut out = NodeField::zeros(bx);
    crate::solver::apply_interior(a, mass_term, u.values(), out.values_mut());
    for i in bx.boundary_indices() {
        out.values_mut()[i] = u.values()[i];
    }
    Ok(out)
}

pub(crate) fn check_conductances(a: &EdgeField) -> Result<()> {
    let bx = a.lattice_box();
    let last = bx.dim() - 1;
    let n = bx.extent(last);
    for (start, _, p) in row_pairs(bx, bx) {
        for k in 0..bx.dim() {
            let len = match k == last {
                true => n - 1,
                false if p[k] < bx.half_width(k) => n,
                false => 0,
            };
            let row = &a.dir(k)[start..start + len];
            if let Some(j) = row.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::NonPositiveConductance {
                    edge: start + j,
                    value: row[j],
                });
            }
        }
    }
    Ok(())
}

/// Builds `h` with `∇·h = f` by a dimensional sweep of line partial sums.
///
/// Along axis 0 each line's charge is integrated into edge values, leaving the
/// line total at the node with `n_0 = 0`; the residual lives on the hyperplane
/// `n_0 = 0` and is swept along axis 1, and so on. The support of `h` stays in
/// the box of `f`.
pub fn charge_to_edge_field(f: &NodeField) -> Result<EdgeField> {
    let bx = *f.lattice_box();
    let total: f64 = f.values().iter().sum();
    let scale: f64 = f.values().iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if total.abs() > 1e-12 * scale {
        return Err(Error::NonNeutralCharge(total));
    }
    let mut residual = f.values().to_vec();
    let mut h = EdgeField::zeros(bx);
    for k in 0..bx.dim() {
        let s = bx.stride(k);
        let hk = bx.half_width(k);
        let starts: Vec<usize> = (0..bx.len())
            .filter(|&i| {
                let p = bx.point(i);
                p[k] == -hk && (0..k).all(|m| p[m] == 0)
            })
            .collect();
        for start in starts {
            let line: Vec<usize> = (0..bx.extent(k)).map(|j| start + j * s).collect();
            let line_total: f64 = line.iter().map(|&i| residual[i]).sum();
            let pivot = line[hk as usize];
            let mut acc = 0.0;
            let dir = h.dir_mut(k);
            for (j, &i) in line.iter().enumerate() {
                acc += residual[i];
                if i == pivot {
                    acc -= line_total;
                }
                if (j as i64) - hk < hk {
                    dir[i] = acc;
                }
            }
            for &i in &line {
                residual[i] = 0.0;
            }
            residual[pivot] = line_total;
        }
    }
    Ok(h)
}

/// Copies `u` onto the smaller box `target`.
pub fn restrict_field(u: &NodeField, target: &LatticeBox) -> Result<NodeField> {
    let src = u.lattice_box();
    if !src.contains_box(target) {
        return Err(Error::BoxMismatch(format!(
            "cannot restrict {:?} to larger box {:?}",
            src.half_widths(),
            target.half_widths()
        )));
    }
    let mut values = vec![0.0; target.len()];
    let n = target.extent(target.dim() - 1);
    for (start, from, _) in row_pairs(src, target) {
        values[start..start + n].copy_from_slice(&u.values()[from..from + n]);
    }
    Ok(NodeField {
        bx: *target,
        values,
    })
}

/// `(target offset, source offset, first point)` of every row of `target`
/// along the last axis, with `target` inside `src`.
pub(crate) fn row_pairs<'a>(src: &'a LatticeBox, target: &LatticeBox) -> impl Iterator<Item = (usize, usize, Point)> + 'a {
    let d = target.dim();
    let n = target.extent(d - 1);
    let first_last = -target.half_width(d - 1);
    let heads: Box<dyn Iterator<Item = Point>> = if d == 1 {
        Box::new(std::iter::once([first_last, 0, 0]))
    } else {
        let outer = LatticeBox::with_half_widths(&target.half_widths()[..d - 1]).expect("valid sub-box");
        Box::new(outer.points().map(move |mut p| {
            p[d - 1] = first_last;
            p
        }))
    };
    heads
        .enumerate()
        .map(move |(r, p)| (r * n, src.index_unchecked(&p), p))
}

/// Restriction of an edge field; edges of `target` are edges of the source.
pub fn restrict_edge_field(h: &EdgeField, target: &LatticeBox) -> Result<EdgeField> {
    let src = h.lattice_box();
    if !src.contains_box(target) {
        return Err(Error::BoxMismatch(format!(
            "cannot restrict {:?} to larger box {:?}",
            src.half_widths(),
            target.half_widths()
        )));
    }
    let mut out = EdgeField::zeros(*target);
    let last = target.dim() - 1;
    let n = target.extent(last);
    for (start, from, p) in row_pairs(src, target) {
        for k in 0..target.dim() {
            let dst = &mut out.dirs[k][start..start + n];
            if k == last {
                dst[..n - 1].copy_from_slice(&h.dir(k)[from..from + n - 1]);
            } else if p[k] < target.half_width(k) {
                dst.copy_from_slice(&h.dir(k)[from..from + n]);
            }
        }
    }
    Ok(out)
}

/// Zero-extension of `u` onto the larger box `target`.
pub fn embed_field(u: &NodeField, target: &LatticeBox) -> Result<NodeField> {
    let src = u.lattice_box();
    if !target.contains_box(src) {
        return Err(Error::BoxMismatch(format!(
            "cannot embed {:?} into smaller box {:?}",
            src.half_widths(),
            target.half_widths()
        )));
    }
    let mut out = NodeField::zeros(*target);
    let n = src.extent(src.dim() - 1);
    for (start, to, _) in row_pairs(target, src) {
        out.values[to..to + n].copy_from_slice(&u.values[start..start + n]);
    }
    Ok(out)
}

/// One nonzero entry of a compactly supported edge field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChargeEdge {
    pub base: Point,
    pub direction: usize,
    pub weight: f64,
}

impl ChargeEdge {
    pub fn head(&self) -> Point {
        add(&self.base, &unit(self.direction))
    }

    pub fn midpoint(&self) -> [f64; 3] {
        let mut m = [self.base[0] as f64, self.base[1] as f64, self.base[2] as f64];
        m[self.direction] += 0.5;
        m
    }
}

/// Sparse representation of the edge field `h` generating the charge `∇·h`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeCharge {
    dim: usize,
    edges: Vec<ChargeEdge>,
}

impl EdgeCharge {
    pub fn new(dim: usize, edges: Vec<ChargeEdge>) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidArgument(format!("bad dimension {dim}")));
        }
        for e in &edges {
            if e.direction >= dim || e.base[dim..].iter().any(|&c| c != 0) {
                return Err(Error::InvalidArgument(format!(
                    "edge {e:?} not in dimension {dim}"
                )));
            }
        }
        Ok(EdgeCharge { dim, edges })
    }

    pub fn empty(dim: usize) -> Self {
        EdgeCharge {
            dim,
            edges: Vec::new(),
        }
    }

    /// Nonzero edges of a dense field.
    pub fn from_edge_field(h: &EdgeField) -> Self {
        let edges = h
            .edges()
            .filter(|&(_, _, v)| v != 0.0)
            .map(|(base, direction, weight)| ChargeEdge {
                base,
                direction,
                weight,
            })
            .collect();
        EdgeCharge {
            dim: h.lattice_box().dim(),
            edges,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn edges(&self) -> &[ChargeEdge] {
        &self.edges
    }

    pub fn is_zero(&self) -> bool {
        self.edges.iter().all(|e| e.weight == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        EdgeCharge {
            dim: self.dim,
            edges: self
                .edges
                .iter()
                .map(|e| ChargeEdge {
                    weight: e.weight * c,
                    ..*e
                })
                .collect(),
        }
    }

    /// Smallest `r` with every edge endpoint in `Q_r`.
    pub fn support_radius(&self) -> i64 {
        self.edges
            .iter()
            .map(|e| sup_norm(&e.base).max(sup_norm(&e.head())))
            .max()
            .unwrap_or(0)
    }

    pub fn touches(&self, p: &Point) -> bool {
        self.edges.iter().any(|e| e.base == *p || e.head() == *p)
    }

    pub fn to_edge_field(&self, bx: &LatticeBox) -> Result<EdgeField> {
        if bx.dim() != self.dim {
            return Err(Error::BoxMismatch("charge dimension".into()));
        }
        let mut h = EdgeField::zeros(*bx);
        for e in &self.edges {
            if !bx.has_edge(&e.base, e.direction) {
                return Err(Error::BoxMismatch(format!(
                    "charge edge {:?}/{} outside box {:?}",
                    e.base,
                    e.direction,
                    bx.half_widths()
                )));
            }
            let i = bx.index_unchecked(&e.base);
            h.dir_mut(e.direction)[i] += e.weight;
        }
        Ok(h)
    }

    /// The node charge `∇·h` on `bx`.
    pub fn divergence(&self, bx: &LatticeBox) -> Result<NodeField> {
        Ok(discrete_divergence(&self.to_edge_field(bx)?))
    }
}

/// How the localized source term is specified.
#[derive(Clone, Debug, PartialEq)]
pub enum ChargeSpec {
    /// `h` equal to `weight` on the single edge `(base, base + e_direction)`.
    EdgeDipole {
        base: Point,
        direction: usize,
        weight: f64,
    },
    /// An explicit neutral node charge `f`; `h` is built by [`charge_to_edge_field`].
    NodeCharge { charges: Vec<(Point, f64)> },
}

impl ChargeSpec {
    pub fn unit_dipole() -> Self {
        ChargeSpec::EdgeDipole {
            base: [0; 3],
            direction: 0,
            weight: 1.0,
        }
    }

    /// Radius `ℓ` of the box holding the node charge.
    pub fn support_radius(&self) -> i64 {
        match self {
            ChargeSpec::EdgeDipole { base, direction, .. } => {
                sup_norm(base).max(sup_norm(&add(base, &unit(*direction))))
            }
            ChargeSpec::NodeCharge { charges } => {
                charges.iter().map(|(p, _)| sup_norm(p)).max().unwrap_or(0)
            }
        }
    }

    pub fn edge_charge(&self, dim: usize) -> Result<EdgeCharge> {
        match self {
            ChargeSpec::EdgeDipole {
                base,
                direction,
                weight,
            } => EdgeCharge::new(
                dim,
                vec![ChargeEdge {
                    base: *base,
                    direction: *direction,
                    weight: *weight,
                }],
            ),
            ChargeSpec::NodeCharge { charges } => {
                let radius = self.support_radius().max(1);
                let bx = LatticeBox::cube(dim, radius)?;
                let mut f = NodeField::zeros(bx);
                for (p, q) in charges {
                    let i = bx.index(p).ok_or_else(|| {
                        Error::InvalidArgument(format!("charge point {p:?} not in dimension {dim}"))
                    })?;
                    f.values_mut()[i] += q;
                }
                Ok(EdgeCharge::from_edge_field(&charge_to_edge_field(&f)?))
            }
        }
    }
}
