//! Conditional variance of the small-contrast gradient `∇ū(0)` given the field
//! inside `Q_L`, built on the lattice Green function of `-Δ` on `Z^d`.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::fft::{fft_nd, smooth_size};
use crate::lattice::{sup_norm, ChargeEdge, EdgeCharge, LatticeBox, NodeField, Point};

pub const MAX_RADIUS_2D: i64 = 256;
pub const MAX_RADIUS_3D: i64 = 64;
pub const TORUS_MEMORY_LIMIT: usize = 3 << 30;
pub const CONDITIONING_LIMIT: usize = 4096;

/// `G_D(n)` on `Q_radius`. In dimension 3 the whole-lattice Green function; in
/// dimension 2 the version normalized by `G_D(0) = 0` (minus the potential
/// kernel).
#[derive(Clone, Debug)]
pub struct LatticeGreenTable {
    values: NodeField,
    torus: usize,
}

impl LatticeGreenTable {
    pub fn dim(&self) -> usize {
        self.values.lattice_box().dim()
    }

    pub fn radius(&self) -> i64 {
        self.values.lattice_box().radius()
    }

    pub fn torus(&self) -> usize {
        self.torus
    }

    pub fn values(&self) -> &NodeField {
        &self.values
    }

    /// `G_D(n)`; panics outside the table.
    pub fn at(&self, n: &Point) -> f64 {
        self.values
            .get(n)
            .unwrap_or_else(|| panic!("{n:?} outside the Green table of radius {}", self.radius()))
    }

    pub fn get(&self, n: &Point) -> Option<f64> {
        self.values.get(n)
    }
}

/// Large-`|n|` expansion of the three-dimensional lattice Green function.
pub fn green_asymptote_3d(n: &Point) -> f64 {
    let r2 = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) as f64;
    let r = r2.sqrt();
    let quartic = (n[0].pow(4) + n[1].pow(4) + n[2].pow(4)) as f64 / (r2 * r2);
    1.0 / (4.0 * PI * r) + (5.0 * quartic - 3.0) / (32.0 * PI * r * r2)
}

fn symmetry_key(p: &Point, d: usize) -> [i64; 3] {
    let mut k = [0i64; 3];
    for (i, v) in k.iter_mut().enumerate().take(d) {
        *v = p[i].abs();
    }
    k[..d].sort_unstable();
    k
}

/// Spectral inversion of `-Δ` on a torus of extent `≥ 8 radius`, corrected to
/// satisfy `-ΔG = δ` exactly near the origin, then symmetry averaged.
pub fn lattice_green(dim: usize, radius: i64) -> Result<LatticeGreenTable> {
    let limit = match dim {
        2 => MAX_RADIUS_2D,
        3 => MAX_RADIUS_3D,
        _ => return Err(Error::InvalidArgument(format!("dimension {dim}"))),
    };
    if radius < 1 || radius > limit {
        return Err(Error::SizeGuard(format!(
            "Green radius {radius} outside 1..={limit} in dimension {dim}"
        )));
    }
    let t = smooth_size((8 * radius) as usize);
    let n_total = t.pow(dim as u32);
    if n_total * 16 > TORUS_MEMORY_LIMIT {
        return Err(Error::SizeGuard(format!("torus {t}^{dim} exceeds the memory guard")));
    }
    let extents = vec![t; dim];
    let cos_table: Vec<f64> = (0..t)
        .map(|k| 2.0 * (1.0 - (2.0 * PI * k as f64 / t as f64).cos()))
        .collect();
    let mut data: Vec<Complex64> = (0..n_total)
        .into_par_iter()
        .map(|idx| {
            let mut rem = idx;
            let mut lam = 0.0;
            for _ in 0..dim {
                lam += cos_table[rem % t];
                rem /= t;
            }
            if idx == 0 {
                Complex64::default()
            } else {
                Complex64::new(1.0 / lam, 0.0)
            }
        })
        .collect();
    fft_nd(&mut data, &extents, FftDirection::Inverse);
    let bx = LatticeBox::cube(dim, radius)?;
    let norm = 1.0 / n_total as f64;
    let quad = 1.0 / (2.0 * dim as f64 * n_total as f64);
    let mut g = NodeField::from_fn(bx, |p| {
        let mut idx = 0usize;
        let mut r2 = 0.0;
        for k in 0..dim {
            idx = idx * t + p[k].rem_euclid(t as i64) as usize;
            r2 += (p[k] * p[k]) as f64;
        }
        data[idx].re * norm - quad * r2
    });
    drop(data);

    // symmetry average over sign flips and permutations
    let mut classes: HashMap<[i64; 3], (f64, usize)> = HashMap::new();
    for (i, p) in bx.points().enumerate() {
        let e = classes.entry(symmetry_key(&p, dim)).or_insert((0.0, 0));
        e.0 += g.values()[i];
        e.1 += 1;
    }
    let pts: Vec<Point> = bx.points().collect();
    for (i, p) in pts.iter().enumerate() {
        let (s, c) = classes[&symmetry_key(p, dim)];
        g.values_mut()[i] = s / c as f64;
    }

    let shift = if dim == 3 {
        let mut acc = 0.0;
        let mut count = 0usize;
        for (i, p) in pts.iter().enumerate() {
            if sup_norm(p) == radius {
                acc += green_asymptote_3d(p) - g.values()[i];
                count += 1;
            }
        }
        acc / count as f64
    } else {
        -g.at(&[0, 0, 0])
    };
    g.values_mut().iter_mut().for_each(|v| *v += shift);
    Ok(LatticeGreenTable { values: g, torus: t })
}

/// Correlation `c(n) = (1 + |n|)^{-β}`; `β = ∞` stands for `c = δ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationModel {
    pub dim: usize,
    pub beta: f64,
}

impl CorrelationModel {
    pub fn new(dim: usize, beta: f64) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dimension {dim}")));
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!("β must be positive, got {beta}")));
        }
        Ok(CorrelationModel { dim, beta })
    }

    pub fn delta(dim: usize) -> Result<Self> {
        Self::new(dim, f64::INFINITY)
    }

    pub fn is_delta(&self) -> bool {
        self.beta.is_infinite()
    }

    pub fn eval(&self, n: &Point) -> f64 {
        let r2 = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) as f64;
        if self.is_delta() {
            return if r2 == 0.0 { 1.0 } else { 0.0 };
        }
        (1.0 + r2.sqrt()).powf(-self.beta)
    }

    /// Upper bound on `Σ_{m ∈ Z^d} |c(m)|`, infinite when `β ≤ d`.
    pub fn absolute_sum(&self) -> f64 {
        if self.is_delta() {
            return 1.0;
        }
        let d = self.dim as i32;
        if self.beta <= self.dim as f64 {
            return f64::INFINITY;
        }
        let r0: i64 = if self.dim == 2 { 200 } else { 50 };
        let bx = LatticeBox::cube(self.dim, r0).expect("valid box");
        let inner: f64 = bx.points().map(|p| self.eval(&p)).sum();
        // shells |m|_∞ = r hold fewer than 2d(2r+1)^{d-1} points with |m| ≥ r
        let shell = |r: f64| 2.0 * d as f64 * (2.0 * r + 1.0).powi(d - 1) * (1.0 + r).powf(-self.beta);
        let r1 = 100 * r0;
        let mid: f64 = (r0 + 1..=r1).map(|r| shell(r as f64)).sum();
        let far = 2.0 * d as f64 * 3f64.powi(d - 1) * (r1 as f64).powf(d as f64 - self.beta)
            / (self.beta - d as f64);
        inner + mid + far
    }
}

/// Cached factorization of the conditioning matrix `{c(l - k)}` over `Q_L`.
#[derive(Clone, Debug)]
pub struct ConditioningSystem {
    model: CorrelationModel,
    points: Vec<Point>,
    factor: Cholesky<f64, Dyn>,
}

impl ConditioningSystem {
    pub fn new(model: CorrelationModel, half_width: i64) -> Result<Self> {
        let bx = LatticeBox::cube(model.dim, half_width)?;
        if bx.len() > CONDITIONING_LIMIT {
            return Err(Error::SizeGuard(format!(
                "{} conditioning sites exceed {}",
                bx.len(),
                CONDITIONING_LIMIT
            )));
        }
        let points: Vec<Point> = bx.points().collect();
        let m = points.len();
        let mat = DMatrix::from_fn(m, m, |r, c| {
            let p = &points[r];
            let q = &points[c];
            model.eval(&[p[0] - q[0], p[1] - q[1], p[2] - q[2]])
        });
        let factor = mat.clone().cholesky().ok_or_else(|| {
            Error::NotPositiveDefinite(mat.symmetric_eigenvalues().min())
        })?;
        Ok(ConditioningSystem {
            model,
            points,
            factor,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    fn column(&self, n: &Point) -> DVector<f64> {
        DVector::from_iterator(
            self.points.len(),
            self.points
                .iter()
                .map(|k| self.model.eval(&[n[0] - k[0], n[1] - k[1], n[2] - k[2]])),
        )
    }

    /// `Γ^L_n` solving `𝒞 Γ = 𝒞_n`, with the residual checked.
    pub fn coefficients(&self, n: &Point) -> Result<Vec<f64>> {
        let rhs = self.column(n);
        let gamma = self.factor.solve(&rhs);
        let l = self.factor.l();
        let res = (&l * (l.transpose() * &gamma) - &rhs).amax();
        if res > 1e-10 {
            return Err(Error::NotPositiveDefinite(res));
        }
        Ok(gamma.iter().copied().collect())
    }

    /// `ĉ(n, n') = Σ_k Γ^L_n(k) c(n' - k)`.
    pub fn conditional_covariance(&self, n: &Point, m: &Point) -> Result<f64> {
        let g = self.coefficients(n)?;
        Ok(g.iter().zip(self.column(m).iter()).map(|(a, b)| a * b).sum())
    }
}

/// `Γ^L_n` for one site outside `Q_L`.
pub fn conditional_coefficients(model: CorrelationModel, half_width: i64, n: &Point) -> Result<Vec<f64>> {
    if sup_norm(n) <= half_width {
        return Err(Error::InvalidArgument(format!("{n:?} lies inside Q_{half_width}")));
    }
    ConditioningSystem::new(model, half_width)?.coefficients(n)
}

/// `h = e_1` on every edge based in `Q_{ℓ-1}`; support radius `ℓ`.
pub fn optimality_charge(dim: usize, ell: i64) -> Result<EdgeCharge> {
    if ell < 1 {
        return Err(Error::InvalidArgument(format!("ℓ must be at least 1, got {ell}")));
    }
    let edges = LatticeBox::cube(dim, ell)?
        .points()
        .filter(|p| sup_norm(p) < ell)
        .map(|base| ChargeEdge {
            base,
            direction: 0,
            weight: 1.0,
        })
        .collect();
    EdgeCharge::new(dim, edges)
}

/// Kernel `K(n)` with `∇ū(0) = Σ_n g(n) K(n)` for `-Δū = ∇·(g∇v)`,
/// `-Δv = ∇·h`, on sites `|n|_∞ ≤ radius`. Returns the sites and one vector
/// per site.
pub fn gradient_kernel(
    green: &LatticeGreenTable,
    charge: &EdgeCharge,
    radius: i64,
) -> Result<Vec<(Point, [f64; 3])>> {
    let d = green.dim();
    let ell = charge.support_radius();
    if green.radius() < radius + ell + 2 {
        return Err(Error::SizeGuard(format!(
            "Green table radius {} too small for kernel radius {radius}",
            green.radius()
        )));
    }
    // node charge f = ∇·h
    let mut f: HashMap<Point, f64> = HashMap::new();
    for e in charge.edges() {
        *f.entry(e.head()).or_default() -= e.weight;
        *f.entry(e.base).or_default() += e.weight;
    }
    let mut sources: Vec<(Point, f64)> = f.into_iter().filter(|(_, v)| *v != 0.0).collect();
    sources.sort_by(|a, b| a.0.cmp(&b.0));
    let vbox = LatticeBox::cube(d, radius + 1)?;
    let v = NodeField::from_fn(vbox, |x| {
        sources
            .iter()
            .map(|(y, q)| q * green.at(&[x[0] - y[0], x[1] - y[1], x[2] - y[2]]))
            .sum()
    });
    let kbox = LatticeBox::cube(d, radius)?;
    let unit = |k: usize| crate::lattice::unit(k);
    Ok(kbox
        .points()
        .map(|n| {
            let mut kv = [0.0; 3];
            for j in 0..d {
                let ej = unit(j);
                let mut acc = 0.0;
                for k in 0..d {
                    let ek = unit(k);
                    let dv = v.at(&crate::lattice::add(&n, &ek)) - v.at(&n);
                    let g = |p: Point| green.at(&p);
                    let h = g([n[0] + ek[0] - ej[0], n[1] + ek[1] - ej[1], n[2] + ek[2] - ej[2]])
                        - g([n[0] - ej[0], n[1] - ej[1], n[2] - ej[2]])
                        - g([n[0] + ek[0], n[1] + ek[1], n[2] + ek[2]])
                        + g(n);
                    acc -= h * dv;
                }
                kv[j] = acc;
            }
            (n, kv)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceEstimate {
    pub estimate: f64,
    pub tail_bound: f64,
    pub converged: bool,
}

/// Truncated double sum `Σ_{L<|n|,|n'|≤R_t} K(n)·K(n') (c(n-n') - ĉ(n,n'))`
/// evaluated as `Σ_j K_jᵀ C_out K_j - w_jᵀ 𝒞⁻¹ w_j` with `w_j = C_{in,out} K_j`,
/// plus an analytic bound on the part beyond `R_t`.
pub fn conditional_variance(
    model: CorrelationModel,
    charge: &EdgeCharge,
    half_width: i64,
    truncation: i64,
    green: &LatticeGreenTable,
) -> Result<VarianceEstimate> {
    if truncation < 4 * half_width {
        return Err(Error::InvalidArgument(format!(
            "truncation radius {truncation} must be at least 4L = {}",
            4 * half_width
        )));
    }
    let d = model.dim;
    if charge.is_zero() {
        return Ok(VarianceEstimate {
            estimate: 0.0,
            tail_bound: 0.0,
            converged: true,
        });
    }
    let system = ConditioningSystem::new(model, half_width)?;
    let kernel = gradient_kernel(green, charge, truncation)?;
    let outside: Vec<&(Point, [f64; 3])> = kernel.iter().filter(|(n, _)| sup_norm(n) > half_width).collect();

    // covariance lookup by displacement
    let span = 2 * truncation;
    let cbox = LatticeBox::cube(d, span)?;
    let ctable = NodeField::from_fn(cbox, |p| model.eval(p));
    let cov = |a: &Point, b: &Point| ctable.at(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]]);

    let direct: f64 = if model.is_delta() {
        outside.iter().map(|(_, k)| k.iter().map(|v| v * v).sum::<f64>()).sum()
    } else {
        outside
            .par_iter()
            .map(|(n, kn)| {
                outside
                    .iter()
                    .map(|(m, km)| {
                        let dot: f64 = (0..d).map(|j| kn[j] * km[j]).sum();
                        dot * cov(n, m)
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    };
    let conditioned: f64 = if model.is_delta() {
        0.0
    } else {
        (0..d)
            .map(|j| {
                let w = DVector::from_iterator(
                    system.points.len(),
                    system.points.iter().map(|k| outside.iter().map(|(n, kn)| kn[j] * cov(k, n)).sum::<f64>()),
                );
                let z = system.factor.solve(&w);
                w.dot(&z)
            })
            .sum()
    };
    let estimate = direct - conditioned;

    // |K(n)| ≲ C |n|_∞^{-2d} beyond the truncation shell
    let c_shell = kernel
        .iter()
        .filter(|(n, _)| sup_norm(n) == truncation)
        .map(|(_, k)| k.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
        * (truncation as f64).powi(2 * d as i32);
    let tail_sq: f64 = (truncation + 1..=truncation * 1000)
        .map(|r| {
            let r = r as f64;
            2.0 * d as f64 * (2.0 * r + 1.0).powi(d as i32 - 1) * r.powi(-4 * d as i32)
        })
        .sum::<f64>()
        * c_shell
        * c_shell;
    let s_c = model.absolute_sum();
    let tail_bound = 2.0 * (estimate.max(0.0) * s_c * tail_sq).sqrt() + s_c * tail_sq;
    Ok(VarianceEstimate {
        estimate,
        tail_bound,
        converged: tail_bound <= 0.1 * estimate.abs(),
    })
}

/// Monte Carlo estimate of `E|∇ū(0)|²` for i.i.d. unit Gaussians outside `Q_L`
/// (the `c = δ` case), computing `ū` through the node divergence of `g∇v`.
/// Returns the mean and its standard error.
pub fn monte_carlo_variance(
    charge: &EdgeCharge,
    half_width: i64,
    truncation: i64,
    green: &LatticeGreenTable,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};
    let d = green.dim();
    let ell = charge.support_radius();
    if green.radius() < truncation + ell + 3 {
        return Err(Error::SizeGuard("Green table too small for the Monte Carlo box".into()));
    }
    let bx = LatticeBox::cube(d, truncation + 1)?;
    let vbox = LatticeBox::cube(d, truncation + 2)?;
    let f_nodes: Vec<(Point, f64)> = {
        let div = charge.divergence(&LatticeBox::cube(d, ell.max(1))?)?;
        div.lattice_box()
            .points()
            .zip(div.values().iter().copied())
            .filter(|(_, v)| *v != 0.0)
            .collect()
    };
    let v = NodeField::from_fn(vbox, |x| {
        f_nodes
            .iter()
            .map(|(y, q)| q * green.at(&[x[0] - y[0], x[1] - y[1], x[2] - y[2]]))
            .sum()
    });
    let sites: Vec<Point> = bx
        .points()
        .filter(|p| sup_norm(p) > half_width && sup_norm(p) <= truncation)
        .collect();
    let per_sample: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let mut normal = || {
                let u1 = ((rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64;
                let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
            };
            // flux F = g ∇v on the edges leaving each site, then f = ∇·F
            let mut f = NodeField::zeros(bx);
            for p in &sites {
                let gval = normal();
                for k in 0..d {
                    let q = crate::lattice::add(p, &crate::lattice::unit(k));
                    let flux = gval * (v.at(&q) - v.at(p));
                    let ip = bx.index_unchecked(p);
                    f.values_mut()[ip] += flux;
                    if let Some(iq) = bx.index(&q) {
                        f.values_mut()[iq] -= flux;
                    }
                }
            }
            let mut sq = 0.0;
            for j in 0..d {
                let ej = crate::lattice::unit(j);
                let grad: f64 = bx
                    .points()
                    .zip(f.values())
                    .filter(|(_, fv)| **fv != 0.0)
                    .map(|(y, fv)| {
                        fv * (green.at(&[ej[0] - y[0], ej[1] - y[1], ej[2] - y[2]]) - green.at(&[-y[0], -y[1], -y[2]]))
                    })
                    .sum();
                sq += grad * grad;
            }
            sq
        })
        .collect();
    let n = per_sample.len() as f64;
    let mean = per_sample.iter().sum::<f64>() / n;
    let var = per_sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Ordinary least squares of `log value` against `log L`.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(l, v)) = points.iter().find(|(l, v)| !(*l > 0.0 && *v > 0.0)) {
        return Err(Error::InvalidArgument(format!("nonpositive point ({l}, {v})")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all L values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(ScalingFit {
        slope,
        stderr,
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn charge_supports() {
        assert_eq!(optimality_charge(2, 1).unwrap().edges().len(), 1);
        assert_eq!(optimality_charge(3, 2).unwrap().edges().len(), 27);
        assert!(optimality_charge(2, 0).is_err());
    }

    #[test]
    fn noisy_fit_stays_near_slope() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0, 32.0, 64.0]
                .iter()
                .map(|&l: &f64| (l, 2.0 * l.powf(-4.5) * (1.0 + rng.gen_range(-0.1..0.1))))
                .collect();
            let f = scaling_fit(&pts).unwrap();
            assert!((f.slope + 4.5).abs() < 0.15, "{}", f.slope);
        }
    }

    #[test]
    fn fit_exact_power_laws() {
        let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0, 32.0].iter().map(|&l: &f64| (l, l.powi(-3))).collect();
        let f = scaling_fit(&pts).unwrap();
        assert!((f.slope + 3.0).abs() < 1e-12);
        assert!(f.stderr < 1e-12);
        let pts: Vec<(f64, f64)> = [2.0, 3.0, 5.0].iter().map(|&l: &f64| (l, 5.0 * l.powi(-2))).collect();
        let f = scaling_fit(&pts).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!((f.intercept - 5f64.ln()).abs() < 1e-12);
        assert!(scaling_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(scaling_fit(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn two_dimensional_green_values() {
        let g = lattice_green(2, 16).unwrap();
        assert_eq!(g.at(&[0, 0, 0]), 0.0);
        assert!((g.at(&[1, 0, 0]) + 0.25).abs() < 1e-9);
        assert!((g.at(&[1, 1, 0]) + 1.0 / PI).abs() < 1e-8, "{}", g.at(&[1, 1, 0]) + 1.0 / PI);
        let lap = 4.0 * g.at(&[0, 0, 0]) - 4.0 * g.at(&[1, 0, 0]);
        assert!((lap - 1.0).abs() < 1e-10);
        assert_eq!(g.at(&[1, 0, 0]), g.at(&[0, -1, 0]));
    }

    #[test]
    fn three_dimensional_green_origin() {
        let g = lattice_green(3, 12).unwrap();
        assert!((g.at(&[0, 0, 0]) - 0.252731).abs() < 2e-5, "{}", g.at(&[0, 0, 0]));
        let lap = 6.0 * g.at(&[0, 0, 0]) - 6.0 * g.at(&[1, 0, 0]);
        assert!((lap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn guards() {
        assert!(matches!(lattice_green(3, 65), Err(Error::SizeGuard(_))));
        assert!(matches!(lattice_green(2, 257), Err(Error::SizeGuard(_))));
        let m = CorrelationModel::new(3, 20.0).unwrap();
        assert!(matches!(ConditioningSystem::new(m, 8), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn delta_conditioning_is_trivial() {
        let m = CorrelationModel::delta(2).unwrap();
        let g = conditional_coefficients(m, 3, &[5, 0, 0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn large_beta_coefficients_are_bounded() {
        let m = CorrelationModel::new(2, 20.0).unwrap();
        let sys = ConditioningSystem::new(m, 4).unwrap();
        for n in [[5, 0, 0], [5, 5, 0], [-6, 2, 0]] {
            let g = sys.coefficients(&n).unwrap();
            for (k, gk) in sys.points().iter().zip(&g) {
                let c = m.eval(&[n[0] - k[0], n[1] - k[1], 0]);
                assert!(*gk >= -1e-14 && *gk <= c + 1e-14, "{gk} vs {c}");
            }
        }
    }

    #[test]
    fn schur_complement_oracle() {
        // conditioning set Q_1 in d = 2 (3×3 sites)
        let m = CorrelationModel::new(2, 1.5).unwrap();
        let sys = ConditioningSystem::new(m, 1).unwrap();
        let (n, p) = ([2, 1, 0], [-3, 0, 0]);
        let pts = sys.points().to_vec();
        let c = |a: &Point, b: &Point| m.eval(&[a[0] - b[0], a[1] - b[1], 0]);
        let cin = DMatrix::from_fn(9, 9, |r, s| c(&pts[r], &pts[s]));
        let cn = DVector::from_fn(9, |r, _| c(&n, &pts[r]));
        let cp = DVector::from_fn(9, |r, _| c(&p, &pts[r]));
        let inv = cin.try_inverse().unwrap();
        let expected = cn.dot(&(&inv * &cp));
        let got = sys.conditional_covariance(&n, &p).unwrap();
        assert!((got - expected).abs() < 1e-12);
        // E[G_n E[G_p|F]] = E[E[G_n|F] E[G_p|F]]
        let gn = DVector::from_vec(sys.coefficients(&n).unwrap());
        let gp = DVector::from_vec(sys.coefficients(&p).unwrap());
        let cin = DMatrix::from_fn(9, 9, |r, s| c(&pts[r], &pts[s]));
        assert!((gn.dot(&(&cin * &gp)) - got).abs() < 1e-8);
    }

    #[test]
    fn zero_charge_has_zero_variance() {
        let g = lattice_green(2, 24).unwrap();
        let m = CorrelationModel::new(2, 20.0).unwrap();
        let v = conditional_variance(m, &EdgeCharge::empty(2), 2, 8, &g).unwrap();
        assert_eq!(v.estimate, 0.0);
    }

    #[test]
    fn absolute_sums() {
        assert_eq!(CorrelationModel::delta(3).unwrap().absolute_sum(), 1.0);
        assert!(CorrelationModel::new(2, 1.5).unwrap().absolute_sum().is_infinite());
        let s = CorrelationModel::new(2, 20.0).unwrap().absolute_sum();
        assert!(s > 1.0 && s < 1.001);
    }
}
