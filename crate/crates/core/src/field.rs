//! Stationary Gaussian fields by circulant embedding, and the pointwise maps
//! turning them into edge conductances.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::fft::{fft_nd, smooth_size};
use crate::lattice::{EdgeField, LatticeBox, NodeField, Point};

/// Covariance tail level used to size the embedding padding.
const TAIL_LEVEL: f64 = 1e-10;
pub const DEFAULT_MAX_CLIPPED: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CovarianceSpec {
    /// `c(r) = exp(-r²/θ)`
    Gaussian { theta: f64 },
    /// `c(r) = (1 + r/θ)^(-β)`
    Algebraic { theta: f64, beta: f64 },
    /// `c(r) = 1` at `r = 0`, else 0.
    Delta,
}

impl CovarianceSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match *self {
            CovarianceSpec::Gaussian { theta } if !(theta > 0.0 && theta.is_finite()) => {
                bad(format!("gaussian scale must be positive, got {theta}"))
            }
            CovarianceSpec::Algebraic { theta, beta }
                if !(theta > 0.0 && beta > 0.0 && theta.is_finite() && beta.is_finite()) =>
            {
                bad(format!("algebraic covariance needs θ, β > 0, got {theta}, {beta}"))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            CovarianceSpec::Gaussian { theta } => (-r * r / theta).exp(),
            CovarianceSpec::Algebraic { theta, beta } => (1.0 + r / theta).powf(-beta),
            CovarianceSpec::Delta => {
                if r == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Algebraic decay exponent; `None` for covariances decaying faster than
    /// any power.
    pub fn decay_exponent(&self) -> Option<f64> {
        match *self {
            CovarianceSpec::Algebraic { beta, .. } => Some(beta),
            _ => None,
        }
    }

    /// Distance beyond which the covariance falls under `1e-10`, capped at `cap`.
    pub fn padding(&self, cap: usize) -> usize {
        let r = match *self {
            CovarianceSpec::Gaussian { theta } => (theta * TAIL_LEVEL.recip().ln()).sqrt(),
            CovarianceSpec::Algebraic { theta, beta } => theta * (TAIL_LEVEL.powf(-1.0 / beta) - 1.0),
            CovarianceSpec::Delta => 0.0,
        };
        ((r - 1e-9).ceil().max(0.0) as usize).min(cap)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CoefficientMap {
    /// `A(g) = 1 + 3/(1 + e^{-g})`, with values in `[1, 4]`.
    Logistic,
    /// `A(g) = 1 + ηg` clipped to `[lambda_min, lambda_max]`.
    Affine {
        eta: f64,
        lambda_min: f64,
        lambda_max: f64,
    },
    Constant(f64),
}

impl CoefficientMap {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "coefficient bounds must satisfy 0 < λ_min ≤ λ_max < ∞, got [{lo}, {hi}]"
            )));
        }
        if let CoefficientMap::Affine { eta, .. } = self {
            if !eta.is_finite() {
                return Err(Error::InvalidArgument("η must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn apply(&self, g: f64) -> f64 {
        match *self {
            CoefficientMap::Logistic => 1.0 + 3.0 / (1.0 + (-g).exp()),
            CoefficientMap::Affine {
                eta,
                lambda_min,
                lambda_max,
            } => (1.0 + eta * g).clamp(lambda_min, lambda_max),
            CoefficientMap::Constant(c) => c,
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            CoefficientMap::Logistic => (1.0, 4.0),
            CoefficientMap::Affine {
                lambda_min,
                lambda_max,
                ..
            } => (lambda_min, lambda_max),
            CoefficientMap::Constant(c) => (c, c),
        }
    }
}

/// Square-root spectral multipliers of a periodized covariance.
#[derive(Clone, Debug)]
pub struct Spectrum {
    covariance: CovarianceSpec,
    extents: Vec<usize>,
    /// `sqrt(max(λ, 0) / N)` per torus mode.
    amplitude: Vec<f64>,
    clipped_fraction: f64,
}

impl Spectrum {
    pub fn covariance(&self) -> CovarianceSpec {
        self.covariance
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    /// Negative spectral mass removed by clipping, relative to the total.
    pub fn clipped_fraction(&self) -> f64 {
        self.clipped_fraction
    }

    /// Clipped eigenvalues `max(λ, 0)`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.amplitude.len() as f64;
        self.amplitude.iter().map(|a| a * a * n).collect()
    }
}

/// Torus extents large enough to embed `bx` for this covariance.
pub fn torus_extents(spec: &CovarianceSpec, bx: &LatticeBox) -> Vec<usize> {
    bx.extents()
        .iter()
        .map(|&e| smooth_size(2 * e + spec.padding(2 * e).max(8)))
        .collect()
}

/// Spectrum of `spec` periodized on a torus with the given extents.
/// `max_clipped` of `None` accepts any amount of clipping.
pub fn build_spectrum(
    spec: &CovarianceSpec,
    torus: &[usize],
    max_clipped: Option<f64>,
) -> Result<Spectrum> {
    spec.validate()?;
    if torus.is_empty() || torus.len() > 3 || torus.iter().any(|&t| t < 2) {
        return Err(Error::InvalidArgument(format!("invalid torus extents {torus:?}")));
    }
    let n: usize = torus.iter().product();
    let d = torus.len();
    let mut data: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let mut rem = idx;
            let mut r2 = 0.0;
            for k in (0..d).rev() {
                let m = rem % torus[k];
                rem /= torus[k];
                let dist = m.min(torus[k] - m) as f64;
                r2 += dist * dist;
            }
            Complex64::new(spec.eval(r2.sqrt()), 0.0)
        })
        .collect();
    fft_nd(&mut data, torus, FftDirection::Forward);
    let (mut neg, mut total) = (0.0, 0.0);
    for z in &data {
        total += z.re.abs();
        if z.re < 0.0 {
            neg -= z.re;
        }
    }
    let clipped_fraction = if total > 0.0 { neg / total } else { 0.0 };
    if let Some(limit) = max_clipped {
        if clipped_fraction > limit {
            return Err(Error::NotEmbeddable {
                fraction: clipped_fraction,
                limit,
            });
        }
    }
    let scale = 1.0 / n as f64;
    let amplitude = data.par_iter().map(|z| (z.re.max(0.0) * scale).sqrt()).collect();
    Ok(Spectrum {
        covariance: *spec,
        extents: torus.to_vec(),
        amplitude,
        clipped_fraction,
    })
}

#[derive(Clone, Debug)]
pub struct FieldSample {
    pub seed: u64,
    pub g: NodeField,
    pub covariance: CovarianceSpec,
    pub torus: Vec<usize>,
}

/// Two independent standard normals from the next two words of `rng`.
fn white_noise(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
    (r * c, r * s)
}

/// Draws one realization restricted to `bx`, which is placed at the torus
/// corner. Each torus plane along the first axis draws its noise from its own
/// stream `(seed, plane index)`.
pub fn sample_field(spectrum: &Spectrum, bx: &LatticeBox, seed: u64) -> Result<FieldSample> {
    let torus = &spectrum.extents;
    if torus.len() != bx.dim() {
        return Err(Error::InvalidArgument(format!(
            "torus dimension {} does not match box dimension {}",
            torus.len(),
            bx.dim()
        )));
    }
    for (k, &t) in torus.iter().enumerate() {
        if t < 2 * (bx.extent(k) - 1) {
            return Err(Error::InvalidArgument(format!(
                "torus extent {t} too small for box extent {} on axis {k}",
                bx.extent(k)
            )));
        }
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let plane: usize = torus[1..].iter().product();
    let mut data = vec![Complex64::default(); spectrum.amplitude.len()];
    data.par_chunks_mut(plane).enumerate().for_each(|(p, chunk)| {
        let mut rng = base.clone();
        rng.set_stream(p as u64);
        let amp = &spectrum.amplitude[p * plane..(p + 1) * plane];
        for (z, &a) in chunk.iter_mut().zip(amp) {
            let (x, y) = white_noise(&mut rng);
            *z = Complex64::new(x, y) * a;
        }
    });
    // complex noise with unit-variance parts: the real part of the transform
    // has exactly the embedded covariance
    fft_nd(&mut data, torus, FftDirection::Inverse);
    let g = NodeField::from_fn(*bx, |p| {
        let mut idx = 0;
        for k in 0..bx.dim() {
            idx = idx * torus[k] + (p[k] + bx.half_width(k)) as usize;
        }
        data[idx].re
    });
    Ok(FieldSample {
        seed,
        g,
        covariance: spectrum.covariance,
        torus: torus.clone(),
    })
}

/// Edge conductances `A((g(n) + g(n+e_k))/2)`.
pub fn coefficient_field(g: &NodeField, map: &CoefficientMap) -> EdgeField {
    let bx = *g.lattice_box();
    let mut a = EdgeField::zeros(bx);
    for k in 0..bx.dim() {
        let s = bx.stride(k);
        let hw = bx.half_width(k);
        let gv = g.values();
        a.dir_mut(k).par_iter_mut().enumerate().for_each(|(i, v)| {
            // axis-k coordinate of node i
            let c = (i / s) % bx.extent(k);
            if (c as i64) - hw < hw {
                *v = map.apply(0.5 * (gv[i] + gv[i + s]));
            }
        });
    }
    a
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceEstimate {
    pub lag: Point,
    pub estimate: f64,
    pub std_error: f64,
}

/// Lag with its first nonzero component positive; `x` and `-x` share it.
fn canonical_lag(lag: &Point) -> Point {
    match lag.iter().find(|&&c| c != 0) {
        Some(&c) if c < 0 => [-lag[0], -lag[1], -lag[2]],
        _ => *lag,
    }
}

/// Spatial mean of `g(n) g(n + lag)` over pairs inside the box.
fn lag_product_mean(g: &NodeField, lag: &Point) -> Option<f64> {
    let bx = g.lattice_box();
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, p) in bx.points().enumerate() {
        let q = [p[0] + lag[0], p[1] + lag[1], p[2] + lag[2]];
        if let Some(j) = bx.index(&q) {
            sum += g.values()[i] * g.values()[j];
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Ensemble and spatial product estimator with jackknife standard errors
/// over samples.
pub fn empirical_covariance(samples: &[NodeField], lags: &[Point]) -> Result<Vec<CovarianceEstimate>> {
    if lags.is_empty() {
        return Err(Error::InvalidArgument("empty lag list".into()));
    }
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("at least two samples are needed".into()));
    }
    let bx = samples[0].lattice_box();
    for s in samples {
        bx.check_same(s.lattice_box(), "covariance sample")?;
    }
    lags.iter()
        .map(|lag| {
            let canon = canonical_lag(lag);
            let per: Vec<f64> = samples
                .par_iter()
                .map(|g| lag_product_mean(g, &canon))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::InvalidArgument(format!("lag {lag:?} exceeds the box")))?;
            let m = per.len() as f64;
            let total: f64 = per.iter().sum();
            let mean = total / m;
            let var: f64 = per
                .iter()
                .map(|v| {
                    let loo = (total - v) / (m - 1.0);
                    (loo - mean).powi(2)
                })
                .sum::<f64>()
                * (m - 1.0)
                / m;
            Ok(CovarianceEstimate {
                lag: *lag,
                estimate: mean,
                std_error: var.sqrt(),
            })
        })
        .collect()
}
