//! Multidimensional complex FFT over row-major arrays.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

/// Smallest integer `>= n` with no prime factors above 5.
pub fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Unnormalized transform in `direction` along every axis of `data`.
pub fn fft_nd(data: &mut [Complex64], extents: &[usize], direction: FftDirection) {
    let total: usize = extents.iter().product();
    assert_eq!(total, data.len(), "fft extents do not match data");
    let mut planner = FftPlanner::new();
    let d = extents.len();
    for axis in 0..d {
        let n = extents[axis];
        if n == 1 {
            continue;
        }
        let plan = planner.plan_fft(n, direction);
        let stride: usize = extents[axis + 1..].iter().product();
        if stride == 1 {
            data.par_chunks_mut(n).for_each(|line| {
                let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
                plan.process_with_scratch(line, &mut scratch);
            });
        } else {
            // lines along `axis` within each block of n*stride entries; columns
            // are gathered in batches to keep the inner copy contiguous
            data.par_chunks_mut(n * stride)
                .for_each(|block| transform_strided(block, n, stride, plan.as_ref()));
        }
    }
}

fn transform_strided(block: &mut [Complex64], n: usize, stride: usize, plan: &dyn Fft<f64>) {
    const BATCH: usize = 16;
    let mut buf = vec![Complex64::default(); n * BATCH];
    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
    let mut col = 0;
    while col < stride {
        let width = BATCH.min(stride - col);
        for j in 0..n {
            let row = &block[j * stride + col..j * stride + col + width];
            for (b, v) in row.iter().enumerate() {
                buf[b * n + j] = *v;
            }
        }
        for b in 0..width {
            plan.process_with_scratch(&mut buf[b * n..(b + 1) * n], &mut scratch);
        }
        for j in 0..n {
            let row = &mut block[j * stride + col..j * stride + col + width];
            for (b, v) in row.iter_mut().enumerate() {
                *v = buf[b * n + j];
            }
        }
        col += width;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], extents: &[usize], sign: f64) -> Vec<Complex64> {
        let total = data.len();
        let coords = |mut i: usize| {
            let mut c = vec![0usize; extents.len()];
            for a in (0..extents.len()).rev() {
                c[a] = i % extents[a];
                i /= extents[a];
            }
            c
        };
        (0..total)
            .map(|k| {
                let kc = coords(k);
                let mut acc = Complex64::default();
                for (n, v) in data.iter().enumerate() {
                    let nc = coords(n);
                    let phase: f64 = kc
                        .iter()
                        .zip(&nc)
                        .zip(extents)
                        .map(|((a, b), e)| (a * b) as f64 / *e as f64)
                        .sum();
                    acc += v * Complex64::from_polar(1.0, sign * 2.0 * std::f64::consts::PI * phase);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(131), 135);
        assert_eq!(smooth_size(144), 144);
        assert_eq!(smooth_size(1), 1);
    }

    #[test]
    fn matches_naive_transform() {
        let extents = [3, 4, 5];
        let data: Vec<Complex64> = (0..60)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        fft_nd(&mut fast, &extents, FftDirection::Forward);
        let slow = naive_dft(&data, &extents, -1.0);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
        fft_nd(&mut fast, &extents, FftDirection::Inverse);
        for (a, b) in fast.iter().zip(&data) {
            assert!((a / 60.0 - b).norm() < 1e-12);
        }
    }

    #[test]
    fn wide_strided_axis() {
        let extents = [6, 40];
        let data: Vec<Complex64> = (0..240).map(|i| Complex64::new(i as f64, -(i as f64) * 0.5)).collect();
        let mut fast = data.clone();
        fft_nd(&mut fast, &extents, FftDirection::Inverse);
        let slow = naive_dft(&data, &extents, 1.0);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-8 * b.norm().max(1.0));
        }
    }
}
