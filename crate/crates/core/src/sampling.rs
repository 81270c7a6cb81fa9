//! Seeded samplers. Every random choice in the crate goes through these so
//! that results are a pure function of the seed.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a labelled sub-task.
pub fn substream(seed: u64, label: u64) -> SeededRng {
    let mixed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .rotate_left(17)
        ^ label.wrapping_mul(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(mixed)
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn unit_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let v = gaussian_vector(rng, n);
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Uniform point in the closed unit ball of dimension `n`.
pub fn ball_point<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    let dir = unit_vector(rng, n);
    let r: f64 = rng.random::<f64>().powf(1.0 / n as f64);
    dir * r
}

pub fn complex_unit_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<Complex<f64>> {
    loop {
        let v = DVector::from_fn(n, |_, _| {
            Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let norm = v.norm();
        if norm > 1e-12 {
            return v.unscale(norm);
        }
    }
}

/// Haar-random rotation in SO(n) from the QR decomposition of a Gaussian
/// matrix with the usual sign correction.
pub fn random_rotation<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    if q.determinant() < 0.0 {
        for i in 0..n {
            q[(i, 0)] = -q[(i, 0)];
        }
    }
    q
}

/// Radical-inverse low-discrepancy sequence in the given prime base.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Deterministic quasi-random points on the unit sphere S^{n-1}: Halton
/// coordinates with a seeded Cranley-Patterson shift, mapped to Gaussians by
/// Box-Muller and normalized.
pub fn sphere_points(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut start = 0;
    while out.len() < count {
        let need = count - out.len();
        for v in halton_gaussians(n, start, need, seed) {
            let norm = v.norm();
            if norm > 1e-9 {
                out.push(v / norm);
            }
        }
        start += need;
    }
    out
}

/// Gaussian vectors from the shifted Halton points `start + 1 ..= start +
/// count` via Box-Muller on consecutive coordinate pairs.
pub fn halton_gaussians(n: usize, start: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut r = substream(seed, 0x5EED);
    let pairs = n.div_ceil(2);
    let shifts: Vec<f64> = (0..2 * pairs).map(|_| r.random::<f64>()).collect();
    (0..count)
        .map(|i| {
            let idx = (start + i + 1) as u64;
            let mut v = DVector::zeros(n);
            for p in 0..pairs {
                let mut u1 = radical_inverse(idx, PRIMES[(2 * p) % 16]) + shifts[2 * p];
                let mut u2 = radical_inverse(idx, PRIMES[(2 * p + 1) % 16]) + shifts[2 * p + 1];
                u1 -= u1.floor();
                u2 -= u2.floor();
                let rad = (-2.0 * (1.0 - u1).max(1e-300).ln()).sqrt();
                let th = 2.0 * std::f64::consts::PI * u2;
                v[2 * p] = rad * th.cos();
                if 2 * p + 1 < n {
                    v[2 * p + 1] = rad * th.sin();
                }
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samplers_are_deterministic() {
        let a = unit_vector(&mut rng(7), 5);
        let b = unit_vector(&mut rng(7), 5);
        assert_eq!(a, b);
        assert_eq!(sphere_points(3, 10, 1), sphere_points(3, 10, 1));
    }

    #[test]
    fn rotations_are_special_orthogonal() {
        let mut r = rng(3);
        for n in 2..6 {
            let q = random_rotation(&mut r, n);
            let e = &q.transpose() * &q - DMatrix::<f64>::identity(n, n);
            assert!(e.amax() < 1e-12);
            assert!((q.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_points_are_unit() {
        for p in sphere_points(5, 50, 0) {
            assert!((p.norm() - 1.0).abs() < 1e-14);
        }
    }
}
