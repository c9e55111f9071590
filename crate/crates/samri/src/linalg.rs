//! Small dense complex linear algebra: Hermitian eigendecomposition via
//! cyclic Jacobi and power iteration. Coil counts are tiny (<= 32), so the
//! O(n^3)-per-sweep cost is irrelevant.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues (descending) and matching orthonormal eigenvectors (columns)
/// of a Hermitian matrix.
pub fn hermitian_eig(a: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let n = a.dim().0;
    if a.dim().1 != n {
        return Err(Error::validation("hermitian_eig needs a square matrix"));
    }
    let herm_err = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (a[[i, j]] - a[[j, i]].conj()).norm())
        .fold(0.0f64, f64::max);
    let scale = a.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if herm_err > 1e-9 * scale.max(1.0) {
        return Err(Error::validation("matrix is not Hermitian"));
    }

    let mut m = a.clone();
    let mut v = Array2::<Complex64>::eye(n);

    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag; // e^{i phi}
                let tau = (m[[q, q]].re - m[[p, p]].re) / (2.0 * mag);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let sp = phase * s; // complex off-diagonal rotation entry

                // Right-multiply by the rotation, left-multiply by its adjoint.
                for i in 0..n {
                    let mip = m[[i, p]];
                    let miq = m[[i, q]];
                    m[[i, p]] = mip * c - miq * sp.conj();
                    m[[i, q]] = mip * sp + miq * c;
                }
                for j in 0..n {
                    let mpj = m[[p, j]];
                    let mqj = m[[q, j]];
                    m[[p, j]] = mpj * c - mqj * sp;
                    m[[q, j]] = mpj * sp.conj() + mqj * c;
                }
                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = vip * c - viq * sp.conj();
                    v[[i, q]] = vip * sp + viq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let evals: Vec<f64> = (0..n).map(|i| m[[i, i]].re).collect();
    order.sort_by(|&i, &j| evals[j].partial_cmp(&evals[i]).unwrap());

    let sorted_vals = Array1::from_iter(order.iter().map(|&i| evals[i]));
    let mut sorted_vecs = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            sorted_vecs[[row, col]] = v[[row, src]];
        }
    }
    Ok((sorted_vals, sorted_vecs))
}

/// Dominant eigenvector of a Hermitian PSD matrix by fixed-iteration power
/// method; returns a zero vector for (numerically) zero matrices.
pub fn dominant_eigenvector(a: &Array2<Complex64>, iters: usize) -> Array1<Complex64> {
    let n = a.dim().0;
    let scale = a.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if scale < 1e-300 {
        return Array1::zeros(n);
    }
    let mut v = Array1::from_elem(n, Complex64::new(1.0, 0.0) / (n as f64).sqrt());
    for _ in 0..iters {
        let mut next = Array1::<Complex64>::zeros(n);
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += a[[i, j]] * v[j];
            }
            next[i] = acc;
        }
        let norm = next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Array1::zeros(n);
        }
        v = next.mapv(|z| z / norm);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Array2::from_shape_fn((n, n), |_| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let mut h = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += b[[i, k]] * b[[j, k]].conj();
                }
                h[[i, j]] = acc;
            }
        }
        h
    }

    #[test]
    fn eig_residual_and_orthonormality() {
        for seed in 0..5u64 {
            let n = 6;
            let a = random_hermitian(n, seed);
            let (vals, vecs) = hermitian_eig(&a).unwrap();
            for k in 0..n {
                // || A v - lambda v ||
                let mut resid = 0.0;
                for i in 0..n {
                    let mut av = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        av += a[[i, j]] * vecs[[j, k]];
                    }
                    resid += (av - vecs[[i, k]] * vals[k]).norm_sqr();
                }
                assert!(resid.sqrt() < 1e-10, "residual {}", resid.sqrt());
            }
            for k1 in 0..n {
                for k2 in 0..n {
                    let mut dot = Complex64::new(0.0, 0.0);
                    for i in 0..n {
                        dot += vecs[[i, k1]].conj() * vecs[[i, k2]];
                    }
                    let expect = if k1 == k2 { 1.0 } else { 0.0 };
                    assert!((dot.norm() - expect).abs() < 1e-12);
                }
            }
            // Descending order.
            for k in 1..n {
                assert!(vals[k - 1] >= vals[k] - 1e-12);
            }
        }
    }

    #[test]
    fn power_iteration_matches_jacobi() {
        let a = random_hermitian(5, 99);
        let (vals, vecs) = hermitian_eig(&a).unwrap();
        let v = dominant_eigenvector(&a, 200);
        let mut overlap = Complex64::new(0.0, 0.0);
        for i in 0..5 {
            overlap += vecs[[i, 0]].conj() * v[i];
        }
        assert!((overlap.norm() - 1.0).abs() < 1e-8, "overlap {}", overlap.norm());
        assert!(vals[0] > 0.0);
    }
}
