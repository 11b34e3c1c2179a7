//! Small dense Hermitian linear algebra for per-bin beamformer solves.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

/// Lower-triangular `L` with `A = L Lᴴ`, or `None` when `A` is not
/// numerically positive definite.
pub(crate) fn cholesky(a: &Array2<Complex64>) -> Option<Array2<Complex64>> {
    let n = a.nrows();
    let mut l = Array2::<Complex64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]].re;
        for k in 0..j {
            diag -= l[[j, k]].norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut acc = a[[i, j]];
            for k in 0..j {
                acc -= l[[i, k]] * l[[j, k]].conj();
            }
            l[[i, j]] = acc / ljj;
        }
    }
    Some(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub(crate) fn forward_solve(l: &Array2<Complex64>, b: &Array1<Complex64>) -> Array1<Complex64> {
    let n = l.nrows();
    let mut x = Array1::<Complex64>::zeros(n);
    for i in 0..n {
        let mut acc = b[i];
        for k in 0..i {
            acc -= l[[i, k]] * x[k];
        }
        x[i] = acc / l[[i, i]];
    }
    x
}

/// Solves `Lᴴ x = b` for lower-triangular `L`.
pub(crate) fn adjoint_back_solve(l: &Array2<Complex64>, b: &Array1<Complex64>) -> Array1<Complex64> {
    let n = l.nrows();
    let mut x = Array1::<Complex64>::zeros(n);
    for i in (0..n).rev() {
        let mut acc = b[i];
        for k in i + 1..n {
            acc -= l[[k, i]].conj() * x[k];
        }
        x[i] = acc / l[[i, i]].conj();
    }
    x
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Returns eigenvalues (unsorted) and eigenvectors as columns.
pub(crate) fn hermitian_eigen(a: &Array2<Complex64>) -> (Vec<f64>, Array2<Complex64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Array2::<Complex64>::eye(n);
    let scale: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        return (vec![0.0; n], v);
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let theta = (m[[q, q]].re - m[[p, p]].re) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = diag(.., 1 @p, conj(phase) @q, ..) · real rotation
                let gpp = Complex64::new(c, 0.0);
                let gpq = Complex64::new(s, 0.0);
                let gqp = -s * phase.conj();
                let gqq = c * phase.conj();
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = mkp * gpp + mkq * gqp;
                    m[[k, q]] = mkp * gpq + mkq * gqq;
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = vkp * gpp + vkq * gqp;
                    v[[k, q]] = vkp * gpq + vkq * gqq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = gpp.conj() * mpk + gqp.conj() * mqk;
                    m[[q, k]] = gpq.conj() * mpk + gqq.conj() * mqk;
                }
                m[[p, q]] = Complex64::default();
                m[[q, p]] = Complex64::default();
                m[[p, p]] = Complex64::new(m[[p, p]].re, 0.0);
                m[[q, q]] = Complex64::new(m[[q, q]].re, 0.0);
            }
        }
    }
    ((0..n).map(|i| m[[i, i]].re).collect(), v)
}

/// Solves the real symmetric positive definite system `A x = b`.
pub(crate) fn spd_solve(a: &Array2<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut acc = a[[i, j]];
            for k in 0..j {
                acc -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = acc / ljj;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut acc = b[i];
        for k in 0..i {
            acc -= l[[i, k]] * y[k];
        }
        y[i] = acc / l[[i, i]];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        for k in i + 1..n {
            acc -= l[[k, i]] * x[k];
        }
        x[i] = acc / l[[i, i]];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> Array2<Complex64> {
        let a = Array2::from_shape_fn((n, n), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let ah = a.t().mapv(|z| z.conj());
        (&a + &ah).mapv(|z| z * 0.5)
    }

    #[test]
    fn jacobi_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [1, 2, 3, 5, 8, 16] {
            let a = random_hermitian(&mut rng, n);
            let (vals, vecs) = hermitian_eigen(&a);
            for (i, lambda) in vals.iter().enumerate() {
                let x = vecs.column(i).to_owned();
                let ax = a.dot(&x);
                for k in 0..n {
                    assert!((ax[k] - x[k] * *lambda).norm() < 1e-10, "n={n}");
                }
                let norm: f64 = x.iter().map(|z| z.norm_sqr()).sum();
                assert!((norm - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = Array2::from_shape_fn((4, 4), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let a = b.dot(&b.t().mapv(|z| z.conj())) + Array2::<Complex64>::eye(4);
        let l = cholesky(&a).unwrap();
        let back = l.dot(&l.t().mapv(|z| z.conj()));
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
        let rhs = Array1::from_shape_fn(4, |i| Complex64::new(i as f64, 1.0));
        let x = adjoint_back_solve(&l, &forward_solve(&l, &rhs));
        let ax = a.dot(&x);
        for k in 0..4 {
            assert!((ax[k] - rhs[k]).norm() < 1e-10);
        }
        assert!(cholesky(&Array2::zeros((2, 2))).is_none());
    }

    #[test]
    fn spd_solve_small() {
        let a = ndarray::array![[4.0, 1.0], [1.0, 3.0]];
        let x = spd_solve(&a, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
    }
}
