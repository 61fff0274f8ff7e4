//! Hermitian <-> real-symmetric translation.
//!
//! An n x n Hermitian block H = A + iB maps to the structured 2n x 2n real
//! symmetric matrix [[A, -B], [B, A]]; H is PSD iff its image is, and the
//! image subspace is invariant under conjugation by J = [[0, -I], [I, 0]].
//! Solver iterates need not stay structured: projecting onto the structured
//! subspace (averaging with the J-conjugate) preserves PSD-ness, every
//! structured functional, and the objective, so outputs are projected before
//! being handed back as complex matrices.

use crate::num::CMat;
use nalgebra::DMatrix;
use num_complex::Complex64;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// `[[Re H, -Im H], [Im H, Re H]]`.
pub fn realify(h: &CMat) -> DMatrix<f64> {
    let n = h.rows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            m[(i, j)] = z.re;
            m[(i, n + j)] = -z.im;
            m[(n + i, j)] = z.im;
            m[(n + i, n + j)] = z.re;
        }
    }
    m
}

/// Inverse of [`realify`] composed with the projection onto the structured
/// subspace; always returns an exactly Hermitian matrix.
pub fn derealify(m: &DMatrix<f64>) -> CMat {
    let n = m.nrows() / 2;
    let mut h = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (m[(i, j)] + m[(n + i, n + j)]);
            let im = 0.5 * (m[(n + i, j)] - m[(i, n + j)]);
            h[(i, j)] = Complex64::new(re, im);
        }
    }
    h.hermitize()
}

pub fn svec_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Pack a symmetric matrix into svec coordinates (diagonal first convention is
/// not used; entries run column-major over the lower triangle, off-diagonals
/// scaled by sqrt(2) so that the Euclidean inner product matches Frobenius).
pub fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            out[k] = if i == j { m[(i, j)] } else { SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)]) };
            k += 1;
        }
    }
}

pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            if i == j {
                m[(i, j)] = v[k];
            } else {
                let x = v[k] / SQRT2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{herm_eig, Tol};

    fn svec(m: &DMatrix<f64>) -> Vec<f64> {
        let mut out = vec![0.0; svec_dim(m.nrows())];
        svec_into(m, &mut out);
        out
    }

    #[test]
    fn realify_round_trip_and_spectrum_doubling() {
        let h = CMat::from_row_major(
            2,
            2,
            vec![
                Complex64::new(2.0, 0.0),
                Complex64::new(0.5, -1.0),
                Complex64::new(0.5, 1.0),
                Complex64::new(-1.0, 0.0),
            ],
        )
        .unwrap();
        let r = realify(&h);
        assert_eq!(r.nrows(), 4);
        let back = derealify(&r);
        assert!(back.sub(&h).unwrap().fro_norm() < 1e-15);

        // Each eigenvalue of H appears twice in the realification.
        let eh = herm_eig(&h, Tol::default()).unwrap();
        let er = r.symmetric_eigenvalues();
        let mut ev: Vec<f64> = er.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[0] - eh.values[0]).abs() < 1e-12);
        assert!((ev[1] - eh.values[0]).abs() < 1e-12);
        assert!((ev[2] - eh.values[1]).abs() < 1e-12);
        assert!((ev[3] - eh.values[1]).abs() < 1e-12);
    }

    #[test]
    fn svec_preserves_inner_products() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, -1.0, 4.0]);
        let va = svec(&a);
        let vb = svec(&b);
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        let fro = (a.transpose() * &b).trace();
        assert!((dot - fro).abs() < 1e-14);
        let back = smat(&va, 2);
        assert!((back - a).norm() < 1e-14);
    }
}
