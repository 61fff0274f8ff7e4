use super::{CMat, Tol};
use crate::error::{Error, Result};

/// Spectral decomposition of a Hermitian matrix: `A = U diag(values) U*`.
#[derive(Debug, Clone)]
pub struct HermEig {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unitary whose columns are the matching eigenvectors.
    pub vectors: CMat,
}

impl HermEig {
    pub fn lambda_min(&self) -> f64 {
        *self.values.first().expect("nonempty spectrum")
    }

    pub fn lambda_max(&self) -> f64 {
        *self.values.last().expect("nonempty spectrum")
    }

    /// Reconstruction residual `|A - U diag U*|_F`.
    pub fn residual(&self, a: &CMat) -> f64 {
        let u = &self.vectors;
        let mut rec = CMat::zeros(a.rows(), a.cols());
        for (k, &lam) in self.values.iter().enumerate() {
            for i in 0..a.rows() {
                let ui = u[(i, k)];
                for j in 0..a.cols() {
                    let v = rec[(i, j)] + ui * lam * u[(j, k)].conj();
                    rec[(i, j)] = v;
                }
            }
        }
        rec.sub(a).map(|d| d.fro_norm()).unwrap_or(f64::INFINITY)
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues.
///
/// Rejects inputs whose Hermitian defect exceeds `tol` scaled by `1 + |A|_F`;
/// the decomposition itself runs on `(A + A*)/2` so roundoff-level asymmetry
/// never corrupts the spectrum.
pub fn herm_eig(a: &CMat, tol: Tol) -> Result<HermEig> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!("herm_eig needs square input, got {}x{}", a.rows(), a.cols())));
    }
    if a.rows() == 0 {
        return Ok(HermEig { values: vec![], vectors: CMat::zeros(0, 0) });
    }
    let scale = 1.0 + a.fro_norm();
    let defect = a.herm_defect();
    let bound = tol.at(scale - 1.0).max(tol.atol * scale);
    if defect > bound {
        return Err(Error::NotHermitian { defect, tol: bound });
    }
    let h = a.hermitize();
    let se = h.to_na().symmetric_eigen();
    let n = a.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).expect("finite eigenvalues"));
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |i, k| se.eigenvectors[(i, order[k])]);
    let out = HermEig { values, vectors };
    let res = out.residual(&h);
    if !res.is_finite() || res > 1e-10 * (1.0 + h.fro_norm()) {
        return Err(Error::NoConvergence);
    }
    Ok(out)
}

/// Smallest eigenvalue of a Hermitian matrix (helper for PSD checks).
pub fn lambda_min(a: &CMat, tol: Tol) -> Result<f64> {
    Ok(herm_eig(a, tol)?.lambda_min())
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn lambda_max(a: &CMat, tol: Tol) -> Result<f64> {
    Ok(herm_eig(a, tol)?.lambda_max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    
    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // Oracle: eigenvalues of [[a, b],[conj(b), d]] from the characteristic
    // polynomial, lambda = (a+d)/2 -/+ sqrt(((a-d)/2)^2 + |b|^2).
    fn two_by_two_spectrum(a: f64, b: Complex64, d: f64) -> (f64, f64) {
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        (mid - rad, mid + rad)
    }

    #[test]
    fn pauli_x_spectrum_is_plus_minus_one() {
        let x = CMat::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let e = herm_eig(&x, Tol::default()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complex_two_by_two_matches_characteristic_polynomial() {
        let b = c(0.3, -0.7);
        let a = CMat::from_row_major(2, 2, vec![c(1.2, 0.0), b, b.conj(), c(-0.4, 0.0)]).unwrap();
        let e = herm_eig(&a, Tol::default()).unwrap();
        let (lo, hi) = two_by_two_spectrum(1.2, b, -0.4);
        assert!((e.values[0] - lo).abs() < 1e-12);
        assert!((e.values[1] - hi).abs() < 1e-12);
        assert!(e.residual(&a) < 1e-12);
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let a = CMat::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(herm_eig(&a, Tol::default()), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn random_hermitian_reconstruction_and_unitarity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [3usize, 5, 8] {
            let raw = CMat::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let h = raw.hermitize();
            let e = herm_eig(&h, Tol::default()).unwrap();
            assert!(e.residual(&h) <= 1e-10 * (1.0 + h.fro_norm()));
            let u = &e.vectors;
            let gram = u.adjoint().matmul(u).unwrap();
            let defect = gram.sub(&CMat::identity(n)).unwrap().fro_norm();
            assert!(defect < 1e-10, "eigenvector columns not orthonormal: {defect}");
            for w in e.values.windows(2) {
                assert!(w[0] <= w[1] + 1e-14);
            }
        }
    }
}
