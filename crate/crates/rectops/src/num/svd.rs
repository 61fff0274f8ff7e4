use super::CMat;
use crate::error::{Error, Result};

/// Singular value decomposition `A = U diag(sigma) V*` with descending sigma.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    /// Singular values, descending.
    pub sigma: Vec<f64>,
    /// `V*` (adjoint already applied), shape `k x cols`.
    pub vt: CMat,
}

impl Svd {
    /// Numerical rank at a relative cutoff: count of sigma > cutoff * sigma_max.
    pub fn rank(&self, rel_cutoff: f64) -> usize {
        let smax = self.sigma.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return 0;
        }
        self.sigma.iter().filter(|&&s| s > rel_cutoff * smax).count()
    }
}

/// Thin SVD via nalgebra, re-sorted descending.
pub fn svd(a: &CMat) -> Result<Svd> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(Svd { u: CMat::zeros(a.rows(), 0), sigma: vec![], vt: CMat::zeros(0, a.cols()) });
    }
    let dec = a.to_na().svd(true, true);
    let (u_na, vt_na) = match (dec.u, dec.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::NoConvergence),
    };
    let k = dec.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        dec.singular_values[j]
            .partial_cmp(&dec.singular_values[i])
            .expect("finite singular values")
    });
    let sigma: Vec<f64> = order.iter().map(|&i| dec.singular_values[i]).collect();
    let u = CMat::from_fn(u_na.nrows(), k, |i, c| u_na[(i, order[c])]);
    let vt = CMat::from_fn(k, vt_na.ncols(), |r, j| vt_na[(order[r], j)]);
    Ok(Svd { u, sigma, vt })
}

/// Operator (spectral) norm: the largest singular value.
pub fn op_norm(a: &CMat) -> Result<f64> {
    Ok(svd(a)?.sigma.first().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{herm_eig, Tol};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn singular_values_match_eig_of_gram_matrix() {
        // Oracle: sigma_i(A) = sqrt(lambda_i(A* A)).
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for (m, n) in [(3usize, 5usize), (4, 4), (6, 2)] {
            let a = CMat::from_fn(m, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let s = svd(&a).unwrap();
            let gram = a.adjoint().matmul(&a).unwrap();
            let eig = herm_eig(&gram, Tol::default()).unwrap();
            let mut expect: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
            expect.reverse();
            for (got, want) in s.sigma.iter().zip(expect.iter()) {
                assert!((got - want).abs() < 1e-10 * (1.0 + want));
            }
            // Reconstruction.
            let mut rec = CMat::zeros(m, n);
            for (k, &sv) in s.sigma.iter().enumerate() {
                for i in 0..m {
                    for j in 0..n {
                        let v = rec[(i, j)] + s.u[(i, k)] * sv * s.vt[(k, j)];
                        rec[(i, j)] = v;
                    }
                }
            }
            assert!(rec.sub(&a).unwrap().fro_norm() < 1e-10 * (1.0 + a.fro_norm()));
        }
    }

    #[test]
    fn op_norm_of_isometry_column_is_one() {
        let v = CMat::from_row_major(2, 1, vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        assert!((op_norm(&v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kron_norm_is_multiplicative() {
        // op_norm(kron(A,B)) = op_norm(A) * op_norm(B); 100 seeded trials.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let a = CMat::from_fn(2, 3, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let b = CMat::from_fn(3, 2, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let lhs = op_norm(&a.kron(&b)).unwrap();
            let rhs = op_norm(&a).unwrap() * op_norm(&b).unwrap();
            assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs), "kron norm defect: {lhs} vs {rhs}");
        }
    }
}
