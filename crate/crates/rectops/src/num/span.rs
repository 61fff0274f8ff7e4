use super::{svd, CMat, RANK_CUTOFF};
use crate::error::{Error, Result};

/// Which product rule a span closure iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductRule {
    /// `x y* z` on p x q matrices (ternary rule of a TRO).
    Triple,
    /// `x y` on square matrices.
    Binary,
    /// `x y` together with `x*` on square matrices (*-algebra closure).
    BinaryStar,
}

/// Result of orthonormalizing a family of matrices.
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    /// Orthonormal basis (Frobenius inner product) of the span.
    pub basis: Vec<CMat>,
    /// Coordinates of the inputs over `basis`: `input_i = sum_k coords[(i,k)] basis_k`.
    pub coords: CMat,
    /// Numerical rank decisions' scale: the largest singular value of the stack.
    pub sigma_max: f64,
}

/// Orthonormal basis of the span of `mats` via an SVD of the stacked
/// coefficient matrix; directions with singular value `<= rel_cutoff * sigma_max`
/// are treated as numerically absent.
pub fn orthonormalize(mats: &[CMat], rel_cutoff: f64) -> Result<Orthonormalized> {
    if mats.is_empty() {
        return Err(Error::InvalidInput("cannot orthonormalize an empty family".into()));
    }
    let (p, q) = (mats[0].rows(), mats[0].cols());
    for m in mats {
        if m.rows() != p || m.cols() != q {
            return Err(Error::ShapeMismatch(format!(
                "mixed shapes in family: {}x{} vs {}x{}",
                p,
                q,
                m.rows(),
                m.cols()
            )));
        }
    }
    let stack = CMat::from_fn(mats.len(), p * q, |i, j| mats[i].data()[j]);
    let dec = svd(&stack)?;
    let sigma_max = dec.sigma.first().copied().unwrap_or(0.0);
    let rank = dec.rank(rel_cutoff);
    if rank == 0 {
        return Err(Error::InvalidInput("family spans only the zero matrix".into()));
    }
    let mut basis = Vec::with_capacity(rank);
    for r in 0..rank {
        basis.push(CMat::from_fn(p, q, |i, j| dec.vt[(r, i * q + j)]));
    }
    let coords = CMat::from_fn(mats.len(), rank, |i, k| dec.u[(i, k)] * dec.sigma[k]);
    Ok(Orthonormalized { basis, coords, sigma_max })
}

/// Result of a span closure.
#[derive(Debug, Clone)]
pub struct SpanClosure {
    pub basis: Vec<CMat>,
    /// Number of enlargement passes until stability.
    pub passes: usize,
}

/// Smallest subspace containing `gens` and closed under `rule`, as an
/// orthonormal basis. Rank decisions use `rel_cutoff` against the largest
/// singular value of each enlargement stack.
pub fn span_closure(gens: &[CMat], rule: ProductRule, rel_cutoff: f64) -> Result<SpanClosure> {
    let cutoff = if rel_cutoff > 0.0 { rel_cutoff } else { RANK_CUTOFF };
    let start = orthonormalize(gens, cutoff)?;
    let (p, q) = (start.basis[0].rows(), start.basis[0].cols());
    match rule {
        ProductRule::Binary | ProductRule::BinaryStar => {
            if p != q {
                return Err(Error::ShapeMismatch(format!(
                    "binary product rules need square matrices, got {}x{}",
                    p, q
                )));
            }
        }
        ProductRule::Triple => {}
    }
    let ambient = p * q;
    let mut basis = start.basis;
    let mut passes = 0usize;
    loop {
        passes += 1;
        if passes > ambient + 2 {
            return Err(Error::NumericalBreakdown("span closure failed to stabilize".into()));
        }
        let mut family = basis.clone();
        match rule {
            ProductRule::Triple => {
                for x in &basis {
                    for y in &basis {
                        let xy = x.matmul(&y.adjoint())?;
                        for z in &basis {
                            family.push(xy.matmul(z)?);
                        }
                    }
                }
            }
            ProductRule::Binary => {
                for x in &basis {
                    for y in &basis {
                        family.push(x.matmul(y)?);
                    }
                }
            }
            ProductRule::BinaryStar => {
                for x in &basis {
                    family.push(x.adjoint());
                    for y in &basis {
                        family.push(x.matmul(y)?);
                    }
                }
            }
        }
        let next = orthonormalize(&family, cutoff)?;
        if next.basis.len() > ambient {
            return Err(Error::DimensionBlowup { got: next.basis.len(), ambient });
        }
        if next.basis.len() == basis.len() {
            return Ok(SpanClosure { basis: next.basis, passes });
        }
        basis = next.basis;
    }
}
