//! Dense complex matrix kernel.
//!
//! Everything downstream (operator subspaces, Choi matrices, the SDP solver's
//! block data) is carried by [`CMat`], a row-major dense matrix over `Complex64`
//! with an explicit JSON form. Decompositions are delegated to nalgebra; the
//! contract checks (Hermitian-ness, reconstruction residuals, rank cutoffs)
//! live here.

mod eig;
mod span;
mod svd;

pub use eig::{herm_eig, lambda_max, lambda_min, HermEig};
pub use span::{orthonormalize, span_closure, ProductRule, SpanClosure};
pub use svd::{op_norm, svd, Svd};

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::{self, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, SerializeStruct};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// Default absolute tolerance for residual checks.
pub const ATOL: f64 = 1e-10;
/// Default relative tolerance for residual checks.
pub const RTOL: f64 = 1e-10;
/// Relative singular-value cutoff for rank decisions.
pub const RANK_CUTOFF: f64 = 1e-9;

/// Absolute + relative tolerance pair; every contract check accepts one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tol {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { atol: ATOL, rtol: RTOL }
    }
}

impl Tol {
    pub fn new(atol: f64, rtol: f64) -> Self {
        Tol { atol, rtol }
    }

    /// Tolerance scaled to a quantity of magnitude `scale`: `atol + rtol * scale`.
    pub fn at(&self, scale: f64) -> f64 {
        self.atol + self.rtol * scale
    }
}

/// Dense complex matrix, row-major.
///
/// JSON form: `{"rows": p, "cols": q, "data": [[re, im], ...]}` with `data`
/// listing entries row by row. All file interchange uses this encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![Complex64::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Build from a row-major slice of entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(CMat { rows, cols, data })
    }

    /// Convenience constructor from real entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_row_major(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Matrix unit `E_{ij}`.
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = CMat::zeros(rows, cols);
        m[(i, j)] = Complex64::ONE;
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn scale(&self, c: Complex64) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| c * x).collect(),
        }
    }

    pub fn add(&self, other: &CMat) -> Result<CMat> {
        self.check_same_shape(other)?;
        Ok(CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &CMat) -> Result<CMat> {
        self.check_same_shape(other)?;
        Ok(CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: Complex64, other: &CMat) -> Result<CMat> {
        self.check_same_shape(other)?;
        Ok(CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + c * b).collect(),
        })
    }

    pub fn matmul(&self, other: &CMat) -> Result<CMat> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == Complex64::ZERO {
                    continue;
                }
                let row = k * other.cols;
                let orow = i * other.cols;
                for j in 0..other.cols {
                    out.data[orow + j] += a * other.data[row + j];
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.conj()).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> Complex64 {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius inner product `tr(A† B)`, conjugate-linear in `self`.
    pub fn inner(&self, other: &CMat) -> Result<Complex64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Hermitian defect `|A - A*|_F` (square matrices only).
    pub fn herm_defect(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = self[(i, j)] - self[(j, i)].conj();
                s += d.norm_sqr();
            }
        }
        s.sqrt()
    }

    /// `(A + A*)/2`.
    pub fn hermitize(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// Kronecker product; row index of the result is `(i, k) -> i * other.rows + k`.
    pub fn kron(&self, other: &CMat) -> CMat {
        let mut out = CMat::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == Complex64::ZERO {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Copy `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &CMat) -> Result<()> {
        if r0 + block.rows > self.rows || c0 + block.cols > self.cols {
            return Err(Error::ShapeMismatch(format!(
                "block {}x{} at ({}, {}) does not fit in {}x{}",
                block.rows, block.cols, r0, c0, self.rows, self.cols
            )));
        }
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
        Ok(())
    }

    /// Extract the `h x w` block with top-left corner at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, h: usize, w: usize) -> Result<CMat> {
        if r0 + h > self.rows || c0 + w > self.cols {
            return Err(Error::ShapeMismatch(format!(
                "block {}x{} at ({}, {}) out of bounds for {}x{}",
                h, w, r0, c0, self.rows, self.cols
            )));
        }
        Ok(CMat::from_fn(h, w, |i, j| self[(r0 + i, c0 + j)]))
    }

    /// `[[A, 0], [0, B]]`.
    pub fn direct_sum(&self, other: &CMat) -> CMat {
        let mut out = CMat::zeros(self.rows + other.rows, self.cols + other.cols);
        out.set_block(0, 0, self).expect("fits");
        out.set_block(self.rows, self.cols, other).expect("fits");
        out
    }

    /// Flatten row-major into a `1 x (rows*cols)` coordinate row.
    pub fn vec(&self) -> Vec<Complex64> {
        self.data.clone()
    }

    pub fn to_na(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }

    pub fn from_na(m: &DMatrix<Complex64>) -> CMat {
        CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    fn check_same_shape(&self, other: &CMat) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// Apply the matrix to a vector.
    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "matrix has {} columns, vector has {} entries",
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![Complex64::ZERO; self.rows];
        for i in 0..self.rows {
            let row = i * self.cols;
            out[i] = (0..self.cols).map(|j| self.data[row + j] * v[j]).sum();
        }
        Ok(out)
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

// JSON encoding: {"rows": p, "cols": q, "data": [[re, im], ...]} row-major.
impl Serialize for CMat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Entries<'a>(&'a [Complex64]);
        impl Serialize for Entries<'_> {
            fn serialize<S: Serializer>(
                &self,
                serializer: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
                for z in self.0 {
                    seq.serialize_element(&[z.re, z.im])?;
                }
                seq.end()
            }
        }
        let mut s = serializer.serialize_struct("CMat", 3)?;
        s.serialize_field("rows", &self.rows)?;
        s.serialize_field("cols", &self.cols)?;
        s.serialize_field("data", &Entries(&self.data))?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for CMat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            rows: usize,
            cols: usize,
            data: PairList,
        }
        struct PairList(Vec<Complex64>);
        impl<'de> Deserialize<'de> for PairList {
            fn deserialize<D: Deserializer<'de>>(
                deserializer: D,
            ) -> std::result::Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = PairList;
                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        f.write_str("a list of [re, im] pairs")
                    }
                    fn visit_seq<A: SeqAccess<'de>>(
                        self,
                        mut seq: A,
                    ) -> std::result::Result<PairList, A::Error> {
                        let mut out = Vec::with_capacity(seq.size_hint().unwrap_or(0));
                        while let Some(pair) = seq.next_element::<[f64; 2]>()? {
                            out.push(Complex64::new(pair[0], pair[1]));
                        }
                        Ok(PairList(out))
                    }
                }
                deserializer.deserialize_seq(V)
            }
        }
        let raw = Raw::deserialize(deserializer)?;
        CMat::from_row_major(raw.rows, raw.cols, raw.data.0)
            .map_err(|e| de::Error::custom(e.to_string()))
    }
}

/// Real part of the Frobenius pairing, the bilinear form used by SDP
/// constraint functionals.
pub fn re_inner(a: &CMat, b: &CMat) -> Result<f64> {
    Ok(a.inner(b)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn matmul_and_adjoint_agree_with_hand_computation() {
        let a = CMat::from_row_major(2, 2, vec![c(1.0, 1.0), c(0.0, 2.0), c(3.0, 0.0), c(1.0, -1.0)])
            .unwrap();
        let b = CMat::from_row_major(2, 1, vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let ab = a.matmul(&b).unwrap();
        // (1+i)*1 + 2i*i = 1+i-2 = -1+i ; 3*1 + (1-i)*i = 3 + i + 1 = 4+i
        assert!((ab[(0, 0)] - c(-1.0, 1.0)).norm() < 1e-15);
        assert!((ab[(1, 0)] - c(4.0, 1.0)).norm() < 1e-15);

        let aa = a.adjoint();
        assert!((aa[(0, 1)] - c(3.0, 0.0)).norm() < 1e-15);
        assert!((aa[(1, 0)] - c(0.0, -2.0)).norm() < 1e-15);
    }

    #[test]
    fn kron_index_order_is_row_outer() {
        let a = CMat::from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = CMat::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let k = a.kron(&b);
        // entry ((i,k),(j,l)) = a_ij * b_kl; check ((0,1),(1,0)) = a_01 * b_10 = 2
        assert!((k[(1, 2)] - c(2.0, 0.0)).norm() < 1e-15);
        assert_eq!(k.rows(), 4);
    }

    #[test]
    fn json_round_trip_preserves_entries() {
        let a = CMat::from_row_major(1, 2, vec![c(0.5, -0.25), c(2.0, 0.0)]).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert!(s.contains("\"rows\":1"));
        assert!(s.contains("[0.5,-0.25]"));
        let back: CMat = serde_json::from_str(&s).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn herm_defect_detects_non_hermitian() {
        let h = CMat::from_row_major(2, 2, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(2.0, 0.0)])
            .unwrap();
        assert!(h.herm_defect() > 1.0); // E12 entry i, E21 entry i: defect |i - (-i)| twice
        let h2 = h.hermitize();
        assert!(h2.herm_defect() < 1e-15);
    }
}
