//! The canonical matrix gauge on selfadjoint matrix spaces, unitization,
//! and the multiplication a unital completely positive idempotent induces on
//! its range.
//!
//! The gauge of a Hermitian matrix is the norm of its positive part —
//! equivalently its distance to the negative cone — evaluated here at every
//! amplification level.  Only this concrete rule is implemented; abstract
//! gauges compatible with the same order and norm are out of scope.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cpmaps;
use crate::error::{Error, Result};
use crate::num::{herm_eig, svd, CMat, Tol};
use crate::opspace::{MatrixMap, OpSubspace, SpaceKind};

/// Gauge evaluation rule.  A single canonical rule exists today; the enum
/// keeps the choice explicit in stored data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaugeRule {
    #[default]
    Canonical,
}

/// Norm of the positive part of a Hermitian matrix: `max(lambda_max, 0)`.
pub fn nu(x: &CMat) -> Result<f64> {
    let defect = x.sub(&x.adjoint())?.max_abs();
    if defect > 1e-9 {
        return Err(Error::NotHermitian { defect, tol: 1e-9 });
    }
    let eig = herm_eig(&x.hermitize(), Tol::default())?;
    Ok(eig.values.last().copied().unwrap_or(0.0).max(0.0))
}

/// A selfadjoint matrix space carrying the canonical gauge at every level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaugedSpace {
    space: OpSubspace,
    rule: GaugeRule,
}

impl GaugedSpace {
    /// Wrap a square-ambient space whose span is closed under the adjoint.
    pub fn new(space: OpSubspace) -> Result<Self> {
        if space.p() != space.q() {
            return Err(Error::InvalidInput("a gauged space needs a square ambient".into()));
        }
        for b in space.basis() {
            if !space.contains(&b.adjoint(), 1e-10)? {
                return Err(Error::InvalidInput(
                    "the span is not closed under the adjoint".into(),
                ));
            }
        }
        Ok(Self { space, rule: GaugeRule::Canonical })
    }

    pub fn space(&self) -> &OpSubspace {
        &self.space
    }

    pub fn rule(&self) -> GaugeRule {
        self.rule
    }

    /// Gauge of a Hermitian element of some amplification level of the
    /// space: `x` must be `kp x kp` with every `p x p` block in the span.
    pub fn nu(&self, x: &CMat) -> Result<f64> {
        let p = self.space.p();
        if x.rows() != x.cols() || x.rows() % p != 0 || x.rows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "gauge argument is {}x{}, need a square multiple of {p}",
                x.rows(),
                x.cols()
            )));
        }
        let k = x.rows() / p;
        for i in 0..k {
            for j in 0..k {
                let blk = x.block(i * p, j * p, p, p)?;
                if !self.space.contains(&blk, 1e-8)? {
                    return Err(Error::InvalidInput(format!(
                        "block ({i},{j}) lies outside the span"
                    )));
                }
            }
        }
        nu(x)
    }
}

/// Outcome of adjoining a unit to a selfadjoint space.
#[derive(Clone, Debug)]
pub struct Unitization {
    pub space: OpSubspace,
    /// The input already contained the identity and came back unchanged.
    pub already_unital: bool,
}

/// Adjoin the identity to a selfadjoint square-ambient space.  Elements of
/// the input keep their concrete matrices — and with them their gauge —
/// inside the result.  A space already containing the identity is returned
/// unchanged, flagged.
pub fn unitize(space: &OpSubspace) -> Result<Unitization> {
    if space.p() != space.q() {
        return Err(Error::InvalidInput("unitization needs a square ambient".into()));
    }
    for b in space.basis() {
        if !space.contains(&b.adjoint(), 1e-10)? {
            return Err(Error::InvalidInput("the span is not closed under the adjoint".into()));
        }
    }
    if space.unital(1e-8)? {
        return Ok(Unitization { space: space.clone(), already_unital: true });
    }
    let mut basis = space.basis().to_vec();
    basis.push(CMat::identity(space.p()));
    // The triple/algebra closure of the input need not survive adjoining
    // the unit, so the result is a plain space.
    let space = OpSubspace::new(space.p(), space.q(), basis, SpaceKind::Plain)?;
    Ok(Unitization { space, already_unital: false })
}

/// The multiplication `x . y = phi(x y)` a unital completely positive
/// idempotent `phi` induces on its range, which that product turns into a
/// C*-algebra under the ambient norm.
///
/// Construction validates idempotence and complete positivity once and
/// computes an orthonormal basis of the fixed-point space, against which
/// the factors of every product are membership-checked.
#[derive(Clone, Debug)]
pub struct CeProduct {
    phi: MatrixMap,
    range_basis: Vec<CMat>,
    side: usize,
}

impl CeProduct {
    pub fn new(phi: MatrixMap) -> Result<Self> {
        let choi = cpmaps::choi_of(&phi)?;
        let n = phi.domain().p();

        let mut idem_defect = 0.0f64;
        let mut transfer = CMat::zeros(n * n, n * n);
        for a in 0..n {
            for b in 0..n {
                let img = phi.eval(&CMat::unit(n, n, a, b))?;
                idem_defect = idem_defect.max(phi.eval(&img)?.sub(&img)?.max_abs());
                for c in 0..n {
                    for d in 0..n {
                        transfer[(c * n + d, a * n + b)] = img[(c, d)];
                    }
                }
            }
        }
        if idem_defect > 1e-9 {
            return Err(Error::NotIdempotent(idem_defect));
        }

        let asymmetry = choi.matrix.sub(&choi.matrix.adjoint())?.max_abs();
        if asymmetry > 1e-9 {
            return Err(Error::NotUcp(format!(
                "the map does not preserve adjoints (Choi asymmetry {asymmetry:.3e})"
            )));
        }
        let lmin = choi.lambda_min()?;
        let scale = 1.0 + choi.matrix.max_abs();
        if lmin < -1e-9 * scale {
            return Err(Error::NotUcp(format!(
                "the Choi matrix has eigenvalue {lmin:.3e}; the map is not completely positive"
            )));
        }
        let unit_defect = phi.eval(&CMat::identity(n))?.sub(&CMat::identity(n))?.max_abs();
        if unit_defect > 1e-9 {
            return Err(Error::NotUcp(format!(
                "the identity moves by {unit_defect:.3e}; the map is not unital"
            )));
        }

        // Fixed vectors of the transfer matrix = the range of the idempotent.
        let shifted = transfer.sub(&CMat::identity(n * n))?;
        let dec = svd(&shifted)?;
        let rank = dec.rank(1e-6);
        let range_basis = (rank..n * n)
            .map(|r| CMat::from_fn(n, n, |c, d| dec.vt[(r, c * n + d)].conj()))
            .collect();
        Ok(Self { phi, range_basis, side: n })
    }

    pub fn range_dim(&self) -> usize {
        self.range_basis.len()
    }

    pub fn range_basis(&self) -> &[CMat] {
        &self.range_basis
    }

    /// The multiplicative unit: the image of the identity.
    pub fn unit(&self) -> Result<CMat> {
        self.phi.eval(&CMat::identity(self.side))
    }

    fn range_distance(&self, x: &CMat) -> Result<f64> {
        let mut proj = CMat::zeros(self.side, self.side);
        for b in &self.range_basis {
            proj = proj.axpy(b.inner(x)?, b)?;
        }
        Ok(x.sub(&proj)?.fro_norm())
    }

    /// The induced product of two range elements.
    pub fn multiply(&self, x: &CMat, y: &CMat) -> Result<CMat> {
        for f in [x, y] {
            let dist = self.range_distance(f)?;
            if dist > 1e-9 * (1.0 + f.fro_norm()) {
                return Err(Error::OutsideRange(dist));
            }
        }
        self.phi.eval(&x.matmul(y)?)
    }

    /// Residuals of the algebra laws over the range basis: how far the unit,
    /// associativity, and the C*-norm identity are from holding.
    pub fn checks(&self) -> Result<CeChecks> {
        let e = self.unit()?;
        let mut unit_residual = 0.0f64;
        let mut associativity_residual = 0.0f64;
        let mut cstar_residual = 0.0f64;
        for x in &self.range_basis {
            unit_residual = unit_residual
                .max(self.multiply(&e, x)?.sub(x)?.max_abs())
                .max(self.multiply(x, &e)?.sub(x)?.max_abs());
        }
        for x in &self.range_basis {
            for y in &self.range_basis {
                for z in &self.range_basis {
                    let left = self.multiply(&self.multiply(x, y)?, z)?;
                    let right = self.multiply(x, &self.multiply(y, z)?)?;
                    associativity_residual =
                        associativity_residual.max(left.sub(&right)?.max_abs());
                }
            }
        }
        // The norm identity must hold for every element, so probe sums and
        // skewed sums of basis pairs along with the basis itself.
        let mut probes: Vec<CMat> = self.range_basis.clone();
        for (i, x) in self.range_basis.iter().enumerate() {
            for y in &self.range_basis[i + 1..] {
                probes.push(x.add(y)?);
                probes.push(x.axpy(Complex64::new(0.0, 1.0), y)?);
            }
        }
        for x in &probes {
            let sq = self.multiply(&x.adjoint(), x)?;
            let norm = crate::num::op_norm(x)?;
            cstar_residual =
                cstar_residual.max((crate::num::op_norm(&sq)? - norm * norm).abs());
        }
        Ok(CeChecks {
            range_dim: self.range_basis.len(),
            unit_residual,
            associativity_residual,
            cstar_residual,
        })
    }
}

/// Residual report for the induced algebra structure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CeChecks {
    pub range_dim: usize,
    pub unit_residual: f64,
    pub associativity_residual: f64,
    pub cstar_residual: f64,
}

/// One-shot form of the induced product: validate `phi`, check the factors,
/// return `phi(x y)`.
pub fn choi_effros_product(phi: &MatrixMap, x: &CMat, y: &CMat) -> Result<CMat> {
    CeProduct::new(phi.clone())?.multiply(x, y)
}

/// The conditional expectation of M_n onto its diagonal, the standard
/// example of a unital completely positive idempotent.
pub fn diagonal_expectation(n: usize) -> Result<MatrixMap> {
    let dom = OpSubspace::full(n, n);
    let values = (0..n)
        .flat_map(|i| {
            (0..n).map(move |j| {
                if i == j {
                    CMat::unit(n, n, i, i)
                } else {
                    CMat::zeros(n, n)
                }
            })
        })
        .collect();
    MatrixMap::new(dom, n, n, values)
}
