//! Concrete operator spaces: subspaces of p x q matrices, ternary closures,
//! linking algebras, the two-corner system a rectangular space generates, and
//! the matrix pairings used to talk about levels.
//!
//! A subspace always carries an orthonormal basis.  User-supplied spanning
//! sets are orthonormalized on ingestion and the change of basis is retained,
//! so values handed in (or reported) against the user's original list stay
//! meaningful.

use crate::error::{Error, Result};
use crate::num::{
    herm_eig, op_norm, orthonormalize, span_closure, svd, CMat, ProductRule, Tol, RANK_CUTOFF,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Plain,
    Tro,
    CStar,
}

/// A linear subspace of the p x q complex matrices.
#[derive(Clone, Debug)]
pub struct OpSubspace {
    p: usize,
    q: usize,
    basis: Vec<CMat>,
    kind: SpaceKind,
    /// Row i expresses the i-th user matrix over `basis`; identity for
    /// internally constructed spaces.
    user_coords: CMat,
}

impl OpSubspace {
    /// Ingest a spanning list.  The list must be linearly independent — a
    /// dependent "basis" would make value lists against it ambiguous.
    pub fn new(p: usize, q: usize, mats: Vec<CMat>, kind: SpaceKind) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidInput("ambient shape must be nonzero".into()));
        }
        if mats.is_empty() {
            let space = Self {
                p,
                q,
                basis: Vec::new(),
                kind,
                user_coords: CMat::zeros(0, 0),
            };
            space.check_kind()?;
            return Ok(space);
        }
        for (i, m) in mats.iter().enumerate() {
            if m.rows() != p || m.cols() != q {
                return Err(Error::ShapeMismatch(format!(
                    "basis element {i} is {}x{}, ambient is {p}x{q}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        let ortho = orthonormalize(&mats, RANK_CUTOFF)?;
        if ortho.basis.len() < mats.len() {
            return Err(Error::InvalidInput(format!(
                "basis list is linearly dependent (rank {} of {})",
                ortho.basis.len(),
                mats.len()
            )));
        }
        let space = Self {
            p,
            q,
            basis: ortho.basis,
            kind,
            user_coords: ortho.coords,
        };
        space.check_kind()?;
        Ok(space)
    }

    /// Adopt an already-orthonormal basis verbatim, keeping its order.  Used
    /// for internally built spaces whose index layout carries meaning; the
    /// orthonormality claim is verified.
    pub fn from_orthonormal(p: usize, q: usize, basis: Vec<CMat>, kind: SpaceKind) -> Result<Self> {
        for (i, bi) in basis.iter().enumerate() {
            if bi.rows() != p || bi.cols() != q {
                return Err(Error::ShapeMismatch(format!(
                    "basis element {i} is {}x{}, ambient is {p}x{q}",
                    bi.rows(),
                    bi.cols()
                )));
            }
            for (j, bj) in basis.iter().enumerate().skip(i) {
                let g = bi.inner(bj)?;
                let want = if i == j { 1.0 } else { 0.0 };
                if (g - Complex64::new(want, 0.0)).norm() > 1e-8 {
                    return Err(Error::InvalidInput(format!(
                        "basis is not orthonormal at pair ({i},{j})"
                    )));
                }
            }
        }
        let d = basis.len();
        let space = Self { p, q, basis, kind, user_coords: CMat::identity(d) };
        space.check_kind()?;
        Ok(space)
    }

    /// All of M_{p,q}, with the matrix units as (exactly orthonormal) basis.
    pub fn full(p: usize, q: usize) -> Self {
        let mut basis = Vec::with_capacity(p * q);
        for i in 0..p {
            for j in 0..q {
                basis.push(CMat::unit(p, q, i, j));
            }
        }
        Self {
            p,
            q,
            basis,
            kind: SpaceKind::Plain,
            user_coords: CMat::identity(p * q),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    /// Change of basis: row i gives the i-th ingested matrix over [`basis`].
    pub fn user_coords(&self) -> &CMat {
        &self.user_coords
    }

    /// Orthogonal projection coordinates and the out-of-space residual.
    pub fn project(&self, x: &CMat) -> Result<(Vec<Complex64>, f64)> {
        if x.rows() != self.p || x.cols() != self.q {
            return Err(Error::ShapeMismatch(format!(
                "element is {}x{}, space ambient is {}x{}",
                x.rows(),
                x.cols(),
                self.p,
                self.q
            )));
        }
        let mut coords = Vec::with_capacity(self.basis.len());
        let mut rem = x.clone();
        for b in &self.basis {
            let c = b.inner(x)?;
            coords.push(c);
            rem = rem.axpy(-c, b)?;
        }
        Ok((coords, rem.fro_norm()))
    }

    pub fn contains(&self, x: &CMat, tol: f64) -> Result<bool> {
        let (_, r) = self.project(x)?;
        Ok(r <= tol * (1.0 + x.fro_norm()))
    }

    /// Max membership residual of `other`'s basis relative to this space.
    pub fn residual_of_space(&self, other: &OpSubspace) -> Result<f64> {
        let mut worst = 0.0f64;
        for b in &other.basis {
            let (_, r) = self.project(b)?;
            worst = worst.max(r);
        }
        Ok(worst)
    }

    pub fn from_coords(&self, coords: &[Complex64]) -> Result<CMat> {
        if coords.len() != self.basis.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates for a dimension-{} space",
                coords.len(),
                self.basis.len()
            )));
        }
        let mut acc = CMat::zeros(self.p, self.q);
        for (c, b) in coords.iter().zip(&self.basis) {
            acc = acc.axpy(*c, b)?;
        }
        Ok(acc)
    }

    /// For square spaces: whether the identity lies in the span.
    pub fn unital(&self, tol: f64) -> Result<bool> {
        if self.p != self.q {
            return Err(Error::InvalidInput("unitality needs a square ambient".into()));
        }
        self.contains(&CMat::identity(self.p), tol)
    }

    fn check_kind(&self) -> Result<()> {
        match self.kind {
            SpaceKind::Plain => Ok(()),
            SpaceKind::Tro => {
                for x in &self.basis {
                    for y in &self.basis {
                        for z in &self.basis {
                            let t = x.matmul(&y.adjoint())?.matmul(z)?;
                            let (_, r) = self.project(&t)?;
                            if r > 1e-9 * (1.0 + t.fro_norm()) {
                                return Err(Error::InvalidInput(format!(
                                    "kind=tro but a triple product leaves the span (residual {r:.3e})"
                                )));
                            }
                        }
                    }
                }
                Ok(())
            }
            SpaceKind::CStar => {
                if self.p != self.q {
                    return Err(Error::InvalidInput(
                        "kind=cstar requires a square ambient".into(),
                    ));
                }
                for x in &self.basis {
                    let adj = x.adjoint();
                    let (_, r) = self.project(&adj)?;
                    if r > 1e-9 * (1.0 + adj.fro_norm()) {
                        return Err(Error::InvalidInput(
                            "kind=cstar but not closed under adjoints".into(),
                        ));
                    }
                    for y in &self.basis {
                        let prod = x.matmul(y)?;
                        let (_, r) = self.project(&prod)?;
                        if r > 1e-9 * (1.0 + prod.fro_norm()) {
                            return Err(Error::InvalidInput(
                                "kind=cstar but not closed under products".into(),
                            ));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// Wire format: the basis list is the orthonormal internal one.
#[derive(Serialize, Deserialize)]
struct OpSubspaceData {
    p: usize,
    q: usize,
    basis: Vec<CMat>,
    kind: SpaceKind,
}

impl Serialize for OpSubspace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OpSubspaceData {
            p: self.p,
            q: self.q,
            basis: self.basis.clone(),
            kind: self.kind,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OpSubspace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let data = OpSubspaceData::deserialize(d)?;
        OpSubspace::new(data.p, data.q, data.basis, data.kind).map_err(serde::de::Error::custom)
    }
}

/// A linear map from a stored subspace into the n x m matrices, given by its
/// values on the orthonormal basis.
#[derive(Clone, Debug)]
pub struct MatrixMap {
    domain: OpSubspace,
    n: usize,
    m: usize,
    values: Vec<CMat>,
}

/// Wire format of a map: values listed against the basis order of the space
/// file it travels with.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixMapData {
    pub n: usize,
    pub m: usize,
    pub values: Vec<CMat>,
}

impl MatrixMap {
    /// Values are given against the domain's user basis (the list that was
    /// ingested), and converted to the internal orthonormal basis here.
    pub fn new(domain: OpSubspace, n: usize, m: usize, user_values: Vec<CMat>) -> Result<Self> {
        let d = domain.dim();
        if user_values.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a dimension-{d} domain",
                user_values.len()
            )));
        }
        for (i, v) in user_values.iter().enumerate() {
            if v.rows() != n || v.cols() != m {
                return Err(Error::ShapeMismatch(format!(
                    "value {i} is {}x{}, target is {n}x{m}",
                    v.rows(),
                    v.cols()
                )));
            }
        }
        if d == 0 {
            return Ok(Self { domain, n, m, values: Vec::new() });
        }
        // Solve user_coords * W = V row-block-wise: stack each value as a row
        // of length n*m and invert the (small, well-conditioned) coefficient
        // matrix.
        let c = domain.user_coords().to_na();
        let mut v = nalgebra::DMatrix::<Complex64>::zeros(d, n * m);
        for (i, val) in user_values.iter().enumerate() {
            for (k, z) in val.data().iter().enumerate() {
                v[(i, k)] = *z;
            }
        }
        let lu = c.lu();
        let w = lu
            .solve(&v)
            .ok_or_else(|| Error::NumericalBreakdown("change-of-basis solve failed".into()))?;
        let values = (0..d)
            .map(|k| {
                CMat::from_row_major(n, m, w.row(k).iter().copied().collect()).unwrap()
            })
            .collect();
        Ok(Self { domain, n, m, values })
    }

    /// Construct directly from values on the orthonormal basis.
    pub fn from_ortho_values(domain: OpSubspace, n: usize, m: usize, values: Vec<CMat>) -> Result<Self> {
        if values.len() != domain.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a dimension-{} domain",
                values.len(),
                domain.dim()
            )));
        }
        for v in &values {
            if v.rows() != n || v.cols() != m {
                return Err(Error::ShapeMismatch("value shape mismatch".into()));
            }
        }
        Ok(Self { domain, n, m, values })
    }

    /// The inclusion X -> M_{p,q}.
    pub fn inclusion(domain: OpSubspace) -> Self {
        let values = domain.basis().to_vec();
        let (n, m) = (domain.p(), domain.q());
        Self { domain, n, m, values }
    }

    pub fn zero(domain: OpSubspace, n: usize, m: usize) -> Self {
        let values = vec![CMat::zeros(n, m); domain.dim()];
        Self { domain, n, m, values }
    }

    pub fn domain(&self) -> &OpSubspace {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Values on the orthonormal basis.
    pub fn ortho_values(&self) -> &[CMat] {
        &self.values
    }

    /// Values against the user's original basis list.
    pub fn user_values(&self) -> Result<Vec<CMat>> {
        let c = &self.domain.user_coords;
        let d = self.domain.dim();
        let mut out = Vec::with_capacity(d);
        for i in 0..d {
            let mut acc = CMat::zeros(self.n, self.m);
            for k in 0..d {
                acc = acc.axpy(c[(i, k)], &self.values[k])?;
            }
            out.push(acc);
        }
        Ok(out)
    }

    pub fn to_data(&self) -> Result<MatrixMapData> {
        Ok(MatrixMapData { n: self.n, m: self.m, values: self.user_values()? })
    }

    pub fn from_data(domain: OpSubspace, data: MatrixMapData) -> Result<Self> {
        Self::new(domain, data.n, data.m, data.values)
    }

    pub fn eval_coords(&self, coords: &[Complex64]) -> Result<CMat> {
        if coords.len() != self.values.len() {
            return Err(Error::ShapeMismatch("coordinate length mismatch".into()));
        }
        let mut acc = CMat::zeros(self.n, self.m);
        for (c, v) in coords.iter().zip(&self.values) {
            acc = acc.axpy(*c, v)?;
        }
        Ok(acc)
    }

    /// Evaluate on a concrete element of the ambient; the element must lie in
    /// the domain up to membership tolerance.
    pub fn eval(&self, x: &CMat) -> Result<CMat> {
        let (coords, resid) = self.domain.project(x)?;
        if resid > 1e-8 * (1.0 + x.fro_norm()) {
            return Err(Error::InvalidInput(format!(
                "element lies outside the domain (residual {resid:.3e})"
            )));
        }
        self.eval_coords(&coords)
    }

    pub fn scale(&self, factor: f64) -> Self {
        let values = self
            .values
            .iter()
            .map(|v| v.scale(Complex64::new(factor, 0.0)))
            .collect();
        Self { domain: self.domain.clone(), n: self.n, m: self.m, values }
    }

    /// Largest value norm over the orthonormal basis; a cheap scale probe.
    pub fn max_value_norm(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for v in &self.values {
            worst = worst.max(op_norm(v)?);
        }
        Ok(worst)
    }

    /// Rank-based nondegeneracy: the value column spans fill the target
    /// column space and the value row spans fill the target row space.
    pub fn nondegenerate(&self) -> Result<bool> {
        if self.values.is_empty() {
            return Ok(self.n == 0 && self.m == 0);
        }
        // Columns: stack values side by side (n x m*d).
        let d = self.values.len();
        let mut cols = CMat::zeros(self.n, self.m * d);
        let mut rows = CMat::zeros(self.n * d, self.m);
        for (k, v) in self.values.iter().enumerate() {
            cols.set_block(0, k * self.m, v)?;
            rows.set_block(k * self.n, 0, v)?;
        }
        let col_rank = svd(&cols)?.rank(RANK_CUTOFF);
        let row_rank = svd(&rows)?.rank(RANK_CUTOFF);
        Ok(col_rank == self.n && row_rank == self.m)
    }
}

/// Smallest ternary-closed subspace containing X.
pub fn tro_generate(x: &OpSubspace) -> Result<OpSubspace> {
    if x.dim() == 0 {
        return OpSubspace::new(x.p(), x.q(), Vec::new(), SpaceKind::Tro);
    }
    let closure = span_closure(x.basis(), ProductRule::Triple, RANK_CUTOFF)?;
    OpSubspace::from_orthonormal(x.p(), x.q(), closure.basis, SpaceKind::Tro)
}

/// The two corner C*-algebras generated by a ternary-closed space: the span
/// closures of {x y*} acting on the left side and {x* y} on the right.
pub fn linking_blocks(t: &OpSubspace) -> Result<(OpSubspace, OpSubspace)> {
    if t.kind() != SpaceKind::Tro {
        return Err(Error::InvalidInput(
            "linking blocks are defined for ternary-closed spaces (kind=tro)".into(),
        ));
    }
    if t.dim() == 0 {
        let left = OpSubspace::new(t.p(), t.p(), Vec::new(), SpaceKind::CStar)?;
        let right = OpSubspace::new(t.q(), t.q(), Vec::new(), SpaceKind::CStar)?;
        return Ok((left, right));
    }
    let mut left_gens = Vec::new();
    let mut right_gens = Vec::new();
    for x in t.basis() {
        for y in t.basis() {
            left_gens.push(x.matmul(&y.adjoint())?);
            right_gens.push(x.adjoint().matmul(y)?);
        }
    }
    let left = span_closure(&left_gens, ProductRule::BinaryStar, RANK_CUTOFF)?;
    let right = span_closure(&right_gens, ProductRule::BinaryStar, RANK_CUTOFF)?;
    Ok((
        OpSubspace::from_orthonormal(t.p(), t.p(), left.basis, SpaceKind::CStar)?,
        OpSubspace::from_orthonormal(t.q(), t.q(), right.basis, SpaceKind::CStar)?,
    ))
}

/// The operator system a rectangular space spans inside M_{p+q}: scalars on
/// the two diagonal corners, X in the upper-right corner, X* in the
/// lower-left.
#[derive(Clone, Debug)]
pub struct PaulsenSystem {
    pub space: OpSubspace,
    pub p: usize,
    pub q: usize,
    /// Dimension of the generating rectangular space.
    pub d: usize,
}

impl PaulsenSystem {
    /// Basis layout inside `space`: index 0 is the normalized upper scalar
    /// corner, index 1 the lower one, 2..2+d the embedded basis of X,
    /// 2+d..2+2d the embedded adjoints.
    pub fn upper_scalar_index(&self) -> usize {
        0
    }

    pub fn lower_scalar_index(&self) -> usize {
        1
    }

    pub fn corner_index(&self, k: usize) -> usize {
        2 + k
    }

    pub fn adjoint_corner_index(&self, k: usize) -> usize {
        2 + self.d + k
    }

    /// Assemble [[lambda I_p, x], [y*, mu I_q]] from a corner element and the
    /// adjoint-corner element y (both p x q).
    pub fn embed(&self, lambda: Complex64, x: &CMat, y: &CMat, mu: Complex64) -> Result<CMat> {
        if x.rows() != self.p || x.cols() != self.q || y.rows() != self.p || y.cols() != self.q {
            return Err(Error::ShapeMismatch("corner shapes must be p x q".into()));
        }
        let n = self.p + self.q;
        let mut s = CMat::zeros(n, n);
        for i in 0..self.p {
            s[(i, i)] = lambda;
        }
        for j in 0..self.q {
            s[(self.p + j, self.p + j)] = mu;
        }
        s.set_block(0, self.p, x)?;
        s.set_block(self.p, 0, &y.adjoint())?;
        Ok(s)
    }

    /// Split an element of the system into (lambda, x, y, mu, residual),
    /// where residual measures the part outside the system.
    pub fn decompose(&self, s: &CMat) -> Result<(Complex64, CMat, CMat, Complex64, f64)> {
        let n = self.p + self.q;
        if s.rows() != n || s.cols() != n {
            return Err(Error::ShapeMismatch(format!(
                "element is {}x{}, system ambient is {n}x{n}",
                s.rows(),
                s.cols()
            )));
        }
        let (coords, resid) = self.space.project(s)?;
        let lambda = coords[0] / Complex64::new((self.p as f64).sqrt(), 0.0);
        let mu = coords[1] / Complex64::new((self.q as f64).sqrt(), 0.0);
        let x_space = &coords[2..2 + self.d];
        let y_space = &coords[2 + self.d..2 + 2 * self.d];
        let mut x = CMat::zeros(self.p, self.q);
        let mut y = CMat::zeros(self.p, self.q);
        for k in 0..self.d {
            let b = self.space.basis()[self.corner_index(k)].block(0, self.p, self.p, self.q)?;
            x = x.axpy(x_space[k], &b)?;
            let badj = self.space.basis()[self.adjoint_corner_index(k)]
                .block(self.p, 0, self.q, self.p)?;
            y = y.axpy(y_space[k].conj(), &badj.adjoint())?;
        }
        Ok((lambda, x, y, mu, resid))
    }
}

/// Build the operator system spanned by the scalar diagonal corners together
/// with X and its adjoint copy.
pub fn paulsen_space(x: &OpSubspace) -> Result<PaulsenSystem> {
    let (p, q, d) = (x.p(), x.q(), x.dim());
    let n = p + q;
    let sp = (p as f64).sqrt();
    let sq = (q as f64).sqrt();
    let mut basis = Vec::with_capacity(2 * d + 2);

    let mut dk = CMat::zeros(n, n);
    for i in 0..p {
        dk[(i, i)] = Complex64::new(1.0 / sp, 0.0);
    }
    basis.push(dk);
    let mut dh = CMat::zeros(n, n);
    for j in 0..q {
        dh[(p + j, p + j)] = Complex64::new(1.0 / sq, 0.0);
    }
    basis.push(dh);

    for b in x.basis() {
        let mut upper = CMat::zeros(n, n);
        upper.set_block(0, p, b)?;
        basis.push(upper);
    }
    for b in x.basis() {
        let mut lower = CMat::zeros(n, n);
        lower.set_block(p, 0, &b.adjoint())?;
        basis.push(lower);
    }

    // The four families have disjoint supports, so with an orthonormal basis
    // of X the list is orthonormal and the dimension is exactly 2d + 2.  A
    // rank drop here signals corrupted ingestion rather than a legal input.
    let check = orthonormalize(&basis, RANK_CUTOFF)?;
    if check.basis.len() != 2 * d + 2 {
        return Err(Error::DegenerateOverlap);
    }
    let space = OpSubspace::from_orthonormal(n, n, basis, SpaceKind::Plain)?;
    Ok(PaulsenSystem { space, p, q, d })
}

/// Extend a map on X to the unital selfadjoint map on the two-corner system:
/// scalars go to scalars, the upper corner through the map, the lower corner
/// through the adjoint of the map.
pub fn paulsen_map(phi: &MatrixMap) -> Result<(PaulsenSystem, MatrixMap)> {
    let x = phi.domain();
    let system = paulsen_space(x)?;
    let (p, q, d) = (system.p, system.q, system.d);
    let (n, m) = (phi.n(), phi.m());
    let t = n + m;
    let sp = (p as f64).sqrt();
    let sq = (q as f64).sqrt();

    let mut values = Vec::with_capacity(2 * d + 2);
    let mut dn = CMat::zeros(t, t);
    for i in 0..n {
        dn[(i, i)] = Complex64::new(1.0 / sp, 0.0);
    }
    values.push(dn);
    let mut dm = CMat::zeros(t, t);
    for j in 0..m {
        dm[(n + j, n + j)] = Complex64::new(1.0 / sq, 0.0);
    }
    values.push(dm);
    for v in phi.ortho_values() {
        let mut upper = CMat::zeros(t, t);
        upper.set_block(0, n, v)?;
        values.push(upper);
    }
    for v in phi.ortho_values() {
        let mut lower = CMat::zeros(t, t);
        lower.set_block(n, 0, &v.adjoint())?;
        values.push(lower);
    }
    let map = MatrixMap::from_ortho_values(system.space.clone(), t, t, values)?;
    Ok((system, map))
}

/// Pairing of a coordinate matrix against a value list: with
/// x = sum_k c_k (x) b_k and psi(b_k) = v_k, the result is
/// sum_k kron(c_k, v_k) in M_{nr, ms}, rows indexed (i, alpha).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoordMat {
    pub n: usize,
    pub m: usize,
    pub coords: Vec<CMat>,
}

impl CoordMat {
    pub fn new(n: usize, m: usize, coords: Vec<CMat>) -> Result<Self> {
        for c in &coords {
            if c.rows() != n || c.cols() != m {
                return Err(Error::ShapeMismatch(format!(
                    "coordinate block is {}x{}, level is ({n},{m})",
                    c.rows(),
                    c.cols()
                )));
            }
        }
        Ok(Self { n, m, coords })
    }

    /// The element at level (1,1) with the given scalar coordinates.
    pub fn scalar(coords: &[Complex64]) -> Self {
        Self {
            n: 1,
            m: 1,
            coords: coords
                .iter()
                .map(|c| CMat::from_row_major(1, 1, vec![*c]).unwrap())
                .collect(),
        }
    }
}

pub fn pairing(x: &CoordMat, values: &[CMat]) -> Result<CMat> {
    if x.coords.len() != values.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} coordinates against {} values",
            x.coords.len(),
            values.len()
        )));
    }
    if values.is_empty() {
        return Ok(CMat::zeros(x.n, x.m));
    }
    let (r, s) = (values[0].rows(), values[0].cols());
    let mut acc = CMat::zeros(x.n * r, x.m * s);
    for (c, v) in x.coords.iter().zip(values) {
        if v.rows() != r || v.cols() != s {
            return Err(Error::ShapeMismatch("value shapes disagree".into()));
        }
        acc = acc.add(&c.kron(v))?;
    }
    Ok(acc)
}

/// PSD check used by the linking-cone property: sums of a a* with a drawn
/// from a ternary-closed space are positive.
pub fn positive_combination_defect(t: &OpSubspace, draws: &[Vec<Complex64>]) -> Result<f64> {
    let mut acc = CMat::zeros(t.p(), t.p());
    for coords in draws {
        let a = t.from_coords(coords)?;
        acc = acc.add(&a.matmul(&a.adjoint())?)?;
    }
    let eig = herm_eig(&acc.hermitize(), Tol::default())?;
    Ok((-eig.lambda_min()).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(p: usize, q: usize, i: usize, j: usize) -> CMat {
        CMat::unit(p, q, i, j)
    }

    fn rand_mat(rng: &mut ChaCha8Rng, p: usize, q: usize) -> CMat {
        CMat::from_fn(p, q, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn ingestion_orthonormalizes_and_remembers_user_basis() {
        // Two non-orthogonal directions in M_2.
        let a = e(2, 2, 0, 0);
        let b = a.axpy(Complex64::new(1.0, 0.0), &e(2, 2, 0, 1)).unwrap();
        let x = OpSubspace::new(2, 2, vec![a.clone(), b.clone()], SpaceKind::Plain).unwrap();
        assert_eq!(x.dim(), 2);
        // Basis orthonormal.
        for (i, bi) in x.basis().iter().enumerate() {
            for (j, bj) in x.basis().iter().enumerate() {
                let g = bi.inner(bj).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
        // user_coords reconstructs the ingested list.
        let c = x.user_coords();
        for (i, orig) in [a, b].iter().enumerate() {
            let mut acc = CMat::zeros(2, 2);
            for k in 0..2 {
                acc = acc.axpy(c[(i, k)], &x.basis()[k]).unwrap();
            }
            assert!(acc.sub(orig).unwrap().fro_norm() < 1e-12);
        }
    }

    #[test]
    fn dependent_basis_is_rejected() {
        let a = e(2, 2, 0, 0);
        let twice = a.scale(Complex64::new(2.0, 0.0));
        let err = OpSubspace::new(2, 2, vec![a, twice], SpaceKind::Plain).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn tro_generate_corner_unit() {
        let x = OpSubspace::new(2, 2, vec![e(2, 2, 0, 1)], SpaceKind::Plain).unwrap();
        let t = tro_generate(&x).unwrap();
        assert_eq!(t.dim(), 1);
        assert_eq!(t.kind(), SpaceKind::Tro);
    }

    #[test]
    fn tro_generate_full_column_space() {
        let t = tro_generate(&OpSubspace::full(2, 1)).unwrap();
        assert_eq!(t.dim(), 2);
    }

    #[test]
    fn tro_generate_scalar_identity() {
        let x = OpSubspace::new(2, 2, vec![CMat::identity(2).scale(Complex64::new(0.5, 0.0))], SpaceKind::Plain)
            .unwrap();
        let t = tro_generate(&x).unwrap();
        assert_eq!(t.dim(), 1);
        assert!(t.contains(&CMat::identity(2), 1e-9).unwrap());
    }

    #[test]
    fn tro_generate_monotone_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let g1 = rand_mat(&mut rng, 2, 3);
            let g2 = rand_mat(&mut rng, 2, 3);
            let x = OpSubspace::new(2, 3, vec![g1.clone()], SpaceKind::Plain).unwrap();
            let y = OpSubspace::new(2, 3, vec![g1, g2], SpaceKind::Plain).unwrap();
            let tx = tro_generate(&x).unwrap();
            let ty = tro_generate(&y).unwrap();
            assert!(ty.residual_of_space(&tx).unwrap() < 1e-8);
            let txx = tro_generate(&tx).unwrap();
            assert_eq!(txx.dim(), tx.dim());
            assert!(txx.residual_of_space(&tx).unwrap() < 1e-8);
        }
    }

    #[test]
    fn linking_blocks_of_corner_unit() {
        let t = tro_generate(&OpSubspace::new(2, 2, vec![e(2, 2, 0, 1)], SpaceKind::Plain).unwrap())
            .unwrap();
        let (left, right) = linking_blocks(&t).unwrap();
        assert_eq!(left.dim(), 1);
        assert!(left.contains(&e(2, 2, 0, 0), 1e-9).unwrap());
        assert_eq!(right.dim(), 1);
        assert!(right.contains(&e(2, 2, 1, 1), 1e-9).unwrap());
    }

    #[test]
    fn linking_blocks_of_full_column_space() {
        let t = tro_generate(&OpSubspace::full(2, 1)).unwrap();
        let (left, right) = linking_blocks(&t).unwrap();
        assert_eq!(left.dim(), 4); // all of M_2
        assert_eq!(right.dim(), 1); // scalars
    }

    #[test]
    fn linking_blocks_of_diagonal_pair() {
        let t = tro_generate(
            &OpSubspace::new(2, 2, vec![e(2, 2, 0, 0), e(2, 2, 1, 1)], SpaceKind::Plain).unwrap(),
        )
        .unwrap();
        let (left, right) = linking_blocks(&t).unwrap();
        assert_eq!(left.dim(), 2);
        assert_eq!(right.dim(), 2);
        assert!(left.contains(&e(2, 2, 0, 0), 1e-9).unwrap());
        assert!(left.contains(&e(2, 2, 1, 1), 1e-9).unwrap());
    }

    #[test]
    fn linking_cone_positive_combinations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = tro_generate(&OpSubspace::full(2, 3)).unwrap();
        for _ in 0..20 {
            let draws: Vec<Vec<Complex64>> = (0..3)
                .map(|_| {
                    (0..t.dim())
                        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                        .collect()
                })
                .collect();
            assert!(positive_combination_defect(&t, &draws).unwrap() < 1e-10);
        }
    }

    #[test]
    fn paulsen_dimensions() {
        // X = C (p = q = 1): the system is all of M_2.
        let scalar = OpSubspace::full(1, 1);
        let s = paulsen_space(&scalar).unwrap();
        assert_eq!(s.space.dim(), 4);

        // X = M_{1,2}: dimension 6 inside M_3.
        let row = OpSubspace::full(1, 2);
        let s = paulsen_space(&row).unwrap();
        assert_eq!(s.space.dim(), 6);
        assert_eq!(s.space.p(), 3);

        // X = {0}: just the two scalar corners.
        let zero = OpSubspace::new(2, 2, Vec::new(), SpaceKind::Plain).unwrap();
        let s = paulsen_space(&zero).unwrap();
        assert_eq!(s.space.dim(), 2);
    }

    #[test]
    fn paulsen_embed_and_decompose_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = OpSubspace::full(2, 3);
        let sys = paulsen_space(&x).unwrap();
        let xm = rand_mat(&mut rng, 2, 3);
        let ym = rand_mat(&mut rng, 2, 3);
        let s = sys
            .embed(Complex64::new(0.7, 0.0), &xm, &ym, Complex64::new(-0.2, 0.0))
            .unwrap();
        let (lam, xr, yr, mu, resid) = sys.decompose(&s).unwrap();
        assert!(resid < 1e-10);
        assert!((lam - Complex64::new(0.7, 0.0)).norm() < 1e-10);
        assert!((mu - Complex64::new(-0.2, 0.0)).norm() < 1e-10);
        assert!(xr.sub(&xm).unwrap().fro_norm() < 1e-10);
        assert!(yr.sub(&ym).unwrap().fro_norm() < 1e-10);
    }

    #[test]
    fn paulsen_map_is_unital_and_adjoint_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = OpSubspace::full(1, 2);
        let phi = MatrixMap::new(
            x.clone(),
            2,
            2,
            vec![rand_mat(&mut rng, 2, 2), rand_mat(&mut rng, 2, 2)],
        )
        .unwrap();
        let (sys, sphi) = paulsen_map(&phi).unwrap();

        // Unital: I_{p+q} maps to I_{n+m}.
        let id = CMat::identity(sys.p + sys.q);
        let out = sphi.eval(&id).unwrap();
        assert!(out.sub(&CMat::identity(4)).unwrap().fro_norm() < 1e-10);

        // Selfadjoint-preserving on random system elements.
        for _ in 0..10 {
            let xm = rand_mat(&mut rng, 1, 2);
            let ym = rand_mat(&mut rng, 1, 2);
            let s = sys
                .embed(
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                    &xm,
                    &ym,
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                )
                .unwrap();
            let lhs = sphi.eval(&s.adjoint()).unwrap();
            let rhs = sphi.eval(&s).unwrap().adjoint();
            assert!(lhs.sub(&rhs).unwrap().fro_norm() < 1e-9);
        }

        // The identity map on X has the identity system map.
        let inc = MatrixMap::inclusion(x);
        let (_, sinc) = paulsen_map(&inc).unwrap();
        let mut rng2 = ChaCha8Rng::seed_from_u64(10);
        let xm = rand_mat(&mut rng2, 1, 2);
        let ym = rand_mat(&mut rng2, 1, 2);
        let s = sys
            .embed(Complex64::new(0.3, 0.1), &xm, &ym, Complex64::new(0.4, -0.2))
            .unwrap();
        let out = sinc.eval(&s).unwrap();
        assert!(out.sub(&s).unwrap().fro_norm() < 1e-9);
    }

    #[test]
    fn zero_map_hits_scalar_part_only() {
        let x = OpSubspace::full(1, 1);
        let phi = MatrixMap::zero(x, 2, 2);
        let (sys, sphi) = paulsen_map(&phi).unwrap();
        let s = sys
            .embed(
                Complex64::new(2.0, 0.0),
                &CMat::from_real(1, 1, &[5.0]).unwrap(),
                &CMat::zeros(1, 1),
                Complex64::new(3.0, 0.0),
            )
            .unwrap();
        let out = sphi.eval(&s).unwrap();
        // Diagonal scalars survive, the corner disappears.
        let want = CMat::from_real(4, 4, &[
            2.0, 0.0, 0.0, 0.0,
            0.0, 2.0, 0.0, 0.0,
            0.0, 0.0, 3.0, 0.0,
            0.0, 0.0, 0.0, 3.0,
        ])
        .unwrap();
        assert!(out.sub(&want).unwrap().fro_norm() < 1e-10);
    }

    #[test]
    fn pairing_scalar_and_duality_cases() {
        // Level (1,1) against a functional: plain evaluation.
        let x = CoordMat::scalar(&[Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0)]);
        let vals = vec![
            CMat::from_real(1, 1, &[3.0]).unwrap(),
            CMat::from_real(1, 1, &[5.0]).unwrap(),
        ];
        let out = pairing(&x, &vals).unwrap();
        assert!((out[(0, 0)] - Complex64::new(6.0, 5.0)).norm() < 1e-12);

        // Coordinate vector dual to b1.
        let e1 = CoordMat::scalar(&[Complex64::new(1.0, 0.0), Complex64::ZERO]);
        let dual = vec![
            CMat::from_real(1, 1, &[1.0]).unwrap(),
            CMat::from_real(1, 1, &[0.0]).unwrap(),
        ];
        let out = pairing(&e1, &dual).unwrap();
        assert!((out[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn pairing_direct_sum_norm_is_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let d = 3;
        let x = CoordMat::new(2, 2, (0..d).map(|_| rand_mat(&mut rng, 2, 2)).collect()).unwrap();
        let v1: Vec<CMat> = (0..d).map(|_| rand_mat(&mut rng, 2, 2)).collect();
        let v2: Vec<CMat> = (0..d).map(|_| rand_mat(&mut rng, 3, 2)).collect();
        let sum: Vec<CMat> = v1
            .iter()
            .zip(&v2)
            .map(|(a, b)| a.direct_sum(b))
            .collect();
        let n1 = op_norm(&pairing(&x, &v1).unwrap()).unwrap();
        let n2 = op_norm(&pairing(&x, &v2).unwrap()).unwrap();
        let ns = op_norm(&pairing(&x, &sum).unwrap()).unwrap();
        assert!((ns - n1.max(n2)).abs() < 1e-10, "{ns} vs max({n1}, {n2})");
    }

    #[test]
    fn map_values_convert_between_bases() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        // Non-orthogonal user basis.
        let b1 = e(2, 2, 0, 0);
        let b2 = b1.axpy(Complex64::new(0.5, 0.0), &e(2, 2, 1, 1)).unwrap();
        let x = OpSubspace::new(2, 2, vec![b1.clone(), b2.clone()], SpaceKind::Plain).unwrap();
        let v1 = rand_mat(&mut rng, 2, 2);
        let v2 = rand_mat(&mut rng, 2, 2);
        let phi = MatrixMap::new(x, 2, 2, vec![v1.clone(), v2.clone()]).unwrap();
        // Evaluation on the user elements returns the user values.
        assert!(phi.eval(&b1).unwrap().sub(&v1).unwrap().fro_norm() < 1e-10);
        assert!(phi.eval(&b2).unwrap().sub(&v2).unwrap().fro_norm() < 1e-10);
        // Round trip through the reported user values.
        let reported = phi.user_values().unwrap();
        assert!(reported[0].sub(&v1).unwrap().fro_norm() < 1e-10);
        assert!(reported[1].sub(&v2).unwrap().fro_norm() < 1e-10);
    }

    #[test]
    fn nondegeneracy_rank_conditions() {
        let x = OpSubspace::full(1, 2);
        let inc = MatrixMap::inclusion(x.clone());
        assert!(inc.nondegenerate().unwrap());
        // A map collapsing to one column is degenerate on the row side.
        let phi = MatrixMap::new(
            x,
            1,
            2,
            vec![e(1, 2, 0, 0), e(1, 2, 0, 0)],
        )
        .unwrap();
        assert!(!phi.nondegenerate().unwrap());
    }

    #[test]
    fn subspace_json_round_trip() {
        let x = OpSubspace::new(
            2,
            2,
            vec![e(2, 2, 0, 1), CMat::identity(2)],
            SpaceKind::Plain,
        )
        .unwrap();
        let s = serde_json::to_string(&x).unwrap();
        let y: OpSubspace = serde_json::from_str(&s).unwrap();
        assert_eq!(y.dim(), 2);
        assert!(y.residual_of_space(&x).unwrap() < 1e-10);
        assert!(x.residual_of_space(&y).unwrap() < 1e-10);

        // kind claims are re-verified on load.
        let bad = r#"{"p":2,"q":2,"basis":[{"rows":2,"cols":2,"data":[[0,0],[1,0],[0,0],[0,0]]},{"rows":2,"cols":2,"data":[[1,0],[0,0],[0,0],[0,0]]}],"kind":"cstar"}"#;
        assert!(serde_json::from_str::<OpSubspace>(bad).is_err());
    }
}
