//! Rectangular matrix convex sets over a finite coordinate space: membership
//! in finitely generated hulls, the polar, heuristic separation, and norm
//! estimation driven by certified extreme points.
//!
//! A point of such a set at level (n, m) is a tuple of n x m matrices, one
//! per coordinate.  Hulls are closed under combinations sum_i a_i* w_i b_i
//! with sum a_i* a_i and sum b_i* b_i both the identity; the module decides
//! membership by a single SDP whose feasible points encode exactly those
//! combinations, and certifies the polar side through operator norms of
//! coordinate pairings.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::{is_rect_extreme, PurityOutcome};
use crate::cpmaps::{self, CcOutcome, GradedChoi, GradedLayout, InfeasibilityWitness};
use crate::error::{Error, Result};
use crate::num::{op_norm, svd, CMat};
use crate::opspace::{MatrixMap, OpSubspace, SpaceKind};
use crate::sdp::{self, BlockTerm, SdpOptions, SdpProblem, SdpStatus};

/// Largest total PSD dimension a membership program may reach.
const SIZE_LIMIT: usize = 600;

fn solve_options() -> SdpOptions {
    SdpOptions { tol: 1e-9, max_iter: 400 }
}

/// One generator of a finitely generated set: a point at level (n, m), given
/// by one n x m matrix per coordinate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HullGenerator {
    pub n: usize,
    pub m: usize,
    pub coords: Vec<CMat>,
}

impl HullGenerator {
    pub fn new(coords: Vec<CMat>) -> Result<Self> {
        let Some(first) = coords.first() else {
            return Err(Error::InvalidInput("a generator needs at least one coordinate".into()));
        };
        let (n, m) = (first.rows(), first.cols());
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput("generator levels must be positive".into()));
        }
        for c in &coords {
            if c.rows() != n || c.cols() != m {
                return Err(Error::ShapeMismatch(format!(
                    "generator coordinates mix shapes: {}x{} vs {n}x{m}",
                    c.rows(),
                    c.cols()
                )));
            }
        }
        Ok(Self { n, m, coords })
    }
}

/// A rectangular matrix convex set: either the hull of finitely many
/// generators over a d-dimensional coordinate space, or the set of levelwise
/// completely contractive maps out of an operator subspace.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum RectSet {
    Hull { d: usize, generators: Vec<HullGenerator> },
    DualBall { space: OpSubspace },
}

impl RectSet {
    pub fn hull(generators: Vec<HullGenerator>) -> Result<Self> {
        let Some(first) = generators.first() else {
            return Err(Error::InvalidInput("a hull needs at least one generator".into()));
        };
        let d = first.coords.len();
        let set = RectSet::Hull { d, generators };
        set.check_hull()?;
        Ok(set)
    }

    pub fn dual_ball(space: OpSubspace) -> Self {
        RectSet::DualBall { space }
    }

    /// Access the hull data, re-validating shape invariants (the set may
    /// have arrived through deserialization).
    fn check_hull(&self) -> Result<(usize, &[HullGenerator])> {
        match self {
            RectSet::Hull { d, generators } => {
                if *d == 0 || generators.is_empty() {
                    return Err(Error::InvalidInput(
                        "a hull needs a positive coordinate dimension and a generator".into(),
                    ));
                }
                for (j, g) in generators.iter().enumerate() {
                    if g.coords.len() != *d {
                        return Err(Error::ShapeMismatch(format!(
                            "generator {j} has {} coordinates, the set says {d}",
                            g.coords.len()
                        )));
                    }
                    if g.n == 0 || g.m == 0 {
                        return Err(Error::InvalidInput(format!(
                            "generator {j} has a zero level"
                        )));
                    }
                    for c in &g.coords {
                        if c.rows() != g.n || c.cols() != g.m {
                            return Err(Error::ShapeMismatch(format!(
                                "generator {j} coordinate is {}x{}, declared {}x{}",
                                c.rows(),
                                c.cols(),
                                g.n,
                                g.m
                            )));
                        }
                    }
                }
                Ok((*d, generators))
            }
            RectSet::DualBall { .. } => Err(Error::InvalidInput(
                "this operation needs a finitely generated hull".into(),
            )),
        }
    }
}

/// The space the coordinates live in, fixed as the diagonal of M_d so that
/// functionals over it can travel as ordinary maps: coordinate k is the k-th
/// diagonal matrix unit, and that family is its own orthonormal basis.
pub fn coordinate_space(d: usize) -> Result<OpSubspace> {
    let units = (0..d).map(|k| CMat::unit(d, d, k, k)).collect();
    OpSubspace::from_orthonormal(d, d, units, SpaceKind::Plain)
}

/// Pairing of a coordinate tuple at level (n, m) with the coordinate values
/// of a map at level (r, s): `sum_k v_k (x) f_k`, rows indexed (i, alpha) and
/// columns (j, beta).
pub fn pairing(v: &[CMat], f: &[CMat]) -> Result<CMat> {
    if v.len() != f.len() {
        return Err(Error::ShapeMismatch(format!(
            "pairing needs equal coordinate counts, got {} and {}",
            v.len(),
            f.len()
        )));
    }
    let Some((v0, f0)) = v.first().zip(f.first()) else {
        return Err(Error::InvalidInput("pairing of empty coordinate tuples".into()));
    };
    let mut acc = CMat::zeros(v0.rows() * f0.rows(), v0.cols() * f0.cols());
    for (vk, fk) in v.iter().zip(f) {
        acc = acc.add(&vk.kron(fk))?;
    }
    Ok(acc)
}

/// Membership verdict for a finitely generated hull.
#[derive(Clone, Debug)]
pub enum HullMembership {
    /// Member; carries one grade-preserving Choi block per generator whose
    /// corner reads reconstruct the point.
    Yes(Vec<GradedChoi>),
    /// Certified non-member: the feasibility program together with the
    /// validated Farkas multipliers refuting it.
    No(Box<InfeasibilityWitness>),
    Indeterminate(String),
}

/// Decide whether the level-(n, m) point `v` (one n x m matrix per
/// coordinate) lies in the hull.
///
/// Feasibility program: one PSD variable per generator, the Choi matrix of a
/// completely positive map from the generator's two-graded square algebra to
/// the point's, restricted to the grade-aligned entries (so its Kraus
/// operators are block-diagonal a (+) b by construction).  Three linear
/// families tie them together: the upper corners of the images of the two
/// grade identities sum to the identities at the target level, and the
/// corner images of the generators sum to `v` coordinate by coordinate.
/// Feasible points are exactly the rectangular combinations of the
/// generators, and closedness of the feasible region matches the closure in
/// the hull's definition.
pub fn hull_member(set: &RectSet, v: &[CMat]) -> Result<HullMembership> {
    let (d, gens) = set.check_hull()?;
    if v.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "the point has {} coordinates, the set has {d}",
            v.len()
        )));
    }
    let Some(first) = v.first() else {
        return Err(Error::InvalidInput("the point has no coordinates".into()));
    };
    let (n, m) = (first.rows(), first.cols());
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("the point's level must be positive".into()));
    }
    for c in v {
        if c.rows() != n || c.cols() != m {
            return Err(Error::ShapeMismatch("the point's coordinates mix shapes".into()));
        }
    }

    let lays: Vec<GradedLayout> =
        gens.iter().map(|g| GradedLayout { p: g.n, q: g.m, n, m }).collect();
    let total: usize = lays.iter().map(|l| l.dim()).sum();
    if total > SIZE_LIMIT {
        return Err(Error::SizeExceeded { got: total, limit: SIZE_LIMIT });
    }

    let names: Vec<String> = (0..gens.len()).map(|j| format!("g{j}")).collect();
    let mut prob =
        SdpProblem::new(names.iter().zip(&lays).map(|(s, l)| (s.clone(), l.dim())).collect());
    prob.options = solve_options();

    // Top corners of the grade-1 identity images sum to I_n.
    for alpha in 0..n {
        for alpha2 in alpha..n {
            let mut terms = Vec::with_capacity(gens.len());
            for (lay, name) in lays.iter().zip(&names) {
                let mut g = CMat::zeros(lay.dim(), lay.dim());
                for i in 0..lay.p {
                    let r = lay.index(i, alpha).expect("grade-1 pair");
                    let c = lay.index(i, alpha2).expect("grade-1 pair");
                    g[(c, r)] += Complex64::ONE;
                }
                terms.push((name.as_str(), g));
            }
            let refs: Vec<(&str, &CMat)> = terms.iter().map(|(s, g)| (*s, g)).collect();
            let target = if alpha == alpha2 { Complex64::ONE } else { Complex64::ZERO };
            cpmaps::push_complex_row_multi(&mut prob, &refs, target);
        }
    }
    // Bottom corners of the grade-2 identity images sum to I_m.
    for beta in 0..m {
        for beta2 in beta..m {
            let mut terms = Vec::with_capacity(gens.len());
            for (lay, name) in lays.iter().zip(&names) {
                let mut g = CMat::zeros(lay.dim(), lay.dim());
                for i in 0..lay.q {
                    let r = lay.index(lay.p + i, lay.n + beta).expect("grade-2 pair");
                    let c = lay.index(lay.p + i, lay.n + beta2).expect("grade-2 pair");
                    g[(c, r)] += Complex64::ONE;
                }
                terms.push((name.as_str(), g));
            }
            let refs: Vec<(&str, &CMat)> = terms.iter().map(|(s, g)| (*s, g)).collect();
            let target = if beta == beta2 { Complex64::ONE } else { Complex64::ZERO };
            cpmaps::push_complex_row_multi(&mut prob, &refs, target);
        }
    }
    // Corner images of the generators reconstruct the point, coordinate by
    // coordinate.
    for k in 0..d {
        for alpha in 0..n {
            for beta in 0..m {
                let mut terms = Vec::with_capacity(gens.len());
                for ((gen, lay), name) in gens.iter().zip(&lays).zip(&names) {
                    let w = &gen.coords[k];
                    let mut g = CMat::zeros(lay.dim(), lay.dim());
                    for gi in 0..lay.p {
                        for h in 0..lay.q {
                            let r = lay.index(gi, alpha).expect("grade-1 pair");
                            let c = lay.index(lay.p + h, lay.n + beta).expect("grade-2 pair");
                            g[(c, r)] += w[(gi, h)];
                        }
                    }
                    terms.push((name.as_str(), g));
                }
                let refs: Vec<(&str, &CMat)> = terms.iter().map(|(s, g)| (*s, g)).collect();
                cpmaps::push_complex_row_multi(&mut prob, &refs, v[k][(alpha, beta)]);
            }
        }
    }

    let out = sdp::solve(&prob)?;
    match out.status {
        SdpStatus::Feasible | SdpStatus::MaxIter => {
            let mut witness = Vec::with_capacity(gens.len());
            for ((lay, name), gen) in lays.iter().zip(&names).zip(gens) {
                let term = out
                    .primal
                    .iter()
                    .find(|b| &b.block == name)
                    .ok_or_else(|| Error::NumericalBreakdown("a hull block went missing".into()))?;
                witness.push(GradedChoi {
                    p: gen.n,
                    q: gen.m,
                    n: lay.n,
                    m: lay.m,
                    matrix: term.matrix.clone(),
                });
            }
            let resid = hull_witness_residual(gens, &witness, v, n, m)?;
            let mut lmin = f64::INFINITY;
            for w in &witness {
                lmin = lmin
                    .min(crate::num::lambda_min(&w.matrix.hermitize(), crate::num::Tol::default())?);
            }
            let scale = 1.0 + v.iter().map(|c| c.max_abs()).fold(0.0, f64::max);
            if resid <= 5e-7 * scale && lmin >= -1e-9 * scale {
                Ok(HullMembership::Yes(witness))
            } else {
                Ok(HullMembership::Indeterminate(format!(
                    "combination candidate after {} iterations misses by {resid:.3e} \
                     (min eigenvalue {lmin:.3e})",
                    out.iterations
                )))
            }
        }
        SdpStatus::Infeasible => {
            let Some(cert) = out.certificate else {
                return Ok(HullMembership::Indeterminate(
                    "infeasible verdict arrived without a dual certificate".into(),
                ));
            };
            let witness = InfeasibilityWitness { problem: prob, certificate: cert };
            if witness.verify()?.sound {
                Ok(HullMembership::No(Box::new(witness)))
            } else {
                Ok(HullMembership::Indeterminate(format!(
                    "the dual certificate does not survive re-checking \
                     (defect {:.3e})",
                    witness.certificate.psd_defect
                )))
            }
        }
    }
}

/// Worst reconstruction error of a hull witness: corner identity sums and
/// the combined point, evaluated through the full Choi matrices rather than
/// the graded entries that built the program.
fn hull_witness_residual(
    gens: &[HullGenerator],
    witness: &[GradedChoi],
    v: &[CMat],
    n: usize,
    m: usize,
) -> Result<f64> {
    let mut top = CMat::zeros(n, n);
    let mut bottom = CMat::zeros(m, m);
    let mut combos = vec![CMat::zeros(n, m); v.len()];
    for (gen, w) in gens.iter().zip(witness) {
        let full = w.full_choi()?;
        let side = gen.n + gen.m;
        let mut e1 = CMat::zeros(side, side);
        for i in 0..gen.n {
            e1[(i, i)] = Complex64::ONE;
        }
        let mut e2 = CMat::zeros(side, side);
        for i in 0..gen.m {
            e2[(gen.n + i, gen.n + i)] = Complex64::ONE;
        }
        let img1 = full.apply(&e1)?;
        let img2 = full.apply(&e2)?;
        top = top.add(&img1.block(0, 0, n, n)?)?;
        bottom = bottom.add(&img2.block(n, n, m, m)?)?;
        for (k, combo) in combos.iter_mut().enumerate() {
            let mut emb = CMat::zeros(side, side);
            emb.set_block(0, gen.n, &gen.coords[k])?;
            let img = full.apply(&emb)?;
            *combo = combo.add(&img.block(0, n, n, m)?)?;
        }
    }
    let mut worst = top.sub(&CMat::identity(n))?.max_abs();
    worst = worst.max(bottom.sub(&CMat::identity(m))?.max_abs());
    for (combo, target) in combos.iter().zip(v) {
        worst = worst.max(combo.sub(target)?.max_abs());
    }
    Ok(worst)
}

/// Membership in the dual-ball variant: the point is a map out of the
/// stored space, and membership is complete contractivity.
pub fn dualball_member(set: &RectSet, phi: &MatrixMap) -> Result<CcOutcome> {
    let RectSet::DualBall { space } = set else {
        return Err(Error::InvalidInput("this operation needs a dual-ball set".into()));
    };
    let dom = phi.domain();
    if dom.p() != space.p() || dom.q() != space.q() || dom.dim() != space.dim() {
        return Err(Error::ShapeMismatch(
            "the map's domain does not match the set's space".into(),
        ));
    }
    for b in dom.basis() {
        if !space.contains(b, 1e-8)? {
            return Err(Error::InvalidInput(
                "the map's domain spans outside the set's space".into(),
            ));
        }
    }
    cpmaps::is_cc(phi)
}

/// Polar membership verdict; a refusal names the violated generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PolarVerdict {
    Yes,
    No { generator: usize, norm: f64 },
}

/// Does `f` (a map from the coordinate space to some M_{n,m}, its coordinate
/// values read against its domain's orthonormal basis) lie in the polar of
/// the hull?  Finitely many checks suffice: pairings respect rectangular
/// combinations, so the generator pairings control the whole hull.
pub fn polar_member(set: &RectSet, f: &MatrixMap) -> Result<PolarVerdict> {
    let (d, gens) = set.check_hull()?;
    if f.domain().dim() != d {
        return Err(Error::ShapeMismatch(format!(
            "the functional has {} coordinates, the set has {d}",
            f.domain().dim()
        )));
    }
    for (j, g) in gens.iter().enumerate() {
        let z = pairing(&g.coords, f.ortho_values())?;
        let norm = op_norm(&z)?;
        if norm > 1.0 + 1e-9 {
            return Ok(PolarVerdict::No { generator: j, norm });
        }
    }
    Ok(PolarVerdict::Yes)
}

/// A separating functional: polar membership holds, and the pairing with the
/// separated point has operator norm `pairing_norm > 1`.
#[derive(Clone, Debug)]
pub struct SeparationCertificate {
    pub functional: MatrixMap,
    pub pairing_norm: f64,
}

#[derive(Clone, Debug)]
pub enum SeparationOutcome {
    Found(Box<SeparationCertificate>),
    /// The search budget ran out.  Not a disproof: a separating functional
    /// exists for every outside point, but the ascent is heuristic.
    NotFound,
}

/// Search radius for separating functionals (operator norm of the stacked
/// coordinate values).
const SEARCH_RADIUS: f64 = 32.0;

/// Look for a functional separating `v` from the hull: polar on every
/// generator, pairing norm at least 1 + 1e-6 on `v`.
///
/// The search alternates two easy steps, restarted from `restarts` random
/// unit pairs: with (xi, eta) fixed, Re <xi| pairing(v, f) |eta> is linear
/// in f and is maximized over the spectrahedron {[[I, pairing(w_j, f)], [*,
/// I]] >= 0 for all j} (plus the search-radius cap, same LMI shape); then
/// (xi, eta) move to the top singular pair of the achieved pairing.  Every
/// candidate is rescaled onto the polar boundary and validated before being
/// returned, so a Found verdict is always sound.
pub fn separate(
    set: &RectSet,
    v: &[CMat],
    restarts: usize,
    seed: u64,
) -> Result<SeparationOutcome> {
    let (d, gens) = set.check_hull()?;
    match hull_member(set, v)? {
        HullMembership::Yes(_) => {
            return Err(Error::InvalidInput(
                "the point is in the hull; nothing separates it".into(),
            ))
        }
        HullMembership::Indeterminate(r) => {
            return Err(Error::Indeterminate(format!("membership precheck: {r}")))
        }
        HullMembership::No(_) => {}
    }
    let (n, m) = (v[0].rows(), v[0].cols());
    let coords = coordinate_space(d)?;

    // Free off-diagonal of the cap block holds the functional's coordinate
    // stack: rows (k, alpha), columns beta.
    let fdim = d * n + m;
    let mut prob = SdpProblem::new(vec![("f".to_string(), fdim)]);
    prob.options = solve_options();
    let mut lmi_names = Vec::with_capacity(gens.len());
    for j in 0..gens.len() {
        let name = format!("lmi{j}");
        prob.blocks.push(crate::sdp::SdpBlock {
            id: name.clone(),
            size: gens[j].n * n + gens[j].m * m,
        });
        lmi_names.push(name);
    }

    // Pin the diagonal corners: radius^2 on the coordinate side of the cap
    // block, identities elsewhere.
    let pin_corner = |prob: &mut SdpProblem, block: &str, dim: usize, off: usize, diag: f64| {
        for a in 0..dim {
            for b in a..dim {
                let mut g = CMat::zeros(prob_block_dim(prob, block), prob_block_dim(prob, block));
                g[(off + b, off + a)] = Complex64::ONE;
                let target = if a == b { Complex64::new(diag, 0.0) } else { Complex64::ZERO };
                cpmaps::push_complex_row_multi(prob, &[(block, &g)], target);
            }
        }
    };
    pin_corner(&mut prob, "f", d * n, 0, SEARCH_RADIUS * SEARCH_RADIUS);
    pin_corner(&mut prob, "f", m, d * n, 1.0);
    for (j, gen) in gens.iter().enumerate() {
        pin_corner(&mut prob, &lmi_names[j], gen.n * n, 0, 1.0);
        pin_corner(&mut prob, &lmi_names[j], gen.m * m, gen.n * n, 1.0);
    }
    // Tie each LMI off-diagonal to the generator pairing of the functional.
    for (j, gen) in gens.iter().enumerate() {
        let ldim = gen.n * n + gen.m * m;
        for gi in 0..gen.n {
            for alpha in 0..n {
                for h in 0..gen.m {
                    for beta in 0..m {
                        let r = gi * n + alpha;
                        let c = h * m + beta;
                        let mut gl = CMat::zeros(ldim, ldim);
                        gl[(gen.n * n + c, r)] = Complex64::ONE;
                        let mut gf = CMat::zeros(fdim, fdim);
                        for k in 0..d {
                            gf[(d * n + beta, k * n + alpha)] -= gen.coords[k][(gi, h)];
                        }
                        cpmaps::push_complex_row_multi(
                            &mut prob,
                            &[(lmi_names[j].as_str(), &gl), ("f", &gf)],
                            Complex64::ZERO,
                        );
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_unit = |len: usize, rng: &mut ChaCha8Rng| -> Vec<Complex64> {
        let mut u: Vec<Complex64> = (0..len)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-12);
        for z in &mut u {
            *z /= norm;
        }
        u
    };

    for _restart in 0..restarts.max(1) {
        let mut xi = random_unit(n * n, &mut rng);
        let mut eta = random_unit(m * m, &mut rng);
        for _sweep in 0..6 {
            // Objective: coefficient on f_k[alpha, beta] is
            // sum_ij conj(xi[(i,alpha)]) eta[(j,beta)] v_k[i,j].
            let mut gobj = CMat::zeros(fdim, fdim);
            for k in 0..d {
                for alpha in 0..n {
                    for beta in 0..m {
                        let mut coeff = Complex64::ZERO;
                        for i in 0..n {
                            for j in 0..m {
                                coeff += xi[i * n + alpha].conj()
                                    * eta[j * m + beta]
                                    * v[k][(i, j)];
                            }
                        }
                        gobj[(d * n + beta, k * n + alpha)] += coeff;
                    }
                }
            }
            let out = sdp::maximize_linear(&prob, &[BlockTerm::new("f", gobj.hermitize())])?;
            if !matches!(out.status, SdpStatus::Feasible | SdpStatus::MaxIter) {
                break;
            }
            let Some(fblk) = out.primal.iter().find(|b| b.block == "f") else { break };
            let fvals: Vec<CMat> = (0..d)
                .map(|k| {
                    CMat::from_fn(n, m, |alpha, beta| fblk.matrix[(k * n + alpha, d * n + beta)])
                })
                .collect();

            // Rescale onto the polar boundary before judging.
            let mut nu = 0.0f64;
            for gen in gens {
                nu = nu.max(op_norm(&pairing(&gen.coords, &fvals)?)?);
            }
            if nu <= 1e-12 {
                break;
            }
            let scaled: Vec<CMat> =
                fvals.iter().map(|fk| fk.scale(Complex64::new(1.0 / nu, 0.0))).collect();
            let z = pairing(v, &scaled)?;
            let dec = svd(&z)?;
            let norm = dec.sigma.first().copied().unwrap_or(0.0);
            if norm >= 1.0 + 1e-6 {
                let functional = MatrixMap::from_ortho_values(coords.clone(), n, m, scaled)?;
                if matches!(polar_member(set, &functional)?, PolarVerdict::Yes) {
                    return Ok(SeparationOutcome::Found(Box::new(SeparationCertificate {
                        functional,
                        pairing_norm: norm,
                    })));
                }
            }
            // Move the probe to the top singular pair of the current pairing.
            xi = (0..n * n).map(|i| dec.u[(i, 0)].conj()).collect();
            eta = (0..m * m).map(|j| dec.vt[(0, j)].conj()).collect();
        }
    }
    Ok(SeparationOutcome::NotFound)
}

fn prob_block_dim(prob: &SdpProblem, name: &str) -> usize {
    prob.blocks.iter().find(|b| b.id == name).map(|b| b.size).unwrap_or(0)
}

/// Two-sided norm estimate from extreme-point sampling.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormEstimate {
    /// Best value attained by a certified extreme point; never exceeds
    /// `upper` by more than roundoff.
    pub lower: f64,
    /// Operator norm of the realized element.
    pub upper: f64,
    /// How many sampled candidates were certified extreme.
    pub certified: usize,
}

/// Apply a map on the space entrywise to the blocks of a realized element of
/// M_{n,m}(X): the result has rows (i, alpha) and columns (j, beta).
pub fn amplify(x: &CMat, n: usize, m: usize, phi: &MatrixMap) -> Result<CMat> {
    let p = phi.domain().p();
    let q = phi.domain().q();
    if x.rows() != n * p || x.cols() != m * q {
        return Err(Error::ShapeMismatch(format!(
            "realized element is {}x{}, expected {}x{}",
            x.rows(),
            x.cols(),
            n * p,
            m * q
        )));
    }
    let (r, s) = (phi.n(), phi.m());
    let mut out = CMat::zeros(n * r, m * s);
    for i in 0..n {
        for j in 0..m {
            let img = phi.eval(&x.block(i * p, j * q, p, q)?)?;
            out.set_block(i * r, j * s, &img)?;
        }
    }
    Ok(out)
}

/// Estimate the norm of a realized element of M_{n,m}(X) from below by
/// certified extreme points of the dual ball, and from above directly.
///
/// The norm is attained over extreme points at levels (r, s) with r <= n and
/// s <= m, so the sampler draws maps into those levels: first the functional
/// built from the element's own top singular pair (which norms the element
/// whenever it certifies), then random maps pushed to the unit sphere of the
/// completely bounded norm.  Only candidates certified extreme count toward
/// `lower`; failed certifications burn budget, and a run that certifies
/// nothing at all is `SamplerExhausted`.
pub fn km_norm_estimate(
    x: &CMat,
    n: usize,
    m: usize,
    space: &OpSubspace,
    samples: usize,
    seed: u64,
) -> Result<NormEstimate> {
    let p = space.p();
    let q = space.q();
    if x.rows() != n * p || x.cols() != m * q {
        return Err(Error::ShapeMismatch(format!(
            "realized element is {}x{}, expected {}x{}",
            x.rows(),
            x.cols(),
            n * p,
            m * q
        )));
    }
    for i in 0..n {
        for j in 0..m {
            let blk = x.block(i * p, j * q, p, q)?;
            if blk.max_abs() > 0.0 && !space.contains(&blk, 1e-8)? {
                return Err(Error::InvalidInput(format!(
                    "block ({i},{j}) of the element lies outside the space"
                )));
            }
        }
    }
    let upper = op_norm(x)?;
    if upper <= 1e-12 {
        return Ok(NormEstimate { lower: 0.0, upper: 0.0, certified: 0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lower = 0.0f64;
    let mut certified = 0usize;
    let mut spent = 0usize;

    let consider = |vals: Vec<CMat>,
                        r: usize,
                        s: usize,
                        lower: &mut f64,
                        certified: &mut usize|
     -> Result<()> {
        let phi = MatrixMap::from_ortho_values(space.clone(), r, s, vals)?;
        let nu = match cpmaps::cb_norm(&phi) {
            Ok(nu) if nu > 1e-9 => nu,
            _ => return Ok(()),
        };
        let unit = phi.scale(1.0 / nu);
        if matches!(is_rect_extreme(&unit), Ok(PurityOutcome::Pure)) {
            *certified += 1;
            let val = op_norm(&amplify(x, n, m, &unit)?)?;
            // The true pairing never exceeds the norm; overshoot is
            // normalization error and is clamped away.
            *lower = lower.max(val.min(upper));
        }
        Ok(())
    };

    // The element's own top singular pair induces the natural norming
    // functional; at level (1, 1) it attains the norm exactly.
    if spent < samples {
        spent += 1;
        let dec = svd(x)?;
        let vals: Vec<CMat> = space
            .basis()
            .iter()
            .map(|b| {
                let mut acc = Complex64::ZERO;
                for i in 0..n {
                    for j in 0..m {
                        for a in 0..p {
                            for bq in 0..q {
                                acc += dec.u[(i * p + a, 0)].conj()
                                    * b[(a, bq)]
                                    * dec.vt[(0, j * q + bq)].conj();
                            }
                        }
                    }
                }
                CMat::from_fn(1, 1, |_, _| acc)
            })
            .collect();
        consider(vals, 1, 1, &mut lower, &mut certified)?;
    }

    let levels: Vec<(usize, usize)> =
        (1..=n).flat_map(|r| (1..=m).map(move |s| (r, s))).collect();
    let mut li = 0usize;
    while spent < samples {
        spent += 1;
        let (r, s) = levels[li % levels.len()];
        li += 1;
        let vals: Vec<CMat> = (0..space.dim())
            .map(|_| {
                CMat::from_fn(r, s, |_, _| {
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                })
            })
            .collect();
        consider(vals, r, s, &mut lower, &mut certified)?;
    }

    if certified == 0 {
        return Err(Error::SamplerExhausted);
    }
    Ok(NormEstimate { lower, upper, certified })
}
