//! Homogeneous self-dual interior-point engine over products of real PSD
//! cones.
//!
//! The embedding tracks (x, y, s, tau, kappa) and converges either to a
//! scaled optimal pair (tau >> kappa) or to a certificate of primal or dual
//! infeasibility (kappa >> tau).  Directions use Nesterov-Todd scaling with a
//! Mehrotra predictor-corrector; the Schur complement is formed as a Gram
//! matrix of scaled constraint blocks and factored by Cholesky with a
//! diagonal-jitter fallback.
//!
//! Infeasibility is never declared from iterate divergence alone: the would-be
//! Farkas witness is checked against the data at reporting tolerance first,
//! and the engine keeps iterating if the check fails.

use super::realify::{smat, svec_dim, svec_into};
use nalgebra::{Cholesky, DMatrix, DVector};

/// Conic problem in real svec coordinates:
/// find/minimize `c.x` over `A x = b`, `x` in a product of PSD cones.
pub struct ConicProblem {
    pub block_sizes: Vec<usize>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

pub struct ConicOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// PSD-defect ceiling accepted when validating a Farkas witness.
    pub cert_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConicStatus {
    /// Primal-dual optimal (or feasible, when the objective is zero).
    Solved,
    /// Primal infeasible with a validated Farkas witness `y`.
    PrimalInfeasible,
    /// Dual infeasible: a PSD improving ray was validated, so the primal
    /// objective is unbounded below.
    DualInfeasible,
    MaxIter,
    /// A linear-algebra step lost positive definiteness beyond repair.
    Breakdown(String),
}

pub struct ConicSolution {
    pub status: ConicStatus,
    /// Primal blocks scaled by 1/tau (meaningful for `Solved`).
    pub x: Vec<DMatrix<f64>>,
    /// Dual multipliers scaled by 1/tau for `Solved`; the raw Farkas witness
    /// for `PrimalInfeasible`.
    pub y: DVector<f64>,
    pub s: Vec<DMatrix<f64>>,
    pub primal_obj: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub rel_gap: f64,
    pub iterations: usize,
}

struct State {
    x: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    tau: f64,
    kappa: f64,
}

/// Per-block NT scaling data: W = R R^T maps the s-space to the x-space and
/// `lambda` holds the shared scaled spectrum.
struct Scaling {
    r: DMatrix<f64>,
    rinv: DMatrix<f64>,
    lambda: DVector<f64>,
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn svec_all(blocks: &[DMatrix<f64>], total: usize) -> DVector<f64> {
    let mut v = DVector::zeros(total);
    let mut off = 0;
    for b in blocks {
        let d = svec_dim(b.nrows());
        svec_into(b, &mut v.as_mut_slice()[off..off + d]);
        off += d;
    }
    v
}

fn smat_all(v: &DVector<f64>, sizes: &[usize]) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut off = 0;
    for &n in sizes {
        let d = svec_dim(n);
        out.push(smat(&v.as_slice()[off..off + d], n));
        off += d;
    }
    out
}

fn dot_blocks(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p.dot(q)).sum()
}

fn lambda_min_sym(m: &DMatrix<f64>) -> f64 {
    m.symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

fn lambda_max_sym(m: &DMatrix<f64>) -> f64 {
    m.symmetric_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

/// Cholesky with escalating diagonal jitter; `None` only if even a strong
/// regularization fails (callers treat that as breakdown).
fn chol_jitter(m: &DMatrix<f64>) -> Option<(Cholesky<f64, nalgebra::Dyn>, f64)> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some((c, 0.0));
    }
    let scale = m.diagonal().amax().max(1e-300);
    let mut jitter = 1e-14 * scale;
    for _ in 0..8 {
        let mut mj = m.clone();
        for i in 0..mj.nrows() {
            mj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(mj) {
            return Some((c, jitter));
        }
        jitter *= 100.0;
    }
    None
}

pub fn solve_conic(prob: &ConicProblem, opts: &ConicOptions) -> ConicSolution {
    let sizes = &prob.block_sizes;
    let total: usize = sizes.iter().map(|&n| svec_dim(n)).sum();
    let m = prob.a.nrows();
    let nu: f64 = sizes.iter().map(|&n| n as f64).sum::<f64>().max(1.0);

    let norm_b = prob.b.norm();
    let norm_c = prob.c.norm();

    let mut st = State {
        x: sizes.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        s: sizes.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        y: DVector::zeros(m),
        tau: 1.0,
        kappa: 1.0,
    };

    let c_blocks = smat_all(&DVector::from_column_slice(prob.c.as_slice()), sizes);

    let mut best = ConicSolution {
        status: ConicStatus::MaxIter,
        x: st.x.clone(),
        y: st.y.clone(),
        s: st.s.clone(),
        primal_obj: f64::NAN,
        primal_res: f64::INFINITY,
        dual_res: f64::INFINITY,
        rel_gap: f64::INFINITY,
        iterations: 0,
    };

    for iter in 0..opts.max_iter {
        let xs = svec_all(&st.x, total);
        let ss = svec_all(&st.s, total);

        // Homogeneous residuals.
        let r_p = &prob.a * &xs - &prob.b * st.tau;
        let r_d = -prob.a.transpose() * &st.y + &prob.c * st.tau - &ss;
        let r_g = prob.b.dot(&st.y) - prob.c.dot(&xs) - st.kappa;

        let gap_xs = dot_blocks(&st.x, &st.s);
        let mu = (gap_xs + st.tau * st.kappa) / (nu + 1.0);

        // Optimality check on the tau-scaled iterate.
        if st.tau > 1e-10 * st.kappa.max(1.0) {
            let inv_tau = 1.0 / st.tau;
            let pres = (&prob.a * &xs * inv_tau - &prob.b).norm() / (1.0 + norm_b);
            let dres = (-prob.a.transpose() * &st.y * inv_tau + &prob.c
                - &ss * inv_tau)
                .norm()
                / (1.0 + norm_c);
            let pobj = prob.c.dot(&xs) * inv_tau;
            let dobj = prob.b.dot(&st.y) * inv_tau;
            let relgap = gap_xs * inv_tau * inv_tau / (1.0 + pobj.abs() + dobj.abs());
            if pres + dres + relgap < best.primal_res + best.dual_res + best.rel_gap {
                best.primal_res = pres;
                best.dual_res = dres;
                best.rel_gap = relgap;
                best.primal_obj = pobj;
                best.iterations = iter;
                best.x = st.x.iter().map(|b| b * inv_tau).collect();
                best.y = &st.y * inv_tau;
                best.s = st.s.iter().map(|b| b * inv_tau).collect();
            }
            if pres <= opts.tol && dres <= opts.tol && relgap <= opts.tol {
                return ConicSolution {
                    status: ConicStatus::Solved,
                    x: st.x.iter().map(|b| b * inv_tau).collect(),
                    y: &st.y * inv_tau,
                    s: st.s.iter().map(|b| b * inv_tau).collect(),
                    primal_obj: pobj,
                    primal_res: pres,
                    dual_res: dres,
                    rel_gap: relgap,
                    iterations: iter,
                };
            }
        }

        // Primal infeasibility: validate y as a Farkas witness whenever the
        // homogeneous signal (b.y > 0) is present.  After normalizing to
        // b.y = 1 the defect bound is absolute: a combination with positive
        // spectrum of any visible magnitude refutes nothing, no matter how
        // large the multipliers that produced it are.
        let by = prob.b.dot(&st.y);
        if by > 1e-12 {
            let yhat = &st.y / by;
            let p_blocks = smat_all(&(prob.a.transpose() * &yhat), sizes);
            let defect = p_blocks
                .iter()
                .map(lambda_max_sym)
                .fold(f64::NEG_INFINITY, f64::max);
            if defect <= opts.cert_tol {
                return ConicSolution {
                    status: ConicStatus::PrimalInfeasible,
                    x: st.x.clone(),
                    y: yhat,
                    s: st.s.clone(),
                    primal_obj: f64::NAN,
                    primal_res: f64::INFINITY,
                    dual_res: f64::INFINITY,
                    rel_gap: f64::INFINITY,
                    iterations: iter,
                };
            }
        }

        // Dual infeasibility (unbounded primal): x with c.x < 0, A x ~ 0.
        let cx = prob.c.dot(&xs);
        if cx < -1e-12 {
            let xhat: Vec<DMatrix<f64>> = st.x.iter().map(|b| b / (-cx)).collect();
            let xhat_s = svec_all(&xhat, total);
            let ax = (&prob.a * &xhat_s).norm();
            let scale = xhat_s.norm().max(1.0);
            if ax <= opts.cert_tol * scale {
                return ConicSolution {
                    status: ConicStatus::DualInfeasible,
                    x: st.x.clone(),
                    y: st.y.clone(),
                    s: st.s.clone(),
                    primal_obj: f64::NAN,
                    primal_res: f64::INFINITY,
                    dual_res: f64::INFINITY,
                    rel_gap: f64::INFINITY,
                    iterations: iter,
                };
            }
        }

        // NT scaling per block.
        let mut scalings = Vec::with_capacity(sizes.len());
        let mut breakdown = None;
        for (xb, sb) in st.x.iter().zip(&st.s) {
            let lx = match Cholesky::new(xb.clone()) {
                Some(c) => c.l(),
                None => {
                    breakdown = Some("primal iterate lost positive definiteness");
                    break;
                }
            };
            let ls = match Cholesky::new(sb.clone()) {
                Some(c) => c.l(),
                None => {
                    breakdown = Some("dual iterate lost positive definiteness");
                    break;
                }
            };
            let prod = ls.transpose() * &lx;
            let svd = prod.svd(true, true);
            let (u, vt) = match (&svd.u, &svd.v_t) {
                (Some(u), Some(vt)) => (u, vt),
                _ => {
                    breakdown = Some("scaling SVD failed");
                    break;
                }
            };
            let lam = &svd.singular_values;
            if lam.iter().any(|&l| l <= 0.0) {
                breakdown = Some("scaling spectrum collapsed");
                break;
            }
            let half: DVector<f64> = lam.map(|l| l.sqrt().recip());
            // R = Lx V Lambda^{-1/2}, Rinv = Lambda^{-1/2} U^T Ls^T.
            let mut v = vt.transpose();
            for (j, h) in half.iter().enumerate() {
                for i in 0..v.nrows() {
                    v[(i, j)] *= h;
                }
            }
            let r = &lx * v;
            let mut ut = u.transpose() * ls.transpose();
            for (i, h) in half.iter().enumerate() {
                for j in 0..ut.ncols() {
                    ut[(i, j)] *= h;
                }
            }
            scalings.push(Scaling {
                r,
                rinv: ut,
                lambda: lam.clone_owned() ,
            });
        }
        if let Some(msg) = breakdown {
            best.status = ConicStatus::Breakdown(msg.to_string());
            best.iterations = iter;
            return best;
        }

        // Scaled constraint rows AW (m x total) and scaled objective.
        let congr = |z: &[DMatrix<f64>]| -> Vec<DMatrix<f64>> {
            z.iter()
                .zip(&scalings)
                .map(|(b, sc)| sym(&(sc.r.transpose() * b * &sc.r)))
                .collect()
        };
        let mut aw = DMatrix::zeros(m, total);
        for k in 0..m {
            let row = prob.a.row(k).transpose();
            let blocks = smat_all(&row, sizes);
            let g = congr(&blocks);
            let gs = svec_all(&g, total);
            aw.row_mut(k).copy_from(&gs.transpose());
        }
        let gc = congr(&c_blocks);
        let gc_s = svec_all(&gc, total);

        let schur = &aw * aw.transpose();
        let chol = match chol_jitter(&schur) {
            Some((c, _)) => c,
            None => {
                best.status = ConicStatus::Breakdown("Schur complement not factorable".into());
                best.iterations = iter;
                return best;
            }
        };

        // A(W Z W) for block-diagonal symmetric Z, via scaled coordinates.
        let a_of_wzw = |z: &[DMatrix<f64>]| -> DVector<f64> {
            let zs = svec_all(&congr(z), total);
            &aw * zs
        };

        let r_d_blocks = smat_all(&r_d, sizes);
        let u_vec = &aw * &gc_s; // A(WcW)
        let wcc = gc_s.dot(&gc_s);

        // Direction solve shared by predictor and corrector.  `comp` holds the
        // per-block complementarity targets in scaled space; `comp_tk` the
        // tau-kappa target.
        let solve_dir = |comp: &[DMatrix<f64>], comp_tk: f64| -> Option<(
            Vec<DMatrix<f64>>, // dx
            Vec<DMatrix<f64>>, // ds
            DVector<f64>,      // dy
            f64,               // dtau
            f64,               // dkappa
        )> {
            // G' per block: G'_ij = 2 comp_ij / (lambda_i + lambda_j).
            let gprime: Vec<DMatrix<f64>> = comp
                .iter()
                .zip(&scalings)
                .map(|(d, sc)| {
                    let n = d.nrows();
                    DMatrix::from_fn(n, n, |i, j| {
                        2.0 * d[(i, j)] / (sc.lambda[i] + sc.lambda[j])
                    })
                })
                .collect();
            // H_G = Rinv^T G' Rinv lives in the unscaled s-space.
            let h_g: Vec<DMatrix<f64>> = gprime
                .iter()
                .zip(&scalings)
                .map(|(g, sc)| sym(&(sc.rinv.transpose() * g * &sc.rinv)))
                .collect();

            let hmr: Vec<DMatrix<f64>> = h_g
                .iter()
                .zip(&r_d_blocks)
                .map(|(h, r)| h - r)
                .collect();
            let h0 = -&r_p - a_of_wzw(&hmr);
            let h1 = &prob.b + &u_vec;
            let dy0 = chol.solve(&h0);
            let dy1 = chol.solve(&h1);

            // e0 = <c, W (H_G - r_d) W> computed in scaled coordinates.
            let e0 = gc_s.dot(&svec_all(&congr(&hmr), total));
            let num = -r_g + e0 + u_vec.dot(&dy0) - prob.b.dot(&dy0) + comp_tk / st.tau;
            let den = prob.b.dot(&dy1) - u_vec.dot(&dy1) + wcc + st.kappa / st.tau;
            if !den.is_finite() || den.abs() < 1e-300 {
                return None;
            }
            let dtau = num / den;
            let dy = &dy0 + &dy1 * dtau;

            // dx = W (H_G - r_d + A^T dy - c dtau) W.
            let aty = smat_all(&(prob.a.transpose() * &dy), sizes);
            let inner: Vec<DMatrix<f64>> = hmr
                .iter()
                .zip(&aty)
                .zip(&c_blocks)
                .map(|((h, a), cb)| h + a - cb * dtau)
                .collect();
            let dx: Vec<DMatrix<f64>> = inner
                .iter()
                .zip(&scalings)
                .map(|(z, sc)| {
                    let w = &sc.r * sc.r.transpose();
                    sym(&(&w * z * &w))
                })
                .collect();
            let ds: Vec<DMatrix<f64>> = aty
                .iter()
                .zip(&c_blocks)
                .zip(&r_d_blocks)
                .map(|((a, cb), r)| -a + cb * dtau + r)
                .collect();
            let dkappa = (comp_tk - st.kappa * dtau) / st.tau;
            Some((dx, ds, dy, dtau, dkappa))
        };

        // Maximum cone step for a direction.
        let max_step = |dx: &[DMatrix<f64>], ds: &[DMatrix<f64>], dtau: f64, dkappa: f64| -> f64 {
            let mut alpha = f64::INFINITY;
            for ((dxb, dsb), sc) in dx.iter().zip(ds).zip(&scalings) {
                let dxt = sym(&(&sc.rinv * dxb * sc.rinv.transpose()));
                let dst = sym(&(sc.r.transpose() * dsb * &sc.r));
                let n = dxt.nrows();
                let scale_x = DMatrix::from_fn(n, n, |i, j| {
                    dxt[(i, j)] / (sc.lambda[i] * sc.lambda[j]).sqrt()
                });
                let scale_s = DMatrix::from_fn(n, n, |i, j| {
                    dst[(i, j)] / (sc.lambda[i] * sc.lambda[j]).sqrt()
                });
                let lx = lambda_min_sym(&scale_x);
                let ls = lambda_min_sym(&scale_s);
                if lx < 0.0 {
                    alpha = alpha.min(-1.0 / lx);
                }
                if ls < 0.0 {
                    alpha = alpha.min(-1.0 / ls);
                }
            }
            if dtau < 0.0 {
                alpha = alpha.min(-st.tau / dtau);
            }
            if dkappa < 0.0 {
                alpha = alpha.min(-st.kappa / dkappa);
            }
            alpha
        };

        // Predictor: full complementarity annihilation.
        let comp_aff: Vec<DMatrix<f64>> = scalings
            .iter()
            .map(|sc| {
                let n = sc.lambda.len();
                DMatrix::from_fn(n, n, |i, j| if i == j { -sc.lambda[i] * sc.lambda[i] } else { 0.0 })
            })
            .collect();
        let aff = solve_dir(&comp_aff, -st.tau * st.kappa);
        let (dx_a, ds_a, _dy_a, dtau_a, dkappa_a) = match aff {
            Some(d) => d,
            None => {
                best.status = ConicStatus::Breakdown("singular tau equation".into());
                best.iterations = iter;
                return best;
            }
        };

        let alpha_aff = max_step(&dx_a, &ds_a, dtau_a, dkappa_a).min(1.0);
        let mut gap_aff = (st.tau + alpha_aff * dtau_a) * (st.kappa + alpha_aff * dkappa_a);
        for ((xb, dxb), (sb, dsb)) in st.x.iter().zip(&dx_a).zip(st.s.iter().zip(&ds_a)) {
            gap_aff += (xb + dxb * alpha_aff).dot(&(sb + dsb * alpha_aff));
        }
        let mu_aff = gap_aff / (nu + 1.0);
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector: recenter and subtract the second-order predictor cross
        // terms (computed in scaled coordinates).
        let comp_cc: Vec<DMatrix<f64>> = scalings
            .iter()
            .zip(dx_a.iter().zip(&ds_a))
            .map(|(sc, (dxb, dsb))| {
                let dxt = sym(&(&sc.rinv * dxb * sc.rinv.transpose()));
                let dst = sym(&(sc.r.transpose() * dsb * &sc.r));
                let cross = (&dxt * &dst + &dst * &dxt) * 0.5;
                let n = sc.lambda.len();
                DMatrix::from_fn(n, n, |i, j| {
                    let base = if i == j {
                        sigma * mu - sc.lambda[i] * sc.lambda[i]
                    } else {
                        0.0
                    };
                    base - cross[(i, j)]
                })
            })
            .collect();
        let comp_tk = sigma * mu - st.tau * st.kappa - dtau_a * dkappa_a;
        let (dx, ds, dy, dtau, dkappa) = match solve_dir(&comp_cc, comp_tk) {
            Some(d) => d,
            None => {
                best.status = ConicStatus::Breakdown("singular tau equation".into());
                best.iterations = iter;
                return best;
            }
        };

        let alpha = (0.98 * max_step(&dx, &ds, dtau, dkappa)).min(1.0);
        if !alpha.is_finite() || alpha <= 1e-14 {
            best.status = ConicStatus::Breakdown("step length collapsed".into());
            best.iterations = iter;
            return best;
        }

        for (xb, dxb) in st.x.iter_mut().zip(&dx) {
            *xb += dxb * alpha;
            let s = sym(xb);
            xb.copy_from(&s);
        }
        for (sb, dsb) in st.s.iter_mut().zip(&ds) {
            *sb += dsb * alpha;
            let s = sym(sb);
            sb.copy_from(&s);
        }
        st.y += &dy * alpha;
        st.tau += alpha * dtau;
        st.kappa += alpha * dkappa;
    }

    best.iterations = opts.max_iter;
    best
}
