//! Inner problems of the alternating optimizers.
//!
//! Beamformer steps are small conic programs solved with [`crate::conic`];
//! phase steps over the unit-modulus set are closed form (a linear objective
//! with at most one linear side constraint) except for the robust P-CCP step,
//! which is a conic program over relaxed phases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{Beamformer, ChannelSet, PhaseVector};
use crate::conic::{ConicProgram, LinExpr, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{
    entrywise_phase_or_unit, hermitian_eig, lambda_max, row_mul, CMatrix, CVector, HermitianMatrix, C64,
};

/// `h_j(s) − 1 = constant + 2Re{sᴴ·linear} + sᴴ·quadratic·s`.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub constant: f64,
    pub linear: CVector,
    pub quadratic: HermitianMatrix,
}

impl QuadraticForm {
    /// `(h_Aj + sᴴH_j) R (h_Aj + sᴴH_j)ᴴ`, without the leading 1.
    pub fn eval(&self, s: &CVector) -> f64 {
        if s.is_empty() {
            return self.constant;
        }
        self.constant + 2.0 * s.dotc(&self.linear).re + self.quadratic.quad(s)
    }
}

pub fn quadratic_params(r: &HermitianMatrix, h_aj: &CVector, h_j: &CMatrix) -> QuadraticForm {
    let r = r.as_matrix();
    let rh = r * h_aj.conjugate();
    let constant = h_aj.dot(&rh).re;
    let linear = h_j * rh;
    let quadratic = HermitianMatrix::from_hermitian_part(h_j * r * h_j.adjoint());
    QuadraticForm { constant, linear, quadratic }
}

/// Quadratic form for `R = w wᴴ`.
pub fn quadratic_params_rank_one(w: &CVector, h_aj: &CVector, h_j: &CMatrix) -> QuadraticForm {
    let a = row_mul(h_aj, w);
    let v = h_j * w;
    QuadraticForm {
        constant: a.norm_sqr(),
        linear: &v * a.conj(),
        quadratic: HermitianMatrix::from_hermitian_part(&v * v.adjoint()),
    }
}

/// Tight quadratic upper bound `xᴴAx ≤ λ₁‖x‖² − 2Re{xᴴ·shift} + constant`.
#[derive(Debug, Clone)]
pub struct Majorizer {
    pub scale: f64,
    pub linear_shift: CVector,
    pub constant: f64,
}

impl Majorizer {
    pub fn bound(&self, x: &CVector) -> f64 {
        self.scale * x.norm_squared() - 2.0 * x.dotc(&self.linear_shift).re + self.constant
    }
}

pub fn majorize(a: &HermitianMatrix, x_tilde: &CVector) -> Result<Majorizer> {
    let l1 = lambda_max(a)?;
    let shift = x_tilde * C64::new(l1, 0.0) - a.as_matrix() * x_tilde;
    let constant = x_tilde.dotc(&shift).re;
    Ok(Majorizer { scale: l1, linear_shift: shift, constant })
}

/// Phase problem `max 2Re{sᴴ g}` over unit-modulus `s`, optionally subject
/// to `2Re{sᴴ d} ≤ budget`.
#[derive(Debug, Clone)]
pub struct LinearPhaseProblem {
    pub gain: CVector,
    pub constraint: Option<(CVector, f64)>,
}

#[derive(Debug, Clone)]
pub struct LinearPhaseSolution {
    pub s: PhaseVector,
    /// Penalty weight at which the side constraint holds; 0 if inactive.
    pub mu: f64,
    pub active: bool,
    /// A zero entry in the combined vector was resolved to phase 0.
    pub degenerate: bool,
}

/// `2Re{sᴴ v}`.
pub fn linear_value(s: &CVector, v: &CVector) -> f64 {
    2.0 * s.dotc(v).re
}

/// Closed-form maximizer of `2Re{sᴴ(g − μd)}`: `s = arg(g − μd)`.
pub fn penalized_phase(g: &CVector, d: &CVector, mu: f64) -> (PhaseVector, bool) {
    entrywise_phase_or_unit(&(g - d * C64::new(mu, 0.0)))
}

/// Solves a [`LinearPhaseProblem`] by the penalty-bisection rule: the
/// unconstrained maximizer if it satisfies the side constraint, else a
/// bisection on `μ` until the constraint holds with equality.
pub fn solve_linear_phase(problem: &LinearPhaseProblem) -> Result<LinearPhaseSolution> {
    let g = &problem.gain;
    let (s0, deg0) = entrywise_phase_or_unit(g);
    let Some((d, budget)) = &problem.constraint else {
        return Ok(LinearPhaseSolution { s: s0, mu: 0.0, active: false, degenerate: deg0 });
    };
    if linear_value(s0.as_vector(), d) <= *budget {
        return Ok(LinearPhaseSolution { s: s0, mu: 0.0, active: false, degenerate: deg0 });
    }
    let (mu, s, degenerate) = penalty_bisection(g, d, *budget)?;
    Ok(LinearPhaseSolution { s, mu, active: true, degenerate })
}

/// Finds the smallest `μ` (to tolerance) with `2Re{s(μ)ᴴ d} ≤ budget`,
/// where `s(μ) = arg(g − μd)` and the constraint value is non-increasing
/// in `μ`. Returns the feasible side of the final bracket.
pub fn penalty_bisection(g: &CVector, d: &CVector, budget: f64) -> Result<(f64, PhaseVector, bool)> {
    let range = 2.0 * d.iter().map(|z| z.norm()).sum::<f64>();
    let value = |mu: f64| {
        let (s, deg) = penalized_phase(g, d, mu);
        (linear_value(s.as_vector(), d), s, deg)
    };
    let dnorm = d.norm();
    if dnorm == 0.0 {
        return Err(Error::Infeasible("side constraint is constant and violated".into()));
    }
    let mut lo = 0.0;
    let mut hi = g.norm() / dnorm;
    if hi == 0.0 {
        hi = 1.0;
    }
    let mut hi_eval = value(hi);
    let mut doublings = 0;
    while hi_eval.0 > budget {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Infeasible(format!(
                "side constraint unattainable: min value {:e} exceeds budget {budget:e}",
                hi_eval.0
            )));
        }
        hi_eval = value(hi);
    }
    let tol = 1e-3 * range.max(f64::MIN_POSITIVE);
    for _ in 0..200 {
        if budget - hi_eval.0 <= tol || hi - lo <= 1e-14 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let mid_eval = value(mid);
        if mid_eval.0 <= budget {
            hi = mid;
            hi_eval = mid_eval;
        } else {
            lo = mid;
        }
    }
    Ok((hi, hi_eval.1, hi_eval.2))
}

#[derive(Debug, Clone)]
pub struct BeamformerSolution {
    pub w: Beamformer,
    /// `(1 + |h_B w|²)/(1 + |h_E w|²)`.
    pub objective: f64,
    /// `λ₂/λ₁` of the lifted covariance; 0 when it has rank ≤ 1.
    pub rank_ratio: f64,
    pub randomized: bool,
    /// Relative gap between the returned objective and the best dual bound.
    pub gap: f64,
}

fn ratio(b: &CVector, e: &CVector, w: &CVector) -> f64 {
    (1.0 + row_mul(b, w).norm_sqr()) / (1.0 + row_mul(e, w).norm_sqr())
}

/// Largest scaling of `w` keeping both power constraints.
pub(crate) fn feasible_scale(w: &CVector, p: &CVector, p_t: f64, p_i: f64) -> f64 {
    let pw = w.norm_squared();
    let iw = row_mul(p, w).norm_sqr();
    let mut k2 = f64::INFINITY;
    if pw > 0.0 {
        k2 = k2.min(p_t / pw);
    }
    if iw > 0.0 && p_i.is_finite() {
        k2 = k2.min(p_i / iw);
    }
    if k2.is_finite() {
        k2.sqrt()
    } else {
        0.0
    }
}

/// Orthonormal basis (columns) for the span of the given nonzero rows' conjugates.
fn span_basis(rows: &[&CVector], m: usize) -> Result<CMatrix> {
    let mut g = CMatrix::zeros(m, m);
    for r in rows {
        let n = r.norm();
        if n > 0.0 {
            let v = r.conjugate() / C64::new(n, 0.0);
            g += &v * v.adjoint();
        }
    }
    let eig = hermitian_eig(&HermitianMatrix::from_hermitian_part(g))?;
    let top = eig.largest();
    let cols: Vec<usize> = (0..m).filter(|&i| top > 0.0 && eig.values[i] > 1e-12 * top).collect();
    let mut q = CMatrix::zeros(m, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        q.set_column(k, &eig.vectors.column(i));
    }
    Ok(q)
}

/// Real parameterization of a k×k Hermitian matrix: diagonal entries, then
/// real parts and imaginary parts of the strict upper triangle.
fn herm_dim(k: usize) -> usize {
    k * k
}

fn herm_from(y: &[f64], k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(k, k);
    let mut idx = 0;
    for j in 0..k {
        m[(j, j)] = C64::new(y[idx], 0.0);
        idx += 1;
    }
    for j in 0..k {
        for l in j + 1..k {
            m[(j, l)].re = y[idx];
            m[(l, j)].re = y[idx];
            idx += 1;
        }
    }
    for j in 0..k {
        for l in j + 1..k {
            m[(j, l)].im = y[idx];
            m[(l, j)].im = -y[idx];
            idx += 1;
        }
    }
    m
}

/// Coefficients `c` with `tr(M·Y) = cᵀy` for Hermitian `M`.
fn herm_coeffs(m: &CMatrix, k: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(herm_dim(k));
    for j in 0..k {
        c.push(m[(j, j)].re);
    }
    for j in 0..k {
        for l in j + 1..k {
            c.push(2.0 * m[(j, l)].re);
        }
    }
    for j in 0..k {
        for l in j + 1..k {
            c.push(2.0 * m[(j, l)].im);
        }
    }
    c
}

fn herm_basis(k: usize) -> Vec<(usize, CMatrix)> {
    (0..herm_dim(k))
        .map(|i| {
            let mut y = vec![0.0; herm_dim(k)];
            y[i] = 1.0;
            (i, herm_from(&y, k))
        })
        .collect()
}

fn rank_one_hermitian(a: &CVector) -> CMatrix {
    // aᴴa for a row vector a.
    a.conjugate() * a.transpose()
}

/// `(Y₀ + ηI)^{1/2}` where `Y₀` lifts the IPC-free optimum direction in
/// whitened coordinates (generalized principal eigenvector of
/// `(M⁻¹ + B̃, M⁻¹ + Ẽ)`), scaled back to feasibility.
fn precondition(bt: &CVector, et: &CVector, pt: &CVector, m_inv: &CMatrix) -> Result<CMatrix> {
    let k = bt.len();
    let den = HermitianMatrix::from_hermitian_part(m_inv + rank_one_hermitian(et));
    let de = hermitian_eig(&den)?;
    let lmax = de.largest();
    let dinv_half = {
        let diag = CVector::from_iterator(k, de.values.iter().map(|l| C64::new(1.0 / l.max(1e-300 * lmax).sqrt(), 0.0)));
        &de.vectors * CMatrix::from_diagonal(&diag) * de.vectors.adjoint()
    };
    let num = m_inv + rank_one_hermitian(bt);
    let g = HermitianMatrix::from_hermitian_part(&dinv_half * num * &dinv_half);
    let ge = hermitian_eig(&g)?;
    let mut v = &dinv_half * ge.vectors.column(0).into_owned();
    // Scale onto the feasible boundary: vᴴM⁻¹v ≤ 1 and |p̃v|² ≤ 1.
    let pw = v.dotc(&(m_inv * &v)).re.max(row_mul(pt, &v).norm_sqr());
    if pw > 0.0 {
        v /= C64::new(pw.sqrt(), 0.0);
    }
    let xi = 1.0 / (1.0 + row_mul(et, &v).norm_sqr());
    let y0 = (&v * v.adjoint()) * C64::new(xi, 0.0);
    let eta = (1e-3 * y0.trace().re / k as f64).max(1e-12);
    let h = HermitianMatrix::from_hermitian_part(y0 + CMatrix::identity(k, k) * C64::new(eta, 0.0));
    let he = hermitian_eig(&h)?;
    let diag = CVector::from_iterator(k, he.values.iter().map(|l| C64::new(l.max(0.0).sqrt(), 0.0)));
    Ok(&he.vectors * CMatrix::from_diagonal(&diag) * he.vectors.adjoint())
}

/// Relative duality gap accepted from the dual method before falling back
/// to the interior-point solve.
pub const BEAMFORMER_GAP_TOL: f64 = 1e-9;

/// Globally optimal beamformer for fixed phases.
///
/// The Charnes-Cooper lift of the rate-ratio problem has the dual
/// `min t = 1 + a + c` over `a, c ≥ 0` with `t·Ẽ + a·I + c·P̃ − B̃ ⪰ 0`
/// (power-normalized rank-one matrices). For fixed `c` the smallest feasible
/// `a` is found by bisection on `λ_min`, and the convex function of `c` is
/// minimized by golden section. A null vector of the optimal dual slack is
/// a rank-one primal solution; the returned gap compares it with the dual
/// bound. If that gap exceeds [`BEAMFORMER_GAP_TOL`], the lifted SDP is solved
/// directly with the interior-point method and the better point is kept.
pub fn solve_beamformer_full(s: &PhaseVector, ch: &ChannelSet, p_t: f64, p_i: f64) -> Result<BeamformerSolution> {
    if !(p_t > 0.0) || !(p_i > 0.0) {
        return Err(Error::InvalidInput("P_T and P_I must be positive".into()));
    }
    let b = ch.bob.effective(s);
    let e = ch.eve.effective(s);
    let p = ch.pr.effective(s);
    let dual = beamformer_dual(&b, &e, &p, ch.m, p_t, p_i)?;
    if dual.gap <= BEAMFORMER_GAP_TOL {
        return Ok(dual);
    }
    match solve_beamformer_sdp(s, ch, p_t, p_i) {
        Ok(sdp) if sdp.objective >= dual.objective => Ok(BeamformerSolution { gap: sdp.gap.min(dual.gap), ..sdp }),
        _ => Ok(dual),
    }
}

fn beamformer_dual(b: &CVector, e: &CVector, p: &CVector, m: usize, p_t: f64, p_i: f64) -> Result<BeamformerSolution> {
    let ipc = p_i.is_finite();
    let mut rows = vec![b, e];
    if ipc {
        rows.push(p);
    }
    let q = span_basis(&rows, m)?;
    let k = q.ncols();
    let zero = BeamformerSolution { w: Beamformer::zeros(m), objective: 1.0, rank_ratio: 0.0, randomized: false, gap: 0.0 };
    if k == 0 || b.norm() == 0.0 {
        return Ok(zero);
    }
    let proj = |v: &CVector, scale: f64| (v.transpose() * &q).transpose() * C64::new(scale.sqrt(), 0.0);
    let bm = rank_one_hermitian(&proj(b, p_t));
    let em = rank_one_hermitian(&proj(e, p_t));
    let pm = if ipc { rank_one_hermitian(&proj(p, p_t / p_i)) } else { CMatrix::zeros(k, k) };
    let ident = CMatrix::identity(k, k);
    let slack = |a: f64, c: f64| {
        HermitianMatrix::from_hermitian_part(&em * C64::new(1.0 + a + c, 0.0) + &ident * C64::new(a, 0.0) + &pm * C64::new(c, 0.0) - &bm)
    };
    let lmin = |a: f64, c: f64| -> Result<f64> { Ok(hermitian_eig(&slack(a, c))?.smallest()) };
    let a_hi0 = bm.trace().re;
    // Smallest a ≥ 0 keeping the slack PSD (upper end of the final bracket).
    let a_of = |c: f64| -> Result<f64> {
        if lmin(0.0, c)? >= 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, a_hi0);
        while lmin(hi, c)? < 0.0 {
            hi *= 2.0;
        }
        while hi - lo > 1e-14 * hi {
            let mid = 0.5 * (lo + hi);
            if lmin(mid, c)? >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    };
    let dual_value = |c: f64| -> Result<f64> { Ok(1.0 + a_of(c)? + c) };
    // D is convex with sign D'(c) = sign(1 − v̂ᴴP̃v̂) for the unit null vector
    // v̂ of the slack at (a(c), c); bisecting on that sign is far better
    // conditioned than comparing D values in its flat valley.
    let null_vec = |c: f64| -> Result<CVector> {
        let eig = hermitian_eig(&slack(a_of(c)?, c))?;
        Ok(eig.vectors.column(k - 1).into_owned())
    };
    let ipc_quotient = |v: &CVector| v.dotc(&(&pm * v)).re / v.norm_squared();
    let d0 = dual_value(0.0)?;
    let mut c_best = 0.0;
    let mut d_best = d0;
    let mut c_candidates = vec![0.0];
    if ipc && d0 > 1.0 && ipc_quotient(&null_vec(0.0)?) > 1.0 {
        let (mut lo, mut hi) = (0.0, d0 - 1.0);
        for _ in 0..200 {
            if hi - lo <= 1e-15 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if ipc_quotient(&null_vec(mid)?) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        c_candidates = vec![lo, hi];
        for &c in &c_candidates {
            let d = dual_value(c)?;
            if d < d_best {
                c_best = c;
                d_best = d;
            }
        }
    }
    let a_best = a_of(c_best)?;
    let eig = hermitian_eig(&slack(a_best, c_best))?;

    // Candidate primal points from the (near-)null space of the slack.
    let bq = proj(b, 1.0);
    let eq = proj(e, 1.0);
    let pq = proj(p, 1.0);
    let eval = |v: &CVector| {
        let sc = feasible_scale(v, &pq, p_t, if ipc { p_i } else { f64::INFINITY });
        let w = v * C64::new(sc, 0.0);
        (ratio(&bq, &eq, &w), w)
    };
    let v1 = eig.vectors.column(k - 1).into_owned();
    let mut best = (1.0, CVector::zeros(k));
    let mut consider = |v: &CVector| {
        let (r, w) = eval(v);
        if r > best.0 {
            best = (r, w);
        }
    };
    for &c in &c_candidates {
        consider(&null_vec(c)?);
    }
    consider(&v1);
    if ipc && k >= 2 {
        // Mix the two smallest eigenvectors so the IPC holds with equality
        // at full power, as complementary slackness requires when c > 0.
        let v2 = eig.vectors.column(k - 2).into_owned();
        let basis = CMatrix::from_columns(&[v1.clone(), v2]);
        let restricted = HermitianMatrix::from_hermitian_part(basis.adjoint() * &pm * &basis);
        let re = hermitian_eig(&restricted)?;
        let (hi_q, lo_q) = (re.values[0], re.values[1]);
        if lo_q <= 1.0 && 1.0 <= hi_q && hi_q > lo_q {
            let sin2 = (1.0 - lo_q) / (hi_q - lo_q);
            let coeff = re.vectors.column(1) * C64::new((1.0 - sin2).sqrt(), 0.0)
                + re.vectors.column(0) * C64::new(sin2.sqrt(), 0.0);
            consider(&(&basis * coeff));
        }
    }
    let (obj, wq) = best;
    let gap = ((d_best - obj) / obj).max(0.0);
    Ok(BeamformerSolution { w: Beamformer(&q * wq), objective: obj, rank_ratio: 0.0, randomized: false, gap })
}

/// Interior-point solve of the lifted SDP with rank-one extraction
/// (Gaussian randomization when the solution is not rank one).
pub fn solve_beamformer_sdp(s: &PhaseVector, ch: &ChannelSet, p_t: f64, p_i: f64) -> Result<BeamformerSolution> {
    if !(p_t > 0.0) || !(p_i > 0.0) {
        return Err(Error::InvalidInput("P_T and P_I must be positive".into()));
    }
    let b = ch.bob.effective(s);
    let e = ch.eve.effective(s);
    let p = ch.pr.effective(s);
    let m = ch.m;
    let ipc = p_i.is_finite();
    let mut rows = vec![&b, &e];
    if ipc {
        rows.push(&p);
    }
    let q = span_basis(&rows, m)?;
    let k = q.ncols();
    let zero = || BeamformerSolution {
        w: Beamformer::zeros(m),
        objective: 1.0,
        rank_ratio: 0.0,
        randomized: false,
        gap: 0.0,
    };
    if k == 0 || b.norm() == 0.0 {
        return Ok(zero());
    }
    let bh = (b.transpose() * &q).transpose();
    let eh = (e.transpose() * &q).transpose();
    let ph = (p.transpose() * &q).transpose();

    // Whitened coordinates w = √P_T·Q·T·v with T = M^{-1/2}, so every lifted
    // coefficient is bounded by 1 whatever the channel scale.
    let mut m_mat = CMatrix::identity(k, k)
        + (rank_one_hermitian(&bh) + rank_one_hermitian(&eh)) * C64::new(p_t, 0.0);
    if ipc {
        m_mat += rank_one_hermitian(&ph) * C64::new(p_t / p_i, 0.0);
    }
    let m_eig = hermitian_eig(&HermitianMatrix::from_hermitian_part(m_mat))?;
    let t_half = |pow: f64| {
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            k,
            m_eig.values.iter().map(|l| C64::new(l.powf(pow), 0.0)),
        ));
        &m_eig.vectors * d * m_eig.vectors.adjoint()
    };
    let t = t_half(-0.5);
    let m_inv = t_half(-1.0);
    let whiten = |v: &CVector, scale: f64| (v.transpose() * &t).transpose() * C64::new(scale.sqrt(), 0.0);
    let bt = whiten(&bh, p_t);
    let et = whiten(&eh, p_t);
    let pt = whiten(&ph, if ipc { p_t / p_i } else { 0.0 });

    // Second change of variables Y = D·Z·D around the IPC-free optimum so
    // the lifted solution is O(1) even when the rate ratio is huge.
    let d = precondition(&bt, &et, &pt, &m_inv)?;
    let nv = herm_dim(k);
    let big_b = &d * rank_one_hermitian(&bt) * &d;
    let big_e = &d * rank_one_hermitian(&et) * &d;
    let big_p = &d * rank_one_hermitian(&pt) * &d;
    let m_inv = &d * m_inv * &d;
    let obj = herm_coeffs(&(big_b - &big_e), k);
    let e_c = herm_coeffs(&big_e, k);
    // ξ = 1 − tr(Ẽ·Y)
    let xi = LinExpr { constant: 1.0, coeffs: e_c.iter().map(|c| -c).collect() };
    let tr = LinExpr { constant: 0.0, coeffs: herm_coeffs(&HermitianMatrix::from_hermitian_part(m_inv.clone()).into_matrix(), k) };
    let mut prog = ConicProgram::new(nv);
    prog.maximize(obj);
    prog.add_nonneg(xi.clone());
    prog.add_nonneg(xi.clone().plus(&tr.clone().scaled(-1.0)));
    if ipc {
        let pc = LinExpr { constant: 0.0, coeffs: herm_coeffs(&big_p, k) };
        prog.add_nonneg(xi.clone().plus(&pc.scaled(-1.0)));
    }
    prog.add_hermitian_lmi(&CMatrix::zeros(k, k), &herm_basis(k));
    let sol = prog.solve(&SolverOptions::default())?;
    if sol.status != SolveStatus::Optimal && (sol.gap > 1e-7 || sol.primal_residual.max(sol.dual_residual) > 1e-6) {
        return Err(Error::Solver(format!(
            "beamformer SDP did not converge: gap {:e}, residuals {:e}/{:e}",
            sol.gap, sol.primal_residual, sol.dual_residual
        )));
    }
    let y = &d * herm_from(&sol.y, k) * &d;
    let xi_val = xi.eval(&sol.y);
    if !(xi_val > 0.0) {
        return Err(Error::Solver(format!("degenerate homogenization variable {xi_val:e}")));
    }
    let yn = HermitianMatrix::from_hermitian_part(y / C64::new(xi_val, 0.0));
    let eig = hermitian_eig(&yn)?;
    let l1 = eig.largest().max(0.0);
    let top_scale = yn.trace().abs().max(1e-300);
    if l1 <= 1e-12 * top_scale.max(1.0) {
        return Ok(BeamformerSolution { gap: sol.gap, ..zero() });
    }
    let rank_ratio = if k > 1 { (eig.values[1].max(0.0)) / l1 } else { 0.0 };
    let qt = &q * &t;
    let v1 = eig.vectors.column(0).into_owned();
    let mut w = (&qt * v1) * C64::new((p_t * l1).sqrt(), 0.0);
    let k_feas = feasible_scale(&w, &p, p_t, if ipc { p_i } else { f64::INFINITY });
    if k_feas < 1.0 {
        w *= C64::new(k_feas, 0.0);
    }
    let mut best = ratio(&b, &e, &w);
    let mut randomized = false;
    if rank_ratio > 1e-6 {
        // Gaussian randomization over the lifted covariance.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
        let half = {
            let mut h = eig.vectors.clone();
            for (j, lam) in eig.values.iter().enumerate() {
                let sc = C64::new(lam.max(0.0).sqrt(), 0.0);
                h.column_mut(j).scale_mut(sc.re);
            }
            h
        };
        for _ in 0..1000 {
            let z = CVector::from_fn(k, |_, _| crate::channel::complex_normal(&mut rng));
            let dir = &qt * (&half * z);
            let gb = row_mul(&b, &dir).norm_sqr();
            let ge = row_mul(&e, &dir).norm_sqr();
            if gb <= ge {
                continue;
            }
            let sc = feasible_scale(&dir, &p, p_t, if ipc { p_i } else { f64::INFINITY });
            let cand = &dir * C64::new(sc, 0.0);
            let val = ratio(&b, &e, &cand);
            if val > best {
                best = val;
                w = cand;
                randomized = true;
            }
        }
    }
    if best < 1.0 {
        return Ok(BeamformerSolution { gap: sol.gap, rank_ratio, ..zero() });
    }
    Ok(BeamformerSolution { w: Beamformer(w), objective: best, rank_ratio, randomized, gap: sol.gap })
}

/// Normalized error radii of the eavesdropper's direct and cascaded channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyBounds {
    pub eps_e: f64,
    pub eps_ae: f64,
}

impl UncertaintyBounds {
    /// Converts raw radii (amplitude units) by dividing by σ_E.
    pub fn from_raw(eps_e_raw: f64, eps_ae_raw: f64, sigma2_e: f64) -> Result<Self> {
        if !(eps_e_raw >= 0.0) || !(eps_ae_raw >= 0.0) || !(sigma2_e > 0.0) {
            return Err(Error::InvalidInput("error radii must be >= 0 and noise power > 0".into()));
        }
        let s = sigma2_e.sqrt();
        Ok(UncertaintyBounds { eps_e: eps_e_raw / s, eps_ae: eps_ae_raw / s })
    }

    pub fn zero() -> Self {
        UncertaintyBounds { eps_e: 0.0, eps_ae: 0.0 }
    }

    /// `ε_AE + √n·ε_E`: worst-case extra Eve amplitude per unit ‖w‖.
    pub fn radius(&self, n: usize) -> f64 {
        self.eps_ae + (n as f64).sqrt() * self.eps_e
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmiMultipliers {
    pub u1: f64,
    pub u2: f64,
}

impl LmiMultipliers {
    /// Multipliers certifying the robust LMI whenever
    /// `|x| + radius·‖w‖ ≤ √τ` holds.
    pub fn certify(w_norm: f64, tau: f64, eps: &UncertaintyBounds, n: usize) -> Self {
        let st = tau.max(0.0).sqrt();
        let u1 = if n > 0 { st / (n as f64).sqrt() * eps.eps_e * w_norm } else { 0.0 };
        LmiMultipliers { u1, u2: st * eps.eps_ae * w_norm }
    }
}

/// The (2m+2)-dimensional robust LMI matrix
/// `[[τ−n·u1−u2, x, 0, 0], [x*, 1, ε_E wᴴ, ε_AE wᴴ], [0, ε_E w, u1 I, 0], [0, ε_AE w, 0, u2 I]]`
/// with `x = (ĥ_AE + sᴴĤ_E) w`.
pub fn robust_lmi_matrix(x: C64, w: &CVector, tau: f64, eps: &UncertaintyBounds, n: usize, u: &LmiMultipliers) -> CMatrix {
    let m = w.len();
    let d = 2 * m + 2;
    let mut a = CMatrix::zeros(d, d);
    a[(0, 0)] = C64::new(tau - n as f64 * u.u1 - u.u2, 0.0);
    a[(0, 1)] = x;
    a[(1, 0)] = x.conj();
    a[(1, 1)] = C64::new(1.0, 0.0);
    for k in 0..m {
        a[(1, 2 + k)] = w[k].conj() * eps.eps_e;
        a[(2 + k, 1)] = w[k] * eps.eps_e;
        a[(1, 2 + m + k)] = w[k].conj() * eps.eps_ae;
        a[(2 + m + k, 1)] = w[k] * eps.eps_ae;
        a[(2 + k, 2 + k)] = C64::new(u.u1, 0.0);
        a[(2 + m + k, 2 + m + k)] = C64::new(u.u2, 0.0);
    }
    a
}

/// Worst-case Eve amplitude `|x| + radius·‖w‖`.
pub fn worst_case_eve_amplitude(s: &PhaseVector, w: &CVector, ch: &ChannelSet, eps: &UncertaintyBounds) -> f64 {
    row_mul(&ch.eve.effective(s), w).norm() + eps.radius(ch.n) * w.norm()
}

#[derive(Debug, Clone)]
pub struct RobustStep {
    pub w: Beamformer,
    pub u: LmiMultipliers,
    /// `|h_B w|²` (normalized SNR) at the returned beamformer.
    pub objective: f64,
}

/// Real variables `[Re w, Im w]` used by the beamformer programs.
fn row_parts(nv: usize, a: &CVector, scale: f64, c: C64) -> (LinExpr, LinExpr) {
    // a·w with w_k = x_k + i·x_{m+k}
    let m = a.len();
    let mut re = LinExpr::constant(nv, c.re);
    let mut im = LinExpr::constant(nv, c.im);
    for k in 0..m {
        re.coeffs[k] = a[k].re * scale;
        re.coeffs[m + k] = -a[k].im * scale;
        im.coeffs[k] = a[k].im * scale;
        im.coeffs[m + k] = a[k].re * scale;
    }
    (re, im)
}

fn w_from(y: &[f64], m: usize, scale: f64) -> CVector {
    CVector::from_fn(m, |k, _| C64::new(y[k], y[m + k]) * scale)
}

/// One SCA step of the robust beamformer problem: maximizes the
/// linearization of `|h_B w|²` at `w_tilde` under the power budget, the
/// interference limit and the worst-case Eve power bound `τ`.
#[allow(clippy::too_many_arguments)]
pub fn solve_beamformer_robust_step(
    s: &PhaseVector,
    tau: f64,
    ch: &ChannelSet,
    eps: &UncertaintyBounds,
    p_t: f64,
    p_i: f64,
    w_tilde: &Beamformer,
) -> Result<RobustStep> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput("tau must be >= 0".into()));
    }
    let m = ch.m;
    let b = ch.bob.effective(s);
    let x = ch.eve.effective(s);
    let p = ch.pr.effective(s);
    let rho = eps.radius(ch.n);
    let w_t = w_tilde.as_vector();
    let zero = RobustStep { w: Beamformer::zeros(m), u: LmiMultipliers { u1: 0.0, u2: 0.0 }, objective: 0.0 };
    let amp = row_mul(&x, w_t).norm() + rho * w_t.norm();
    if amp > tau.sqrt() * (1.0 + 1e-6) + 1e-12 {
        return Err(Error::Infeasible("w_tilde violates the worst-case Eve bound".into()));
    }
    if tau == 0.0 && rho > 0.0 {
        return Ok(zero);
    }
    let bw = row_mul(&b, w_t);
    // w = √P_T·v, variables [Re v, Im v, t̂] with |x w| ≤ √τ·t̂.
    let sc = p_t.sqrt();
    let nv = 2 * m + 1;
    let mut prog = ConicProgram::new(nv);
    let g = &b * bw.conj();
    let (obj, _) = row_parts(nv, &g, sc, C64::new(0.0, 0.0));
    let gmax = obj.coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let mut objective = obj.coeffs.clone();
    if gmax > 0.0 {
        objective.iter_mut().for_each(|c| *c /= gmax);
    } else {
        // Flat linearization at w_tilde = 0: step along Re{h_B w} instead.
        let (re, _) = row_parts(nv, &b, 1.0, C64::new(0.0, 0.0));
        objective = re.coeffs;
    }
    prog.maximize(objective);
    let vs: Vec<LinExpr> = (0..2 * m).map(|i| LinExpr::var(nv, i)).collect();
    prog.add_soc(LinExpr::constant(nv, 1.0), &vs);
    if p_i.is_finite() {
        let (re, im) = row_parts(nv, &p, sc / p_i.sqrt(), C64::new(0.0, 0.0));
        prog.add_soc(LinExpr::constant(nv, 1.0), &[re, im]);
    }
    let t = LinExpr::var(nv, 2 * m);
    if tau > 0.0 {
        let k = sc / tau.sqrt();
        let (re, im) = row_parts(nv, &x, k, C64::new(0.0, 0.0));
        prog.add_soc(t.clone(), &[re, im]);
        let slack = LinExpr::constant(nv, 1.0).plus(&t.scaled(-1.0));
        if rho > 0.0 {
            let rv: Vec<LinExpr> = vs.iter().map(|v| v.clone().scaled(rho * k)).collect();
            prog.add_soc(slack, &rv);
        } else {
            prog.add_nonneg(slack);
        }
    } else {
        let (re, im) = row_parts(nv, &x, 1.0, C64::new(0.0, 0.0));
        prog.add_equality(re);
        prog.add_equality(im);
        prog.add_equality(t);
    }
    let sol = prog.solve(&SolverOptions::default())?;
    if sol.status != SolveStatus::Optimal && sol.gap > 1e-6 {
        return Err(Error::Solver(format!("robust beamformer step did not converge (gap {:e})", sol.gap)));
    }
    let mut w = w_from(&sol.y, m, sc);
    // Pull back onto the feasible set if the interior-point iterate overshoots.
    let mut k_feas = feasible_scale(&w, &p, p_t, p_i).min(1.0);
    let amp = row_mul(&x, &w).norm() + rho * w.norm();
    if amp > 0.0 {
        k_feas = k_feas.min(tau.sqrt() / amp);
    }
    w *= C64::new(k_feas.min(1.0), 0.0);
    let mut objective = row_mul(&b, &w).norm_sqr();
    let prev = bw.norm_sqr();
    let mut w_out = w;
    if objective < prev {
        w_out = w_t.clone();
        objective = prev;
    }
    let u = LmiMultipliers::certify(w_out.norm(), tau, eps, ch.n);
    Ok(RobustStep { w: Beamformer(w_out), u, objective })
}

/// Penalty state of the P-CCP phase iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PccpState {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub gamma: f64,
    pub gamma_max: f64,
    pub t: f64,
}

impl PccpState {
    pub fn new(n: usize) -> Self {
        PccpState { b: vec![0.0; n], c: vec![0.0; n], gamma: 10.0, gamma_max: 1e3, t: 5.0 }
    }

    pub fn slack_sum(&self) -> f64 {
        self.b.iter().chain(&self.c).sum()
    }

    pub fn next_gamma(&self) -> f64 {
        (self.t * self.gamma).min(self.gamma_max)
    }
}

/// Scale of the linearized P-CCP objective; penalty weights are relative to it.
pub const PCCP_GAIN_SCALE: f64 = 30.0;

/// One convex P-CCP step over relaxed phases. The slack ring
/// `1 − b_i ≤ |s_i|² ≤ 1 + c_i` has its lower side linearized at `s_tilde`;
/// the objective is the linearization of `|h_B(s) w|²` minus
/// `γ·(Σb + Σc)`.
#[allow(clippy::too_many_arguments)]
pub fn pccp_phase_step(
    w: &Beamformer,
    tau: f64,
    ch: &ChannelSet,
    eps: &UncertaintyBounds,
    s_tilde: &PhaseVector,
    state: &PccpState,
    p_i: f64,
) -> Result<(PhaseVector, PccpState)> {
    let n = ch.n;
    let wv = w.as_vector();
    let st = s_tilde.as_vector();
    // Variables: [Re s (n), Im s (n), b (n), c (n)].
    let nv = 4 * n;
    let v = &ch.bob.cascade * wv;
    let alpha = row_mul(&ch.bob.direct, wv);
    let beta = alpha + st.dotc(&v);
    let g = v.map(|z| z.conj()) * beta;
    let gmax = g.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let gs = if gmax > 0.0 { PCCP_GAIN_SCALE / gmax } else { 1.0 };
    let mut objective = vec![0.0; nv];
    for i in 0..n {
        // 2Re{s_i g_i}
        objective[i] = 2.0 * g[i].re * gs;
        objective[n + i] = -2.0 * g[i].im * gs;
        objective[2 * n + i] = -state.gamma;
        objective[3 * n + i] = -state.gamma;
    }
    let mut prog = ConicProgram::new(nv);
    prog.maximize(objective);
    for i in 0..n {
        let bi = LinExpr::var(nv, 2 * n + i);
        let ci = LinExpr::var(nv, 3 * n + i);
        prog.add_nonneg(bi.clone());
        prog.add_nonneg(ci.clone());
        // |s_i|² ≤ 1 + c_i
        prog.add_squared_norm_le(LinExpr::constant(nv, 1.0).plus(&ci), &[LinExpr::var(nv, i), LinExpr::var(nv, n + i)]);
        // 2Re{s̃_i* s_i} − |s̃_i|² ≥ 1 − b_i
        let lin = LinExpr::constant(nv, -st[i].norm_sqr() - 1.0)
            .add_term(i, 2.0 * st[i].re)
            .add_term(n + i, 2.0 * st[i].im)
            .plus(&bi);
        prog.add_nonneg(lin);
    }
    // sᴴq = Σ conj(s_i) q_i: real part Σ (sr qr + si qi), imag part Σ (sr qi − si qr).
    let conj_parts = |q: &CVector, c0: C64, k: f64| {
        let mut re = LinExpr::constant(nv, c0.re * k);
        let mut im = LinExpr::constant(nv, c0.im * k);
        for i in 0..n {
            re.coeffs[i] = q[i].re * k;
            re.coeffs[n + i] = q[i].im * k;
            im.coeffs[i] = q[i].im * k;
            im.coeffs[n + i] = -q[i].re * k;
        }
        (re, im)
    };
    if p_i.is_finite() {
        let q = &ch.pr.cascade * wv;
        let p0 = row_mul(&ch.pr.direct, wv);
        let (re, im) = conj_parts(&q, p0, 1.0 / p_i.sqrt());
        prog.add_soc(LinExpr::constant(nv, 1.0), &[re, im]);
    }
    let r = &ch.eve.cascade * wv;
    let x0 = row_mul(&ch.eve.direct, wv);
    let budget = tau.max(0.0).sqrt() - eps.radius(n) * wv.norm();
    let scale_ref = (x0.norm() + r.iter().map(|z| z.norm()).sum::<f64>()).max(f64::MIN_POSITIVE);
    if budget > 1e-9 * scale_ref {
        let (re, im) = conj_parts(&r, x0, 1.0 / budget);
        prog.add_soc(LinExpr::constant(nv, 1.0), &[re, im]);
    } else if scale_ref > f64::MIN_POSITIVE {
        let (re, im) = conj_parts(&r, x0, 1.0 / scale_ref);
        prog.add_equality(re);
        prog.add_equality(im);
    }
    let sol = prog.solve(&SolverOptions::default())?;
    if sol.status != SolveStatus::Optimal && sol.gap > 1e-6 {
        return Err(Error::Solver(format!("P-CCP step did not converge (gap {:e})", sol.gap)));
    }
    let s = CVector::from_fn(n, |i, _| C64::new(sol.y[i], sol.y[n + i]));
    let mut next = state.clone();
    for i in 0..n {
        // Tightest slacks consistent with the returned phases.
        let lower = 1.0 - (2.0 * (st[i].conj() * s[i]).re - st[i].norm_sqr());
        next.b[i] = lower.max(0.0);
        next.c[i] = (s[i].norm_sqr() - 1.0).max(0.0);
    }
    next.gamma = state.next_gamma();
    Ok((PhaseVector::from_raw(s), next))
}

#[derive(Debug, Clone)]
pub struct MinPowerStep {
    pub w: Beamformer,
}

/// One SCA step of the power-minimization problem: minimizes `‖w‖²` subject
/// to the interference limit and the QoS target linearized at `w_tilde`.
pub fn solve_minpower_step(s: &PhaseVector, ch: &ChannelSet, t: f64, p_i: f64, w_tilde: &Beamformer) -> Result<MinPowerStep> {
    let m = ch.m;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput("QoS target must be finite and >= 0".into()));
    }
    if t == 0.0 {
        return Ok(MinPowerStep { w: Beamformer::zeros(m) });
    }
    let b = ch.bob.effective(s);
    let p = ch.pr.effective(s);
    let bn = b.norm();
    if bn == 0.0 {
        return Err(Error::Infeasible("Bob's effective channel is zero".into()));
    }
    // w = √T/‖b‖·v; the QoS becomes 2Re{conj(b̂ṽ) b̂v} − |b̂ṽ|² ≥ 1.
    let sc = t.sqrt() / bn;
    let bh = &b / C64::new(bn, 0.0);
    let vt = w_tilde.as_vector() / C64::new(sc, 0.0);
    let bv = row_mul(&bh, &vt);
    let a = &bh * bv.conj();
    let nv = 2 * m + 1;
    let mut prog = ConicProgram::new(nv);
    let mut obj = vec![0.0; nv];
    obj[2 * m] = -1.0;
    prog.maximize(obj);
    let vs: Vec<LinExpr> = (0..2 * m).map(|i| LinExpr::var(nv, i)).collect();
    prog.add_soc(LinExpr::var(nv, 2 * m), &vs);
    let (re, _) = row_parts(nv, &a, 2.0, C64::new(-bv.norm_sqr() - 1.0, 0.0));
    prog.add_nonneg(re);
    if p_i.is_finite() {
        let k = sc / p_i.sqrt();
        // Feasibility pre-check: the QoS direction must not be confined to the PR row.
        let pn = p.norm_squared();
        if pn > 0.0 {
            let lam = row_mul(&a, &p.conjugate()) / C64::new(pn, 0.0);
            let perp = &a - &p * lam;
            if perp.norm() <= 1e-9 * a.norm() && 2.0 * lam.norm() / k - bv.norm_sqr() < 1.0 {
                return Err(Error::Infeasible("QoS target unattainable under the interference limit".into()));
            }
        }
        let (pre, pim) = row_parts(nv, &p, k, C64::new(0.0, 0.0));
        prog.add_soc(LinExpr::constant(nv, 1.0), &[pre, pim]);
    }
    if a.norm() == 0.0 {
        return Err(Error::InvalidInput("w_tilde gives zero Bob gain; linearized QoS is empty".into()));
    }
    let sol = prog.solve(&SolverOptions::default())?;
    if sol.status != SolveStatus::Optimal && sol.gap > 1e-6 {
        return Err(Error::Solver(format!("min-power step did not converge (gap {:e})", sol.gap)));
    }
    let mut w = w_from(&sol.y, m, sc);
    // Interior-point solutions sit marginally inside; pull onto the IPC if over.
    if p_i.is_finite() {
        let iw = row_mul(&p, &w).norm_sqr();
        if iw > p_i {
            w *= C64::new((p_i / iw).sqrt(), 0.0);
        }
    }
    Ok(MinPowerStep { w: Beamformer(w) })
}

/// Scales `w` so that `|h_B w|² = t` exactly (normalized Bob channel).
pub fn scale_to_snr(w: &CVector, b: &CVector, t: f64) -> CVector {
    let g = row_mul(b, w).norm_sqr();
    if g == 0.0 {
        return w.clone();
    }
    w * C64::new((t / g).sqrt(), 0.0)
}
