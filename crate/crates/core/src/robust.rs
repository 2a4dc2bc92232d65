//! Worst-case secrecy-rate maximization under bounded eavesdropper CSI error.
//!
//! For a fixed worst-case Eve power `τ` the design maximizes Bob's SNR
//! (robust beamformer SCA alternating with P-CCP phase steps); `τ` itself is
//! chosen by a one-dimensional search over `φ(τ) = (1 + |h_B w|²)/(1 + τ)`.

use std::time::Instant;

use crate::channel::{interference, Beamformer, ChannelSet, PhaseVector, Rates};
use crate::error::{Error, Result};
use crate::fullcsi::{AoInit, ACCURACY, AO_MAX_ITER, SCA_MAX_ITER};
use crate::linalg::{entrywise_phase_or_unit, hermitian_eig, row_mul, CMatrix, CVector, HermitianMatrix, C64};
use crate::par::Execution;
use crate::result::{Flags, RunResult};
use crate::subproblems::{
    feasible_scale, pccp_phase_step, quadratic_params, solve_beamformer_robust_step, LmiMultipliers, PccpState,
    UncertaintyBounds,
};

pub const PCCP_MAX_ITER: usize = 50;
/// Slack-sum tolerance at P-CCP termination.
pub const PCCP_SLACK_TOL: f64 = 1e-4;
/// Spacing of the fine τ grid on `[0, 1]`.
pub const TAU_FINE_STEP: f64 = 1e-2;
/// Log-spaced samples on `(1, τ_max]`.
pub const TAU_LOG_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct RobustSearchState {
    pub tau: f64,
    pub tau_max: f64,
    /// Evaluated `(τ, φ(τ))` pairs in grid order; infeasible samples hold −∞.
    pub samples: Vec<(f64, f64)>,
}

/// `J(s) = ‖h_AB + sᴴH_B‖²` on the normalized Bob link.
pub fn bob_gain(ch: &ChannelSet, s: &PhaseVector) -> f64 {
    ch.bob.effective(s).norm_squared()
}

fn ascend_gain(ch: &ChannelSet, s0: PhaseVector, shift: &HermitianMatrix, v: &CVector) -> (PhaseVector, f64) {
    let mut s = s0;
    let mut j = bob_gain(ch, &s);
    for _ in 0..10 * SCA_MAX_ITER {
        let g = shift.as_matrix() * s.as_vector() + v;
        let (next, _) = entrywise_phase_or_unit(&g);
        let jn = bob_gain(ch, &next);
        if jn < j {
            break;
        }
        let done = jn - j <= 1e-12 * jn.max(1.0);
        s = next;
        j = jn;
        if done {
            break;
        }
    }
    (s, j)
}

/// Largest feasible worst-case Eve power `P_T·max_s J(s)`.
///
/// `sᴴAs` is minorized by `λ_min‖s‖² + 2Re{sᴴ(A − λ_min I)s̃} − const`, so
/// each step is `s = arg((A − λ_min I)s̃ + v)`. Three deterministic starts
/// are tried and the best kept.
pub fn tau_upper_bound(ch: &ChannelSet, p_t: f64) -> Result<(f64, PhaseVector)> {
    let n = ch.n;
    if n == 0 || ch.bob.cascade.iter().all(|z| z.norm() == 0.0) {
        let s = PhaseVector::ones(n);
        return Ok((p_t * bob_gain(ch, &s), s));
    }
    let form = quadratic_params(&HermitianMatrix::identity(ch.m), &ch.bob.direct, &ch.bob.cascade);
    let eig = hermitian_eig(&form.quadratic)?;
    let shift = HermitianMatrix::from_hermitian_part(
        form.quadratic.as_matrix() - CMatrix::identity(n, n) * C64::new(eig.smallest(), 0.0),
    );
    let top = eig.vectors.column(0).into_owned();
    let align = top.dotc(&form.linear);
    let top = if align.norm() > 0.0 { &top * (align / align.norm()) } else { top };
    let starts = [
        entrywise_phase_or_unit(&form.linear).0,
        entrywise_phase_or_unit(&top).0,
        PhaseVector::ones(n),
    ];
    let mut best: Option<(PhaseVector, f64)> = None;
    for s0 in starts {
        let (s, j) = ascend_gain(ch, s0, &shift, &form.linear);
        if best.as_ref().is_none_or(|(_, b)| j > *b) {
            best = Some((s, j));
        }
    }
    let (s, j) = best.expect("at least one start");
    Ok((p_t * j, s))
}

#[derive(Debug, Clone)]
pub struct RobustAoOutcome {
    /// `(1 + |h_B w|²)/(1 + τ)`, or −∞ when `τ` is infeasible.
    pub phi: f64,
    pub w: Beamformer,
    pub s: PhaseVector,
    pub u: LmiMultipliers,
    /// `(AO iteration, |h_B w|²)` at every accepted boundary.
    pub trace: Vec<(usize, f64)>,
    pub iterations: usize,
    /// Slack sum of the last accepted P-CCP run, before projection.
    pub pccp_slack: f64,
    /// `max_i ||s_i| − 1|` of the last accepted P-CCP iterate, before projection.
    pub pccp_umc: f64,
    pub flags: Flags,
}

fn snr(ch: &ChannelSet, s: &PhaseVector, w: &Beamformer) -> f64 {
    row_mul(&ch.bob.effective(s), w.as_vector()).norm_sqr()
}

/// Largest factor `≤ 1` keeping `w` inside power, interference and the
/// worst-case Eve bound at `s`.
fn robust_scale(w: &Beamformer, s: &PhaseVector, tau: f64, ch: &ChannelSet, eps: &UncertaintyBounds, p_t: f64, p_i: f64) -> f64 {
    let wv = w.as_vector();
    if wv.norm() == 0.0 {
        return 1.0;
    }
    let mut k = feasible_scale(wv, &ch.pr.effective(s), p_t, p_i).min(1.0);
    let amp = row_mul(&ch.eve.effective(s), wv).norm() + eps.radius(ch.n) * wv.norm();
    if amp > 0.0 {
        k = k.min(tau.sqrt() / amp * (1.0 - 1e-9));
    }
    k
}

/// Eve-nulling MRT direction at `s`, scaled into the feasible set.
fn initial_beamformer(s: &PhaseVector, tau: f64, ch: &ChannelSet, eps: &UncertaintyBounds, p_t: f64, p_i: f64) -> Beamformer {
    if tau == 0.0 {
        return Beamformer::zeros(ch.m);
    }
    let b = ch.bob.effective(s).conjugate();
    let x = ch.eve.effective(s).conjugate();
    let mut d = b.clone();
    let xn = x.norm_squared();
    if xn > 0.0 {
        d -= &x * (x.dotc(&b) / xn);
    }
    if d.norm() <= 1e-12 * b.norm() {
        d = b;
    }
    let dn = d.norm();
    if dn == 0.0 {
        return Beamformer::zeros(ch.m);
    }
    let w = Beamformer(d * C64::new(p_t.sqrt() / dn, 0.0));
    let k = robust_scale(&w, s, tau, ch, eps, p_t, p_i);
    Beamformer(w.0 * C64::new(k, 0.0))
}

/// Robust beamformer SCA at fixed phases, run to convergence.
#[allow(clippy::too_many_arguments)]
fn beamformer_sca(
    s: &PhaseVector,
    tau: f64,
    ch: &ChannelSet,
    eps: &UncertaintyBounds,
    p_t: f64,
    p_i: f64,
    w0: Beamformer,
) -> Result<(Beamformer, LmiMultipliers, f64)> {
    let mut w = w0;
    let mut obj = snr(ch, s, &w);
    let mut u = LmiMultipliers::certify(w.as_vector().norm(), tau, eps, ch.n);
    for _ in 0..SCA_MAX_ITER {
        let step = solve_beamformer_robust_step(s, tau, ch, eps, p_t, p_i, &w)?;
        let gain = step.objective - obj;
        w = step.w;
        u = step.u;
        obj = step.objective;
        if gain <= ACCURACY * obj.max(1.0) {
            break;
        }
    }
    Ok((w, u, obj))
}

struct PccpRun {
    s: PhaseVector,
    slack: f64,
}

fn pccp_run(w: &Beamformer, tau: f64, ch: &ChannelSet, eps: &UncertaintyBounds, s0: &PhaseVector, p_i: f64) -> Result<PccpRun> {
    let mut state = PccpState::new(ch.n);
    let mut s = s0.clone();
    let mut obj = snr(ch, &s, w);
    for k in 0..PCCP_MAX_ITER {
        let (next, st) = pccp_phase_step(w, tau, ch, eps, &s, &state, p_i)?;
        let on = snr(ch, &next, w);
        let change = (on - obj).abs();
        s = next;
        state = st;
        obj = on;
        if k > 0 && state.slack_sum() <= PCCP_SLACK_TOL && change <= ACCURACY * obj.max(1.0) {
            break;
        }
    }
    Ok(PccpRun { s, slack: state.slack_sum() })
}

fn infeasible(ch: &ChannelSet, s: PhaseVector) -> RobustAoOutcome {
    RobustAoOutcome {
        phi: f64::NEG_INFINITY,
        w: Beamformer::zeros(ch.m),
        s,
        u: LmiMultipliers { u1: 0.0, u2: 0.0 },
        trace: Vec::new(),
        iterations: 0,
        pccp_slack: 0.0,
        pccp_umc: 0.0,
        flags: Flags::INFEASIBLE,
    }
}

/// `φ(τ)`: alternates the robust beamformer SCA with P-CCP phase runs.
///
/// A P-CCP run is projected onto unit modulus and followed by a beamformer
/// SCA warm-started from the old beamformer scaled back into the feasible
/// set; the pair is kept only if `|h_B w|²` does not drop.
pub fn ao_robust(
    tau: f64,
    ch: &ChannelSet,
    eps: &UncertaintyBounds,
    p_t: f64,
    p_i: f64,
    init: &AoInit,
) -> Result<RobustAoOutcome> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidInput("tau must be finite and >= 0".into()));
    }
    if init.s.len() != ch.n {
        return Err(Error::Dimension { what: "initial phase vector", expected: ch.n, got: init.s.len() });
    }
    match ao_robust_inner(tau, ch, eps, p_t, p_i, init) {
        Err(Error::Infeasible(_)) => Ok(infeasible(ch, init.s.clone())),
        r => r,
    }
}

fn ao_robust_inner(
    tau: f64,
    ch: &ChannelSet,
    eps: &UncertaintyBounds,
    p_t: f64,
    p_i: f64,
    init: &AoInit,
) -> Result<RobustAoOutcome> {
    let mut flags = Flags::empty();
    let mut s = init.s.clone();
    let w0 = initial_beamformer(&s, tau, ch, eps, p_t, p_i);
    let (mut w, mut u, mut obj) = beamformer_sca(&s, tau, ch, eps, p_t, p_i, w0)?;
    let mut trace = vec![(0, obj)];
    let mut iterations = 0;
    let (mut pccp_slack, mut pccp_umc) = (0.0, 0.0);
    if ch.n > 0 {
        let mut converged = false;
        for k in 1..=AO_MAX_ITER {
            iterations = k;
            if w.power() == 0.0 && tau == 0.0 && eps.radius(ch.n) > 0.0 {
                converged = true;
                break;
            }
            let run = pccp_run(&w, tau, ch, eps, &s, p_i)?;
            if run.slack > PCCP_SLACK_TOL {
                flags |= Flags::MAX_ITERATIONS;
            }
            let s_new = run.s.projected();
            let k_feas = robust_scale(&w, &s_new, tau, ch, eps, p_t, p_i);
            let w_start = Beamformer(w.as_vector() * C64::new(k_feas, 0.0));
            let (w_new, u_new, obj_new) = beamformer_sca(&s_new, tau, ch, eps, p_t, p_i, w_start)?;
            if obj_new < obj {
                flags |= Flags::STEP_REJECTED;
                converged = true;
                break;
            }
            let gain = obj_new - obj;
            pccp_slack = run.slack;
            pccp_umc = run.s.umc_violation();
            s = s_new;
            w = w_new;
            u = u_new;
            obj = obj_new;
            trace.push((k, obj));
            if gain <= ACCURACY * obj.max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            flags |= Flags::MAX_ITERATIONS;
        }
    } else {
        iterations = 1;
    }
    Ok(RobustAoOutcome {
        phi: (1.0 + obj) / (1.0 + tau),
        w,
        s,
        u,
        trace,
        iterations,
        pccp_slack,
        pccp_umc,
        flags,
    })
}

/// `1e-2` steps on `[0, min(1, τ_max)]`, then log-spaced samples on `(1, τ_max]`.
pub fn tau_grid(tau_max: f64) -> Vec<f64> {
    let top = tau_max.clamp(0.0, 1.0);
    let k = (top / TAU_FINE_STEP + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=k).map(|i| i as f64 * TAU_FINE_STEP).collect();
    if tau_max > 1.0 {
        let l = tau_max.ln();
        grid.extend((1..=TAU_LOG_SAMPLES).map(|i| (l * i as f64 / TAU_LOG_SAMPLES as f64).exp()));
    }
    grid
}

/// Upper bound on `φ(τ)` from `‖h_B(s)‖ ≤ ‖h_AB‖ + Σ_i ‖row_i(H_B)‖` and
/// `‖w‖ ≤ min(√P_T, √τ/radius)`.
fn phi_upper_bound(tau: f64, ch: &ChannelSet, eps: &UncertaintyBounds, p_t: f64) -> f64 {
    let rows: f64 = ch.bob.cascade.row_iter().map(|r| r.norm()).sum();
    let g = (ch.bob.direct.norm() + rows).powi(2);
    let rho = eps.radius(ch.n);
    let power = if rho > 0.0 { p_t.min(tau / (rho * rho)) } else { p_t };
    (1.0 + g * power) / (1.0 + tau)
}

#[derive(Debug, Clone)]
pub struct RobustSearch {
    pub result: RunResult,
    pub state: RobustSearchState,
    pub u: LmiMultipliers,
    /// P-CCP slack sum at the selected sample.
    pub pccp_slack: f64,
    /// Unit-modulus violation of the selected P-CCP iterate before projection.
    pub pccp_umc: f64,
    /// `|h_B w|²` per AO boundary at the selected sample.
    pub snr_trace: Vec<(usize, f64)>,
}

/// Line search over the default grid.
pub fn line_search_tau(
    ch: &ChannelSet,
    eps: &UncertaintyBounds,
    p_t: f64,
    p_i: f64,
    init: &AoInit,
    exec: Execution,
) -> Result<RobustSearch> {
    let (tau_max, _) = tau_upper_bound(ch, p_t)?;
    line_search_tau_on(ch, eps, p_t, p_i, init, &tau_grid(tau_max), tau_max, exec)
}

/// Line search over an explicit grid. Samples that provably cannot beat
/// `φ = 1` (the `w = 0` design at `τ = 0`) are skipped; ties go to the
/// smaller `τ`.
#[allow(clippy::too_many_arguments)]
pub fn line_search_tau_on(
    ch: &ChannelSet,
    eps: &UncertaintyBounds,
    p_t: f64,
    p_i: f64,
    init: &AoInit,
    grid: &[f64],
    tau_max: f64,
    exec: Execution,
) -> Result<RobustSearch> {
    let start = Instant::now();
    if grid.is_empty() {
        return Err(Error::InvalidInput("tau grid is empty".into()));
    }
    let runs = exec.map(grid.to_vec(), |tau| {
        if tau > 0.0 && phi_upper_bound(tau, ch, eps, p_t) <= 1.0 {
            return Ok(None);
        }
        match ao_robust(tau, ch, eps, p_t, p_i, init) {
            Ok(o) => Ok(Some(o)),
            Err(Error::Solver(_)) => Ok(Some(RobustAoOutcome { flags: Flags::SOLVER_INACCURATE, ..infeasible(ch, init.s.clone()) })),
            Err(e) => Err(e),
        }
    });
    let mut samples = Vec::new();
    let mut best: Option<(f64, RobustAoOutcome)> = None;
    let mut extra = Flags::empty();
    for (tau, run) in grid.iter().zip(runs) {
        let Some(o) = run? else { continue };
        samples.push((*tau, o.phi));
        extra |= o.flags & Flags::SOLVER_INACCURATE;
        if o.phi > best.as_ref().map_or(f64::NEG_INFINITY, |(_, b)| b.phi) {
            best = Some((*tau, o));
        }
    }
    let Some((tau, o)) = best else {
        return Err(Error::Infeasible("every tau sample is infeasible".into()));
    };
    let obj = snr(ch, &o.s, &o.w);
    let c_b = obj.ln_1p() / std::f64::consts::LN_2;
    let c_e = tau.ln_1p() / std::f64::consts::LN_2;
    let rates = Rates { c_b, c_e, c_s: c_b - c_e, interference: interference(&o.w, &o.s, ch) };
    let trace = o.trace.iter().map(|&(k, g)| (k, ((1.0 + g) / (1.0 + tau)).log2())).collect();
    Ok(RobustSearch {
        result: RunResult {
            power: o.w.power(),
            w: o.w,
            s: o.s,
            rates,
            tau_opt: Some(tau),
            p_s: None,
            trace,
            iterations: o.iterations,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            flags: o.flags | extra,
        },
        state: RobustSearchState { tau, tau_max, samples },
        u: o.u,
        pccp_slack: o.pccp_slack,
        pccp_umc: o.pccp_umc,
        snr_trace: o.trace,
    })
}
