//! Secrecy-rate maximization with full eavesdropper CSI.
//!
//! Alternates the globally optimal beamformer for fixed phases with a phase
//! step that minimizes the inverse rate ratio `h_E(s)/h_B(s)`: Dinkelbach
//! bisection outside, SCA with the λ₁-majorizer in the middle, and a
//! closed-form penalty-bisection update for the interference constraint
//! inside.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{rates, Beamformer, ChannelSet, PhaseVector};
use crate::error::{Error, Result};
use crate::linalg::{bisect, lambda_max, BisectionSpec, CVector, HermitianMatrix, Monotonicity, C64};
use crate::result::{Flags, RunResult};
use crate::subproblems::{
    linear_value, penalized_phase, penalty_bisection, quadratic_params, solve_beamformer_full, QuadraticForm,
};

/// Relative accuracy of the bisection, SCA and AO loops.
pub const ACCURACY: f64 = 1e-3;
pub const SCA_MAX_ITER: usize = 200;
pub const AO_MAX_ITER: usize = 100;

/// Quadratic forms of Bob, Eve and the PR for a fixed covariance.
#[derive(Debug, Clone)]
pub struct PhaseForms {
    pub bob: QuadraticForm,
    pub eve: QuadraticForm,
    pub pr: QuadraticForm,
}

impl PhaseForms {
    pub fn new(r: &HermitianMatrix, ch: &ChannelSet) -> Self {
        PhaseForms {
            bob: quadratic_params(r, &ch.bob.direct, &ch.bob.cascade),
            eve: quadratic_params(r, &ch.eve.direct, &ch.eve.cascade),
            pr: quadratic_params(r, &ch.pr.direct, &ch.pr.cascade),
        }
    }

    pub fn from_beamformer(w: &Beamformer, ch: &ChannelSet) -> Self {
        let w = w.as_vector();
        Self::new(&HermitianMatrix::from_hermitian_part(w * w.adjoint()), ch)
    }

    pub fn h_b(&self, s: &PhaseVector) -> f64 {
        1.0 + self.bob.eval(s.as_vector())
    }

    pub fn h_e(&self, s: &PhaseVector) -> f64 {
        1.0 + self.eve.eval(s.as_vector())
    }

    /// Interference power (no leading 1).
    pub fn h_p(&self, s: &PhaseVector) -> f64 {
        self.pr.eval(s.as_vector())
    }

    /// Dinkelbach residual `f(s/u) = h_E(s) − u·h_B(s)`.
    pub fn residual(&self, s: &PhaseVector, u: f64) -> f64 {
        self.h_e(s) - u * self.h_b(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinkelbachState {
    pub u: f64,
    pub u_l: f64,
    pub u_u: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyState {
    pub mu: f64,
    pub mu_l: f64,
    pub mu_u: f64,
}

/// Linear surrogate of the Dinkelbach residual and of the interference at
/// an expansion point `s̃`:
/// `f(s/u) ≤ c1 + c2 − 2Re{sᴴ·combined_vector}` and
/// `h_P(s) ≤ c3 + 2Re{sᴴ·penalty_vector}`.
#[derive(Debug, Clone)]
pub struct SurrogateCoeffs {
    pub combined_vector: CVector,
    pub penalty_vector: CVector,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub tilde_p_i: f64,
}

impl SurrogateCoeffs {
    pub fn new(u: f64, forms: &PhaseForms, s_tilde: &PhaseVector, p_i: f64) -> Result<Self> {
        let st = s_tilde.as_vector();
        let n = st.len() as f64;
        let a = HermitianMatrix::from_hermitian_part(
            forms.eve.quadratic.as_matrix() - forms.bob.quadratic.as_matrix() * C64::new(u, 0.0),
        );
        let l1 = lambda_max(&a)?;
        let h_eb = &forms.eve.linear - &forms.bob.linear * C64::new(u, 0.0);
        let combined = st * C64::new(l1, 0.0) - a.as_matrix() * st - h_eb;
        let c1 = 1.0 + forms.eve.constant - u * (1.0 + forms.bob.constant) + n * l1;
        let c2 = n * l1 - a.quad(st);
        let lp = lambda_max(&forms.pr.quadratic)?;
        let penalty = &forms.pr.linear - (st * C64::new(lp, 0.0) - forms.pr.quadratic.as_matrix() * st);
        let c3 = forms.pr.constant + 2.0 * n * lp - forms.pr.quadratic.quad(st);
        Ok(SurrogateCoeffs { combined_vector: combined, penalty_vector: penalty, c1, c2, c3, tilde_p_i: p_i - c3 })
    }

    /// Upper bound on `f(s/u)`.
    pub fn surrogate(&self, s: &PhaseVector) -> f64 {
        self.c1 + self.c2 - linear_value(s.as_vector(), &self.combined_vector)
    }

    /// Linear interference surrogate `h̃_P(s) = 2Re{sᴴ·penalty_vector}`.
    pub fn h_p_tilde(&self, s: &PhaseVector) -> f64 {
        linear_value(s.as_vector(), &self.penalty_vector)
    }
}

/// Global minimizer of the surrogate over unit-modulus `s` when the
/// interference constraint is inactive.
pub fn phase_update_inactive(coeffs: &SurrogateCoeffs) -> (PhaseVector, bool) {
    penalized_phase(&coeffs.combined_vector, &coeffs.penalty_vector, 0.0)
}

/// Global maximizer of `−f̃ − μ·h̃_P` over unit-modulus `s`.
pub fn phase_update_penalized(coeffs: &SurrogateCoeffs, mu: f64) -> (PhaseVector, bool) {
    penalized_phase(&coeffs.combined_vector, &coeffs.penalty_vector, mu)
}

/// Active-constraint case: bisects `μ` until `h̃_P(s(μ)) = P̃_I`.
pub fn penalty_bisection_step(coeffs: &SurrogateCoeffs) -> Result<(PhaseVector, PenaltyState, bool)> {
    let (mu, s, deg) = penalty_bisection(&coeffs.combined_vector, &coeffs.penalty_vector, coeffs.tilde_p_i)?;
    Ok((s, PenaltyState { mu, mu_l: 0.0, mu_u: mu }, deg))
}

/// Solves the surrogate problem at one expansion point, splitting on
/// whether the interference constraint is active.
pub fn surrogate_step(coeffs: &SurrogateCoeffs, ipc: bool) -> Result<(PhaseVector, f64, bool)> {
    let (s0, deg) = phase_update_inactive(coeffs);
    if !ipc || coeffs.h_p_tilde(&s0) <= coeffs.tilde_p_i {
        return Ok((s0, 0.0, deg));
    }
    let (s, st, deg) = penalty_bisection_step(coeffs)?;
    Ok((s, st.mu, deg))
}

#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub s: PhaseVector,
    /// `f(s_k/u)` for k = 0, 1, …
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub degenerate: bool,
}

/// SCA on `f(s/u)` from `s0` under the interference limit.
pub fn sca_phase(u: f64, forms: &PhaseForms, s0: &PhaseVector, p_i: f64) -> Result<ScaOutcome> {
    let ipc = p_i.is_finite();
    let mut s = s0.clone();
    let mut f = forms.residual(&s, u);
    let mut trace = vec![f];
    let mut degenerate = false;
    let mut iterations = 0;
    for _ in 0..SCA_MAX_ITER {
        iterations += 1;
        let coeffs = SurrogateCoeffs::new(u, forms, &s, p_i)?;
        let (s_new, _, deg) = surrogate_step(&coeffs, ipc)?;
        degenerate |= deg;
        let f_new = forms.residual(&s_new, u);
        let scale = forms.h_e(&s) + u * forms.h_b(&s);
        if f_new > f || (ipc && forms.h_p(&s_new) > p_i * (1.0 + 1e-9)) {
            break;
        }
        let change = f - f_new;
        s = s_new;
        f = f_new;
        trace.push(f);
        if change <= ACCURACY * 1e-3 * scale {
            break;
        }
    }
    Ok(ScaOutcome { s, objective_trace: trace, iterations, degenerate })
}

#[derive(Debug, Clone)]
pub struct DinkelbachOutcome {
    pub s: PhaseVector,
    pub state: DinkelbachState,
    /// Dinkelbach fixed point `h_E(s)/h_B(s)` at the returned `s`.
    pub u_star: f64,
    /// `h_E(s) − u_star·h_B(s)`.
    pub residual: f64,
    pub bisect_iterations: usize,
    pub degenerate: bool,
}

/// Minimizes `h_E(s)/h_B(s)` for a fixed covariance, starting at `s0`.
///
/// The bracket is `[0, h_E(s0)/h_B(s0)]`: the residual at 0 is `h_E > 0`,
/// and at the upper end SCA started from `s0` can only lower the residual
/// below its value at `s0`, which is 0.
pub fn dinkelbach_phase(forms: &PhaseForms, s0: &PhaseVector, p_i: f64) -> Result<DinkelbachOutcome> {
    let inv_ratio = |s: &PhaseVector| forms.h_e(s) / forms.h_b(s);
    let u_u = inv_ratio(s0);
    let mut best = (u_u, s0.clone());
    let mut degenerate = false;
    if s0.is_empty() {
        let state = DinkelbachState { u: u_u, u_l: 0.0, u_u, residual: 0.0 };
        return Ok(DinkelbachOutcome { s: s0.clone(), state, u_star: u_u, residual: 0.0, bisect_iterations: 0, degenerate });
    }
    let mut failure: Option<Error> = None;
    let spec = BisectionSpec {
        lower: 0.0,
        upper: u_u,
        tolerance: ACCURACY * u_u,
        direction: Monotonicity::NonIncreasing,
    };
    let outcome = bisect(spec, |u| {
        if failure.is_some() {
            return 0.0;
        }
        match sca_phase(u, forms, s0, p_i) {
            Ok(sca) => {
                degenerate |= sca.degenerate;
                let r = inv_ratio(&sca.s);
                if r < best.0 {
                    best = (r, sca.s.clone());
                }
                let f = forms.residual(&sca.s, u);
                if u >= u_u {
                    f.min(0.0)
                } else {
                    f
                }
            }
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    // Dinkelbach fixed-point refinement from the best point found.
    let (mut r, mut s) = best;
    for _ in 0..50 {
        let sca = sca_phase(r, forms, &s, p_i)?;
        degenerate |= sca.degenerate;
        let r_new = inv_ratio(&sca.s);
        if !(r_new < r * (1.0 - 1e-12)) {
            break;
        }
        r = r_new;
        s = sca.s;
    }
    let u_star = inv_ratio(&s);
    let residual = forms.residual(&s, u_star);
    let state = DinkelbachState { u: outcome.root, u_l: outcome.lower, u_u: outcome.upper, residual: forms.residual(&s, outcome.root) };
    Ok(DinkelbachOutcome { s, state, u_star, residual, bisect_iterations: outcome.iterations, degenerate })
}

/// Per-boundary record used for diagnostics and acceptance checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCheck {
    pub u_star: f64,
    pub u_bisect: f64,
    pub h_b: f64,
    pub h_e: f64,
    pub interference: f64,
}

#[derive(Debug, Clone)]
pub struct FullCsiOutcome {
    pub result: RunResult,
    pub boundaries: Vec<BoundaryCheck>,
}

#[derive(Debug, Clone)]
pub struct AoInit {
    pub s: PhaseVector,
}

impl AoInit {
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AoInit { s: PhaseVector::random(n, &mut rng) }
    }
}

fn secrecy(w: &Beamformer, s: &PhaseVector, ch: &ChannelSet) -> f64 {
    rates(w, s, ch).c_s
}

/// Alternating optimization of `(w, s)`.
pub fn ao_full_csi(ch: &ChannelSet, p_t: f64, p_i: f64, init: &AoInit) -> Result<FullCsiOutcome> {
    let start = Instant::now();
    let mut flags = Flags::empty();
    let mut s = init.s.clone();
    if s.len() != ch.n {
        return Err(Error::Dimension { what: "initial phase vector", expected: ch.n, got: s.len() });
    }
    let first = solve_beamformer_full(&s, ch, p_t, p_i)?;
    if first.randomized {
        flags |= Flags::RANDOMIZED;
    }
    let mut w = first.w;
    let mut c = secrecy(&w, &s, ch);
    let mut trace = vec![(0, c)];
    let mut boundaries = Vec::new();
    let mut iterations = 0;
    if ch.n > 0 {
        let mut converged = false;
        for k in 1..=AO_MAX_ITER {
            iterations = k;
            if w.power() == 0.0 {
                converged = true;
                break;
            }
            let forms = PhaseForms::from_beamformer(&w, ch);
            let dk = dinkelbach_phase(&forms, &s, p_i)?;
            if dk.degenerate {
                flags |= Flags::DEGENERATE_PHASE;
            }
            s = dk.s;
            boundaries.push(BoundaryCheck {
                u_star: dk.u_star,
                u_bisect: dk.state.u,
                h_b: forms.h_b(&s),
                h_e: forms.h_e(&s),
                interference: forms.h_p(&s),
            });
            let bf = solve_beamformer_full(&s, ch, p_t, p_i)?;
            let c_mid = secrecy(&w, &s, ch);
            let c_new = secrecy(&bf.w, &s, ch);
            if c_new >= c_mid {
                if bf.randomized {
                    flags |= Flags::RANDOMIZED;
                }
                w = bf.w;
            } else {
                flags |= Flags::STEP_REJECTED;
            }
            let c_next = secrecy(&w, &s, ch);
            trace.push((k, c_next));
            let change = (c_next - c).abs();
            c = c_next;
            if change <= ACCURACY {
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
    let r = rates(&w, &s, ch);
    Ok(FullCsiOutcome {
        result: RunResult {
            power: w.power(),
            w,
            s,
            rates: r,
            tau_opt: None,
            p_s: None,
            trace,
            iterations,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            flags,
        },
        boundaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_normal, generate_channels, ScenarioConfig};
    use crate::linalg::{row_mul, CMatrix};
    use crate::oracle::{grid_search_phase, GridSpec};

    type NoConstraint = fn(&PhaseVector) -> bool;

    fn synthetic(seed: u64, m: usize, n: usize) -> ChannelSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = |rng: &mut ChaCha8Rng, k| CVector::from_fn(k, |_, _| complex_normal(rng));
        let h_ab = v(&mut rng, m);
        let h_ae = v(&mut rng, m);
        let h_ap = v(&mut rng, m);
        let h_ib = v(&mut rng, n);
        let h_ie = v(&mut rng, n);
        let h_ip = v(&mut rng, n);
        let h_ai = CMatrix::from_fn(n, m, |_, _| complex_normal(&mut rng));
        ChannelSet::from_raw(h_ab, h_ae, h_ap, h_ib, h_ie, h_ip, h_ai, 1.0, 1.0).unwrap()
    }

    fn forms_for(ch: &ChannelSet, seed: u64) -> (PhaseForms, Beamformer) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Beamformer(CVector::from_fn(ch.m, |_, _| complex_normal(&mut rng)));
        (PhaseForms::from_beamformer(&w, ch), w)
    }

    #[test]
    fn inactive_update_real_positive() {
        let coeffs = SurrogateCoeffs {
            combined_vector: CVector::from_element(3, C64::new(2.0, 0.0)),
            penalty_vector: CVector::zeros(3),
            c1: 0.0,
            c2: 0.0,
            c3: 0.0,
            tilde_p_i: 1.0,
        };
        let (s, _) = phase_update_inactive(&coeffs);
        assert_eq!(s, PhaseVector::ones(3));
    }

    #[test]
    fn inactive_update_beats_grid() {
        let ch = synthetic(1, 2, 2);
        let (forms, _) = forms_for(&ch, 2);
        let st = PhaseVector::from_angles(&[0.2, 1.0]);
        let coeffs = SurrogateCoeffs::new(0.5, &forms, &st, f64::INFINITY).unwrap();
        let (s, _) = phase_update_inactive(&coeffs);
        let (_, best) = grid_search_phase(|x| -coeffs.surrogate(x), None::<NoConstraint>, GridSpec::degrees(1.0, 2))
            .unwrap()
            .unwrap();
        assert!(-coeffs.surrogate(&s) >= best - 1e-9);
        // Fixed point of the update map.
        let (s2, _) = phase_update_inactive(&SurrogateCoeffs { combined_vector: coeffs.combined_vector.clone(), ..coeffs.clone() });
        assert_eq!(s, s2);
    }

    #[test]
    fn surrogate_is_tight_upper_bound() {
        let ch = synthetic(3, 3, 4);
        let (forms, _) = forms_for(&ch, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let st = PhaseVector::random(4, &mut rng);
        let u = 0.7;
        let coeffs = SurrogateCoeffs::new(u, &forms, &st, 1.0).unwrap();
        let f0 = forms.residual(&st, u);
        assert!((coeffs.surrogate(&st) - f0).abs() <= 1e-9 * f0.abs().max(1.0));
        let hp0 = forms.h_p(&st);
        assert!((coeffs.c3 + coeffs.h_p_tilde(&st) - hp0).abs() <= 1e-9 * hp0.max(1.0));
        for _ in 0..50 {
            let s = PhaseVector::random(4, &mut rng);
            assert!(forms.residual(&s, u) <= coeffs.surrogate(&s) + 1e-9);
            assert!(forms.h_p(&s) <= coeffs.c3 + coeffs.h_p_tilde(&s) + 1e-9);
        }
    }

    #[test]
    fn penalized_continuity_and_monotonicity() {
        let ch = synthetic(6, 2, 3);
        let (forms, _) = forms_for(&ch, 7);
        let st = PhaseVector::from_angles(&[0.1, 0.2, 0.3]);
        let coeffs = SurrogateCoeffs::new(0.4, &forms, &st, 1.0).unwrap();
        let (s0, _) = phase_update_inactive(&coeffs);
        let (s_eps, _) = phase_update_penalized(&coeffs, 1e-12);
        assert!((s0.as_vector() - s_eps.as_vector()).norm() < 1e-9);
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let mu = 0.05 * 1.3f64.powi(k);
            let (s, _) = phase_update_penalized(&coeffs, mu);
            let v = coeffs.h_p_tilde(&s);
            assert!(v <= prev + 1e-9);
            prev = v;
        }
    }

    #[test]
    fn penalty_bisection_hits_budget_and_beats_constrained_grid() {
        let ch = synthetic(8, 2, 2);
        let (forms, _) = forms_for(&ch, 9);
        let st = PhaseVector::from_angles(&[0.5, 2.5]);
        // Budget chosen between the constrained extremes so the constraint is active.
        let probe = SurrogateCoeffs::new(0.3, &forms, &st, 0.0).unwrap();
        let (s_free, _) = phase_update_inactive(&probe);
        let p_i = probe.c3 + 0.5 * probe.h_p_tilde(&s_free) - 0.5 * 2.0 * probe.penalty_vector.iter().map(|z| z.norm()).sum::<f64>() * 0.5;
        let coeffs = SurrogateCoeffs::new(0.3, &forms, &st, p_i).unwrap();
        if coeffs.h_p_tilde(&s_free) <= coeffs.tilde_p_i {
            return;
        }
        let (s, pen, _) = penalty_bisection_step(&coeffs).unwrap();
        assert!(pen.mu > 0.0);
        let range = 2.0 * coeffs.penalty_vector.iter().map(|z| z.norm()).sum::<f64>();
        let v = coeffs.h_p_tilde(&s);
        assert!(v <= coeffs.tilde_p_i + 1e-12 && coeffs.tilde_p_i - v <= 1e-3 * range);
        let (_, best) = grid_search_phase(
            |x| -coeffs.surrogate(x),
            Some(|x: &PhaseVector| coeffs.h_p_tilde(x) <= coeffs.tilde_p_i),
            GridSpec::degrees(1.0, 2),
        )
        .unwrap()
        .unwrap();
        let slack = 1e-3 * coeffs.combined_vector.iter().map(|z| z.norm()).sum::<f64>() * 2.0;
        assert!(-coeffs.surrogate(&s) >= best - slack, "{} < {best}", -coeffs.surrogate(&s));
    }

    #[test]
    fn sca_descends_on_random_instances() {
        for seed in 0..20 {
            let ch = synthetic(100 + seed, 3, 4);
            let (forms, _) = forms_for(&ch, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s0 = PhaseVector::random(4, &mut rng);
            let p_i = forms.h_p(&s0) * 1.5;
            let out = sca_phase(0.5, &forms, &s0, p_i).unwrap();
            for w in out.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
            assert!(forms.h_p(&out.s) <= p_i * (1.0 + 1e-9));
            assert!(out.s.umc_violation() <= 1e-9);
        }
    }

    #[test]
    fn sca_single_element_matches_grid() {
        let ch = synthetic(11, 2, 1);
        let (forms, _) = forms_for(&ch, 12);
        let u = 0.3;
        let out = sca_phase(u, &forms, &PhaseVector::ones(1), f64::INFINITY).unwrap();
        let (_, best) = grid_search_phase(|x| -forms.residual(x, u), None::<NoConstraint>, GridSpec::degrees(0.1, 1))
            .unwrap()
            .unwrap();
        assert!(-forms.residual(&out.s, u) >= best - 1e-3 * forms.h_e(&out.s));
        assert!(out.iterations <= 200);
    }

    #[test]
    fn sca_stops_at_surrogate_fixed_point() {
        let ch = synthetic(13, 2, 2);
        let (forms, _) = forms_for(&ch, 14);
        let first = sca_phase(0.2, &forms, &PhaseVector::ones(2), f64::INFINITY).unwrap();
        let again = sca_phase(0.2, &forms, &first.s, f64::INFINITY).unwrap();
        assert_eq!(again.iterations, 1);
    }

    #[test]
    fn dinkelbach_fixed_point_and_grid() {
        let ch = synthetic(15, 2, 2);
        let (forms, _) = forms_for(&ch, 16);
        let s0 = PhaseVector::from_angles(&[1.0, -1.0]);
        let out = dinkelbach_phase(&forms, &s0, f64::INFINITY).unwrap();
        let ratio = forms.h_b(&out.s) / forms.h_e(&out.s);
        assert!((out.u_star - 1.0 / ratio).abs() <= 1e-12);
        assert!(out.residual.abs() <= 1e-9);
        assert!(ratio >= forms.h_b(&s0) / forms.h_e(&s0));
        // Bracket validity.
        assert!(forms.residual(&s0, 0.0) >= 0.0);
        let (_, best) = grid_search_phase(|x| forms.h_b(x) / forms.h_e(x), None::<NoConstraint>, GridSpec::degrees(1.0, 2))
            .unwrap()
            .unwrap();
        assert!(ratio >= best - 1e-2, "{ratio} < {best}");
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let u = out.state.u_u * k as f64 / 9.0;
            let f = sca_phase(u, &forms, &s0, f64::INFINITY).unwrap();
            let v = forms.residual(&f.s, u);
            assert!(v <= prev + 1e-9 * forms.h_e(&f.s));
            prev = v;
        }
    }

    #[test]
    fn ao_no_irs_equals_beamformer() {
        let ch = synthetic(17, 3, 0);
        let out = ao_full_csi(&ch, 1.0, 0.5, &AoInit::random(0, 1)).unwrap();
        let bf = solve_beamformer_full(&PhaseVector::ones(0), &ch, 1.0, 0.5).unwrap();
        assert_eq!(out.result.w, bf.w);
        assert_eq!(out.result.iterations, 1);
    }

    #[test]
    fn ao_monotone_and_feasible_on_generated_channels() {
        for seed in 0..3 {
            let cfg = ScenarioConfig { m: 4, n: 8, seed, ..Default::default() };
            let ch = generate_channels(&cfg).unwrap();
            let (p_t, p_i) = (cfg.p_t_watts(), cfg.p_i_watts());
            let out = ao_full_csi(&ch, p_t, p_i, &AoInit::random(8, seed)).unwrap();
            let r = &out.result;
            for w in r.trace.windows(2) {
                assert!(w[1].1 >= w[0].1 - 1e-6, "{:?}", r.trace);
            }
            assert!(r.power <= p_t * (1.0 + 1e-6));
            assert!(r.rates.interference <= p_i * (1.0 + 1e-6));
            assert!(r.s.umc_violation() <= 1e-9);
            let direct = row_mul(&ch.pr.effective(&r.s), r.w.as_vector()).norm_sqr();
            assert!((direct - r.rates.interference).abs() <= 1e-12 + 1e-9 * direct);
        }
    }
}
