//! Artificial-noise scheme for an eavesdropper with unknown CSI.
//!
//! Alice spends the least power `P_S` that meets an SNR target `T` at Bob
//! (under the interference limit) and radiates the remaining `P_T − P_S` as
//! isotropic noise inside the null space of the Bob and PR effective rows.

use std::time::Instant;

use crate::channel::{Beamformer, ChannelSet, PhaseVector, Rates};
use crate::error::{Error, Result};
use crate::fullcsi::{AoInit, ACCURACY, AO_MAX_ITER, SCA_MAX_ITER};
use crate::linalg::{lambda_max, null_space_basis, row_mul, CMatrix, CVector, HermitianMatrix, C64};
use crate::result::{Flags, RunResult};
use crate::subproblems::{
    quadratic_params_rank_one, scale_to_snr, solve_linear_phase, solve_minpower_step, LinearPhaseProblem,
};

/// Minimum SNR at Bob, linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosTarget(f64);

impl QosTarget {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("QoS target must be finite and > 0, got {t}")));
        }
        Ok(QosTarget(t))
    }

    pub fn from_db(db: f64) -> Result<Self> {
        Self::new(crate::channel::db_to_linear(db))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct AnCovariance {
    /// `(power/k)·U Uᴴ`, m × m.
    pub r_an: HermitianMatrix,
    /// Orthonormal null-space basis, m × k.
    pub u_an: CMatrix,
    /// `P_T − P_S`, watts.
    pub power: f64,
}

impl AnCovariance {
    pub fn zero(m: usize) -> Self {
        AnCovariance { r_an: HermitianMatrix::zeros(m), u_an: CMatrix::zeros(m, 0), power: 0.0 }
    }

    /// `h R hᴴ` for a row `h`.
    pub fn leakage(&self, h: &CVector) -> f64 {
        self.r_an.quad(&h.conjugate())
    }
}

#[derive(Debug, Clone)]
pub struct SnrPhaseOutcome {
    pub s: PhaseVector,
    /// `|h_B(s_k) w|²` for k = 0, 1, …
    pub trace: Vec<f64>,
    pub degenerate: bool,
}

/// Maximizes `|h_B(s) w|²` over unit-modulus `s` under the interference
/// limit. Bob's form is minorized by its linearization and the
/// interference majorized with λ₁, so every step is a linear phase problem.
pub fn max_snr_phase(w: &Beamformer, ch: &ChannelSet, p_i: f64, s0: &PhaseVector) -> Result<SnrPhaseOutcome> {
    let n = ch.n;
    if s0.len() != n {
        return Err(Error::Dimension { what: "initial phase vector", expected: n, got: s0.len() });
    }
    let wv = w.as_vector();
    let bob = quadratic_params_rank_one(wv, &ch.bob.direct, &ch.bob.cascade);
    let pr = quadratic_params_rank_one(wv, &ch.pr.direct, &ch.pr.cascade);
    let mut s = s0.clone();
    let mut snr = bob.eval(s.as_vector());
    let mut trace = vec![snr];
    let mut degenerate = false;
    if n == 0 || bob.linear.norm() == 0.0 && bob.quadratic.frobenius_norm() == 0.0 {
        return Ok(SnrPhaseOutcome { s, trace, degenerate });
    }
    let ipc = p_i.is_finite();
    let lp = if ipc { lambda_max(&pr.quadratic)? } else { 0.0 };
    for _ in 0..SCA_MAX_ITER {
        let st = s.as_vector();
        let gain = &bob.linear + bob.quadratic.as_matrix() * st;
        let constraint = ipc.then(|| {
            let d = &pr.linear - (st * C64::new(lp, 0.0) - pr.quadratic.as_matrix() * st);
            let c3 = pr.constant + 2.0 * n as f64 * lp - pr.quadratic.quad(st);
            (d, p_i - c3)
        });
        let sol = solve_linear_phase(&LinearPhaseProblem { gain, constraint })?;
        degenerate |= sol.degenerate;
        let next = sol.s;
        let snr_new = bob.eval(next.as_vector());
        if snr_new < snr || (ipc && pr.eval(next.as_vector()) > p_i * (1.0 + 1e-9)) {
            break;
        }
        let change = snr_new - snr;
        s = next;
        snr = snr_new;
        trace.push(snr);
        if change <= ACCURACY * 1e-3 * snr {
            break;
        }
    }
    Ok(SnrPhaseOutcome { s, trace, degenerate })
}

#[derive(Debug, Clone)]
pub struct PowerMinOutcome {
    pub w: Beamformer,
    pub s: PhaseVector,
    /// `‖w‖²`, watts.
    pub p_s: f64,
    /// `(AO iteration, ‖w‖²)`.
    pub trace: Vec<(usize, f64)>,
    pub iterations: usize,
    pub flags: Flags,
}

/// `w0` only seeds the linearization; the first step is always taken, so
/// an infeasible start (MRT above the interference limit) is fine.
fn minpower_sca(s: &PhaseVector, ch: &ChannelSet, t: f64, p_i: f64, w0: Beamformer) -> Result<Beamformer> {
    let mut w = solve_minpower_step(s, ch, t, p_i, &w0)?.w;
    let mut p = w.power();
    for _ in 1..SCA_MAX_ITER {
        let next = solve_minpower_step(s, ch, t, p_i, &w)?.w;
        let pn = next.power();
        if pn > p {
            break;
        }
        let change = p - pn;
        w = next;
        p = pn;
        if change <= ACCURACY * 1e-3 * p {
            break;
        }
    }
    Ok(w)
}

/// Minimum-power beamformer and phases meeting `|h_B w|² ≥ T`.
///
/// Alternates the min-power SCA (fixed `s`) with [`max_snr_phase`] (fixed
/// `w`); each phase step raises Bob's SNR, which lets the next beamformer
/// step lower the power. An unattainable target returns `Error::Infeasible`.
pub fn ao_power_min(ch: &ChannelSet, t: QosTarget, p_i: f64, init: &AoInit) -> Result<PowerMinOutcome> {
    let t = t.value();
    let mut flags = Flags::empty();
    let mut s = init.s.clone();
    if s.len() != ch.n {
        return Err(Error::Dimension { what: "initial phase vector", expected: ch.n, got: s.len() });
    }
    let b = ch.bob.effective(&s);
    if b.norm() == 0.0 {
        return Err(Error::Infeasible("Bob's effective channel is zero".into()));
    }
    let mrt = Beamformer(scale_to_snr(&b.conjugate(), &b, t));
    let mut w = minpower_sca(&s, ch, t, p_i, mrt)?;
    let mut trace = vec![(0, w.power())];
    let mut iterations = 0;
    if ch.n > 0 {
        let mut converged = false;
        for k in 1..=AO_MAX_ITER {
            iterations = k;
            let ph = max_snr_phase(&w, ch, p_i, &s)?;
            if ph.degenerate {
                flags |= Flags::DEGENERATE_PHASE;
            }
            s = ph.s;
            let w_new = minpower_sca(&s, ch, t, p_i, w.clone())?;
            let (p_old, p_new) = (w.power(), w_new.power());
            if p_new <= p_old {
                w = w_new;
            } else {
                flags |= Flags::STEP_REJECTED;
            }
            trace.push((k, w.power()));
            if p_old - w.power() <= ACCURACY * w.power() {
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
    let b = ch.bob.effective(&s);
    let gb = row_mul(&b, w.as_vector()).norm_sqr();
    if gb >= t {
        w = Beamformer(scale_to_snr(w.as_vector(), &b, t));
    }
    Ok(PowerMinOutcome { p_s: w.power(), w, s, trace, iterations, flags })
}

/// Equal-power AN covariance in the null space of `[h̄_B(s); h_P(s)]`.
///
/// Uses the raw Bob row. Returns a zero covariance with [`Flags::NO_AN_SPACE`]
/// when `m ≤ 2` or the null space is empty.
pub fn an_covariance(w: &Beamformer, s: &PhaseVector, ch: &ChannelSet, p_t: f64, p_s: f64) -> Result<(AnCovariance, Flags)> {
    let m = ch.m;
    if w.as_vector().len() != m {
        return Err(Error::Dimension { what: "beamformer length", expected: m, got: w.as_vector().len() });
    }
    if p_s > p_t * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("signal power {p_s:e} exceeds the budget {p_t:e}")));
    }
    if m <= 2 {
        return Ok((AnCovariance::zero(m), Flags::NO_AN_SPACE));
    }
    let rows = [ch.bob_raw.effective(s), ch.pr.effective(s)];
    // Gram matrix Σ conj(h)·hᵀ: zᴴGz = Σ |h z|².
    let mut gram = CMatrix::zeros(m, m);
    for h in &rows {
        gram += h.conjugate() * h.transpose();
    }
    let mut basis = null_space_basis(&HermitianMatrix::from_hermitian_part(gram), None)?;
    // One explicit pass against the row span so leakage sits at round-off.
    let mut span: Vec<CVector> = Vec::new();
    for h in &rows {
        let mut q = h.conjugate();
        for p in &span {
            q -= p * p.dotc(&q);
        }
        let qn = q.norm();
        if qn > 1e-12 * h.norm() && qn > 0.0 {
            span.push(q / C64::new(qn, 0.0));
        }
    }
    for mut col in basis.column_iter_mut() {
        let mut v = col.clone_owned();
        for q in &span {
            v -= q * q.dotc(&v);
        }
        let vn = v.norm();
        col.copy_from(&(v / C64::new(vn, 0.0)));
    }
    let k = basis.ncols();
    let power = (p_t - p_s).max(0.0);
    if k == 0 {
        return Ok((AnCovariance::zero(m), Flags::NO_AN_SPACE));
    }
    let r = &basis * basis.adjoint() * C64::new(power / k as f64, 0.0);
    Ok((AnCovariance { r_an: HermitianMatrix::from_hermitian_part(r), u_an: basis, power }, Flags::empty()))
}

/// `log₂(1+T) − log₂(1 + |h̄_E w|²/(σ_E² + h̄_E R h̄_Eᴴ))` with raw Eve rows.
/// May be negative.
pub fn actual_secrecy_rate(w: &Beamformer, s: &PhaseVector, an: &AnCovariance, ch: &ChannelSet, t: f64) -> f64 {
    (1.0 + t).log2() - (1.0 + eve_sinr(w, s, an, ch)).log2()
}

fn eve_sinr(w: &Beamformer, s: &PhaseVector, an: &AnCovariance, ch: &ChannelSet) -> f64 {
    let e = ch.eve_raw.effective(s);
    row_mul(&e, w.as_vector()).norm_sqr() / (ch.sigma2_e + an.leakage(&e))
}

#[derive(Debug, Clone)]
pub struct NoCsiOutcome {
    pub result: RunResult,
    pub an: AnCovariance,
}

/// Full scheme at target `T`: power minimization, AN construction and the
/// achieved secrecy rate. An unattainable target or `P_S > P_T` yields a
/// result flagged [`Flags::INFEASIBLE`] with NaN rates.
pub fn run_no_csi(ch: &ChannelSet, p_t: f64, p_i: f64, t: QosTarget, init: &AoInit) -> Result<NoCsiOutcome> {
    let start = Instant::now();
    let infeasible = |iterations, trace, extra: Flags| NoCsiOutcome {
        result: RunResult {
            w: Beamformer::zeros(ch.m),
            s: init.s.clone(),
            rates: Rates { c_b: f64::NAN, c_e: f64::NAN, c_s: f64::NAN, interference: 0.0 },
            power: 0.0,
            tau_opt: None,
            p_s: None,
            trace,
            iterations,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            flags: Flags::INFEASIBLE | extra,
        },
        an: AnCovariance::zero(ch.m),
    };
    let pm = match ao_power_min(ch, t, p_i, init) {
        Ok(pm) => pm,
        Err(Error::Infeasible(_)) => return Ok(infeasible(0, Vec::new(), Flags::empty())),
        Err(e) => return Err(e),
    };
    if pm.p_s > p_t * (1.0 + 1e-9) {
        return Ok(infeasible(pm.iterations, pm.trace, pm.flags));
    }
    let (an, an_flags) = an_covariance(&pm.w, &pm.s, ch, p_t, pm.p_s.min(p_t))?;
    let b = ch.bob.effective(&pm.s);
    let c_b = (1.0 + row_mul(&b, pm.w.as_vector()).norm_sqr()).log2();
    let c_e = (1.0 + eve_sinr(&pm.w, &pm.s, &an, ch)).log2();
    let p = ch.pr.effective(&pm.s);
    let interference = row_mul(&p, pm.w.as_vector()).norm_sqr() + an.leakage(&p);
    let result = RunResult {
        power: pm.p_s + an.r_an.trace(),
        rates: Rates { c_b, c_e, c_s: c_b - c_e, interference },
        tau_opt: None,
        p_s: Some(pm.p_s),
        trace: pm.trace,
        iterations: pm.iterations,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        flags: pm.flags | an_flags,
        w: pm.w,
        s: pm.s,
    };
    Ok(NoCsiOutcome { result, an })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_normal, interference};
    use crate::oracle::{grid_search_phase, GridSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

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

    fn random_w(seed: u64, m: usize) -> Beamformer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Beamformer(CVector::from_fn(m, |_, _| complex_normal(&mut rng)))
    }

    fn snr(ch: &ChannelSet, s: &PhaseVector, w: &Beamformer) -> f64 {
        row_mul(&ch.bob.effective(s), w.as_vector()).norm_sqr()
    }

    #[test]
    fn qos_validation() {
        assert!(QosTarget::new(0.0).is_err());
        assert!(QosTarget::new(f64::INFINITY).is_err());
        assert!((QosTarget::from_db(20.0).unwrap().value() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn snr_phase_ignores_missing_cascade() {
        let mut ch = synthetic(1, 3, 3);
        ch.bob = ch.bob.without_irs();
        let s0 = AoInit::random(3, 2).s;
        let out = max_snr_phase(&random_w(3, 3), &ch, 1.0, &s0).unwrap();
        assert_eq!(out.s, s0);
    }

    #[test]
    fn snr_phase_trace_non_decreasing() {
        for seed in 0..20 {
            let ch = synthetic(100 + seed, 3, 4);
            let w = random_w(seed, 3);
            let s0 = AoInit::random(4, seed).s;
            let p_i = 1.5 * interference(&w, &s0, &ch);
            let out = max_snr_phase(&w, &ch, p_i, &s0).unwrap();
            assert!(out.trace.windows(2).all(|p| p[1] >= p[0]));
            assert!(interference(&w, &out.s, &ch) <= p_i * (1.0 + 1e-9));
            assert!(out.s.umc_violation() <= 1e-12);
        }
    }

    #[test]
    fn snr_phase_matches_constrained_grid() {
        for seed in 0..5 {
            let ch = synthetic(200 + seed, 2, 2);
            let w = random_w(seed, 2);
            let s0 = PhaseVector::ones(2);
            let p_i = 1.2 * interference(&w, &s0, &ch);
            let out = max_snr_phase(&w, &ch, p_i, &s0).unwrap();
            let got = snr(&ch, &out.s, &w);
            let (_, grid) = grid_search_phase(
                |s| snr(&ch, s, &w),
                Some(|s: &PhaseVector| interference(&w, s, &ch) <= p_i),
                GridSpec::degrees(1.0, 2),
            )
            .unwrap()
            .unwrap();
            // A local method; the 1° grid slack bounds how far below it may sit.
            assert!(got >= grid - 5e-2 * grid.max(1.0), "seed {seed}: {got} vs {grid}");
        }
    }

    #[test]
    fn power_min_without_irs_is_mrt() {
        let ch = synthetic(5, 3, 0);
        let t = QosTarget::new(4.0).unwrap();
        let out = ao_power_min(&ch, t, f64::INFINITY, &AoInit { s: PhaseVector::ones(0) }).unwrap();
        let expect = 4.0 / ch.bob.direct.norm_squared();
        assert!((out.p_s - expect).abs() <= 1e-3 * expect, "{} vs {expect}", out.p_s);
        let out2 = ao_power_min(&ch, QosTarget::new(8.0).unwrap(), f64::INFINITY, &AoInit { s: PhaseVector::ones(0) }).unwrap();
        assert!((out2.p_s / out.p_s - 2.0).abs() <= 0.02);
    }

    #[test]
    fn power_min_meets_target_with_monotone_power() {
        for seed in 0..6 {
            let ch = synthetic(300 + seed, 3, 4);
            let t = 10.0;
            let p_i = 0.5;
            let out = ao_power_min(&ch, QosTarget::new(t).unwrap(), p_i, &AoInit::random(4, seed)).unwrap();
            assert!(out.trace.windows(2).all(|p| p[1].1 <= p[0].1 * (1.0 + 1e-9)));
            let g = snr(&ch, &out.s, &out.w);
            assert!((g - t).abs() <= 1e-3 * t, "{g}");
            assert!(interference(&out.w, &out.s, &ch) <= p_i * (1.0 + 1e-6));
        }
    }

    #[test]
    fn power_min_reports_unreachable_target() {
        let ch = synthetic(7, 1, 0);
        // One antenna: the SNR target fixes |w|, and the interference limit forbids it.
        let t = QosTarget::new(100.0).unwrap();
        let need = 100.0 / ch.bob.direct.norm_squared() * ch.pr.direct.norm_squared();
        let r = ao_power_min(&ch, t, 0.5 * need, &AoInit { s: PhaseVector::ones(0) });
        assert!(matches!(r, Err(Error::Infeasible(_))), "{r:?}");
    }

    #[test]
    fn an_covariance_properties() {
        let ch = synthetic(8, 4, 3);
        let w = random_w(1, 4);
        let s = AoInit::random(3, 1).s;
        let (an, flags) = an_covariance(&w, &s, &ch, 3.0, 1.0).unwrap();
        assert!(flags.is_empty());
        assert_eq!(an.u_an.ncols(), 2);
        assert!((an.r_an.trace() - 2.0).abs() <= 1e-9 * 2.0);
        for h in [ch.bob_raw.effective(&s), ch.pr.effective(&s)] {
            assert!(an.leakage(&h) <= 1e-9 * an.r_an.trace() * h.norm_squared());
        }
        let gram = an.u_an.adjoint() * &an.u_an;
        assert!((gram - CMatrix::identity(2, 2)).norm() <= 1e-10);
        let (zero, _) = an_covariance(&w, &s, &ch, 1.0, 1.0).unwrap();
        assert_eq!(zero.r_an.frobenius_norm(), 0.0);
    }

    #[test]
    fn an_needs_three_antennas() {
        let ch = synthetic(9, 2, 2);
        let (an, flags) = an_covariance(&random_w(2, 2), &PhaseVector::ones(2), &ch, 2.0, 1.0).unwrap();
        assert!(flags.contains(Flags::NO_AN_SPACE));
        assert_eq!(an.power, 0.0);
    }

    #[test]
    fn secrecy_rate_oracles() {
        let ch = synthetic(10, 4, 3);
        let w = random_w(3, 4);
        let s = AoInit::random(3, 4).s;
        let (an, _) = an_covariance(&w, &s, &ch, 5.0, w.power()).unwrap();
        let t: f64 = 7.0;
        // Direct scalar arithmetic.
        let e = ch.eve_raw.direct.clone() + crate::linalg::phase_times(s.as_vector(), &ch.eve_raw.cascade);
        let mut sig = C64::new(0.0, 0.0);
        for k in 0..4 {
            sig += e[k] * w.0[k];
        }
        let mut noise = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                noise += (e[i] * an.r_an.as_matrix()[(i, j)] * e[j].conj()).re;
            }
        }
        let expect = (1.0 + t).log2() - (1.0 + sig.norm_sqr() / (ch.sigma2_e + noise)).log2();
        assert!((actual_secrecy_rate(&w, &s, &an, &ch, t) - expect).abs() <= 1e-10);

        let mut quiet = ch.clone();
        quiet.eve_raw = quiet.eve_raw.scaled(0.0);
        assert!((actual_secrecy_rate(&w, &s, &an, &quiet, t) - (1.0 + t).log2()).abs() <= 1e-12);

        let mut twin = ch.clone();
        twin.eve_raw = twin.bob_raw.clone();
        twin.sigma2_e = row_mul(&twin.bob_raw.effective(&s), w.as_vector()).norm_sqr() / t;
        assert!(actual_secrecy_rate(&w, &s, &AnCovariance::zero(4), &twin, t).abs() <= 1e-12);
    }

    #[test]
    fn scheme_end_to_end() {
        let ch = synthetic(11, 4, 3);
        let (p_t, p_i) = (10.0, 2.0);
        let t = QosTarget::new(5.0).unwrap();
        let out = run_no_csi(&ch, p_t, p_i, t, &AoInit::random(3, 0)).unwrap();
        let r = &out.result;
        assert!(!r.flags.contains(Flags::INFEASIBLE));
        assert!((r.power - p_t).abs() <= 1e-9 * p_t);
        let b = ch.bob.effective(&r.s);
        let sinr_b = row_mul(&b, r.w.as_vector()).norm_sqr() / (1.0 + out.an.leakage(&b));
        assert!((sinr_b - 5.0).abs() <= 1e-3 * 5.0);
        let p = ch.pr.effective(&r.s);
        assert!((r.rates.interference - interference(&r.w, &r.s, &ch)).abs() <= 1e-9 * p_i);
        assert!(out.an.leakage(&p) <= 1e-9 * p_i);
        let far = run_no_csi(&ch, 1e-3, p_i, QosTarget::new(1e6).unwrap(), &AoInit::random(3, 0)).unwrap();
        assert!(far.result.flags.contains(Flags::INFEASIBLE));
        assert!(far.result.rates.c_s.is_nan());
    }
}
