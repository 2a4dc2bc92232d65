//! Scenario configuration, channel generation and rate evaluation.
//!
//! Coefficients are `sqrt(d^-α)·CN(0,1)` with a 1 m reference distance.
//! Bob and Eve links are also kept divided by their noise standard
//! deviation, which is the form every optimizer works with; PR links stay
//! in raw units because the interference threshold is in watts.

use std::path::Path;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{phase_times, row_mul, CMatrix, CVector, C64};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub alice: [f64; 3],
    pub bob: [f64; 3],
    pub irs: [f64; 3],
    /// Drawn per realization when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eve: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pr: Option<[f64; 3]>,
}

impl Default for Positions {
    fn default() -> Self {
        Positions { alice: [0.0; 3], bob: [100.0, 0.0, 0.0], irs: [50.0, 0.0, 50.0], eve: None, pr: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub m: usize,
    pub n: usize,
    /// dBm.
    #[serde(rename = "P_T")]
    pub p_t: f64,
    /// dBm; `inf` disables the interference constraint.
    #[serde(rename = "P_I")]
    pub p_i: f64,
    #[serde(rename = "sigma2_B")]
    pub sigma2_b: f64,
    #[serde(rename = "sigma2_E")]
    pub sigma2_e: f64,
    /// Alice-Bob, Alice-Eve, Alice-PR.
    pub alpha_direct: [f64; 3],
    /// Alice-IRS, IRS-Bob, IRS-Eve, IRS-PR.
    pub alpha_reflect: [f64; 4],
    pub positions: Positions,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            m: 4,
            n: 8,
            p_t: 30.0,
            p_i: 30.0,
            sigma2_b: -100.0,
            sigma2_e: -100.0,
            alpha_direct: [3.0; 3],
            alpha_reflect: [2.5; 4],
            positions: Positions::default(),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if !self.p_t.is_finite() {
            return Err(Error::Config("P_T must be finite".into()));
        }
        if self.p_i.is_nan() || self.p_i == f64::NEG_INFINITY {
            return Err(Error::Config("P_I must be a number or +inf".into()));
        }
        if !self.sigma2_b.is_finite() || !self.sigma2_e.is_finite() {
            return Err(Error::Config("noise powers must be finite".into()));
        }
        if self.alpha_direct.iter().chain(&self.alpha_reflect).any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::Config("path-loss exponents must be finite and >= 0".into()));
        }
        let p = &self.positions;
        let mut pts = vec![("alice", p.alice), ("bob", p.bob), ("irs", p.irs)];
        if let Some(e) = p.eve {
            pts.push(("eve", e));
        }
        if let Some(r) = p.pr {
            pts.push(("pr", r));
        }
        for (i, (na, a)) in pts.iter().enumerate() {
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("position of {na} is not finite")));
            }
            for (nb, b) in &pts[i + 1..] {
                if a == b {
                    return Err(Error::Config(format!("{na} and {nb} share a position")));
                }
            }
        }
        Ok(())
    }

    pub fn p_t_watts(&self) -> f64 {
        dbm_to_watts(self.p_t)
    }

    pub fn p_i_watts(&self) -> f64 {
        dbm_to_watts(self.p_i)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Reflection coefficients of the IRS.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(CVector);

impl PhaseVector {
    /// Checked constructor: every entry within `tol` of unit modulus.
    pub fn new(s: CVector, tol: f64) -> Result<Self> {
        let v = PhaseVector(s);
        let dev = v.umc_violation();
        if !(dev <= tol) {
            return Err(Error::InvalidInput(format!("unit-modulus violation {dev:e} exceeds {tol:e}")));
        }
        Ok(v)
    }

    /// No modulus check; for solver internals that produce exact phases or
    /// relaxed P-CCP iterates.
    pub fn from_raw(s: CVector) -> Self {
        PhaseVector(s)
    }

    pub fn ones(n: usize) -> Self {
        PhaseVector(CVector::from_element(n, C64::new(1.0, 0.0)))
    }

    pub fn from_angles(theta: &[f64]) -> Self {
        PhaseVector(CVector::from_iterator(theta.len(), theta.iter().map(|&t| C64::from_polar(1.0, t))))
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let theta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        Self::from_angles(&theta)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_vector(self) -> CVector {
        self.0
    }

    /// `max_i ||s_i| − 1|`, zero for an empty vector.
    pub fn umc_violation(&self) -> f64 {
        self.0.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Entrywise projection onto the unit circle (zero entries map to 1).
    pub fn projected(&self) -> Self {
        PhaseVector(self.0.map(|z| {
            let r = z.norm();
            if r > 0.0 {
                z / r
            } else {
                C64::new(1.0, 0.0)
            }
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer(pub CVector);

impl Beamformer {
    pub fn zeros(m: usize) -> Self {
        Beamformer(CVector::zeros(m))
    }

    pub fn power(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }
}

/// Direct row `h_Aj`, IRS-to-node row `h_Ij` and cascade `H_j = diag(h_Ij)·H_AI`.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub direct: CVector,
    pub irs: CVector,
    pub cascade: CMatrix,
}

impl Link {
    pub fn new(direct: CVector, irs: CVector, h_ai: &CMatrix) -> Result<Self> {
        if direct.len() != h_ai.ncols() {
            return Err(Error::Dimension { what: "direct link length", expected: h_ai.ncols(), got: direct.len() });
        }
        let cascade = cascade(&irs, h_ai)?;
        Ok(Link { direct, irs, cascade })
    }

    /// `h_Aj + sᴴ H_j`.
    pub fn effective(&self, s: &PhaseVector) -> CVector {
        effective_row(&self.direct, &self.cascade, s)
    }

    pub fn scaled(&self, k: f64) -> Link {
        Link { direct: self.direct.scale(k), irs: self.irs.scale(k), cascade: self.cascade.scale(k) }
    }

    pub fn without_irs(&self) -> Link {
        Link {
            direct: self.direct.clone(),
            irs: CVector::zeros(self.irs.len()),
            cascade: CMatrix::zeros(self.cascade.nrows(), self.cascade.ncols()),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.direct.iter().chain(self.cascade.iter()).all(|z| *z == C64::new(0.0, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub m: usize,
    pub n: usize,
    /// Alice-to-IRS, n × m.
    pub h_ai: CMatrix,
    /// Raw links in amplitude units.
    pub bob_raw: Link,
    pub eve_raw: Link,
    pub pr: Link,
    /// Bob and Eve links divided by their noise standard deviation.
    pub bob: Link,
    pub eve: Link,
    /// Noise powers in watts.
    pub sigma2_b: f64,
    pub sigma2_e: f64,
}

impl ChannelSet {
    /// Assembles a channel set from raw links. Rows are the direct
    /// `h_AB, h_AE, h_AP` (length m) and IRS rows `h_IB, h_IE, h_IP` (length n).
    #[allow(clippy::too_many_arguments)]
    pub fn from_raw(
        h_ab: CVector,
        h_ae: CVector,
        h_ap: CVector,
        h_ib: CVector,
        h_ie: CVector,
        h_ip: CVector,
        h_ai: CMatrix,
        sigma2_b: f64,
        sigma2_e: f64,
    ) -> Result<Self> {
        if !(sigma2_b > 0.0) || !(sigma2_e > 0.0) {
            return Err(Error::InvalidInput("noise powers must be positive".into()));
        }
        let m = h_ai.ncols();
        let n = h_ai.nrows();
        let bob_raw = Link::new(h_ab, h_ib, &h_ai)?;
        let eve_raw = Link::new(h_ae, h_ie, &h_ai)?;
        let pr = Link::new(h_ap, h_ip, &h_ai)?;
        let bob = bob_raw.scaled(1.0 / sigma2_b.sqrt());
        let eve = eve_raw.scaled(1.0 / sigma2_e.sqrt());
        Ok(ChannelSet { m, n, h_ai, bob_raw, eve_raw, pr, bob, eve, sigma2_b, sigma2_e })
    }

    /// Same direct links with every reflecting coefficient zeroed.
    pub fn without_irs(&self) -> ChannelSet {
        ChannelSet {
            h_ai: CMatrix::zeros(self.n, self.m),
            bob_raw: self.bob_raw.without_irs(),
            eve_raw: self.eve_raw.without_irs(),
            pr: self.pr.without_irs(),
            bob: self.bob.without_irs(),
            eve: self.eve.without_irs(),
            ..self.clone()
        }
    }
}

/// `out[i][k] = h_Ix[i]·H_AI[i][k]`.
pub fn cascade(h_ix: &CVector, h_ai: &CMatrix) -> Result<CMatrix> {
    if h_ix.len() != h_ai.nrows() {
        return Err(Error::Dimension { what: "IRS row length", expected: h_ai.nrows(), got: h_ix.len() });
    }
    Ok(CMatrix::from_fn(h_ai.nrows(), h_ai.ncols(), |i, k| h_ix[i] * h_ai[(i, k)]))
}

/// `h_Ax + sᴴ H_x`.
pub fn effective_row(h_ax: &CVector, h_x: &CMatrix, s: &PhaseVector) -> CVector {
    if h_x.nrows() == 0 {
        return h_ax.clone();
    }
    h_ax + phase_times(s.as_vector(), h_x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub c_b: f64,
    pub c_e: f64,
    pub c_s: f64,
    /// Watts received at the PR.
    pub interference: f64,
}

pub fn rates(w: &Beamformer, s: &PhaseVector, ch: &ChannelSet) -> Rates {
    let gb = row_mul(&ch.bob.effective(s), &w.0).norm_sqr();
    let ge = row_mul(&ch.eve.effective(s), &w.0).norm_sqr();
    let c_b = gb.ln_1p() / std::f64::consts::LN_2;
    let c_e = ge.ln_1p() / std::f64::consts::LN_2;
    Rates { c_b, c_e, c_s: c_b - c_e, interference: interference(w, s, ch) }
}

pub fn interference(w: &Beamformer, s: &PhaseVector, ch: &ChannelSet) -> f64 {
    row_mul(&ch.pr.effective(s), &w.0).norm_sqr()
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// One `CN(0, 1)` draw.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn draw_vector<R: Rng>(rng: &mut R, len: usize, gain: f64) -> CVector {
    CVector::from_fn(len, |_, _| complex_normal(rng) * gain)
}

/// Resolved node positions for one realization.
pub fn place_nodes<R: Rng>(p: &Positions, rng: &mut R) -> ([f64; 3], [f64; 3]) {
    let pr = p.pr.unwrap_or_else(|| [rng.gen_range(-50.0..=50.0), rng.gen_range(-50.0..=50.0), 0.0]);
    let eve = p.eve.unwrap_or_else(|| [rng.gen_range(50.0..=150.0), rng.gen_range(-50.0..=50.0), 0.0]);
    (eve, pr)
}

/// Draws a full channel set from the config's seed.
pub fn generate_channels(config: &ScenarioConfig) -> Result<ChannelSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let p = &config.positions;
    let (eve, pr) = place_nodes(p, &mut rng);
    for (name, pos) in [("eve", eve), ("pr", pr)] {
        for other in [p.alice, p.bob, p.irs] {
            if pos == other {
                return Err(Error::Config(format!("{name} coincides with a fixed node")));
            }
        }
    }
    let gain = |a: [f64; 3], b: [f64; 3], alpha: f64| distance(a, b).powf(-alpha).sqrt();
    let (m, n) = (config.m, config.n);
    let [a_ab, a_ae, a_ap] = config.alpha_direct;
    let [a_ai, a_ib, a_ie, a_ip] = config.alpha_reflect;
    let h_ab = draw_vector(&mut rng, m, gain(p.alice, p.bob, a_ab));
    let h_ae = draw_vector(&mut rng, m, gain(p.alice, eve, a_ae));
    let h_ap = draw_vector(&mut rng, m, gain(p.alice, pr, a_ap));
    let g_ai = gain(p.alice, p.irs, a_ai);
    let h_ai = CMatrix::from_fn(n, m, |_, _| complex_normal(&mut rng) * g_ai);
    let h_ib = draw_vector(&mut rng, n, gain(p.irs, p.bob, a_ib));
    let h_ie = draw_vector(&mut rng, n, gain(p.irs, eve, a_ie));
    let h_ip = draw_vector(&mut rng, n, gain(p.irs, pr, a_ip));
    ChannelSet::from_raw(
        h_ab,
        h_ae,
        h_ap,
        h_ib,
        h_ie,
        h_ip,
        h_ai,
        dbm_to_watts(config.sigma2_b),
        dbm_to_watts(config.sigma2_e),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_set(seed: u64, m: usize, n: usize) -> ChannelSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = |rng: &mut ChaCha8Rng, k| draw_vector(rng, k, 1.0);
        let h_ab = v(&mut rng, m);
        let h_ae = v(&mut rng, m);
        let h_ap = v(&mut rng, m);
        let h_ib = v(&mut rng, n);
        let h_ie = v(&mut rng, n);
        let h_ip = v(&mut rng, n);
        let h_ai = CMatrix::from_fn(n, m, |_, _| complex_normal(&mut rng));
        ChannelSet::from_raw(h_ab, h_ae, h_ap, h_ib, h_ie, h_ip, h_ai, 1.0, 1.0).unwrap()
    }

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(-100.0) - 1e-13).abs() < 1e-27);
        assert!((watts_to_dbm(1e-3) - 0.0).abs() < 1e-12);
        assert_eq!(dbm_to_watts(f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn deterministic_generation() {
        let cfg = ScenarioConfig { seed: 42, ..Default::default() };
        assert_eq!(generate_channels(&cfg).unwrap(), generate_channels(&cfg).unwrap());
        let other = ScenarioConfig { seed: 43, ..Default::default() };
        assert_ne!(generate_channels(&cfg).unwrap(), generate_channels(&other).unwrap());
    }

    #[test]
    fn cascade_identity_and_zero() {
        let ones = CVector::from_element(2, c(1.0, 0.0));
        assert_eq!(cascade(&ones, &CMatrix::identity(2, 2)).unwrap(), CMatrix::identity(2, 2));
        let z = cascade(&CVector::zeros(2), &CMatrix::identity(2, 2)).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));
        assert!(cascade(&CVector::zeros(3), &CMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn cascade_matches_elementwise() {
        let ch = random_set(1, 2, 3);
        for i in 0..3 {
            for k in 0..2 {
                assert_eq!(ch.bob_raw.cascade[(i, k)], ch.bob_raw.irs[i] * ch.h_ai[(i, k)]);
            }
        }
        let diag = CMatrix::from_diagonal(&ch.bob_raw.irs) * &ch.h_ai;
        assert!((diag - &ch.bob_raw.cascade).norm() < 1e-15);
    }

    #[test]
    fn effective_row_cases() {
        let ch = random_set(2, 2, 3);
        let s = PhaseVector::ones(3);
        let zero_h = CMatrix::zeros(3, 2);
        assert_eq!(effective_row(&ch.bob.direct, &zero_h, &s), ch.bob.direct);
        let col_sums = effective_row(&CVector::zeros(2), &ch.bob.cascade, &s);
        for k in 0..2 {
            let sum: C64 = ch.bob.cascade.column(k).iter().sum();
            assert!((col_sums[k] - sum).norm() < 1e-14);
        }
        let s = PhaseVector::from_angles(&[0.3, -1.2, 2.0]);
        let got = effective_row(&ch.bob.direct, &ch.bob.cascade, &s);
        for k in 0..2 {
            let mut expect = ch.bob.direct[k];
            for i in 0..3 {
                expect += s.as_vector()[i].conj() * ch.bob.cascade[(i, k)];
            }
            assert!((got[k] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_beamformer_rates() {
        let ch = random_set(3, 2, 2);
        let r = rates(&Beamformer::zeros(2), &PhaseVector::ones(2), &ch);
        assert_eq!((r.c_b, r.c_e, r.c_s, r.interference), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn rates_match_scalar_oracle() {
        let ch = random_set(4, 2, 2);
        let s = PhaseVector::from_angles(&[0.7, 2.1]);
        let w = Beamformer(CVector::from_vec(vec![c(0.3, -0.2), c(-0.5, 0.9)]));
        let r = rates(&w, &s, &ch);
        let sv = s.as_vector();
        let gain = |l: &Link| {
            let mut acc = c(0.0, 0.0);
            for k in 0..2 {
                let mut row = l.direct[k];
                for i in 0..2 {
                    row += sv[i].conj() * l.irs[i] * ch.h_ai[(i, k)];
                }
                acc += row * w.0[k];
            }
            acc.norm_sqr()
        };
        assert!((r.c_b - (1.0 + gain(&ch.bob)).log2()).abs() < 1e-12);
        assert!((r.c_e - (1.0 + gain(&ch.eve)).log2()).abs() < 1e-12);
        assert!((r.interference - gain(&ch.pr)).abs() < 1e-12);
    }

    #[test]
    fn zero_eve_gives_bob_rate() {
        let mut ch = random_set(5, 2, 2);
        ch.eve = ch.eve.scaled(0.0);
        let w = Beamformer(CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]));
        let r = rates(&w, &PhaseVector::ones(2), &ch);
        assert_eq!(r.c_s, r.c_b);
    }

    #[test]
    fn normalization_consistency() {
        let cfg = ScenarioConfig { seed: 9, ..Default::default() };
        let ch = generate_channels(&cfg).unwrap();
        let s = PhaseVector::from_angles(&[0.1; 8]);
        let w = Beamformer(CVector::from_element(4, c(0.2, 0.1)));
        let raw = row_mul(&ch.bob_raw.effective(&s), &w.0).norm_sqr();
        let expected = (1.0 + raw / ch.sigma2_b).log2();
        assert!((rates(&w, &s, &ch).c_b - expected).abs() < 1e-10);
    }

    #[test]
    fn large_scale_gain_monte_carlo() {
        // Alice-Bob at 100 m with α=3 has mean power 1e-6; α=0 gives 1.
        let draws = 100_000;
        for (alpha, expect) in [(3.0, 1e-6), (0.0, 1.0)] {
            let mut mean = 0.0;
            for seed in 0..(draws / 4) as u64 {
                let cfg = ScenarioConfig {
                    m: 4,
                    n: 0,
                    alpha_direct: [alpha, 3.0, 3.0],
                    seed,
                    ..Default::default()
                };
                let ch = generate_channels(&cfg).unwrap();
                mean += ch.bob_raw.direct.norm_squared();
            }
            mean /= draws as f64;
            assert!((mean / expect - 1.0).abs() < 0.02, "alpha {alpha}: mean {mean}");
        }
    }

    #[test]
    fn no_irs_config_has_empty_irs_fields() {
        let cfg = ScenarioConfig { n: 0, seed: 1, ..Default::default() };
        let ch = generate_channels(&cfg).unwrap();
        assert_eq!(ch.bob.cascade.nrows(), 0);
        assert_eq!(ch.bob.irs.len(), 0);
        let s = PhaseVector::ones(0);
        assert_eq!(ch.bob.effective(&s), ch.bob.direct);
    }

    #[test]
    fn random_placement_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (eve, pr) = place_nodes(&Positions::default(), &mut rng);
            assert!((50.0..=150.0).contains(&eve[0]) && eve[1].abs() <= 50.0 && eve[2] == 0.0);
            assert!(pr[0].abs() <= 50.0 && pr[1].abs() <= 50.0 && pr[2] == 0.0);
        }
    }

    #[test]
    fn config_round_trip_and_inf() {
        let mut cfg = ScenarioConfig { p_i: f64::INFINITY, ..Default::default() };
        cfg.positions.pr = Some([20.0, 0.0, 0.0]);
        let text = cfg.to_toml().unwrap();
        assert!(text.contains("P_I = inf"), "{text}");
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert!(ScenarioConfig::from_toml("m = 0\n").is_err());
    }

    #[test]
    fn config_rejects_bad_values() {
        let cfg = ScenarioConfig { m: 0, ..ScenarioConfig::default() };
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.alpha_reflect[1] = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.positions.eve = Some([100.0, 0.0, 0.0]);
        assert!(cfg.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn effective_row_is_affine_in_direct(angles in proptest::collection::vec(0.0f64..6.3, 3), seed in 0u64..100) {
            let ch = random_set(seed, 2, 3);
            let s = PhaseVector::from_angles(&angles);
            let diff = effective_row(&ch.bob.direct, &ch.bob.cascade, &s)
                - effective_row(&CVector::zeros(2), &ch.bob.cascade, &s);
            proptest::prop_assert!((diff - &ch.bob.direct).norm() < 1e-12);
        }

        #[test]
        fn bob_rate_increases_with_power(scale in 0.01f64..10.0, seed in 0u64..100) {
            let mut ch = random_set(seed, 2, 2);
            ch.eve = ch.eve.scaled(0.0);
            let s = PhaseVector::ones(2);
            let w = Beamformer(CVector::from_vec(vec![c(0.3, 0.1), c(-0.2, 0.4)]));
            let w2 = Beamformer(w.0.scale(1.0 + scale));
            proptest::prop_assert!(rates(&w2, &s, &ch).c_b > rates(&w, &s, &ch).c_b);
        }
    }
}
