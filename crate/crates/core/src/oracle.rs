//! Brute-force verifiers. These share only the channel types with the
//! solvers and are meant for tests and small diagnostic runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{complex_normal, PhaseVector};
use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::par::Execution;

/// Maximum number of grid points evaluated by [`grid_search_phase`].
pub const GRID_POINT_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Phase step in radians.
    pub resolution: f64,
    pub dimensions: usize,
}

impl GridSpec {
    pub fn degrees(step_deg: f64, dimensions: usize) -> Self {
        GridSpec { resolution: step_deg.to_radians(), dimensions }
    }

    pub fn points_per_axis(&self) -> usize {
        (std::f64::consts::TAU / self.resolution).round().max(1.0) as usize
    }

    pub fn total_points(&self) -> f64 {
        (self.points_per_axis() as f64).powi(self.dimensions as i32)
    }
}

/// Exhaustive search over `θ_i ∈ {0, δ, 2δ, …}`. Returns `None` when no grid
/// point satisfies the constraint.
pub fn grid_search_phase<F, C>(objective: F, constraint: Option<C>, spec: GridSpec) -> Result<Option<(PhaseVector, f64)>>
where
    F: Fn(&PhaseVector) -> f64 + Sync + Send,
    C: Fn(&PhaseVector) -> bool + Sync + Send,
{
    if !(spec.resolution > 0.0) {
        return Err(Error::InvalidInput("grid resolution must be positive".into()));
    }
    if spec.total_points() > GRID_POINT_LIMIT {
        return Err(Error::InvalidInput(format!(
            "grid of {:.3e} points exceeds the limit of {GRID_POINT_LIMIT:e}",
            spec.total_points()
        )));
    }
    let k = spec.points_per_axis();
    let n = spec.dimensions;
    let step = std::f64::consts::TAU / k as f64;
    let axis: Vec<C64> = (0..k).map(|i| C64::from_polar(1.0, i as f64 * step)).collect();
    if n == 0 {
        let s = PhaseVector::ones(0);
        let ok = constraint.as_ref().is_none_or(|c| c(&s));
        return Ok(ok.then(|| {
            let v = objective(&s);
            (s, v)
        }));
    }
    let inner = k.pow(n as u32 - 1);
    // One chunk per value of the first coordinate; reduction in index order.
    let chunks = Execution::default().map_range(k, |first| {
        let mut best: Option<(usize, f64)> = None;
        let mut s = CVector::from_element(n, axis[first]);
        for idx in 0..inner {
            let mut rem = idx;
            for d in 1..n {
                s[d] = axis[rem % k];
                rem /= k;
            }
            let pv = PhaseVector::from_raw(s.clone());
            if let Some(c) = &constraint {
                if !c(&pv) {
                    continue;
                }
            }
            let v = objective(&pv);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((first * inner + idx, v));
            }
        }
        best
    });
    let mut best: Option<(usize, f64)> = None;
    for c in chunks.into_iter().flatten() {
        if best.is_none_or(|(_, b)| c.1 > b) {
            best = Some(c);
        }
    }
    Ok(best.map(|(flat, v)| {
        let (first, mut rem) = (flat / inner, flat % inner);
        let mut s = CVector::from_element(n, axis[first]);
        for d in 1..n {
            s[d] = axis[rem % k];
            rem /= k;
        }
        (PhaseVector::from_raw(s), v)
    }))
}

/// Random isotropic beamformer directions, each scaled to the largest power
/// `≤ p_t` that passes `feasible` (bisection on the power), keeping the best
/// objective value.
pub fn random_rank_one_beamformer<F, G>(
    objective: F,
    feasible: G,
    m: usize,
    p_t: f64,
    samples: usize,
    seed: u64,
) -> (CVector, f64)
where
    F: Fn(&CVector) -> f64,
    G: Fn(&CVector) -> bool,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_w = CVector::zeros(m);
    let mut best_v = objective(&best_w);
    for _ in 0..samples.max(1) {
        let d = CVector::from_fn(m, |_, _| complex_normal(&mut rng));
        let d = &d / C64::new(d.norm(), 0.0);
        let at = |p: f64| &d * C64::new(p.sqrt(), 0.0);
        let power = if feasible(&at(p_t)) {
            p_t
        } else {
            let (mut lo, mut hi) = (0.0, p_t);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if feasible(&at(mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let w = at(power);
        let v = objective(&w);
        if v > best_v {
            best_v = v;
            best_w = w;
        }
    }
    (best_w, best_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::row_mul;

    type NoConstraint = fn(&PhaseVector) -> bool;

    #[test]
    fn constant_objective() {
        let (_, v) = grid_search_phase(|_| 3.5, None::<NoConstraint>, GridSpec::degrees(10.0, 2)).unwrap().unwrap();
        assert_eq!(v, 3.5);
    }

    #[test]
    fn single_element_alignment() {
        let (s, v) = grid_search_phase(
            |s: &PhaseVector| s.as_vector()[0].conj().re,
            None::<NoConstraint>,
            GridSpec::degrees(1.0, 1),
        )
        .unwrap()
        .unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!((s.as_vector()[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn refinement_never_worse() {
        let g = CVector::from_vec(vec![C64::new(0.3, 0.7), C64::new(-1.1, 0.2)]);
        let obj = |s: &PhaseVector| s.as_vector().dotc(&g).re;
        let coarse = grid_search_phase(obj, None::<NoConstraint>, GridSpec::degrees(10.0, 2)).unwrap().unwrap().1;
        let fine = grid_search_phase(obj, None::<NoConstraint>, GridSpec::degrees(5.0, 2)).unwrap().unwrap().1;
        assert!(fine >= coarse);
    }

    #[test]
    fn infeasible_grid_and_guard() {
        let r = grid_search_phase(|_| 0.0, Some(|_: &PhaseVector| false), GridSpec::degrees(30.0, 2)).unwrap();
        assert!(r.is_none());
        assert!(grid_search_phase(|_| 0.0, None::<NoConstraint>, GridSpec::degrees(1.0, 4)).is_err());
    }

    #[test]
    fn random_beamformer_near_mrt() {
        let h = CVector::from_vec(vec![C64::new(1.0, 0.5), C64::new(-0.3, 0.8)]);
        let p_t = 2.0;
        let obj = |w: &CVector| row_mul(&h, w).norm_sqr();
        let (_, v) = random_rank_one_beamformer(obj, |_| true, 2, p_t, 100_000, 1);
        let opt = p_t * h.norm_squared();
        assert!(v <= opt * (1.0 + 1e-12) && v >= 0.98 * opt);
        let (w1, v1) = random_rank_one_beamformer(obj, |_| true, 2, p_t, 1, 7);
        let (w2, v2) = random_rank_one_beamformer(obj, |_| true, 2, p_t, 1, 7);
        assert_eq!((w1, v1), (w2, v2));
        assert!(v1 <= v);
    }
}
