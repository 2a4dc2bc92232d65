//! Small dense kernels shared by every solver: Hermitian eigensystems,
//! null-space bases, entrywise phase extraction and a monotone bisection
//! engine.
//!
//! Everything here is sized for the problem at hand (a few dozen rows at
//! most) and is a pure function of its inputs.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::channel::PhaseVector;
use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// A square complex matrix equal to its own conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Validates conjugate symmetry to 1e-12 (relative to the largest entry)
    /// and stores the exact Hermitian part.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension {
                what: "Hermitian matrix columns",
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        if entries.nrows() == 0 {
            return Err(Error::InvalidInput("Hermitian matrix must have dimension >= 1".into()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("Hermitian matrix"));
        }
        let scale = entries.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let d = entries.nrows();
        for i in 0..d {
            for j in 0..=i {
                let asym = (entries[(i, j)] - entries[(j, i)].conj()).norm();
                if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not Hermitian at ({i},{j}): asymmetry {asym:e}"
                    )));
                }
            }
        }
        Ok(Self::from_hermitian_part(entries))
    }

    /// Keeps `(A + Aᴴ)/2`. Used for products such as `H R Hᴴ` that are
    /// Hermitian up to rounding.
    pub fn from_hermitian_part(entries: CMatrix) -> Self {
        let sym = (&entries + entries.adjoint()).scale(0.5);
        HermitianMatrix(sym)
    }

    pub fn identity(d: usize) -> Self {
        HermitianMatrix(CMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        HermitianMatrix(CMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// `xᴴ A x`, real for Hermitian `A`.
    pub fn quad(&self, x: &CVector) -> f64 {
        x.dotc(&(&self.0 * x)).re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }
}

/// Eigen-decomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: CMatrix,
}

impl Eigensystem {
    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn smallest(&self) -> f64 {
        *self.values.last().expect("non-empty eigensystem")
    }
}

pub fn hermitian_eig(a: &HermitianMatrix) -> Result<Eigensystem> {
    if a.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("eigen-decomposition input"));
    }
    let d = a.dim();
    // Real symmetric embedding [[Re, −Im], [Im, Re]]: every eigenvalue appears
    // twice and [x; y] maps to the complex eigenvector x + iy.
    let mut re = DMatrix::<f64>::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = a.0[(i, j)];
            re[(i, j)] = z.re;
            re[(i + d, j + d)] = z.re;
            re[(i, j + d)] = -z.im;
            re[(i + d, j)] = z.im;
        }
    }
    let re = (&re + re.transpose()) * 0.5;
    let eig = SymmetricEigen::new(re.clone());
    // Eigenvalues are re-derived as Rayleigh quotients: on ill-conditioned
    // input the solver's value order can disagree with its vector columns.
    let rq: Vec<f64> = (0..2 * d)
        .map(|i| {
            let v = eig.eigenvectors.column(i);
            v.dot(&(&re * v))
        })
        .collect();
    let mut order: Vec<usize> = (0..2 * d).collect();
    order.sort_by(|&i, &j| rq[j].total_cmp(&rq[i]));
    let mut values = Vec::with_capacity(d);
    let mut vectors = CMatrix::zeros(d, d);
    let mut found = 0;
    for &i in &order {
        if found == d {
            break;
        }
        let col = eig.eigenvectors.column(i);
        let mut z = CVector::from_fn(d, |r, _| C64::new(col[r], col[r + d]));
        // Complex Gram-Schmidt against the accepted vectors, twice.
        for _ in 0..2 {
            for k in 0..found {
                let q = vectors.column(k).into_owned();
                let proj = q.dotc(&z);
                z -= q * proj;
            }
        }
        let n = z.norm();
        if n < 0.5 {
            continue;
        }
        z /= C64::new(n, 0.0);
        vectors.set_column(found, &z);
        values.push(a.quad(&z));
        found += 1;
    }
    if found < d {
        return Err(Error::Solver("eigenvector extraction lost rank".into()));
    }
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let sorted = CMatrix::from_fn(d, d, |r, c| vectors[(r, idx[c])]);
    Ok(Eigensystem { values: idx.iter().map(|&i| values[i]).collect(), vectors: sorted })
}

/// Largest eigenvalue `λ₁(A)`.
pub fn lambda_max(a: &HermitianMatrix) -> Result<f64> {
    if a.dim() == 1 {
        return Ok(a.0[(0, 0)].re);
    }
    Ok(hermitian_eig(a)?.largest())
}

/// Orthonormal basis of the numerical null space of a PSD matrix.
///
/// `rank_tolerance` is absolute; `None` means `1e-9·λ_max`. Returns an
/// `d × 0` matrix when `A` has full numerical rank.
pub fn null_space_basis(a: &HermitianMatrix, rank_tolerance: Option<f64>) -> Result<CMatrix> {
    let eig = hermitian_eig(a)?;
    let tol = rank_tolerance.unwrap_or_else(|| 1e-9 * eig.largest().max(0.0));
    let cols: Vec<usize> = (0..a.dim()).filter(|&i| eig.values[i] <= tol).collect();
    let mut basis = CMatrix::zeros(a.dim(), cols.len());
    for (k, &i) in cols.iter().enumerate() {
        basis.set_column(k, &eig.vectors.column(i));
    }
    Ok(basis)
}

/// `s_i = v_i/|v_i|`. Fails on an exactly-zero (or non-finite) entry.
pub fn entrywise_phase(v: &CVector) -> Result<PhaseVector> {
    let mut out = CVector::zeros(v.len());
    for (i, z) in v.iter().enumerate() {
        let r = z.norm();
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::DegenerateEntry(i));
        }
        out[i] = z / r;
    }
    Ok(PhaseVector::from_raw(out))
}

/// Like [`entrywise_phase`] but maps a degenerate entry to phase 0 and
/// reports whether that happened. Any unit-modulus value is optimal for a
/// zero coefficient.
pub fn entrywise_phase_or_unit(v: &CVector) -> (PhaseVector, bool) {
    let mut degenerate = false;
    let out = v.map(|z| {
        let r = z.norm();
        if r > 0.0 && r.is_finite() {
            z / r
        } else {
            degenerate = true;
            C64::new(1.0, 0.0)
        }
    });
    (PhaseVector::from_raw(out), degenerate)
}

/// Declared direction of a monotone scalar evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    NonDecreasing,
    NonIncreasing,
}

#[derive(Debug, Clone, Copy)]
pub struct BisectionSpec {
    pub lower: f64,
    pub upper: f64,
    pub tolerance: f64,
    pub direction: Monotonicity,
}

#[derive(Debug, Clone, Copy)]
pub struct BisectionOutcome {
    pub root: f64,
    /// Final bracket, `upper - lower <= tolerance`.
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

/// Finds the sign change of a monotone evaluator.
pub fn bisect<F: FnMut(f64) -> f64>(spec: BisectionSpec, mut f: F) -> Result<BisectionOutcome> {
    let BisectionSpec { mut lower, mut upper, tolerance, direction } = spec;
    if !(lower < upper) || !(tolerance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bisection needs lower < upper and tolerance > 0 (got [{lower}, {upper}], tol {tolerance})"
        )));
    }
    // Normalize to a non-increasing evaluator: positive on the left.
    let sign = match direction {
        Monotonicity::NonIncreasing => 1.0,
        Monotonicity::NonDecreasing => -1.0,
    };
    let f_lo = sign * f(lower);
    let f_hi = sign * f(upper);
    if f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NonFinite("bisection evaluator"));
    }
    if f_lo < 0.0 || f_hi > 0.0 {
        return Err(Error::Bracket { lower_value: sign * f_lo, upper_value: sign * f_hi });
    }
    let mut iterations = 0;
    while upper - lower > tolerance {
        let mid = 0.5 * (lower + upper);
        if mid <= lower || mid >= upper {
            break;
        }
        iterations += 1;
        if sign * f(mid) >= 0.0 {
            lower = mid;
        } else {
            upper = mid;
        }
    }
    Ok(BisectionOutcome { root: 0.5 * (lower + upper), lower, upper, iterations })
}

/// Row-vector times column-vector without conjugation: `Σ h_i w_i`.
pub fn row_mul(h: &CVector, w: &CVector) -> C64 {
    h.dot(w)
}

/// `sᴴ H` for an `n × m` matrix, returned as an m-vector.
pub fn phase_times(s: &CVector, h: &CMatrix) -> CVector {
    h.tr_mul(&s.conjugate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, k: usize) -> CMatrix {
        CMatrix::from_fn(r, k, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn identity_eigenvalues() {
        let eig = hermitian_eig(&HermitianMatrix::identity(2)).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_eigenpairs() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0)]));
        let eig = hermitian_eig(&HermitianMatrix::new(a).unwrap()).unwrap();
        assert_eq!(eig.values, vec![2.0, 0.0]);
        assert!((eig.vectors[(0, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((eig.vectors[(1, 1)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_matrix(&mut rng, 6, 6);
        let a = HermitianMatrix::from_hermitian_part(&g + g.adjoint());
        let eig = hermitian_eig(&a).unwrap();
        let v = &eig.vectors;
        let lam = CMatrix::from_diagonal(&CVector::from_iterator(6, eig.values.iter().map(|&x| c(x, 0.0))));
        let rec = v * lam * v.adjoint();
        let err = (&rec - a.as_matrix()).norm();
        assert!(err <= 1e-9 * a.frobenius_norm(), "reconstruction error {err}");
        let gram = v.adjoint() * v;
        assert!((&gram - CMatrix::identity(6, 6)).norm() < 1e-10);
        for w in eig.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let trace_err = (eig.values.iter().sum::<f64>() - a.trace()).abs();
        assert!(trace_err <= 1e-9 * a.frobenius_norm());
        for k in 0..6 {
            let res = a.as_matrix() * v.column(k) - v.column(k) * c(eig.values[k], 0.0);
            assert!(res.norm() <= 1e-9 * a.frobenius_norm());
        }
    }

    #[test]
    fn rejects_non_hermitian_and_non_finite() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(HermitianMatrix::new(a).is_err());
        let b = CMatrix::from_element(2, 2, c(f64::NAN, 0.0));
        assert!(matches!(HermitianMatrix::new(b), Err(Error::NonFinite(_))));
    }

    #[test]
    fn null_space_of_zero_and_identity() {
        let z = null_space_basis(&HermitianMatrix::zeros(3), None).unwrap();
        assert_eq!(z.ncols(), 3);
        assert!((z.adjoint() * &z - CMatrix::identity(3, 3)).norm() < 1e-10);
        let i = null_space_basis(&HermitianMatrix::identity(3), None).unwrap();
        assert_eq!(i.ncols(), 0);
    }

    #[test]
    fn null_space_of_rank_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_matrix(&mut rng, 4, 1);
        let y = random_matrix(&mut rng, 4, 1);
        let a = HermitianMatrix::from_hermitian_part(&x * x.adjoint() + &y * y.adjoint());
        let u = null_space_basis(&a, None).unwrap();
        assert_eq!(u.ncols(), 2);
        assert!((u.adjoint() * &u - CMatrix::identity(2, 2)).norm() < 1e-10);
        assert!((u.adjoint() * &x).norm() <= 1e-9 * x.norm());
        assert!((u.adjoint() * &y).norm() <= 1e-9 * y.norm());
        // Any vector in the range of A is annihilated by Uᴴ.
        let w = a.as_matrix() * random_matrix(&mut rng, 4, 1);
        assert!((u.adjoint() * &w).norm() <= 1e-8 * w.norm());
    }

    #[test]
    fn phase_of_axis_vectors() {
        let s = entrywise_phase(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)])).unwrap();
        assert!((s.as_vector()[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((s.as_vector()[1] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn phase_degenerate_entry() {
        let v = CVector::from_vec(vec![c(1.0, 1.0), c(0.0, 0.0)]);
        assert!(matches!(entrywise_phase(&v), Err(Error::DegenerateEntry(1))));
        let (s, flagged) = entrywise_phase_or_unit(&v);
        assert!(flagged);
        assert_eq!(s.as_vector()[1], c(1.0, 0.0));
    }

    #[test]
    fn bisect_increasing_and_decreasing() {
        let out = bisect(
            BisectionSpec { lower: 0.0, upper: 4.0, tolerance: 1e-3, direction: Monotonicity::NonDecreasing },
            |x| x - 2.0,
        )
        .unwrap();
        assert!((out.root - 2.0).abs() <= 1e-3);
        assert!(out.upper - out.lower <= 1e-3);
        let bound = ((4.0f64 / 1e-3).log2()).ceil() as usize + 1;
        assert!(out.iterations <= bound);

        let out = bisect(
            BisectionSpec { lower: -1.0, upper: 1.0, tolerance: 1e-6, direction: Monotonicity::NonIncreasing },
            |x| -x,
        )
        .unwrap();
        assert!(out.root.abs() <= 1e-6);
    }

    #[test]
    fn bisect_bracket_error() {
        let err = bisect(
            BisectionSpec { lower: 0.0, upper: 1.0, tolerance: 1e-3, direction: Monotonicity::NonDecreasing },
            |x| x + 1.0,
        );
        assert!(matches!(err, Err(Error::Bracket { .. })));
    }

    proptest::proptest! {
        #[test]
        fn phase_is_scale_invariant_and_unit(
            parts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..8),
            scale in 1e-6f64..1e6,
        ) {
            let v = CVector::from_iterator(parts.len(), parts.iter().map(|&(a, b)| c(a + 1e-3, b)));
            let s1 = entrywise_phase(&v).unwrap();
            let s2 = entrywise_phase(&v.scale(scale)).unwrap();
            for (a, b) in s1.as_vector().iter().zip(s2.as_vector().iter()) {
                proptest::prop_assert!((a - b).norm() < 1e-12);
                proptest::prop_assert!((a.norm() - 1.0).abs() < 1e-14);
            }
        }

        #[test]
        fn bisection_iteration_bound(width in 1e-3f64..1e3, tol_exp in 1i32..9) {
            let tol = 10f64.powi(-tol_exp);
            let root = width * 0.37;
            let out = bisect(
                BisectionSpec { lower: 0.0, upper: width, tolerance: tol, direction: Monotonicity::NonDecreasing },
                |x| x - root,
            ).unwrap();
            let bound = ((width / tol).log2()).ceil().max(0.0) as usize + 1;
            proptest::prop_assert!(out.iterations <= bound);
            proptest::prop_assert!((out.root - root).abs() <= tol);
        }
    }
}
