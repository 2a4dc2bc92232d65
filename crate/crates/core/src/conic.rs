//! Small dense primal-dual interior-point solver for linear matrix
//! inequalities.
//!
//! Problems are stated over a real decision vector `y`:
//!
//! ```text
//! maximize   bᵀy
//! subject to F0_k + Σ_i y_i F_ik ⪰ 0   for every block k
//!            E y = f
//! ```
//!
//! Nonnegative constraints live in a diagonal block, second-order cones are
//! written as arrow matrices and complex Hermitian LMIs through their real
//! embedding. Equalities are eliminated up front with an SVD null space.
//! Search direction is HKM with a Mehrotra predictor-corrector.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Affine function of the decision vector: `constant + coeffsᵀ y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinExpr {
    pub constant: f64,
    pub coeffs: Vec<f64>,
}

impl LinExpr {
    pub fn constant(nvars: usize, c: f64) -> Self {
        LinExpr { constant: c, coeffs: vec![0.0; nvars] }
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = LinExpr::constant(nvars, 0.0);
        e.coeffs[i] = 1.0;
        e
    }

    pub fn plus(mut self, other: &LinExpr) -> Self {
        self.constant += other.constant;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        self
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.constant *= k;
        self.coeffs.iter_mut().for_each(|c| *c *= k);
        self
    }

    pub fn add_term(mut self, i: usize, k: f64) -> Self {
        self.coeffs[i] += k;
        self
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
enum Block {
    /// `C − Σ y_i A_i ⪰ 0` with sparse variable support.
    Dense { c: DMatrix<f64>, a: Vec<(usize, DMatrix<f64>)> },
    /// `c − A y ≥ 0` entrywise.
    Diag { c: DVector<f64>, a: DMatrix<f64> },
}

impl Block {
    fn dim(&self) -> usize {
        match self {
            Block::Dense { c, .. } => c.nrows(),
            Block::Diag { c, .. } => c.len(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol_gap: 1e-10, tol_feas: 1e-10, max_iter: 120 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Stopped at the iteration cap or on a stalled step; `y` is the last
    /// iterate and the gap fields tell how far off it is.
    Inaccurate,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub y: Vec<f64>,
    pub objective: f64,
    /// Relative duality gap at return.
    pub gap: f64,
    /// Relative primal and dual residuals at return.
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// `F0 + Σ x_i F_i ⪰ 0`, with the sparse terms as `(i, F_i)`.
type Lmi = (DMatrix<f64>, Vec<(usize, DMatrix<f64>)>);

/// Builder for an LMI program.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    nvars: usize,
    objective: Vec<f64>,
    lmis: Vec<Lmi>,
    nonneg: Vec<LinExpr>,
    equalities: Vec<LinExpr>,
}

impl ConicProgram {
    pub fn new(nvars: usize) -> Self {
        ConicProgram {
            nvars,
            objective: vec![0.0; nvars],
            lmis: Vec::new(),
            nonneg: Vec::new(),
            equalities: Vec::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn maximize(&mut self, objective: Vec<f64>) {
        assert_eq!(objective.len(), self.nvars);
        self.objective = objective;
    }

    /// `expr ≥ 0`.
    pub fn add_nonneg(&mut self, expr: LinExpr) {
        self.nonneg.push(expr);
    }

    /// `expr = 0`.
    pub fn add_equality(&mut self, expr: LinExpr) {
        self.equalities.push(expr);
    }

    /// `F0 + Σ y_i F_i ⪰ 0` for symmetric `F`.
    pub fn add_lmi(&mut self, f0: DMatrix<f64>, terms: Vec<(usize, DMatrix<f64>)>) {
        self.lmis.push((f0, terms));
    }

    /// Symmetric matrix of affine entries; only the lower triangle is read.
    pub fn add_lmi_entries(&mut self, entries: &[Vec<LinExpr>]) {
        let d = entries.len();
        let mut f0 = DMatrix::zeros(d, d);
        let mut fs: Vec<Option<DMatrix<f64>>> = vec![None; self.nvars];
        for i in 0..d {
            for j in 0..=i {
                let e = &entries[i][j];
                f0[(i, j)] = e.constant;
                f0[(j, i)] = e.constant;
                for (v, &k) in e.coeffs.iter().enumerate() {
                    if k != 0.0 {
                        let m = fs[v].get_or_insert_with(|| DMatrix::zeros(d, d));
                        m[(i, j)] = k;
                        m[(j, i)] = k;
                    }
                }
            }
        }
        let terms = fs.into_iter().enumerate().filter_map(|(v, m)| m.map(|m| (v, m))).collect();
        self.add_lmi(f0, terms);
    }

    /// `‖x‖₂ ≤ t` as the arrow matrix `[[t, xᵀ], [x, t·I]] ⪰ 0`.
    pub fn add_soc(&mut self, t: LinExpr, xs: &[LinExpr]) {
        let k = xs.len();
        let zero = LinExpr::constant(self.nvars, 0.0);
        let mut rows = vec![vec![zero.clone(); k + 1]; k + 1];
        rows[0][0] = t.clone();
        for i in 0..k {
            rows[i + 1][0] = xs[i].clone();
            rows[i + 1][i + 1] = t.clone();
        }
        self.add_lmi_entries(&rows);
    }

    /// `‖x‖₂² ≤ t` as `[[t, xᵀ], [x, I]] ⪰ 0`.
    pub fn add_squared_norm_le(&mut self, t: LinExpr, xs: &[LinExpr]) {
        let k = xs.len();
        let zero = LinExpr::constant(self.nvars, 0.0);
        let mut rows = vec![vec![zero.clone(); k + 1]; k + 1];
        rows[0][0] = t;
        for i in 0..k {
            rows[i + 1][0] = xs[i].clone();
            rows[i + 1][i + 1] = LinExpr::constant(self.nvars, 1.0);
        }
        self.add_lmi_entries(&rows);
    }

    /// Complex Hermitian LMI `G0 + Σ y_i G_i ⪰ 0` via the real embedding.
    pub fn add_hermitian_lmi(&mut self, g0: &CMatrix, terms: &[(usize, CMatrix)]) {
        let terms = terms.iter().map(|(i, g)| (*i, real_embedding(g))).collect();
        self.add_lmi(real_embedding(g0), terms);
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<ConicSolution> {
        let p = self.nvars;
        // Affine reparameterization y = y0 + N z removing equalities.
        let (y0, basis) = if self.equalities.is_empty() {
            (DVector::zeros(p), DMatrix::identity(p, p))
        } else {
            eliminate_equalities(p, &self.equalities)?
        };
        let q = basis.ncols();
        let b = DVector::from_column_slice(&self.objective);
        let obj_offset = b.dot(&y0);
        if q == 0 {
            let y: Vec<f64> = y0.iter().copied().collect();
            return Ok(ConicSolution {
                objective: obj_offset,
                y,
                gap: 0.0,
                primal_residual: 0.0,
                dual_residual: 0.0,
                iterations: 0,
                status: SolveStatus::Optimal,
            });
        }
        let b_red = basis.transpose() * &b;

        let mut blocks = Vec::new();
        for (f0, terms) in &self.lmis {
            let mut c = f0.clone();
            for (i, fi) in terms {
                c += fi * y0[*i];
            }
            let mut a = Vec::new();
            for j in 0..q {
                let mut m = DMatrix::zeros(f0.nrows(), f0.ncols());
                let mut any = false;
                for (i, fi) in terms {
                    let k = basis[(*i, j)];
                    if k != 0.0 {
                        m -= fi * k;
                        any = true;
                    }
                }
                if any && m.iter().any(|v| *v != 0.0) {
                    a.push((j, m));
                }
            }
            blocks.push(Block::Dense { c, a });
        }
        if !self.nonneg.is_empty() {
            let k = self.nonneg.len();
            let mut c = DVector::zeros(k);
            let mut a = DMatrix::zeros(k, q);
            for (r, e) in self.nonneg.iter().enumerate() {
                let g = DVector::from_column_slice(&e.coeffs);
                c[r] = e.constant + g.dot(&y0);
                let row = basis.transpose() * g;
                for j in 0..q {
                    a[(r, j)] = -row[j];
                }
            }
            blocks.push(Block::Diag { c, a });
        }

        let sol = solve_blocks(blocks, b_red, opts)?;
        let z = DVector::from_column_slice(&sol.y);
        let y = &y0 + &basis * z;
        Ok(ConicSolution {
            objective: sol.objective + obj_offset,
            y: y.iter().copied().collect(),
            ..sol
        })
    }
}

/// `[[Re G, −Im G], [Im G, Re G]]`; PSD iff `G` is Hermitian PSD.
pub fn real_embedding(g: &CMatrix) -> DMatrix<f64> {
    let (r, c) = g.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = g[(i, j)];
            out[(i, j)] = z.re;
            out[(i + r, j + c)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
        }
    }
    out
}

fn eliminate_equalities(p: usize, eqs: &[LinExpr]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let k = eqs.len();
    let mut e = DMatrix::zeros(k.max(p), p);
    let mut f = DVector::zeros(k.max(p));
    for (r, eq) in eqs.iter().enumerate() {
        for j in 0..p {
            e[(r, j)] = eq.coeffs[j];
        }
        f[r] = -eq.constant;
    }
    // Padding rows with zeros keeps the SVD full-width so V spans R^p.
    let svd = SVD::new(e, true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = 1e-12 * smax.max(1.0) * p as f64;
    let mut y0 = DVector::zeros(p);
    let mut null_cols = Vec::new();
    for i in 0..svd.singular_values.len() {
        let sv = svd.singular_values[i];
        let v = vt.row(i).transpose();
        if sv > tol {
            y0 += &v * (u.column(i).dot(&f) / sv);
        } else {
            null_cols.push(v);
        }
    }
    let resid = eqs
        .iter()
        .map(|eq| eq.eval(y0.as_slice()).abs())
        .fold(0.0, f64::max);
    let scale = f.amax().max(1.0);
    if resid > 1e-8 * scale {
        return Err(Error::Infeasible(format!("inconsistent equality constraints (residual {resid:e})")));
    }
    let basis = if null_cols.is_empty() {
        DMatrix::zeros(p, 0)
    } else {
        DMatrix::from_columns(&null_cols)
    };
    Ok((y0, basis))
}

#[derive(Clone)]
enum Mat {
    Dense(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl Mat {
    fn inner(&self, other: &Mat) -> f64 {
        match (self, other) {
            (Mat::Dense(a), Mat::Dense(b)) => a.dot(b),
            (Mat::Diag(a), Mat::Diag(b)) => a.dot(b),
            _ => unreachable!("block kinds always match"),
        }
    }

    fn axpy(&mut self, alpha: f64, other: &Mat) {
        match (self, other) {
            (Mat::Dense(a), Mat::Dense(b)) => *a += b * alpha,
            (Mat::Diag(a), Mat::Diag(b)) => *a += b * alpha,
            _ => unreachable!("block kinds always match"),
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            Mat::Dense(a) => a.norm_squared(),
            Mat::Diag(a) => a.norm_squared(),
        }
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `C − Σ y_i A_i` for one block.
fn slack(block: &Block, y: &DVector<f64>) -> Mat {
    match block {
        Block::Dense { c, a } => {
            let mut z = c.clone();
            for (i, ai) in a {
                z -= ai * y[*i];
            }
            Mat::Dense(z)
        }
        Block::Diag { c, a } => Mat::Diag(c - a * y),
    }
}

/// `Σ_i y_i A_i` for one block.
fn adjoint(block: &Block, y: &DVector<f64>) -> Mat {
    match block {
        Block::Dense { c, a } => {
            let mut z = DMatrix::zeros(c.nrows(), c.ncols());
            for (i, ai) in a {
                z += ai * y[*i];
            }
            Mat::Dense(z)
        }
        Block::Diag { a, .. } => Mat::Diag(a * y),
    }
}

/// Accumulates `tr(A_i X)` over blocks into `out`.
fn forward(block: &Block, x: &Mat, out: &mut DVector<f64>) {
    match (block, x) {
        (Block::Dense { a, .. }, Mat::Dense(x)) => {
            for (i, ai) in a {
                out[*i] += ai.dot(x);
            }
        }
        (Block::Diag { a, .. }, Mat::Diag(x)) => {
            *out += a.transpose() * x;
        }
        _ => unreachable!("block kinds always match"),
    }
}

/// Largest step `α ≤ 1/0` such that `X + α dX ⪰ 0`; infinity if unbounded.
fn max_step(x: &Mat, dx: &Mat) -> f64 {
    match (x, dx) {
        (Mat::Dense(x), Mat::Dense(dx)) => {
            let Some(ch) = Cholesky::new(x.clone()) else {
                return 0.0;
            };
            let l = ch.l();
            let linv = l.clone().try_inverse().unwrap_or_else(|| DMatrix::zeros(l.nrows(), l.ncols()));
            let m = sym(&(&linv * dx * linv.transpose()));
            let lmin = SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            if lmin < 0.0 {
                -1.0 / lmin
            } else {
                f64::INFINITY
            }
        }
        (Mat::Diag(x), Mat::Diag(dx)) => x
            .iter()
            .zip(dx.iter())
            .filter(|(_, d)| **d < 0.0)
            .map(|(v, d)| -v / d)
            .fold(f64::INFINITY, f64::min),
        _ => unreachable!("block kinds always match"),
    }
}

fn equilibrate(blocks: &mut [Block], b: &mut DVector<f64>) -> DVector<f64> {
    for block in blocks.iter_mut() {
        match block {
            Block::Dense { c, a } => {
                let s = a.iter().map(|(_, m)| m.amax()).fold(c.amax(), f64::max);
                if s > 0.0 {
                    *c /= s;
                    a.iter_mut().for_each(|(_, m)| *m /= s);
                }
            }
            Block::Diag { c, a } => {
                for r in 0..c.len() {
                    let s = a.row(r).amax().max(c[r].abs());
                    if s > 0.0 {
                        c[r] /= s;
                        a.row_mut(r).scale_mut(1.0 / s);
                    }
                }
            }
        }
    }
    let q = b.len();
    let mut col_scale = DVector::from_element(q, 0.0f64);
    for block in blocks.iter() {
        match block {
            Block::Dense { a, .. } => {
                for (i, m) in a {
                    col_scale[*i] = col_scale[*i].max(m.amax());
                }
            }
            Block::Diag { a, .. } => {
                for j in 0..q {
                    col_scale[j] = col_scale[j].max(a.column(j).amax());
                }
            }
        }
    }
    let d = col_scale.map(|s| if s > 0.0 { 1.0 / s } else { 1.0 });
    for block in blocks.iter_mut() {
        match block {
            Block::Dense { a, .. } => a.iter_mut().for_each(|(i, m)| *m *= d[*i]),
            Block::Diag { a, .. } => {
                for j in 0..q {
                    a.column_mut(j).scale_mut(d[j]);
                }
            }
        }
    }
    for j in 0..q {
        b[j] *= d[j];
    }
    d
}

fn solve_blocks(mut blocks: Vec<Block>, b_in: DVector<f64>, opts: &SolverOptions) -> Result<ConicSolution> {
    let q = b_in.len();
    let mut b = b_in.clone();
    let var_scale = equilibrate(&mut blocks, &mut b);
    let b_scale = b.amax().max(1e-300);
    let b = if b.amax() > 0.0 { &b / b_scale } else { b };

    let nu: usize = blocks.iter().map(Block::dim).sum();
    let c_norm = blocks
        .iter()
        .map(|bl| match bl {
            Block::Dense { c, .. } => c.norm_squared(),
            Block::Diag { c, .. } => c.norm_squared(),
        })
        .sum::<f64>()
        .sqrt();
    let b_norm = b.norm();

    let init = |bl: &Block, v: f64| match bl {
        Block::Dense { c, .. } => Mat::Dense(DMatrix::identity(c.nrows(), c.nrows()) * v),
        Block::Diag { c, .. } => Mat::Diag(DVector::from_element(c.len(), v)),
    };
    let x0 = (1.0 + b_norm).max(1.0);
    let z0 = (1.0 + c_norm).max(1.0);
    let mut xs: Vec<Mat> = blocks.iter().map(|bl| init(bl, x0)).collect();
    let mut zs: Vec<Mat> = blocks.iter().map(|bl| init(bl, z0)).collect();
    let mut y = DVector::zeros(q);

    let mut status = SolveStatus::Inaccurate;
    let mut iterations = 0;
    let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for it in 0..opts.max_iter {
        iterations = it;
        // Residuals.
        let mut ax = DVector::zeros(q);
        for (bl, x) in blocks.iter().zip(&xs) {
            forward(bl, x, &mut ax);
        }
        let rp = &b - &ax;
        let rd: Vec<Mat> = blocks
            .iter()
            .zip(&zs)
            .map(|(bl, z)| {
                let mut r = slack(bl, &y);
                r.axpy(-1.0, z);
                r
            })
            .collect();
        let pobj: f64 = blocks
            .iter()
            .zip(&xs)
            .map(|(bl, x)| match (bl, x) {
                (Block::Dense { c, .. }, Mat::Dense(x)) => c.dot(x),
                (Block::Diag { c, .. }, Mat::Diag(x)) => c.dot(x),
                _ => unreachable!(),
            })
            .sum();
        let dobj = b.dot(&y);
        let xz: f64 = xs.iter().zip(&zs).map(|(x, z)| x.inner(z)).sum();
        let mu = xz / nu as f64;
        let rel_gap = xz.abs().max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        let rel_p = rp.norm() / (1.0 + b_norm);
        let rel_d = rd.iter().map(Mat::norm_sq).sum::<f64>().sqrt() / (1.0 + c_norm);
        last = (rel_gap, rel_p, rel_d);
        if !rel_gap.is_finite() || !rel_p.is_finite() || !rel_d.is_finite() {
            return Err(Error::Solver(format!("non-finite iterate at iteration {it}")));
        }
        if rel_gap <= opts.tol_gap && rel_p <= opts.tol_feas && rel_d <= opts.tol_feas {
            status = SolveStatus::Optimal;
            break;
        }

        // Per-block Z⁻¹ and Schur complement.
        // Losing definiteness near the optimum ends the run with the last
        // iterate, reported as inaccurate.
        let mut zinv = Vec::with_capacity(blocks.len());
        for z in &zs {
            zinv.push(match z {
                Mat::Dense(z) => match Cholesky::new(sym(z)) {
                    Some(ch) => Mat::Dense(ch.inverse()),
                    None => break,
                },
                Mat::Diag(z) => Mat::Diag(z.map(|v| 1.0 / v)),
            });
        }
        if zinv.len() < zs.len() {
            break;
        }
        let mut schur = DMatrix::<f64>::zeros(q, q);
        for ((bl, x), zi) in blocks.iter().zip(&xs).zip(&zinv) {
            match (bl, x, zi) {
                (Block::Dense { a, .. }, Mat::Dense(x), Mat::Dense(zi)) => {
                    for (j, aj) in a {
                        let pj = x * aj * zi;
                        for (i, ai) in a {
                            schur[(*i, *j)] += ai.dot(&pj.transpose());
                        }
                    }
                }
                (Block::Diag { a, .. }, Mat::Diag(x), Mat::Diag(zi)) => {
                    let w = x.component_mul(zi);
                    let mut aw = a.clone();
                    for r in 0..aw.nrows() {
                        aw.row_mut(r).scale_mut(w[r]);
                    }
                    schur += a.transpose() * aw;
                }
                _ => unreachable!(),
            }
        }
        let schur = sym(&schur);
        let reg = 1e-14 * schur.diagonal().amax().max(1e-300);
        let schur_ch = match Cholesky::new(schur.clone()) {
            Some(ch) => ch,
            None => match Cholesky::new(&schur + DMatrix::identity(q, q) * reg) {
                Some(ch) => ch,
                None if it > 0 => break,
                None => return Err(Error::Solver("singular Schur complement at the starting point".into())),
            },
        };

        // Direction for a given centering target and corrector term.
        let direction = |sigma_mu: f64, corr: Option<&(Vec<Mat>, Vec<Mat>)>| -> (DVector<f64>, Vec<Mat>, Vec<Mat>) {
            let mut hs = Vec::with_capacity(blocks.len());
            for k in 0..blocks.len() {
                let h = match (&xs[k], &zinv[k], &rd[k]) {
                    (Mat::Dense(x), Mat::Dense(zi), Mat::Dense(r)) => {
                        let mut h = zi * sigma_mu - x - x * r * zi;
                        if let Some((dxa, dza)) = corr {
                            if let (Mat::Dense(dx), Mat::Dense(dz)) = (&dxa[k], &dza[k]) {
                                h -= dx * dz * zi;
                            }
                        }
                        Mat::Dense(h)
                    }
                    (Mat::Diag(x), Mat::Diag(zi), Mat::Diag(r)) => {
                        let mut h = zi * sigma_mu - x - x.component_mul(r).component_mul(zi);
                        if let Some((dxa, dza)) = corr {
                            if let (Mat::Diag(dx), Mat::Diag(dz)) = (&dxa[k], &dza[k]) {
                                h -= dx.component_mul(dz).component_mul(zi);
                            }
                        }
                        Mat::Diag(h)
                    }
                    _ => unreachable!(),
                };
                hs.push(h);
            }
            let mut ah = DVector::zeros(q);
            for (bl, h) in blocks.iter().zip(&hs) {
                forward(bl, h, &mut ah);
            }
            let dy = schur_ch.solve(&(&rp - ah));
            let mut dxs = Vec::with_capacity(blocks.len());
            let mut dzs = Vec::with_capacity(blocks.len());
            for k in 0..blocks.len() {
                let mut dz = rd[k].clone();
                dz.axpy(-1.0, &adjoint(&blocks[k], &dy));
                let dx = match (&xs[k], &zinv[k], &dz) {
                    (Mat::Dense(x), Mat::Dense(zi), Mat::Dense(dzm)) => {
                        let Mat::Dense(h) = &hs[k] else { unreachable!() };
                        // h already contains −X·Rd·Z⁻¹; add back X·(Rd − dZ)·Z⁻¹ = X·Aᵀdy·Z⁻¹.
                        let Mat::Dense(r) = &rd[k] else { unreachable!() };
                        Mat::Dense(sym(&(h + x * (r - dzm) * zi)))
                    }
                    (Mat::Diag(x), Mat::Diag(zi), Mat::Diag(dzv)) => {
                        let Mat::Diag(h) = &hs[k] else { unreachable!() };
                        let Mat::Diag(r) = &rd[k] else { unreachable!() };
                        Mat::Diag(h + x.component_mul(&(r - dzv)).component_mul(zi))
                    }
                    _ => unreachable!(),
                };
                dxs.push(dx);
                dzs.push(dz);
            }
            (dy, dxs, dzs)
        };

        let step_len = |dxs: &[Mat], dzs: &[Mat]| -> (f64, f64) {
            let ap = xs.iter().zip(dxs).map(|(x, d)| max_step(x, d)).fold(f64::INFINITY, f64::min);
            let ad = zs.iter().zip(dzs).map(|(z, d)| max_step(z, d)).fold(f64::INFINITY, f64::min);
            (ap, ad)
        };

        // Predictor.
        let (_, dxa, dza) = direction(0.0, None);
        let (ap, ad) = step_len(&dxa, &dza);
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let mut mu_aff = 0.0;
        for k in 0..blocks.len() {
            let mut x = xs[k].clone();
            x.axpy(ap, &dxa[k]);
            let mut z = zs[k].clone();
            z.axpy(ad, &dza[k]);
            mu_aff += x.inner(&z);
        }
        mu_aff /= nu as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let corr = (dxa, dza);
        let (dy, dxs, dzs) = direction(sigma * mu, Some(&corr));
        let (ap, ad) = step_len(&dxs, &dzs);
        let frac = if rel_gap < 1e-6 { 0.99 } else { 0.95 };
        let ap = (frac * ap).min(1.0);
        let ad = (frac * ad).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }
        for k in 0..blocks.len() {
            xs[k].axpy(ap, &dxs[k]);
            zs[k].axpy(ad, &dzs[k]);
        }
        y += dy * ad;
        iterations = it + 1;
    }

    // Objective scaling leaves the optimizer unchanged; only column scaling
    // needs undoing.
    let y_orig = y.component_mul(&var_scale);
    let objective = b_in.dot(&y_orig);
    Ok(ConicSolution {
        y: y_orig.iter().copied().collect(),
        objective,
        gap: last.0,
        primal_residual: last.1,
        dual_residual: last.2,
        iterations,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn lp_box() {
        // max y0 + 2 y1 s.t. 0 ≤ y ≤ 1, y0 + y1 ≤ 1.5
        let mut p = ConicProgram::new(2);
        p.maximize(vec![1.0, 2.0]);
        for i in 0..2 {
            p.add_nonneg(LinExpr::var(2, i));
            p.add_nonneg(LinExpr::constant(2, 1.0).add_term(i, -1.0));
        }
        p.add_nonneg(LinExpr::constant(2, 1.5).add_term(0, -1.0).add_term(1, -1.0));
        let s = p.solve(&opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.y[0] - 0.5).abs() < 1e-7 && (s.y[1] - 1.0).abs() < 1e-7, "{:?}", s.y);
        assert!((s.objective - 2.5).abs() < 1e-7);
    }

    #[test]
    fn soc_projection() {
        // max a·y s.t. ‖y‖ ≤ 2 → y = 2a/‖a‖
        let a = [3.0, -4.0];
        let mut p = ConicProgram::new(2);
        p.maximize(a.to_vec());
        p.add_soc(LinExpr::constant(2, 2.0), &[LinExpr::var(2, 0), LinExpr::var(2, 1)]);
        let s = p.solve(&opts()).unwrap();
        assert!((s.y[0] - 1.2).abs() < 1e-7 && (s.y[1] + 1.6).abs() < 1e-7, "{:?}", s.y);
    }

    #[test]
    fn squared_norm_constraint() {
        // max y0 s.t. y0² ≤ 9 − y1, y1 ≥ 0 → y0 = 3
        let mut p = ConicProgram::new(2);
        p.maximize(vec![1.0, 0.0]);
        p.add_squared_norm_le(LinExpr::constant(2, 9.0).add_term(1, -1.0), &[LinExpr::var(2, 0)]);
        p.add_nonneg(LinExpr::var(2, 1));
        let s = p.solve(&opts()).unwrap();
        assert!((s.y[0] - 3.0).abs() < 1e-6, "{:?}", s.y);
    }

    #[test]
    fn max_eigenvalue_by_lmi() {
        // max −t s.t. tI − A ⪰ 0 → t = λ_max(A)
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let mut p = ConicProgram::new(1);
        p.maximize(vec![-1.0]);
        p.add_lmi(-a.clone(), vec![(0, DMatrix::identity(3, 3))]);
        let s = p.solve(&opts()).unwrap();
        let lmax = SymmetricEigen::new(a).eigenvalues.max();
        assert!((s.y[0] - lmax).abs() < 1e-7);
    }

    #[test]
    fn hermitian_lmi_and_equality() {
        // max t s.t. [[1, z],[z*, 1]] ⪰ 0 with z = t·(1+j)/√2 → |t| ≤ 1; plus t = 0.5 equality on a second var.
        let mut p = ConicProgram::new(2);
        p.maximize(vec![1.0, 1.0]);
        let g0 = CMatrix::identity(2, 2);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut g1 = CMatrix::zeros(2, 2);
        g1[(0, 1)] = C64::new(r, r);
        g1[(1, 0)] = C64::new(r, -r);
        p.add_hermitian_lmi(&g0, &[(0, g1)]);
        p.add_equality(LinExpr::var(2, 1).plus(&LinExpr::constant(2, -0.5)));
        let s = p.solve(&opts()).unwrap();
        assert!((s.y[0] - 1.0).abs() < 1e-6, "{:?}", s.y);
        assert!((s.y[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn badly_scaled_lp() {
        let mut p = ConicProgram::new(1);
        p.maximize(vec![1e6]);
        p.add_nonneg(LinExpr::constant(1, 1e2).add_term(0, -1e3));
        p.add_nonneg(LinExpr::var(1, 0).scaled(1e-5));
        let s = p.solve(&opts()).unwrap();
        assert!((s.y[0] - 0.1).abs() < 1e-10, "{:?}", s.y);
    }
}
