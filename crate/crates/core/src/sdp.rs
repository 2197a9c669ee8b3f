//! Small dense semidefinite feasibility.
//!
//! The problem is: find `X >= 0` (in `S^N`) such that `K + L(X) >= 0` (in
//! `S^R`), where `L` is a sum of symmetrized congruence terms. The solver runs
//! alternating projections between the affine graph `{(X, K + L(X))}` and the
//! product cone `S^N_+ x S^R_+`, with Dykstra corrections on the cone step.
//!
//! Feasibility is declared from an exactly evaluated candidate: the PSD part
//! of the current affine iterate is pushed through the map and both minimum
//! eigenvalues are re-checked. Infeasibility is declared when an upper bound
//! on the best achievable margin
//! `t* = max { t : X >= tI, K + L(X) >= tI, tr X <= cap }` falls below
//! `-10 * tol`. Such bounds come from the projection gap or, when the
//! projections stall, from a log-barrier path that maximizes the margin
//! directly (the barrier gap bounds `t* - t`).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{dims, Error, Result};
use crate::linalg::{
    asymmetry, hstack, max_abs, null_space, project_psd, project_psd_shifted, sym_eigen,
    RankTol,
};

/// One symmetrized congruence term `w/2 (E X F^T + F X E^T)`, `E, F` of size `R x N`.
#[derive(Debug, Clone)]
pub struct CongruenceTerm {
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    pub weight: f64,
}

impl CongruenceTerm {
    /// `w E X E^T`.
    pub fn congruence(e: DMatrix<f64>, weight: f64) -> Self {
        CongruenceTerm {
            right: e.clone(),
            left: e,
            weight,
        }
    }
}

/// Affine map `X -> K + L(X)` from `S^N` to `S^R`.
#[derive(Debug, Clone)]
pub struct AffineSymMap {
    n_var: usize,
    constant: DMatrix<f64>,
    terms: Vec<CongruenceTerm>,
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(dims("symmetric matrix", "square", format!("{}x{}", m.nrows(), m.ncols())));
    }
    let asym = asymmetry(m);
    if asym > 1e-10 * (1.0 + max_abs(m)) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

impl AffineSymMap {
    pub fn new(n_var: usize, constant: DMatrix<f64>, terms: Vec<CongruenceTerm>) -> Result<Self> {
        check_symmetric(&constant)?;
        let r = constant.nrows();
        for t in &terms {
            for m in [&t.left, &t.right] {
                if m.shape() != (r, n_var) {
                    return Err(dims(
                        "congruence term",
                        format!("{r}x{n_var}"),
                        format!("{}x{}", m.nrows(), m.ncols()),
                    ));
                }
            }
        }
        let constant = (&constant + constant.transpose()) * 0.5;
        Ok(AffineSymMap {
            n_var,
            constant,
            terms,
        })
    }

    pub fn n_var(&self) -> usize {
        self.n_var
    }

    pub fn n_out(&self) -> usize {
        self.constant.nrows()
    }

    pub fn constant(&self) -> &DMatrix<f64> {
        &self.constant
    }

    pub fn terms(&self) -> &[CongruenceTerm] {
        &self.terms
    }

    /// Linear part `L(X)`.
    pub fn linear(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let r = self.n_out();
        let mut out = DMatrix::zeros(r, r);
        for t in &self.terms {
            let ex = &t.left * x;
            let prod = ex * t.right.transpose();
            out += (&prod + prod.transpose()) * (0.5 * t.weight);
        }
        out
    }

    /// `K + L(X)`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.constant + self.linear(x)
    }

    /// Adjoint `L*(Y)` with respect to the trace inner product.
    pub fn adjoint(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n_var;
        let mut out = DMatrix::zeros(n, n);
        for t in &self.terms {
            let prod = t.left.transpose() * y * &t.right;
            out += (&prod + prod.transpose()) * (0.5 * t.weight);
        }
        out
    }

    /// Restricts the variable to `X = W Z W^T`, `W` of size `N x N'`.
    pub fn substitute(&self, w: &DMatrix<f64>) -> Result<AffineSymMap> {
        if w.nrows() != self.n_var {
            return Err(dims("variable substitution", self.n_var, w.nrows()));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| CongruenceTerm {
                left: &t.left * w,
                right: &t.right * w,
                weight: t.weight,
            })
            .collect();
        Ok(AffineSymMap {
            n_var: w.ncols(),
            constant: self.constant.clone(),
            terms,
        })
    }

    /// Compresses the output to `Q^T (K + L(X)) Q`, `Q` of size `R x R'`.
    pub fn compress_output(&self, q: &DMatrix<f64>) -> Result<AffineSymMap> {
        if q.nrows() != self.n_out() {
            return Err(dims("output compression", self.n_out(), q.nrows()));
        }
        let qt = q.transpose();
        let constant = &qt * &self.constant * q;
        let terms = self
            .terms
            .iter()
            .map(|t| CongruenceTerm {
                left: &qt * &t.left,
                right: &qt * &t.right,
                weight: t.weight,
            })
            .collect();
        Ok(AffineSymMap {
            n_var: self.n_var,
            constant: (&constant + constant.transpose()) * 0.5,
            terms,
        })
    }

    /// Orthonormal basis of the complement of the common kernel of `K` and
    /// every `L(E_i)`; the output matrix vanishes on that kernel for all `X`.
    pub fn active_output_basis(&self) -> DMatrix<f64> {
        let r = self.n_out();
        let mut blocks = vec![self.constant.clone()];
        for k in 0..svec_len(self.n_var) {
            blocks.push(self.linear(&smat_unit(k, self.n_var)));
        }
        let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
        let stacked = hstack(&refs, r).transpose();
        let kernel = null_space(&stacked, RankTol::new(1e-12));
        if kernel.ncols() == 0 {
            return DMatrix::identity(r, r);
        }
        let complement = null_space(&kernel.transpose(), RankTol::new(1e-12));
        complement
    }
}

pub(crate) fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Isometric vectorization of a symmetric matrix (upper triangle, off-diagonals scaled by sqrt 2).
pub(crate) fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut v = DVector::zeros(svec_len(n));
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            v[k] = if i == j { m[(i, i)] } else { SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)]) };
            k += 1;
        }
    }
    v
}

pub(crate) fn smat(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] / SQRT2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

fn smat_unit(k: usize, n: usize) -> DMatrix<f64> {
    let mut v = DVector::zeros(svec_len(n));
    v[k] = 1.0;
    smat(&v, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionScheme {
    /// von Neumann alternating projections.
    Alternating,
    /// Dykstra corrections on the cone step.
    Dykstra,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative feasibility tolerance; the absolute tolerance is `feas_tol * (1 + |K|_2)`.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Iterations between exact feasibility/infeasibility checks.
    pub check_every: usize,
    pub scheme: ProjectionScheme,
    /// Drop the common kernel of the output before iterating.
    pub reduce_output: bool,
    /// Cones are shifted to `>= shift_factor * tol * I` during iteration.
    pub shift_factor: f64,
    /// Nuclear-norm cap on `X` (relative to `(1 + |K|) / |L|`) used by the margin bound.
    pub x_cap_factor: f64,
    /// Record the projection gap every this many iterations.
    pub history_every: usize,
    /// Projection iterations before the margin-maximization stage runs.
    pub projection_iter: usize,
    /// Run the barrier margin maximization when projections have not decided.
    pub margin_stage: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-7,
            max_iter: 20_000,
            check_every: 10,
            scheme: ProjectionScheme::Dykstra,
            reduce_output: true,
            shift_factor: 2.0,
            x_cap_factor: 1e4,
            history_every: 100,
            projection_iter: 50,
            margin_stage: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasStatus {
    Feasible,
    InfeasibleAtTolerance,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// `lambda_min(X)`.
    pub variable: f64,
    /// `lambda_min(K + L(X))`.
    pub lmi: f64,
}

#[derive(Debug, Clone)]
pub struct FeasResult {
    pub status: FeasStatus,
    pub x: Option<DMatrix<f64>>,
    /// Margins of the returned (or last) candidate on the original map.
    pub margins: Margins,
    /// Upper bound on the best achievable margin, when one was established.
    pub margin_bound: Option<f64>,
    /// Absolute tolerance used for the verdict.
    pub tolerance: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

impl FeasResult {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasStatus::Feasible
    }
}

/// Smallest eigenvalue of a symmetric matrix; `+inf` for the void matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    check_symmetric(m)?;
    let (vals, _) = sym_eigen(&crate::linalg::symmetrize(m));
    Ok(vals.iter().copied().fold(f64::INFINITY, f64::min))
}

fn min_eig_unchecked(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let (vals, _) = sym_eigen(m);
    vals[0]
}

fn max_abs_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let (vals, _) = sym_eigen(m);
    vals[0].abs().max(vals[vals.len() - 1].abs())
}

/// Eigenvalue sign counts `(negative, zero, positive)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inertia {
    pub neg: usize,
    pub zero: usize,
    pub pos: usize,
}

/// Inertia with `|lambda| <= tol * |M|_2` counted as zero.
pub fn inertia(m: &DMatrix<f64>, tol: f64) -> Result<Inertia> {
    check_symmetric(m)?;
    let (vals, _) = sym_eigen(&crate::linalg::symmetrize(m));
    let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let thr = tol * scale;
    let mut out = Inertia {
        neg: 0,
        zero: 0,
        pos: 0,
    };
    for &v in vals.iter() {
        if v.abs() <= thr {
            out.zero += 1;
        } else if v < 0.0 {
            out.neg += 1;
        } else {
            out.pos += 1;
        }
    }
    Ok(out)
}

/// Precomputed affine projection onto `{(X, Y) : Y = K + L(X)}` in svec coordinates.
struct AffineProjector {
    n: usize,
    r: usize,
    lmat: DMatrix<f64>,
    k: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl AffineProjector {
    fn new(map: &AffineSymMap) -> Self {
        let n = map.n_var();
        let r = map.n_out();
        let cols = svec_len(n);
        let mut lmat = DMatrix::zeros(svec_len(r), cols);
        for k in 0..cols {
            let col = svec(&map.linear(&smat_unit(k, n)));
            lmat.set_column(k, &col);
        }
        let normal = DMatrix::identity(cols, cols) + lmat.transpose() * &lmat;
        let chol = Cholesky::new(normal).expect("I + L^T L is positive definite");
        AffineProjector {
            n,
            r,
            lmat,
            k: svec(map.constant()),
            chol,
        }
    }

    fn project(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let xv = svec(x);
        let yv = svec(y);
        let rhs = xv + self.lmat.transpose() * (yv - &self.k);
        let sol = self.chol.solve(&rhs);
        let yv = &self.k + &self.lmat * &sol;
        (smat(&sol, self.n), smat(&yv, self.r))
    }

    fn op_norm(&self) -> f64 {
        crate::linalg::norm2(&self.lmat)
    }
}

fn feasible_result(
    original: &AffineSymMap,
    x: DMatrix<f64>,
    tol: f64,
    iterations: usize,
    history: Vec<f64>,
) -> FeasResult {
    let margins = Margins {
        variable: min_eig_unchecked(&x),
        lmi: min_eig_unchecked(&original.apply(&x)),
    };
    let status = if margins.variable >= -tol && margins.lmi >= -tol {
        FeasStatus::Feasible
    } else {
        FeasStatus::Inconclusive
    };
    FeasResult {
        status,
        x: Some(x),
        margins,
        margin_bound: None,
        tolerance: tol,
        iterations,
        residual_history: history,
    }
}

/// Searches for `X >= 0` with `K + L(X) >= 0`.
pub fn solve_psd_feasibility(map: &AffineSymMap, opts: &SolverOptions) -> Result<FeasResult> {
    if !(opts.feas_tol > 0.0) {
        return Err(Error::InvalidArgument("feas_tol must be positive".into()));
    }
    check_symmetric(map.constant())?;
    let n = map.n_var();
    let tol = opts.feas_tol * (1.0 + max_abs_eig(map.constant()));

    if n == 0 {
        let lam = min_eig_unchecked(map.constant());
        let status = if lam >= -tol {
            FeasStatus::Feasible
        } else if lam < -10.0 * tol {
            FeasStatus::InfeasibleAtTolerance
        } else {
            FeasStatus::Inconclusive
        };
        return Ok(FeasResult {
            status,
            x: (status == FeasStatus::Feasible).then(|| DMatrix::zeros(0, 0)),
            margins: Margins {
                variable: f64::INFINITY,
                lmi: lam,
            },
            margin_bound: (status != FeasStatus::Feasible).then_some(lam),
            tolerance: tol,
            iterations: 0,
            residual_history: Vec::new(),
        });
    }
    if map.n_out() == 0 {
        return Ok(feasible_result(map, DMatrix::zeros(n, n), tol, 0, Vec::new()));
    }

    let work = if opts.reduce_output {
        let q = map.active_output_basis();
        if q.ncols() == 0 {
            // The output is identically zero.
            return Ok(feasible_result(map, DMatrix::zeros(n, n), tol, 0, Vec::new()));
        }
        if q.ncols() < map.n_out() {
            map.compress_output(&q)?
        } else {
            map.clone()
        }
    } else {
        map.clone()
    };

    let proj = AffineProjector::new(&work);
    let r = work.n_out();
    let shift = opts.shift_factor * tol;
    let x_cap = opts.x_cap_factor * (1.0 + max_abs_eig(map.constant())) / proj.op_norm().max(1e-300);

    let mut xs = DMatrix::zeros(n, n);
    let mut ys = work.constant().clone();
    let mut qx = DMatrix::zeros(n, n);
    let mut qy = DMatrix::zeros(r, r);
    let mut history = Vec::new();
    let mut best_bound: Option<f64> = None;
    let mut last_candidate = DMatrix::zeros(n, n);
    let check_every = opts.check_every.max(1);

    let barrier_at = opts.projection_iter.clamp(1, opts.max_iter.max(1));
    for it in 1..=opts.max_iter {
        if opts.margin_stage && it == barrier_at {
            match maximize_margin(&work, tol, x_cap) {
                MarginOutcome::Feasible(x) => {
                    let res = feasible_result(map, x, tol, it, history.clone());
                    if res.is_feasible() {
                        return Ok(res);
                    }
                }
                MarginOutcome::Infeasible(bound) => {
                    let mut res = feasible_result(map, last_candidate, tol, it, history);
                    res.status = FeasStatus::InfeasibleAtTolerance;
                    res.x = None;
                    res.margin_bound = Some(bound);
                    return Ok(res);
                }
                MarginOutcome::Undecided(bound) => {
                    if let Some(b) = bound {
                        best_bound = Some(best_bound.map_or(b, |c: f64| c.min(b)));
                    }
                }
            }
        }
        let (xa, ya) = proj.project(&xs, &ys);

        if it == 1 || it % check_every == 0 {
            let cand = project_psd(&xa);
            let lam = min_eig_unchecked(&work.apply(&cand));
            if lam >= -tol {
                let res = feasible_result(map, cand.clone(), tol, it, history.clone());
                if res.is_feasible() {
                    return Ok(res);
                }
            }
            last_candidate = cand;

            if let Some(bound) = margin_upper_bound(&work, &ya, shift, x_cap) {
                best_bound = Some(best_bound.map_or(bound, |b: f64| b.min(bound)));
                if bound < -10.0 * tol {
                    let mut res = feasible_result(map, last_candidate, tol, it, history);
                    res.status = FeasStatus::InfeasibleAtTolerance;
                    res.x = None;
                    res.margin_bound = Some(bound);
                    return Ok(res);
                }
            }
        }

        let (xc, yc) = match opts.scheme {
            ProjectionScheme::Alternating => (
                project_psd_shifted(&xa, shift),
                project_psd_shifted(&ya, shift),
            ),
            ProjectionScheme::Dykstra => {
                let px = &xa + &qx;
                let py = &ya + &qy;
                let xc = project_psd_shifted(&px, shift);
                let yc = project_psd_shifted(&py, shift);
                qx = px - &xc;
                qy = py - &yc;
                (xc, yc)
            }
        };
        if opts.history_every > 0 && it % opts.history_every == 0 {
            let gap = ((&xa - &xc).norm_squared() + (&ya - &yc).norm_squared()).sqrt();
            history.push(gap);
        }
        xs = xc;
        ys = yc;
    }

    let mut res = feasible_result(map, last_candidate, tol, opts.max_iter, history);
    if res.status == FeasStatus::Feasible {
        return Ok(res);
    }
    res.status = FeasStatus::Inconclusive;
    res.margin_bound = best_bound;
    Ok(res)
}

enum MarginOutcome {
    Feasible(DMatrix<f64>),
    Infeasible(f64),
    Undecided(Option<f64>),
}

/// One affine matrix inequality `C0 + sum_k z_k C_k > 0` of the barrier problem.
struct LmiBlock {
    c0: DMatrix<f64>,
    coeffs: Vec<DMatrix<f64>>,
}

impl LmiBlock {
    fn value(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut out = self.c0.clone();
        for (zk, ck) in z.iter().zip(&self.coeffs) {
            if *zk != 0.0 {
                out += ck * *zk;
            }
        }
        out
    }
}

/// `-sum log det` over all blocks, `None` outside the interior.
fn barrier_value(blocks: &[LmiBlock], z: &DVector<f64>) -> Option<f64> {
    let mut total = 0.0;
    for b in blocks {
        let chol = Cholesky::new(b.value(z))?;
        total -= 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    }
    Some(total)
}

/// Gradient and Hessian of the barrier at an interior point.
fn barrier_derivatives(blocks: &[LmiBlock], z: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let dim = z.len();
    let mut grad = DVector::zeros(dim);
    let mut hess = DMatrix::zeros(dim, dim);
    for b in blocks {
        let inv = Cholesky::new(b.value(z))?.inverse();
        let prods: Vec<DMatrix<f64>> = b.coeffs.iter().map(|c| &inv * c).collect();
        for k in 0..dim {
            grad[k] -= prods[k].trace();
            for l in 0..=k {
                let v = prods[k].dot(&prods[l].transpose());
                hess[(k, l)] += v;
                if l != k {
                    hess[(l, k)] += v;
                }
            }
        }
    }
    Some((grad, hess))
}

/// Log-barrier path for `max { t : X >= tI, K + L(X) >= tI, tr X <= cap }`.
///
/// After centering with weight `s` on `t`, the optimum satisfies
/// `t* <= t + nu / s` where `nu` is the total barrier dimension.
fn maximize_margin(map: &AffineSymMap, tol: f64, cap: f64) -> MarginOutcome {
    let n = map.n_var();
    let r = map.n_out();
    let nv = svec_len(n);
    let dim = nv + 1;
    let units: Vec<DMatrix<f64>> = (0..nv).map(|k| smat_unit(k, n)).collect();

    let mut lmi_coeffs: Vec<DMatrix<f64>> = units.iter().map(|e| map.linear(e)).collect();
    lmi_coeffs.push(-DMatrix::identity(r, r));
    let mut var_coeffs = units.clone();
    var_coeffs.push(-DMatrix::identity(n, n));
    let mut cap_coeffs: Vec<DMatrix<f64>> = units.iter().map(|e| DMatrix::from_element(1, 1, -e.trace())).collect();
    cap_coeffs.push(DMatrix::zeros(1, 1));
    let blocks = [
        LmiBlock { c0: map.constant().clone(), coeffs: lmi_coeffs },
        LmiBlock { c0: DMatrix::zeros(n, n), coeffs: var_coeffs },
        LmiBlock { c0: DMatrix::from_element(1, 1, cap), coeffs: cap_coeffs },
    ];
    let nu = (r + n + 1) as f64;

    let scale = 1.0 + max_abs_eig(map.constant());
    let alpha = (cap / (4.0 * n as f64)).min(scale);
    let mut z = DVector::zeros(dim);
    let x0 = svec(&(DMatrix::identity(n, n) * alpha));
    z.rows_mut(0, nv).copy_from(&x0);
    let m0 = alpha.min(min_eig_unchecked(&map.apply(&smat(&x0, n))));
    z[nv] = m0 - 0.1 * (1.0 + m0.abs());

    let mut s = 1.0 / scale;
    let mut bound = None;
    for _outer in 0..40 {
        // Newton centering on  -s t + barrier(z).
        for _ in 0..100 {
            let Some((mut grad, hess)) = barrier_derivatives(&blocks, &z) else {
                return MarginOutcome::Undecided(bound);
            };
            grad[nv] -= s;
            let step = match Cholesky::new(hess.clone()) {
                Some(c) => c.solve(&(-&grad)),
                None => match hess.clone().lu().solve(&(-&grad)) {
                    Some(v) => v,
                    None => return MarginOutcome::Undecided(bound),
                },
            };
            let decrement = -grad.dot(&step);
            if !decrement.is_finite() {
                return MarginOutcome::Undecided(bound);
            }
            if decrement < 1e-9 {
                break;
            }
            let f0 = barrier_value(&blocks, &z).unwrap_or(f64::INFINITY) - s * z[nv];
            let mut step_len = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand = &z + &step * step_len;
                if let Some(f) = barrier_value(&blocks, &cand) {
                    if f - s * cand[nv] <= f0 - 0.25 * step_len * decrement {
                        z = cand;
                        moved = true;
                        break;
                    }
                }
                step_len *= 0.5;
            }
            if !moved {
                break;
            }
        }

        let t = z[nv];
        let upper = t + nu / s;
        bound = Some(bound.map_or(upper, |b: f64| b.min(upper)));
        let x = smat(&z.rows(0, nv).into_owned(), n);
        if t > 0.0 || (t >= -tol && upper < tol) {
            return MarginOutcome::Feasible(x);
        }
        if upper < -10.0 * tol {
            // An active trace cap means the bound only holds for the capped problem.
            if x.trace() > 0.99 * cap {
                return MarginOutcome::Undecided(bound);
            }
            return MarginOutcome::Infeasible(upper);
        }
        s *= 10.0;
    }
    MarginOutcome::Undecided(bound)
}

/// Upper bound on `max { t : X >= tI, K + L(X) >= tI, |X|_* <= cap }` from the
/// negative part of the current affine iterate. `None` if the candidate
/// direction carries no information.
fn margin_upper_bound(map: &AffineSymMap, ya: &DMatrix<f64>, shift: f64, x_cap: f64) -> Option<f64> {
    let r = ya.nrows();
    let mut shifted = -ya.clone();
    for i in 0..r {
        shifted[(i, i)] += shift;
    }
    let zy = project_psd(&shifted);
    let tr_zy = zy.trace();
    if !(tr_zy > 0.0) {
        return None;
    }
    let lz = map.adjoint(&zy);
    let zx = project_psd(&(-&lz));
    let excess = project_psd(&lz);
    let eps = max_abs_eig(&excess);
    let k_dot = map.constant().dot(&zy);
    let denom = tr_zy + zx.trace();
    Some((k_dot + eps * x_cap) / denom)
}
