//! Data-driven dissipativity certification.
//!
//! Given one input-output trajectory, a lag bound `L` and a supply rate, the
//! pipeline checks the Hankel rank condition, searches for a PSD storage
//! coefficient `Psi` satisfying the data LMI, and reports a verdict.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamat::{behavior_basis_from_data, estimate_complexity, hankel, numerical_rank, ComplexityEstimate};
use crate::error::{dims, Error, Result};
use crate::linalg::{max_abs, norm2, null_space, sym_eigen, symmetrize, vstack, RankTol};
use crate::lti::{uy_to_w, StateSpace, Trajectory};
use crate::qdf::{QdfCoeff, SupplyRate};
use crate::sdp::{
    inertia, min_eigenvalue, solve_psd_feasibility, AffineSymMap, CongruenceTerm, FeasStatus, SolverOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorKnowledge {
    pub m: usize,
    pub p: usize,
    /// Upper bound on the lag of the data-generating system.
    pub lag_bound: usize,
    pub n_min_override: Option<usize>,
}

impl PriorKnowledge {
    pub fn new(m: usize, p: usize, lag_bound: usize) -> Result<Self> {
        if m == 0 || p == 0 {
            return Err(Error::InvalidArgument("need m >= 1 and p >= 1".into()));
        }
        Ok(PriorKnowledge {
            m,
            p,
            lag_bound,
            n_min_override: None,
        })
    }

    pub fn with_n_min(mut self, n_min: usize) -> Self {
        self.n_min_override = Some(n_min);
        self
    }
}

/// `Pi` with `w_[t,t+d-1] = Pi [u_[t,t+d-1]; y_[t,t+d-1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Permutation {
    pub pi: DMatrix<f64>,
}

pub fn build_permutation(m: usize, p: usize, d: usize) -> Permutation {
    Permutation { pi: uy_to_w(m, p, d) }
}

/// Data LMI in `Psi in S^{qd}`:
/// `H^T (diag(Psi, 0_q) - diag(0_q, Psi) + diag(Phi, 0)) H >= 0`.
///
/// `data` has `q (d+1)` rows; it may be the Hankel matrix itself or any
/// matrix with the same column space.
pub fn build_dissipativity_lmi(data: &DMatrix<f64>, supply: &SupplyRate, d: usize, q: usize) -> Result<AffineSymMap> {
    let window = d + 1;
    if data.nrows() != q * window {
        return Err(dims("data LMI rows", q * window, data.nrows()));
    }
    if supply.q() != q {
        return Err(dims("supply rate width", q, supply.q()));
    }
    if supply.degree() > d as isize {
        return Err(Error::InvalidArgument(format!(
            "d = {d} is below the supply degree {}",
            supply.degree()
        )));
    }
    let phi = supply.coeff().padded(window)?;
    let constant = symmetrize(&(data.transpose() * phi.psi() * data));
    let cols = data.ncols();
    let first = data.view((0, 0), (q * d, cols)).transpose();
    let last = data.view((q, 0), (q * d, cols)).transpose();
    AffineSymMap::new(
        q * d,
        constant,
        vec![
            CongruenceTerm::congruence(first, 1.0),
            CongruenceTerm::congruence(last, -1.0),
        ],
    )
}

/// Static supply with inertia `(p, 0, m)` and `Phi22 <= 0`.
pub fn necessity_applicable(supply: &SupplyRate, m: usize, p: usize) -> bool {
    let tol = 1e-10;
    let (Some(blocks), Ok(s)) = (supply.static_blocks(), supply.static_matrix()) else {
        return false;
    };
    if supply.m() != m || supply.p() != p {
        return false;
    }
    let scale = tol * (1.0 + max_abs(&s));
    let Ok(inert) = inertia(&s, scale) else {
        return false;
    };
    let (vals, _) = sym_eigen(&blocks.phi22);
    let phi22_max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    inert.neg == p && inert.zero == 0 && inert.pos == m && phi22_max <= scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Certified,
    NotInformative,
    NotCertified,
    Undecided,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Certified => 0,
            Verdict::NotInformative => 2,
            Verdict::NotCertified => 3,
            Verdict::Undecided => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Certified => "CERTIFIED",
            Verdict::NotInformative => "NOT_INFORMATIVE",
            Verdict::NotCertified => "NOT_CERTIFIED",
            Verdict::Undecided => "UNDECIDED",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NminSource {
    Override,
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank_h: usize,
    pub n_min: usize,
    pub n_min_source: NminSource,
    pub required_rank: usize,
    pub rank_condition_met: bool,
    pub estimate: Option<ComplexityEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmiMargins {
    /// `lambda_min(Psi)`.
    pub psi_min_eig: f64,
    /// `lambda_min` of the data LMI on the full Hankel matrix.
    pub lmi_min_eig: f64,
    /// Absolute tolerance the verdict was taken at.
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: FeasStatus,
    pub iterations: usize,
    pub variable_margin: f64,
    pub lmi_margin: f64,
    pub margin_bound: Option<f64>,
    pub tolerance: f64,
    /// Size of the storage variable after removing zero-state directions.
    pub reduced_dim: usize,
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub psi: QdfCoeff,
    /// State storage, present when a realization was supplied.
    pub p: Option<DMatrix<f64>>,
    pub lmi_margins: LmiMargins,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub verdict: Verdict,
    /// Whether the verdict settles informativity rather than only the sufficient test.
    pub conclusive: bool,
    pub explanation: String,
    pub d: usize,
    pub supply_degree: isize,
    pub necessity_applicable: bool,
    pub rank_report: RankReport,
    pub solver: Option<SolverSummary>,
    pub certificate: Option<Certificate>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub rank_tol: RankTol,
    pub solver: SolverOptions,
    /// Restrict `Psi` to the complement of the zero-state windows before solving.
    pub facial_reduction: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            rank_tol: RankTol::default(),
            solver: SolverOptions::default(),
            facial_reduction: true,
        }
    }
}

/// Orthonormal complement (in `R^{qd}`) of the windows of length `d` that
/// start from the zero state, computed from a basis `g` of `B|[0,d]`.
///
/// A window `v` starts from rest iff every zero-prefixed truncation
/// `(0, ..., 0, v(0), ..., v(j))` of length `d+1` lies in `im g`.
/// Returns `None` when the computed subspace does not have dimension `m d`.
pub fn zero_state_complement(g: &DMatrix<f64>, q: usize, m: usize, d: usize, tol: RankTol) -> Option<DMatrix<f64>> {
    let rows = q * (d + 1);
    if g.nrows() != rows || d == 0 {
        return None;
    }
    let perp = DMatrix::identity(rows, rows) - g * g.transpose();
    let mut stacked = DMatrix::zeros(d * rows, q * d);
    for j in 0..d {
        let width = q * (j + 1);
        stacked
            .view_mut((j * rows, 0), (rows, width))
            .copy_from(&perp.columns(q * (d - j), width));
    }
    let zero_state = null_space(&stacked, tol);
    if zero_state.ncols() != m * d {
        return None;
    }
    Some(null_space(&zero_state.transpose(), tol))
}

fn not_informative_explanation(necessity: bool) -> String {
    if necessity {
        "rank condition fails; for this supply rate the data are not informative for dissipativity".into()
    } else {
        "rank condition fails; sufficient condition not met, dissipativity undetermined".into()
    }
}

/// Runs the full certification pipeline on one trajectory.
pub fn certify(w: &Trajectory, prior: &PriorKnowledge, supply: &SupplyRate, opts: &CertifyOptions) -> Result<Report> {
    let (m, p) = (prior.m, prior.p);
    if w.m() != m || w.p() != p {
        return Err(dims("trajectory partition", format!("m={m}, p={p}"), format!("m={}, p={}", w.m(), w.p())));
    }
    if supply.m() != m || supply.p() != p {
        return Err(dims(
            "supply partition",
            format!("m={m}, p={p}"),
            format!("m={}, p={}", supply.m(), supply.p()),
        ));
    }
    let q = m + p;
    let supply_degree = supply.degree();
    let d = (supply_degree.max(0) as usize).max(prior.lag_bound);
    if w.len() < d + 1 {
        return Err(Error::TrajectoryTooShort {
            needed: d + 1,
            got: w.len(),
        });
    }
    let necessity = necessity_applicable(supply, m, p);

    let h = hankel(w, d + 1)?;
    let (n_min, n_min_source, estimate) = match prior.n_min_override {
        Some(n) => (n, NminSource::Override, None),
        None => {
            let est = estimate_complexity(w, m, prior.lag_bound, opts.rank_tol)?;
            (est.n_min_hat, NminSource::Estimate, Some(est))
        }
    };
    let rank_h = numerical_rank(h.matrix(), opts.rank_tol);
    let required_rank = n_min + m * (d + 1);
    let rank_report = RankReport {
        rank_h,
        n_min,
        n_min_source,
        required_rank,
        rank_condition_met: rank_h == required_rank,
        estimate,
    };
    log::debug!("d = {d}, rank H = {rank_h}, required {required_rank}");

    if !rank_report.rank_condition_met {
        return Ok(Report {
            verdict: Verdict::NotInformative,
            conclusive: necessity,
            explanation: not_informative_explanation(necessity),
            d,
            supply_degree,
            necessity_applicable: necessity,
            rank_report,
            solver: None,
            certificate: None,
        });
    }

    let basis = behavior_basis_from_data(&h, opts.rank_tol)?;
    let lmi = build_dissipativity_lmi(basis.matrix(), supply, d, q)?;
    let reduction = if opts.facial_reduction {
        zero_state_complement(basis.matrix(), q, m, d, opts.rank_tol)
    } else {
        None
    };
    let (problem, lift) = match &reduction {
        Some(wmat) => (lmi.substitute(wmat)?, Some(wmat)),
        None => (lmi.clone(), None),
    };
    let res = solve_psd_feasibility(&problem, &opts.solver)?;
    log::debug!("solver status {:?} after {} iterations", res.status, res.iterations);
    let solver = SolverSummary {
        status: res.status,
        iterations: res.iterations,
        variable_margin: res.margins.variable,
        lmi_margin: res.margins.lmi,
        margin_bound: res.margin_bound,
        tolerance: res.tolerance,
        reduced_dim: problem.n_var(),
    };

    let (verdict, conclusive, explanation, certificate) = match res.status {
        FeasStatus::Feasible => {
            let x = res.x.clone().unwrap_or_else(|| DMatrix::zeros(problem.n_var(), problem.n_var()));
            let psi_mat = match lift {
                Some(wmat) => symmetrize(&(wmat * &x * wmat.transpose())),
                None => x,
            };
            let full_lmi = build_dissipativity_lmi(h.matrix(), supply, d, q)?;
            let lmi_min_eig = min_eigenvalue(&full_lmi.apply(&psi_mat))?;
            let psi_min_eig = min_eigenvalue(&psi_mat)?;
            let psi = QdfCoeff::new(q, psi_mat)?;
            (
                Verdict::Certified,
                true,
                "data LMI feasible; the data are informative for dissipativity".to_string(),
                Some(Certificate {
                    psi,
                    p: None,
                    lmi_margins: LmiMargins {
                        psi_min_eig: if psi_min_eig.is_finite() { psi_min_eig } else { 0.0 },
                        lmi_min_eig: if lmi_min_eig.is_finite() { lmi_min_eig } else { 0.0 },
                        tolerance: res.tolerance,
                    },
                }),
            )
        }
        FeasStatus::InfeasibleAtTolerance => (
            Verdict::NotCertified,
            true,
            "rank condition holds but the data LMI is infeasible; the data-generating system is not dissipative"
                .to_string(),
            None,
        ),
        FeasStatus::Inconclusive => (
            Verdict::Undecided,
            false,
            "solver could not decide feasibility of the data LMI within the iteration budget".to_string(),
            None,
        ),
    };

    Ok(Report {
        verdict,
        conclusive,
        explanation,
        d,
        supply_degree,
        necessity_applicable: necessity,
        rank_report,
        solver: Some(solver),
        certificate,
    })
}

/// `P = [0; O_d]^T Pi^T Psi Pi [0; O_d]` for a storage coefficient `Psi in S^{qd}`.
pub fn storage_to_state(psi: &QdfCoeff, sys: &StateSpace, d: usize) -> Result<DMatrix<f64>> {
    let (n, m, q) = (sys.n(), sys.m(), sys.q());
    if psi.q() != q {
        return Err(dims("storage coefficient width", q, psi.q()));
    }
    if psi.window() > d {
        return Err(dims("storage coefficient window", format!("<= {d}"), psi.window()));
    }
    let tol = RankTol::default();
    if n > 0 {
        if !sys.is_observable(tol) {
            return Err(Error::NotObservable);
        }
        if d < sys.lag(tol) {
            return Err(Error::Precondition(format!(
                "d = {d} is below the lag {}; O_d is rank deficient",
                sys.lag(tol)
            )));
        }
    }
    let psi_mat = psi.padded(d)?.into_matrix();
    let scale = max_abs(&psi_mat);
    let low = min_eigenvalue(&psi_mat)?;
    if low.is_finite() && low < -1e-7 * (1.0 + scale) {
        return Err(Error::Precondition(format!(
            "storage coefficient is not PSD (eigenvalue {low:.3e})"
        )));
    }
    let state_to_uy = vstack(&[&DMatrix::zeros(m * d, n), &sys.observability_matrix(d)], n);
    let state_to_w = uy_to_w(m, sys.p(), d) * state_to_uy;
    Ok(symmetrize(&(state_to_w.transpose() * psi_mat * state_to_w)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCheck {
    /// `lambda_min` of the model dissipation LMI at the given `P`.
    pub lmi_min_eig: f64,
    pub p_min_eig: f64,
    /// Largest `V(x+) - V(x) - s(u, y)` relative to its scale over sampled transitions.
    pub worst_relative_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tol: 1e-7,
            samples: 100,
            seed: 0,
        }
    }
}

/// Checks a fixed storage matrix `P` against the model: the dissipation LMI
/// and sampled one-step inequalities `V(x+) - V(x) <= s(u, y)`.
pub fn check_certificate_on_model(
    sys: &StateSpace,
    supply: &SupplyRate,
    p_mat: &DMatrix<f64>,
    opts: &VerifyOptions,
) -> Result<ModelCheck> {
    let n = sys.n();
    if p_mat.shape() != (n, n) {
        return Err(dims("storage matrix", format!("{n}x{n}"), format!("{}x{}", p_mat.nrows(), p_mat.ncols())));
    }
    let s = supply.static_matrix()?;
    let lmi = sys.dissipation_lmi(supply)?;
    let value = lmi.apply(p_mat);
    let lmi_scale = 1.0 + norm2(lmi.constant()) + norm2(p_mat) * (1.0 + norm2(sys.a()).powi(2) + norm2(sys.b()).powi(2));
    let lmi_min_eig = min_eigenvalue(&value)?;
    let p_min_eig = min_eigenvalue(p_mat)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let s_norm = norm2(&s);
    let p_norm = norm2(p_mat);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..opts.samples {
        let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
        let u = DVector::from_fn(sys.m(), |_, _| rng.random_range(-1.0..=1.0));
        let x_next = sys.a() * &x + sys.b() * &u;
        let y = sys.c() * &x + sys.d() * &u;
        let v_now = if n == 0 { 0.0 } else { x.dot(&(p_mat * &x)) };
        let v_next = if n == 0 { 0.0 } else { x_next.dot(&(p_mat * &x_next)) };
        let supplied = supply.eval_static(&u, &y)?;
        let scale = 1.0 + p_norm * (x.norm_squared() + x_next.norm_squared()) + s_norm * (u.norm_squared() + y.norm_squared());
        worst = worst.max((v_next - v_now - supplied) / scale);
    }
    let low = |v: f64| if v.is_finite() { v } else { 0.0 };
    let (lmi_min_eig, p_min_eig) = (low(lmi_min_eig), low(p_min_eig));
    if opts.samples == 0 {
        worst = 0.0;
    }
    let passed = lmi_min_eig >= -opts.tol * lmi_scale && p_min_eig >= -opts.tol * (1.0 + p_norm) && worst <= opts.tol;
    Ok(ModelCheck {
        lmi_min_eig,
        p_min_eig,
        worst_relative_residual: worst,
        passed,
    })
}

pub fn verify_certificate_on_model(sys: &StateSpace, supply: &SupplyRate, p_mat: &DMatrix<f64>) -> Result<bool> {
    Ok(check_certificate_on_model(sys, supply, p_mat, &VerifyOptions::default())?.passed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{random_controllable_system, random_inputs, random_vector};

    fn scalar_io(u: &[f64], y: &[f64]) -> Trajectory {
        let us: Vec<_> = u.iter().map(|&x| DVector::from_element(1, x)).collect();
        let ys: Vec<_> = y.iter().map(|&x| DVector::from_element(1, x)).collect();
        Trajectory::from_io(&us, &ys).unwrap()
    }

    fn gain_data(k: f64) -> Trajectory {
        let u = [1.0, -1.0, 2.0];
        let y: Vec<f64> = u.iter().map(|x| k * x).collect();
        scalar_io(&u, &y)
    }

    #[test]
    fn permutation_examples() {
        assert_eq!(build_permutation(1, 1, 0).pi.shape(), (0, 0));
        assert_eq!(build_permutation(1, 1, 1).pi, DMatrix::identity(2, 2));
        let pi = build_permutation(1, 1, 2).pi;
        let uy = DVector::from_vec(vec![10.0, 11.0, 20.0, 21.0]);
        assert_eq!((pi * uy).as_slice(), &[10.0, 20.0, 11.0, 21.0]);
    }

    #[test]
    fn positive_gain_is_passive() {
        let w = gain_data(0.5);
        let prior = PriorKnowledge::new(1, 1, 0).unwrap();
        let r = certify(&w, &prior, &SupplyRate::passivity(1).unwrap(), &CertifyOptions::default()).unwrap();
        assert_eq!(r.d, 0);
        assert_eq!(r.rank_report.rank_h, 1);
        assert_eq!(r.rank_report.required_rank, 1);
        assert_eq!(r.verdict, Verdict::Certified);
        assert_eq!(r.certificate.unwrap().psi.window(), 0);
    }

    #[test]
    fn negative_gain_is_not_passive() {
        let w = gain_data(-0.5);
        let prior = PriorKnowledge::new(1, 1, 0).unwrap();
        let r = certify(&w, &prior, &SupplyRate::passivity(1).unwrap(), &CertifyOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NotCertified);
        assert!(r.conclusive && r.necessity_applicable);
    }

    #[test]
    fn gain_two_exceeds_unit_bound() {
        let w = gain_data(2.0);
        let prior = PriorKnowledge::new(1, 1, 0).unwrap();
        let r = certify(&w, &prior, &SupplyRate::l2_gain(1, 1, 1.0).unwrap(), &CertifyOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NotCertified);
    }

    #[test]
    fn zero_input_is_not_informative() {
        let sys = random_controllable_system(2, 1, 1, 5).unwrap();
        let u = vec![DVector::zeros(1); 30];
        let w = sys.simulate(&DVector::from_vec(vec![1.0, -0.5]), &u).unwrap().trajectory;
        let prior = PriorKnowledge::new(1, 1, 2).unwrap();
        let supply = SupplyRate::l2_gain(1, 1, 100.0).unwrap();
        let r = certify(&w, &prior, &supply, &CertifyOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NotInformative);
        assert!(r.conclusive);
    }

    #[test]
    fn necessity_regime_membership() {
        assert!(necessity_applicable(&SupplyRate::passivity(2).unwrap(), 2, 2));
        assert!(necessity_applicable(&SupplyRate::l2_gain(2, 1, 0.7).unwrap(), 2, 1));
        assert!(!necessity_applicable(&SupplyRate::l2_gain(1, 1, 0.0).unwrap(), 1, 1));
        let flipped = QdfCoeff::new(2, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0])).unwrap();
        assert!(!necessity_applicable(&SupplyRate::custom(flipped, 1).unwrap(), 1, 1));
    }

    #[test]
    fn lmi_at_zero_is_constant_term() {
        let w = gain_data(0.5);
        let h = hankel(&w, 2).unwrap();
        let supply = SupplyRate::passivity(1).unwrap();
        let lmi = build_dissipativity_lmi(h.matrix(), &supply, 1, 2).unwrap();
        let phi = supply.coeff().padded(2).unwrap();
        let expected = h.matrix().transpose() * phi.psi() * h.matrix();
        assert!((lmi.apply(&DMatrix::zeros(2, 2)) - expected).amax() < 1e-15);
        assert!(build_dissipativity_lmi(h.matrix(), &supply, 0, 2).is_err());
    }

    #[test]
    fn lmi_matches_nabla() {
        let sys = random_controllable_system(2, 1, 1, 9).unwrap();
        let w = sys.simulate(&DVector::zeros(2), &random_inputs(1, 20, 4)).unwrap().trajectory;
        let d = 2;
        let h = hankel(&w, d + 1).unwrap();
        let supply = SupplyRate::l2_gain(1, 1, 1.3).unwrap();
        let lmi = build_dissipativity_lmi(h.matrix(), &supply, d, 2).unwrap();
        let r = random_vector(16, 8);
        let psi = symmetrize(&DMatrix::from_column_slice(4, 4, r.as_slice()));
        let coeff = QdfCoeff::new(2, psi.clone()).unwrap();
        let oracle = supply.coeff().padded(d + 1).unwrap().into_matrix() - coeff.nabla().into_matrix();
        let expected = h.matrix().transpose() * oracle * h.matrix();
        assert!((lmi.apply(&psi) - expected).amax() < 1e-10);
    }

    #[test]
    fn memoryless_model_checks() {
        let unity = StateSpace::static_gain(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let void = DMatrix::zeros(0, 0);
        assert!(verify_certificate_on_model(&unity, &SupplyRate::passivity(1).unwrap(), &void).unwrap());
        let two = StateSpace::static_gain(DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert!(!verify_certificate_on_model(&two, &SupplyRate::l2_gain(1, 1, 1.0).unwrap(), &void).unwrap());
    }

    #[test]
    fn storage_to_state_trivial_cases() {
        let sys = random_controllable_system(2, 1, 1, 3).unwrap();
        let p = storage_to_state(&QdfCoeff::zero(2, 2), &sys, 2).unwrap();
        assert_eq!(p, DMatrix::zeros(2, 2));
        let memoryless = StateSpace::static_gain(DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(storage_to_state(&QdfCoeff::void(2), &memoryless, 0).unwrap().shape(), (0, 0));
    }

    #[test]
    fn certified_storage_matches_state_form() {
        let sys = random_controllable_system(2, 1, 1, 21).unwrap();
        let x0 = random_vector(2, 1);
        let sim = sys.simulate(&x0, &random_inputs(1, 60, 2)).unwrap();
        let prior = PriorKnowledge::new(1, 1, 2).unwrap();
        let supply = SupplyRate::l2_gain(1, 1, 50.0).unwrap();
        let r = certify(&sim.trajectory, &prior, &supply, &CertifyOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Certified);
        let cert = r.certificate.unwrap();
        let p = storage_to_state(&cert.psi, &sys, r.d).unwrap();
        assert!(verify_certificate_on_model(&sys, &supply, &p).unwrap());
        let psi = cert.psi.padded(r.d).unwrap();
        for t in 0..sim.trajectory.len() - r.d {
            let lhs = psi.eval(&sim.trajectory, t).unwrap();
            let rhs = sim.states[t].dot(&(&p * &sim.states[t]));
            assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + lhs.abs()), "t={t}: {lhs} vs {rhs}");
        }
    }
}
