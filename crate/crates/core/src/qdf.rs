//! Quadratic difference forms `Q(w)(t) = w_[t,t+M]^T Psi w_[t,t+M]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dims, Error, Result};
use crate::linalg::{asymmetry, embed, max_abs, numerical_rank, pinv, sym_eigen, symmetrize, vstack, RankTol};
use crate::lti::{StateSpace, Trajectory};

/// Symmetric coefficient matrix of a QDF over `q` signal components.
///
/// The window length is `psi.nrows() / q`; a void `psi` encodes `M = -1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QdfCoeff {
    q: usize,
    psi: DMatrix<f64>,
}

impl QdfCoeff {
    /// Builds a coefficient matrix, symmetrizing away roundoff-level asymmetry.
    pub fn new(q: usize, psi: DMatrix<f64>) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument("q must be positive".into()));
        }
        if psi.nrows() != psi.ncols() || psi.nrows() % q != 0 {
            return Err(dims(
                "QDF coefficient",
                format!("square with size a multiple of {q}"),
                format!("{}x{}", psi.nrows(), psi.ncols()),
            ));
        }
        let asym = asymmetry(&psi);
        if asym > 1e-8 * (1.0 + max_abs(&psi)) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(QdfCoeff {
            q,
            psi: symmetrize(&psi),
        })
    }

    /// The zero QDF with `M = -1`.
    pub fn void(q: usize) -> Self {
        QdfCoeff {
            q,
            psi: DMatrix::zeros(0, 0),
        }
    }

    pub fn zero(q: usize, window: usize) -> Self {
        QdfCoeff {
            q,
            psi: DMatrix::zeros(q * window, q * window),
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.psi
    }

    /// Number of samples the form looks at (`M + 1`).
    pub fn window(&self) -> usize {
        self.psi.nrows() / self.q
    }

    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let q = self.q;
        self.psi.view((i * q, j * q), (q, q)).into_owned()
    }

    pub fn eval_window(&self, w: &DVector<f64>) -> Result<f64> {
        if w.len() != self.psi.nrows() {
            return Err(dims("QDF window", self.psi.nrows(), w.len()));
        }
        if w.is_empty() {
            return Ok(0.0);
        }
        Ok(w.dot(&(&self.psi * w)))
    }

    /// `Q(w)(t)`; zero when `M = -1`.
    pub fn eval(&self, w: &Trajectory, t: usize) -> Result<f64> {
        if w.q() != self.q {
            return Err(dims("trajectory width", self.q, w.q()));
        }
        if self.window() == 0 {
            return Ok(0.0);
        }
        self.eval_window(&w.window(t, self.window())?)
    }

    /// Smallest `d >= -1` with `Psi_{i,j} = 0` for all `i > d`; entries below
    /// `1e-12 * max|Psi|` count as zero.
    pub fn degree(&self) -> isize {
        let scale = max_abs(&self.psi);
        if scale == 0.0 {
            return -1;
        }
        let thr = 1e-12 * scale;
        let q = self.q;
        (0..self.window())
            .rev()
            .find(|&i| self.psi.rows(i * q, q).iter().any(|x| x.abs() > thr))
            .map_or(-1, |i| i as isize)
    }

    /// Minimal coefficient matrix: truncation to `(degree + 1) q`.
    pub fn minimize(&self) -> QdfCoeff {
        let size = ((self.degree() + 1) as usize) * self.q;
        QdfCoeff {
            q: self.q,
            psi: self.psi.view((0, 0), (size, size)).into_owned(),
        }
    }

    /// Zero-padded (bottom-right) to `window` samples.
    pub fn padded(&self, window: usize) -> Result<QdfCoeff> {
        if window < self.window() {
            return Err(Error::InvalidArgument(format!(
                "cannot pad a window of {} samples down to {window}",
                self.window()
            )));
        }
        Ok(QdfCoeff {
            q: self.q,
            psi: embed(&self.psi, window * self.q, 0),
        })
    }

    /// Coefficient of the rate of change: `diag(0_q, Psi) - diag(Psi, 0_q)`.
    pub fn nabla(&self) -> QdfCoeff {
        let size = self.psi.nrows() + self.q;
        let later = embed(&self.psi, size, self.q);
        let now = embed(&self.psi, size, 0);
        QdfCoeff {
            q: self.q,
            psi: later - now,
        }
    }

    fn restricted(&self, basis: &BehaviorBasis) -> Result<DMatrix<f64>> {
        if basis.q() != self.q {
            return Err(dims("behavior basis width", self.q, basis.q()));
        }
        if basis.window() < self.window() {
            return Err(dims("behavior basis window", format!(">= {}", self.window()), basis.window()));
        }
        let padded = self.padded(basis.window())?;
        let g = basis.matrix();
        Ok(symmetrize(&(g.transpose() * padded.psi() * g)))
    }

    /// Whether `G^T Psi G >= 0` for the padded coefficient, i.e. `Q >= 0` on the behavior.
    pub fn nonneg_on_behavior(&self, basis: &BehaviorBasis, tol: f64) -> Result<bool> {
        let restricted = self.restricted(basis)?;
        let (vals, _) = sym_eigen(&restricted);
        let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(max_abs(&self.psi));
        Ok(vals.iter().all(|&v| v >= -tol * scale.max(f64::MIN_POSITIVE)))
    }

    /// A PSD coefficient matrix `K^T K` that agrees with `self` on the behavior.
    pub fn psd_equivalent(&self, basis: &BehaviorBasis, tol: f64) -> Result<QdfCoeff> {
        let restricted = self.restricted(basis)?;
        let (vals, vecs) = sym_eigen(&restricted);
        let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if let Some(&low) = vals.iter().next() {
            if low < -tol * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Precondition(format!(
                    "form is not nonnegative on the behavior (eigenvalue {low:.3e})"
                )));
            }
        }
        // F = Lambda^{1/2} V^T, so F^T F = G^T Psi G
        let mut f = vecs.transpose();
        for (i, &lam) in vals.iter().enumerate() {
            f.row_mut(i).scale_mut(lam.max(0.0).sqrt());
        }
        let k = f * pinv(basis.matrix(), RankTol::default());
        QdfCoeff::new(self.q, k.transpose() * k)
    }

    /// Folds the top block row/column of a PSD storage coefficient into lower
    /// blocks until the degree drops below `max(supply_degree, lag)`.
    ///
    /// Uses `w(t+d) = [I; D] u(t+d) + [0; C] Z2 w_[t+d-l, t+d-1]` together with
    /// `Psi_{i,d} [I; D] = 0`, which is checked to relative tolerance `tol`.
    pub fn reduce_degree(&self, sys: &StateSpace, supply_degree: isize, tol: f64) -> Result<QdfCoeff> {
        let q = self.q;
        if sys.q() != q {
            return Err(dims("system signal width", q, sys.q()));
        }
        let rank_tol = RankTol::default();
        if !sys.is_observable(rank_tol) {
            return Err(Error::NotObservable);
        }
        let maps = sys.state_reconstruction_maps(rank_tol)?;
        let lag = maps.lag;
        let target = supply_degree.max(lag as isize);

        let scale = max_abs(&self.psi);
        let (vals, _) = sym_eigen(&self.psi);
        if let Some(&low) = vals.iter().next() {
            if low < -tol * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Precondition(format!(
                    "storage coefficient is not PSD (eigenvalue {low:.3e})"
                )));
            }
        }

        let (m, n) = (sys.m(), sys.n());
        let feedthrough = vstack(&[&DMatrix::identity(m, m), sys.d()], m);
        let output_map = vstack(&[&DMatrix::zeros(m, n), sys.c()], n);
        // q x (q lag): w(t+d) in terms of the lag samples before it, modulo [I; D] u(t+d)
        let next_sample = output_map * &maps.z2;

        let mut psi = self.minimize();
        loop {
            let d = psi.degree();
            if d < target || d < 0 {
                return Ok(psi);
            }
            let d = d as usize;
            let size = (d + 1) * q;
            let last_cols = psi.psi.view((0, d * q), (size, q)).into_owned();
            let resid = max_abs(&(last_cols * &feedthrough));
            if resid > tol * scale.max(f64::MIN_POSITIVE) * (1.0 + max_abs(sys.d())) {
                return Err(Error::Precondition(format!(
                    "Psi_(i,{d}) [I; D] != 0 (residual {resid:.3e}); not a storage coefficient"
                )));
            }
            // E: (d+1)q x dq, identity on the first d samples, last sample folded
            let mut fold = DMatrix::zeros(size, d * q);
            fold.view_mut((0, 0), (d * q, d * q)).fill_with_identity();
            if lag > 0 {
                fold.view_mut((d * q, (d - lag) * q), (q, lag * q)).copy_from(&next_sample);
            }
            let reduced = fold.transpose() * &psi.psi * &fold;
            psi = QdfCoeff::new(q, symmetrize(&reduced))?.minimize();
        }
    }
}

/// Columns spanning a restricted behavior `B|[0, window-1]`.
#[derive(Debug, Clone)]
pub struct BehaviorBasis {
    g: DMatrix<f64>,
    window: usize,
    q: usize,
}

impl BehaviorBasis {
    pub fn new(g: DMatrix<f64>, window: usize, q: usize) -> Result<Self> {
        if g.nrows() != window * q {
            return Err(dims("behavior basis rows", window * q, g.nrows()));
        }
        if numerical_rank(&g, RankTol::default()) != g.ncols() {
            return Err(Error::InvalidArgument("behavior basis must have full column rank".into()));
        }
        Ok(BehaviorBasis { g, window, q })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }
    pub fn window(&self) -> usize {
        self.window
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn dim(&self) -> usize {
        self.g.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupplyKind {
    Passivity,
    L2gain,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticBlocks {
    pub phi11: DMatrix<f64>,
    pub phi12: DMatrix<f64>,
    pub phi22: DMatrix<f64>,
}

/// A supply rate `Q_Phi` with its input/output partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplyRate {
    coeff: QdfCoeff,
    m: usize,
    p: usize,
    kind: SupplyKind,
    gamma: Option<f64>,
    blocks: Option<StaticBlocks>,
}

impl SupplyRate {
    /// `s(u, y) = 2 u^T y`, requires `m = p`.
    pub fn passivity(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("m must be positive".into()));
        }
        let mut s = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            s[(i, m + i)] = 1.0;
            s[(m + i, i)] = 1.0;
        }
        Self::build(QdfCoeff::new(2 * m, s)?, m, m, SupplyKind::Passivity, None)
    }

    /// `s(u, y) = gamma^2 |u|^2 - |y|^2`.
    pub fn l2_gain(m: usize, p: usize, gamma: f64) -> Result<Self> {
        if m == 0 || p == 0 {
            return Err(Error::InvalidArgument("need m >= 1 and p >= 1".into()));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        let mut s = DMatrix::zeros(m + p, m + p);
        for i in 0..m {
            s[(i, i)] = gamma * gamma;
        }
        for j in 0..p {
            s[(m + j, m + j)] = -1.0;
        }
        Self::build(QdfCoeff::new(m + p, s)?, m, p, SupplyKind::L2gain, Some(gamma))
    }

    /// Arbitrary (possibly dynamic) supply over `q = m + p` components.
    pub fn custom(coeff: QdfCoeff, m: usize) -> Result<Self> {
        if m == 0 || m >= coeff.q() {
            return Err(Error::InvalidArgument(format!(
                "input count {m} incompatible with q = {}",
                coeff.q()
            )));
        }
        let p = coeff.q() - m;
        Self::build(coeff, m, p, SupplyKind::Custom, None)
    }

    fn build(coeff: QdfCoeff, m: usize, p: usize, kind: SupplyKind, gamma: Option<f64>) -> Result<Self> {
        let coeff = coeff.minimize();
        let blocks = if coeff.degree() <= 0 {
            let s = coeff.padded(1)?.into_matrix();
            Some(StaticBlocks {
                phi11: s.view((0, 0), (m, m)).into_owned(),
                phi12: s.view((0, m), (m, p)).into_owned(),
                phi22: s.view((m, m), (p, p)).into_owned(),
            })
        } else {
            None
        };
        Ok(SupplyRate {
            coeff,
            m,
            p,
            kind,
            gamma,
            blocks,
        })
    }

    pub fn coeff(&self) -> &QdfCoeff {
        &self.coeff
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn q(&self) -> usize {
        self.m + self.p
    }
    pub fn kind(&self) -> SupplyKind {
        self.kind
    }
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }
    pub fn degree(&self) -> isize {
        self.coeff.degree()
    }
    pub fn is_static(&self) -> bool {
        self.blocks.is_some()
    }
    pub fn static_blocks(&self) -> Option<&StaticBlocks> {
        self.blocks.as_ref()
    }

    /// `S in S^q` for a static supply.
    pub fn static_matrix(&self) -> Result<DMatrix<f64>> {
        match &self.blocks {
            Some(b) => {
                let top = crate::linalg::hstack(&[&b.phi11, &b.phi12], self.m);
                let bottom = crate::linalg::hstack(&[&b.phi12.transpose(), &b.phi22], self.p);
                Ok(vstack(&[&top, &bottom], self.q()))
            }
            None => Err(Error::InvalidArgument(format!(
                "supply rate has degree {} and is not static",
                self.degree()
            ))),
        }
    }

    /// `s(u, y)` for a static supply.
    pub fn eval_static(&self, u: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        let s = self.static_matrix()?;
        let mut w = DVector::zeros(self.q());
        w.rows_mut(0, self.m).copy_from(u);
        w.rows_mut(self.m, self.p).copy_from(y);
        Ok(w.dot(&(s * &w)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::inertia;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    fn traj(v: &[f64]) -> Trajectory {
        // q = 2 requires m = p = 1; for q = 1 tests we use eval_window directly
        let samples = v.chunks(2).map(|c| DVector::from_column_slice(c)).collect();
        Trajectory::new(1, 1, samples).unwrap()
    }

    #[test]
    fn void_form_evaluates_to_zero() {
        let z = QdfCoeff::void(2);
        assert_eq!(z.eval(&traj(&[1.0, 2.0]), 0).unwrap(), 0.0);
        assert_eq!(z.degree(), -1);
    }

    #[test]
    fn scalar_evaluation() {
        let psi = QdfCoeff::new(1, m(2, 2, &[0.0, 0.5, 0.5, 0.0])).unwrap();
        assert_eq!(psi.eval_window(&DVector::from_vec(vec![1.0, 2.0])).unwrap(), 2.0);
        let sq = QdfCoeff::new(1, m(1, 1, &[1.0])).unwrap();
        assert_eq!(sq.eval_window(&DVector::from_vec(vec![3.0])).unwrap(), 9.0);
    }

    #[test]
    fn eval_rejects_window_past_end() {
        let psi = QdfCoeff::zero(2, 2);
        assert!(matches!(
            psi.eval(&traj(&[1.0, 2.0]), 0),
            Err(Error::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn degree_examples() {
        assert_eq!(QdfCoeff::new(1, m(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap().degree(), 0);
        assert_eq!(QdfCoeff::new(1, m(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap().degree(), 1);
        assert_eq!(QdfCoeff::zero(3, 2).degree(), -1);
    }

    #[test]
    fn minimize_truncates_padding() {
        let base = QdfCoeff::new(2, m(2, 2, &[1.0, 0.3, 0.3, -2.0])).unwrap();
        let padded = base.padded(3).unwrap();
        assert_eq!(padded.minimize(), base);
        assert_eq!(base.minimize(), base);
    }

    #[test]
    fn nabla_of_scalar() {
        let a = 1.7;
        let n = QdfCoeff::new(1, m(1, 1, &[a])).unwrap().nabla();
        assert_eq!(n.psi(), &m(2, 2, &[-a, 0.0, 0.0, a]));
        let z = QdfCoeff::zero(2, 2).nabla();
        assert_eq!(max_abs(z.psi()), 0.0);
        assert_eq!(z.window(), 3);
    }

    #[test]
    fn nonneg_on_identity_behavior() {
        let g = BehaviorBasis::new(m(2, 1, &[1.0, 1.0]), 1, 2).unwrap();
        let l2 = QdfCoeff::new(2, m(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap();
        assert!(l2.nonneg_on_behavior(&g, 1e-12).unwrap());
        let neg = QdfCoeff::new(2, m(2, 2, &[-1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(!neg.nonneg_on_behavior(&g, 1e-12).unwrap());
        let psd = QdfCoeff::new(2, m(2, 2, &[2.0, 1.0, 1.0, 3.0])).unwrap();
        assert!(psd.nonneg_on_behavior(&g, 1e-12).unwrap());
    }

    #[test]
    fn psd_equivalent_hand_case() {
        let g = BehaviorBasis::new(m(2, 1, &[1.0, 1.0]), 1, 2).unwrap();
        let psi = QdfCoeff::new(2, m(2, 2, &[2.0, 0.0, 0.0, -1.0])).unwrap();
        let out = psi.psd_equivalent(&g, 1e-12).unwrap();
        let (vals, _) = sym_eigen(out.psi());
        assert!(vals[0] >= -1e-12);
        let restricted = g.matrix().transpose() * out.psi() * g.matrix();
        assert!((restricted[(0, 0)] - 1.0).abs() < 1e-12);

        let bad = QdfCoeff::new(2, m(2, 2, &[-1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(bad.psd_equivalent(&g, 1e-12), Err(Error::Precondition(_))));
    }

    #[test]
    fn supply_rates() {
        let pass = SupplyRate::passivity(1).unwrap();
        let s = pass.static_matrix().unwrap();
        assert_eq!(s, m(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let i = inertia(&s, 1e-12).unwrap();
        assert_eq!((i.neg, i.zero, i.pos), (1, 0, 1));

        let l2 = SupplyRate::l2_gain(1, 1, 1.0).unwrap();
        assert_eq!(l2.static_matrix().unwrap(), m(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        assert_eq!(l2.static_blocks().unwrap().phi22, m(1, 1, &[-1.0]));

        let zero_gain = SupplyRate::l2_gain(2, 1, 0.0).unwrap();
        let i = inertia(&zero_gain.static_matrix().unwrap(), 1e-12).unwrap();
        assert_eq!((i.neg, i.zero, i.pos), (1, 2, 0));

        assert!(SupplyRate::l2_gain(1, 1, -1.0).is_err());
        assert!(SupplyRate::passivity(0).is_err());
    }

    #[test]
    fn static_blocks_reassemble() {
        let phi = m(3, 3, &[1.0, 0.2, -0.4, 0.2, -3.0, 0.5, -0.4, 0.5, 2.0]);
        let s = SupplyRate::custom(QdfCoeff::new(3, phi.clone()).unwrap(), 2).unwrap();
        assert_eq!(s.static_matrix().unwrap(), phi);
        assert_eq!(s.p(), 1);
    }

    #[test]
    fn reduce_degree_leaves_low_degree_alone() {
        let sys = StateSpace::new(m(1, 1, &[0.5]), m(1, 1, &[1.0]), m(1, 1, &[1.0]), m(1, 1, &[0.0])).unwrap();
        let psi = QdfCoeff::new(2, m(2, 2, &[0.0, 0.0, 0.0, 1.0])).unwrap();
        // degree 0 < max(0, lag = 1)
        assert_eq!(psi.reduce_degree(&sys, 0, 1e-9).unwrap(), psi);
    }

    #[test]
    fn reduce_degree_memoryless_collapses() {
        // y = 2u; Psi annihilating [1; 2] in every block column is a valid storage.
        let sys = StateSpace::static_gain(m(1, 1, &[2.0])).unwrap();
        let v = DVector::from_vec(vec![2.0, -1.0, 0.0, 0.0]);
        let psi = QdfCoeff::new(2, &v * v.transpose()).unwrap();
        let out = psi.reduce_degree(&sys, 0, 1e-9).unwrap();
        assert_eq!(out.degree(), -1);
    }

    #[test]
    fn reduce_degree_rejects_invalid_storage() {
        let sys = StateSpace::static_gain(m(1, 1, &[2.0])).unwrap();
        let psi = QdfCoeff::new(2, DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(psi.reduce_degree(&sys, 0, 1e-9), Err(Error::Precondition(_))));
    }
}
