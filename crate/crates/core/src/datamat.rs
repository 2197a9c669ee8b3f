//! Hankel matrices of data and rank-based complexity estimates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{range_basis, RankTol};
use crate::lti::Trajectory;
use crate::qdf::BehaviorBasis;

pub use crate::linalg::numerical_rank;

/// Block Hankel matrix `H_k(w)`: column `j` is the window `w_[j, j+k-1]`.
#[derive(Debug, Clone)]
pub struct HankelMatrix {
    depth: usize,
    q: usize,
    source_len: usize,
    data: DMatrix<f64>,
}

impl HankelMatrix {
    pub fn depth(&self) -> usize {
        self.depth
    }
    pub fn width(&self) -> usize {
        self.data.ncols()
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn source_len(&self) -> usize {
        self.source_len
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }
    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }
}

pub fn hankel(w: &Trajectory, k: usize) -> Result<HankelMatrix> {
    let t_len = w.len();
    if k == 0 || k > t_len {
        return Err(Error::InvalidArgument(format!(
            "Hankel depth {k} outside 1..={t_len}"
        )));
    }
    let q = w.q();
    let width = t_len - k + 1;
    let mut data = DMatrix::zeros(q * k, width);
    for j in 0..width {
        for i in 0..k {
            data.view_mut((i * q, j), (q, 1)).copy_from(w.sample(i + j));
        }
    }
    Ok(HankelMatrix {
        depth: k,
        q,
        source_len: t_len,
        data,
    })
}

/// Input-only Hankel matrix `H_k(u)`.
fn input_hankel(w: &Trajectory, k: usize) -> DMatrix<f64> {
    let m = w.m();
    let width = w.len() - k + 1;
    let mut data = DMatrix::zeros(m * k, width);
    for j in 0..width {
        for i in 0..k {
            data.view_mut((i * m, j), (m, 1)).copy_from(&w.input(i + j));
        }
    }
    data
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    /// `r_1, ..., r_{L+1}`.
    pub rank_profile: Vec<usize>,
    pub n_min_hat: usize,
    pub lag_hat: usize,
    pub trusted: bool,
    /// `max_k (rank H_k(w) - rank H_k(u))`, a lower bound on `n_min` valid for any input.
    pub n_min_lower_bound: usize,
}

/// Rank-increment estimate of `n_min` and the lag from `H_1(w), ..., H_{L+1}(w)`.
///
/// The first depth at which the rank grows by exactly `m` gives the lag.
/// When no such depth exists, or the estimate disagrees with the input-aware
/// lower bound, the result is flagged untrusted and `n_min_hat` falls back to
/// that lower bound.
pub fn estimate_complexity(w: &Trajectory, m: usize, lag_bound: usize, tol: RankTol) -> Result<ComplexityEstimate> {
    if m != w.m() {
        return Err(crate::error::dims("input count", w.m(), m));
    }
    let needed = lag_bound + 2;
    if w.len() < needed {
        return Err(Error::TrajectoryTooShort {
            needed,
            got: w.len(),
        });
    }
    let depths = lag_bound + 1;
    let mut profile = Vec::with_capacity(depths);
    let mut lower_bound = 0usize;
    for k in 1..=depths {
        let r = numerical_rank(hankel(w, k)?.matrix(), tol);
        let ru = numerical_rank(&input_hankel(w, k), tol);
        lower_bound = lower_bound.max(r.saturating_sub(ru));
        profile.push(r);
    }

    let rank_at = |k: usize| if k == 0 { 0 } else { profile[k - 1] };
    let first = (0..depths).find(|&k| rank_at(k + 1) as isize - rank_at(k) as isize == m as isize);

    let est = match first {
        Some(k) => {
            let n_hat = rank_at(k + 1).saturating_sub(m * (k + 1));
            let stable = (k + 1..depths).all(|j| rank_at(j + 1) == rank_at(j) + m);
            let consistent = n_hat == lower_bound && rank_at(k + 1) >= m * (k + 1);
            ComplexityEstimate {
                rank_profile: profile.clone(),
                n_min_hat: if consistent { n_hat } else { lower_bound },
                lag_hat: k,
                trusted: stable && consistent,
                n_min_lower_bound: lower_bound,
            }
        }
        None => ComplexityEstimate {
            rank_profile: profile.clone(),
            n_min_hat: lower_bound,
            lag_hat: lag_bound,
            trusted: false,
            n_min_lower_bound: lower_bound,
        },
    };
    Ok(est)
}

/// Orthonormal basis of `im H` with window equal to the Hankel depth.
pub fn behavior_basis_from_data(h: &HankelMatrix, tol: RankTol) -> Result<BehaviorBasis> {
    BehaviorBasis::new(range_basis(h.matrix(), tol), h.depth(), h.q())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{random_controllable_system, random_inputs, StateSpace};
    use nalgebra::DVector;

    fn scalar_io(u: &[f64], y: &[f64]) -> Trajectory {
        let us: Vec<_> = u.iter().map(|&x| DVector::from_element(1, x)).collect();
        let ys: Vec<_> = y.iter().map(|&x| DVector::from_element(1, x)).collect();
        Trajectory::from_io(&us, &ys).unwrap()
    }

    #[test]
    fn hankel_definition() {
        let w = scalar_io(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]);
        let h = hankel(&w, 2).unwrap();
        assert_eq!(h.matrix().shape(), (4, 2));
        assert_eq!(h.matrix().column(0).as_slice(), &[1.0, 10.0, 2.0, 20.0]);
        assert_eq!(h.matrix().column(1).as_slice(), &[2.0, 20.0, 3.0, 30.0]);
        let full = hankel(&w, 3).unwrap();
        assert_eq!(full.width(), 1);
        assert!(hankel(&w, 0).is_err());
        assert!(hankel(&w, 4).is_err());
    }

    #[test]
    fn memoryless_estimate() {
        let u = [1.0, -1.0, 2.0, 1.0];
        let y: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
        let w = scalar_io(&u, &y);
        let est = estimate_complexity(&w, 1, 1, RankTol::default()).unwrap();
        assert_eq!(est.rank_profile[0], 1);
        assert_eq!((est.lag_hat, est.n_min_hat), (0, 0));
        assert!(est.trusted);
    }

    #[test]
    fn integrator_estimate() {
        let sys = StateSpace::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.0),
        )
        .unwrap();
        let u = random_inputs(1, 30, 3);
        let w = sys.simulate(&DVector::from_element(1, 0.3), &u).unwrap().trajectory;
        let est = estimate_complexity(&w, 1, 2, RankTol::default()).unwrap();
        assert_eq!(est.rank_profile, vec![2, 3, 4]);
        assert_eq!((est.lag_hat, est.n_min_hat), (1, 1));
        assert!(est.trusted);
    }

    #[test]
    fn zero_data_is_untrusted() {
        let w = scalar_io(&[0.0; 6], &[0.0; 6]);
        let est = estimate_complexity(&w, 1, 2, RankTol::default()).unwrap();
        assert_eq!(est.rank_profile, vec![0, 0, 0]);
        assert!(!est.trusted);
    }

    #[test]
    fn short_data_rejected() {
        let w = scalar_io(&[1.0, 2.0], &[1.0, 2.0]);
        assert!(matches!(
            estimate_complexity(&w, 1, 1, RankTol::default()),
            Err(Error::TrajectoryTooShort { .. })
        ));
    }

    #[test]
    fn basis_spans_hankel_columns() {
        let sys = random_controllable_system(3, 1, 2, 11).unwrap();
        let u = random_inputs(1, 60, 12);
        let w = sys.simulate(&DVector::zeros(3), &u).unwrap().trajectory;
        let h = hankel(&w, 4).unwrap();
        let g = behavior_basis_from_data(&h, RankTol::default()).unwrap();
        let gm = g.matrix();
        assert!((gm.transpose() * gm - DMatrix::identity(gm.ncols(), gm.ncols())).amax() < 1e-12);
        let resid = h.matrix() - gm * (gm.transpose() * h.matrix());
        assert!(resid.amax() < 1e-10 * (1.0 + h.matrix().amax()));
        assert_eq!(g.dim(), 3 + 4);
    }
}
