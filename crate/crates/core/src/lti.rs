//! State-space realizations, trajectories and the model-side dissipativity oracle.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{dims, Error, Result};
use crate::linalg::{numerical_rank, pinv, vstack, hstack, RankTol};
use crate::qdf::SupplyRate;
use crate::sdp::{solve_psd_feasibility, AffineSymMap, CongruenceTerm, FeasResult, SolverOptions};

/// A realization `x(t+1) = A x(t) + B u(t)`, `y(t) = C x(t) + D u(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let (p, m) = d.shape();
        let n = a.nrows();
        if m == 0 || p == 0 {
            return Err(Error::InvalidArgument(format!(
                "need at least one input and one output, D is {p}x{m}"
            )));
        }
        if a.ncols() != n {
            return Err(dims("A", format!("{n}x{n}"), format!("{}x{}", n, a.ncols())));
        }
        if b.shape() != (n, m) {
            return Err(dims("B", format!("{n}x{m}"), format!("{}x{}", b.nrows(), b.ncols())));
        }
        if c.shape() != (p, n) {
            return Err(dims("C", format!("{p}x{n}"), format!("{}x{}", c.nrows(), c.ncols())));
        }
        Ok(StateSpace { a, b, c, d })
    }

    /// Memoryless system `y = D u`.
    pub fn static_gain(d: DMatrix<f64>) -> Result<Self> {
        let (p, m) = d.shape();
        Self::new(DMatrix::zeros(0, 0), DMatrix::zeros(0, m), DMatrix::zeros(p, 0), d)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.d.ncols()
    }
    pub fn p(&self) -> usize {
        self.d.nrows()
    }
    pub fn q(&self) -> usize {
        self.m() + self.p()
    }

    /// Similarity transform `(T A T^-1, T B, C T^-1, D)`.
    pub fn transformed(&self, t: &DMatrix<f64>) -> Result<Self> {
        let n = self.n();
        if t.shape() != (n, n) {
            return Err(dims("similarity transform", format!("{n}x{n}"), format!("{}x{}", t.nrows(), t.ncols())));
        }
        let tinv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("similarity transform is singular".into()))?;
        Self::new(t * &self.a * &tinv, t * &self.b, &self.c * &tinv, self.d.clone())
    }

    pub fn simulate(&self, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Result<StateTrajectory> {
        if x0.len() != self.n() {
            return Err(dims("initial state", self.n(), x0.len()));
        }
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("input sequence is empty".into()));
        }
        let mut states = Vec::with_capacity(inputs.len() + 1);
        let mut samples = Vec::with_capacity(inputs.len());
        let mut x = x0.clone();
        for (t, u) in inputs.iter().enumerate() {
            if u.len() != self.m() {
                return Err(Error::DimensionMismatch {
                    context: "input sample",
                    expected: self.m().to_string(),
                    got: format!("{} at t={t}", u.len()),
                });
            }
            let y = &self.c * &x + &self.d * u;
            let next = &self.a * &x + &self.b * u;
            samples.push(stack_io(u, &y));
            states.push(x);
            x = next;
        }
        states.push(x);
        let trajectory = Trajectory::new(self.m(), self.p(), samples)?;
        Ok(StateTrajectory { states, trajectory })
    }

    /// `O_k = [C; CA; ...; CA^{k-1}]`, `(pk) x n`.
    pub fn observability_matrix(&self, k: usize) -> DMatrix<f64> {
        let (n, p) = (self.n(), self.p());
        let mut out = DMatrix::zeros(p * k, n);
        let mut row = self.c.clone();
        for i in 0..k {
            out.view_mut((i * p, 0), (p, n)).copy_from(&row);
            row = &row * &self.a;
        }
        out
    }

    /// `C_k = [A^{k-1}B, ..., AB, B]`, `n x (mk)`.
    pub fn controllability_matrix(&self, k: usize) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut out = DMatrix::zeros(n, m * k);
        let mut blk = self.b.clone();
        for i in 0..k {
            out.view_mut((0, (k - 1 - i) * m), (n, m)).copy_from(&blk);
            blk = &self.a * &blk;
        }
        out
    }

    /// Block lower-triangular Toeplitz matrix of Markov parameters, `(pk) x (mk)`.
    pub fn toeplitz_markov(&self, k: usize) -> DMatrix<f64> {
        let (m, p) = (self.m(), self.p());
        // markov[j] = D for j = 0, C A^{j-1} B for j >= 1
        let mut markov = Vec::with_capacity(k);
        if k > 0 {
            markov.push(self.d.clone());
        }
        let mut ab = self.b.clone();
        for _ in 1..k {
            markov.push(&self.c * &ab);
            ab = &self.a * &ab;
        }
        let mut out = DMatrix::zeros(p * k, m * k);
        for i in 0..k {
            for j in 0..=i {
                out.view_mut((i * p, j * m), (p, m)).copy_from(&markov[i - j]);
            }
        }
        out
    }

    pub fn lag(&self, tol: RankTol) -> usize {
        let n = self.n();
        let mut prev = 0;
        for k in 0..=n {
            let next = numerical_rank(&self.observability_matrix(k + 1), tol);
            if next == prev {
                return k;
            }
            prev = next;
        }
        n
    }

    pub fn is_observable(&self, tol: RankTol) -> bool {
        numerical_rank(&self.observability_matrix(self.n()), tol) == self.n()
    }

    pub fn is_controllable(&self, tol: RankTol) -> bool {
        numerical_rank(&self.controllability_matrix(self.n()), tol) == self.n()
    }

    fn a_power(&self, k: usize) -> DMatrix<f64> {
        let mut out = DMatrix::identity(self.n(), self.n());
        for _ in 0..k {
            out = &self.a * out;
        }
        out
    }

    /// Matrices `Z1, Z2` with `x(t) = Z1 w_[t,t+l-1]` and `x(t+l) = Z2 w_[t,t+l-1]`.
    pub fn state_reconstruction_maps(&self, tol: RankTol) -> Result<StateMaps> {
        let n = self.n();
        if n == 0 {
            return Ok(StateMaps {
                z1: DMatrix::zeros(0, 0),
                z2: DMatrix::zeros(0, 0),
                lag: 0,
            });
        }
        if !self.is_observable(tol) {
            return Err(Error::NotObservable);
        }
        let lag = self.lag(tol);
        let obs = self.observability_matrix(lag);
        let obs_pinv = pinv(&obs, tol);
        let toep = self.toeplitz_markov(lag);
        let ctrb = self.controllability_matrix(lag);
        let a_l = self.a_power(lag);

        let z1_uy = hstack(&[&(-(&obs_pinv * &toep)), &obs_pinv], n);
        let z2_uy = hstack(&[&(ctrb - &a_l * &obs_pinv * &toep), &(&a_l * &obs_pinv)], n);
        let perm_t = uy_to_w(self.m(), self.p(), lag).transpose();
        Ok(StateMaps {
            z1: z1_uy * &perm_t,
            z2: z2_uy * &perm_t,
            lag,
        })
    }

    /// Model-side dissipation LMI in the storage matrix `P`, acting on `(x, u)`:
    /// `[I 0; A B]^T diag(P, -P) [I 0; A B] + [0 I; C D]^T S [0 I; C D]`.
    pub fn dissipation_lmi(&self, supply: &SupplyRate) -> Result<AffineSymMap> {
        let s = supply.static_matrix()?;
        if s.nrows() != self.q() || supply.m() != self.m() {
            return Err(dims("supply rate", format!("q={} with m={}", self.q(), self.m()), format!("q={} with m={}", s.nrows(), supply.m())));
        }
        let (n, m, p) = (self.n(), self.m(), self.p());
        let map_uy = vstack(
            &[
                &hstack(&[&DMatrix::zeros(m, n), &DMatrix::identity(m, m)], m),
                &hstack(&[&self.c, &self.d], p),
            ],
            n + m,
        );
        let k = map_uy.transpose() * s * &map_uy;
        let now = hstack(&[&DMatrix::identity(n, n), &DMatrix::zeros(n, m)], n);
        let next = hstack(&[&self.a, &self.b], n);
        AffineSymMap::new(
            n,
            k,
            vec![
                CongruenceTerm::congruence(now.transpose(), 1.0),
                CongruenceTerm::congruence(next.transpose(), -1.0),
            ],
        )
    }

    /// Searches for a storage matrix `P >= 0` certifying dissipativity.
    pub fn model_dissipativity_solve(&self, supply: &SupplyRate, opts: &SolverOptions) -> Result<FeasResult> {
        solve_psd_feasibility(&self.dissipation_lmi(supply)?, opts)
    }

    /// `Some(P)` when a storage matrix was found at tolerance.
    pub fn model_dissipativity_check(&self, supply: &SupplyRate, opts: &SolverOptions) -> Result<Option<DMatrix<f64>>> {
        let res = self.model_dissipativity_solve(supply, opts)?;
        Ok(if res.is_feasible() { res.x } else { None })
    }
}

/// Permutation `Pi` with `w_[t,t+d-1] = Pi [u_[t,t+d-1]; y_[t,t+d-1]]`.
pub fn uy_to_w(m: usize, p: usize, d: usize) -> DMatrix<f64> {
    let q = m + p;
    let mut pi = DMatrix::zeros(q * d, q * d);
    for t in 0..d {
        for i in 0..m {
            pi[(t * q + i, t * m + i)] = 1.0;
        }
        for j in 0..p {
            pi[(t * q + m + j, m * d + t * p + j)] = 1.0;
        }
    }
    pi
}

fn stack_io(u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mut w = DVector::zeros(u.len() + y.len());
    w.rows_mut(0, u.len()).copy_from(u);
    w.rows_mut(u.len(), y.len()).copy_from(y);
    w
}

/// Input-output samples `w(t) = (u(t), y(t))`, `t = 0..T-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    m: usize,
    p: usize,
    samples: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(m: usize, p: usize, samples: Vec<DVector<f64>>) -> Result<Self> {
        if m == 0 || p == 0 {
            return Err(Error::InvalidArgument("need m >= 1 and p >= 1".into()));
        }
        if samples.is_empty() {
            return Err(Error::TrajectoryTooShort { needed: 1, got: 0 });
        }
        for (t, w) in samples.iter().enumerate() {
            if w.len() != m + p {
                return Err(Error::DimensionMismatch {
                    context: "trajectory sample",
                    expected: (m + p).to_string(),
                    got: format!("{} at t={t}", w.len()),
                });
            }
        }
        Ok(Trajectory { m, p, samples })
    }

    pub fn from_io(inputs: &[DVector<f64>], outputs: &[DVector<f64>]) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(dims("output sequence length", inputs.len(), outputs.len()));
        }
        let m = inputs.first().map_or(0, |u| u.len());
        let p = outputs.first().map_or(0, |y| y.len());
        if inputs.iter().any(|u| u.len() != m) || outputs.iter().any(|y| y.len() != p) {
            return Err(Error::InvalidArgument("ragged input/output samples".into()));
        }
        let samples = inputs.iter().zip(outputs).map(|(u, y)| stack_io(u, y)).collect();
        Self::new(m, p, samples)
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
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }
    pub fn sample(&self, t: usize) -> &DVector<f64> {
        &self.samples[t]
    }
    pub fn input(&self, t: usize) -> DVector<f64> {
        self.samples[t].rows(0, self.m).into_owned()
    }
    pub fn output(&self, t: usize) -> DVector<f64> {
        self.samples[t].rows(self.m, self.p).into_owned()
    }

    /// Stacked window `w_[start, start+len-1]`.
    pub fn window(&self, start: usize, len: usize) -> Result<DVector<f64>> {
        if start + len > self.len() {
            return Err(Error::WindowOutOfRange {
                start,
                end: (start + len).saturating_sub(1),
                len: self.len(),
            });
        }
        let q = self.q();
        let mut out = DVector::zeros(q * len);
        for i in 0..len {
            out.rows_mut(i * q, q).copy_from(&self.samples[start + i]);
        }
        Ok(out)
    }

    pub fn input_window(&self, start: usize, len: usize) -> Result<DVector<f64>> {
        let w = self.window(start, len)?;
        let q = self.q();
        Ok(DVector::from_fn(self.m * len, |k, _| w[(k / self.m) * q + k % self.m]))
    }

    pub fn output_window(&self, start: usize, len: usize) -> Result<DVector<f64>> {
        let w = self.window(start, len)?;
        let q = self.q();
        Ok(DVector::from_fn(self.p * len, |k, _| w[(k / self.p) * q + self.m + k % self.p]))
    }
}

/// Simulated states `x(0..=T)` with the matching input-output trajectory.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    pub states: Vec<DVector<f64>>,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone)]
pub struct StateMaps {
    pub z1: DMatrix<f64>,
    pub z2: DMatrix<f64>,
    pub lag: usize,
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Seeded random controllable and observable realization with `rho(A) <= 0.95`.
pub fn random_controllable_system(n: usize, m: usize, p: usize, seed: u64) -> Result<StateSpace> {
    if m == 0 || p == 0 {
        return Err(Error::InvalidArgument("need m >= 1 and p >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = RankTol::default();
    loop {
        let mut a = uniform_matrix(&mut rng, n, n);
        let b = uniform_matrix(&mut rng, n, m);
        let c = uniform_matrix(&mut rng, p, n);
        let d = uniform_matrix(&mut rng, p, m);
        let rho = spectral_radius(&a);
        if rho > 0.95 {
            a *= 0.95 / rho;
        }
        let sys = StateSpace::new(a, b, c, d)?;
        if sys.is_controllable(tol) && sys.is_observable(tol) {
            return Ok(sys);
        }
    }
}

/// Seeded i.i.d. uniform `[-1, 1]` input sequence.
pub fn random_inputs(m: usize, len: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| DVector::from_fn(m, |_, _| rng.random_range(-1.0..=1.0)))
        .collect()
}

/// Seeded i.i.d. uniform `[-1, 1]` vector.
pub fn random_vector(len: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..=1.0))
}
