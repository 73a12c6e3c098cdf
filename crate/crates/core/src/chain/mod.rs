//! Finite absorbing Markov chains as run-length models.
//!
//! A chart is described by the transient-to-transient block `Q` of its
//! chain; the alarm is the single absorbing state, reached from state `i`
//! with probability `1 - sum_j Q[i][j]`. Everything here works on `Q` alone:
//! ARL vectors, the quasi-stationary (conditional steady-state) vector, the
//! cyclical steady-state vector after restarts, CED sequences and
//! state-occupancy profiles.

pub mod linalg;

use crate::error::{Error, Result};
pub use linalg::{DenseLu, DenseMatrix, ResolventSolver, SolverKind, SparseLu, SparseMatrix};

/// Power-iteration budget.
pub const EIGEN_MAX_ITER: usize = 100_000;
const EIGEN_RHO_TOL: f64 = 1e-13;
const EIGEN_VEC_TOL: f64 = 1e-12;

/// CED convergence: successive differences below this for three taus in a row.
pub const CED_CONVERGENCE_TOL: f64 = 1e-9;
const RENORMALIZE_BELOW: f64 = 1e-200;
const UNDERFLOW_BELOW: f64 = 1e-300;

/// Transient block of a chart's Markov chain plus its starting law.
#[derive(Debug, Clone)]
pub struct MarkovModel {
    pub q: SparseMatrix,
    pub labels: Vec<String>,
    /// Starting distribution over the transient states.
    pub init: Vec<f64>,
    /// State with the largest out-of-control ARL (no useful memory).
    pub worst_idx: usize,
    /// State the chart is reset to after a (false) alarm.
    pub restart_idx: usize,
}

impl MarkovModel {
    /// Checks the structural invariants: square substochastic `Q`, matching
    /// labels and init, init summing to one.
    pub fn new(q: SparseMatrix, labels: Vec<String>, init: Vec<f64>, worst_idx: usize, restart_idx: usize) -> Result<Self> {
        let n = q.n_rows();
        if !q.is_square() {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: q.n_cols(),
            });
        }
        for len in [labels.len(), init.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if worst_idx >= n || restart_idx >= n {
            return Err(Error::InvalidParameter("state index out of range".into()));
        }
        for (i, s) in q.row_sums().into_iter().enumerate() {
            if s > 1.0 + 1e-12 {
                return Err(Error::InvalidParameter(format!("row {i} of Q sums to {s} > 1")));
            }
        }
        for i in 0..n {
            if q.row(i).any(|(_, v)| v < 0.0) {
                return Err(Error::InvalidParameter(format!("row {i} of Q has a negative entry")));
            }
        }
        let mass: f64 = init.iter().sum();
        if (mass - 1.0).abs() > 1e-12 || init.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(format!("init must be a probability vector (sums to {mass})")));
        }
        Ok(Self {
            q,
            labels,
            init,
            worst_idx,
            restart_idx,
        })
    }

    pub fn n_states(&self) -> usize {
        self.q.n_rows()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Same states and init with a different transition block (another shift).
    pub fn with_q(&self, q: SparseMatrix) -> Result<Self> {
        Self::new(q, self.labels.clone(), self.init.clone(), self.worst_idx, self.restart_idx)
    }
}

/// Zero-state ARL, dominant eigenvalue and the steady-state ARLs of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLengthSummary {
    pub arl_zero: f64,
    /// Dominant eigenvalue of the in-control `Q`.
    pub rho: f64,
    /// Conditional steady-state ARL.
    pub d1: f64,
    /// Cyclical steady-state ARL, restart at `restart_idx`.
    pub d2: f64,
    pub d3: Option<f64>,
    pub d4: Option<f64>,
}

/// `D_1 .. D_tau_max` with the limit `psi_1' ell_oc`.
#[derive(Debug, Clone, PartialEq)]
pub struct CedProfile {
    /// `values[t - 1]` is `D_t`.
    pub values: Vec<f64>,
    pub limit: f64,
    /// First tau at which three successive differences fell below the tolerance.
    pub converged_at: Option<usize>,
    /// Set when the in-control survival mass vanished; `values` stops there.
    pub underflow_at: Option<usize>,
}

impl CedProfile {
    /// `D_tau` with 1-based tau.
    pub fn at(&self, tau: usize) -> Option<f64> {
        tau.checked_sub(1).and_then(|i| self.values.get(i)).copied()
    }

    /// 1-based tau of the largest `D_tau`.
    pub fn argmax(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
            .0
            + 1
    }
}

/// Conditional probabilities of sitting in one state given survival.
#[derive(Debug, Clone, PartialEq)]
pub struct StateProfile {
    /// `probs[i - 1] = P(state after i observations = target | L > i)`.
    pub probs: Vec<f64>,
    /// Quasi-stationary probability of the target state.
    pub steady: f64,
}

/// `ell = (I - Q)^{-1} 1`, with solver chosen from the sparsity of `Q`.
pub fn arl_vector(q: &SparseMatrix) -> Result<Vec<f64>> {
    arl_vector_with(q, SolverKind::auto(q))
}

pub fn arl_vector_with(q: &SparseMatrix, kind: SolverKind) -> Result<Vec<f64>> {
    let solver = ResolventSolver::new(q, kind)?;
    let ell = solver.solve_refined(q, &vec![1.0; q.n_rows()]);
    check_arl(&ell)?;
    Ok(ell)
}

fn check_arl(ell: &[f64]) -> Result<()> {
    // Entries below 1 or non-finite mean the solve hit a (numerically) singular system.
    if let Some((i, v)) = ell.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 1.0 - 1e-9) {
        return Err(Error::NonAbsorbing(format!("ARL entry {i} = {v}")));
    }
    Ok(())
}

/// `init' ell`.
pub fn zero_state_arl(model: &MarkovModel, ell: &[f64]) -> Result<f64> {
    dot_checked(&model.init, ell)
}

fn dot_checked(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Dominant eigenpair of `Q'` by normalized power iteration.
///
/// The returned vector is entrywise non-negative and sums to one. States
/// that cannot be re-entered (head-start bookkeeping) end up with zero mass.
pub fn dominant_left_eigen(q: &SparseMatrix) -> Result<(f64, Vec<f64>)> {
    let n = q.n_rows();
    dominant_left_eigen_from(q, vec![1.0 / n as f64; n])
}

/// Power iteration started from a caller-supplied vector (normalized here).
pub fn dominant_left_eigen_from(q: &SparseMatrix, start: Vec<f64>) -> Result<(f64, Vec<f64>)> {
    let n = q.n_rows();
    if start.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: start.len() });
    }
    let mut psi = start;
    normalize(&mut psi);
    let mut next = vec![0.0; n];
    let mut rho_prev = f64::NAN;
    let mut change = f64::INFINITY;
    let mut prev_change = f64::INFINITY;
    for _ in 0..EIGEN_MAX_ITER {
        q.vec_mul_into(&psi, &mut next);
        let rho: f64 = next.iter().sum();
        if !(rho > 0.0) {
            return Err(Error::NonAbsorbing("Q' annihilates the iterate; no dominant eigenvalue".into()));
        }
        change = 0.0;
        for (p, x) in psi.iter_mut().zip(&next) {
            let v = x / rho;
            change = change.max((v - *p).abs());
            *p = v;
        }
        // Geometric tail of the remaining steps, from the observed contraction.
        let ratio = (change / prev_change).min(0.999);
        let remaining = if change == 0.0 { 0.0 } else { change * ratio / (1.0 - ratio) };
        let settled = (rho - rho_prev).abs() < EIGEN_RHO_TOL && change < EIGEN_VEC_TOL && remaining < 1e-2 * EIGEN_VEC_TOL;
        rho_prev = rho;
        prev_change = change;
        if settled {
            return Ok((rho, psi));
        }
    }
    Err(Error::EigenNonConvergence {
        iterations: EIGEN_MAX_ITER,
        change,
    })
}

/// Like [`dominant_left_eigen`], but starts from the occupation measure of
/// `init`, which is already dominated by the slowest mode when absorption
/// is rare.
pub fn dominant_left_eigen_warm(q: &SparseMatrix, init: &[f64]) -> Result<(f64, Vec<f64>)> {
    let solver = ResolventSolver::with_transpose(q, SolverKind::auto(q))?;
    let occ = solver.solve_transposed(init);
    if occ.iter().any(|v| !v.is_finite() || *v < -1e-9) {
        return Err(Error::NonAbsorbing("occupation measure is not a valid measure".into()));
    }
    let start: Vec<f64> = occ.into_iter().map(|v| v.max(0.0)).collect();
    dominant_left_eigen_from(q, start)
}

fn normalize(v: &mut [f64]) -> f64 {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    s
}

/// Cyclical steady-state vector: `(I - Q')^{-1} e_restart`, normalized.
pub fn cyclical_vector(q: &SparseMatrix, restart_idx: usize) -> Result<Vec<f64>> {
    let n = q.n_rows();
    if restart_idx >= n {
        return Err(Error::InvalidParameter(format!("restart state {restart_idx} out of range")));
    }
    let solver = ResolventSolver::with_transpose(q, SolverKind::auto(q))?;
    let mut e = vec![0.0; n];
    e[restart_idx] = 1.0;
    let mut psi = solver.solve_transposed_refined(q, &e);
    if psi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonAbsorbing("cyclical vector is not finite".into()));
    }
    normalize(&mut psi);
    Ok(psi)
}

/// Stationary law of `Q` after scaling every row to sum to one.
///
/// This is the classic but incorrect recipe for the conditional
/// steady-state vector; it is kept to quantify how far off it is. Rows with
/// no transient mass become self-loops.
pub fn crosier_wrong_vector(q: &SparseMatrix) -> Result<Vec<f64>> {
    let n = q.n_rows();
    let sums = q.row_sums();
    let mut triplets = Vec::with_capacity(q.nnz() + n);
    for (i, &s) in sums.iter().enumerate() {
        if s > 0.0 {
            triplets.extend(q.row(i).map(|(c, v)| (i, c, v / s)));
        } else {
            triplets.push((i, i, 1.0));
        }
    }
    let p = SparseMatrix::from_triplets(n, n, triplets);
    // Regenerative form: the stationary law is proportional to the expected
    // visits before returning to a fixed state r, i.e. the occupation
    // measure of P with transitions into r removed.
    let r = n - 1;
    let killed = SparseMatrix::from_triplets(
        n,
        n,
        (0..n).flat_map(|i| p.row(i).filter(|&(c, _)| c != r).map(move |(c, v)| (i, c, v))).collect(),
    );
    if let Ok(pi) = cyclical_vector(&killed, r) {
        if pi.iter().all(|v| *v >= 0.0) {
            return Ok(pi);
        }
    }
    // Lazy chain 0.5 (I + P) has the same stationary law and cannot be periodic.
    let mut lazy: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 0.5)).collect();
    for i in 0..n {
        lazy.extend(p.row(i).map(|(c, v)| (i, c, 0.5 * v)));
    }
    let lazy = SparseMatrix::from_triplets(n, n, lazy);
    let (_, pi) = dominant_left_eigen(&lazy)?;
    Ok(pi)
}

/// `psi' ell_oc`.
pub fn steady_state_arl(psi: &[f64], ell_oc: &[f64]) -> Result<f64> {
    dot_checked(psi, ell_oc)
}

/// Conditional expected delays `D_tau = E(L - tau + 1 | L >= tau)` for a
/// change at observation `tau`, `tau = 1..=tau_max`.
pub fn ced_profile(q_ic: &SparseMatrix, q_oc: &SparseMatrix, init: &[f64], tau_max: usize) -> Result<CedProfile> {
    let n = q_ic.n_rows();
    if q_oc.n_rows() != n || init.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: q_oc.n_rows().min(init.len()),
        });
    }
    if tau_max == 0 {
        return Err(Error::InvalidParameter("tau_max must be at least 1".into()));
    }
    let ell_oc = arl_vector(q_oc)?;
    let (_, psi) = dominant_left_eigen_warm(q_ic, init)?;
    let limit = steady_state_arl(&psi, &ell_oc)?;
    ced_from_parts(q_ic, &ell_oc, init, tau_max, limit)
}

/// CED sequence when `ell_oc` and the limit are already known.
pub fn ced_from_parts(q_ic: &SparseMatrix, ell_oc: &[f64], init: &[f64], tau_max: usize, limit: f64) -> Result<CedProfile> {
    let mut u = init.to_vec();
    let mut next = vec![0.0; u.len()];
    let mut values = Vec::with_capacity(tau_max);
    let mut underflow_at = None;
    let mut converged_at = None;
    let mut streak = 0;
    for tau in 1..=tau_max {
        if tau > 1 {
            q_ic.vec_mul_into(&u, &mut next);
            std::mem::swap(&mut u, &mut next);
        }
        let mass: f64 = u.iter().sum();
        if !(mass >= UNDERFLOW_BELOW) {
            underflow_at = Some(tau);
            break;
        }
        if mass < RENORMALIZE_BELOW {
            normalize(&mut u);
        }
        let d = u.iter().zip(ell_oc).map(|(a, b)| a * b).sum::<f64>() / u.iter().sum::<f64>();
        if let Some(&prev) = values.last() {
            let prev: f64 = prev;
            if (d - prev).abs() < CED_CONVERGENCE_TOL {
                streak += 1;
                if streak == 3 && converged_at.is_none() {
                    converged_at = Some(tau);
                }
            } else {
                streak = 0;
            }
        }
        values.push(d);
    }
    Ok(CedProfile {
        values,
        limit,
        converged_at,
        underflow_at,
    })
}

/// `P(state_i = target | L > i)` for `i = 1..=n` plus the quasi-stationary level.
pub fn worst_state_profile(q_ic: &SparseMatrix, init: &[f64], worst_idx: usize, n: usize) -> Result<StateProfile> {
    let dim = q_ic.n_rows();
    if init.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: init.len() });
    }
    if worst_idx >= dim {
        return Err(Error::InvalidParameter(format!("state {worst_idx} out of range")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("profile length must be at least 1".into()));
    }
    let mut u = init.to_vec();
    let mut next = vec![0.0; dim];
    let mut probs = Vec::with_capacity(n);
    for i in 1..=n {
        q_ic.vec_mul_into(&u, &mut next);
        std::mem::swap(&mut u, &mut next);
        let mass = normalize(&mut u);
        if !(mass > 0.0) {
            return Err(Error::SurvivalUnderflow { tau: i });
        }
        probs.push(u[worst_idx]);
    }
    let (_, psi) = dominant_left_eigen_warm(q_ic, init)?;
    Ok(StateProfile {
        probs,
        steady: psi[worst_idx],
    })
}

/// Everything the study needs for one design at one shift.
///
/// `model_ic` supplies the steady-state vectors, `model_oc` the ARLs.
/// `alt_restart` adds the cyclical ARL for a second restart state (`d3`);
/// `with_crosier` adds the row-normalized variant (`d4`).
pub fn summarize(model_ic: &MarkovModel, model_oc: &MarkovModel, alt_restart: Option<usize>, with_crosier: bool) -> Result<RunLengthSummary> {
    let ell_oc = arl_vector(&model_oc.q)?;
    let arl_zero = zero_state_arl(model_oc, &ell_oc)?;
    let (rho, psi1) = dominant_left_eigen_warm(&model_ic.q, &model_ic.init)?;
    let d1 = steady_state_arl(&psi1, &ell_oc)?;
    let d2 = steady_state_arl(&cyclical_vector(&model_ic.q, model_ic.restart_idx)?, &ell_oc)?;
    let d3 = alt_restart
        .map(|r| cyclical_vector(&model_ic.q, r).and_then(|psi| steady_state_arl(&psi, &ell_oc)))
        .transpose()?;
    let d4 = with_crosier
        .then(|| crosier_wrong_vector(&model_ic.q).and_then(|psi| steady_state_arl(&psi, &ell_oc)))
        .transpose()?;
    Ok(RunLengthSummary {
        arl_zero,
        rho,
        d1,
        d2,
        d3,
        d4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(c: f64) -> SparseMatrix {
        SparseMatrix::from_triplets(1, 1, vec![(0, 0, c)])
    }

    /// Gap-counter chain of the side-insensitive 2-of-(H+1) rule written out
    /// by hand: states 0..H, state H = no signal within the window.
    fn s1(h: usize, p: f64) -> SparseMatrix {
        let q = 1.0 - p;
        let mut t = Vec::new();
        for j in 0..h {
            t.push((j, j + 1, q));
        }
        t.push((h, 0, p));
        t.push((h, h, q));
        SparseMatrix::from_triplets(h + 1, h + 1, t)
    }

    #[test]
    fn immediate_absorption() {
        let ell = arl_vector(&SparseMatrix::from_triplets(1, 1, vec![])).unwrap();
        assert_eq!(ell, vec![1.0]);
    }

    #[test]
    fn hand_evaluated_gap_chain() {
        // H = 1, p = q = 1/2: ell_0 = 1/r = 4, ell_1 = 1/r + 1/p = 6.
        let ell = arl_vector(&s1(1, 0.5)).unwrap();
        assert!((ell[0] - 4.0).abs() < 1e-14);
        assert!((ell[1] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_eigen_and_vectors() {
        let (rho, psi) = dominant_left_eigen(&scalar(0.3)).unwrap();
        assert!((rho - 0.3).abs() < 1e-15);
        assert_eq!(psi, vec![1.0]);
        assert_eq!(cyclical_vector(&scalar(0.3), 0).unwrap(), vec![1.0]);
        assert_eq!(crosier_wrong_vector(&scalar(0.0)).unwrap(), vec![1.0]);
        let ced = ced_profile(&scalar(0.5), &scalar(0.5), &[1.0], 5).unwrap();
        assert!(ced.values.iter().all(|&d| (d - 2.0).abs() < 1e-14));
        let prof = worst_state_profile(&scalar(0.5), &[1.0], 0, 4).unwrap();
        assert_eq!(prof.probs, vec![1.0; 4]);
    }

    #[test]
    fn ced_reports_underflow() {
        // Survival mass 1, 1e-160, 1e-320: the third step underflows.
        let q = scalar(1e-160);
        let ced = ced_profile(&q, &q, &[1.0], 5).unwrap();
        assert_eq!(ced.underflow_at, Some(3));
        assert_eq!(ced.values.len(), 2);
        assert!((ced.limit - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_mass_reads_off_entries() {
        let q = s1(3, 0.1);
        let ell = arl_vector(&q).unwrap();
        let mut psi = vec![0.0; 4];
        psi[2] = 1.0;
        assert_eq!(steady_state_arl(&psi, &ell).unwrap(), ell[2]);
        let model = MarkovModel::new(q, (0..4).map(|i| i.to_string()).collect(), psi.clone(), 3, 0).unwrap();
        assert_eq!(zero_state_arl(&model, &ell).unwrap(), ell[2]);
        assert!(steady_state_arl(&[1.0], &ell).is_err());
    }

    #[test]
    fn eigen_residual_and_delta_zero_limit() {
        let q = s1(5, 0.03);
        let (rho, psi) = dominant_left_eigen(&q).unwrap();
        let qpsi = q.vec_mul(&psi);
        for (a, b) in qpsi.iter().zip(&psi) {
            assert!((a - rho * b).abs() < 1e-12);
        }
        // At delta = 0 the CED limit is 1 / (1 - rho).
        let ced = ced_profile(&q, &q, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 400).unwrap();
        assert!((ced.limit - 1.0 / (1.0 - rho)).abs() < 1e-8 * ced.limit);
        assert!((ced.values[399] - ced.limit).abs() < 1e-6 * ced.limit);
        assert!(ced.converged_at.is_some());
    }

    #[test]
    fn warm_and_cold_eigen_agree() {
        let q = s1(4, 0.07);
        let (r1, p1) = dominant_left_eigen(&q).unwrap();
        let (r2, p2) = dominant_left_eigen_warm(&q, &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((r1 - r2).abs() < 1e-12);
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn model_validation() {
        let q = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 0.7), (0, 1, 0.4)]);
        let labels = vec!["a".to_string(), "b".to_string()];
        assert!(MarkovModel::new(q, labels.clone(), vec![1.0, 0.0], 0, 0).is_err());
        let q = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 0.5)]);
        assert!(MarkovModel::new(q.clone(), labels.clone(), vec![0.5, 0.4], 0, 0).is_err());
        assert!(MarkovModel::new(q, labels, vec![0.5, 0.5], 0, 0).is_ok());
    }
}
