//! EWMA charts `Z_t = (1 - lambda) Z_{t-1} + lambda X_t`, `Z_0 = 0`.
//!
//! The continuous state is discretized with midpoint cells. With fixed
//! limits `+-c sqrt(lambda / (2 - lambda))` this gives one homogeneous chain.
//! With exact limits `+-c sigma_t` every step has its own grid of the same
//! node count spanning the current limits, and transitions go directly
//! from the grid at `t - 1` to the grid at `t`. Once `(1 - lambda)^(2t)`
//! drops below `1e-12` the limits are constant to machine precision and the
//! fixed-limit chain takes over.

use crate::chain::{self, CedProfile, MarkovModel, SparseMatrix};
use crate::error::{Error, Result};
use crate::gauss;

pub const DEFAULT_EWMA_GRID: usize = 401;
/// Steps after which the exact limits are treated as constant.
const HORIZON_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LimitStyle {
    /// `c sqrt((1 - (1 - lambda)^(2t)) lambda / (2 - lambda))`.
    Exact,
    /// `c sqrt(lambda / (2 - lambda))`.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwmaSpec {
    pub lambda: f64,
    pub c: f64,
    pub limit_style: LimitStyle,
    pub k2: Option<f64>,
    pub n_grid: usize,
}

impl EwmaSpec {
    pub fn new(lambda: f64, c: f64, limit_style: LimitStyle) -> Self {
        Self {
            lambda,
            c,
            limit_style,
            k2: None,
            n_grid: DEFAULT_EWMA_GRID,
        }
    }

    pub fn with_k2(mut self, k2: f64) -> Self {
        self.k2 = Some(k2);
        self
    }

    pub fn with_grid(mut self, n_grid: usize) -> Self {
        self.n_grid = n_grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidParameter(format!("lambda = {} must lie in (0, 1]", self.lambda)));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParameter(format!("c = {} must be positive", self.c)));
        }
        if self.n_grid < 101 || self.n_grid.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("n_grid = {} must be odd and >= 101", self.n_grid)));
        }
        if let Some(k2) = self.k2 {
            if !(k2 > 0.0) {
                return Err(Error::InvalidParameter(format!("k2 = {k2} must be positive")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let style = match self.limit_style {
            LimitStyle::Exact => "exact",
            LimitStyle::Fixed => "fixed",
        };
        match self.k2 {
            Some(_) => format!("Shewhart-EWMA({}, {style})", self.lambda),
            None => format!("EWMA({}, {style})", self.lambda),
        }
    }

    /// Asymptotic limit `c sqrt(lambda / (2 - lambda))`.
    pub fn asymptotic_limit(&self) -> f64 {
        self.c * (self.lambda / (2.0 - self.lambda)).sqrt()
    }

    /// Limit in force at observation `t >= 1`.
    pub fn limit_at(&self, t: usize) -> f64 {
        match self.limit_style {
            LimitStyle::Fixed => self.asymptotic_limit(),
            LimitStyle::Exact => {
                let decay = (1.0 - self.lambda).powi(2 * t as i32);
                self.asymptotic_limit() * (1.0 - decay).sqrt()
            }
        }
    }

    /// Number of steps with their own grid before the homogeneous chain.
    pub fn horizon(&self) -> usize {
        match self.limit_style {
            LimitStyle::Fixed => 1,
            LimitStyle::Exact => {
                let mut t = 1;
                while (1.0 - self.lambda).powi(2 * t as i32) >= HORIZON_TOL {
                    t += 1;
                }
                t
            }
        }
    }
}

/// Midpoint grid of `n` nodes on `[-half, half]`, or the single start point.
#[derive(Debug, Clone, Copy)]
enum Grid {
    Origin,
    Cells { half: f64, n: usize },
}

impl Grid {
    fn len(&self) -> usize {
        match *self {
            Grid::Origin => 1,
            Grid::Cells { n, .. } => n,
        }
    }

    fn node(&self, i: usize) -> f64 {
        match *self {
            Grid::Origin => 0.0,
            Grid::Cells { half, n } => -half + (i as f64 + 0.5) * 2.0 * half / n as f64,
        }
    }
}

/// Transition masses from state value `z` onto the cells of `to`.
struct Stepper {
    lambda: f64,
    k2: Option<f64>,
    delta: f64,
    bounds: Vec<f64>,
    masses: Vec<f64>,
}

impl Stepper {
    fn new(spec: &EwmaSpec, delta: f64) -> Self {
        Self {
            lambda: spec.lambda,
            k2: spec.k2,
            delta,
            bounds: Vec::with_capacity(spec.n_grid + 1),
            masses: Vec::with_capacity(spec.n_grid),
        }
    }

    fn row(&mut self, z: f64, to: Grid) -> &[f64] {
        let Grid::Cells { half, n } = to else {
            unreachable!("no transitions into the start point")
        };
        let w = 2.0 * half / n as f64;
        let carry = (1.0 - self.lambda) * z;
        self.bounds.clear();
        for j in 0..=n {
            let edge = if j == n { half } else { -half + j as f64 * w };
            let mut x = (edge - carry) / self.lambda;
            if let Some(k2) = self.k2 {
                x = x.clamp(-k2, k2);
            }
            self.bounds.push(x);
        }
        gauss::interval_masses(&self.bounds, self.delta, &mut self.masses);
        &self.masses
    }
}

fn grid_at(spec: &EwmaSpec, t: usize, horizon: usize) -> Grid {
    if t == 0 {
        Grid::Origin
    } else {
        let half = if t >= horizon { spec.asymptotic_limit() } else { spec.limit_at(t) };
        Grid::Cells { half, n: spec.n_grid }
    }
}

fn homogeneous_q(spec: &EwmaSpec, delta: f64) -> SparseMatrix {
    let grid = Grid::Cells {
        half: spec.asymptotic_limit(),
        n: spec.n_grid,
    };
    let mut stepper = Stepper::new(spec, delta);
    let mut triplets = Vec::with_capacity(spec.n_grid * spec.n_grid);
    for i in 0..spec.n_grid {
        let row = stepper.row(grid.node(i), grid);
        triplets.extend(row.iter().enumerate().filter(|(_, &m)| m > 0.0).map(|(j, &m)| (i, j, m)));
    }
    SparseMatrix::from_triplets(spec.n_grid, spec.n_grid, triplets)
}

/// Homogeneous chain on the asymptotic limits. For fixed limits this is the
/// chart's model; for exact limits it describes the chart after the
/// horizon. Starts at the center node (`Z_0 = 0`); the lowest node is
/// reported as the worst state (upward shifts), the center as restart.
pub fn ewma_model(spec: &EwmaSpec, delta: f64) -> Result<MarkovModel> {
    spec.validate()?;
    let n = spec.n_grid;
    let grid = Grid::Cells {
        half: spec.asymptotic_limit(),
        n,
    };
    let labels = (0..n).map(|i| format!("{:.6}", grid.node(i))).collect();
    let mut init = vec![0.0; n];
    init[n / 2] = 1.0;
    MarkovModel::new(homogeneous_q(spec, delta), labels, init, 0, n / 2)
}

/// One forward step of the (unnormalized) survival distribution.
fn propagate(stepper: &mut Stepper, m: &[f64], from: Grid, to: Grid) -> Vec<f64> {
    let mut next = vec![0.0; to.len()];
    for (i, &mass) in m.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let row = stepper.row(from.node(i), to);
        for (acc, p) in next.iter_mut().zip(row) {
            *acc += mass * p;
        }
    }
    next
}

/// Zero-state ARL (`Z_0 = 0`, shift from the first observation).
pub fn ewma_arl(spec: &EwmaSpec, delta: f64) -> Result<f64> {
    spec.validate()?;
    let horizon = spec.horizon();
    let q = homogeneous_q(spec, delta);
    let ell = chain::arl_vector(&q)?;
    let mut stepper = Stepper::new(spec, delta);
    let mut m = vec![1.0];
    let mut arl = 0.0;
    for t in 1..=horizon {
        arl += m.iter().sum::<f64>();
        m = propagate(&mut stepper, &m, grid_at(spec, t - 1, horizon), grid_at(spec, t, horizon));
    }
    Ok(arl + m.iter().zip(&ell).map(|(a, b)| a * b).sum::<f64>())
}

/// Conditional steady-state ARL: quasi-stationary law of the in-control
/// homogeneous chain against the shifted ARL vector.
pub fn ewma_steady_arl(spec: &EwmaSpec, delta: f64) -> Result<f64> {
    spec.validate()?;
    let model = ewma_model(spec, 0.0)?;
    let (_, psi) = chain::dominant_left_eigen_warm(&model.q, &model.init)?;
    let ell = chain::arl_vector(&homogeneous_q(spec, delta))?;
    chain::steady_state_arl(&psi, &ell)
}

/// CED profile `D_1..D_tau_max` with the conditional steady-state limit.
pub fn ewma_ced(spec: &EwmaSpec, delta: f64, tau_max: usize) -> Result<CedProfile> {
    spec.validate()?;
    if tau_max == 0 {
        return Err(Error::InvalidParameter("tau_max must be at least 1".into()));
    }
    let horizon = spec.horizon();
    let model_ic = ewma_model(spec, 0.0)?;
    let q_oc = homogeneous_q(spec, delta);
    let ell_inf = chain::arl_vector(&q_oc)?;
    let (_, psi) = chain::dominant_left_eigen_warm(&model_ic.q, &model_ic.init)?;
    let limit = chain::steady_state_arl(&psi, &ell_inf)?;

    // ell_s: expected remaining run length from a state at time s - 1, shift active from s on.
    let mut ell_by_time: Vec<Vec<f64>> = vec![Vec::new(); horizon + 1];
    let mut stepper_oc = Stepper::new(spec, delta);
    let mut ahead = ell_inf.clone();
    for s in (1..=horizon).rev() {
        let from = grid_at(spec, s - 1, horizon);
        let to = grid_at(spec, s, horizon);
        let cur: Vec<f64> = (0..from.len())
            .map(|i| {
                let row = stepper_oc.row(from.node(i), to);
                1.0 + row.iter().zip(&ahead).map(|(p, l)| p * l).sum::<f64>()
            })
            .collect();
        ell_by_time[s - 1] = cur.clone();
        ahead = cur;
    }

    // Survival distribution u_tau over the grid at time tau - 1.
    let mut stepper_ic = Stepper::new(spec, 0.0);
    let mut u = vec![1.0];
    let mut values = Vec::with_capacity(tau_max);
    let mut tail_start = None;
    for tau in 1..=tau_max.min(horizon) {
        if tau > 1 {
            u = propagate(&mut stepper_ic, &u, grid_at(spec, tau - 2, horizon), grid_at(spec, tau - 1, horizon));
        }
        let mass: f64 = u.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::SurvivalUnderflow { tau });
        }
        values.push(u.iter().zip(&ell_by_time[tau - 1]).map(|(a, b)| a * b).sum::<f64>() / mass);
    }
    if tau_max > horizon {
        // From tau = horizon + 1 on the survival law lives on the asymptotic grid.
        let u_tail = propagate(&mut stepper_ic, &u, grid_at(spec, horizon - 1, horizon), grid_at(spec, horizon, horizon));
        tail_start = Some(u_tail);
    }
    let mut profile = CedProfile {
        values,
        limit,
        converged_at: None,
        underflow_at: None,
    };
    if let Some(u_tail) = tail_start {
        let tail = chain::ced_from_parts(&model_ic.q, &ell_inf, &u_tail, tau_max - horizon, limit)?;
        profile.values.extend(tail.values);
        profile.underflow_at = tail.underflow_at.map(|t| t + horizon);
    }
    profile.converged_at = first_convergence(&profile.values);
    Ok(profile)
}

fn first_convergence(values: &[f64]) -> Option<usize> {
    let mut streak = 0;
    for (i, w) in values.windows(2).enumerate() {
        if (w[1] - w[0]).abs() < chain::CED_CONVERGENCE_TOL {
            streak += 1;
            if streak == 3 {
                return Some(i + 2);
            }
        } else {
            streak = 0;
        }
    }
    None
}

/// Zero-state ARL at `n_grid` and at `2 n_grid + 1`; fails with
/// [`Error::GridTooCoarse`] when they differ by more than `tolerance`
/// (relative). Returns the finer value.
pub fn ewma_arl_grid_checked(spec: &EwmaSpec, delta: f64, tolerance: f64) -> Result<f64> {
    let coarse = ewma_arl(spec, delta)?;
    let fine_spec = spec.with_grid(2 * spec.n_grid + 1);
    let fine = ewma_arl(&fine_spec, delta)?;
    let rel_diff = ((fine - coarse) / fine).abs();
    if rel_diff > tolerance {
        return Err(Error::GridTooCoarse {
            coarse: spec.n_grid,
            fine: fine_spec.n_grid,
            rel_diff,
            tolerance,
        });
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn lambda_one_is_shewhart() {
        for style in [LimitStyle::Fixed, LimitStyle::Exact] {
            let spec = EwmaSpec::new(1.0, 3.0, style).with_grid(101);
            for delta in [0.0, 1.0, 2.5] {
                let arl = ewma_arl(&spec, delta).unwrap();
                let shewhart = 1.0 / gauss::signal_prob(3.0, delta);
                assert!(rel(arl, shewhart) < 1e-10, "{style:?} d={delta}: {arl} vs {shewhart}");
            }
        }
    }

    #[test]
    fn exact_limits_give_smaller_in_control_arl() {
        // Exact limits are narrower early on, so at equal c they alarm sooner.
        let fixed = ewma_arl(&EwmaSpec::new(0.25, 2.9, LimitStyle::Fixed), 0.0).unwrap();
        let exact = ewma_arl(&EwmaSpec::new(0.25, 2.9, LimitStyle::Exact), 0.0).unwrap();
        assert!(exact < fixed);
    }

    #[test]
    fn horizon_matches_decay() {
        let s = EwmaSpec::new(0.25, 3.0, LimitStyle::Exact);
        let t = s.horizon();
        assert!(0.75f64.powi(2 * t as i32) < 1e-12 && 0.75f64.powi(2 * (t as i32 - 1)) >= 1e-12);
        assert_eq!(EwmaSpec::new(0.25, 3.0, LimitStyle::Fixed).horizon(), 1);
    }

    #[test]
    fn fixed_ced_starts_at_zero_state_arl() {
        let spec = EwmaSpec::new(0.25, 2.998, LimitStyle::Fixed).with_grid(201);
        let ced = ewma_ced(&spec, 1.0, 30).unwrap();
        let zs = ewma_arl(&spec, 1.0).unwrap();
        assert!(rel(ced.values[0], zs) < 1e-9);
        assert!(rel(ced.values[29], ced.limit) < 1e-4);
    }

    #[test]
    fn exact_ced_matches_pieces() {
        let spec = EwmaSpec::new(0.3, 3.0, LimitStyle::Exact).with_grid(151);
        let ced = ewma_ced(&spec, 1.5, 80).unwrap();
        assert!(rel(ced.values[0], ewma_arl(&spec, 1.5).unwrap()) < 1e-9);
        assert!(rel(ced.values[79], ced.limit) < 1e-6);
        assert!(rel(ced.limit, ewma_steady_arl(&spec, 1.5).unwrap()) < 1e-12);
    }

    #[test]
    fn fixed_model_ced_agrees_with_chain_module() {
        let spec = EwmaSpec::new(0.25, 2.8, LimitStyle::Fixed).with_grid(101);
        let ic = ewma_model(&spec, 0.0).unwrap();
        let oc = ewma_model(&spec, 2.0).unwrap();
        let generic = chain::ced_profile(&ic.q, &oc.q, &ic.init, 20).unwrap();
        let own = ewma_ced(&spec, 2.0, 20).unwrap();
        for (a, b) in generic.values.iter().zip(&own.values) {
            assert!(rel(*a, *b) < 1e-10);
        }
    }

    #[test]
    fn combo_truncation_reduces_to_standalone() {
        let spec = EwmaSpec::new(0.25, 3.0, LimitStyle::Fixed).with_grid(101);
        let wide = spec.with_k2(40.0);
        assert!(rel(ewma_arl(&spec, 1.0).unwrap(), ewma_arl(&wide, 1.0).unwrap()) < 1e-12);
        let tight = spec.with_k2(3.0);
        assert!(ewma_arl(&tight, 4.0).unwrap() < ewma_arl(&spec, 4.0).unwrap());
    }

    #[test]
    fn rejects_even_grid() {
        assert!(ewma_arl(&EwmaSpec::new(0.25, 3.0, LimitStyle::Fixed).with_grid(200), 0.0).is_err());
        assert!(ewma_arl(&EwmaSpec::new(0.0, 3.0, LimitStyle::Fixed), 0.0).is_err());
    }
}
