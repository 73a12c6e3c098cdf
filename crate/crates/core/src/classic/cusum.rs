//! Two-sided CUSUM charts
//! `S+_t = max(0, S+_{t-1} + X_t - k)`, `S-_t = max(0, S-_{t-1} - X_t - k)`,
//! alarm when either counter exceeds `h`.
//!
//! Each counter is discretized Brook-Evans style: `n` cells of width
//! `w = 2h / (2n - 1)`, cell 0 covering `[0, w/2)` (it holds the atom at
//! zero), cell `i` centred at `i w`. The two-sided chart is the product
//! chain driven by the same observation, restricted to the cells reachable
//! from `(0, 0)`: once both counters are positive their sum drops by `2k`
//! per step and never exceeds `h - 2k`, so the reachable set is the two
//! axes plus a small corner.

use std::collections::{HashMap, VecDeque};

use crate::chain::{self, MarkovModel, SparseMatrix};
use crate::error::{Error, Result};
use crate::gauss;

pub const DEFAULT_CUSUM_GRID: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusumSpec {
    pub k_ref: f64,
    pub h: f64,
    pub k2: Option<f64>,
    /// Cells per counter.
    pub n_grid: usize,
}

impl CusumSpec {
    pub fn new(k_ref: f64, h: f64) -> Self {
        Self {
            k_ref,
            h,
            k2: None,
            n_grid: DEFAULT_CUSUM_GRID,
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
        if !(self.k_ref >= 0.0) || !self.k_ref.is_finite() {
            return Err(Error::InvalidParameter(format!("reference value k = {} must be >= 0", self.k_ref)));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidParameter(format!("decision interval h = {} must be positive", self.h)));
        }
        if self.n_grid < 2 {
            return Err(Error::InvalidParameter("CUSUM grid needs at least 2 cells".into()));
        }
        if let Some(k2) = self.k2 {
            if !(k2 > 0.0) {
                return Err(Error::InvalidParameter(format!("k2 = {k2} must be positive")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self.k2 {
            Some(_) => format!("Shewhart-CUSUM({})", self.k_ref),
            None => format!("CUSUM({})", self.k_ref),
        }
    }

    fn width(&self) -> f64 {
        2.0 * self.h / (2 * self.n_grid - 1) as f64
    }

    fn clamp(&self, x: f64) -> f64 {
        match self.k2 {
            Some(k2) => x.clamp(-k2, k2),
            None => x,
        }
    }
}

/// Product chain of the two counters.
pub fn cusum_model(spec: &CusumSpec, delta: f64) -> Result<MarkovModel> {
    spec.validate()?;
    let n = spec.n_grid;
    let w = spec.width();
    let k = spec.k_ref;

    let mut index: HashMap<(usize, usize), usize> = HashMap::from([((0, 0), 0)]);
    let mut states = vec![(0usize, 0usize)];
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    let mut triplets = Vec::new();
    let mut cuts: Vec<(f64, Cut)> = Vec::with_capacity(2 * n);
    let mut bounds = Vec::with_capacity(2 * n + 2);
    let mut targets = Vec::with_capacity(2 * n + 1);
    let mut masses = Vec::new();

    while let Some((i, j)) = queue.pop_front() {
        let from = index[&(i, j)];
        // Upper counter enters cell m >= 1 at x = k - i w + (m - 1/2) w, alarms at x >= k - i w + h.
        // Lower counter enters cell m >= 1 at x <= j w - k - (m - 1/2) w, alarms at x <= j w - k - h.
        let x_lo = spec.clamp(j as f64 * w - k - spec.h);
        let x_hi = spec.clamp(k - i as f64 * w + spec.h);
        if x_hi <= x_lo {
            continue;
        }
        cuts.clear();
        for m in 1..n {
            cuts.push((k - i as f64 * w + (m as f64 - 0.5) * w, Cut::UpperUp));
            cuts.push((j as f64 * w - k - (m as f64 - 0.5) * w, Cut::LowerDown));
        }
        cuts.retain(|c| c.0 > x_lo && c.0 < x_hi);
        cuts.sort_by(|a, b| a.0.total_cmp(&b.0));

        // Cell indices at x just above x_lo.
        let mut up = (1..n).filter(|&m| k - i as f64 * w + (m as f64 - 0.5) * w <= x_lo).count();
        let mut down = (1..n).filter(|&m| j as f64 * w - k - (m as f64 - 0.5) * w > x_lo).count();
        bounds.clear();
        targets.clear();
        bounds.push(x_lo);
        targets.push((up, down));
        for &(x, cut) in &cuts {
            bounds.push(x);
            match cut {
                Cut::UpperUp => up += 1,
                Cut::LowerDown => down -= 1,
            }
            targets.push((up, down));
        }
        bounds.push(x_hi);
        gauss::interval_masses(&bounds, delta, &mut masses);
        // States are discovered from interval geometry, not masses, so the
        // state set does not depend on the shift.
        for (t, (&cell, &p)) in targets.iter().zip(&masses).enumerate() {
            if bounds[t + 1] <= bounds[t] {
                continue;
            }
            let to = *index.entry(cell).or_insert_with(|| {
                states.push(cell);
                queue.push_back(cell);
                states.len() - 1
            });
            if p > 0.0 {
                triplets.push((from, to, p));
            }
        }
    }
    let dim = states.len();
    let labels = states.iter().map(|(i, j)| format!("({i},{j})")).collect();
    let mut init = vec![0.0; dim];
    init[0] = 1.0;
    MarkovModel::new(SparseMatrix::from_triplets(dim, dim, triplets), labels, init, 0, 0)
}

#[derive(Debug, Clone, Copy)]
enum Cut {
    UpperUp,
    LowerDown,
}

/// Zero-state ARL from `(0, 0)`.
pub fn cusum_arl(spec: &CusumSpec, delta: f64) -> Result<f64> {
    let model = cusum_model(spec, delta)?;
    let ell = chain::arl_vector(&model.q)?;
    Ok(ell[0])
}

/// Conditional steady-state ARL.
pub fn cusum_steady_arl(spec: &CusumSpec, delta: f64) -> Result<f64> {
    let ic = cusum_model(spec, 0.0)?;
    let oc = cusum_model(spec, delta)?;
    let (_, psi) = chain::dominant_left_eigen_warm(&ic.q, &ic.init)?;
    chain::steady_state_arl(&psi, &chain::arl_vector(&oc.q)?)
}

/// ARL of the upper counter alone (`upper = true`) or the lower one.
pub fn cusum_one_sided_arl(spec: &CusumSpec, delta: f64, upper: bool) -> Result<f64> {
    spec.validate()?;
    let n = spec.n_grid;
    let w = spec.width();
    let k = spec.k_ref;
    // The lower counter under shift delta is the upper counter under -delta.
    let shift = if upper { delta } else { -delta };
    let mut triplets = Vec::with_capacity(n * n);
    let mut bounds = Vec::with_capacity(n + 1);
    let mut masses = Vec::new();
    for i in 0..n {
        bounds.clear();
        bounds.push(spec.clamp(f64::NEG_INFINITY));
        for m in 1..=n {
            bounds.push(spec.clamp(k - i as f64 * w + (m as f64 - 0.5) * w));
        }
        gauss::interval_masses(&bounds, shift, &mut masses);
        triplets.extend(masses.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(j, &p)| (i, j, p)));
    }
    let ell = chain::arl_vector(&SparseMatrix::from_triplets(n, n, triplets))?;
    Ok(ell[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reachable_set_is_axes_plus_corner() {
        let spec = CusumSpec::new(1.0, 2.665).with_grid(41);
        let m = cusum_model(&spec, 0.0).unwrap();
        let w = spec.width();
        for l in &m.labels {
            let (i, j): (usize, usize) = {
                let t = l.trim_matches(|c| c == '(' || c == ')');
                let mut it = t.split(',').map(|s| s.parse().unwrap());
                (it.next().unwrap(), it.next().unwrap())
            };
            if i > 0 && j > 0 {
                assert!(((i + j) as f64) * w <= spec.h - 2.0 * spec.k_ref + 3.0 * w, "{l}");
            }
        }
        assert!(m.n_states() < 2 * spec.n_grid - 1 + spec.n_grid * spec.n_grid / 4);
    }

    #[test]
    fn two_sided_below_one_sided_and_reciprocal_rule() {
        let spec = CusumSpec::new(0.5, 4.0).with_grid(81);
        let two = cusum_arl(&spec, 0.0).unwrap();
        let up = cusum_one_sided_arl(&spec, 0.0, true).unwrap();
        let down = cusum_one_sided_arl(&spec, 0.0, false).unwrap();
        assert!(two <= up && two <= down);
        let recip = 1.0 / (1.0 / up + 1.0 / down);
        assert!(((two - recip) / two).abs() < 0.01, "{two} vs {recip}");
    }

    #[test]
    fn large_shift_alarms_at_once() {
        let spec = CusumSpec::new(1.0, 2.665).with_grid(41);
        let arl = cusum_arl(&spec, 30.0).unwrap();
        assert!((arl - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_in_shift_sign() {
        let spec = CusumSpec::new(1.0, 2.665).with_grid(41);
        let a = cusum_arl(&spec, 0.7).unwrap();
        let b = cusum_arl(&spec, -0.7).unwrap();
        assert!(((a - b) / a).abs() < 1e-10);
    }

    #[test]
    fn steady_state_at_zero_is_quasi_stationary_mean() {
        let spec = CusumSpec::new(1.0, 2.0).with_grid(31);
        let ic = cusum_model(&spec, 0.0).unwrap();
        let (rho, _) = chain::dominant_left_eigen_warm(&ic.q, &ic.init).unwrap();
        let d1 = cusum_steady_arl(&spec, 0.0).unwrap();
        assert!((d1 * (1.0 - rho) - 1.0).abs() < 1e-8);
    }
}
