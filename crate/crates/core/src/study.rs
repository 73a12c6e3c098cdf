//! Comparison experiments over families of calibrated synthetic charts:
//! CED batteries, optimal `H`, ARL envelopes, EQL scores, Shewhart-limit
//! bundles and worst-case state profiles.
//!
//! A [`Study`] memoizes one calibrated cell per `(variant, head start, H,
//! k2)`; cells are independent and are evaluated in parallel, results are
//! always collected in grid order.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::calib::{self, CalibrationTarget};
use crate::chain::{self, CedProfile, SparseMatrix};
use crate::chart::{ChartSpec, Measure};
use crate::classic::{EwmaSpec, LimitStyle};
use crate::error::{Error, Result};
use crate::gauss;
use crate::synth::{SynthStructure, SyntheticSpec, Variant};

pub const DEFAULT_ARL0: f64 = 500.0;
pub const DEFAULT_H_MAX: usize = 200;
pub const DEFAULT_SLACK: f64 = 0.001;
/// The slack replacement only applies when the exact minimizer exceeds
/// this; small minimizers are reported as they are.
pub const DEFAULT_REPLACE_ABOVE: usize = 10;
pub const DEFAULT_TAU_MAX: usize = 50;
pub const DEFAULT_DELTA_MAX: f64 = 5.0;
pub const DEFAULT_EQL_STEP: f64 = 0.01;

/// Shifts of the optimal-`H` table.
pub const TABLE_DELTAS: [f64; 10] = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CellKey {
    variant: Variant,
    head_start: bool,
    h: usize,
    k2_bits: Option<u64>,
}

/// One calibrated synthetic chart with its structure and cached
/// in-control quasi-stationary vector.
#[derive(Debug)]
pub struct SynthCell {
    pub spec: SyntheticSpec,
    /// In-control ARL reached by the calibration.
    pub arl0: f64,
    structure: SynthStructure,
    psi1: OnceLock<std::result::Result<(f64, Vec<f64>), Error>>,
}

impl SynthCell {
    fn calibrate(variant: Variant, head_start: bool, h: usize, k2: Option<f64>, arl0: f64) -> Result<Self> {
        let structure = SynthStructure::new(variant, head_start, h)?;
        let k1 = match k2 {
            Some(k2) => calib::calibrate_combo_inner(variant, head_start, h, k2, arl0)?,
            None => {
                let template = ChartSpec::Synthetic(SyntheticSpec::new(variant, head_start, h, 2.0));
                calib::calibrate(&template, &CalibrationTarget::zero_state(arl0))?.value
            }
        };
        let mut spec = SyntheticSpec::new(variant, head_start, h, k1);
        spec.k2 = k2;
        Ok(Self {
            spec,
            arl0,
            structure,
            psi1: OnceLock::new(),
        })
    }

    pub fn q(&self, delta: f64) -> Result<SparseMatrix> {
        Ok(self.structure.q_matrix(&gauss::event_probs(self.spec.k1, self.spec.k2, delta)?))
    }

    pub fn init(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.structure.n_states()];
        v[self.structure.init_idx()] = 1.0;
        v
    }

    /// Dominant eigenvalue and left eigenvector of the in-control chain.
    pub fn psi1(&self) -> Result<(f64, &[f64])> {
        let r = self.psi1.get_or_init(|| {
            let q = self.q(0.0)?;
            chain::dominant_left_eigen_warm(&q, &self.init())
        });
        match r {
            Ok((rho, psi)) => Ok((*rho, psi)),
            Err(e) => Err(e.clone()),
        }
    }

    pub fn arl(&self, delta: f64, measure: Measure) -> Result<f64> {
        let ell = chain::arl_vector(&self.q(delta)?)?;
        match measure {
            Measure::ZeroState => Ok(ell[self.structure.init_idx()]),
            Measure::SteadyState => chain::steady_state_arl(self.psi1()?.1, &ell),
        }
    }

    pub fn ced(&self, delta: f64, tau_max: usize) -> Result<CedProfile> {
        let ell = chain::arl_vector(&self.q(delta)?)?;
        let limit = chain::steady_state_arl(self.psi1()?.1, &ell)?;
        chain::ced_from_parts(&self.q(0.0)?, &ell, &self.init(), tau_max, limit)
    }

    /// `P(no pending signal after i observations | L > i)`, `i = 1..=n`.
    pub fn worst_state_profile(&self, n: usize) -> Result<chain::StateProfile> {
        chain::worst_state_profile(&self.q(0.0)?, &self.init(), self.structure.none_idx(), n)
    }
}

/// Memoized calibrations at a common in-control ARL.
#[derive(Debug)]
pub struct Study {
    pub arl0: f64,
    cells: Mutex<HashMap<CellKey, Arc<SynthCell>>>,
}

impl Default for Study {
    fn default() -> Self {
        Self::new(DEFAULT_ARL0)
    }
}

impl Study {
    pub fn new(arl0: f64) -> Self {
        Self {
            arl0,
            cells: Mutex::new(HashMap::new()),
        }
    }

    pub fn cell(&self, variant: Variant, head_start: bool, h: usize) -> Result<Arc<SynthCell>> {
        self.cell_with(variant, head_start, h, None)
    }

    /// Cell of the Shewhart-synthetic combo when `k2` is set.
    pub fn cell_with(&self, variant: Variant, head_start: bool, h: usize, k2: Option<f64>) -> Result<Arc<SynthCell>> {
        let key = CellKey {
            variant,
            head_start,
            h,
            k2_bits: k2.map(f64::to_bits),
        };
        if let Some(c) = self.cells.lock().expect("cell cache poisoned").get(&key) {
            return Ok(Arc::clone(c));
        }
        let cell = Arc::new(SynthCell::calibrate(variant, head_start, h, k2, self.arl0)?);
        Ok(Arc::clone(self.cells.lock().expect("cell cache poisoned").entry(key).or_insert(cell)))
    }

    /// Cells for every `H` in `hs`, calibrated in parallel, in input order.
    pub fn cells(&self, variant: Variant, head_start: bool, hs: &[usize]) -> Result<Vec<Arc<SynthCell>>> {
        hs.par_iter().map(|&h| self.cell(variant, head_start, h)).collect()
    }

    /// `ARL[i][j]` for `hs[i]` and `deltas[j]`.
    pub fn arl_grid(&self, variant: Variant, head_start: bool, hs: &[usize], deltas: &[f64], measure: Measure) -> Result<Vec<Vec<f64>>> {
        hs.par_iter()
            .map(|&h| {
                let cell = self.cell(variant, head_start, h)?;
                deltas.iter().map(|&d| cell.arl(d, measure)).collect()
            })
            .collect()
    }

    /// Optimal `H` in `1..=h_max`; see [`OptimalH::from_scan`] for the rule.
    pub fn optimal_h(&self, variant: Variant, head_start: bool, delta: f64, measure: Measure, rule: &SlackRule) -> Result<OptimalH> {
        Ok(self.optimal_h_table(variant, head_start, &[delta], measure, rule)?.remove(0))
    }

    /// [`Self::optimal_h`] for every shift, sharing one sweep over `H`.
    pub fn optimal_h_table(&self, variant: Variant, head_start: bool, deltas: &[f64], measure: Measure, rule: &SlackRule) -> Result<Vec<OptimalH>> {
        let hs: Vec<usize> = (1..=rule.h_max).collect();
        let grid = self.arl_grid(variant, head_start, &hs, deltas, measure)?;
        Ok((0..deltas.len())
            .map(|j| {
                let col: Vec<f64> = grid.iter().map(|row| row[j]).collect();
                OptimalH::from_scan(&hs, &col, rule)
            })
            .collect())
    }

    /// Pointwise minimum over `H` in `1..=h_max`, optionally with a
    /// reference chart evaluated on the same shifts.
    pub fn envelope(
        &self,
        variant: Variant,
        head_start: bool,
        deltas: &[f64],
        measure: Measure,
        h_max: usize,
        reference: Option<&ChartSpec>,
    ) -> Result<EnvelopeResult> {
        let table = self.optimal_h_table(variant, head_start, deltas, measure, &SlackRule::exact(h_max))?;
        let reference = match reference {
            Some(spec) => Some(deltas.par_iter().map(|&d| spec.arl(d, measure)).collect::<Result<Vec<f64>>>()?),
            None => None,
        };
        Ok(EnvelopeResult {
            chart: variant.label(head_start),
            measure,
            deltas: deltas.to_vec(),
            best_h: table.iter().map(|o| o.best_h).collect(),
            best_arl: table.iter().map(|o| o.best_arl).collect(),
            reference,
        })
    }

    /// CED profiles for every `H` in `hs` plus the given EWMA charts.
    pub fn ced_battery(&self, variant: Variant, head_start: bool, hs: &[usize], delta: f64, tau_max: usize, ewma: &[EwmaSpec]) -> Result<CedBattery> {
        let profiles: Vec<CedProfile> = hs
            .par_iter()
            .map(|&h| self.cell(variant, head_start, h)?.ced(delta, tau_max))
            .collect::<Result<_>>()?;
        let ewma = ewma
            .par_iter()
            .map(|s| Ok((*s, ChartSpec::Ewma(*s).ced(delta, tau_max)?)))
            .collect::<Result<Vec<_>>>()?;
        let pick = |f: &dyn Fn(&CedProfile) -> f64| {
            hs.iter()
                .zip(&profiles)
                .fold((0usize, f64::INFINITY), |b, (&h, p)| if f(p) < b.1 { (h, f(p)) } else { b })
                .0
        };
        let zero_state_best_h = pick(&|p| p.values[0]);
        let steady_state_best_h = pick(&|p| p.limit);
        Ok(CedBattery {
            chart: variant.label(head_start),
            delta,
            hs: hs.to_vec(),
            profiles,
            ewma,
            zero_state_best_h,
            steady_state_best_h,
        })
    }

    /// Calibrated combo designs `(k2, k1)` along `k2_grid`; limits that are
    /// too tight on their own are skipped.
    pub fn combo_bundle(&self, variant: Variant, head_start: bool, h: usize, k2_grid: &[f64]) -> Result<Vec<Arc<SynthCell>>> {
        let cells: Vec<Result<Arc<SynthCell>>> = k2_grid
            .par_iter()
            .map(|&k2| self.cell_with(variant, head_start, h, Some(k2)))
            .collect();
        let mut out = Vec::with_capacity(cells.len());
        for c in cells {
            match c {
                Ok(c) => out.push(c),
                Err(Error::Infeasible(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    /// Per-`H` probability of the no-pending-signal state given survival.
    pub fn worst_case_study(&self, variant: Variant, hs: &[usize], n: usize) -> Result<Vec<WorstCaseProfile>> {
        hs.par_iter()
            .map(|&h| {
                let cell = self.cell(variant, true, h)?;
                let p = cell.worst_state_profile(n.max(h))?;
                Ok(WorstCaseProfile {
                    h,
                    k1: cell.spec.k1,
                    probs: p.probs,
                    asymptote: p.steady,
                })
            })
            .collect()
    }
}

/// How [`OptimalH`] trades a little ARL for a smaller `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlackRule {
    pub h_max: usize,
    /// Relative ARL allowance over the minimum.
    pub slack: f64,
    /// Replace the minimizer only when it is larger than this.
    pub replace_above: usize,
}

impl Default for SlackRule {
    fn default() -> Self {
        Self {
            h_max: DEFAULT_H_MAX,
            slack: DEFAULT_SLACK,
            replace_above: DEFAULT_REPLACE_ABOVE,
        }
    }
}

impl SlackRule {
    /// Plain minimizer over `1..=h_max`.
    pub fn exact(h_max: usize) -> Self {
        Self {
            h_max,
            slack: 0.0,
            replace_above: usize::MAX,
        }
    }

    /// Smallest `H` within `slack`, whatever the minimizer.
    pub fn strict(h_max: usize, slack: f64) -> Self {
        Self {
            h_max,
            slack,
            replace_above: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalH {
    /// Smallest `H` within the slack of the minimum.
    pub h: usize,
    pub arl: f64,
    /// Exact minimizer and minimum.
    pub best_h: usize,
    pub best_arl: f64,
}

impl OptimalH {
    /// When the minimizer exceeds `rule.replace_above`, the smallest `H`
    /// whose ARL is within `rule.slack` of the minimum; otherwise the
    /// minimizer itself.
    pub fn from_scan(hs: &[usize], arls: &[f64], rule: &SlackRule) -> Self {
        let (best_i, best_arl) = arls
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
        let bound = (1.0 + rule.slack) * best_arl;
        let i = if hs[best_i] > rule.replace_above {
            arls.iter().position(|&v| v <= bound).unwrap_or(best_i)
        } else {
            best_i
        };
        Self {
            h: hs[i],
            arl: arls[i],
            best_h: hs[best_i],
            best_arl,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeResult {
    pub chart: String,
    pub measure: Measure,
    pub deltas: Vec<f64>,
    pub best_h: Vec<usize>,
    pub best_arl: Vec<f64>,
    /// Reference chart ARLs on `deltas`.
    pub reference: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CedBattery {
    pub chart: String,
    pub delta: f64,
    pub hs: Vec<usize>,
    pub profiles: Vec<CedProfile>,
    pub ewma: Vec<(EwmaSpec, CedProfile)>,
    /// `H` minimizing `D_1`.
    pub zero_state_best_h: usize,
    /// `H` minimizing the steady-state limit.
    pub steady_state_best_h: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseProfile {
    pub h: usize,
    pub k1: f64,
    /// `probs[i - 1]` after `i` observations.
    pub probs: Vec<f64>,
    pub asymptote: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqlScore {
    pub value: f64,
    pub delta_max: f64,
    pub step: f64,
}

/// `(1 / delta_max) * sum_i delta_i^2 ARL(delta_i)` over `delta_i = step * i`.
pub fn eql<F>(arl: F, delta_max: f64, step: f64) -> Result<EqlScore>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(delta_max > 0.0 && step > 0.0 && step <= delta_max) {
        return Err(Error::InvalidParameter(format!("EQL grid needs 0 < step <= delta_max, got {step} and {delta_max}")));
    }
    let n = (delta_max / step).round() as usize;
    let mut sum = 0.0;
    for i in 1..=n {
        let d = step * i as f64;
        sum += d * d * arl(d)?;
    }
    Ok(EqlScore {
        value: sum / delta_max,
        delta_max,
        step,
    })
}

/// EWMA chart with `c` calibrated to `arl0` (zero-state).
pub fn calibrated_ewma(lambda: f64, style: LimitStyle, arl0: f64) -> Result<EwmaSpec> {
    let template = ChartSpec::Ewma(EwmaSpec::new(lambda, 3.0, style));
    let c = calib::calibrate(&template, &CalibrationTarget::zero_state(arl0))?;
    Ok(EwmaSpec::new(lambda, c.value, style))
}

/// `k2` grid `from, from + step, ..` up to `to` inclusive.
pub fn real_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| from + step * i as f64).collect()
}

/// EQL of every bundle member and the index of the smallest.
pub fn eql_scan(cells: &[Arc<SynthCell>], measure: Measure, delta_max: f64, step: f64) -> Result<(Vec<f64>, usize)> {
    let scores: Vec<f64> = cells
        .par_iter()
        .map(|c| eql(|d| c.arl(d, measure), delta_max, step).map(|s| s.value))
        .collect::<Result<_>>()?;
    let best = scores
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b })
        .0;
    Ok((scores, best))
}
