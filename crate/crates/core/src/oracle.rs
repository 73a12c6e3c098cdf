//! Monte-Carlo run lengths, used to validate the analytic engines.
//!
//! The simulators implement the charts' alarm rules literally on the raw
//! observations; the synthetic charts in particular scan the window of the
//! last `H` observations for a matching earlier signal instead of using a
//! state encoding.
//!
//! Randomness: replication `i` draws from ChaCha8 seeded with `seed` on
//! stream `i`, and normals come from the inverse cdf (AS 241). Results
//! depend only on `(seed, n_runs)`, never on the thread count.

use std::collections::VecDeque;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chart::{ChartSpec, ShiftModel};
use crate::classic::{CusumSpec, EwmaSpec, LimitStyle, ShewhartSpec};
use crate::error::{Error, Result};
use crate::gauss;
use crate::synth::{SyntheticSpec, Variant};

pub const DEFAULT_SEED: u64 = 20_211_026;
/// Conditional estimates need at least this many runs surviving to the change point.
pub const MIN_SURVIVORS: u64 = 100;
const CHUNK: u64 = 1 << 14;
/// Replications attempted per requested survivor before giving up.
const MAX_ATTEMPT_FACTOR: u64 = 1000;
const MAX_STEPS: u64 = 1 << 36;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    /// Estimate of `E(L - tau + 1 | L >= tau)`.
    pub mean_rl: f64,
    pub std_err: f64,
    /// Runs that entered the estimate.
    pub n_runs: u64,
    /// Replications simulated, including discarded early alarms.
    pub attempts: u64,
    pub seed: u64,
}

impl SimResult {
    pub fn z_score(&self, analytic: f64) -> f64 {
        (self.mean_rl - analytic) / self.std_err
    }
}

/// Simulates until `n_runs` runs have survived to the change point
/// (all runs when `tau = 1`).
pub fn simulate_run_length(spec: &ChartSpec, shift: ShiftModel, n_runs: u64, seed: u64) -> Result<SimResult> {
    spec.validate()?;
    if n_runs == 0 {
        return Err(Error::InvalidParameter("n_runs must be at least 1".into()));
    }
    if shift.tau == 0 || !shift.delta.is_finite() {
        return Err(Error::InvalidParameter("change point tau must be >= 1 and delta finite".into()));
    }
    let tau = shift.tau as u64;
    let max_attempts = n_runs.saturating_mul(MAX_ATTEMPT_FACTOR);
    let (mut sum, mut sum_sq, mut kept, mut attempts) = (0u128, 0u128, 0u64, 0u64);
    while kept < n_runs && attempts < max_attempts {
        let start = attempts;
        let end = (start + CHUNK).min(max_attempts);
        let lengths: Vec<u64> = (start..end)
            .into_par_iter()
            .map(|i| one_run(spec, shift, seed, i))
            .collect::<Result<_>>()?;
        for len in lengths {
            attempts += 1;
            if len >= tau {
                let d = (len - tau + 1) as u128;
                sum += d;
                sum_sq += d * d;
                kept += 1;
                if kept == n_runs {
                    break;
                }
            }
        }
    }
    if kept < MIN_SURVIVORS.min(n_runs) {
        return Err(Error::ConditioningStarvation {
            survivors: kept,
            tau: shift.tau,
        });
    }
    let n = kept as f64;
    let mean = sum as f64 / n;
    let var = if kept > 1 {
        // Exact integer sums; only the final division is rounded.
        let centered = sum_sq as f64 - (sum as f64) * (sum as f64) / n;
        (centered / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(SimResult {
        mean_rl: mean,
        std_err: (var / n).sqrt(),
        n_runs: kept,
        attempts,
        seed,
    })
}

fn one_run(spec: &ChartSpec, shift: ShiftModel, seed: u64, index: u64) -> Result<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut chart = Runner::new(spec);
    for t in 1..=MAX_STEPS {
        let mean = if t >= shift.tau as u64 { shift.delta } else { 0.0 };
        let x = mean + gauss::std_normal_quantile(open_uniform(&mut rng));
        if chart.observe(t, x) {
            return Ok(t);
        }
    }
    Err(Error::InvalidParameter(format!("{} did not alarm within {MAX_STEPS} observations", spec.label())))
}

/// Uniform on the open interval `(0, 1)` from the top 53 bits.
fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

enum Runner {
    Synthetic(SynthRunner),
    Ewma { spec: EwmaSpec, z: f64 },
    Cusum { spec: CusumSpec, up: f64, down: f64 },
    Shewhart(ShewhartSpec),
}

impl Runner {
    fn new(spec: &ChartSpec) -> Self {
        match *spec {
            ChartSpec::Synthetic(s) => Runner::Synthetic(SynthRunner::new(s)),
            ChartSpec::Ewma(spec) => Runner::Ewma { spec, z: 0.0 },
            ChartSpec::Cusum(spec) => Runner::Cusum { spec, up: 0.0, down: 0.0 },
            ChartSpec::Shewhart(s) => Runner::Shewhart(s),
        }
    }

    /// Feeds observation `t` (1-based); true on alarm.
    fn observe(&mut self, t: u64, x: f64) -> bool {
        match self {
            Runner::Synthetic(s) => s.observe(x),
            Runner::Ewma { spec, z } => {
                if spec.k2.is_some_and(|k2| x.abs() > k2) {
                    return true;
                }
                *z = (1.0 - spec.lambda) * *z + spec.lambda * x;
                let limit = match spec.limit_style {
                    LimitStyle::Fixed => spec.asymptotic_limit(),
                    LimitStyle::Exact => spec.limit_at(t.min(i32::MAX as u64 / 2) as usize),
                };
                z.abs() > limit
            }
            Runner::Cusum { spec, up, down } => {
                if spec.k2.is_some_and(|k2| x.abs() > k2) {
                    return true;
                }
                *up = (*up + x - spec.k_ref).max(0.0);
                *down = (*down - x - spec.k_ref).max(0.0);
                *up > spec.h || *down > spec.h
            }
            Runner::Shewhart(s) => x.abs() > s.k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Obs {
    Up,
    Down,
    CenterUp,
    CenterDown,
    /// The head-start signal before the first observation; matches either side.
    Wildcard,
}

impl Obs {
    fn is_signal(self) -> bool {
        matches!(self, Obs::Up | Obs::Down | Obs::Wildcard)
    }

    fn pairs_with(self, signal: Obs) -> bool {
        self == Obs::Wildcard || self == signal
    }

    fn same_half(self, signal: Obs) -> bool {
        matches!((self, signal), (Obs::CenterUp, Obs::Up) | (Obs::CenterDown, Obs::Down))
    }
}

/// 2-of-(H+1) rules evaluated on the raw window of the last `H` observations.
struct SynthRunner {
    spec: SyntheticSpec,
    window: VecDeque<Obs>,
}

impl SynthRunner {
    fn new(spec: SyntheticSpec) -> Self {
        let mut window = VecDeque::with_capacity(spec.h + 1);
        if spec.head_start {
            window.push_back(Obs::Wildcard);
        }
        Self { spec, window }
    }

    fn observe(&mut self, x: f64) -> bool {
        let s = &self.spec;
        if s.k2.is_some_and(|k2| x.abs() > k2) {
            return true;
        }
        let obs = if x > s.k1 {
            Obs::Up
        } else if x < -s.k1 {
            Obs::Down
        } else if x >= 0.0 {
            Obs::CenterUp
        } else {
            Obs::CenterDown
        };
        if obs.is_signal() && self.completes_pattern(obs) {
            return true;
        }
        self.window.push_back(obs);
        if self.window.len() > s.h {
            self.window.pop_front();
        }
        false
    }

    /// Whether the new signal `cur` pairs with an earlier one in the window
    /// (at most `H` observations back).
    fn completes_pattern(&self, cur: Obs) -> bool {
        let mut back = self.window.iter().rev();
        match self.spec.variant {
            Variant::TrueSynthetic => back.any(|o| o.is_signal()),
            Variant::SideSensitive => back.any(|o| o.pairs_with(cur)),
            // The nearest earlier signal must be on the same side; everything
            // after it is inside the limits by construction.
            Variant::Revised => back.find(|o| o.is_signal()).is_some_and(|o| o.pairs_with(cur)),
            Variant::Modified => {
                for o in back {
                    if o.is_signal() {
                        return o.pairs_with(cur);
                    }
                    if !o.same_half(cur) {
                        return false;
                    }
                }
                false
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Measure;

    fn shewhart(k: f64) -> ChartSpec {
        ChartSpec::Shewhart(ShewhartSpec::new(k))
    }

    #[test]
    fn equal_seeds_are_bit_identical() {
        let spec = ChartSpec::Synthetic(SyntheticSpec::new(Variant::Modified, true, 3, 2.0));
        let a = simulate_run_length(&spec, ShiftModel::immediate(1.0), 5000, 7).unwrap();
        let b = simulate_run_length(&spec, ShiftModel::immediate(1.0), 5000, 7).unwrap();
        assert_eq!(a.mean_rl.to_bits(), b.mean_rl.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
        let c = simulate_run_length(&spec, ShiftModel::immediate(1.0), 5000, 8).unwrap();
        assert_ne!(a.mean_rl.to_bits(), c.mean_rl.to_bits());
    }

    #[test]
    fn shewhart_matches_geometric_mean() {
        let spec = shewhart(2.0);
        let r = simulate_run_length(&spec, ShiftModel::immediate(0.5), 40_000, 1).unwrap();
        let exact = 1.0 / gauss::signal_prob(2.0, 0.5);
        assert!(r.z_score(exact).abs() < 4.0, "{r:?} vs {exact}");
    }

    #[test]
    fn tau_one_is_unconditional() {
        let spec = shewhart(1.5);
        let r = simulate_run_length(&spec, ShiftModel::at(0.0, 1), 1000, 3).unwrap();
        assert_eq!(r.n_runs, r.attempts);
    }

    #[test]
    fn conditioning_discards_early_alarms() {
        let spec = shewhart(1.0);
        let r = simulate_run_length(&spec, ShiftModel::at(1.0, 5), 2000, 3).unwrap();
        assert!(r.attempts > r.n_runs);
        // Memoryless chart: the conditional delay equals the ARL.
        let exact = 1.0 / gauss::signal_prob(1.0, 1.0);
        assert!(r.z_score(exact).abs() < 4.0);
    }

    #[test]
    fn starvation_is_reported() {
        let spec = shewhart(0.05);
        let err = simulate_run_length(&spec, ShiftModel::at(0.0, 60), 200, 3).unwrap_err();
        assert!(matches!(err, Error::ConditioningStarvation { .. }));
    }

    #[test]
    fn window_rules_on_fixed_sequences() {
        let spec = |v| SyntheticSpec::new(v, false, 3, 2.0);
        let run = |v, xs: &[f64]| {
            let mut r = SynthRunner::new(spec(v));
            xs.iter().position(|&x| r.observe(x)).map(|i| i + 1)
        };
        // Up, then Down two steps later: only the side-insensitive rule fires.
        let xs = [2.5, 0.1, -2.5, 0.1, 0.1, 0.1];
        assert_eq!(run(Variant::TrueSynthetic, &xs), Some(3));
        assert_eq!(run(Variant::SideSensitive, &xs), None);
        // Up, Down, Up: side-sensitive pairs the two ups, revised does not.
        let xs = [2.5, -2.5, 2.5];
        assert_eq!(run(Variant::SideSensitive, &xs), Some(3));
        assert_eq!(run(Variant::Revised, &xs), None);
        // Up, below-center, Up: revised fires, modified does not.
        let xs = [2.5, -0.5, 2.5];
        assert_eq!(run(Variant::Revised, &xs), Some(3));
        assert_eq!(run(Variant::Modified, &xs), None);
        let xs = [2.5, 0.5, 0.5, 2.5];
        assert_eq!(run(Variant::Modified, &xs), Some(4));
        // Gap of four is too long for H = 3.
        let xs = [2.5, 0.5, 0.5, 0.5, 2.5];
        assert_eq!(run(Variant::TrueSynthetic, &xs), None);
    }

    #[test]
    fn head_start_wildcard_pairs_with_first_signal() {
        let mut r = SynthRunner::new(SyntheticSpec::new(Variant::Modified, true, 3, 2.0));
        assert!(!r.observe(-0.3));
        assert!(r.observe(-2.4));
        let mut r = SynthRunner::new(SyntheticSpec::new(Variant::Modified, true, 3, 2.0));
        assert!(!r.observe(0.3));
        assert!(!r.observe(-2.4));
    }

    #[test]
    fn synthetic_agrees_with_chain_on_small_sample() {
        let spec = ChartSpec::Synthetic(SyntheticSpec::new(Variant::Revised, true, 2, 1.8));
        let exact = spec.arl(1.0, Measure::ZeroState).unwrap();
        let r = simulate_run_length(&spec, ShiftModel::immediate(1.0), 40_000, 11).unwrap();
        assert!(r.z_score(exact).abs() < 4.0, "{r:?} vs {exact}");
    }
}
