//! Calibration of one chart parameter to a target in-control ARL.
//!
//! The in-control ARL is increasing in every free parameter used here
//! (`k1`, `c`, `h`, `k`), so calibration is a bracketed root search on
//! `g(x) = ln ARL(x) - ln A`: regula falsi with the Illinois modification,
//! falling back to bisection whenever an interpolation step is unusable
//! (for instance while one end of the bracket is a failed evaluation).

use crate::chart::{ChartSpec, FreeParam, Measure};
use crate::classic::CusumSpec;
use crate::error::{Error, Result};
use crate::gauss;
use crate::synth::{SyntheticSpec, Variant};

pub const PARAM_TOL: f64 = 1e-9;
pub const ARL_REL_TOL: f64 = 1e-10;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTarget {
    /// Target in-control ARL `A`.
    pub arl: f64,
    pub measure: Measure,
    /// Defaults to the chart's natural parameter.
    pub free_param: Option<FreeParam>,
    /// Defaults per parameter: `[0.5, 6]` for limits, `[0.1, 20]` for `h`.
    pub bracket: Option<(f64, f64)>,
}

impl CalibrationTarget {
    pub fn zero_state(arl: f64) -> Self {
        Self {
            arl,
            measure: Measure::ZeroState,
            free_param: None,
            bracket: None,
        }
    }

    pub fn with_measure(mut self, measure: Measure) -> Self {
        self.measure = measure;
        self
    }

    pub fn with_bracket(mut self, lo: f64, hi: f64) -> Self {
        self.bracket = Some((lo, hi));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub param: FreeParam,
    pub value: f64,
    /// In-control ARL at `value`.
    pub arl: f64,
    pub evaluations: usize,
}

pub fn default_bracket(p: FreeParam) -> (f64, f64) {
    match p {
        FreeParam::H => (0.1, 20.0),
        _ => (0.5, 6.0),
    }
}

/// Solves `ARL(param) = A` for the chart's free parameter.
pub fn calibrate(spec: &ChartSpec, target: &CalibrationTarget) -> Result<Calibration> {
    if !(target.arl > 1.0) || !target.arl.is_finite() {
        return Err(Error::InvalidParameter(format!("target ARL {} must exceed 1", target.arl)));
    }
    let param = target.free_param.unwrap_or_else(|| spec.default_free_param());
    spec.parameter(param)?;
    let eval = |x: f64| spec.with_parameter(param, x)?.arl(0.0, target.measure);
    let (lo, hi) = match (target.bracket, spec) {
        (Some(b), _) => b,
        (None, ChartSpec::Cusum(c)) if target.measure == Measure::ZeroState => cusum_bracket(c, target.arl),
        (None, ChartSpec::Synthetic(s)) => synthetic_bracket(s),
        _ => default_bracket(param),
    };
    match solve_increasing(eval, lo, hi, target.arl) {
        Err(Error::BracketFailure { .. }) if target.bracket.is_none() => {
            let (lo, hi) = default_bracket(param);
            let hi = match spec {
                ChartSpec::Synthetic(SyntheticSpec { k2: Some(k2), .. }) => *k2,
                _ => 2.0 * hi,
            };
            solve_increasing(eval, 0.5 * lo, hi, target.arl)
        }
        other => other,
    }
    .map(|r| Calibration {
        param,
        value: r.x,
        arl: r.arl,
        evaluations: r.evaluations,
    })
}

fn synthetic_bracket(s: &SyntheticSpec) -> (f64, f64) {
    let (lo, hi) = default_bracket(FreeParam::K1);
    match s.k2 {
        // k1 must stay below k2; near k2 the inner rule is (almost) never triggered.
        Some(k2) => (lo.min(0.5 * k2), k2 * (1.0 - 1e-12)),
        None => (lo, hi),
    }
}

/// Two-sided in-control ARL is about half the one-sided one, which is
/// cheap; search the two-sided chart only near that solution.
fn cusum_bracket(spec: &CusumSpec, arl: f64) -> (f64, f64) {
    let one_sided = |h: f64| crate::classic::cusum_one_sided_arl(&CusumSpec { h, ..*spec }, 0.0, true);
    let (lo, hi) = default_bracket(FreeParam::H);
    match solve_increasing(one_sided, lo, hi, 2.0 * arl) {
        Ok(r) => ((r.x - 0.5).max(lo), r.x + 0.5),
        Err(_) => (lo, hi),
    }
}

/// `k1` of a Shewhart-synthetic combo (outer limit `k2`) attaining the
/// zero-state in-control ARL `arl`.
pub fn calibrate_combo_inner(variant: Variant, head_start: bool, h: usize, k2: f64, arl: f64) -> Result<f64> {
    let shewhart_alone = 1.0 / gauss::signal_prob(k2, 0.0);
    if shewhart_alone <= arl {
        return Err(Error::Infeasible(format!(
            "the Shewhart limit k2 = {k2} alone has in-control ARL {shewhart_alone:.4} <= {arl}"
        )));
    }
    let spec = ChartSpec::Synthetic(SyntheticSpec::new(variant, head_start, h, 0.5 * k2).with_k2(k2));
    let cal = calibrate(&spec, &CalibrationTarget::zero_state(arl))?;
    if !(cal.value < k2) {
        return Err(Error::Infeasible(format!("k1 = {} does not stay below k2 = {k2}", cal.value)));
    }
    Ok(cal.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub arl: f64,
    pub evaluations: usize,
}

/// Root of `ln f(x) = ln target` for increasing `f` on `[lo, hi]`.
///
/// Numerical failures of `f` (an ARL too large to represent) count as
/// `+inf`; invalid-parameter errors are passed through.
pub fn solve_increasing<F>(mut f: F, lo: f64, hi: f64, target: f64) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("empty bracket [{lo}, {hi}]")));
    }
    let ln_target = target.ln();
    let evaluations = std::cell::Cell::new(0usize);
    let mut g = |x: f64| -> Result<(f64, f64)> {
        evaluations.set(evaluations.get() + 1);
        match f(x) {
            Ok(v) if v.is_finite() && v > 0.0 => Ok((v.ln() - ln_target, v)),
            Ok(_) => Ok((f64::INFINITY, f64::INFINITY)),
            Err(Error::NonAbsorbing(_) | Error::EigenNonConvergence { .. }) => Ok((f64::INFINITY, f64::INFINITY)),
            Err(e) => Err(e),
        }
    };
    let (mut a, mut b) = (lo, hi);
    let (mut ga, arl_a) = g(a)?;
    let (mut gb, arl_b) = g(b)?;
    if !(ga < 0.0 && gb > 0.0) {
        return Err(Error::BracketFailure {
            lo,
            hi,
            arl_lo: arl_a,
            arl_hi: arl_b,
        });
    }
    // The first step is a bisection; it doubles as the monotonicity probe.
    let mid = 0.5 * (a + b);
    let (gm, arl_m) = g(mid)?;
    if !(gm >= ga && gm <= gb) {
        return Err(Error::NonMonotone { at: mid });
    }
    let mut best = (mid, gm, arl_m);
    let mut last_side = 0i8;
    let mut x = mid;
    let mut gx = gm;
    let mut arl_x = arl_m;
    for _ in 0..MAX_ITER {
        if gx.abs() < ARL_REL_TOL {
            return Ok(Root {
                x,
                arl: arl_x,
                evaluations: evaluations.get(),
            });
        }
        if gx < 0.0 {
            a = x;
            ga = gx;
            if last_side == -1 {
                gb *= 0.5;
            }
            last_side = -1;
        } else {
            b = x;
            gb = gx;
            if last_side == 1 {
                ga *= 0.5;
            }
            last_side = 1;
        }
        if b - a < PARAM_TOL {
            break;
        }
        // An infinite end (failed evaluation) leaves only bisection.
        let interp = a - ga * (b - a) / (gb - ga);
        x = if interp.is_finite() && interp > a && interp < b {
            interp
        } else {
            0.5 * (a + b)
        };
        let r = g(x)?;
        gx = r.0;
        arl_x = r.1;
        if gx.abs() < best.1.abs() {
            best = (x, gx, arl_x);
        }
    }
    Ok(Root {
        x: best.0,
        arl: best.2,
        evaluations: evaluations.get(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classic::ShewhartSpec;

    #[test]
    fn solves_smooth_increasing_function() {
        let r = solve_increasing(|x| Ok(x.exp() * 10.0), -3.0, 5.0, 500.0).unwrap();
        assert!((r.x - (50f64).ln()).abs() < 1e-9);
        assert!(r.evaluations < 30);
    }

    #[test]
    fn reports_bracket_failure_and_non_monotone() {
        assert!(matches!(
            solve_increasing(Ok, 1.0, 2.0, 500.0),
            Err(Error::BracketFailure { .. })
        ));
        let bumpy = |x: f64| Ok(if (0.4..0.6).contains(&x) { 1e-3 } else { 10f64.powf(6.0 * x) });
        assert!(matches!(solve_increasing(bumpy, 0.0, 1.0, 500.0), Err(Error::NonMonotone { .. })));
    }

    #[test]
    fn treats_numerical_failure_as_huge_arl() {
        let f = |x: f64| if x > 4.0 { Err(Error::NonAbsorbing("overflow".into())) } else { Ok(x * 100.0) };
        let r = solve_increasing(f, 0.5, 6.0, 250.0).unwrap();
        assert!((r.x - 2.5).abs() < 1e-9);
    }

    #[test]
    fn shewhart_limit_for_500() {
        let spec = ChartSpec::Shewhart(ShewhartSpec::new(3.0));
        let c = calibrate(&spec, &CalibrationTarget::zero_state(500.0)).unwrap();
        let oracle = -gauss::std_normal_quantile(1.0 / 1000.0);
        assert!((c.value - oracle).abs() < 1e-8, "{} vs {oracle}", c.value);
        assert!((c.value - 3.0902).abs() < 1e-3);
    }

    #[test]
    fn combo_inner_infeasible_when_outer_limit_too_tight() {
        assert!(matches!(
            calibrate_combo_inner(Variant::Modified, false, 6, 3.0, 500.0),
            Err(Error::Infeasible(_))
        ));
    }
}
