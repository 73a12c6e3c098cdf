//! Standard normal probabilities and the per-observation event layer.
//!
//! Every chart model in this crate is driven by individual observations
//! `X ~ N(delta, 1)` (in-control mean 0, known unit standard deviation). The
//! functions here turn limit widths and a shift into the probabilities the
//! Markov chain builders consume.

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Beyond this magnitude the cdf is reported as exactly 0 or 1.
pub const SATURATION: f64 = 38.0;

/// Standard normal cdf `Phi(x)`.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= -SATURATION {
        0.0
    } else if x >= SATURATION {
        1.0
    } else {
        0.5 * libm::erfc(-x / SQRT_2)
    }
}

/// Upper tail `1 - Phi(x)`, evaluated without cancellation.
pub fn std_normal_sf(x: f64) -> f64 {
    std_normal_cdf(-x)
}

/// `P(a < Z <= b)` for standard normal `Z`, using whichever tail keeps the
/// subtraction away from 1.
pub fn std_normal_between(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let p = if a >= 0.0 {
        std_normal_sf(a) - std_normal_sf(b)
    } else if b <= 0.0 {
        std_normal_cdf(b) - std_normal_cdf(a)
    } else {
        1.0 - std_normal_cdf(a) - std_normal_sf(b)
    };
    p.max(0.0)
}

/// Masses of `N(shift, 1)` on the consecutive cells `[b[i], b[i+1])` of a
/// nondecreasing boundary list. One erfc per boundary; each cell is taken
/// from the tail it lies in.
pub fn interval_masses(bounds: &[f64], shift: f64, out: &mut Vec<f64>) {
    out.clear();
    // Store the smaller tail at each boundary: cdf left of the mean, sf right of it.
    let tails: Vec<(bool, f64)> = bounds
        .iter()
        .map(|&b| {
            let t = b - shift;
            if t > 0.0 {
                (true, std_normal_sf(t))
            } else {
                (false, std_normal_cdf(t))
            }
        })
        .collect();
    for w in tails.windows(2) {
        let m = match (w[0], w[1]) {
            ((true, lo), (true, hi)) => lo - hi,
            ((false, lo), (false, hi)) => hi - lo,
            ((false, lo), (true, hi)) => 1.0 - lo - hi,
            // Decreasing boundaries; only reachable through clamping ties.
            ((true, _), (false, _)) => 0.0,
        };
        out.push(m.max(0.0));
    }
}

/// Inverse of the standard normal cdf (Wichura's AS 241, `PPND16`).
///
/// Relative accuracy is about 1e-16 over the whole open unit interval.
/// Returns `-inf`/`+inf` at 0 and 1.
#[allow(clippy::inconsistent_digit_grouping, clippy::excessive_precision)]
pub fn std_normal_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
                + 67265.770_927_008_7)
                * r
                + 45921.953_931_549_87)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545 * r + 28729.085_735_721_943) * r
                + 39307.895_800_092_71)
                * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_07)
                * r
                + 0.689_767_334_985_100_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Probability that a single observation falls outside `(-k, k)` when the
/// mean has shifted by `delta` (both in units of the in-control sigma).
pub fn signal_prob(k: f64, delta: f64) -> f64 {
    let k = k.max(0.0);
    (std_normal_sf(k - delta) + std_normal_cdf(-k - delta)).min(1.0)
}

/// Outcome probabilities of one observation against the inner limits `+-k1`
/// and an optional outer Shewhart limit `+-k2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventProbs {
    /// Inside `(-k1, k1)`.
    pub p_center: f64,
    /// Inside `[0, k1)`; the part of `p_center` above the center line.
    pub p_center_up: f64,
    /// Between `k1` and `k2` (above `k1` when there is no `k2`).
    pub p_up: f64,
    /// Between `-k2` and `-k1` (below `-k1` when there is no `k2`).
    pub p_down: f64,
    /// Beyond `+-k2`; zero for standalone charts.
    pub p_alarm: f64,
}

impl EventProbs {
    pub fn p_center_down(&self) -> f64 {
        (self.p_center - self.p_center_up).max(0.0)
    }

    pub fn p_signal(&self) -> f64 {
        self.p_up + self.p_down
    }
}

/// Splits one observation's outcome into center, warning and alarm regions.
///
/// Rejects `k2 <= k1`, negative or non-finite `k1`.
pub fn event_probs(k1: f64, k2: Option<f64>, delta: f64) -> Result<EventProbs> {
    if !(k1 >= 0.0) || !k1.is_finite() {
        return Err(Error::InvalidParameter(format!("inner limit k1 = {k1} must be finite and >= 0")));
    }
    if !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("shift delta = {delta} must be finite")));
    }
    if let Some(k2) = k2 {
        if !(k2 > k1) {
            return Err(Error::InvalidParameter(format!("Shewhart limit k2 = {k2} must exceed k1 = {k1}")));
        }
    }
    let p_center_up = std_normal_between(-delta, k1 - delta);
    let p_center_down = std_normal_between(-k1 - delta, -delta);
    let (p_up, p_down, p_alarm) = match k2 {
        None => (std_normal_sf(k1 - delta), std_normal_cdf(-k1 - delta), 0.0),
        Some(k2) => (
            std_normal_between(k1 - delta, k2 - delta),
            std_normal_between(-k2 - delta, -k1 - delta),
            std_normal_sf(k2 - delta) + std_normal_cdf(-k2 - delta),
        ),
    };
    Ok(EventProbs {
        p_center: p_center_up + p_center_down,
        p_center_up,
        p_up,
        p_down,
        p_alarm,
    })
}
