//! Grid flags: `7`, `1..25` (integers, inclusive) and `0.05..5:0.05` (reals).

use std::str::FromStr;

pub const DEFAULT_REAL_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct IntRange(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq)]
pub struct RealRange(pub Vec<f64>);

impl FromStr for IntRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("`{t}` is not a non-negative integer"));
        let Some((a, rest)) = s.split_once("..") else {
            return Ok(IntRange(vec![parse(s)?]));
        };
        let (b, step) = match rest.split_once(':') {
            Some((b, st)) => (b, parse(st)?),
            None => (rest, 1),
        };
        let (a, b) = (parse(a)?, parse(b)?);
        if step == 0 || a > b {
            return Err(format!("empty integer range `{s}`"));
        }
        Ok(IntRange((a..=b).step_by(step).collect()))
    }
}

impl FromStr for RealRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let parse = |t: &str| match t.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("`{t}` is not a finite number")),
        };
        let Some((a, rest)) = s.split_once("..") else {
            return Ok(RealRange(vec![parse(s)?]));
        };
        let (b, step) = match rest.split_once(':') {
            Some((b, st)) => (b, parse(st)?),
            None => (rest, DEFAULT_REAL_STEP),
        };
        let (a, b) = (parse(a)?, parse(b)?);
        if !(step > 0.0) || a > b {
            return Err(format!("empty real range `{s}`"));
        }
        // Points are a + i * step (not accumulated), endpoint included up to rounding.
        let n = ((b - a) / step + 1e-9).floor() as usize;
        Ok(RealRange((0..=n).map(|i| a + step * i as f64).collect()))
    }
}
