//! Exact Markov chains for the eight synthetic-type (2-of-(H+1)) charts and
//! the closed forms of the side-insensitive chart.
//!
//! A signal is an observation beyond `+-k1` (and inside `+-k2` for combos).
//! The chart alarms when two qualifying signals occur at most `H`
//! observations apart:
//!
//! | variant | sides       | observations in between            |
//! |---------|-------------|-------------------------------------|
//! | 1       | any         | arbitrary                           |
//! | 2       | same        | arbitrary                           |
//! | 3       | same        | inside the limits                   |
//! | 4       | same        | on the signals' side of the center  |
//!
//! A chart state records, per side, the age of the pending signal that can
//! still complete an alarm. The head-start versions start as if a signal on
//! both sides had just occurred; for variants 2 to 4 the states that still
//! carry this unobserved signal are kept apart (`hidden`), which gives the
//! transient state counts `H+1`, `H^2+H+1`/`H^2+2H+1`, `2H+1`/`3H+1` and
//! `2H+1`/`4H`.

use std::collections::{HashMap, VecDeque};

use crate::chain::{self, MarkovModel, SparseMatrix};
use crate::error::{Error, Result};
use crate::gauss::{self, EventProbs};

/// Which 2-of-(H+1) rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Either side, anything in between.
    TrueSynthetic = 1,
    /// Same side, anything in between.
    SideSensitive = 2,
    /// Same side, in-between observations inside the limits.
    Revised = 3,
    /// Same side, in-between observations on the same side of the center line.
    Modified = 4,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::TrueSynthetic, Variant::SideSensitive, Variant::Revised, Variant::Modified];

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Variant::TrueSynthetic),
            2 => Ok(Variant::SideSensitive),
            3 => Ok(Variant::Revised),
            4 => Ok(Variant::Modified),
            _ => Err(Error::InvalidParameter(format!("synthetic variant must be 1..=4, got {n}"))),
        }
    }

    pub fn number(self) -> u8 {
        self as u8
    }

    /// `R1..R4` without head-start, `S1..S4` with.
    pub fn label(self, head_start: bool) -> String {
        format!("{}{}", if head_start { 'S' } else { 'R' }, self.number())
    }
}

/// Transient state count of the chain for `(variant, head_start, H)`.
pub fn expected_state_count(variant: Variant, head_start: bool, h: usize) -> usize {
    match (variant, head_start) {
        (Variant::TrueSynthetic, _) => h + 1,
        (Variant::SideSensitive, false) => h * h + h + 1,
        (Variant::SideSensitive, true) => h * h + 2 * h + 1,
        (Variant::Revised, false) => 2 * h + 1,
        (Variant::Revised, true) => 3 * h + 1,
        (Variant::Modified, false) => 2 * h + 1,
        (Variant::Modified, true) => 4 * h,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub variant: Variant,
    pub head_start: bool,
    /// Window: alarms need two signals at most `h` observations apart.
    pub h: usize,
    pub k1: f64,
    pub k2: Option<f64>,
}

impl SyntheticSpec {
    pub fn new(variant: Variant, head_start: bool, h: usize, k1: f64) -> Self {
        Self {
            variant,
            head_start,
            h,
            k1,
            k2: None,
        }
    }

    pub fn with_k2(mut self, k2: f64) -> Self {
        self.k2 = Some(k2);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return Err(Error::InvalidParameter("H must be at least 1".into()));
        }
        if !(self.k1 > 0.0) || !self.k1.is_finite() {
            return Err(Error::InvalidParameter(format!("k1 = {} must be positive", self.k1)));
        }
        if let Some(k2) = self.k2 {
            if !(k2 > self.k1) {
                return Err(Error::InvalidParameter(format!("k2 = {k2} must exceed k1 = {}", self.k1)));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let base = self.variant.label(self.head_start);
        match self.k2 {
            Some(_) => format!("Shewhart-{base}"),
            None => base,
        }
    }
}

/// What one observation does to a synthetic chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Event {
    Up,
    Down,
    CenterUp,
    CenterDown,
}

impl Event {
    const ALL: [Event; 4] = [Event::Up, Event::Down, Event::CenterUp, Event::CenterDown];

    fn prob(self, e: &EventProbs) -> f64 {
        match self {
            Event::Up => e.p_up,
            Event::Down => e.p_down,
            Event::CenterUp => e.p_center_up,
            Event::CenterDown => e.p_center_down(),
        }
    }
}

/// Ages of the pending signals; `None` means nothing on that side can
/// complete an alarm any more.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct ChartState {
    hidden: bool,
    up: Option<usize>,
    down: Option<usize>,
}

impl ChartState {
    const NONE: ChartState = ChartState {
        hidden: false,
        up: None,
        down: None,
    };

    fn sort_key(&self, h: usize) -> (bool, usize, usize) {
        (self.hidden, self.up.unwrap_or(h), self.down.unwrap_or(h))
    }

    fn label(&self, variant: Variant, h: usize) -> String {
        if variant == Variant::TrueSynthetic {
            return self.up.unwrap_or(h).to_string();
        }
        let mut s = String::new();
        if self.hidden {
            s.push('*');
        }
        if let Some(a) = self.up {
            s.push_str(&format!("U{a}"));
        }
        if let Some(b) = self.down {
            s.push_str(&format!("L{b}"));
        }
        if s.is_empty() {
            s.push_str("none");
        }
        s
    }
}

fn age(x: Option<usize>, h: usize) -> Option<usize> {
    x.and_then(|a| (a + 1 < h).then_some(a + 1))
}

/// Next state after one observation, `None` on alarm.
fn step(variant: Variant, h: usize, s: ChartState, ev: Event) -> Option<ChartState> {
    let mut next = match (variant, ev) {
        (Variant::TrueSynthetic, Event::Up | Event::Down) => {
            if s.up.is_some() {
                return None;
            }
            ChartState {
                hidden: false,
                up: Some(0),
                down: Some(0),
            }
        }
        (_, Event::Up) | (_, Event::Down) => {
            let (same, other) = if ev == Event::Up { (s.up, s.down) } else { (s.down, s.up) };
            if same.is_some() {
                return None;
            }
            let other = match variant {
                Variant::SideSensitive => age(other, h),
                _ => None,
            };
            let (up, down) = if ev == Event::Up { (Some(0), other) } else { (other, Some(0)) };
            ChartState { hidden: false, up, down }
        }
        (Variant::Modified, Event::CenterUp) => ChartState {
            hidden: s.hidden,
            up: age(s.up, h),
            down: None,
        },
        (Variant::Modified, Event::CenterDown) => ChartState {
            hidden: s.hidden,
            up: None,
            down: age(s.down, h),
        },
        (_, Event::CenterUp | Event::CenterDown) => ChartState {
            hidden: s.hidden,
            up: age(s.up, h),
            down: age(s.down, h),
        },
    };
    if next.up.is_none() && next.down.is_none() {
        next.hidden = false;
    }
    Some(next)
}

/// State space and event-labelled transitions of one synthetic chart,
/// independent of the limits and the shift.
#[derive(Debug, Clone)]
pub struct SynthStructure {
    pub variant: Variant,
    pub head_start: bool,
    pub h: usize,
    labels: Vec<String>,
    transitions: Vec<(usize, usize, Event)>,
    init_idx: usize,
    none_idx: usize,
}

impl SynthStructure {
    pub fn new(variant: Variant, head_start: bool, h: usize) -> Result<Self> {
        if h == 0 {
            return Err(Error::InvalidParameter("H must be at least 1".into()));
        }
        let init = match (head_start, variant) {
            (false, _) => ChartState::NONE,
            (true, Variant::TrueSynthetic) => ChartState {
                hidden: false,
                up: Some(0),
                down: Some(0),
            },
            (true, _) => ChartState {
                hidden: true,
                up: Some(0),
                down: Some(0),
            },
        };
        let mut seen: HashMap<ChartState, ()> = HashMap::new();
        let mut queue = VecDeque::from([init]);
        seen.insert(init, ());
        let mut edges = Vec::new();
        while let Some(s) = queue.pop_front() {
            for ev in Event::ALL {
                if let Some(t) = step(variant, h, s, ev) {
                    edges.push((s, t, ev));
                    if seen.insert(t, ()).is_none() {
                        queue.push_back(t);
                    }
                }
            }
        }
        let mut states: Vec<ChartState> = seen.into_keys().collect();
        states.sort_by_key(|s| s.sort_key(h));
        let expected = expected_state_count(variant, head_start, h);
        if states.len() != expected {
            return Err(Error::Construction(format!(
                "{} with H = {h} has {} transient states, expected {expected}",
                variant.label(head_start),
                states.len()
            )));
        }
        let index: HashMap<ChartState, usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let transitions = edges.into_iter().map(|(s, t, ev)| (index[&s], index[&t], ev)).collect();
        let none_idx = *index
            .get(&ChartState::NONE)
            .ok_or_else(|| Error::Construction("no-pending state unreachable".into()))?;
        Ok(Self {
            variant,
            head_start,
            h,
            labels: states.iter().map(|s| s.label(variant, h)).collect(),
            transitions,
            init_idx: index[&init],
            none_idx,
        })
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn init_idx(&self) -> usize {
        self.init_idx
    }

    /// The state without any pending signal.
    pub fn none_idx(&self) -> usize {
        self.none_idx
    }

    pub fn q_matrix(&self, probs: &EventProbs) -> SparseMatrix {
        let n = self.n_states();
        let triplets = self
            .transitions
            .iter()
            .map(|&(i, j, ev)| (i, j, ev.prob(probs)))
            .filter(|t| t.2 > 0.0)
            .collect();
        SparseMatrix::from_triplets(n, n, triplets)
    }

    pub fn model(&self, probs: &EventProbs) -> Result<MarkovModel> {
        let mut init = vec![0.0; self.n_states()];
        init[self.init_idx] = 1.0;
        MarkovModel::new(self.q_matrix(probs), self.labels.clone(), init, self.none_idx, self.init_idx)
    }
}

/// Markov model of `spec` at shift `delta`. Direct Shewhart alarms (when
/// `k2` is set) leave the transient class from every state.
pub fn build_chain(spec: &SyntheticSpec, delta: f64) -> Result<MarkovModel> {
    spec.validate()?;
    let structure = SynthStructure::new(spec.variant, spec.head_start, spec.h)?;
    structure.model(&gauss::event_probs(spec.k1, spec.k2, delta)?)
}

/// Index of the state with the largest entry of `ell` (ties to the lowest index).
pub fn worst_state_by_scan(ell: &[f64]) -> usize {
    ell.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
        .0
}

/// Closed-form quantities of the side-insensitive chart (`S1`/`R1`), states
/// `0..=H` with `H` meaning no signal within the window.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormS1 {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub ell: Vec<f64>,
    pub rho: f64,
    pub s: f64,
    pub psi1: Vec<f64>,
    /// Cyclical vector, restart at state 0.
    pub psi2: Vec<f64>,
    /// Cyclical vector, restart at state `H`.
    pub psi3: Vec<f64>,
    /// Row-normalization vector.
    pub psi4: Vec<f64>,
}

/// `sum_{i<n} x^i`, exact for `x = 1`.
fn geometric_sum(x: f64, n: usize) -> f64 {
    let mut acc = 0.0;
    let mut t = 1.0;
    for _ in 0..n {
        acc += t;
        t *= x;
    }
    acc
}

/// `(a^n - b^n) / (a - b) = sum_{i<n} a^i b^(n-1-i)`, no cancellation at `a = b`.
fn power_divided_difference(a: f64, b: f64, n: usize) -> f64 {
    (0..n).map(|i| a.powi(i as i32) * b.powi((n - 1 - i) as i32)).sum()
}

/// Root in `(q, 1)` of `(rho - q) rho^H = p q^H`.
/// Dominant root of `(x - q) x^H = p q^H`, returned as `(rho, rho - q)`.
/// Solving for the gap `d = rho - q` in `(0, p)` avoids cancelling `q / rho`
/// against 1 when `p` is small.
fn s1_rho(p: f64, q: f64, h: usize) -> (f64, f64) {
    let hi32 = h as i32;
    let rhs = p * q.powi(hi32);
    let f = |d: f64| d * (q + d).powi(hi32) - rhs;
    let (mut lo, mut hi) = (0.0, p);
    let mut d = 0.5 * p;
    for _ in 0..300 {
        let fd = f(d);
        if fd > 0.0 {
            hi = d;
        } else {
            lo = d;
        }
        if fd == 0.0 || hi - lo <= 1e-18 * p {
            break;
        }
        let df = (q + d).powi(hi32) + h as f64 * d * (q + d).powi(hi32 - 1);
        let newton = d - fd / df;
        d = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    (q + d, d)
}

pub fn closed_form_s1(h: usize, k1: f64, delta: f64) -> Result<ClosedFormS1> {
    if h == 0 || !(k1 > 0.0) {
        return Err(Error::InvalidParameter("closed forms need H >= 1 and k1 > 0".into()));
    }
    let p = gauss::signal_prob(k1, delta);
    Ok(closed_form_s1_pq(h, p))
}

/// Closed forms from the per-observation signal probability `p` directly.
pub fn closed_form_s1_pq(h: usize, p: f64) -> ClosedFormS1 {
    let q = 1.0 - p;
    let hi = h as i32;
    let qh = q.powi(hi);
    let r = p * (1.0 - qh);
    let ell: Vec<f64> = (0..=h).map(|j| 1.0 / p + q.powi(hi - j as i32) / r).collect();
    let (rho, gap) = s1_rho(p, q, h);
    let s = gap / rho;
    let mut psi1: Vec<f64> = (0..h).map(|j| s * (q / rho).powi(j as i32)).collect();
    psi1.push(rho / p * s);
    let mut psi2: Vec<f64> = (0..h).map(|j| p * q.powi(j as i32)).collect();
    psi2.push(qh);
    let mut psi3: Vec<f64> = (0..h).map(|j| p * q.powi(j as i32) / (2.0 - qh)).collect();
    psi3.push(1.0 / (2.0 - qh));
    let mut psi4 = vec![p / (1.0 + h as f64 * p); h];
    psi4.push(1.0 / (1.0 + h as f64 * p));
    ClosedFormS1 {
        p,
        q,
        r,
        ell,
        rho,
        s,
        psi1,
        psi2,
        psi3,
        psi4,
    }
}

/// Which steady-state ARL of the side-insensitive chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyKind {
    /// Conditional (quasi-stationary).
    Conditional = 1,
    /// Cyclical, restart at state 0.
    CyclicalRestartZero = 2,
    /// Cyclical, restart at state `H`.
    CyclicalRestartH = 3,
    /// Row-normalization recipe.
    RowNormalized = 4,
}

impl SteadyKind {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(SteadyKind::Conditional),
            2 => Ok(SteadyKind::CyclicalRestartZero),
            3 => Ok(SteadyKind::CyclicalRestartH),
            4 => Ok(SteadyKind::RowNormalized),
            _ => Err(Error::InvalidParameter(format!("steady-state kind must be 1..=4, got {n}"))),
        }
    }
}

/// Steady-state ARL with the steady-state vector taken in control and the
/// ARL vector at `delta`, in closed form.
pub fn closed_form_steady(h: usize, k1: f64, delta: f64, which: SteadyKind) -> Result<f64> {
    let ic = closed_form_s1(h, k1, 0.0)?;
    let oc = closed_form_s1(h, k1, delta)?;
    Ok(steady_from_parts(h, &ic, &oc, which))
}

fn steady_from_parts(h: usize, ic: &ClosedFormS1, oc: &ClosedFormS1, which: SteadyKind) -> f64 {
    let (p0, q0, rho0, s0) = (ic.p, ic.q, ic.rho, ic.s);
    let (pd, qd, rd) = (oc.p, oc.q, oc.r);
    let hi = h as i32;
    let qdh = qd.powi(hi);
    match which {
        SteadyKind::Conditional => {
            let ratio = q0 / rho0;
            let first = (rho0 / p0 + geometric_sum(ratio, h)) * s0 / pd;
            let second = (rho0 / p0 + qdh * geometric_sum(ratio / qd, h)) * s0 / rd;
            first + second
        }
        SteadyKind::CyclicalRestartZero => (1.0 + q0 * pd * power_divided_difference(q0, qd, h)) / rd,
        SteadyKind::CyclicalRestartH => {
            let q0h = q0.powi(hi);
            (1.0 - qdh) / rd + (1.0 + p0 * qd * power_divided_difference(q0, qd, h)) / (rd * (2.0 - q0h))
        }
        SteadyKind::RowNormalized => {
            (1.0 - qdh) / rd + (1.0 + p0 * qd * geometric_sum(qd, h)) / (rd * (1.0 + h as f64 * p0))
        }
    }
}

/// The in-control (`delta -> 0`) values of the four steady-state ARLs.
pub fn closed_form_steady_limit(h: usize, k1: f64, which: SteadyKind) -> Result<f64> {
    let c = closed_form_s1(h, k1, 0.0)?;
    let (p0, q0, r0) = (c.p, c.q, c.r);
    let hf = h as f64;
    let q0h = q0.powi(h as i32);
    Ok(match which {
        SteadyKind::Conditional => 1.0 / (1.0 - c.rho),
        SteadyKind::CyclicalRestartZero => 1.0 / r0 + hf * q0h / (1.0 - q0h),
        SteadyKind::CyclicalRestartH => (1.0 - q0h) / r0 + (1.0 + hf * p0 * q0h) / (r0 * (2.0 - q0h)),
        SteadyKind::RowNormalized => (1.0 - q0h) / r0 + (1.0 + q0 * (1.0 - q0h)) / (r0 * (1.0 + hf * p0)),
    })
}

/// Numeric counterpart of [`closed_form_steady`] through the chain module.
pub fn numeric_steady(h: usize, k1: f64, delta: f64, which: SteadyKind) -> Result<f64> {
    let spec = SyntheticSpec::new(Variant::TrueSynthetic, true, h, k1);
    let ic = build_chain(&spec, 0.0)?;
    let oc = build_chain(&spec, delta)?;
    let ell = chain::arl_vector(&oc.q)?;
    let psi = match which {
        SteadyKind::Conditional => chain::dominant_left_eigen_warm(&ic.q, &ic.init)?.1,
        SteadyKind::CyclicalRestartZero => chain::cyclical_vector(&ic.q, 0)?,
        SteadyKind::CyclicalRestartH => chain::cyclical_vector(&ic.q, h)?,
        SteadyKind::RowNormalized => chain::crosier_wrong_vector(&ic.q)?,
    };
    chain::steady_state_arl(&psi, &ell)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn state_counts_match_table() {
        for v in Variant::ALL {
            for hs in [false, true] {
                for h in 1..=12 {
                    let s = SynthStructure::new(v, hs, h).unwrap();
                    assert_eq!(s.n_states(), expected_state_count(v, hs, h), "{v:?} hs={hs} H={h}");
                }
            }
        }
        assert_eq!(SynthStructure::new(Variant::SideSensitive, true, 3).unwrap().n_states(), 16);
        assert_eq!(SynthStructure::new(Variant::Modified, true, 3).unwrap().n_states(), 12);
    }

    #[test]
    fn true_synthetic_labels_are_gap_counter() {
        let s = SynthStructure::new(Variant::TrueSynthetic, false, 3).unwrap();
        assert_eq!(s.labels(), &["0", "1", "2", "3"]);
        assert_eq!(s.none_idx(), 3);
        assert_eq!(s.init_idx(), 3);
        let s = SynthStructure::new(Variant::TrueSynthetic, true, 3).unwrap();
        assert_eq!(s.init_idx(), 0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_chain(&SyntheticSpec::new(Variant::Revised, false, 0, 2.0), 0.0).is_err());
        assert!(build_chain(&SyntheticSpec::new(Variant::Revised, false, 2, 0.0), 0.0).is_err());
        assert!(build_chain(&SyntheticSpec::new(Variant::Revised, false, 2, 2.0).with_k2(2.0), 0.0).is_err());
    }

    #[test]
    fn hand_evaluated_closed_form() {
        let c = closed_form_s1_pq(1, 0.5);
        assert!((c.ell[0] - 4.0).abs() < 1e-14 && (c.ell[1] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn closed_form_invariants() {
        let c = closed_form_s1(4, 2.1, 0.7).unwrap();
        assert!((c.r - c.p * (1.0 - c.q.powi(4))).abs() < 1e-17);
        assert!((c.ell[0] - 1.0 / c.r).abs() < 1e-12 * c.ell[0]);
        assert!((c.ell[4] - (1.0 / c.r + 1.0 / c.p)).abs() < 1e-12 * c.ell[4]);
        let resid = (c.rho - c.q) * c.rho.powi(4) - c.p * c.q.powi(4);
        assert!(resid.abs() < 1e-12);
        for v in [&c.psi1, &c.psi2, &c.psi3, &c.psi4] {
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_matches_closed_form() {
        for &h in &[1usize, 2, 3, 7, 25] {
            for &k in &[1.5, 2.2238, 3.5] {
                for &delta in &[0.0, 0.5, 2.0, 5.0] {
                    let c = closed_form_s1(h, k, delta).unwrap();
                    let m = build_chain(&SyntheticSpec::new(Variant::TrueSynthetic, true, h, k), delta).unwrap();
                    let ell = chain::arl_vector(&m.q).unwrap();
                    for (a, b) in ell.iter().zip(&c.ell) {
                        assert!(rel(*a, *b) < 1e-9, "ell H={h} k={k} d={delta}: {a} vs {b}");
                    }
                    let (rho, psi1) = chain::dominant_left_eigen_warm(&m.q, &m.init).unwrap();
                    assert!(rel(rho, c.rho) < 1e-9);
                    for (a, b) in psi1.iter().zip(&c.psi1) {
                        assert!((a - b).abs() < 1e-9 * b.max(1e-3), "psi1 H={h} k={k} d={delta}: {a} vs {b} (psi1 {psi1:?} vs {:?})", c.psi1);
                    }
                    let psi2 = chain::cyclical_vector(&m.q, 0).unwrap();
                    let psi3 = chain::cyclical_vector(&m.q, h).unwrap();
                    let psi4 = chain::crosier_wrong_vector(&m.q).unwrap();
                    for (num, cf) in [(&psi2, &c.psi2), (&psi3, &c.psi3), (&psi4, &c.psi4)] {
                        for (a, b) in num.iter().zip(cf.iter()) {
                            assert!((a - b).abs() < 1e-9 * b.max(1e-3), "H={h} k={k} d={delta}: {a} vs {b}; num {num:?} cf {cf:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn steady_formulas_match_numeric_route() {
        for which in [1u8, 2, 3, 4].map(|n| SteadyKind::from_number(n).unwrap()) {
            for &(h, k, d) in &[(3usize, 2.2238, 0.0), (5, 2.5, 1.0), (2, 1.8, 3.0), (8, 2.0, 0.3)] {
                let cf = closed_form_steady(h, k, d, which).unwrap();
                let num = numeric_steady(h, k, d, which).unwrap();
                assert!(rel(cf, num) < 1e-9, "{which:?} H={h}: {cf} vs {num}");
            }
        }
    }

    #[test]
    fn steady_limits_at_zero_shift() {
        for which in [1u8, 2, 3, 4].map(|n| SteadyKind::from_number(n).unwrap()) {
            let at0 = closed_form_steady(3, 2.2238, 0.0, which).unwrap();
            let lim = closed_form_steady_limit(3, 2.2238, which).unwrap();
            assert!(rel(at0, lim) < 1e-10, "{which:?}");
        }
    }

    #[test]
    fn worst_state_is_no_pending_signal() {
        for v in Variant::ALL {
            for hs in [false, true] {
                let spec = SyntheticSpec::new(v, hs, 4, 2.0);
                for delta in [0.0, 1.0, 2.5] {
                    let m = build_chain(&spec, delta).unwrap();
                    let ell = chain::arl_vector(&m.q).unwrap();
                    assert_eq!(worst_state_by_scan(&ell), m.worst_idx, "{v:?} hs={hs} d={delta}");
                }
            }
        }
    }

    #[test]
    fn head_start_shares_transitions() {
        for v in Variant::ALL {
            let probs = gauss::event_probs(2.0, None, 0.8).unwrap();
            let r = SynthStructure::new(v, false, 5).unwrap();
            let s = SynthStructure::new(v, true, 5).unwrap();
            let (qr, qs) = (r.q_matrix(&probs), s.q_matrix(&probs));
            for i in 0..r.n_states() {
                let si = s.labels().iter().position(|l| l == &r.labels()[i]).unwrap();
                for j in 0..r.n_states() {
                    let sj = s.labels().iter().position(|l| l == &r.labels()[j]).unwrap();
                    assert_eq!(qr.get(i, j), qs.get(si, sj));
                }
            }
        }
    }

    #[test]
    fn combo_mass_leaves_every_state() {
        let spec = SyntheticSpec::new(Variant::Modified, false, 3, 2.0).with_k2(3.0);
        let m = build_chain(&spec, 1.0).unwrap();
        let e = gauss::event_probs(2.0, Some(3.0), 1.0).unwrap();
        for s in m.q.row_sums() {
            assert!(s <= 1.0 - e.p_alarm + 1e-15);
        }
    }
}
