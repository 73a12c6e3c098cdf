//! One enum over every chart design, with the run-length measures the
//! study and the command line need.

use crate::chain::{self, CedProfile, MarkovModel};
use crate::classic::{self, CusumSpec, EwmaSpec, ShewhartSpec};
use crate::error::{Error, Result};
use crate::synth::{self, SyntheticSpec};

/// Which ARL a comparison is based on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    /// Shift present from the first observation, chart in its start state.
    ZeroState,
    /// Conditional steady-state ARL (limit of the CED sequence).
    SteadyState,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::ZeroState => "zero",
            Measure::SteadyState => "steady",
        }
    }
}

/// Change-point model: `X_t ~ N(0, 1)` for `t < tau`, `N(delta, 1)` after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftModel {
    pub delta: f64,
    pub tau: usize,
}

impl ShiftModel {
    pub fn immediate(delta: f64) -> Self {
        Self { delta, tau: 1 }
    }

    pub fn at(delta: f64, tau: usize) -> Self {
        Self { delta, tau }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChartSpec {
    Synthetic(SyntheticSpec),
    Ewma(EwmaSpec),
    Cusum(CusumSpec),
    Shewhart(ShewhartSpec),
}

/// A chart parameter a calibration can solve for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FreeParam {
    /// Synthetic warning limit.
    K1,
    /// EWMA limit factor.
    C,
    /// CUSUM decision interval.
    H,
    /// Shewhart limit.
    K,
}

impl FreeParam {
    pub fn name(self) -> &'static str {
        match self {
            FreeParam::K1 => "k1",
            FreeParam::C => "c",
            FreeParam::H => "h",
            FreeParam::K => "k",
        }
    }
}

impl ChartSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ChartSpec::Synthetic(s) => s.validate(),
            ChartSpec::Ewma(s) => s.validate(),
            ChartSpec::Cusum(s) => s.validate(),
            ChartSpec::Shewhart(s) => s.validate(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ChartSpec::Synthetic(s) => s.label(),
            ChartSpec::Ewma(s) => s.label(),
            ChartSpec::Cusum(s) => s.label(),
            ChartSpec::Shewhart(_) => "Shewhart".into(),
        }
    }

    pub fn default_free_param(&self) -> FreeParam {
        match self {
            ChartSpec::Synthetic(_) => FreeParam::K1,
            ChartSpec::Ewma(_) => FreeParam::C,
            ChartSpec::Cusum(_) => FreeParam::H,
            ChartSpec::Shewhart(_) => FreeParam::K,
        }
    }

    pub fn parameter(&self, p: FreeParam) -> Result<f64> {
        match (self, p) {
            (ChartSpec::Synthetic(s), FreeParam::K1) => Ok(s.k1),
            (ChartSpec::Ewma(s), FreeParam::C) => Ok(s.c),
            (ChartSpec::Cusum(s), FreeParam::H) => Ok(s.h),
            (ChartSpec::Shewhart(s), FreeParam::K) => Ok(s.k),
            _ => Err(self.no_such_param(p)),
        }
    }

    pub fn with_parameter(&self, p: FreeParam, value: f64) -> Result<ChartSpec> {
        let mut out = *self;
        match (&mut out, p) {
            (ChartSpec::Synthetic(s), FreeParam::K1) => s.k1 = value,
            (ChartSpec::Ewma(s), FreeParam::C) => s.c = value,
            (ChartSpec::Cusum(s), FreeParam::H) => s.h = value,
            (ChartSpec::Shewhart(s), FreeParam::K) => s.k = value,
            _ => return Err(self.no_such_param(p)),
        }
        Ok(out)
    }

    fn no_such_param(&self, p: FreeParam) -> Error {
        Error::InvalidParameter(format!("{} has no parameter {}", self.label(), p.name()))
    }

    /// Zero-state or conditional steady-state ARL at shift `delta`.
    pub fn arl(&self, delta: f64, measure: Measure) -> Result<f64> {
        self.validate()?;
        match (self, measure) {
            (ChartSpec::Shewhart(s), _) => classic::shewhart_arl(s, delta),
            (ChartSpec::Ewma(s), Measure::ZeroState) => classic::ewma_arl(s, delta),
            (ChartSpec::Ewma(s), Measure::SteadyState) => classic::ewma_steady_arl(s, delta),
            (ChartSpec::Cusum(s), Measure::ZeroState) => classic::cusum_arl(s, delta),
            (ChartSpec::Cusum(s), Measure::SteadyState) => classic::cusum_steady_arl(s, delta),
            (ChartSpec::Synthetic(s), Measure::ZeroState) => {
                let m = synth::build_chain(s, delta)?;
                let ell = chain::arl_vector(&m.q)?;
                chain::zero_state_arl(&m, &ell)
            }
            (ChartSpec::Synthetic(s), Measure::SteadyState) => {
                let ic = synth::build_chain(s, 0.0)?;
                let (_, psi) = chain::dominant_left_eigen_warm(&ic.q, &ic.init)?;
                let oc = synth::build_chain(s, delta)?;
                chain::steady_state_arl(&psi, &chain::arl_vector(&oc.q)?)
            }
        }
    }

    /// Homogeneous Markov model at `delta` (for exact-limit EWMA, the
    /// chain on the asymptotic limits).
    pub fn model(&self, delta: f64) -> Result<MarkovModel> {
        match self {
            ChartSpec::Synthetic(s) => synth::build_chain(s, delta),
            ChartSpec::Ewma(s) => classic::ewma_model(s, delta),
            ChartSpec::Cusum(s) => classic::cusum_model(s, delta),
            ChartSpec::Shewhart(s) => classic::shewhart_model(s, delta),
        }
    }

    /// CED profile `D_1..D_tau_max` and its limit.
    pub fn ced(&self, delta: f64, tau_max: usize) -> Result<CedProfile> {
        self.validate()?;
        match self {
            ChartSpec::Ewma(s) => classic::ewma_ced(s, delta, tau_max),
            _ => {
                let ic = self.model(0.0)?;
                let oc = self.model(delta)?;
                chain::ced_profile(&ic.q, &oc.q, &ic.init, tau_max)
            }
        }
    }
}
