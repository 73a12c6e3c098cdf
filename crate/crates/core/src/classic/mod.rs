//! Run-length engines for the classical charts: EWMA (exact and fixed
//! limits), two-sided CUSUM, Shewhart, and the Shewhart combos of the first
//! two. Continuous chart statistics are discretized into Markov chains.

pub mod cusum;
pub mod ewma;
pub mod shewhart;

pub use cusum::{cusum_arl, cusum_model, cusum_one_sided_arl, cusum_steady_arl, CusumSpec, DEFAULT_CUSUM_GRID};
pub use ewma::{
    ewma_arl, ewma_arl_grid_checked, ewma_ced, ewma_model, ewma_steady_arl, EwmaSpec, LimitStyle, DEFAULT_EWMA_GRID,
};
pub use shewhart::{shewhart_arl, shewhart_model, ShewhartSpec};

use crate::error::{Error, Result};

/// Zero-state ARL of a Shewhart-EWMA combo (`k2` set, fixed limits).
pub fn shewhart_ewma_combo_arl(spec: &EwmaSpec, delta: f64) -> Result<f64> {
    if spec.k2.is_none() {
        return Err(Error::InvalidParameter("combo needs a Shewhart limit k2".into()));
    }
    if spec.limit_style != LimitStyle::Fixed {
        return Err(Error::InvalidParameter("the Shewhart-EWMA combo uses fixed EWMA limits".into()));
    }
    ewma_arl(spec, delta)
}
