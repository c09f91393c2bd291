//! Hypothesis tests used by the detector.

mod combine;
mod ks;

pub(crate) use combine::check_alpha;
pub use combine::{bonferroni_family, chi2_sf, fisher_combine, FamilyVerdict, FisherResult};
pub use ks::{
    ecdf_distance, ks_p_asymptotic, ks_p_exact_small, ks_test, two_sample_ks, KsResult, EXACT_MAX_POOLED,
    MIN_ITEMS_PER_SIDE,
};

use crate::error::{Error, Result};

/// Smallest reported p-value; anything below is stored as this value with an
/// underflow flag set.
pub const P_FLOOR: f64 = 1e-300;

/// Clamps a raw p-value at [`P_FLOOR`], returning whether it underflowed.
pub fn floor_p(raw: f64) -> (f64, bool) {
    if raw < P_FLOOR {
        (P_FLOOR, true)
    } else {
        (raw.min(1.0), false)
    }
}

/// Surprisal in bits, −log2 p. A p-value of exactly 0 maps to +∞.
pub fn surprisal(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p-value {p} outside [0, 1]")));
    }
    if p == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(0.0 - p.log2())
}

pub(crate) fn surprisal_of_floored(p: f64) -> f64 {
    0.0 - p.log2()
}

/// Renders a p-value for display, marking floored values. Values from 0.001
/// up print in fixed notation, smaller ones in scientific notation.
pub fn format_p(p: f64, underflow: bool) -> String {
    if underflow {
        "0 (<1e-300)".to_owned()
    } else if p >= 1e-3 {
        format!("{p:.4}")
    } else {
        format!("{p:.3e}")
    }
}
