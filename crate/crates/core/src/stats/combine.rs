//! Multiple-testing control: Bonferroni and Fisher's method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Family-wise decision under the Bonferroni correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyVerdict {
    pub alpha: f64,
    pub corrected_alpha: f64,
    pub k: usize,
    pub reject_any: bool,
    /// Names of the tests with p below the corrected level.
    pub rejecting_features: Vec<String>,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("p-value {p} outside [0, 1]")))
    }
}

/// Rejects the family null if any p-value is below α/k.
pub fn bonferroni_family(results: &[(String, f64)], alpha: f64) -> Result<FamilyVerdict> {
    check_alpha(alpha)?;
    if results.is_empty() {
        return Err(Error::InvalidArgument("Bonferroni needs at least one test".into()));
    }
    for (_, p) in results {
        check_p(*p)?;
    }
    let k = results.len();
    let corrected = alpha / k as f64;
    let rejecting_features: Vec<String> = results
        .iter()
        .filter(|(_, p)| *p < corrected)
        .map(|(n, _)| n.clone())
        .collect();
    Ok(FamilyVerdict {
        alpha,
        corrected_alpha: corrected,
        k,
        reject_any: !rejecting_features.is_empty(),
        rejecting_features,
    })
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Upper tail of the χ² distribution for even degrees of freedom:
/// e^{−x/2} Σ_{m<dof/2} (x/2)^m / m!.
///
/// Terms are built in log space so large `x` or many degrees of freedom do
/// not underflow the leading exponential before the sum can compensate.
pub fn chi2_sf(x: f64, dof: u32) -> Result<f64> {
    if dof == 0 || dof % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "chi2_sf supports positive even degrees of freedom, got {dof}"
        )));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidArgument(format!("chi2_sf needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let h = x / 2.0;
    let ln_h = h.ln();
    let mut log_term = -h;
    let terms = (0..dof / 2).map(|m| {
        if m > 0 {
            log_term += ln_h - (m as f64).ln();
        }
        log_term.exp()
    });
    Ok(compensated_sum(terms).clamp(0.0, 1.0))
}

/// Fisher's combined test: Ψ = −2 Σ ln pᵢ against χ² with 2k degrees of
/// freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    pub psi: f64,
    pub dof: u32,
    pub k: usize,
    pub p_value: f64,
    pub surprisal: f64,
    pub underflow: bool,
}

pub fn fisher_combine(p_values: &[f64]) -> Result<FisherResult> {
    if p_values.is_empty() {
        return Err(Error::InvalidArgument("Fisher's method needs at least one p-value".into()));
    }
    for &p in p_values {
        check_p(p)?;
        if p <= 0.0 {
            return Err(Error::InvalidArgument(
                "Fisher's method is undefined for a p-value of 0".into(),
            ));
        }
    }
    let psi = -2.0 * compensated_sum(p_values.iter().map(|p| p.ln()));
    let psi = psi.max(0.0);
    let dof = 2 * p_values.len() as u32;
    let (p, underflow) = super::floor_p(chi2_sf(psi, dof)?);
    Ok(FisherResult {
        psi,
        dof,
        k: p_values.len(),
        p_value: p,
        surprisal: super::surprisal_of_floored(p),
        underflow,
    })
}
