//! Two-sample Kolmogorov-Smirnov test.

use serde::{Deserialize, Serialize};

use super::{floor_p, surprisal_of_floored};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Largest pooled size accepted by [`ks_p_exact_small`].
pub const EXACT_MAX_POOLED: usize = 16;

/// Outcome of one two-sample K-S test on one feature.
///
/// `p_value` is floored at [`super::P_FLOOR`]; `underflow` records that the
/// computed value fell below the floor. `surprisal` is −log2 of the stored
/// p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub feature: String,
    pub d_stat: f64,
    pub p_value: f64,
    pub surprisal: f64,
    pub n1: usize,
    pub n2: usize,
    pub alpha: f64,
    pub reject: bool,
    pub underflow: bool,
    /// Items without a value for the feature, per corpus.
    pub excluded: (usize, usize),
}

/// Numerator of D over the common denominator n1·n2, so that D values of
/// equal-size samples compare exactly.
fn ecdf_distance_scaled(xs: &[f64], ys: &[f64]) -> u64 {
    let (n1, n2) = (xs.len() as i64, ys.len() as i64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0i64;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        best = best.max((i as i64 * n2 - j as i64 * n1).abs());
    }
    best as u64
}

/// Sup-distance between the right-continuous empirical CDFs of two sorted
/// samples. Tied values are consumed on both sides before comparing.
pub fn ecdf_distance(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidArgument("ecdf_distance needs two non-empty samples".into()));
    }
    debug_assert!(xs.windows(2).all(|w| w[0] <= w[1]), "xs must be sorted");
    debug_assert!(ys.windows(2).all(|w| w[0] <= w[1]), "ys must be sorted");
    let scaled = ecdf_distance_scaled(xs, ys);
    Ok(scaled as f64 / (xs.len() as f64 * ys.len() as f64))
}

const SERIES_EPS: f64 = 1e-12;

/// Kolmogorov survival function Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²λ²}.
///
/// For small λ the alternating series converges slowly, so the equivalent
/// theta-function form 1 − (√(2π)/λ) Σ_{k≥1} e^{−(2k−1)²π²/(8λ²)} is used
/// instead. Both are truncated once a term drops below 1e−12.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.6 {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut sum = 0.0;
        for k in 1.. {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * pi2 / (8.0 * lambda * lambda)).exp();
            sum += term;
            if term < SERIES_EPS {
                break;
            }
        }
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1.. {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += sign * term;
        if term < SERIES_EPS {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic two-sided p-value for statistic `d` with Stephens' correction,
/// λ = (√nₑ + 0.12 + 0.11/√nₑ)·d, nₑ = n1·n2/(n1+n2).
///
/// The raw value may underflow to 0; see [`super::floor_p`].
pub fn ks_p_asymptotic(d: f64, n1: usize, n2: usize) -> f64 {
    if d <= 0.0 || n1 == 0 || n2 == 0 {
        return 1.0;
    }
    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let sq = ne.sqrt();
    kolmogorov_q((sq + 0.12 + 0.11 / sq) * d)
}

/// Exact permutation p-value: the fraction of all C(n1+n2, n1) relabelings
/// of the pooled sample whose D is at least the observed D.
///
/// Enumerates every relabeling, so the pooled size is capped at
/// [`EXACT_MAX_POOLED`].
pub fn ks_p_exact_small(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let (n1, n2) = (xs.len(), ys.len());
    let n = n1 + n2;
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument("exact K-S needs two non-empty samples".into()));
    }
    if n > EXACT_MAX_POOLED {
        return Err(Error::InvalidArgument(format!(
            "exact K-S enumeration supports pooled size <= {EXACT_MAX_POOLED}, got {n}"
        )));
    }

    let mut pooled: Vec<(f64, bool)> = xs
        .iter()
        .map(|&x| (x, true))
        .chain(ys.iter().map(|&y| (y, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    // positions where a run of equal values ends
    let group_ends: Vec<usize> = (0..n)
        .filter(|&p| p + 1 == n || pooled[p + 1].0 != pooled[p].0)
        .collect();

    let scaled_d = |mask: u32| -> i64 {
        let (mut a, mut p) = (0i64, 0usize);
        let mut best = 0i64;
        for &end in &group_ends {
            while p <= end {
                if mask & (1 << p) != 0 {
                    a += 1;
                }
                p += 1;
            }
            let b = p as i64 - a;
            best = best.max((a * n2 as i64 - b * n1 as i64).abs());
        }
        best
    };

    let observed_mask = pooled
        .iter()
        .enumerate()
        .filter(|(_, (_, first))| *first)
        .fold(0u32, |m, (p, _)| m | (1 << p));
    let observed = scaled_d(observed_mask);

    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        total += 1;
        if scaled_d(mask) >= observed {
            hits += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// K-S test on two raw samples of one feature.
pub fn ks_test(feature: &str, xs: Vec<f64>, ys: Vec<f64>, alpha: f64) -> Result<KsResult> {
    super::combine::check_alpha(alpha)?;
    if xs.iter().chain(&ys).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument(format!("{feature}: samples contain NaN")));
    }
    let xs = sorted(xs);
    let ys = sorted(ys);
    let d = ecdf_distance(&xs, &ys)?;
    let (p, underflow) = floor_p(ks_p_asymptotic(d, xs.len(), ys.len()));
    Ok(KsResult {
        feature: feature.to_owned(),
        d_stat: d,
        p_value: p,
        surprisal: surprisal_of_floored(p),
        n1: xs.len(),
        n2: ys.len(),
        alpha,
        reject: p < alpha,
        underflow,
        excluded: (0, 0),
    })
}

/// Minimum number of items per side carrying a feature.
pub const MIN_ITEMS_PER_SIDE: usize = 2;

/// Compares the distribution of `feature` between two corpora. Items lacking
/// the feature are excluded and counted.
pub fn two_sample_ks(a: &Corpus, b: &Corpus, feature: &str, alpha: f64) -> Result<KsResult> {
    let (xs, ex_a) = a.feature_values(feature);
    let (ys, ex_b) = b.feature_values(feature);
    if xs.is_empty() && ys.is_empty() {
        return Err(Error::FeatureAbsent {
            feature: feature.to_owned(),
        });
    }
    for (vals, c) in [(&xs, a), (&ys, b)] {
        if vals.len() < MIN_ITEMS_PER_SIDE {
            return Err(Error::InsufficientData {
                feature: feature.to_owned(),
                corpus: c.display_name(),
                have: vals.len(),
                need: MIN_ITEMS_PER_SIDE,
            });
        }
    }
    let mut r = ks_test(feature, xs, ys, alpha)?;
    r.excluded = (ex_a, ex_b);
    Ok(r)
}
