//! Per-feature weights for weighted K-means.
//!
//! All schemes produce non-negative weights summing to one. Weights are
//! computed on the raw features (normalization would erase the information
//! they capture) and later folded into the normalized data by
//! [`crate::preprocess::apply_feature_map`].
//!
//! * `uniform` - every feature weighs `1/N`: regular K-means.
//! * `cv` - proportional to the coefficient of variation `sd / |mean|`.
//!   Only meaningful on ratio scales; shifting a column changes it.
//! * `gr` - proportional to the gap ratio: sort a column, take the gaps
//!   between consecutive values, and divide the biggest gap by the mean of
//!   the remaining ones. Invariant under translation and positive scaling
//!   of a column, so it also suits interval-scale features such as colours.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Relative size of the denominator guard, multiplied by the column range.
pub const EPS_RELATIVE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    Uniform,
    Cv,
    Gr,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 3] = [WeightScheme::Uniform, WeightScheme::Cv, WeightScheme::Gr];

    pub fn as_str(self) -> &'static str {
        match self {
            WeightScheme::Uniform => "uniform",
            WeightScheme::Cv => "cv",
            WeightScheme::Gr => "gr",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    /// `none` is accepted as an alias of `uniform`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "none" => Ok(WeightScheme::Uniform),
            "cv" => Ok(WeightScheme::Cv),
            "gr" => Ok(WeightScheme::Gr),
            other => Err(Error::invalid(format!("unknown weight scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub scheme: WeightScheme,
    /// Power applied to each weight inside the distance.
    pub exponent: u32,
    pub values: Vec<f64>,
}

impl WeightVector {
    pub fn with_exponent(mut self, exponent: u32) -> Self {
        self.exponent = exponent;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn uniform_weights(n: usize) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::invalid("uniform weights need n >= 1"));
    }
    Ok(WeightVector {
        scheme: WeightScheme::Uniform,
        exponent: 1,
        values: vec![1.0 / n as f64; n],
    })
}

/// Weights of `scheme` for `features`, exponent 1.
pub fn compute_weights(scheme: WeightScheme, features: &FeatureMatrix) -> Result<WeightVector> {
    match scheme {
        WeightScheme::Uniform => uniform_weights(features.n_cols()),
        WeightScheme::Cv => cv_weights(features),
        WeightScheme::Gr => gr_weights(features),
    }
}

fn guard(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    EPS_RELATIVE * if range > 0.0 { range } else { 1.0 }
}

/// `sd / max(|mean|, eps)` with the population standard deviation.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m).sqrt();
    sd / mean.abs().max(guard(values))
}

/// Gap statistics of one feature column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapStats {
    /// Largest gap between consecutive sorted values.
    pub biggest: f64,
    /// Position of the biggest gap in the sorted order (first on ties).
    pub biggest_index: usize,
    /// Mean of the other `M - 2` gaps.
    pub mean_other: f64,
    pub ratio: f64,
}

/// Requires at least three values. Duplicates are kept and contribute zero
/// gaps.
pub fn gap_stats(values: &[f64]) -> Result<GapStats> {
    if values.len() < 3 {
        return Err(Error::invalid(format!(
            "gap ratio needs at least 3 values, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    let (biggest_index, biggest) =
        gaps.iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, g)| {
                if g > best.1 {
                    (i, g)
                } else {
                    best
                }
            });
    let rest: f64 = gaps
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != biggest_index)
        .map(|(_, g)| g)
        .sum();
    let mean_other = rest / (gaps.len() - 1) as f64;
    let ratio = if biggest > 0.0 {
        biggest / mean_other.max(guard(values))
    } else {
        0.0
    };
    Ok(GapStats {
        biggest,
        biggest_index,
        mean_other,
        ratio,
    })
}

fn normalized(raw: Vec<f64>, scheme: WeightScheme) -> Result<WeightVector> {
    let total: f64 = raw.iter().sum();
    if total.is_nan() || total <= 0.0 || !total.is_finite() {
        return Err(Error::Degenerate(format!(
            "{scheme} weights undefined: every feature is constant"
        )));
    }
    Ok(WeightVector {
        scheme,
        exponent: 1,
        values: raw.into_iter().map(|v| v / total).collect(),
    })
}

fn columns(features: &FeatureMatrix) -> impl Iterator<Item = Vec<f64>> + '_ {
    (0..features.n_cols()).map(|j| features.column(j).collect())
}

/// Coefficient-of-variation weights. Compute these on raw data: after
/// normalization every mean is zero.
pub fn cv_weights(features: &FeatureMatrix) -> Result<WeightVector> {
    if features.n_rows() < 2 {
        return Err(Error::invalid("cv weights need at least 2 rows"));
    }
    let raw = columns(features)
        .map(|c| coefficient_of_variation(&c))
        .collect();
    normalized(raw, WeightScheme::Cv)
}

pub fn gr_weights(features: &FeatureMatrix) -> Result<WeightVector> {
    if features.n_rows() < 3 {
        return Err(Error::invalid("gr weights need at least 3 rows"));
    }
    let raw = columns(features)
        .map(|c| gap_stats(&c).map(|g| g.ratio))
        .collect::<Result<Vec<_>>>()?;
    normalized(raw, WeightScheme::Gr)
}
