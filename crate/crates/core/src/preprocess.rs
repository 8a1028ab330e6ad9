//! Z-score normalization and the weight-folding feature map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::weights::WeightVector;

/// Per-column means and population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

pub fn compute_stats(features: &FeatureMatrix) -> Result<FeatureStats> {
    if features.is_empty() {
        return Err(Error::Empty(
            "cannot compute statistics of an empty matrix".into(),
        ));
    }
    let m = features.n_rows() as f64;
    let (means, std_devs) = (0..features.n_cols())
        .map(|j| {
            let mean = features.column(j).sum::<f64>() / m;
            let var = features.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / m;
            (mean, var.sqrt())
        })
        .unzip();
    Ok(FeatureStats { means, std_devs })
}

/// `(x - mean) / sd` per column. Constant columns (`sd == 0`) become zeros.
pub fn normalize(features: &FeatureMatrix, stats: &FeatureStats) -> Result<FeatureMatrix> {
    let n = features.n_cols();
    for len in [stats.means.len(), stats.std_devs.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    Ok(features.map_cells(|j, v| {
        let sd = stats.std_devs[j];
        if sd > 0.0 {
            (v - stats.means[j]) / sd
        } else {
            0.0
        }
    }))
}

/// Convenience: statistics and normalization in one call.
pub fn standardize(features: &FeatureMatrix) -> Result<FeatureMatrix> {
    normalize(features, &compute_stats(features)?)
}

/// Column scale factors `sqrt(w_j^p)` of the feature map.
pub fn feature_map_scales(weights: &WeightVector) -> Vec<f64> {
    let half_p = f64::from(weights.exponent) / 2.0;
    weights.values.iter().map(|w| w.powf(half_p)).collect()
}

/// Multiplies column `j` by `sqrt(w_j^p)`.
///
/// Plain Euclidean K-means on the result is K-means under the weighted norm
/// `sqrt(sum_j w_j^p (x_j - c_j)^2)` on the input.
pub fn apply_feature_map(
    features: &FeatureMatrix,
    weights: &WeightVector,
) -> Result<FeatureMatrix> {
    if weights.values.len() != features.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: features.n_cols(),
            actual: weights.values.len(),
        });
    }
    if let Some(w) = weights.values.iter().find(|w| w.is_nan() || **w < 0.0) {
        return Err(Error::invalid(format!("negative weight {w}")));
    }
    let scales = feature_map_scales(weights);
    Ok(features.map_cells(|j, v| v * scales[j]))
}
