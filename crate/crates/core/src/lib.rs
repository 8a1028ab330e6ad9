//! Weighted K-means for features on different scales of measurement.
//!
//! Three weighting schemes share one pipeline: weights are computed on the
//! raw features, the features are optionally z-scored, each column `j` is
//! multiplied by `sqrt(w_j^p)`, and plain K-means (Lloyd iterations from
//! K-means++ seeds) runs on the result.
//!
//! ```
//! use grkmeans::{cluster, gen_gapratio_toy, KMeansConfig, MethodSpec, WeightScheme};
//!
//! let data = gen_gapratio_toy(25, 7).unwrap();
//! let method = MethodSpec::new(WeightScheme::Gr, 1, true);
//! let out = cluster(data.features(), &method, &KMeansConfig::new(2).with_seed(1)).unwrap();
//! assert!(out.weights.values[1] > out.weights.values[0]);
//! assert_eq!(out.model.assignments.len(), 50);
//! ```

pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod kmeans;
pub mod matrix;
pub mod preprocess;
pub mod rng;
pub mod weights;

pub use datasets::{
    gen_gapratio_toy, gen_lego, gen_norm_toy, load_csv, read_csv, save_csv, write_csv,
    BrickPrototype, LabelColumn, LabeledDataset, LegoGenConfig,
};
pub use error::{Error, Result};
pub use evaluation::{
    cluster, error_rate, run_benchmark, run_experiment, sweep_exponent, BenchmarkReport,
    ExperimentConfig, ExperimentReport, MethodSpec, PipelineResult, TrialSource,
};
pub use kmeans::{fit, ClusteringModel, KMeansConfig};
pub use matrix::FeatureMatrix;
pub use preprocess::{apply_feature_map, compute_stats, normalize, standardize, FeatureStats};
pub use weights::{cv_weights, gr_weights, uniform_weights, WeightScheme, WeightVector};
