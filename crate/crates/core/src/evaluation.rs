//! Error rates against ground truth and replicated experiments.
//!
//! Clusters are matched to classes by the one-to-one mapping that maximizes
//! agreement, so cluster numbering never counts as an error. A run *fails*
//! when it misclassifies at least one point.
//!
//! Run `r` of an experiment uses seed `derive_seed(base_seed, r)`: the
//! generator (if any) draws the dataset from that seed and K-means seeds
//! from `derive_seed(seed, 1)`. Seeds depend only on the run index, so two
//! experiments that differ only in method or exponent see identical data
//! and identical random streams.

use std::borrow::Cow;
use std::io::{Read, Write};
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{gen_lego, LabeledDataset, LegoGenConfig};
use crate::error::{Error, Result};
use crate::kmeans::{fit, ClusteringModel, KMeansConfig};
use crate::matrix::FeatureMatrix;
use crate::preprocess::{apply_feature_map, standardize};
use crate::rng::derive_seed;
use crate::weights::{compute_weights, WeightScheme, WeightVector};

/// Largest K for which matching enumerates all K! permutations.
pub const EXHAUSTIVE_MATCHING_MAX_K: usize = 5;

/// Square contingency table: `table[cluster][class]`.
pub fn confusion_matrix(
    assignments: &[usize],
    labels: &[usize],
    k: usize,
) -> Result<Vec<Vec<u64>>> {
    if assignments.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: assignments.len(),
        });
    }
    let size = assignments
        .iter()
        .chain(labels)
        .map(|&v| v + 1)
        .max()
        .unwrap_or(0)
        .max(k);
    let mut table = vec![vec![0u64; size]; size];
    for (&a, &l) in assignments.iter().zip(labels) {
        table[a][l] += 1;
    }
    Ok(table)
}

/// Best total agreement over all permutations (cluster `i` -> class `perm[i]`).
pub fn exhaustive_matching(table: &[Vec<u64>]) -> u64 {
    fn go(table: &[Vec<u64>], row: usize, used: &mut [bool]) -> u64 {
        if row == table.len() {
            return 0;
        }
        let mut best = 0;
        for col in 0..table.len() {
            if !used[col] {
                used[col] = true;
                best = best.max(table[row][col] + go(table, row + 1, used));
                used[col] = false;
            }
        }
        best
    }
    go(table, 0, &mut vec![false; table.len()])
}

/// Best total agreement via the Hungarian algorithm, `O(n^3)`.
pub fn hungarian_matching(table: &[Vec<u64>]) -> u64 {
    let n = table.len();
    if n == 0 {
        return 0;
    }
    let max = table.iter().flatten().copied().max().unwrap_or(0) as i64;
    // minimize (max - agreement); potentials over 1-based rows/cols
    let cost = |i: usize, j: usize| max - table[i - 1][j - 1] as i64;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| table[owner[j] - 1][j - 1]).sum()
}

/// Fraction of points misclassified under the best cluster-to-class
/// matching.
pub fn error_rate(assignments: &[usize], labels: &[usize], k: usize) -> Result<f64> {
    let table = confusion_matrix(assignments, labels, k)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let matched = if table.len() <= EXHAUSTIVE_MATCHING_MAX_K {
        exhaustive_matching(&table)
    } else {
        hungarian_matching(&table)
    };
    Ok((labels.len() as u64 - matched) as f64 / labels.len() as f64)
}

/// One clustering method: weight scheme, exponent, and whether features are
/// z-scored before the weights are folded in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodSpec {
    pub scheme: WeightScheme,
    pub exponent: u32,
    pub scaling: bool,
}

impl MethodSpec {
    pub fn new(scheme: WeightScheme, exponent: u32, scaling: bool) -> Self {
        Self {
            scheme,
            exponent,
            scaling,
        }
    }

    /// Short name such as `gr^2 (scaled)`.
    pub fn label(&self) -> String {
        let base = match (self.scheme, self.exponent) {
            (WeightScheme::Uniform, _) => "k-means".to_owned(),
            (s, 1) => s.to_string(),
            (s, p) => format!("{s}^{p}"),
        };
        let scaling = if self.scaling { "scaled" } else { "raw" };
        format!("{base} ({scaling})")
    }
}

/// Weights computed on the raw features, then optional z-scoring, then the
/// feature map.
pub fn transform_features(
    features: &FeatureMatrix,
    method: &MethodSpec,
) -> Result<(WeightVector, FeatureMatrix)> {
    let weights = compute_weights(method.scheme, features)?.with_exponent(method.exponent);
    let base = if method.scaling {
        Cow::Owned(standardize(features)?)
    } else {
        Cow::Borrowed(features)
    };
    let mapped = apply_feature_map(&base, &weights)?;
    Ok((weights, mapped))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineResult {
    pub weights: WeightVector,
    pub model: ClusteringModel,
}

/// Full clustering pipeline on one feature matrix.
pub fn cluster(
    features: &FeatureMatrix,
    method: &MethodSpec,
    kmeans: &KMeansConfig,
) -> Result<PipelineResult> {
    let (weights, mapped) = transform_features(features, method)?;
    let model = fit(&mapped, kmeans)?;
    Ok(PipelineResult { weights, model })
}

/// Where the data of each replicated run comes from.
pub trait TrialSource: Sync {
    /// Dataset for the run seeded with `seed`.
    fn trial(&self, seed: u64) -> Result<Cow<'_, LabeledDataset>>;

    /// True when every run sees the same dataset.
    fn is_fixed(&self) -> bool {
        false
    }
}

impl TrialSource for LabeledDataset {
    fn trial(&self, _seed: u64) -> Result<Cow<'_, LabeledDataset>> {
        Ok(Cow::Borrowed(self))
    }

    fn is_fixed(&self) -> bool {
        true
    }
}

/// A fresh table of bricks (new lighting, new noise) for every run.
impl TrialSource for LegoGenConfig {
    fn trial(&self, seed: u64) -> Result<Cow<'_, LabeledDataset>> {
        gen_lego(&self.with_seed(seed)).map(Cow::Owned)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: MethodSpec,
    pub n_runs: usize,
    pub mean_error_rate: f64,
    /// Fraction of runs with at least one misclassified point.
    pub failure_rate: f64,
    pub per_run_errors: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// Knobs of an experiment besides the method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub n_runs: usize,
    pub base_seed: u64,
    /// `k` is ignored; every run clusters into the dataset's class count.
    pub kmeans: KMeansConfig,
}

impl ExperimentConfig {
    pub fn new(n_runs: usize, base_seed: u64) -> Self {
        Self {
            n_runs,
            base_seed,
            kmeans: KMeansConfig::new(1).with_n_init(10),
        }
    }

    pub fn with_n_init(mut self, n_init: usize) -> Self {
        self.kmeans.n_init = n_init;
        self
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        derive_seed(self.base_seed, run as u64)
    }
}

fn run_once(
    data: &LabeledDataset,
    mapped: &FeatureMatrix,
    kmeans: &KMeansConfig,
    seed: u64,
) -> Result<f64> {
    let config = KMeansConfig {
        k: data.n_classes(),
        seed: derive_seed(seed, 1),
        ..*kmeans
    };
    let model = fit(mapped, &config)?;
    error_rate(&model.assignments, data.labels(), config.k)
}

pub fn run_experiment<S: TrialSource + ?Sized>(
    source: &S,
    method: &MethodSpec,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if config.n_runs == 0 {
        return Err(Error::invalid("n_runs must be >= 1"));
    }
    let seeds: Vec<u64> = (0..config.n_runs).map(|r| config.run_seed(r)).collect();
    let shared = if source.is_fixed() {
        let data = source.trial(0)?;
        let mapped = transform_features(data.features(), method)?.1;
        Some((data, mapped))
    } else {
        None
    };
    let per_run_errors = seeds
        .par_iter()
        .map(|&seed| match &shared {
            Some((data, mapped)) => run_once(data, mapped, &config.kmeans, seed),
            None => {
                let data = source.trial(seed)?;
                let mapped = transform_features(data.features(), method)?.1;
                run_once(&data, &mapped, &config.kmeans, seed)
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let n = config.n_runs as f64;
    let mean_error_rate = per_run_errors.iter().sum::<f64>() / n;
    let failures = per_run_errors.iter().filter(|&&e| e > 0.0).count();
    Ok(ExperimentReport {
        method: *method,
        n_runs: config.n_runs,
        mean_error_rate,
        failure_rate: failures as f64 / n,
        per_run_errors,
        seeds,
    })
}

/// One report per exponent in `exponents`, all sharing the run seeds.
pub fn sweep_exponent<S: TrialSource + ?Sized>(
    source: &S,
    scheme: WeightScheme,
    exponents: RangeInclusive<u32>,
    scaling: bool,
    config: &ExperimentConfig,
) -> Result<Vec<ExperimentReport>> {
    if exponents.is_empty() {
        return Err(Error::invalid("exponent range is empty"));
    }
    exponents
        .map(|p| run_experiment(source, &MethodSpec::new(scheme, p, scaling), config))
        .collect()
}

/// The five methods compared on the UCI benchmarks: K-means, gr, cv, gr^2,
/// cv^2, each with and without scaling (scaled first).
pub fn benchmark_methods() -> Vec<MethodSpec> {
    let base = [
        (WeightScheme::Uniform, 1),
        (WeightScheme::Gr, 1),
        (WeightScheme::Cv, 1),
        (WeightScheme::Gr, 2),
        (WeightScheme::Cv, 2),
    ];
    [true, false]
        .into_iter()
        .flat_map(|scaling| base.map(|(s, p)| MethodSpec::new(s, p, scaling)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub dataset: String,
    pub n_runs: usize,
    pub base_seed: u64,
    pub cells: Vec<ExperimentReport>,
}

impl BenchmarkReport {
    pub fn cell(
        &self,
        scheme: WeightScheme,
        exponent: u32,
        scaling: bool,
    ) -> Option<&ExperimentReport> {
        self.cells
            .iter()
            .find(|c| c.method == MethodSpec::new(scheme, exponent, scaling))
    }
}

pub fn run_benchmark<S: TrialSource + ?Sized>(
    name: &str,
    source: &S,
    config: &ExperimentConfig,
) -> Result<BenchmarkReport> {
    let cells = benchmark_methods()
        .iter()
        .map(|m| run_experiment(source, m, config))
        .collect::<Result<_>>()?;
    Ok(BenchmarkReport {
        dataset: name.to_owned(),
        n_runs: config.n_runs,
        base_seed: config.base_seed,
        cells,
    })
}

/// Row of the flat per-method CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: WeightScheme,
    pub p: u32,
    pub scaling: bool,
    pub n_runs: usize,
    pub mean_error_rate: f64,
    pub failure_rate: f64,
}

impl From<&ExperimentReport> for ReportRow {
    fn from(r: &ExperimentReport) -> Self {
        Self {
            scheme: r.method.scheme,
            p: r.method.exponent,
            scaling: r.method.scaling,
            n_runs: r.n_runs,
            mean_error_rate: r.mean_error_rate,
            failure_rate: r.failure_rate,
        }
    }
}

/// Row of the exponent-sweep curve CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub scheme: WeightScheme,
    pub p: u32,
    pub mean_error_rate: f64,
    pub failure_rate: f64,
}

impl From<&ExperimentReport> for CurveRow {
    fn from(r: &ExperimentReport) -> Self {
        Self {
            scheme: r.method.scheme,
            p: r.method.exponent,
            mean_error_rate: r.mean_error_rate,
            failure_rate: r.failure_rate,
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.record() as usize);
    Error::MalformedRow {
        row,
        message: e.to_string(),
    }
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })
}

pub fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(reader: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}
