//! Labeled datasets: CSV ingestion and the synthetic generators.
//!
//! CSV dialect: comma separated, `.` decimal point, optional single header
//! line. The header is detected by the first record containing a non-numeric
//! feature cell. Class labels are arbitrary strings and are mapped to dense
//! integers `0..K` in order of first appearance.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::rng::rng_from_seed;

/// Feature matrix plus ground-truth classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: FeatureMatrix,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    n_classes: usize,
}

impl LabeledDataset {
    pub fn new(
        features: FeatureMatrix,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        n_classes: usize,
    ) -> Result<Self> {
        if features.n_rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.n_rows(),
                actual: labels.len(),
            });
        }
        if features.n_cols() != feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: features.n_cols(),
                actual: feature_names.len(),
            });
        }
        if features.n_cols() == 0 {
            return Err(Error::Empty("dataset has no feature columns".into()));
        }
        if n_classes == 0 || features.n_rows() < n_classes {
            return Err(Error::invalid(format!(
                "need 1 <= n_classes <= rows, got {n_classes} classes for {} rows",
                features.n_rows()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            n_classes,
        })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_samples(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    /// Same points with a replaced feature matrix (row count must match).
    pub fn with_features(&self, features: FeatureMatrix) -> Result<Self> {
        Self::new(
            features,
            self.labels.clone(),
            self.feature_names.clone(),
            self.n_classes,
        )
    }
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    None,
    Index(usize),
    Name(String),
}

impl LabelColumn {
    /// Integers select by position, anything else by header name.
    pub fn parse(s: &str) -> Self {
        match s.trim().parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.trim().to_owned()),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    read_csv(file, label)
}

pub fn read_csv<R: Read>(reader: R, label: &LabelColumn) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        // skip blank trailing lines
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push(rec);
    }
    let first = records
        .first()
        .ok_or_else(|| Error::Empty("CSV file has no rows".into()))?;
    let width = first.len();

    let is_numeric = |s: &str| s.parse::<f64>().is_ok_and(f64::is_finite);
    let (label_idx, has_header) = match label {
        LabelColumn::None => (None, first.iter().any(|c| !is_numeric(c))),
        LabelColumn::Index(i) => {
            if *i >= width {
                return Err(Error::invalid(format!(
                    "label column {i} out of range for {width} columns"
                )));
            }
            let header = first
                .iter()
                .enumerate()
                .any(|(j, c)| j != *i && !is_numeric(c));
            (Some(*i), header)
        }
        LabelColumn::Name(name) => {
            let idx = first.iter().position(|c| c == name).ok_or_else(|| {
                Error::invalid(format!("label column {name:?} not found in header"))
            })?;
            (Some(idx), true)
        }
    };

    let feature_cols: Vec<usize> = (0..width).filter(|&j| Some(j) != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(Error::Empty("CSV has no feature columns".into()));
    }
    let feature_names = if has_header {
        feature_cols.iter().map(|&j| first[j].to_owned()).collect()
    } else {
        (0..feature_cols.len()).map(|j| format!("f{j}")).collect()
    };

    let body = &records[usize::from(has_header)..];
    if body.is_empty() {
        return Err(Error::Empty(
            "CSV file has a header but no data rows".into(),
        ));
    }

    let mut data = Vec::with_capacity(body.len() * feature_cols.len());
    let mut labels = Vec::with_capacity(body.len());
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    for (offset, rec) in body.iter().enumerate() {
        let row = offset + usize::from(has_header);
        if rec.len() != width {
            return Err(Error::MalformedRow {
                row,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for &j in &feature_cols {
            let cell = &rec[j];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => data.push(v),
                _ => {
                    return Err(Error::NonNumeric {
                        row,
                        column: j,
                        value: cell.to_owned(),
                    })
                }
            }
        }
        let id = match label_idx {
            Some(li) => {
                let next = label_ids.len();
                *label_ids.entry(rec[li].to_owned()).or_insert(next)
            }
            None => 0,
        };
        labels.push(id);
    }
    let n_classes = label_ids.len().max(1);
    let features = FeatureMatrix::new(body.len(), feature_cols.len(), data)?;
    LabeledDataset::new(features, labels, feature_names, n_classes)
}

/// Writes the dataset with a header line and an integer `label` column last.
///
/// Values use Rust's shortest round-trip formatting, so [`read_csv`] recovers
/// them exactly.
pub fn write_csv<W: Write>(dataset: &LabeledDataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let label_name = label_header(dataset);
    let io_err = |e: csv::Error| Error::MalformedRow {
        row: 0,
        message: e.to_string(),
    };
    let mut header: Vec<&str> = dataset.feature_names.iter().map(String::as_str).collect();
    header.push(&label_name);
    wtr.write_record(&header).map_err(io_err)?;
    for (row, &lab) in dataset.features.rows().zip(&dataset.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        rec.push(lab.to_string());
        wtr.write_record(&rec).map_err(io_err)?;
    }
    wtr.flush().map_err(|e| Error::Io {
        path: "<csv writer>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn save_csv(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    write_csv(dataset, std::io::BufWriter::new(file))
}

/// Name of the label column written by [`write_csv`].
pub fn label_header(dataset: &LabeledDataset) -> String {
    let mut name = String::from("label");
    while dataset.feature_names.contains(&name) {
        name.insert(0, '_');
    }
    name
}

/// Nominal appearance of one brick class under neutral lighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrickPrototype {
    pub name: String,
    /// Red, green, blue in `[0, 255]`.
    pub rgb: [f64; 3],
    /// Centimetres.
    pub length: f64,
    pub width: f64,
}

/// Synthetic stand-in for a camera survey of a table of bricks.
///
/// Each call simulates one trial: a single lighting offset, drawn uniformly
/// from `lighting_shift_range`, is added to all three colour channels of
/// every brick, then independent Gaussian noise is added per brick and per
/// feature. Colours are clamped to `[0, 255]`, lengths kept positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegoGenConfig {
    pub bricks_per_class: Vec<usize>,
    pub prototypes: Vec<BrickPrototype>,
    pub lighting_shift_range: (f64, f64),
    /// Standard deviations for (R, G, B, length, width).
    pub per_brick_noise_sd: [f64; 5],
    /// Subtracted from the blue channel before clamping.
    pub blue_shift: f64,
    pub seed: u64,
}

impl Default for LegoGenConfig {
    fn default() -> Self {
        let proto = |name: &str, rgb: [f64; 3], length: f64, width: f64| BrickPrototype {
            name: name.to_owned(),
            rgb,
            length,
            width,
        };
        Self {
            bricks_per_class: vec![3, 3, 3],
            prototypes: vec![
                proto("big-green", [70.0, 160.0, 70.0], 6.4, 3.2),
                proto("small-green", [70.0, 160.0, 70.0], 3.2, 3.2),
                proto("small-red", [180.0, 60.0, 60.0], 3.2, 3.2),
            ],
            lighting_shift_range: (-60.0, 60.0),
            per_brick_noise_sd: [5.0, 5.0, 5.0, 0.125, 0.125],
            blue_shift: 0.0,
            seed: 0,
        }
    }
}

pub const LEGO_FEATURES: [&str; 5] = ["red", "green", "blue", "length", "width"];

// Floor for generated lengths, in centimetres.
const MIN_LENGTH: f64 = 0.01;

impl LegoGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prototypes.is_empty() {
            return Err(Error::invalid("lego generator needs at least one class"));
        }
        if self.prototypes.len() != self.bricks_per_class.len() {
            return Err(Error::DimensionMismatch {
                expected: self.prototypes.len(),
                actual: self.bricks_per_class.len(),
            });
        }
        if self.bricks_per_class.contains(&0) {
            return Err(Error::invalid("every class needs at least one brick"));
        }
        for p in &self.prototypes {
            if p.rgb.iter().any(|c| !(0.0..=255.0).contains(c)) {
                return Err(Error::invalid(format!("{}: RGB outside [0, 255]", p.name)));
            }
            if !(p.length > 0.0 && p.width > 0.0) {
                return Err(Error::invalid(format!("{}: lengths must be > 0", p.name)));
            }
        }
        let (lo, hi) = self.lighting_shift_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid(
                "lighting_shift_range must be a finite [lo, hi]",
            ));
        }
        if self
            .per_brick_noise_sd
            .iter()
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err(Error::invalid("noise standard deviations must be >= 0"));
        }
        if !self.blue_shift.is_finite() {
            return Err(Error::invalid("blue_shift must be finite"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

pub fn gen_lego(config: &LegoGenConfig) -> Result<LabeledDataset> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let (lo, hi) = config.lighting_shift_range;
    let u: f64 = rng.random();
    let shift = lo + u * (hi - lo);
    let sd = &config.per_brick_noise_sd;

    let mut rows: Vec<([f64; 5], usize)> = Vec::new();
    for (class, (proto, &count)) in config
        .prototypes
        .iter()
        .zip(&config.bricks_per_class)
        .enumerate()
    {
        for _ in 0..count {
            let mut z = [0.0f64; 5];
            for zi in &mut z {
                *zi = rng.sample(StandardNormal);
            }
            let mut row = [0.0; 5];
            for c in 0..3 {
                let mut v = proto.rgb[c] + shift + sd[c] * z[c];
                if c == 2 {
                    v -= config.blue_shift;
                }
                row[c] = v.clamp(0.0, 255.0);
            }
            row[3] = (proto.length + sd[3] * z[3]).max(MIN_LENGTH);
            row[4] = (proto.width + sd[4] * z[4]).max(MIN_LENGTH);
            rows.push((row, class));
        }
    }
    // layout of the bricks on the table
    rows.shuffle(&mut rng);

    let labels = rows.iter().map(|r| r.1).collect();
    let data = rows.iter().flat_map(|r| r.0).collect();
    let features = FeatureMatrix::new(rows.len(), 5, data)?;
    LabeledDataset::new(
        features,
        labels,
        LEGO_FEATURES.iter().map(|s| s.to_string()).collect(),
        config.prototypes.len(),
    )
}

/// Ratio between the units of the two axes of [`gen_norm_toy`].
pub const NORM_TOY_SCALE: f64 = 1000.0;

/// Two round blobs separated along `x`, with `y` recorded in units
/// [`NORM_TOY_SCALE`] times smaller, so `y` dominates raw distances.
pub fn gen_norm_toy(n_per_cluster: usize, seed: u64) -> Result<LabeledDataset> {
    if n_per_cluster == 0 {
        return Err(Error::invalid("n_per_cluster must be >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let centers = [2.0, 8.0];
    let spread = 0.5;
    let mut data = Vec::with_capacity(4 * n_per_cluster);
    let mut labels = Vec::with_capacity(2 * n_per_cluster);
    for (class, cx) in centers.iter().enumerate() {
        for _ in 0..n_per_cluster {
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            data.push(cx + spread * zx);
            data.push((5.0 + spread * zy) * NORM_TOY_SCALE);
            labels.push(class);
        }
    }
    let features = FeatureMatrix::new(2 * n_per_cluster, 2, data)?;
    LabeledDataset::new(features, labels, vec!["x".into(), "y".into()], 2)
}

/// `x` is a wide uniform continuum on `[0, 20]` with no class structure; `y`
/// holds two narrow bands at 9 and 11, one per class. Both axes average
/// about 10, so `x` has the larger coefficient of variation while `y` has
/// the larger gap ratio.
pub fn gen_gapratio_toy(n_per_cluster: usize, seed: u64) -> Result<LabeledDataset> {
    if n_per_cluster == 0 {
        return Err(Error::invalid("n_per_cluster must be >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let bands = [9.0, 11.0];
    let half_width = 0.1;
    let mut data = Vec::with_capacity(4 * n_per_cluster);
    let mut labels = Vec::with_capacity(2 * n_per_cluster);
    for (class, cy) in bands.iter().enumerate() {
        for _ in 0..n_per_cluster {
            let x = rng.random_range(0.0..20.0);
            let y = cy + rng.random_range(-half_width..half_width);
            data.push(x);
            data.push(y);
            labels.push(class);
        }
    }
    let features = FeatureMatrix::new(2 * n_per_cluster, 2, data)?;
    LabeledDataset::new(features, labels, vec!["x".into(), "y".into()], 2)
}
