//! Domain types shared by every other module: labeled utterance datasets,
//! aligned per-subsystem score matrices, the 33-point MOS grid, and
//! per-system grouping.
//!
//! All types are immutable after construction; constructors enforce the
//! invariants (unique ids, finite values, label range) so downstream code
//! never re-validates.

use thiserror::Error;

pub const MOS_MIN: f64 = 1.0;
pub const MOS_MAX: f64 = 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("duplicate utterance id {0:?}")]
    DuplicateUtterance(String),
    #[error("utterance ids missing from scores: {0:?}")]
    MissingUtterance(Vec<String>),
    #[error("utterance ids present in scores but not in dataset: {0:?}")]
    ExtraUtterance(Vec<String>),
    #[error("mos {mos} for {utterance_id:?} outside [{MOS_MIN}, {MOS_MAX}]")]
    OutOfRangeMos { utterance_id: String, mos: f64 },
    #[error("empty {0} not allowed")]
    EmptyField(&'static str),
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("non-finite score")]
    NonFiniteScore,
    #[error("matrix shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("dataset is unlabeled")]
    UnlabeledDataset,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// One rated (or to-be-rated) utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    /// Identifier of the synthesis system that produced the utterance.
    pub system_id: String,
    pub mos: Option<f64>,
}

impl UtteranceRecord {
    pub fn new(
        utterance_id: impl Into<String>,
        system_id: impl Into<String>,
        mos: Option<f64>,
    ) -> Result<Self, DataError> {
        let utterance_id = utterance_id.into();
        let system_id = system_id.into();
        if utterance_id.is_empty() {
            return Err(DataError::EmptyField("utterance_id"));
        }
        if system_id.is_empty() {
            return Err(DataError::EmptyField("system_id"));
        }
        if let Some(m) = mos {
            if !m.is_finite() || !(MOS_MIN..=MOS_MAX).contains(&m) {
                return Err(DataError::OutOfRangeMos {
                    utterance_id,
                    mos: m,
                });
            }
        }
        Ok(UtteranceRecord {
            utterance_id,
            system_id,
            mos,
        })
    }
}

/// System id convention when a labels source has no explicit system column:
/// the prefix before the first `-` (mirrors the "sysID-uttID" naming).
pub fn system_id_from_utterance_id(utterance_id: &str) -> &str {
    utterance_id.split('-').next().unwrap_or(utterance_id)
}

/// Ordered collection of utterance records. Iteration order is file order.
#[derive(Debug, Clone, PartialEq)]
pub struct MosDataset {
    records: Vec<UtteranceRecord>,
    labeled: bool,
}

impl MosDataset {
    pub fn new(records: Vec<UtteranceRecord>) -> Result<Self, DataError> {
        let mut seen = std::collections::HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.utterance_id.as_str()) {
                return Err(DataError::DuplicateUtterance(r.utterance_id.clone()));
            }
        }
        let labeled = !records.is_empty() && records.iter().all(|r| r.mos.is_some());
        drop(seen);
        Ok(MosDataset { records, labeled })
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// True iff every record carries a mos label.
    pub fn labeled(&self) -> bool {
        self.labeled
    }

    pub fn utterance_ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.utterance_id.as_str())
    }

    /// Label vector in dataset order; errors when any record is unlabeled.
    pub fn truths(&self) -> Result<Vec<f64>, DataError> {
        if !self.labeled {
            return Err(DataError::UnlabeledDataset);
        }
        Ok(self.records.iter().map(|r| r.mos.unwrap()).collect())
    }

    /// Splits into (first `n` rows, remainder), preserving order.
    pub fn split_at(&self, n: usize) -> Result<(MosDataset, MosDataset), DataError> {
        if n > self.len() {
            return Err(DataError::LengthMismatch {
                expected: self.len(),
                got: n,
            });
        }
        let head = MosDataset::new(self.records[..n].to_vec())?;
        let tail = MosDataset::new(self.records[n..].to_vec())?;
        Ok((head, tail))
    }
}

/// N x K table of per-subsystem MOS predictions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    utterance_ids: Vec<String>,
    subsystem_names: Vec<String>,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(
        utterance_ids: Vec<String>,
        subsystem_names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self, DataError> {
        if subsystem_names.is_empty() {
            return Err(DataError::EmptyField("subsystem_names"));
        }
        if subsystem_names.iter().any(|n| n.is_empty()) {
            return Err(DataError::EmptyField("subsystem name"));
        }
        let n = utterance_ids.len();
        let k = subsystem_names.len();
        if values.len() != n * k {
            return Err(DataError::ShapeMismatch(format!(
                "{} values for {n} x {k} matrix",
                values.len()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(n);
        for id in &utterance_ids {
            if id.is_empty() {
                return Err(DataError::EmptyField("utterance_id"));
            }
            if !seen.insert(id.as_str()) {
                return Err(DataError::DuplicateUtterance(id.clone()));
            }
        }
        drop(seen);
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFiniteValue {
                    row: i / k,
                    col: i % k,
                });
            }
        }
        Ok(ScoreMatrix {
            utterance_ids,
            subsystem_names,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.utterance_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.subsystem_names.len()
    }

    pub fn utterance_ids(&self) -> &[String] {
        &self.utterance_ids
    }

    pub fn subsystem_names(&self) -> &[String] {
        &self.subsystem_names
    }

    /// Row-major backing slice, length `n_rows * n_cols`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.n_cols();
        &self.values[i * k..(i + 1) * k]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let k = self.n_cols();
        self.values.iter().skip(j).step_by(k).copied().collect()
    }

    /// New matrix with identical ids/names and transformed values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, DataError> {
        ScoreMatrix::new(
            self.utterance_ids.clone(),
            self.subsystem_names.clone(),
            values,
        )
    }

    /// Vertical concatenation; subsystem names must match, ids stay unique.
    pub fn stack(&self, other: &ScoreMatrix) -> Result<Self, DataError> {
        if self.subsystem_names != other.subsystem_names {
            return Err(DataError::ShapeMismatch(
                "subsystem names differ".to_string(),
            ));
        }
        let mut ids = self.utterance_ids.clone();
        ids.extend(other.utterance_ids.iter().cloned());
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        ScoreMatrix::new(ids, self.subsystem_names.clone(), values)
    }

    pub fn split_at(&self, n: usize) -> Result<(ScoreMatrix, ScoreMatrix), DataError> {
        if n > self.n_rows() {
            return Err(DataError::LengthMismatch {
                expected: self.n_rows(),
                got: n,
            });
        }
        let k = self.n_cols();
        let head = ScoreMatrix::new(
            self.utterance_ids[..n].to_vec(),
            self.subsystem_names.clone(),
            self.values[..n * k].to_vec(),
        )?;
        let tail = ScoreMatrix::new(
            self.utterance_ids[n..].to_vec(),
            self.subsystem_names.clone(),
            self.values[n * k..].to_vec(),
        )?;
        Ok((head, tail))
    }
}

/// N x D matrix of concatenated upstream features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    utterance_ids: Vec<String>,
    dim: usize,
    values: Vec<f64>,
    column_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        utterance_ids: Vec<String>,
        dim: usize,
        values: Vec<f64>,
    ) -> Result<Self, DataError> {
        if dim == 0 {
            return Err(DataError::EmptyField("feature dim"));
        }
        if values.len() != utterance_ids.len() * dim {
            return Err(DataError::ShapeMismatch(format!(
                "{} values for {} x {dim} matrix",
                values.len(),
                utterance_ids.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFiniteValue {
                    row: i / dim,
                    col: i % dim,
                });
            }
        }
        let column_names = (0..dim).map(|j| format!("f_{j}")).collect();
        Ok(FeatureMatrix {
            utterance_ids,
            dim,
            values,
            column_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.utterance_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn utterance_ids(&self) -> &[String] {
        &self.utterance_ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Synthetic column names `f_0 .. f_{D-1}`, matching the file header.
    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }
}

/// The challenge's discrete MOS grid: 1.0 to 5.0 in steps of 0.125.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for ScoreGrid {
    fn default() -> Self {
        ScoreGrid {
            lo: MOS_MIN,
            hi: MOS_MAX,
            step: 0.125,
        }
    }
}

impl ScoreGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self, DataError> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || hi <= lo {
            return Err(DataError::InvalidGrid(format!("lo {lo}, hi {hi}, step {step}")));
        }
        let span = (hi - lo) / step;
        if (span - span.round()).abs() > 1e-9 {
            return Err(DataError::InvalidGrid(format!(
                "step {step} does not divide [{lo}, {hi}]"
            )));
        }
        Ok(ScoreGrid { lo, hi, step })
    }

    /// Number of grid points; 33 for the default grid.
    pub fn n_points(&self) -> usize {
        ((self.hi - self.lo) / self.step).round() as usize + 1
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points()).map(move |k| self.lo + k as f64 * self.step)
    }
}

/// Nearest grid point; ties round toward `hi`, result clamped to `[lo, hi]`.
pub fn quantize_to_grid(score: f64, grid: &ScoreGrid) -> Result<f64, DataError> {
    if !score.is_finite() {
        return Err(DataError::NonFiniteScore);
    }
    let idx = (score - grid.lo) / grid.step;
    // floor(idx + 0.5) is round-half-up, i.e. ties toward hi.
    let k = (idx + 0.5).floor();
    let k = k.clamp(0.0, (grid.n_points() - 1) as f64);
    Ok(grid.lo + k * grid.step)
}

/// Rows of `scores` permuted into `dataset` order.
pub fn align(dataset: &MosDataset, scores: &ScoreMatrix) -> Result<ScoreMatrix, DataError> {
    let mut index: std::collections::HashMap<&str, usize> =
        std::collections::HashMap::with_capacity(scores.n_rows());
    for (i, id) in scores.utterance_ids().iter().enumerate() {
        index.insert(id.as_str(), i);
    }
    let missing: Vec<String> = dataset
        .utterance_ids()
        .filter(|id| !index.contains_key(id))
        .map(str::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(DataError::MissingUtterance(missing));
    }
    if scores.n_rows() > dataset.len() {
        let dataset_ids: std::collections::HashSet<&str> = dataset.utterance_ids().collect();
        let extra: Vec<String> = scores
            .utterance_ids()
            .iter()
            .filter(|id| !dataset_ids.contains(id.as_str()))
            .map(|id| id.to_string())
            .collect();
        return Err(DataError::ExtraUtterance(extra));
    }
    let k = scores.n_cols();
    let mut ids = Vec::with_capacity(dataset.len());
    let mut values = Vec::with_capacity(dataset.len() * k);
    for id in dataset.utterance_ids() {
        let row = index[id];
        ids.push(id.to_string());
        values.extend_from_slice(scores.row(row));
    }
    ScoreMatrix::new(ids, scores.subsystem_names().to_vec(), values)
}

/// Rows of `features` permuted into `dataset` order.
pub fn align_features(
    dataset: &MosDataset,
    features: &FeatureMatrix,
) -> Result<FeatureMatrix, DataError> {
    let mut index: std::collections::HashMap<&str, usize> =
        std::collections::HashMap::with_capacity(features.n_rows());
    for (i, id) in features.utterance_ids().iter().enumerate() {
        if index.insert(id.as_str(), i).is_some() {
            return Err(DataError::DuplicateUtterance(id.clone()));
        }
    }
    let missing: Vec<String> = dataset
        .utterance_ids()
        .filter(|id| !index.contains_key(id))
        .map(str::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(DataError::MissingUtterance(missing));
    }
    if features.n_rows() > dataset.len() {
        let dataset_ids: std::collections::HashSet<&str> = dataset.utterance_ids().collect();
        let extra: Vec<String> = features
            .utterance_ids()
            .iter()
            .filter(|id| !dataset_ids.contains(id.as_str()))
            .map(|id| id.to_string())
            .collect();
        return Err(DataError::ExtraUtterance(extra));
    }
    let d = features.dim();
    let mut ids = Vec::with_capacity(dataset.len());
    let mut values = Vec::with_capacity(dataset.len() * d);
    for id in dataset.utterance_ids() {
        let row = index[id];
        ids.push(id.to_string());
        values.extend_from_slice(features.row(row));
    }
    FeatureMatrix::new(ids, d, values)
}

/// Per-system means of predictions and true MOS, sorted by system id.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSummary {
    pub system_id: String,
    pub mean_prediction: f64,
    pub mean_true_mos: f64,
}

pub fn group_by_system(
    dataset: &MosDataset,
    predictions: &[f64],
) -> Result<Vec<SystemSummary>, DataError> {
    if !dataset.labeled() {
        return Err(DataError::UnlabeledDataset);
    }
    if predictions.len() != dataset.len() {
        return Err(DataError::LengthMismatch {
            expected: dataset.len(),
            got: predictions.len(),
        });
    }
    // BTreeMap keeps the output sorted by system id; accumulation follows
    // dataset order so the summation order is reproducible.
    let mut groups: std::collections::BTreeMap<&str, (f64, f64, usize)> =
        std::collections::BTreeMap::new();
    for (rec, &pred) in dataset.records().iter().zip(predictions) {
        let entry = groups.entry(rec.system_id.as_str()).or_insert((0.0, 0.0, 0));
        entry.0 += pred;
        entry.1 += rec.mos.unwrap();
        entry.2 += 1;
    }
    Ok(groups
        .into_iter()
        .map(|(sys, (sum_pred, sum_mos, n))| SystemSummary {
            system_id: sys.to_string(),
            mean_prediction: sum_pred / n as f64,
            mean_true_mos: sum_mos / n as f64,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(rows: &[(&str, &str, f64)]) -> MosDataset {
        MosDataset::new(
            rows.iter()
                .map(|(u, s, m)| UtteranceRecord::new(*u, *s, Some(*m)).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn matrix(ids: &[&str], names: &[&str], values: &[f64]) -> ScoreMatrix {
        ScoreMatrix::new(
            ids.iter().map(|s| s.to_string()).collect(),
            names.iter().map(|s| s.to_string()).collect(),
            values.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn record_rejects_out_of_range_mos() {
        let err = UtteranceRecord::new("u1", "s1", Some(5.5)).unwrap_err();
        assert!(matches!(err, DataError::OutOfRangeMos { .. }));
        assert!(UtteranceRecord::new("u1", "s1", Some(1.0)).is_ok());
        assert!(UtteranceRecord::new("u1", "s1", Some(5.0)).is_ok());
    }

    #[test]
    fn dataset_rejects_duplicate_ids() {
        let recs = vec![
            UtteranceRecord::new("u1", "s1", Some(3.0)).unwrap(),
            UtteranceRecord::new("u1", "s2", Some(4.0)).unwrap(),
        ];
        assert_eq!(
            MosDataset::new(recs).unwrap_err(),
            DataError::DuplicateUtterance("u1".to_string())
        );
    }

    #[test]
    fn labeled_flag_tracks_records() {
        let labeled = dataset(&[("u1", "s1", 3.0)]);
        assert!(labeled.labeled());
        let mixed = MosDataset::new(vec![
            UtteranceRecord::new("u1", "s1", Some(3.0)).unwrap(),
            UtteranceRecord::new("u2", "s1", None).unwrap(),
        ])
        .unwrap();
        assert!(!mixed.labeled());
        assert_eq!(mixed.truths().unwrap_err(), DataError::UnlabeledDataset);
    }

    #[test]
    fn matrix_rejects_non_finite() {
        let err = ScoreMatrix::new(
            vec!["u1".into()],
            vec!["a".into(), "b".into()],
            vec![1.0, f64::NAN],
        )
        .unwrap_err();
        assert_eq!(err, DataError::NonFiniteValue { row: 0, col: 1 });
    }

    #[test]
    fn align_permutes_rows_to_dataset_order() {
        let ds = dataset(&[("u1", "s1", 3.0), ("u2", "s1", 4.0)]);
        let scores = matrix(&["u2", "u1"], &["a", "b"], &[2.0, 2.5, 1.0, 1.5]);
        let aligned = align(&ds, &scores).unwrap();
        assert_eq!(aligned.utterance_ids(), &["u1".to_string(), "u2".to_string()]);
        assert_eq!(aligned.row(0), &[1.0, 1.5]);
        assert_eq!(aligned.row(1), &[2.0, 2.5]);
    }

    #[test]
    fn align_reports_missing_ids() {
        let ds = dataset(&[("u1", "s1", 3.0), ("u2", "s1", 4.0)]);
        let scores = matrix(&["u1"], &["a"], &[1.0]);
        assert_eq!(
            align(&ds, &scores).unwrap_err(),
            DataError::MissingUtterance(vec!["u2".to_string()])
        );
    }

    #[test]
    fn align_reports_extra_ids() {
        let ds = dataset(&[("u1", "s1", 3.0)]);
        let scores = matrix(&["u1", "u9"], &["a"], &[1.0, 2.0]);
        assert_eq!(
            align(&ds, &scores).unwrap_err(),
            DataError::ExtraUtterance(vec!["u9".to_string()])
        );
    }

    #[test]
    fn align_identity_is_bit_exact() {
        let ds = dataset(&[("u1", "s1", 3.0), ("u2", "s1", 4.0)]);
        let scores = matrix(&["u1", "u2"], &["a"], &[1.25, 4.75]);
        let aligned = align(&ds, &scores).unwrap();
        assert_eq!(aligned.values(), scores.values());
    }

    #[test]
    fn align_is_idempotent() {
        let ds = dataset(&[("u1", "s1", 3.0), ("u2", "s1", 4.0), ("u3", "s2", 2.0)]);
        let scores = matrix(&["u3", "u1", "u2"], &["a"], &[3.0, 1.0, 2.0]);
        let once = align(&ds, &scores).unwrap();
        let twice = align(&ds, &once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn default_grid_has_33_points() {
        let grid = ScoreGrid::default();
        assert_eq!(grid.n_points(), 33);
        let pts: Vec<f64> = grid.points().collect();
        assert_eq!(pts[0], 1.0);
        assert_eq!(pts[32], 5.0);
        assert_eq!(pts[1], 1.125);
    }

    #[test]
    fn quantize_endpoints_and_clamping() {
        let grid = ScoreGrid::default();
        assert_eq!(quantize_to_grid(1.0, &grid).unwrap(), 1.0);
        assert_eq!(quantize_to_grid(7.2, &grid).unwrap(), 5.0);
        assert_eq!(quantize_to_grid(-3.0, &grid).unwrap(), 1.0);
        assert!(quantize_to_grid(f64::NAN, &grid).is_err());
    }

    #[test]
    fn quantize_nearest_matches_enumeration_oracle() {
        let grid = ScoreGrid::default();
        // Oracle: enumerate all 33 points, take argmin distance with ties
        // resolved toward hi.
        let oracle = |x: f64| {
            let mut best = grid.lo;
            let mut best_d = f64::INFINITY;
            for p in grid.points() {
                let d = (x - p).abs();
                if d < best_d || (d == best_d && p > best) {
                    best = p;
                    best_d = d;
                }
            }
            best
        };
        assert_eq!(quantize_to_grid(3.0624, &grid).unwrap(), 3.0);
        assert_eq!(oracle(3.0624), 3.0);
        let mut x = 0.5;
        while x <= 5.5 {
            assert_eq!(quantize_to_grid(x, &grid).unwrap(), oracle(x), "x = {x}");
            x += 0.0173;
        }
    }

    #[test]
    fn quantize_ties_round_toward_hi() {
        let grid = ScoreGrid::default();
        // 3.0625 is exactly midway between 3.0 and 3.125.
        assert_eq!(quantize_to_grid(3.0625, &grid).unwrap(), 3.125);
    }

    #[test]
    fn quantize_is_idempotent_on_grid() {
        let grid = ScoreGrid::default();
        for p in grid.points() {
            assert_eq!(quantize_to_grid(p, &grid).unwrap(), p);
        }
    }

    #[test]
    fn group_by_system_means() {
        let ds = dataset(&[("u1", "A", 2.0), ("u2", "A", 4.0), ("u3", "B", 3.0)]);
        let out = group_by_system(&ds, &[2.0, 4.0, 3.0]).unwrap();
        assert_eq!(
            out,
            vec![
                SystemSummary {
                    system_id: "A".into(),
                    mean_prediction: 3.0,
                    mean_true_mos: 3.0
                },
                SystemSummary {
                    system_id: "B".into(),
                    mean_prediction: 3.0,
                    mean_true_mos: 3.0
                },
            ]
        );
    }

    #[test]
    fn group_by_system_single_system_mean() {
        let ds = dataset(&[("u1", "S", 2.0), ("u2", "S", 2.0)]);
        let out = group_by_system(&ds, &[1.0, 5.0]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].mean_prediction, 3.0);
        assert_eq!(out[0].mean_true_mos, 2.0);
    }

    #[test]
    fn group_by_system_matches_bruteforce_oracle() {
        // 3 systems x 2 utterances with distinct values.
        let ds = dataset(&[
            ("u1", "c", 1.5),
            ("u2", "a", 2.5),
            ("u3", "b", 3.5),
            ("u4", "a", 4.5),
            ("u5", "c", 2.0),
            ("u6", "b", 5.0),
        ]);
        let preds = [1.0, 2.0, 3.0, 4.0, 5.0, 4.5];
        // Independent brute-force oracle: filter per system, average.
        let oracle = |sys: &str| {
            let idx: Vec<usize> = ds
                .records()
                .iter()
                .enumerate()
                .filter(|(_, r)| r.system_id == sys)
                .map(|(i, _)| i)
                .collect();
            let mp = idx.iter().map(|&i| preds[i]).sum::<f64>() / idx.len() as f64;
            let mt = idx.iter().map(|&i| ds.records()[i].mos.unwrap()).sum::<f64>()
                / idx.len() as f64;
            (mp, mt)
        };
        let out = group_by_system(&ds, &preds).unwrap();
        assert_eq!(out.len(), 3);
        for s in &out {
            let (mp, mt) = oracle(&s.system_id);
            assert!((s.mean_prediction - mp).abs() < 1e-12);
            assert!((s.mean_true_mos - mt).abs() < 1e-12);
        }
        // Sorted by system id.
        assert_eq!(out[0].system_id, "a");
        assert_eq!(out[2].system_id, "c");
    }

    #[test]
    fn group_by_system_permutation_invariant() {
        let ds1 = dataset(&[("u1", "A", 2.0), ("u2", "B", 4.0), ("u3", "A", 3.0)]);
        let ds2 = dataset(&[("u3", "A", 3.0), ("u1", "A", 2.0), ("u2", "B", 4.0)]);
        let a = group_by_system(&ds1, &[1.0, 2.0, 3.0]).unwrap();
        let b = group_by_system(&ds2, &[3.0, 1.0, 2.0]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.system_id, y.system_id);
            assert!((x.mean_prediction - y.mean_prediction).abs() < 1e-12);
            assert!((x.mean_true_mos - y.mean_true_mos).abs() < 1e-12);
        }
    }

    #[test]
    fn system_id_prefix_convention() {
        assert_eq!(system_id_from_utterance_id("sys12-utt003"), "sys12");
        assert_eq!(system_id_from_utterance_id("plain"), "plain");
    }
}
