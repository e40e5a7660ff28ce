//! File formats and persistence. Everything here is bit-exact by contract:
//! UTF-8, LF line endings, "." decimal separator, 6-decimal fixed formatting
//! for data files, and shortest-round-trip floats inside model files.
//! Writers go through a temp file and an atomic rename so no failure leaves
//! a partial output behind.

use crate::data::{
    system_id_from_utterance_id, DataError, FeatureMatrix, MosDataset, ScoreMatrix,
    UtteranceRecord,
};
use crate::fusers::{FuserMethod, FuserModel, FuserParams, TrainMeta};
use crate::semisup::CalibrationSet;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const CALIBRATION_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Os {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse { path: String, line: usize, reason: String },
    #[error("{path}:{line}: non-finite value")]
    NonFiniteValue { path: String, line: usize },
    #[error("{path}:{line}: expected {expected} fields, got {got}")]
    RaggedRow { path: String, line: usize, expected: usize, got: usize },
    #[error("length mismatch: {expected} ids vs {got} values")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{path}: unsupported format_version {found} (this build reads {supported})")]
    VersionMismatch { path: String, found: u64, supported: u32 },
    #[error("{path}: corrupt model file: {0}", .field)]
    CorruptModel { path: String, field: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

fn os_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Os { path: path.display().to_string(), source }
}

/// Writes through `<path>.tmp` then renames; readers never see partial files.
pub fn atomic_write(path: &Path, contents: &str) -> Result<(), IoError> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    std::fs::write(&tmp, contents).map_err(|e| os_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| os_err(path, e))
}

/// Canonical 6-decimal rendering; negative zero is normalized to zero.
pub fn fmt_score(v: f64) -> String {
    format!("{:.6}", if v == 0.0 { 0.0 } else { v })
}

fn read_lines(path: &Path) -> Result<Vec<String>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| os_err(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn parse_f64(field: &str, path: &Path, line: usize) -> Result<f64, IoError> {
    field.trim().parse::<f64>().map_err(|_| IoError::Parse {
        path: path.display().to_string(),
        line,
        reason: format!("not a number: {field:?}"),
    })
}

// ---------------------------------------------------------------------------
// scores: header `utterance_id,system_id,<name_1>,...,<name_K>`
// ---------------------------------------------------------------------------

/// A parsed scores table; the system ids ride along for dataset joining.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoresFile {
    pub matrix: ScoreMatrix,
    pub system_ids: Vec<String>,
}

pub fn read_scores(path: &Path) -> Result<ScoresFile, IoError> {
    let lines = read_lines(path)?;
    let p = || path.display().to_string();
    let header = lines.first().ok_or_else(|| IoError::Parse {
        path: p(),
        line: 1,
        reason: "empty file".into(),
    })?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 3 || fields[0] != "utterance_id" || fields[1] != "system_id" {
        return Err(IoError::Parse {
            path: p(),
            line: 1,
            reason: format!(
                "expected header utterance_id,system_id,<names...>, got {header:?}"
            ),
        });
    }
    let names: Vec<String> = fields[2..].iter().map(|s| s.to_string()).collect();
    let k = names.len();
    let mut ids = Vec::new();
    let mut system_ids = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let lineno = idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != k + 2 {
            return Err(IoError::RaggedRow {
                path: p(),
                line: lineno,
                expected: k + 2,
                got: cells.len(),
            });
        }
        ids.push(cells[0].to_string());
        system_ids.push(cells[1].to_string());
        for cell in &cells[2..] {
            let v = parse_f64(cell, path, lineno)?;
            if !v.is_finite() {
                return Err(IoError::NonFiniteValue { path: p(), line: lineno });
            }
            values.push(v);
        }
    }
    Ok(ScoresFile { matrix: ScoreMatrix::new(ids, names, values)?, system_ids })
}

pub fn write_scores(path: &Path, scores: &ScoreMatrix, system_ids: &[String]) -> Result<(), IoError> {
    if system_ids.len() != scores.n_rows() {
        return Err(IoError::LengthMismatch {
            expected: scores.n_rows(),
            got: system_ids.len(),
        });
    }
    let mut out = String::new();
    out.push_str("utterance_id,system_id");
    for name in scores.subsystem_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, id) in scores.utterance_ids().iter().enumerate() {
        out.push_str(id);
        out.push(',');
        out.push_str(&system_ids[i]);
        for v in scores.row(i) {
            out.push(',');
            out.push_str(&fmt_score(*v));
        }
        out.push('\n');
    }
    atomic_write(path, &out)
}

// ---------------------------------------------------------------------------
// labels: header `utterance_id,system_id,mos`; the system column may be
// absent (system ids are then parsed from the utterance-id prefix) and the
// mos column may be absent or partially empty (unlabeled rows)
// ---------------------------------------------------------------------------

pub fn read_labels(path: &Path) -> Result<MosDataset, IoError> {
    let lines = read_lines(path)?;
    let p = || path.display().to_string();
    let header = lines.first().ok_or_else(|| IoError::Parse {
        path: p(),
        line: 1,
        reason: "empty file".into(),
    })?;
    let fields: Vec<&str> = header.split(',').collect();
    let (has_system, has_mos) = match fields.as_slice() {
        ["utterance_id", "system_id", "mos"] => (true, true),
        ["utterance_id", "system_id"] => (true, false),
        ["utterance_id", "mos"] => (false, true),
        ["utterance_id"] => (false, false),
        _ => {
            return Err(IoError::Parse {
                path: p(),
                line: 1,
                reason: format!("unrecognized labels header {header:?}"),
            })
        }
    };
    let expected = 1 + usize::from(has_system) + usize::from(has_mos);
    let mut records = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let lineno = idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != expected {
            return Err(IoError::RaggedRow {
                path: p(),
                line: lineno,
                expected,
                got: cells.len(),
            });
        }
        let utterance_id = cells[0].to_string();
        let system_id = if has_system {
            cells[1].to_string()
        } else {
            system_id_from_utterance_id(&utterance_id).to_string()
        };
        let mos = if has_mos {
            let cell = cells[expected - 1].trim();
            if cell.is_empty() {
                None
            } else {
                let v = parse_f64(cell, path, lineno)?;
                if !v.is_finite() {
                    return Err(IoError::NonFiniteValue { path: p(), line: lineno });
                }
                Some(v)
            }
        } else {
            None
        };
        records.push(UtteranceRecord::new(utterance_id, system_id, mos)?);
    }
    Ok(MosDataset::new(records)?)
}

pub fn write_labels(path: &Path, dataset: &MosDataset) -> Result<(), IoError> {
    let mut out = String::new();
    if dataset.labeled() {
        out.push_str("utterance_id,system_id,mos\n");
        for r in dataset.records() {
            out.push_str(&format!(
                "{},{},{}\n",
                r.utterance_id,
                r.system_id,
                fmt_score(r.mos.unwrap())
            ));
        }
    } else {
        out.push_str("utterance_id,system_id\n");
        for r in dataset.records() {
            out.push_str(&format!("{},{}\n", r.utterance_id, r.system_id));
        }
    }
    atomic_write(path, &out)
}

// ---------------------------------------------------------------------------
// features: header `utterance_id,f_0,...,f_{D-1}`
// ---------------------------------------------------------------------------

pub fn read_features(path: &Path) -> Result<FeatureMatrix, IoError> {
    let lines = read_lines(path)?;
    let p = || path.display().to_string();
    let header = lines.first().ok_or_else(|| IoError::Parse {
        path: p(),
        line: 1,
        reason: "empty file".into(),
    })?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 2 || fields[0] != "utterance_id" {
        return Err(IoError::Parse {
            path: p(),
            line: 1,
            reason: format!("expected header utterance_id,f_0,..., got {header:?}"),
        });
    }
    for (j, f) in fields[1..].iter().enumerate() {
        if *f != format!("f_{j}") {
            return Err(IoError::Parse {
                path: p(),
                line: 1,
                reason: format!("feature column {} must be named f_{j}, got {f:?}", j + 2),
            });
        }
    }
    let dim = fields.len() - 1;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let lineno = idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != dim + 1 {
            return Err(IoError::RaggedRow {
                path: p(),
                line: lineno,
                expected: dim + 1,
                got: cells.len(),
            });
        }
        ids.push(cells[0].to_string());
        for cell in &cells[1..] {
            let v = parse_f64(cell, path, lineno)?;
            if !v.is_finite() {
                return Err(IoError::NonFiniteValue { path: p(), line: lineno });
            }
            values.push(v);
        }
    }
    Ok(FeatureMatrix::new(ids, dim, values)?)
}

pub fn write_features(path: &Path, features: &FeatureMatrix) -> Result<(), IoError> {
    let mut out = String::from("utterance_id");
    for name in features.column_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, id) in features.utterance_ids().iter().enumerate() {
        out.push_str(id);
        for v in features.row(i) {
            out.push(',');
            out.push_str(&fmt_score(*v));
        }
        out.push('\n');
    }
    atomic_write(path, &out)
}

// ---------------------------------------------------------------------------
// aux: header `utterance_id,aux`
// ---------------------------------------------------------------------------

pub fn read_aux(path: &Path) -> Result<Vec<(String, f64)>, IoError> {
    let lines = read_lines(path)?;
    let p = || path.display().to_string();
    let header = lines.first().ok_or_else(|| IoError::Parse {
        path: p(),
        line: 1,
        reason: "empty file".into(),
    })?;
    if header != "utterance_id,aux" {
        return Err(IoError::Parse {
            path: p(),
            line: 1,
            reason: format!("expected header utterance_id,aux, got {header:?}"),
        });
    }
    let mut out = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let lineno = idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 2 {
            return Err(IoError::RaggedRow { path: p(), line: lineno, expected: 2, got: cells.len() });
        }
        let v = parse_f64(cells[1], path, lineno)?;
        if !v.is_finite() {
            return Err(IoError::NonFiniteValue { path: p(), line: lineno });
        }
        out.push((cells[0].to_string(), v));
    }
    Ok(out)
}

pub fn write_aux(path: &Path, aux: &[(String, f64)]) -> Result<(), IoError> {
    let mut out = String::from("utterance_id,aux\n");
    for (id, v) in aux {
        out.push_str(&format!("{id},{}\n", fmt_score(*v)));
    }
    atomic_write(path, &out)
}

// ---------------------------------------------------------------------------
// answer file: headerless `utterance_id,score`, 6 decimal places
// ---------------------------------------------------------------------------

pub fn write_answer(path: &Path, ids: &[String], preds: &[f64]) -> Result<(), IoError> {
    if ids.len() != preds.len() {
        return Err(IoError::LengthMismatch { expected: ids.len(), got: preds.len() });
    }
    let mut out = String::new();
    for (id, v) in ids.iter().zip(preds) {
        out.push_str(&format!("{id},{}\n", fmt_score(*v)));
    }
    atomic_write(path, &out)
}

pub fn read_answer(path: &Path) -> Result<Vec<(String, f64)>, IoError> {
    let lines = read_lines(path)?;
    let p = || path.display().to_string();
    let mut out = Vec::new();
    for (idx, line) in lines.iter().enumerate() {
        let lineno = idx + 1;
        let (id, score) = line.rsplit_once(',').ok_or_else(|| IoError::Parse {
            path: p(),
            line: lineno,
            reason: "expected utterance_id,score".into(),
        })?;
        out.push((id.to_string(), parse_f64(score, path, lineno)?));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// model files: versioned JSON, shortest-round-trip floats
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    method: FuserMethod,
    subsystem_names: Vec<String>,
    clamp: bool,
    params: FuserParams,
    train_meta: TrainMeta,
}

pub fn save_model(model: &FuserModel, path: &Path) -> Result<(), IoError> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        method: model.method,
        subsystem_names: model.subsystem_names.clone(),
        clamp: model.clamp,
        params: model.params.clone(),
        train_meta: model.train_meta.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| IoError::CorruptModel {
        path: path.display().to_string(),
        field: e.to_string(),
    })?;
    text.push('\n');
    atomic_write(path, &text)
}

fn check_version(value: &serde_json::Value, path: &Path, supported: u32) -> Result<(), IoError> {
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| IoError::CorruptModel {
            path: path.display().to_string(),
            field: "format_version".into(),
        })?;
    if found != supported as u64 {
        return Err(IoError::VersionMismatch {
            path: path.display().to_string(),
            found,
            supported,
        });
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<FuserModel, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| os_err(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| IoError::CorruptModel {
            path: path.display().to_string(),
            field: e.to_string(),
        })?;
    check_version(&value, path, MODEL_FORMAT_VERSION)?;
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| IoError::CorruptModel {
            path: path.display().to_string(),
            field: e.to_string(),
        })?;
    let model = FuserModel {
        method: file.method,
        params: file.params,
        subsystem_names: file.subsystem_names,
        clamp: file.clamp,
        train_meta: file.train_meta,
    };
    let params_kind = match &model.params {
        FuserParams::Voting => FuserMethod::Voting,
        FuserParams::WeightedVoting { .. } => FuserMethod::WeightedVoting,
        FuserParams::LinearRegression { .. } => FuserMethod::LinearRegression,
        FuserParams::ProposedFuser { .. } => FuserMethod::ProposedFuser,
        FuserParams::Mlp { .. } => FuserMethod::Mlp,
        FuserParams::Gbdt(_) => FuserMethod::Gbdt,
        FuserParams::FeatureRegression { .. } => FuserMethod::FeatureRegression,
        FuserParams::AuxFuser { .. } => FuserMethod::AuxFuser,
    };
    if params_kind != model.method {
        return Err(IoError::CorruptModel {
            path: path.display().to_string(),
            field: format!(
                "params block is {} but method says {}",
                params_kind, model.method
            ),
        });
    }
    Ok(model)
}

// ---------------------------------------------------------------------------
// calibration files: same conventions as model files
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationFile {
    format_version: u32,
    #[serde(flatten)]
    calibration: CalibrationSet,
}

pub fn save_calibration(cal: &CalibrationSet, path: &Path) -> Result<(), IoError> {
    let file =
        CalibrationFile { format_version: CALIBRATION_FORMAT_VERSION, calibration: cal.clone() };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| IoError::CorruptModel {
        path: path.display().to_string(),
        field: e.to_string(),
    })?;
    text.push('\n');
    atomic_write(path, &text)
}

pub fn load_calibration(path: &Path) -> Result<CalibrationSet, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| os_err(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| IoError::CorruptModel {
            path: path.display().to_string(),
            field: e.to_string(),
        })?;
    check_version(&value, path, CALIBRATION_FORMAT_VERSION)?;
    let file: CalibrationFile =
        serde_json::from_value(value).map_err(|e| IoError::CorruptModel {
            path: path.display().to_string(),
            field: e.to_string(),
        })?;
    Ok(file.calibration)
}
