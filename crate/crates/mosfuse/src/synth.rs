//! Seeded synthetic generator for MOS datasets and subsystem score tables.
//!
//! Each synthesis system gets a base quality drawn uniformly from the
//! configured range; utterance truths are the base plus normal noise,
//! quantized to the 0.125 grid; subsystem scores are the truth plus a
//! per-subsystem bias, per-subsystem normal noise and an optional domain
//! shift, clamped to [1, 5]. Generation is single-threaded and the draw
//! order is part of the contract: a fixed seed reproduces files bit-exactly.

use crate::data::{
    quantize_to_grid, DataError, MosDataset, ScoreGrid, ScoreMatrix, UtteranceRecord, MOS_MAX,
    MOS_MIN,
};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-utterance truth noise applied before grid quantization.
pub const TRUTH_NOISE_SD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Sizes of the out-of-domain suite (labeled / unlabeled / held-out).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OodSizes {
    pub labeled: usize,
    pub unlabeled: usize,
    pub heldout: usize,
}

impl Default for OodSizes {
    fn default() -> Self {
        OodSizes { labeled: 136, unlabeled: 540, heldout: 540 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_systems: usize,
    pub utts_per_system: usize,
    pub k_subsystems: usize,
    pub subsystem_bias: Vec<f64>,
    pub subsystem_noise_sd: Vec<f64>,
    /// Base-quality range for synthesis systems, within [1, 5].
    pub system_quality_range: (f64, f64),
    /// Additive domain shift applied to subsystem outputs.
    pub ood_shift: f64,
    pub ood_sizes: OodSizes,
}

impl SynthConfig {
    /// Default shape: heterogeneous subsystems (biases 0..0.6, noise SDs
    /// 0.2..0.8 across the K columns) over mid-range system qualities.
    pub fn new(seed: u64, n_systems: usize, utts_per_system: usize, k_subsystems: usize) -> Self {
        SynthConfig {
            seed,
            n_systems,
            utts_per_system,
            k_subsystems,
            subsystem_bias: default_biases(k_subsystems),
            subsystem_noise_sd: default_noise_sds(k_subsystems),
            system_quality_range: (1.5, 4.5),
            ood_shift: 0.0,
            ood_sizes: OodSizes::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_systems == 0 || self.utts_per_system == 0 || self.k_subsystems == 0 {
            return Err(SynthError::InvalidConfig(
                "n_systems, utts_per_system and k_subsystems must be positive".into(),
            ));
        }
        if self.subsystem_bias.len() != self.k_subsystems
            || self.subsystem_noise_sd.len() != self.k_subsystems
        {
            return Err(SynthError::InvalidConfig(format!(
                "bias/noise vectors must have length {}",
                self.k_subsystems
            )));
        }
        let (lo, hi) = self.system_quality_range;
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo < MOS_MIN || hi > MOS_MAX {
            return Err(SynthError::InvalidConfig(format!(
                "system_quality_range ({lo}, {hi}) must satisfy 1 <= lo <= hi <= 5"
            )));
        }
        if self.subsystem_noise_sd.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(SynthError::InvalidConfig("noise SDs must be finite and >= 0".into()));
        }
        if self.subsystem_bias.iter().any(|b| !b.is_finite()) || !self.ood_shift.is_finite() {
            return Err(SynthError::InvalidConfig("biases and ood_shift must be finite".into()));
        }
        Ok(())
    }
}

pub fn default_biases(k: usize) -> Vec<f64> {
    let denom = (k - 1).max(1) as f64;
    (0..k).map(|j| 0.6 * j as f64 / denom).collect()
}

pub fn default_noise_sds(k: usize) -> Vec<f64> {
    let denom = (k - 1).max(1) as f64;
    (0..k).map(|j| 0.2 + 0.6 * j as f64 / denom).collect()
}

fn subsystem_names(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("sub{j:02}")).collect()
}

/// Draws one utterance: quantized truth plus the K subsystem scores.
fn draw_utterance(rng: &mut Rng, base_quality: f64, cfg: &SynthConfig, grid: &ScoreGrid) -> (f64, Vec<f64>) {
    let raw = base_quality + rng.normal_scaled(0.0, TRUTH_NOISE_SD);
    let truth = quantize_to_grid(raw, grid).expect("finite by construction");
    let scores = (0..cfg.k_subsystems)
        .map(|j| {
            let s = truth
                + cfg.subsystem_bias[j]
                + rng.normal_scaled(0.0, cfg.subsystem_noise_sd[j])
                + cfg.ood_shift;
            s.clamp(MOS_MIN, MOS_MAX)
        })
        .collect();
    (truth, scores)
}

/// One labeled dataset of `n_systems * utts_per_system` rows with aligned
/// subsystem scores.
pub fn generate(config: &SynthConfig) -> Result<(MosDataset, ScoreMatrix), SynthError> {
    config.validate()?;
    let mut rng = Rng::seed_from_u64(config.seed);
    let grid = ScoreGrid::default();
    let (lo, hi) = config.system_quality_range;
    let qualities: Vec<f64> = (0..config.n_systems).map(|_| rng.range(lo, hi)).collect();

    let n = config.n_systems * config.utts_per_system;
    let mut records = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * config.k_subsystems);
    let mut ids = Vec::with_capacity(n);
    let mut counter = 0usize;
    for (s, q) in qualities.iter().enumerate() {
        let system_id = format!("sys{s:03}");
        for _ in 0..config.utts_per_system {
            let (truth, scores) = draw_utterance(&mut rng, *q, config, &grid);
            let utterance_id = format!("{system_id}-utt{counter:05}");
            records.push(UtteranceRecord::new(&utterance_id, &system_id, Some(truth))?);
            ids.push(utterance_id);
            values.extend(scores);
            counter += 1;
        }
    }
    let dataset = MosDataset::new(records)?;
    let scores = ScoreMatrix::new(ids, subsystem_names(config.k_subsystems), values)?;
    Ok((dataset, scores))
}

/// Main-track shaped pair of train/validation sets drawn from one pool.
pub struct MainSuite {
    pub train: (MosDataset, ScoreMatrix),
    pub val: (MosDataset, ScoreMatrix),
}

pub const MAIN_TRAIN_ROWS: usize = 4974;
pub const MAIN_VAL_ROWS: usize = 1066;

/// Generates a pool of `n_systems * utts_per_system` rows and splits off the
/// first `n_train` as the training set. The default config shape
/// (151 systems x 40 utterances = 6040 rows) yields the challenge's
/// 4974-train / 1066-validation sizes.
pub fn generate_main_suite(
    config: &SynthConfig,
    n_train: usize,
) -> Result<MainSuite, SynthError> {
    let (dataset, scores) = generate(config)?;
    if n_train >= dataset.len() {
        return Err(SynthError::InvalidConfig(format!(
            "n_train {n_train} must be below the pool size {}",
            dataset.len()
        )));
    }
    let (train_ds, val_ds) = dataset.split_at(n_train)?;
    let (train_sc, val_sc) = scores.split_at(n_train)?;
    Ok(MainSuite { train: (train_ds, train_sc), val: (val_ds, val_sc) })
}

/// The out-of-domain suite: labeled train set, unlabeled score table, and a
/// labeled held-out set, all drawn from one shared set of synthesis systems
/// and the same shifted score distribution.
pub struct OodSuite {
    pub labeled: (MosDataset, ScoreMatrix),
    pub unlabeled: ScoreMatrix,
    /// Truths behind the unlabeled rows, for held-back evaluation only.
    pub unlabeled_truth: Vec<f64>,
    pub heldout: (MosDataset, ScoreMatrix),
}

pub fn generate_ood_suite(config: &SynthConfig) -> Result<OodSuite, SynthError> {
    config.validate()?;
    let mut rng = Rng::seed_from_u64(config.seed);
    let grid = ScoreGrid::default();
    let (lo, hi) = config.system_quality_range;
    let qualities: Vec<f64> = (0..config.n_systems).map(|_| rng.range(lo, hi)).collect();
    let names = subsystem_names(config.k_subsystems);

    let part = |tag: &str, count: usize, rng: &mut Rng| -> Result<(MosDataset, ScoreMatrix), SynthError> {
        let mut records = Vec::with_capacity(count);
        let mut ids = Vec::with_capacity(count);
        let mut values = Vec::with_capacity(count * config.k_subsystems);
        for i in 0..count {
            let s = i % config.n_systems;
            let system_id = format!("osys{s:02}");
            let (truth, scores) = draw_utterance(rng, qualities[s], config, &grid);
            let utterance_id = format!("{system_id}-{tag}{i:04}");
            records.push(UtteranceRecord::new(&utterance_id, &system_id, Some(truth))?);
            ids.push(utterance_id);
            values.extend(scores);
        }
        Ok((MosDataset::new(records)?, ScoreMatrix::new(ids, names.clone(), values)?))
    };

    let sizes = config.ood_sizes;
    let labeled = part("lab", sizes.labeled, &mut rng)?;
    let (unlabeled_ds, unlabeled) = part("unl", sizes.unlabeled, &mut rng)?;
    let unlabeled_truth = if sizes.unlabeled == 0 { Vec::new() } else { unlabeled_ds.truths()? };
    let heldout = part("hld", sizes.heldout, &mut rng)?;
    Ok(OodSuite { labeled, unlabeled, unlabeled_truth, heldout })
}
