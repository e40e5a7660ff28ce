//! Subcommand implementations. Every file-producing run also writes a
//! `.config` sidecar with the fully resolved flags so a run can be
//! reproduced exactly from its outputs.

use crate::{
    CliError, EvaluateArgs, GlobalOpts, OodPipelineArgs, PredictArgs, PseudoLabelArgs,
    SynthArgs, TrainArgs,
};
use mosfuse::data::{
    align, align_features, quantize_to_grid, FeatureMatrix, MosDataset, ScoreGrid,
    ScoreMatrix, UtteranceRecord,
};
use mosfuse::fusers::{
    fit_aux_fuser, fit_feature_regression, fit_gbdt, fit_gbdt_on_features,
    fit_linear_regression, fit_mlp, fit_proposed_fuser, fit_voting, fit_weighted_voting,
    FuserMethod, GbdtSettings, HoldoutSet, Loss, PredictInput, TrainConfig, Validation,
};
use mosfuse::io;
use mosfuse::metrics::{mse, MetricReport};
use mosfuse::semisup::{manifest_text, PipelineConfig};
use mosfuse::synth::{generate, generate_ood_suite, OodSizes, SynthConfig};
use std::collections::HashMap;
use std::path::Path;

type CliResult = Result<(), CliError>;

fn say(global: &GlobalOpts, line: &str) {
    if !global.quiet {
        println!("{line}");
    }
}

fn parse_loss(global: &GlobalOpts) -> Loss {
    match global.loss.as_str() {
        "l2" => Loss::L2,
        _ => Loss::L1,
    }
}

fn parse_method(s: &str) -> Result<FuserMethod, CliError> {
    s.parse::<FuserMethod>().map_err(CliError::usage)
}

/// `<out>.config` sidecar with the resolved subcommand + global flags.
fn write_sidecar<A: serde::Serialize>(
    out: &Path,
    subcommand: &str,
    args: &A,
    global: &GlobalOpts,
) -> CliResult {
    let sidecar = {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".config");
        out.with_file_name(name)
    };
    let body = serde_json::json!({
        "subcommand": subcommand,
        "args": args,
        "global": global,
    });
    let mut text = serde_json::to_string_pretty(&body)
        .map_err(|e| CliError { code: 3, message: e.to_string() })?;
    text.push('\n');
    io::atomic_write(&sidecar, &text)?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError {
        code: 3,
        message: format!("{}: {e}", dir.display()),
    })
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub fn run_synth(args: &SynthArgs, global: &GlobalOpts) -> CliResult {
    ensure_dir(&args.out_dir)?;
    let systems = args.systems.unwrap_or(if args.ood { 26 } else { 151 });
    let mut cfg = SynthConfig::new(global.seed, systems, args.utts_per_system, args.subsystems);
    if args.ood {
        cfg.ood_shift = args.ood_shift;
        cfg.ood_sizes = OodSizes::default();
        let suite = generate_ood_suite(&cfg).map_err(CliError::from)?;
        let d = &args.out_dir;
        io::write_labels(&d.join("ood_labeled_labels.csv"), &suite.labeled.0)?;
        write_scores_for(&d.join("ood_labeled_scores.csv"), &suite.labeled.1)?;
        write_scores_for(&d.join("ood_unlabeled_scores.csv"), &suite.unlabeled)?;
        io::write_labels(&d.join("ood_heldout_labels.csv"), &suite.heldout.0)?;
        write_scores_for(&d.join("ood_heldout_scores.csv"), &suite.heldout.1)?;
        say(
            global,
            &format!(
                "synth ood: labeled={} unlabeled={} heldout={} subsystems={} shift={}",
                suite.labeled.0.len(),
                suite.unlabeled.n_rows(),
                suite.heldout.0.len(),
                args.subsystems,
                args.ood_shift
            ),
        );
    } else {
        let (dataset, scores) = generate(&cfg).map_err(CliError::from)?;
        io::write_labels(&args.out_dir.join("labels.csv"), &dataset)?;
        write_scores_for(&args.out_dir.join("scores.csv"), &scores)?;
        say(
            global,
            &format!(
                "synth main: rows={} systems={systems} subsystems={}",
                dataset.len(),
                args.subsystems
            ),
        );
    }
    // exact generator config echo, plus the resolved CLI sidecar
    let mut echo = serde_json::to_string_pretty(&cfg)
        .map_err(|e| CliError { code: 3, message: e.to_string() })?;
    echo.push('\n');
    io::atomic_write(&args.out_dir.join("synth_config.json"), &echo)?;
    write_sidecar(&args.out_dir.join("synth"), "synth", args, global)
}

/// Writes a scores CSV, deriving the system column from the id prefix.
fn write_scores_for(path: &Path, scores: &ScoreMatrix) -> CliResult {
    let system_ids: Vec<String> = scores
        .utterance_ids()
        .iter()
        .map(|id| mosfuse::data::system_id_from_utterance_id(id).to_string())
        .collect();
    io::write_scores(path, scores, &system_ids)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainData {
    truth: Vec<f64>,
    scores: Option<ScoreMatrix>,
    features: Option<FeatureMatrix>,
    aux: Option<Vec<f64>>,
}

fn load_train_data(args: &TrainArgs, needs: FuserMethod) -> Result<TrainData, CliError> {
    let dataset = io::read_labels(&args.train_labels)?;
    if !dataset.labeled() {
        return Err(CliError { code: 4, message: "training labels file is unlabeled".into() });
    }
    let truth = dataset.truths()?;
    let features = match (&args.features, needs) {
        (Some(path), _) => Some(align_features(&dataset, &io::read_features(path)?)?),
        (None, FuserMethod::FeatureRegression) => {
            return Err(CliError::usage(
                "--method feature_regression requires --features",
            ))
        }
        (None, _) => None,
    };
    let wants_scores = !matches!(needs, FuserMethod::FeatureRegression)
        && !(matches!(needs, FuserMethod::Gbdt) && features.is_some());
    let scores = if wants_scores {
        let path = args.train_scores.as_ref().ok_or_else(|| {
            CliError::usage(format!("--method {} requires --train-scores", needs))
        })?;
        Some(align(&dataset, &io::read_scores(path)?.matrix)?)
    } else {
        None
    };
    let aux = match (&args.aux, needs) {
        (Some(path), _) => Some(aligned_aux(&dataset, &io::read_aux(path)?)?),
        (None, FuserMethod::AuxFuser) => {
            return Err(CliError::usage("--method aux_fuser requires --aux"))
        }
        (None, _) => None,
    };
    Ok(TrainData { truth, scores, features, aux })
}

fn aligned_aux(dataset: &MosDataset, aux: &[(String, f64)]) -> Result<Vec<f64>, CliError> {
    let map: HashMap<&str, f64> = aux.iter().map(|(id, v)| (id.as_str(), *v)).collect();
    if map.len() != aux.len() {
        return Err(CliError { code: 4, message: "duplicate utterance id in aux file".into() });
    }
    dataset
        .utterance_ids()
        .map(|id| {
            map.get(id).copied().ok_or_else(|| CliError {
                code: 4,
                message: format!("aux file has no value for utterance {id:?}"),
            })
        })
        .collect()
}

pub fn run_train(args: &TrainArgs, global: &GlobalOpts) -> CliResult {
    let method = parse_method(&args.method)?;
    let data = load_train_data(args, method)?;

    // explicit validation set (trains on all provided rows) or last-20% split
    let mut explicit_val: Option<(MosDataset, ScoreMatrix, Option<Vec<f64>>)> = None;
    let validation = match (&args.val_labels, &args.val_scores) {
        (Some(labels), Some(scores)) => {
            let val_ds = io::read_labels(labels)?;
            if !val_ds.labeled() {
                return Err(CliError { code: 4, message: "validation labels are unlabeled".into() });
            }
            let val_scores = align(&val_ds, &io::read_scores(scores)?.matrix)?;
            let val_aux = match (&args.val_aux, method) {
                (Some(path), _) => Some(aligned_aux(&val_ds, &io::read_aux(path)?)?),
                (None, FuserMethod::AuxFuser) => {
                    return Err(CliError::usage(
                        "--method aux_fuser with --val-scores requires --val-aux",
                    ))
                }
                (None, _) => None,
            };
            explicit_val = Some((val_ds, val_scores, val_aux));
            let (ds, sc, aux) = explicit_val.as_ref().unwrap();
            Validation::Holdout(HoldoutSet {
                scores: sc.clone(),
                truth: ds.truths()?,
                aux: aux.clone(),
            })
        }
        (None, None) => Validation::LastFraction(0.2),
        _ => {
            return Err(CliError::usage(
                "--val-labels and --val-scores must be given together",
            ))
        }
    };
    let cfg = TrainConfig {
        loss: parse_loss(global),
        learning_rate: args.learning_rate,
        max_epochs: args.max_epochs,
        patience: args.patience,
        seed: global.seed,
        validation,
    };
    let gbdt = GbdtSettings {
        n_trees: args.gbdt_trees,
        max_depth: args.gbdt_depth,
        shrinkage: args.gbdt_shrinkage,
        min_leaf: args.gbdt_min_leaf,
    };

    let model = match method {
        FuserMethod::Voting => fit_voting(data.scores.as_ref().unwrap())?,
        FuserMethod::WeightedVoting => {
            fit_weighted_voting(data.scores.as_ref().unwrap(), &data.truth, &cfg)?
        }
        FuserMethod::LinearRegression => {
            fit_linear_regression(data.scores.as_ref().unwrap(), &data.truth)?
        }
        FuserMethod::ProposedFuser => {
            fit_proposed_fuser(data.scores.as_ref().unwrap(), &data.truth, &cfg)?
        }
        FuserMethod::Mlp => fit_mlp(data.scores.as_ref().unwrap(), &data.truth, &cfg)?,
        FuserMethod::Gbdt => match &data.features {
            Some(f) => fit_gbdt_on_features(f, &data.truth, &gbdt)?,
            None => fit_gbdt(data.scores.as_ref().unwrap(), &data.truth, &gbdt)?,
        },
        FuserMethod::FeatureRegression => {
            fit_feature_regression(data.features.as_ref().unwrap(), &data.truth, args.ridge_lambda)?
        }
        FuserMethod::AuxFuser => fit_aux_fuser(
            data.scores.as_ref().unwrap(),
            data.aux.as_ref().unwrap(),
            &data.truth,
            &cfg,
            args.aux_log1p,
        )?,
    }
    .with_clamp(global.clamp);

    // validation summary: prefer MSE on the explicit validation set
    let val_summary = if let Some((val_ds, val_scores, val_aux)) = &explicit_val {
        let input = PredictInput::Scores(val_scores);
        let pred = model.predict(input, val_aux.as_deref())?;
        Some(mse(&pred, &val_ds.truths()?)?)
    } else {
        model.train_meta.final_val_loss
    };

    io::save_model(&model, &args.model_out)?;
    write_sidecar(&args.model_out, "train", args, global)?;
    let fmt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.12e}"));
    say(
        global,
        &format!(
            "trained method={} loss={} train_loss={} val_loss={} epochs={} converged={} model={}",
            method,
            model.train_meta.loss.name(),
            fmt(model.train_meta.final_train_loss),
            fmt(val_summary),
            model.train_meta.epochs_run,
            model.train_meta.converged,
            args.model_out.display()
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

pub fn run_predict(args: &PredictArgs, global: &GlobalOpts) -> CliResult {
    let mut model = io::load_model(&args.model)?;
    if global.clamp {
        model.clamp = true;
    }

    enum Table {
        Scores(ScoreMatrix),
        Features(FeatureMatrix),
    }
    let table = match (&args.scores, &args.features) {
        (Some(path), None) => {
            let mut matrix = io::read_scores(path)?.matrix;
            if let Some(cal_path) = &args.calibration {
                let cal = io::load_calibration(cal_path)?;
                matrix = mosfuse::semisup::apply_calibration(&cal, &matrix)?;
            }
            Table::Scores(matrix)
        }
        (None, Some(path)) => {
            if args.calibration.is_some() {
                return Err(CliError::usage("--calibration applies to --scores only"));
            }
            Table::Features(io::read_features(path)?)
        }
        _ => return Err(CliError::usage("pass exactly one of --scores or --features")),
    };
    let ids: Vec<String> = match &table {
        Table::Scores(m) => m.utterance_ids().to_vec(),
        Table::Features(m) => m.utterance_ids().to_vec(),
    };
    let aux = match &args.aux {
        Some(path) => {
            let raw = io::read_aux(path)?;
            let map: HashMap<&str, f64> = raw.iter().map(|(id, v)| (id.as_str(), *v)).collect();
            let mut vals = Vec::with_capacity(ids.len());
            for id in &ids {
                vals.push(*map.get(id.as_str()).ok_or_else(|| CliError {
                    code: 4,
                    message: format!("aux file has no value for utterance {id:?}"),
                })?);
            }
            Some(vals)
        }
        None => None,
    };
    let input = match &table {
        Table::Scores(m) => PredictInput::Scores(m),
        Table::Features(m) => PredictInput::Features(m),
    };
    let mut preds = model.predict(input, aux.as_deref())?;
    if args.quantize {
        let grid = ScoreGrid::default();
        for p in preds.iter_mut() {
            *p = quantize_to_grid(*p, &grid)?;
        }
    }
    io::write_answer(&args.out, &ids, &preds)?;
    write_sidecar(&args.out, "predict", args, global)?;
    say(global, &format!("predicted {} rows -> {}", preds.len(), args.out.display()));
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

pub fn run_evaluate(args: &EvaluateArgs, global: &GlobalOpts) -> CliResult {
    let answers = io::read_answer(&args.pred)?;
    let dataset = io::read_labels(&args.labels)?;
    let map: HashMap<&str, f64> = answers.iter().map(|(id, v)| (id.as_str(), *v)).collect();
    if map.len() != answers.len() {
        return Err(CliError { code: 4, message: "duplicate utterance id in answer file".into() });
    }
    if answers.len() != dataset.len() {
        return Err(CliError {
            code: 4,
            message: format!(
                "id mismatch: {} predictions vs {} labeled utterances",
                answers.len(),
                dataset.len()
            ),
        });
    }
    let mut preds = Vec::with_capacity(dataset.len());
    for id in dataset.utterance_ids() {
        preds.push(*map.get(id).ok_or_else(|| CliError {
            code: 4,
            message: format!("no prediction for utterance {id:?}"),
        })?);
    }
    let report = mosfuse::metrics::evaluate(&dataset, &preds)?;
    let rendered = match args.format.as_str() {
        "csv" => format!("{}\n{}\n", MetricReport::CSV_HEADER, report.to_csv_row()),
        _ => report.to_table(),
    };
    if let Some(out) = &args.out {
        io::atomic_write(out, &rendered)?;
        write_sidecar(out, "evaluate", args, global)?;
    }
    if !global.quiet || args.out.is_none() {
        print!("{rendered}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pseudo-label
// ---------------------------------------------------------------------------

pub fn run_pseudo_label(args: &PseudoLabelArgs, global: &GlobalOpts) -> CliResult {
    let mut model = io::load_model(&args.model)?;
    if global.clamp {
        model.clamp = true;
    }
    let cal = io::load_calibration(&args.calibration)?;
    let scores_file = io::read_scores(&args.unlabeled_scores)?;
    let labels = mosfuse::semisup::pseudo_label(&model, &cal, &scores_file.matrix)?;
    let dataset = pseudo_labels_dataset(&labels, &scores_file)?;
    io::write_labels(&args.out, &dataset)?;
    write_sidecar(&args.out, "pseudo-label", args, global)?;
    say(global, &format!("pseudo-labeled {} rows -> {}", labels.len(), args.out.display()));
    Ok(())
}

/// Pseudo-label pairs + the scores file's system column as a labels dataset.
/// Values must already be inside [1, 5]; run with --clamp if the fuser can
/// stray outside the MOS range.
fn pseudo_labels_dataset(
    labels: &[(String, f64)],
    scores_file: &io::ScoresFile,
) -> Result<MosDataset, CliError> {
    let systems: HashMap<&str, &str> = scores_file
        .matrix
        .utterance_ids()
        .iter()
        .zip(&scores_file.system_ids)
        .map(|(u, s)| (u.as_str(), s.as_str()))
        .collect();
    let mut records = Vec::with_capacity(labels.len());
    for (id, mos) in labels {
        let system = systems.get(id.as_str()).copied().unwrap_or("unknown");
        records.push(UtteranceRecord::new(id.clone(), system, Some(*mos))?);
    }
    Ok(MosDataset::new(records)?)
}

// ---------------------------------------------------------------------------
// ood-pipeline
// ---------------------------------------------------------------------------

pub fn run_ood_pipeline(args: &OodPipelineArgs, global: &GlobalOpts) -> CliResult {
    let method = parse_method(&args.method)?;
    ensure_dir(&args.out_dir)?;

    let main_ds = io::read_labels(&args.main_train_labels)?;
    let main_scores = align(&main_ds, &io::read_scores(&args.main_train_scores)?.matrix)?;
    let ood_ds = io::read_labels(&args.ood_labeled_labels)?;
    let ood_scores = align(&ood_ds, &io::read_scores(&args.ood_labeled_scores)?.matrix)?;
    let unlabeled_file = io::read_scores(&args.ood_unlabeled_scores)?;

    let cfg = PipelineConfig {
        method,
        train: TrainConfig {
            loss: parse_loss(global),
            learning_rate: args.learning_rate,
            max_epochs: args.max_epochs,
            patience: args.patience,
            seed: global.seed,
            validation: Validation::LastFraction(0.2),
        },
        gbdt: GbdtSettings::default(),
        pseudo_weight: args.pseudo_weight,
        clamp: global.clamp,
    };
    let artifacts = run_pipeline_lib(
        (&main_ds, &main_scores),
        (&ood_ds, &ood_scores),
        &unlabeled_file.matrix,
        &cfg,
    )?;

    let d = &args.out_dir;
    let files = [
        ("system_a", "system_a.json"),
        ("calibration_b", "calibration_b.json"),
        ("system_b", "system_b.json"),
        ("pseudo_labels", "pseudo_labels.csv"),
        ("calibration_c", "calibration_c.json"),
        ("system_c", "system_c.json"),
    ];
    io::save_model(&artifacts.system_a, &d.join("system_a.json"))?;
    io::save_calibration(&artifacts.calibration_b, &d.join("calibration_b.json"))?;
    io::save_model(&artifacts.system_b, &d.join("system_b.json"))?;
    let pseudo_ds = pseudo_labels_dataset(&artifacts.pseudo_labels, &unlabeled_file)?;
    io::write_labels(&d.join("pseudo_labels.csv"), &pseudo_ds)?;
    io::save_calibration(&artifacts.calibration_c, &d.join("calibration_c.json"))?;
    io::save_model(&artifacts.system_c, &d.join("system_c.json"))?;
    io::atomic_write(&d.join("manifest.txt"), &manifest_text(&artifacts, &cfg, &files))?;
    write_sidecar(&d.join("ood_pipeline"), "ood-pipeline", args, global)?;
    say(
        global,
        &format!(
            "pipeline done: method={} pseudo_labels={} out={}",
            method,
            artifacts.pseudo_labels.len(),
            d.display()
        ),
    );
    Ok(())
}

use mosfuse::semisup::run_ood_pipeline as run_pipeline_lib;
