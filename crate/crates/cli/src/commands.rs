use std::fs;
use std::path::{Path, PathBuf};

use pnkit_core::bof::{decode_bof, encode_bof, predict_bof_batch, train_bof, write_bof_log_csv, BofError, BOF_MAGIC};
use pnkit_core::data::{
    build_pn_dataset, id_labels, load_labeled_dataset, load_manifest_dataset, parse_labels_csv, stratified_split,
    write_labels_csv, DataError, LabeledImage, OverrideTable, PnLabel,
};
use pnkit_core::eval::{detection_rates, write_roc_csv, EvalReport};
use pnkit_core::imagecore::{load_image, GrayImage, RgbImage};
use pnkit_core::nn::{decode_model, encode_model, predict_batch, train_cnn, write_log_csv, NnError, MODEL_MAGIC};
use pnkit_core::pnextract::{extract_pigment_network, par_map, Smoother};

use crate::config::CliConfig;
use crate::error::{io_err, CliError};
use crate::{
    Command, CommonArgs, DataArgs, DatasetBuildArgs, DatasetCommand, EvalArgs, ExtractArgs, PipelineArgs, SmootherArg,
    TrainArgs, TrainCommand,
};

pub const CNN_MODEL_FILE: &str = "cnn_model.bin";
pub const CNN_LOG_FILE: &str = "cnn_log.csv";
pub const BOF_MODEL_FILE: &str = "bof_model.bin";
pub const BOF_LOG_FILE: &str = "bof_log.csv";
pub const TRAIN_SPLIT_FILE: &str = "train_split.csv";
pub const VAL_SPLIT_FILE: &str = "val_split.csv";
pub const EVAL_JSON_FILE: &str = "eval.json";
pub const ROC_CSV_FILE: &str = "roc.csv";
pub const COLORIZED_FILE: &str = "09_colorized.png";

/// Chunk size for batched CNN inference.
const INFER_CHUNK: usize = 16;
const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

pub(crate) fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Extract(a) => extract(&a),
        Command::Dataset(DatasetCommand::Build(a)) => dataset_build(&a),
        Command::Train(TrainCommand::Cnn(a)) => train_cnn_cmd(&a),
        Command::Train(TrainCommand::Bof(a)) => train_bof_cmd(&a),
        Command::Eval(a) => eval(&a),
    }
}

fn data_err(e: DataError) -> CliError {
    match e {
        DataError::Io(m) => CliError::Io(m),
        DataError::Config(m) => CliError::Config(m),
        other => CliError::Dataset(other.to_string()),
    }
}

fn nn_err(e: NnError) -> CliError {
    match e {
        NnError::Io(m) | NnError::Format(m) => CliError::Io(m),
        NnError::InvalidArch | NnError::InvalidOptions(_) => CliError::Config(e.to_string()),
        other => CliError::Dataset(other.to_string()),
    }
}

fn bof_err(e: BofError) -> CliError {
    match e {
        BofError::Io(m) | BofError::Format(m) => CliError::Io(m),
        BofError::InvalidParameter(_) => CliError::Config(e.to_string()),
        other => CliError::Dataset(other.to_string()),
    }
}

fn resolve(
    common: &CommonArgs,
    pipeline: Option<&PipelineArgs>,
    tweak: impl FnOnce(&mut CliConfig),
) -> Result<CliConfig, CliError> {
    let mut c = CliConfig::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if let Some(j) = common.jobs {
        c.jobs = j;
    }
    if let Some(p) = pipeline {
        let cfg = &mut c.pipeline;
        if let Some(v) = p.threshold_offset {
            cfg.threshold_offset = v;
        }
        if let Some(v) = p.min_component {
            cfg.min_component_px = v;
        }
        if let Some(w) = p.weights {
            cfg.channel_weights =
                pnkit_core::imagecore::ChannelWeights::new(w).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(s) = p.smoother {
            cfg.smoother = match s {
                SmootherArg::Box10 => Smoother::Box10,
                SmootherArg::Gaussian => Smoother::Gaussian,
            };
        }
    }
    tweak(&mut c);
    c.finish()
}

fn with_pool<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<(), String>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| io_err(path, e))?;
    write_bytes(path, &buf)
}

/// `(id, path)` for a single image, or for every image in a directory
/// sorted by file name.
fn list_inputs(input: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if input.is_file() {
        return Ok(vec![(stem(input), input.to_path_buf())]);
    }
    let entries = fs::read_dir(input).map_err(|e| io_err(input, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .map(|x| IMAGE_EXTENSIONS.contains(&x.to_string_lossy().to_ascii_lowercase().as_str()))
                    .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Io(format!("{}: no PNG, JPEG or BMP images", input.display())));
    }
    let out: Vec<(String, PathBuf)> = paths.into_iter().map(|p| (stem(&p), p)).collect();
    for pair in out.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(CliError::Io(format!("two input images share the name {:?}", pair[0].0)));
        }
    }
    Ok(out)
}

fn extract(a: &ExtractArgs) -> Result<(), CliError> {
    let cfg = resolve(&a.common, Some(&a.pipeline), |_| {})?;
    let inputs = list_inputs(&a.input)?;
    create_dir(&a.out)?;
    println!("# pnkit extract seed={} jobs={} images={}", cfg.seed, cfg.jobs, inputs.len());
    println!("# id detected threshold");
    let outcomes = par_map(&inputs, cfg.jobs, |(id, path)| -> Result<(bool, f64), String> {
        let img = load_image(path).map_err(|e| e.to_string())?;
        let res = extract_pigment_network(&img, &cfg.pipeline).map_err(|e| e.to_string())?;
        let dir = a.out.join(id);
        if a.emit_stages {
            res.write_stages(&dir).map_err(|e| e.to_string())?;
        } else {
            fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            let png = pnkit_core::imagecore::encode_png(&res.colorized).map_err(|e| e.to_string())?;
            let target = dir.join(COLORIZED_FILE);
            fs::write(&target, png).map_err(|e| format!("{}: {e}", target.display()))?;
        }
        Ok((res.detected, res.threshold_level))
    });
    let mut failed = 0;
    for ((id, _), outcome) in inputs.iter().zip(outcomes) {
        match outcome {
            Ok((detected, level)) => println!("{id} {detected} {level:.6}"),
            Err(msg) => {
                eprintln!("{id}: {msg}");
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Io(format!("{failed} of {} images failed", inputs.len())));
    }
    Ok(())
}

fn pct(v: Option<f64>) -> String {
    v.map(|r| format!("{:.2}%", 100.0 * r)).unwrap_or_else(|| "n/a".into())
}

fn dataset_build(a: &DatasetBuildArgs) -> Result<(), CliError> {
    let cfg = resolve(&a.common, Some(&a.pipeline), |_| {})?;
    let items = load_labeled_dataset(&a.root, &a.labels).map_err(data_err)?;
    let overrides = match &a.overrides {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
            OverrideTable::parse(file).map_err(data_err)?
        }
        None => OverrideTable::new(),
    };
    println!(
        "# pnkit dataset build seed={} jobs={} images={} overrides={}",
        cfg.seed,
        cfg.jobs,
        items.len(),
        overrides.len()
    );
    let report = build_pn_dataset(&items, &cfg.pipeline, &overrides, &a.out, cfg.jobs).map_err(data_err)?;
    println!("# id detected threshold");
    for row in &report.rows {
        let level = row.threshold_level.map(|l| format!("{l:.6}")).unwrap_or_else(|| "-".into());
        println!("{} {} {level}", row.image_id, row.detected);
    }
    for (id, msg) in &report.failures {
        eprintln!("{id}: {msg}");
    }
    let results: Vec<(PnLabel, bool)> = report.rows.iter().map(|r| (r.label, r.detected)).collect();
    let rates = detection_rates(&results).map_err(|e| CliError::Dataset(e.to_string()))?;
    for label in PnLabel::ALL {
        let c = rates.class(label);
        println!("# {label}: detected {}/{} ({})", c.detected, c.total, pct(c.rate()));
    }
    println!("# overall: detected {}/{} ({})", rates.overall.detected, rates.overall.total, pct(rates.overall.rate()));
    if !report.failures.is_empty() {
        println!("# failures: {}", report.failures.len());
    }
    Ok(())
}

fn load_items(d: &DataArgs) -> Result<Vec<LabeledImage>, CliError> {
    match (&d.data, &d.root, &d.labels) {
        (Some(dir), None, None) => load_manifest_dataset(dir).map_err(data_err),
        (None, Some(root), Some(labels)) => load_labeled_dataset(root, labels).map_err(data_err),
        _ => Err(CliError::Config("give either --data or --root with --labels".into())),
    }
}

fn load_images(items: &[LabeledImage], jobs: usize) -> Result<Vec<(RgbImage, PnLabel)>, CliError> {
    par_map(items, jobs, |i| load_image(&i.path).map(|img| (img, i.label)).map_err(|e| CliError::Io(e.to_string())))
        .into_iter()
        .collect()
}

fn split(cfg: &CliConfig, d: &DataArgs, out: &Path) -> Result<(Vec<LabeledImage>, Vec<LabeledImage>), CliError> {
    let items = load_items(d)?;
    let (train, val) = stratified_split(&items, cfg.train_fraction, cfg.seed).map_err(data_err)?;
    create_dir(out)?;
    for (name, part) in [(TRAIN_SPLIT_FILE, &train), (VAL_SPLIT_FILE, &val)] {
        write_with(&out.join(name), |buf| write_labels_csv(&id_labels(part), buf).map_err(|e| e.to_string()))?;
    }
    Ok((train, val))
}

fn opt4(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

fn train_cnn_cmd(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = resolve(&a.common, None, |c| {
        if let Some(e) = a.epochs {
            c.train.max_epochs = e;
        }
        if let Some(lr) = a.lr {
            c.train.learning_rate = lr;
        }
        if let Some(k) = a.vocab_size {
            c.bof.vocab_size = k;
        }
    })?;
    let (train, val) = split(&cfg, &a.data, &a.out)?;
    println!("# pnkit train cnn seed={} train={} val={}", cfg.seed, train.len(), val.len());
    let train_imgs = load_images(&train, cfg.jobs)?;
    let val_imgs = load_images(&val, cfg.jobs)?;
    let (model, log) =
        with_pool(cfg.jobs, || train_cnn(&train_imgs, &val_imgs, &cfg.arch, &cfg.train))?.map_err(nn_err)?;
    write_bytes(&a.out.join(CNN_MODEL_FILE), &encode_model(&model).map_err(nn_err)?)?;
    write_with(&a.out.join(CNN_LOG_FILE), |buf| write_log_csv(&log, buf).map_err(|e| e.to_string()))?;
    let meta = model.meta.as_ref().expect("trained model carries metadata");
    println!("# iterations={} epochs={}", meta.iterations, meta.epochs_run);
    println!("val_accuracy {}", opt4(meta.final_val_accuracy));
    Ok(())
}

fn to_gray(samples: Vec<(RgbImage, PnLabel)>) -> Vec<(GrayImage, PnLabel)> {
    samples.into_iter().map(|(img, l)| (GrayImage::from_rgb(&img), l)).collect()
}

fn train_bof_cmd(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = resolve(&a.common, None, |c| {
        if let Some(e) = a.epochs {
            c.bof.epochs = e;
        }
        if let Some(lr) = a.lr {
            c.bof.learning_rate = lr;
        }
        if let Some(k) = a.vocab_size {
            c.bof.vocab_size = k;
        }
    })?;
    let (train, val) = split(&cfg, &a.data, &a.out)?;
    println!("# pnkit train bof seed={} train={} val={}", cfg.seed, train.len(), val.len());
    let train_imgs = to_gray(load_images(&train, cfg.jobs)?);
    let (model, log) = with_pool(cfg.jobs, || train_bof(&train_imgs, &cfg.bof))?.map_err(bof_err)?;
    write_bytes(&a.out.join(BOF_MODEL_FILE), &encode_bof(&model).map_err(bof_err)?)?;
    write_with(&a.out.join(BOF_LOG_FILE), |buf| write_bof_log_csv(&log, buf).map_err(|e| e.to_string()))?;

    let val_imgs = to_gray(load_images(&val, cfg.jobs)?);
    let refs: Vec<&GrayImage> = val_imgs.iter().map(|(i, _)| i).collect();
    let preds = with_pool(cfg.jobs, || predict_bof_batch(&model, &refs))?.map_err(bof_err)?;
    let correct = preds.iter().zip(&val_imgs).filter(|(p, (_, l))| p.label == *l).count();
    let meta = model.meta.as_ref().expect("trained model carries metadata");
    println!(
        "# vocabulary={} descriptors={} kmeans_iterations={}",
        model.vocabulary.k(),
        meta.vocab_descriptors,
        meta.kmeans_iterations
    );
    println!("val_accuracy {:.4}", correct as f64 / val_imgs.len() as f64);
    Ok(())
}

enum Model {
    Cnn(Box<pnkit_core::nn::CnnModel>),
    Bof(Box<pnkit_core::bof::BofModel>),
}

fn load_any_model(path: &Path) -> Result<Model, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.starts_with(MODEL_MAGIC) {
        decode_model(&bytes).map(|m| Model::Cnn(Box::new(m))).map_err(|e| io_err(path, e))
    } else if bytes.starts_with(BOF_MAGIC) {
        decode_bof(&bytes).map(|m| Model::Bof(Box::new(m))).map_err(|e| io_err(path, e))
    } else {
        Err(io_err(path, "not a pnkit model file"))
    }
}

/// Keeps the items listed in `split`, in split order; every listed id must
/// exist with the same label.
fn restrict(items: Vec<LabeledImage>, split: &Path) -> Result<Vec<LabeledImage>, CliError> {
    let file = fs::File::open(split).map_err(|e| io_err(split, e))?;
    let wanted = parse_labels_csv(file).map_err(data_err)?;
    wanted
        .into_iter()
        .map(|(id, label)| match items.iter().find(|i| i.id == id) {
            Some(item) if item.label == label => Ok(item.clone()),
            Some(item) => {
                Err(CliError::Dataset(format!("{id} is {} in the split but {} in the data", label, item.label)))
            }
            None => Err(CliError::Dataset(format!("{id} from the split is not in the data"))),
        })
        .collect()
}

fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let cfg = resolve(&a.common, None, |_| {})?;
    let model = load_any_model(&a.model)?;
    let mut items = load_items(&a.data)?;
    if let Some(split) = &a.split {
        items = restrict(items, split)?;
    }
    if items.is_empty() {
        return Err(CliError::Dataset("nothing to evaluate".into()));
    }
    let samples = load_images(&items, cfg.jobs)?;
    let truths: Vec<PnLabel> = samples.iter().map(|(_, l)| *l).collect();
    let (kind, preds, scores): (&str, Vec<PnLabel>, Vec<f64>) = match &model {
        Model::Cnn(m) => {
            let refs: Vec<&RgbImage> = samples.iter().map(|(i, _)| i).collect();
            let p = with_pool(cfg.jobs, || predict_batch(m, &refs, INFER_CHUNK))?.map_err(nn_err)?;
            ("cnn", p.iter().map(|p| p.label).collect(), p.iter().map(|p| p.probs[1]).collect())
        }
        Model::Bof(m) => {
            let gray = to_gray(samples);
            let refs: Vec<&GrayImage> = gray.iter().map(|(i, _)| i).collect();
            let p = with_pool(cfg.jobs, || predict_bof_batch(m, &refs))?.map_err(bof_err)?;
            ("bof", p.iter().map(|p| p.label).collect(), p.iter().map(|p| p.score).collect())
        }
    };
    let report = EvalReport::new(&preds, &scores, &truths).map_err(|e| CliError::Dataset(e.to_string()))?;
    create_dir(&a.out)?;
    write_bytes(&a.out.join(EVAL_JSON_FILE), format!("{}\n", report.to_json()).as_bytes())?;
    write_with(&a.out.join(ROC_CSV_FILE), |buf| write_roc_csv(&report.roc, buf).map_err(|e| e.to_string()))?;

    let c = report.confusion;
    let m = report.metrics;
    println!("# pnkit eval seed={} model={kind} images={}", cfg.seed, truths.len());
    println!("tp={} fn={} fp={} tn={}", c.tp, c.fn_, c.fp, c.tn);
    println!("se={} sp={} pr={} ac={} auc={}", opt4(m.se), opt4(m.sp), opt4(m.pr), opt4(m.ac), opt4(report.auc));
    Ok(())
}
