use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::BatchNormLayer;
use super::model::{CnnArch, CnnGrads, CnnModel, TrainingMeta};
use super::{NnError, Tensor4};
use crate::data::PnLabel;
use crate::imagecore::{resize_image, RgbImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Validation runs every this many optimizer iterations.
    pub validation_frequency: usize,
    pub shuffle_each_epoch: bool,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            max_epochs: 250,
            batch_size: 16,
            validation_frequency: 25,
            shuffle_each_epoch: true,
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::InvalidOptions("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(NnError::InvalidOptions("momentum must lie in [0, 1)"));
        }
        if self.max_epochs == 0 {
            return Err(NnError::InvalidOptions("at least one epoch is required"));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidOptions("batch size must be positive"));
        }
        if self.validation_frequency == 0 {
            return Err(NnError::InvalidOptions("validation frequency must be positive"));
        }
        Ok(())
    }
}

/// One validation checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub iteration: usize,
    pub epoch: usize,
    /// Mini-batch loss of the iteration that triggered the checkpoint.
    pub train_loss: f64,
    /// `None` when no validation set was supplied.
    pub val_accuracy: Option<f64>,
}

pub fn write_log_csv<W: Write>(log: &[LogEntry], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["iteration", "epoch", "train_loss", "val_accuracy"])?;
    for e in log {
        let acc = e.val_accuracy.map(|a| a.to_string()).unwrap_or_default();
        w.write_record([e.iteration.to_string(), e.epoch.to_string(), e.train_loss.to_string(), acc])?;
    }
    w.flush()
}

/// `v <- momentum * v - lr * g; p <- p + v`.
pub fn sgdm_step(params: &mut [f64], grads: &[f64], velocity: &mut [f64], lr: f64, momentum: f64) {
    assert!(params.len() == grads.len() && params.len() == velocity.len(), "sgdm_step: length mismatch");
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
}

/// Resizes to the network input and scales to [0, 1]. Mean centring
/// happens inside the model.
pub fn image_to_tensor(img: &RgbImage, arch: &CnnArch) -> Tensor4 {
    let (h, w, _) = arch.input;
    let resized = resize_image(img, w, h);
    let data = resized.data().iter().map(|&v| f64::from(v) / 255.0).collect();
    Tensor4::from_raw([1, h, w, 3], data)
}

fn batch_tensor(images: &[&RgbImage], arch: &CnnArch) -> Result<Tensor4, NnError> {
    let parts: Vec<Tensor4> = images.iter().map(|i| image_to_tensor(i, arch)).collect();
    Tensor4::stack(&parts)
}

fn check_arch_input(arch: &CnnArch) -> Result<(), NnError> {
    if arch.input.2 != 3 {
        return Err(NnError::ShapeMismatch("image input needs 3 channels".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: PnLabel,
    /// Indexed by [`PnLabel::index`].
    pub probs: [f64; 2],
}

fn to_prediction(p: &[f64]) -> Prediction {
    // ties go to class 0
    let label = if p[1] > p[0] { PnLabel::Atypical } else { PnLabel::Typical };
    Prediction { label, probs: [p[0], p[1]] }
}

pub fn predict(model: &CnnModel, img: &RgbImage) -> Result<Prediction, NnError> {
    if !model.is_trained() {
        return Err(NnError::UntrainedModel);
    }
    check_arch_input(&model.arch)?;
    let probs = model.forward_infer(&image_to_tensor(img, &model.arch))?;
    Ok(to_prediction(&probs[0]))
}

/// Predictions for many images, evaluated in chunks of `chunk` samples.
pub fn predict_batch(model: &CnnModel, images: &[&RgbImage], chunk: usize) -> Result<Vec<Prediction>, NnError> {
    if !model.is_trained() {
        return Err(NnError::UntrainedModel);
    }
    infer_all(model, images, chunk)
}

fn infer_all(model: &CnnModel, images: &[&RgbImage], chunk: usize) -> Result<Vec<Prediction>, NnError> {
    check_arch_input(&model.arch)?;
    let mut out = Vec::with_capacity(images.len());
    for part in images.chunks(chunk.max(1)) {
        let x = batch_tensor(part, &model.arch)?;
        out.extend(model.forward_infer(&x)?.iter().map(|p| to_prediction(p)));
    }
    Ok(out)
}

/// Fraction of `samples` classified correctly.
pub fn accuracy(model: &CnnModel, samples: &[(RgbImage, PnLabel)], chunk: usize) -> Result<f64, NnError> {
    if samples.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let images: Vec<&RgbImage> = samples.iter().map(|(i, _)| i).collect();
    let preds = infer_all(model, &images, chunk)?;
    let hits = preds.iter().zip(samples).filter(|(p, (_, l))| p.label == *l).count();
    Ok(hits as f64 / samples.len() as f64)
}

fn merge_stats(acc: &mut (Vec<f64>, Vec<f64>, usize), mean: &[f64], var: &[f64], count: usize) {
    // pooled mean and biased variance of two disjoint groups
    let (am, av, an) = acc;
    let total = (*an + count) as f64;
    let (na, nb) = (*an as f64, count as f64);
    for k in 0..mean.len() {
        let delta = mean[k] - am[k];
        let m = am[k] + delta * nb / total;
        let v = (av[k] * na + var[k] * nb + delta * delta * na * nb / total) / total;
        am[k] = m;
        av[k] = v;
    }
    *an += count;
}

fn set_population(bn: &mut BatchNormLayer, stats: (Vec<f64>, Vec<f64>, usize)) {
    let (mean, var, n) = stats;
    let unbias = if n > 1 { n as f64 / (n - 1) as f64 } else { 1.0 };
    bn.running_mean = mean;
    bn.running_var = var.iter().map(|v| v * unbias).collect();
}

/// Replaces both normalisation layers' running statistics with exact
/// population statistics over `images`, layer by layer.
pub fn finalize_batch_norm(model: &mut CnnModel, images: &[&RgbImage], chunk: usize) -> Result<(), NnError> {
    if images.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    check_arch_input(&model.arch)?;
    let c1 = model.bn1.channels();
    let mut acc = (vec![0.0; c1], vec![0.0; c1], 0);
    for part in images.chunks(chunk.max(1)) {
        let z = model.conv1_pre_norm(&batch_tensor(part, &model.arch)?)?;
        let (m, v) = BatchNormLayer::channel_stats(&z);
        merge_stats(&mut acc, &m, &v, z.data().len() / c1);
    }
    set_population(&mut model.bn1, acc);

    let c2 = model.bn2.channels();
    let mut acc = (vec![0.0; c2], vec![0.0; c2], 0);
    for part in images.chunks(chunk.max(1)) {
        let z = model.conv2_pre_norm(&batch_tensor(part, &model.arch)?)?;
        let (m, v) = BatchNormLayer::channel_stats(&z);
        merge_stats(&mut acc, &m, &v, z.data().len() / c2);
    }
    set_population(&mut model.bn2, acc);
    Ok(())
}

fn channel_means(images: &[&RgbImage]) -> Vec<f64> {
    let mut sum = [0.0f64; 3];
    let mut count = 0usize;
    for img in images {
        for p in img.pixels() {
            for k in 0..3 {
                sum[k] += f64::from(p[k]) / 255.0;
            }
        }
        count += img.width() * img.height();
    }
    sum.iter().map(|s| s / count.max(1) as f64).collect()
}

/// Trains a freshly initialised network. Images are resized to the
/// architecture's input. The validation set is only ever evaluated, never
/// used for updates. All randomness derives from `opts.seed`.
pub fn train_cnn(
    train: &[(RgbImage, PnLabel)],
    val: &[(RgbImage, PnLabel)],
    arch: &CnnArch,
    opts: &TrainOptions,
) -> Result<(CnnModel, Vec<LogEntry>), NnError> {
    opts.validate()?;
    arch.validate()?;
    check_arch_input(arch)?;
    if train.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    for label in PnLabel::ALL {
        if !train.iter().any(|(_, l)| *l == label) {
            return Err(NnError::EmptyClass(label));
        }
    }

    let (h, w, _) = arch.input;
    let resized: Vec<RgbImage> = train.iter().map(|(i, _)| resize_image(i, w, h)).collect();
    let val_resized: Vec<(RgbImage, PnLabel)> = val.iter().map(|(i, l)| (resize_image(i, w, h), *l)).collect();
    let labels: Vec<usize> = train.iter().map(|(_, l)| l.index()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut model = CnnModel::init(arch.clone(), &mut rng)?;
    let refs: Vec<&RgbImage> = resized.iter().collect();
    model.input_mean = channel_means(&refs);

    let mut velocity = CnnGrads::zeros_like(&model);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::new();
    let mut iteration = 0;
    let mut last_loss = f64::NAN;
    let mut last_logged = 0;
    let eval_chunk = opts.batch_size;

    for epoch in 1..=opts.max_epochs {
        if opts.shuffle_each_epoch {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(opts.batch_size) {
            let imgs: Vec<&RgbImage> = batch.iter().map(|&i| &resized[i]).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let x = batch_tensor(&imgs, arch)?;
            let cache = model.forward_train(&x)?;
            let grads = model.backward(&cache, &ys)?;
            last_loss = CnnModel::loss(&cache, &ys);
            let (n1, n2) = cache.spatial_counts();
            let (b1, b2) = cache.bn_caches();
            model.bn1.update_running(b1, n1);
            model.bn2.update_running(b2, n2);
            drop(cache);
            for ((p, g), v) in model.params_mut().into_iter().zip(&grads.0).zip(velocity.0.iter_mut()) {
                sgdm_step(p, g, v, opts.learning_rate, opts.momentum);
            }
            iteration += 1;
            if iteration % opts.validation_frequency == 0 {
                let val_accuracy =
                    if val_resized.is_empty() { None } else { Some(accuracy(&model, &val_resized, eval_chunk)?) };
                log.push(LogEntry { iteration, epoch, train_loss: last_loss, val_accuracy });
                last_logged = iteration;
            }
        }
        if last_loss.is_nan() || last_loss.is_infinite() {
            return Err(NnError::NonFinite);
        }
    }

    finalize_batch_norm(&mut model, &refs, eval_chunk)?;
    let final_val_accuracy =
        if val_resized.is_empty() { None } else { Some(accuracy(&model, &val_resized, eval_chunk)?) };
    // the last row always describes the returned model
    if last_logged == iteration {
        if let Some(last) = log.last_mut() {
            last.val_accuracy = final_val_accuracy;
        }
    } else {
        log.push(LogEntry {
            iteration,
            epoch: opts.max_epochs,
            train_loss: last_loss,
            val_accuracy: final_val_accuracy,
        });
    }
    model.meta = Some(TrainingMeta {
        seed: opts.seed,
        epochs_run: opts.max_epochs,
        iterations: iteration,
        final_val_accuracy,
        options: opts.clone(),
    });
    Ok((model, log))
}
