use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, Vocabulary};
use super::surf::{detect_describe, Descriptor, DescriptorSet, SurfParams};
use super::BofError;
use crate::data::PnLabel;
use crate::imagecore::GrayImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BofParams {
    pub vocab_size: usize,
    pub surf: SurfParams,
    /// Descriptors drawn (seeded, without replacement) for clustering when
    /// the training images yield more.
    pub max_vocab_descriptors: usize,
    pub lambda: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for BofParams {
    fn default() -> Self {
        Self {
            vocab_size: 500,
            surf: SurfParams::default(),
            max_vocab_descriptors: 50_000,
            lambda: 1e-4,
            epochs: 200,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl BofParams {
    pub fn validate(&self) -> Result<(), BofError> {
        self.surf.validate()?;
        if self.vocab_size < 2 {
            return Err(BofError::InvalidParameter("vocabulary size must be at least 2"));
        }
        if self.max_vocab_descriptors < self.vocab_size {
            return Err(BofError::InvalidParameter("max_vocab_descriptors must be at least the vocabulary size"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(BofError::InvalidParameter("lambda must be non-negative"));
        }
        if self.epochs == 0 {
            return Err(BofError::InvalidParameter("epochs must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(BofError::InvalidParameter("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BofMeta {
    pub seed: u64,
    pub train_images: usize,
    pub vocab_descriptors: usize,
    pub kmeans_iterations: usize,
}

/// Vocabulary plus a linear decision function over word histograms.
/// `weights` holds one weight per word followed by the bias; a positive
/// score means atypical.
#[derive(Debug, Clone, PartialEq)]
pub struct BofModel {
    pub params: BofParams,
    pub vocabulary: Vocabulary,
    pub weights: Vec<f64>,
    pub meta: Option<BofMeta>,
}

impl BofModel {
    pub fn bias(&self) -> f64 {
        *self.weights.last().expect("weights hold K + 1 values")
    }

    /// `w . h + b`.
    pub fn score(&self, hist: &[f64]) -> f64 {
        let k = self.vocabulary.k();
        self.weights[..k].iter().zip(hist).map(|(w, h)| w * h).sum::<f64>() + self.weights[k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BofPrediction {
    pub label: PnLabel,
    pub score: f64,
}

/// L1-normalised visual-word histogram; all zeros for an empty set.
pub fn encode(set: &DescriptorSet, vocab: &Vocabulary) -> Vec<f64> {
    encode_descriptors(&set.descriptors, vocab)
}

pub fn encode_descriptors(descriptors: &[Descriptor], vocab: &Vocabulary) -> Vec<f64> {
    let mut hist = vec![0.0; vocab.k()];
    for d in descriptors {
        hist[vocab.nearest(d)] += 1.0;
    }
    let n = descriptors.len();
    if n > 0 {
        hist.iter_mut().for_each(|v| *v /= n as f64);
    }
    hist
}

/// Label by score sign; a zero score is typical.
pub fn label_of(score: f64) -> PnLabel {
    if score > 0.0 {
        PnLabel::Atypical
    } else {
        PnLabel::Typical
    }
}

fn sign(label: PnLabel) -> f64 {
    match label {
        PnLabel::Typical => -1.0,
        PnLabel::Atypical => 1.0,
    }
}

/// Training-set state after one classifier epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BofLogEntry {
    pub epoch: usize,
    /// Mean hinge loss plus `lambda / 2 * |w|^2`.
    pub objective: f64,
    pub train_accuracy: f64,
}

pub fn write_bof_log_csv<W: Write>(log: &[BofLogEntry], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["epoch", "objective", "train_accuracy"])?;
    for e in log {
        w.write_record([e.epoch.to_string(), e.objective.to_string(), e.train_accuracy.to_string()])?;
    }
    w.flush()
}

fn epoch_summary(epoch: usize, w: &[f64], features: &[Vec<f64>], labels: &[PnLabel], lambda: f64) -> BofLogEntry {
    let k = w.len() - 1;
    let (mut hinge, mut correct) = (0.0, 0usize);
    for (x, &label) in features.iter().zip(labels) {
        let score = w[..k].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[k];
        hinge += (1.0 - sign(label) * score).max(0.0);
        correct += usize::from(label_of(score) == label);
    }
    let n = features.len() as f64;
    let reg = lambda / 2.0 * w[..k].iter().map(|v| v * v).sum::<f64>();
    BofLogEntry { epoch, objective: hinge / n + reg, train_accuracy: correct as f64 / n }
}

/// Regularised hinge loss by per-sample subgradient steps. The step size
/// in epoch `t` (1-based) is `lr / t`; the bias is not regularised.
pub fn fit_linear(
    features: &[Vec<f64>],
    labels: &[PnLabel],
    params: &BofParams,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<BofLogEntry>) {
    let k = features.first().map_or(0, Vec::len);
    let mut w = vec![0.0; k + 1];
    let mut log = Vec::with_capacity(params.epochs);
    let mut order: Vec<usize> = (0..features.len()).collect();
    for t in 1..=params.epochs {
        order.shuffle(rng);
        let eta = params.learning_rate / t as f64;
        for &i in &order {
            let (x, y) = (&features[i], sign(labels[i]));
            let margin = y * (w[..k].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[k]);
            let shrink = 1.0 - eta * params.lambda;
            w[..k].iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                w[..k].iter_mut().zip(x).for_each(|(v, xi)| *v += eta * y * xi);
                w[k] += eta * y;
            }
        }
        log.push(epoch_summary(t, &w, features, labels, params.lambda));
    }
    (w, log)
}

pub fn describe_all(images: &[&GrayImage], surf: &SurfParams) -> Result<Vec<DescriptorSet>, BofError> {
    images.par_iter().map(|img| detect_describe(img, surf)).collect()
}

/// Builds the vocabulary from the training images only, encodes them and
/// fits the linear classifier. Deterministic for a fixed seed.
pub fn train_bof(train: &[(GrayImage, PnLabel)], params: &BofParams) -> Result<(BofModel, Vec<BofLogEntry>), BofError> {
    params.validate()?;
    for label in PnLabel::ALL {
        let n = train.iter().filter(|(_, l)| *l == label).count();
        if n < 2 {
            return Err(BofError::EmptyClass { label, count: n });
        }
    }
    let images: Vec<&GrayImage> = train.iter().map(|(i, _)| i).collect();
    let sets = describe_all(&images, &params.surf)?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut pool: Vec<&Descriptor> = sets.iter().flat_map(|s| &s.descriptors).collect();
    if pool.len() > params.max_vocab_descriptors {
        pool.shuffle(&mut rng);
        pool.truncate(params.max_vocab_descriptors);
    }
    let points: Vec<Descriptor> = pool.into_iter().copied().collect();
    let clustering = kmeans(&points, params.vocab_size, params.seed)?;
    let vocabulary = clustering.vocabulary;

    let features: Vec<Vec<f64>> = sets.par_iter().map(|s| encode(s, &vocabulary)).collect();
    let labels: Vec<PnLabel> = train.iter().map(|(_, l)| *l).collect();
    let (weights, log) = fit_linear(&features, &labels, params, &mut rng);
    let model = BofModel {
        params: params.clone(),
        vocabulary,
        weights,
        meta: Some(BofMeta {
            seed: params.seed,
            train_images: train.len(),
            vocab_descriptors: points.len(),
            kmeans_iterations: clustering.iterations,
        }),
    };
    Ok((model, log))
}

pub fn predict_bof(model: &BofModel, img: &GrayImage) -> Result<BofPrediction, BofError> {
    if model.meta.is_none() {
        return Err(BofError::UntrainedModel);
    }
    let set = detect_describe(img, &model.params.surf)?;
    let score = model.score(&encode(&set, &model.vocabulary));
    Ok(BofPrediction { label: label_of(score), score })
}

pub fn predict_bof_batch(model: &BofModel, images: &[&GrayImage]) -> Result<Vec<BofPrediction>, BofError> {
    images.par_iter().map(|img| predict_bof(model, img)).collect()
}
