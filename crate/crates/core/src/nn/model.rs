use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layers::{
    clipped_relu, clipped_relu_backward, cross_entropy, maxpool, maxpool_backward, softmax, BatchNormLayer, BnCache,
    ConvLayer, FcLayer, PoolSpec,
};
use super::{NnError, Tensor4, TrainOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel: (usize, usize),
    pub filters: usize,
    pub dilation: (usize, usize),
    pub stride: (usize, usize),
}

/// Layer geometry of the two-convolution network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnArch {
    /// `(height, width, channels)`.
    pub input: (usize, usize, usize),
    pub conv1: ConvSpec,
    pub pool: PoolSpec,
    pub conv2: ConvSpec,
    pub relu_ceiling: f64,
    pub classes: usize,
}

impl Default for CnnArch {
    fn default() -> Self {
        Self {
            input: (280, 280, 3),
            conv1: ConvSpec { kernel: (5, 5), filters: 8, dilation: (3, 3), stride: (1, 1) },
            pool: PoolSpec { size: (5, 5), stride: (2, 2) },
            conv2: ConvSpec { kernel: (3, 3), filters: 16, dilation: (2, 2), stride: (3, 3) },
            relu_ceiling: 10.0,
            classes: 2,
        }
    }
}

impl CnnArch {
    /// Same stack with a different input size.
    pub fn with_input(height: usize, width: usize) -> Self {
        Self { input: (height, width, 3), ..Self::default() }
    }

    /// Largest accepted value for any single size field, which keeps the
    /// shape arithmetic far from overflow.
    pub const MAX_EXTENT: usize = 1 << 14;

    pub fn validate(&self) -> Result<(), NnError> {
        let (h, w, c) = self.input;
        let bounded = |v: usize| (1..=Self::MAX_EXTENT).contains(&v);
        let pair = |p: (usize, usize)| bounded(p.0) && bounded(p.1);
        let ok = bounded(h)
            && bounded(w)
            && bounded(c)
            && [self.conv1, self.conv2]
                .iter()
                .all(|s| bounded(s.filters) && pair(s.kernel) && pair(s.dilation) && pair(s.stride))
            && pair(self.pool.size)
            && pair(self.pool.stride)
            && self.classes == 2
            && self.relu_ceiling > 0.0
            && self.relu_ceiling.is_finite();
        if ok {
            Ok(())
        } else {
            Err(NnError::InvalidArch)
        }
    }

    /// Spatial size after each stage: conv1, pool, conv2.
    pub fn spatial_chain(&self) -> [(usize, usize); 3] {
        let (h, w, _) = self.input;
        let c1 = self.conv1_layer().output_hw(h, w);
        let p = self.pool.output_hw(c1.0, c1.1);
        let c2 = self.conv2_layer().output_hw(p.0, p.1);
        [c1, p, c2]
    }

    pub fn fc_inputs(&self) -> usize {
        let (h, w) = self.spatial_chain()[2];
        h * w * self.conv2.filters
    }

    fn conv1_layer(&self) -> ConvLayer {
        ConvLayer::zeros(self.conv1.kernel, self.input.2, self.conv1.filters, self.conv1.stride, self.conv1.dilation)
    }

    fn conv2_layer(&self) -> ConvLayer {
        ConvLayer::zeros(
            self.conv2.kernel,
            self.conv1.filters,
            self.conv2.filters,
            self.conv2.stride,
            self.conv2.dilation,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub iterations: usize,
    pub final_val_accuracy: Option<f64>,
    pub options: TrainOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub arch: CnnArch,
    pub conv1: ConvLayer,
    pub bn1: BatchNormLayer,
    pub conv2: ConvLayer,
    pub bn2: BatchNormLayer,
    pub fc: FcLayer,
    /// Per-channel input mean subtracted before the first layer.
    pub input_mean: Vec<f64>,
    pub meta: Option<TrainingMeta>,
}

/// One gradient (or velocity) buffer per learnable tensor, in
/// [`CnnModel::PARAM_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnGrads(pub Vec<Vec<f64>>);

impl CnnGrads {
    pub fn zeros_like(model: &CnnModel) -> Self {
        Self(model.params().iter().map(|p| vec![0.0; p.len()]).collect())
    }
}

/// Activations saved by [`CnnModel::forward_train`].
pub struct ForwardCache {
    input: Tensor4,
    bn1: BnCache,
    act1: Tensor4,
    pool_arg: Vec<usize>,
    pooled: Tensor4,
    bn2: BnCache,
    act2: Tensor4,
    pub probs: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn bn_caches(&self) -> (&BnCache, &BnCache) {
        (&self.bn1, &self.bn2)
    }

    pub fn spatial_counts(&self) -> (usize, usize) {
        let c1 = self.act1.data().len() / self.act1.channels();
        let c2 = self.act2.data().len() / self.act2.channels();
        (c1, c2)
    }
}

impl CnnModel {
    pub const PARAM_NAMES: [&'static str; 10] = [
        "conv1.weight",
        "conv1.bias",
        "bn1.gamma",
        "bn1.beta",
        "conv2.weight",
        "conv2.bias",
        "bn2.gamma",
        "bn2.beta",
        "fc.weight",
        "fc.bias",
    ];

    /// Zero-initialised model with the given geometry.
    pub fn zeros(arch: CnnArch) -> Result<Self, NnError> {
        arch.validate()?;
        let fc_in = arch.fc_inputs();
        Ok(Self {
            conv1: arch.conv1_layer(),
            bn1: BatchNormLayer::new(arch.conv1.filters),
            conv2: arch.conv2_layer(),
            bn2: BatchNormLayer::new(arch.conv2.filters),
            fc: FcLayer::zeros(fc_in, arch.classes),
            input_mean: vec![0.0; arch.input.2],
            meta: None,
            arch,
        })
    }

    /// He-normal weights (std `sqrt(2 / fan_in)`), zero biases, unit gamma.
    pub fn init<R: Rng>(arch: CnnArch, rng: &mut R) -> Result<Self, NnError> {
        let mut m = Self::zeros(arch)?;
        let mut he = |w: &mut [f64], fan_in: usize| {
            let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            w.iter_mut().for_each(|v| *v = dist.sample(rng));
        };
        let f1 = m.conv1.fan_in();
        he(&mut m.conv1.weights, f1);
        let f2 = m.conv2.fan_in();
        he(&mut m.conv2.weights, f2);
        let f3 = m.fc.inputs;
        he(&mut m.fc.weights, f3);
        Ok(m)
    }

    pub fn is_trained(&self) -> bool {
        self.meta.is_some()
    }

    pub fn params(&self) -> [&Vec<f64>; 10] {
        [
            &self.conv1.weights,
            &self.conv1.bias,
            &self.bn1.gamma,
            &self.bn1.beta,
            &self.conv2.weights,
            &self.conv2.bias,
            &self.bn2.gamma,
            &self.bn2.beta,
            &self.fc.weights,
            &self.fc.bias,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Vec<f64>; 10] {
        [
            &mut self.conv1.weights,
            &mut self.conv1.bias,
            &mut self.bn1.gamma,
            &mut self.bn1.beta,
            &mut self.conv2.weights,
            &mut self.conv2.bias,
            &mut self.bn2.gamma,
            &mut self.bn2.beta,
            &mut self.fc.weights,
            &mut self.fc.bias,
        ]
    }

    fn check_input(&self, x: &Tensor4) -> Result<(), NnError> {
        let (h, w, c) = self.arch.input;
        if x.dims()[1..] != [h, w, c] {
            return Err(NnError::ShapeMismatch(format!(
                "model expects {h}x{w}x{c} input, got {}x{}x{}",
                x.height(),
                x.width(),
                x.channels()
            )));
        }
        if x.batch() == 0 {
            return Err(NnError::EmptyDataset);
        }
        Ok(())
    }

    fn centre(&self, x: &Tensor4) -> Tensor4 {
        let c = x.channels();
        let mut d = x.data().to_vec();
        for px in d.chunks_exact_mut(c) {
            px.iter_mut().zip(&self.input_mean).for_each(|(v, m)| *v -= m);
        }
        Tensor4::from_raw(x.dims(), d)
    }

    /// Training-mode forward pass (batch statistics in both norm layers).
    pub fn forward_train(&self, x: &Tensor4) -> Result<ForwardCache, NnError> {
        self.check_input(x)?;
        let ceiling = self.arch.relu_ceiling;
        let input = self.centre(x);
        let z1 = self.conv1.forward(&input)?;
        let (n1, bn1) = self.bn1.forward_train(&z1)?;
        drop(z1);
        let act1 = clipped_relu(&n1, ceiling);
        drop(n1);
        let (pooled, pool_arg) = maxpool(&act1, self.arch.pool);
        let z2 = self.conv2.forward(&pooled)?;
        let (n2, bn2) = self.bn2.forward_train(&z2)?;
        let act2 = clipped_relu(&n2, ceiling);
        let logits = self.fc.forward(&act2)?;
        let probs = logits.chunks_exact(self.fc.outputs).map(softmax).collect();
        Ok(ForwardCache { input, bn1, act1, pool_arg, pooled, bn2, act2, probs })
    }

    /// Class probabilities using the stored normalisation statistics.
    pub fn forward_infer(&self, x: &Tensor4) -> Result<Vec<Vec<f64>>, NnError> {
        self.check_input(x)?;
        let ceiling = self.arch.relu_ceiling;
        let a = self.conv1.forward(&self.centre(x))?;
        let a = clipped_relu(&self.bn1.forward_infer(&a)?, ceiling);
        let (a, _) = maxpool(&a, self.arch.pool);
        let a = self.conv2.forward(&a)?;
        let a = clipped_relu(&self.bn2.forward_infer(&a)?, ceiling);
        let logits = self.fc.forward(&a)?;
        Ok(logits.chunks_exact(self.fc.outputs).map(softmax).collect())
    }

    /// First convolution output before normalisation.
    pub(crate) fn conv1_pre_norm(&self, x: &Tensor4) -> Result<Tensor4, NnError> {
        self.check_input(x)?;
        self.conv1.forward(&self.centre(x))
    }

    /// Second convolution output before normalisation, with the first block
    /// run in inference mode.
    pub(crate) fn conv2_pre_norm(&self, x: &Tensor4) -> Result<Tensor4, NnError> {
        let z1 = self.conv1_pre_norm(x)?;
        let a = clipped_relu(&self.bn1.forward_infer(&z1)?, self.arch.relu_ceiling);
        let (a, _) = maxpool(&a, self.arch.pool);
        self.conv2.forward(&a)
    }

    /// Mean cross-entropy of a cached forward pass.
    pub fn loss(cache: &ForwardCache, labels: &[usize]) -> f64 {
        cache.probs.iter().zip(labels).map(|(p, &l)| cross_entropy(p, l)).sum::<f64>() / labels.len() as f64
    }

    /// Gradients of the mean batch cross-entropy with respect to every
    /// learnable tensor.
    pub fn backward(&self, cache: &ForwardCache, labels: &[usize]) -> Result<CnnGrads, NnError> {
        let n = cache.probs.len();
        if labels.len() != n {
            return Err(NnError::ShapeMismatch(format!("{} labels for a batch of {n}", labels.len())));
        }
        let k = self.fc.outputs;
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(NnError::BadLabel(bad));
        }
        let ceiling = self.arch.relu_ceiling;
        let mut dlogits = Vec::with_capacity(n * k);
        for (p, &l) in cache.probs.iter().zip(labels) {
            for (j, &pj) in p.iter().enumerate() {
                dlogits.push((pj - if j == l { 1.0 } else { 0.0 }) / n as f64);
            }
        }
        let (d_act2, d_fc_w, d_fc_b) = self.fc.backward(&cache.act2, &dlogits);
        let d_n2 = clipped_relu_backward(&cache.act2, &d_act2, ceiling);
        let (d_z2, d_g2, d_b2) = self.bn2.backward(&cache.bn2, &d_n2);
        let (d_pooled, d_c2_w, d_c2_b) = self.conv2.backward(&cache.pooled, &d_z2);
        let d_act1 = maxpool_backward(cache.act1.dims(), &cache.pool_arg, &d_pooled);
        let d_n1 = clipped_relu_backward(&cache.act1, &d_act1, ceiling);
        let (d_z1, d_g1, d_b1) = self.bn1.backward(&cache.bn1, &d_n1);
        let (_, d_c1_w, d_c1_b) = self.conv1.backward(&cache.input, &d_z1);
        Ok(CnnGrads(vec![d_c1_w, d_c1_b, d_g1, d_b1, d_c2_w, d_c2_b, d_g2, d_b2, d_fc_w, d_fc_b]))
    }

    /// Loss and gradients for one batch.
    pub fn loss_and_grads(&self, x: &Tensor4, labels: &[usize]) -> Result<(f64, CnnGrads), NnError> {
        let cache = self.forward_train(x)?;
        let grads = self.backward(&cache, labels)?;
        Ok((Self::loss(&cache, labels), grads))
    }
}
