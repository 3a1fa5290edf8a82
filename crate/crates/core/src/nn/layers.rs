//! Layer primitives with forward and backward passes.
//!
//! Batched loops are parallel over samples; per-sample partial gradients
//! are summed in sample order so results do not depend on thread count.

use rayon::prelude::*;

use super::{NnError, Tensor4};

/// Output length and leading pad for 'same' padding along one axis.
pub fn same_padding(input: usize, extent: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + extent).saturating_sub(input);
    (out, total / 2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub kh: usize,
    pub kw: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    /// `(kh, kw, in_ch, out_ch)`, out channel fastest.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub stride: (usize, usize),
    pub dilation: (usize, usize),
}

struct ConvGeom {
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    pad_t: usize,
    pad_l: usize,
}

impl ConvLayer {
    pub fn zeros(
        k: (usize, usize),
        in_ch: usize,
        out_ch: usize,
        stride: (usize, usize),
        dilation: (usize, usize),
    ) -> Self {
        assert!(k.0 >= 1 && k.1 >= 1 && stride.0 >= 1 && stride.1 >= 1 && dilation.0 >= 1 && dilation.1 >= 1);
        Self {
            kh: k.0,
            kw: k.1,
            in_ch,
            out_ch,
            weights: vec![0.0; k.0 * k.1 * in_ch * out_ch],
            bias: vec![0.0; out_ch],
            stride,
            dilation,
        }
    }

    pub fn extent(&self) -> (usize, usize) {
        ((self.kh - 1) * self.dilation.0 + 1, (self.kw - 1) * self.dilation.1 + 1)
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let (eh, ew) = self.extent();
        (same_padding(h, eh, self.stride.0).0, same_padding(w, ew, self.stride.1).0)
    }

    pub fn fan_in(&self) -> usize {
        self.kh * self.kw * self.in_ch
    }

    fn geom(&self, h: usize, w: usize) -> ConvGeom {
        let (eh, ew) = self.extent();
        let (oh, pad_t) = same_padding(h, eh, self.stride.0);
        let (ow, pad_l) = same_padding(w, ew, self.stride.1);
        ConvGeom { h, w, oh, ow, pad_t, pad_l }
    }

    fn check_input(&self, x: &Tensor4) -> Result<(), NnError> {
        if x.channels() != self.in_ch {
            return Err(NnError::ShapeMismatch(format!(
                "convolution expects {} input channels, got {}",
                self.in_ch,
                x.channels()
            )));
        }
        Ok(())
    }

    /// Visits every valid `(output pixel, tap, input pixel)` triple.
    #[inline]
    fn for_each_tap(&self, g: &ConvGeom, mut f: impl FnMut(usize, usize, usize)) {
        for oy in 0..g.oh {
            for ky in 0..self.kh {
                let iy = (oy * self.stride.0 + ky * self.dilation.0) as isize - g.pad_t as isize;
                if iy < 0 || iy >= g.h as isize {
                    continue;
                }
                for ox in 0..g.ow {
                    let o = oy * g.ow + ox;
                    for kx in 0..self.kw {
                        let ix = (ox * self.stride.1 + kx * self.dilation.1) as isize - g.pad_l as isize;
                        if ix < 0 || ix >= g.w as isize {
                            continue;
                        }
                        f(o, ky * self.kw + kx, iy as usize * g.w + ix as usize);
                    }
                }
            }
        }
    }

    /// Dilated, strided cross-correlation with 'same' padding.
    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4, NnError> {
        self.check_input(x)?;
        let g = self.geom(x.height(), x.width());
        let (cin, cout) = (self.in_ch, self.out_ch);
        let out_len = g.oh * g.ow * cout;
        let mut out = vec![0.0; x.batch() * out_len];
        out.par_chunks_mut(out_len).enumerate().for_each(|(n, o)| {
            let xs = x.sample(n);
            for px in o.chunks_exact_mut(cout) {
                px.copy_from_slice(&self.bias);
            }
            self.for_each_tap(&g, |op, tap, ip| {
                let orow = &mut o[op * cout..(op + 1) * cout];
                let xrow = &xs[ip * cin..(ip + 1) * cin];
                let wtap = &self.weights[tap * cin * cout..(tap + 1) * cin * cout];
                for (ci, &xv) in xrow.iter().enumerate() {
                    let wrow = &wtap[ci * cout..(ci + 1) * cout];
                    for (ov, &wv) in orow.iter_mut().zip(wrow) {
                        *ov += xv * wv;
                    }
                }
            });
        });
        Ok(Tensor4::from_raw([x.batch(), g.oh, g.ow, cout], out))
    }

    /// Returns `(dx, dweights, dbias)`.
    pub fn backward(&self, x: &Tensor4, dy: &Tensor4) -> (Tensor4, Vec<f64>, Vec<f64>) {
        let g = self.geom(x.height(), x.width());
        let (cin, cout) = (self.in_ch, self.out_ch);
        let partials: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..x.batch())
            .into_par_iter()
            .map(|n| {
                let xs = x.sample(n);
                let ds = dy.sample(n);
                let mut dx = vec![0.0; xs.len()];
                let mut dw = vec![0.0; self.weights.len()];
                let mut db = vec![0.0; cout];
                for drow in ds.chunks_exact(cout) {
                    for (b, &d) in db.iter_mut().zip(drow) {
                        *b += d;
                    }
                }
                self.for_each_tap(&g, |op, tap, ip| {
                    let drow = &ds[op * cout..(op + 1) * cout];
                    let base = tap * cin * cout;
                    for ci in 0..cin {
                        let xv = xs[ip * cin + ci];
                        let wrow = &self.weights[base + ci * cout..base + (ci + 1) * cout];
                        let dwrow = &mut dw[base + ci * cout..base + (ci + 1) * cout];
                        let mut acc = 0.0;
                        for co in 0..cout {
                            dwrow[co] += xv * drow[co];
                            acc += wrow[co] * drow[co];
                        }
                        dx[ip * cin + ci] += acc;
                    }
                });
                (dx, dw, db)
            })
            .collect();
        let mut dx = Vec::with_capacity(x.data().len());
        let mut dw = vec![0.0; self.weights.len()];
        let mut db = vec![0.0; cout];
        for (pdx, pdw, pdb) in partials {
            dx.extend(pdx);
            dw.iter_mut().zip(pdw).for_each(|(a, b)| *a += b);
            db.iter_mut().zip(pdb).for_each(|(a, b)| *a += b);
        }
        (Tensor4::from_raw(x.dims(), dx), dw, db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub epsilon: f64,
    /// Weight of the newest batch in the running averages.
    pub momentum_stat: f64,
}

/// Saved by a training-mode forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Tensor4,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    /// Biased batch variance.
    pub batch_var: Vec<f64>,
}

impl BatchNormLayer {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            epsilon: 1e-5,
            momentum_stat: 0.1,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, x: &Tensor4) -> Result<(), NnError> {
        if x.channels() != self.channels() {
            return Err(NnError::ShapeMismatch(format!(
                "batch norm has {} channels, input has {}",
                self.channels(),
                x.channels()
            )));
        }
        Ok(())
    }

    /// Per-channel mean and biased variance over batch and space.
    pub fn channel_stats(x: &Tensor4) -> (Vec<f64>, Vec<f64>) {
        let c = x.channels();
        let m = (x.data().len() / c) as f64;
        let mut mean = vec![0.0; c];
        for px in x.data().chunks_exact(c) {
            mean.iter_mut().zip(px).for_each(|(a, v)| *a += v);
        }
        mean.iter_mut().for_each(|a| *a /= m);
        let mut var = vec![0.0; c];
        for px in x.data().chunks_exact(c) {
            for ((a, v), mu) in var.iter_mut().zip(px).zip(&mean) {
                *a += (v - mu) * (v - mu);
            }
        }
        var.iter_mut().for_each(|a| *a /= m);
        (mean, var)
    }

    fn normalize(&self, x: &Tensor4, mean: &[f64], inv_std: &[f64]) -> (Tensor4, Tensor4) {
        let c = self.channels();
        let mut xhat = x.data().to_vec();
        let mut y = vec![0.0; xhat.len()];
        for (hp, yp) in xhat.chunks_exact_mut(c).zip(y.chunks_exact_mut(c)) {
            for k in 0..c {
                hp[k] = (hp[k] - mean[k]) * inv_std[k];
                yp[k] = self.gamma[k] * hp[k] + self.beta[k];
            }
        }
        (Tensor4::from_raw(x.dims(), xhat), Tensor4::from_raw(x.dims(), y))
    }

    /// Training-mode normalisation with batch statistics. Running
    /// statistics are left untouched; see [`Self::update_running`].
    pub fn forward_train(&self, x: &Tensor4) -> Result<(Tensor4, BnCache), NnError> {
        self.check(x)?;
        let (mean, var) = Self::channel_stats(x);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let (xhat, y) = self.normalize(x, &mean, &inv_std);
        Ok((y, BnCache { xhat, inv_std, batch_mean: mean, batch_var: var }))
    }

    pub fn forward_infer(&self, x: &Tensor4) -> Result<Tensor4, NnError> {
        self.check(x)?;
        let inv_std: Vec<f64> = self.running_var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        Ok(self.normalize(x, &self.running_mean, &inv_std).1)
    }

    /// Forward in either mode; training mode also folds the batch
    /// statistics into the running averages.
    pub fn forward(&mut self, x: &Tensor4, mode: BnMode) -> Result<Tensor4, NnError> {
        match mode {
            BnMode::Train => {
                let (y, cache) = self.forward_train(x)?;
                let count = x.data().len() / x.channels();
                self.update_running(&cache, count);
                Ok(y)
            }
            BnMode::Infer => self.forward_infer(x),
        }
    }

    /// Exponential update of the running statistics; variance is stored unbiased.
    pub fn update_running(&mut self, cache: &BnCache, count: usize) {
        let m = self.momentum_stat;
        let unbias = if count > 1 { count as f64 / (count - 1) as f64 } else { 1.0 };
        for k in 0..self.channels() {
            self.running_mean[k] = (1.0 - m) * self.running_mean[k] + m * cache.batch_mean[k];
            self.running_var[k] = (1.0 - m) * self.running_var[k] + m * cache.batch_var[k] * unbias;
        }
    }

    /// Returns `(dx, dgamma, dbeta)`.
    pub fn backward(&self, cache: &BnCache, dy: &Tensor4) -> (Tensor4, Vec<f64>, Vec<f64>) {
        let c = self.channels();
        let m = (dy.data().len() / c) as f64;
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        for (d, h) in dy.data().chunks_exact(c).zip(cache.xhat.data().chunks_exact(c)) {
            for k in 0..c {
                dgamma[k] += d[k] * h[k];
                dbeta[k] += d[k];
            }
        }
        // with dxhat = gamma * dy: sum(dxhat) = gamma * dbeta, sum(dxhat * xhat) = gamma * dgamma
        let mut dx = vec![0.0; dy.data().len()];
        for ((o, d), h) in dx.chunks_exact_mut(c).zip(dy.data().chunks_exact(c)).zip(cache.xhat.data().chunks_exact(c))
        {
            for k in 0..c {
                let g = self.gamma[k];
                o[k] = g * cache.inv_std[k] / m * (m * d[k] - dbeta[k] - h[k] * dgamma[k]);
            }
        }
        (Tensor4::from_raw(dy.dims(), dx), dgamma, dbeta)
    }
}

/// `min(max(x, 0), ceiling)` elementwise.
pub fn clipped_relu(x: &Tensor4, ceiling: f64) -> Tensor4 {
    let data = x.data().iter().map(|&v| v.max(0.0).min(ceiling)).collect();
    Tensor4::from_raw(x.dims(), data)
}

/// Gradient through a clipped ReLU, given its output.
pub fn clipped_relu_backward(out: &Tensor4, dy: &Tensor4, ceiling: f64) -> Tensor4 {
    let data = out.data().iter().zip(dy.data()).map(|(&o, &d)| if o > 0.0 && o < ceiling { d } else { 0.0 }).collect();
    Tensor4::from_raw(out.dims(), data)
}

/// Max pooling window and stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PoolSpec {
    pub size: (usize, usize),
    pub stride: (usize, usize),
}

impl PoolSpec {
    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (h.div_ceil(self.stride.0), w.div_ceil(self.stride.1))
    }
}

/// Max pooling with 'same' padding; padded cells never win. Returns the
/// pooled tensor and, per output element, the flat index of the winning
/// input element (first maximum in raster order).
pub fn maxpool(x: &Tensor4, spec: PoolSpec) -> (Tensor4, Vec<usize>) {
    let [n, h, w, c] = x.dims();
    let (oh, pad_t) = same_padding(h, spec.size.0, spec.stride.0);
    let (ow, pad_l) = same_padding(w, spec.size.1, spec.stride.1);
    let out_len = oh * ow * c;
    let mut out = vec![0.0; n * out_len];
    let mut arg = vec![0usize; n * out_len];
    out.par_chunks_mut(out_len).zip(arg.par_chunks_mut(out_len)).enumerate().for_each(|(b, (o, a))| {
        let base = b * h * w * c;
        let xs = x.sample(b);
        for oy in 0..oh {
            let y0 = (oy * spec.stride.0) as isize - pad_t as isize;
            let ys = y0.max(0) as usize..((y0 + spec.size.0 as isize).min(h as isize)) as usize;
            for ox in 0..ow {
                let x0 = (ox * spec.stride.1) as isize - pad_l as isize;
                let xr = x0.max(0) as usize..((x0 + spec.size.1 as isize).min(w as isize)) as usize;
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = usize::MAX;
                    for iy in ys.clone() {
                        for ix in xr.clone() {
                            let i = (iy * w + ix) * c + ch;
                            if xs[i] > best {
                                best = xs[i];
                                best_i = i;
                            }
                        }
                    }
                    let k = (oy * ow + ox) * c + ch;
                    o[k] = best;
                    a[k] = base + best_i;
                }
            }
        }
    });
    (Tensor4::from_raw([n, oh, ow, c], out), arg)
}

pub fn maxpool_backward(input_dims: [usize; 4], argmax: &[usize], dy: &Tensor4) -> Tensor4 {
    let mut dx = vec![0.0; input_dims.iter().product()];
    for (&i, &d) in argmax.iter().zip(dy.data()) {
        dx[i] += d;
    }
    Tensor4::from_raw(input_dims, dx)
}

/// Fully connected layer; weights are `(inputs, outputs)`, outputs fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FcLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl FcLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    /// Logits, one row of `outputs` per sample.
    pub fn forward(&self, x: &Tensor4) -> Result<Vec<f64>, NnError> {
        if x.sample_len() != self.inputs {
            return Err(NnError::ShapeMismatch(format!(
                "fully connected layer expects {} inputs, got {}",
                self.inputs,
                x.sample_len()
            )));
        }
        let mut logits = Vec::with_capacity(x.batch() * self.outputs);
        for n in 0..x.batch() {
            let mut row = self.bias.clone();
            for (xv, wrow) in x.sample(n).iter().zip(self.weights.chunks_exact(self.outputs)) {
                row.iter_mut().zip(wrow).for_each(|(r, w)| *r += xv * w);
            }
            logits.extend(row);
        }
        Ok(logits)
    }

    /// Returns `(dx, dweights, dbias)` for logit gradients `dlogits`.
    pub fn backward(&self, x: &Tensor4, dlogits: &[f64]) -> (Tensor4, Vec<f64>, Vec<f64>) {
        let k = self.outputs;
        let mut dw = vec![0.0; self.weights.len()];
        let mut db = vec![0.0; k];
        let mut dx = Vec::with_capacity(x.data().len());
        for n in 0..x.batch() {
            let d = &dlogits[n * k..(n + 1) * k];
            db.iter_mut().zip(d).for_each(|(b, v)| *b += v);
            for ((xv, wrow), dwrow) in x.sample(n).iter().zip(self.weights.chunks_exact(k)).zip(dw.chunks_exact_mut(k))
            {
                let mut acc = 0.0;
                for o in 0..k {
                    dwrow[o] += xv * d[o];
                    acc += wrow[o] * d[o];
                }
                dx.push(acc);
            }
        }
        (Tensor4::from_raw(x.dims(), dx), dw, db)
    }
}

/// Numerically stable softmax of one logit row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Probability floor inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

/// Logits and softmax probabilities for a batch through an FC layer.
pub fn fc_softmax_forward(x: &Tensor4, fc: &FcLayer) -> Result<Vec<Vec<f64>>, NnError> {
    let logits = fc.forward(x)?;
    Ok(logits.chunks_exact(fc.outputs).map(softmax).collect())
}
