//! A small convolutional classifier with hand-written backpropagation.
//!
//! Architecture: `blocks` stages of conv 3×3 (stride 1, zero padding 1),
//! ReLU and 2×2 max pooling, then global average pooling and one dense
//! layer producing the logit pair `(z_P, z_N)`. All parameters live in one
//! flat `f64` vector so the optimizer, gradient checks and checkpoints treat
//! them uniformly.

mod checkpoint;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use train::{
    evaluate, predict, train, EpochRecord, ImageSet, LossKind, Prediction, TrainConfig, TrainOutcome,
};

use rand_distr::{Distribution, Normal};

use crate::error::{GtdaError, Result};
use crate::rng::{self, Stream};
use crate::vbl::Pair;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    /// Side length of the square input image.
    pub input_size: usize,
    /// Output channels of each conv block.
    pub channels: Vec<usize>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_size: 64,
            channels: vec![8, 16, 32],
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(GtdaError::InvalidInput("model needs at least one block with nonzero width".into()));
        }
        let div = 1usize << self.channels.len();
        if self.input_size == 0 || self.input_size % div != 0 {
            return Err(GtdaError::InvalidInput(format!(
                "input size {} is not divisible by 2^{}",
                self.input_size,
                self.channels.len()
            )));
        }
        Ok(())
    }
}

/// Offsets of one conv layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ConvLayout {
    c_in: usize,
    c_out: usize,
    /// Spatial side of this layer's input.
    side: usize,
    weights: usize,
    bias: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    convs: Vec<ConvLayout>,
    dense_weights: usize,
    dense_bias: usize,
    features: usize,
    total: usize,
}

impl Layout {
    fn new(config: &ModelConfig) -> Self {
        let mut convs = Vec::with_capacity(config.channels.len());
        let mut offset = 0;
        let mut c_in = 1;
        let mut side = config.input_size;
        for &c_out in &config.channels {
            let weights = offset;
            let bias = weights + c_out * c_in * 9;
            offset = bias + c_out;
            convs.push(ConvLayout {
                c_in,
                c_out,
                side,
                weights,
                bias,
            });
            c_in = c_out;
            side /= 2;
        }
        let dense_weights = offset;
        let dense_bias = dense_weights + 2 * c_in;
        Layout {
            convs,
            dense_weights,
            dense_bias,
            features: c_in,
            total: dense_bias + 2,
        }
    }
}

/// Network parameters plus a version counter that changes on every update.
#[derive(Debug, Clone, PartialEq)]
pub struct Cnn {
    config: ModelConfig,
    layout: Layout,
    params: Vec<f64>,
    version: u64,
}

/// He-initialized network; deterministic in `config.seed`.
pub fn init_model(config: &ModelConfig) -> Result<Cnn> {
    config.validate()?;
    let layout = Layout::new(config);
    let mut params = vec![0.0; layout.total];
    let mut rng = rng::stream(config.seed, Stream::WeightInit);
    for conv in &layout.convs {
        let std = (2.0 / (conv.c_in * 9) as f64).sqrt();
        let dist = Normal::new(0.0, std).expect("positive std");
        for w in &mut params[conv.weights..conv.bias] {
            *w = dist.sample(&mut rng);
        }
    }
    let std = (2.0 / layout.features as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("positive std");
    for w in &mut params[layout.dense_weights..layout.dense_bias] {
        *w = dist.sample(&mut rng);
    }
    Ok(Cnn {
        config: config.clone(),
        layout,
        params,
        version: 0,
    })
}

/// Activations of one sample kept for the backward pass.
#[derive(Debug, Clone)]
struct SampleCache {
    /// Patch matrix of every conv layer's input.
    cols: Vec<Vec<f64>>,
    /// Pre-activation conv output of every layer.
    pre: Vec<Vec<f64>>,
    /// For each pooled cell, the flat index of the winning pre-pool value.
    argmax: Vec<Vec<u32>>,
    /// Globally averaged features.
    features: Vec<f64>,
}

/// Cached forward state of a batch.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    samples: Vec<SampleCache>,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Unfolds a `c_in × side × side` input into the `(c_in·9) × side²` patch
/// matrix of a 3×3, padding-1 convolution. Row `(i·3 + ky)·3 + kx` holds
/// input channel `i` shifted by `(ky − 1, kx − 1)`, zero outside the image.
fn im2col(input: &[f64], c_in: usize, side: usize) -> Vec<f64> {
    let plane = side * side;
    let mut col = vec![0.0; c_in * 9 * plane];
    for i in 0..c_in {
        let src = &input[i * plane..(i + 1) * plane];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((i * 3 + ky) * 3 + kx) * plane..][..plane];
                let (y0, y1, x0, x1, dy, dx) = window(side, ky, kx);
                for y in y0..y1 {
                    let s = ((y as isize + dy) as usize) * side + (x0 as isize + dx) as usize;
                    row[y * side + x0..y * side + x1].copy_from_slice(&src[s..s + (x1 - x0)]);
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: accumulates patch-matrix gradients into the input.
fn col2im_add(dcol: &[f64], c_in: usize, side: usize, dinput: &mut [f64]) {
    let plane = side * side;
    for i in 0..c_in {
        let dst = &mut dinput[i * plane..(i + 1) * plane];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &dcol[((i * 3 + ky) * 3 + kx) * plane..][..plane];
                let (y0, y1, x0, x1, dy, dx) = window(side, ky, kx);
                for y in y0..y1 {
                    let s = ((y as isize + dy) as usize) * side + (x0 as isize + dx) as usize;
                    for (d, g) in dst[s..s + (x1 - x0)].iter_mut().zip(&row[y * side + x0..y * side + x1]) {
                        *d += g;
                    }
                }
            }
        }
    }
}

/// Output rows/columns touched by kernel tap (ky, kx) with zero padding 1,
/// and the offset from output to input coordinates.
#[inline]
fn window(side: usize, ky: usize, kx: usize) -> (usize, usize, usize, usize, isize, isize) {
    let dy = ky as isize - 1;
    let dx = kx as isize - 1;
    let y0 = if dy < 0 { 1 } else { 0 };
    let y1 = if dy > 0 { side - 1 } else { side };
    let x0 = if dx < 0 { 1 } else { 0 };
    let x1 = if dx > 0 { side - 1 } else { side };
    (y0, y1, x0, x1, dy, dx)
}

/// `C ← A·B + beta·C` on row-major slices with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the asserts above bound every index the kernel touches for the
    // stride pairs used in this module (row-major or transposed views).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn conv_forward(col: &[f64], c_in: usize, side: usize, weights: &[f64], bias: &[f64], out: &mut [f64]) {
    let plane = side * side;
    let k = c_in * 9;
    for (o, out_plane) in out.chunks_exact_mut(plane).enumerate() {
        out_plane.fill(bias[o]);
    }
    gemm(bias.len(), k, plane, weights, (k, 1), col, (plane, 1), 1.0, out);
}

/// Accumulates weight and bias gradients; returns the patch-matrix gradient
/// when `want_dcol` is set.
fn conv_backward(
    col: &[f64],
    c_in: usize,
    side: usize,
    weights: &[f64],
    dpre: &[f64],
    dweights: &mut [f64],
    dbias: &mut [f64],
    want_dcol: bool,
) -> Option<Vec<f64>> {
    let plane = side * side;
    let k = c_in * 9;
    let c_out = dbias.len();
    for (db, d_plane) in dbias.iter_mut().zip(dpre.chunks_exact(plane)) {
        *db += d_plane.iter().sum::<f64>();
    }
    // dW (c_out × k) += dpre (c_out × plane) · colᵀ (plane × k)
    gemm(c_out, plane, k, dpre, (plane, 1), col, (1, plane), 1.0, dweights);
    want_dcol.then(|| {
        // dcol (k × plane) = Wᵀ (k × c_out) · dpre (c_out × plane)
        let mut dcol = vec![0.0; k * plane];
        gemm(k, c_out, plane, weights, (1, k), dpre, (plane, 1), 0.0, &mut dcol);
        dcol
    })
}

/// ReLU followed by 2×2 max pooling. Returns pooled values and winners.
fn relu_pool(pre: &[f64], channels: usize, side: usize) -> (Vec<f64>, Vec<u32>) {
    let half = side / 2;
    let mut pooled = Vec::with_capacity(channels * half * half);
    let mut argmax = Vec::with_capacity(channels * half * half);
    for c in 0..channels {
        let base = c * side * side;
        for y in 0..half {
            for x in 0..half {
                let mut best_idx = base + (2 * y) * side + 2 * x;
                let mut best = pre[best_idx];
                for (oy, ox) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * y + oy) * side + 2 * x + ox;
                    if pre[idx] > best {
                        best = pre[idx];
                        best_idx = idx;
                    }
                }
                pooled.push(best.max(0.0));
                argmax.push(best_idx as u32);
            }
        }
    }
    (pooled, argmax)
}

impl Cnn {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Replaces all parameters; invalidates outstanding caches.
    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(GtdaError::InvalidInput(format!(
                "{} parameters given, model has {}",
                params.len(),
                self.params.len()
            )));
        }
        self.params = params;
        self.version += 1;
        Ok(())
    }

    /// Mutates parameters in place; invalidates outstanding caches.
    pub fn update_params(&mut self, f: impl FnOnce(&mut [f64])) {
        f(&mut self.params);
        self.version += 1;
    }

    /// Range of the dense-layer weights inside [`Cnn::params`].
    pub fn dense_weight_range(&self) -> std::ops::Range<usize> {
        self.layout.dense_weights..self.layout.dense_bias
    }

    /// Range of the dense-layer biases `(b_P, b_N)`.
    pub fn dense_bias_range(&self) -> std::ops::Range<usize> {
        self.layout.dense_bias..self.layout.total
    }

    /// Range of the weights of conv layer `layer` (output-channel major,
    /// then input channel, then 3×3 taps).
    pub fn conv_weight_range(&self, layer: usize) -> std::ops::Range<usize> {
        let c = &self.layout.convs[layer];
        c.weights..c.bias
    }

    fn check_input(&self, image: &[f64]) -> Result<()> {
        let want = self.config.input_size * self.config.input_size;
        if image.len() != want {
            return Err(GtdaError::InvalidInput(format!(
                "image has {} pixels, model expects {}x{}",
                image.len(),
                self.config.input_size,
                self.config.input_size
            )));
        }
        Ok(())
    }

    fn forward_sample(&self, image: &[f64]) -> (Pair, SampleCache) {
        let layers = self.layout.convs.len();
        let mut cols = Vec::with_capacity(layers);
        let mut pre_all = Vec::with_capacity(layers);
        let mut argmax_all = Vec::with_capacity(layers);
        let mut x = image.to_vec();
        for conv in &self.layout.convs {
            let mut pre = vec![0.0; conv.c_out * conv.side * conv.side];
            let col = im2col(&x, conv.c_in, conv.side);
            conv_forward(
                &col,
                conv.c_in,
                conv.side,
                &self.params[conv.weights..conv.bias],
                &self.params[conv.bias..conv.bias + conv.c_out],
                &mut pre,
            );
            let (pooled, argmax) = relu_pool(&pre, conv.c_out, conv.side);
            cols.push(col);
            x = pooled;
            pre_all.push(pre);
            argmax_all.push(argmax);
        }
        let c = self.layout.features;
        let plane = x.len() / c;
        let features: Vec<f64> = x.chunks_exact(plane).map(|p| p.iter().sum::<f64>() / plane as f64).collect();
        let w = &self.params[self.layout.dense_weights..self.layout.dense_bias];
        let b = &self.params[self.layout.dense_bias..self.layout.total];
        let mut logits = [b[0], b[1]];
        for (k, logit) in logits.iter_mut().enumerate() {
            *logit += w[k * c..(k + 1) * c].iter().zip(&features).map(|(a, f)| a * f).sum::<f64>();
        }
        (
            logits,
            SampleCache {
                cols,
                pre: pre_all,
                argmax: argmax_all,
                features,
            },
        )
    }

    /// Logits for a batch, with activations cached for [`Cnn::backward`].
    pub fn forward(&self, images: &[&[f64]]) -> Result<(Vec<Pair>, ForwardCache)> {
        let mut logits = Vec::with_capacity(images.len());
        let mut samples = Vec::with_capacity(images.len());
        for img in images {
            self.check_input(img)?;
            let (z, cache) = self.forward_sample(img);
            logits.push(z);
            samples.push(cache);
        }
        Ok((
            logits,
            ForwardCache {
                version: self.version,
                samples,
            },
        ))
    }

    /// Logits only, for inference.
    pub fn logits(&self, image: &[f64]) -> Result<Pair> {
        self.check_input(image)?;
        Ok(self.forward_sample(image).0)
    }

    /// Gradient of `Σ_s dlogits[s] · z_s` with respect to every parameter,
    /// summed over the batch in sample order.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[Pair]) -> Result<Vec<f64>> {
        if cache.version != self.version {
            return Err(GtdaError::StaleCache {
                cache: cache.version,
                model: self.version,
            });
        }
        if dlogits.len() != cache.samples.len() {
            return Err(GtdaError::InvalidInput(format!(
                "{} upstream gradients for a batch of {}",
                dlogits.len(),
                cache.samples.len()
            )));
        }
        let mut grad = vec![0.0; self.params.len()];
        for (sample, dz) in cache.samples.iter().zip(dlogits) {
            self.backward_sample(sample, *dz, &mut grad);
        }
        Ok(grad)
    }

    fn backward_sample(&self, cache: &SampleCache, dz: Pair, grad: &mut [f64]) {
        let lay = &self.layout;
        let c = lay.features;
        {
            let (dw, db) = grad[lay.dense_weights..lay.total].split_at_mut(2 * c);
            for k in 0..2 {
                db[k] += dz[k];
                for (g, f) in dw[k * c..(k + 1) * c].iter_mut().zip(&cache.features) {
                    *g += dz[k] * f;
                }
            }
        }
        let w = &self.params[lay.dense_weights..lay.dense_bias];
        let last = lay.convs.last().expect("at least one block");
        let pooled_side = last.side / 2;
        let plane = pooled_side * pooled_side;
        // gradient w.r.t. the last pooled map
        let mut dpooled: Vec<f64> = (0..c)
            .flat_map(|ch| {
                let d = (dz[0] * w[ch] + dz[1] * w[c + ch]) / plane as f64;
                std::iter::repeat_n(d, plane)
            })
            .collect();

        for (l, conv) in lay.convs.iter().enumerate().rev() {
            let pre = &cache.pre[l];
            let mut dpre = vec![0.0; pre.len()];
            for (&idx, &g) in cache.argmax[l].iter().zip(&dpooled) {
                let idx = idx as usize;
                if pre[idx] > 0.0 {
                    dpre[idx] += g;
                }
            }
            let (dw, db) = grad[conv.weights..conv.bias + conv.c_out].split_at_mut(conv.bias - conv.weights);
            let dcol = conv_backward(
                &cache.cols[l],
                conv.c_in,
                conv.side,
                &self.params[conv.weights..conv.bias],
                &dpre,
                dw,
                db,
                l > 0,
            );
            if let Some(dcol) = dcol {
                let mut dinput = vec![0.0; conv.c_in * conv.side * conv.side];
                col2im_add(&dcol, conv.c_in, conv.side, &mut dinput);
                dpooled = dinput;
            }
        }
    }
}
