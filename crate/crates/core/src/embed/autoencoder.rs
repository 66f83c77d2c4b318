//! Reduced-scale convolutional autoencoder embedder.
//!
//! Encoder: two stride-2 `Conv2d + LeakyReLU` blocks and a fully connected
//! layer to the latent. Decoder: fully connected layer back to the
//! bottleneck grid, two stride-2 `ConvTranspose2d + LeakyReLU` blocks and a
//! 3x3 output convolution. Crops are zero-padded on the bottom/right to a
//! multiple of 4; the loss only covers the original crop area. Trained with
//! per-pixel MSE and Adam, in `f64`, single-threaded and fully seeded.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{check_crop, check_latent, ComponentEmbedder, LatentVector};
use crate::error::{Error, Result};
use crate::sketch::{ComponentCrop, ComponentKind};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), c * h * w);
        Self { c, h, w, data }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    #[inline]
    fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.h + y) * self.w + x]
    }
}

/// 2-D convolution, weights laid out `[out][in][ky][kx]` followed by the
/// `out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub params: Vec<f64>,
}

/// Transposed 2-D convolution, weights laid out `[in][out][ky][kx]`
/// followed by the `out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvTranspose2d {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub params: Vec<f64>,
}

/// Fully connected layer over the flattened input; output reshaped to
/// `out_shape`. Weights `[out][in]` followed by biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub inputs: usize,
    pub out_shape: (usize, usize, usize),
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv(Conv2d),
    ConvT(ConvTranspose2d),
    Linear(Linear),
    LeakyRelu,
}

impl Conv2d {
    pub fn new(in_c: usize, out_c: usize, k: usize, stride: usize, pad: usize) -> Self {
        Self {
            in_c,
            out_c,
            k,
            stride,
            pad,
            params: vec![0.0; out_c * in_c * k * k + out_c],
        }
    }

    fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.k) / self.stride + 1,
            (w + 2 * self.pad - self.k) / self.stride + 1,
        )
    }

    #[inline]
    fn widx(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_c + i) * self.k + ky) * self.k + kx
    }

    /// Input coordinate for an output position and kernel tap, if in bounds.
    #[inline]
    fn src(&self, out: usize, tap: usize, size: usize) -> Option<usize> {
        (out * self.stride + tap).checked_sub(self.pad).filter(|&v| v < size)
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let (ho, wo) = self.out_dims(x.h, x.w);
        let bias = &self.params[self.out_c * self.in_c * self.k * self.k..];
        let mut y = Tensor::zeros(self.out_c, ho, wo);
        for o in 0..self.out_c {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = bias[o];
                    for i in 0..self.in_c {
                        for ky in 0..self.k {
                            let Some(sy) = self.src(oy, ky, x.h) else { continue };
                            for kx in 0..self.k {
                                let Some(sx) = self.src(ox, kx, x.w) else { continue };
                                acc += self.params[self.widx(o, i, ky, kx)] * x.at(i, sy, sx);
                            }
                        }
                    }
                    y.data[(o * ho + oy) * wo + ox] = acc;
                }
            }
        }
        y
    }

    fn backward(&self, x: &Tensor, dy: &Tensor, grads: &mut [f64]) -> Tensor {
        let nw = self.out_c * self.in_c * self.k * self.k;
        let mut dx = Tensor::zeros(x.c, x.h, x.w);
        for o in 0..self.out_c {
            for oy in 0..dy.h {
                for ox in 0..dy.w {
                    let g = dy.at(o, oy, ox);
                    grads[nw + o] += g;
                    for i in 0..self.in_c {
                        for ky in 0..self.k {
                            let Some(sy) = self.src(oy, ky, x.h) else { continue };
                            for kx in 0..self.k {
                                let Some(sx) = self.src(ox, kx, x.w) else { continue };
                                let wi = self.widx(o, i, ky, kx);
                                grads[wi] += g * x.at(i, sy, sx);
                                dx.data[(i * x.h + sy) * x.w + sx] += g * self.params[wi];
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

impl ConvTranspose2d {
    pub fn new(in_c: usize, out_c: usize, k: usize, stride: usize, pad: usize) -> Self {
        Self {
            in_c,
            out_c,
            k,
            stride,
            pad,
            params: vec![0.0; in_c * out_c * k * k + out_c],
        }
    }

    fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h - 1) * self.stride + self.k - 2 * self.pad,
            (w - 1) * self.stride + self.k - 2 * self.pad,
        )
    }

    #[inline]
    fn widx(&self, i: usize, o: usize, ky: usize, kx: usize) -> usize {
        ((i * self.out_c + o) * self.k + ky) * self.k + kx
    }

    #[inline]
    fn dst(&self, inp: usize, tap: usize, size: usize) -> Option<usize> {
        (inp * self.stride + tap).checked_sub(self.pad).filter(|&v| v < size)
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let (ho, wo) = self.out_dims(x.h, x.w);
        let nw = self.in_c * self.out_c * self.k * self.k;
        let mut y = Tensor::zeros(self.out_c, ho, wo);
        for o in 0..self.out_c {
            y.data[o * ho * wo..(o + 1) * ho * wo].fill(self.params[nw + o]);
        }
        for i in 0..self.in_c {
            for iy in 0..x.h {
                for ix in 0..x.w {
                    let v = x.at(i, iy, ix);
                    for o in 0..self.out_c {
                        for ky in 0..self.k {
                            let Some(ty) = self.dst(iy, ky, ho) else { continue };
                            for kx in 0..self.k {
                                let Some(tx) = self.dst(ix, kx, wo) else { continue };
                                y.data[(o * ho + ty) * wo + tx] += v * self.params[self.widx(i, o, ky, kx)];
                            }
                        }
                    }
                }
            }
        }
        y
    }

    fn backward(&self, x: &Tensor, dy: &Tensor, grads: &mut [f64]) -> Tensor {
        let nw = self.in_c * self.out_c * self.k * self.k;
        for o in 0..self.out_c {
            grads[nw + o] += dy.data[o * dy.h * dy.w..(o + 1) * dy.h * dy.w].iter().sum::<f64>();
        }
        let mut dx = Tensor::zeros(x.c, x.h, x.w);
        for i in 0..self.in_c {
            for iy in 0..x.h {
                for ix in 0..x.w {
                    let v = x.at(i, iy, ix);
                    let mut acc = 0.0;
                    for o in 0..self.out_c {
                        for ky in 0..self.k {
                            let Some(ty) = self.dst(iy, ky, dy.h) else { continue };
                            for kx in 0..self.k {
                                let Some(tx) = self.dst(ix, kx, dy.w) else { continue };
                                let wi = self.widx(i, o, ky, kx);
                                let g = dy.at(o, ty, tx);
                                grads[wi] += g * v;
                                acc += g * self.params[wi];
                            }
                        }
                    }
                    dx.data[(i * x.h + iy) * x.w + ix] = acc;
                }
            }
        }
        dx
    }
}

impl Linear {
    pub fn new(inputs: usize, out_shape: (usize, usize, usize)) -> Self {
        let outputs = out_shape.0 * out_shape.1 * out_shape.2;
        Self {
            inputs,
            out_shape,
            params: vec![0.0; outputs * inputs + outputs],
        }
    }

    fn outputs(&self) -> usize {
        self.out_shape.0 * self.out_shape.1 * self.out_shape.2
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let (n_in, n_out) = (self.inputs, self.outputs());
        let bias = &self.params[n_out * n_in..];
        let data = (0..n_out)
            .map(|o| {
                bias[o]
                    + self.params[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(&x.data)
                        .map(|(w, v)| w * v)
                        .sum::<f64>()
            })
            .collect();
        let (c, h, w) = self.out_shape;
        Tensor::from_vec(c, h, w, data)
    }

    fn backward(&self, x: &Tensor, dy: &Tensor, grads: &mut [f64]) -> Tensor {
        let (n_in, n_out) = (self.inputs, self.outputs());
        let mut dx = Tensor::zeros(x.c, x.h, x.w);
        for o in 0..n_out {
            let g = dy.data[o];
            grads[n_out * n_in + o] += g;
            let row = &self.params[o * n_in..(o + 1) * n_in];
            let grow = &mut grads[o * n_in..(o + 1) * n_in];
            for j in 0..n_in {
                grow[j] += g * x.data[j];
                dx.data[j] += g * row[j];
            }
        }
        dx
    }
}

impl Layer {
    pub fn forward(&self, x: &Tensor) -> Tensor {
        match self {
            Layer::Conv(l) => l.forward(x),
            Layer::ConvT(l) => l.forward(x),
            Layer::Linear(l) => l.forward(x),
            Layer::LeakyRelu => Tensor {
                data: x
                    .data
                    .iter()
                    .map(|&v| if v > 0.0 { v } else { LEAKY_SLOPE * v })
                    .collect(),
                ..*x
            },
        }
    }

    /// Backpropagates `dy` through the layer evaluated at `x`, accumulating
    /// parameter gradients into `grads` (same layout as [`Layer::params`]).
    pub fn backward(&self, x: &Tensor, dy: &Tensor, grads: &mut [f64]) -> Tensor {
        match self {
            Layer::Conv(l) => l.backward(x, dy, grads),
            Layer::ConvT(l) => l.backward(x, dy, grads),
            Layer::Linear(l) => l.backward(x, dy, grads),
            Layer::LeakyRelu => Tensor {
                data: x
                    .data
                    .iter()
                    .zip(&dy.data)
                    .map(|(&v, &g)| if v > 0.0 { g } else { LEAKY_SLOPE * g })
                    .collect(),
                ..*x
            },
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Layer::Conv(l) => &l.params,
            Layer::ConvT(l) => &l.params,
            Layer::Linear(l) => &l.params,
            Layer::LeakyRelu => &[],
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Layer::Conv(l) => &mut l.params,
            Layer::ConvT(l) => &mut l.params,
            Layer::Linear(l) => &mut l.params,
            Layer::LeakyRelu => &mut [],
        }
    }

    /// He-uniform weights, zero biases.
    fn init(&mut self, rng: &mut ChaCha8Rng) {
        let (fan_in, n_weights) = match self {
            Layer::Conv(l) => (l.in_c * l.k * l.k, l.out_c * l.in_c * l.k * l.k),
            Layer::ConvT(l) => (
                (l.in_c * l.k * l.k / (l.stride * l.stride)).max(1),
                l.in_c * l.out_c * l.k * l.k,
            ),
            Layer::Linear(l) => (l.inputs, l.inputs * l.outputs()),
            Layer::LeakyRelu => return,
        };
        let bound = (6.0 / ((1.0 + LEAKY_SLOPE * LEAKY_SLOPE) * fan_in as f64)).sqrt();
        for w in &mut self.params_mut()[..n_weights] {
            *w = rng.random_range(-bound..bound);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderConfig {
    /// Channel widths of the two convolution stages.
    pub widths: [usize; 2],
    pub latent_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            widths: [8, 16],
            latent_dim: 16,
            epochs: 5,
            batch_size: 8,
            beta1: 0.5,
            beta2: 0.999,
            learning_rate: 0.0002,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::OutOfRange("latent dimension must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::OutOfRange(format!("learning rate {} must be > 0", self.learning_rate)));
        }
        if self.batch_size == 0 || self.widths.contains(&0) {
            return Err(Error::OutOfRange("batch size and layer widths must be >= 1".into()));
        }
        for b in [self.beta1, self.beta2] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::OutOfRange(format!("Adam beta {b} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvAutoencoder {
    component: ComponentKind,
    width: usize,
    height: usize,
    padded: (usize, usize),
    widths: [usize; 2],
    latent_dim: usize,
    pub encoder: Vec<Layer>,
    pub decoder: Vec<Layer>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingHistory {
    /// Corpus loss before the first update.
    pub initial_loss: f64,
    /// Mean minibatch loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Corpus loss after the last epoch.
    pub final_loss: f64,
}

impl ConvAutoencoder {
    /// Randomly initialised network for crops of `width x height`.
    pub fn new(component: ComponentKind, width: usize, height: usize, config: &AutoencoderConfig) -> Result<Self> {
        config.validate()?;
        let pw = width.div_ceil(4) * 4;
        let ph = height.div_ceil(4) * 4;
        let [c1, c2] = config.widths;
        let bottleneck = (c2, ph / 4, pw / 4);
        let flat = c2 * (ph / 4) * (pw / 4);
        let mut net = Self {
            component,
            width,
            height,
            padded: (pw, ph),
            widths: config.widths,
            latent_dim: config.latent_dim,
            encoder: vec![
                Layer::Conv(Conv2d::new(1, c1, 4, 2, 1)),
                Layer::LeakyRelu,
                Layer::Conv(Conv2d::new(c1, c2, 4, 2, 1)),
                Layer::LeakyRelu,
                Layer::Linear(Linear::new(flat, (config.latent_dim, 1, 1))),
            ],
            decoder: vec![
                Layer::Linear(Linear::new(config.latent_dim, bottleneck)),
                Layer::LeakyRelu,
                Layer::ConvT(ConvTranspose2d::new(c2, c1, 4, 2, 1)),
                Layer::LeakyRelu,
                Layer::ConvT(ConvTranspose2d::new(c1, c1, 4, 2, 1)),
                Layer::LeakyRelu,
                Layer::Conv(Conv2d::new(c1, 1, 3, 1, 1)),
            ],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for l in net.encoder.iter_mut().chain(net.decoder.iter_mut()) {
            l.init(&mut rng);
        }
        Ok(net)
    }

    fn pad_input(&self, ink: &[f64]) -> Tensor {
        let (pw, ph) = self.padded;
        let mut t = Tensor::zeros(1, ph, pw);
        for y in 0..self.height {
            t.data[y * pw..y * pw + self.width].copy_from_slice(&ink[y * self.width..(y + 1) * self.width]);
        }
        t
    }

    fn unpad(&self, t: &Tensor) -> Vec<f64> {
        let pw = self.padded.0;
        (0..self.height)
            .flat_map(|y| t.data[y * pw..y * pw + self.width].iter().copied())
            .collect()
    }

    /// Runs layers, returning every intermediate activation (input first).
    fn run(layers: &[Layer], x: Tensor) -> Vec<Tensor> {
        let mut acts = vec![x];
        for l in layers {
            let next = l.forward(acts.last().unwrap());
            acts.push(next);
        }
        acts
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut())
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    /// Per-pixel MSE of one crop and, if `grads` is given, accumulates its
    /// parameter gradients (one buffer per layer, encoder then decoder).
    pub fn loss_and_grad(&self, ink: &[f64], grads: Option<&mut [Vec<f64>]>) -> f64 {
        let enc = Self::run(&self.encoder, self.pad_input(ink));
        let dec = Self::run(&self.decoder, enc.last().unwrap().clone());
        let out = dec.last().unwrap();
        let pw = self.padded.0;
        let n = (self.width * self.height) as f64;
        let mut loss = 0.0;
        let mut dout = Tensor::zeros(out.c, out.h, out.w);
        for y in 0..self.height {
            for x in 0..self.width {
                let r = out.data[y * pw + x] - ink[y * self.width + x];
                loss += r * r;
                dout.data[y * pw + x] = 2.0 * r / n;
            }
        }
        if let Some(grads) = grads {
            let (genc, gdec) = grads.split_at_mut(self.encoder.len());
            let mut g = dout;
            for (i, l) in self.decoder.iter().enumerate().rev() {
                g = l.backward(&dec[i], &g, &mut gdec[i]);
            }
            for (i, l) in self.encoder.iter().enumerate().rev() {
                g = l.backward(&enc[i], &g, &mut genc[i]);
            }
        }
        loss / n
    }

    pub fn corpus_loss(&self, corpus: &[&ComponentCrop]) -> f64 {
        corpus
            .iter()
            .map(|c| self.loss_and_grad(c.raster.ink(), None))
            .sum::<f64>()
            / corpus.len() as f64
    }

    fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.layers().map(|l| vec![0.0; l.params().len()]).collect()
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn step(&mut self, net: &mut ConvAutoencoder, grads: &[Vec<f64>], cfg: &AutoencoderConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (li, layer) in net.layers_mut().enumerate() {
            let (m, v) = (&mut self.m[li], &mut self.v[li]);
            for (j, p) in layer.params_mut().iter_mut().enumerate() {
                let g = grads[li][j];
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
                *p -= cfg.learning_rate * (m[j] / c1) / ((v[j] / c2).sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Trains one component autoencoder with minibatch Adam on per-pixel MSE.
pub fn train_autoencoder(
    corpus: &[&ComponentCrop],
    config: &AutoencoderConfig,
) -> Result<(ConvAutoencoder, TrainingHistory)> {
    let first = corpus.first().ok_or(Error::EmptyCorpus)?;
    let (w, h) = first.dims();
    if let Some(c) = corpus.iter().find(|c| c.kind != first.kind || c.dims() != (w, h)) {
        return Err(Error::dims(
            format!("{} crops of {w}x{h}", first.kind),
            format!("{} crop of {}x{}", c.kind, c.raster.width(), c.raster.height()),
        ));
    }
    let mut net = ConvAutoencoder::new(first.kind, w, h, config)?;
    let mut adam = Adam {
        m: net.zero_grads(),
        v: net.zero_grads(),
        t: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005E_ED0F_B47C);
    let mut order: Vec<usize> = (0..corpus.len()).collect();

    let initial_loss = net.corpus_loss(corpus);
    if !initial_loss.is_finite() {
        return Err(Error::TrainingFailed("non-finite initial loss".into()));
    }
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = net.zero_grads();
            for &i in batch {
                total += net.loss_and_grad(corpus[i].raster.ink(), Some(&mut grads));
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().flatten().for_each(|g| *g *= scale);
            adam.step(&mut net, &grads, config);
        }
        let loss = total / corpus.len() as f64;
        if !loss.is_finite() {
            return Err(Error::TrainingFailed(format!("loss diverged in epoch {epoch}")));
        }
        epoch_losses.push(loss);
    }
    let final_loss = net.corpus_loss(corpus);
    if !final_loss.is_finite() {
        return Err(Error::TrainingFailed("non-finite final loss".into()));
    }
    Ok((
        net,
        TrainingHistory {
            initial_loss,
            epoch_losses,
            final_loss,
        },
    ))
}

impl ComponentEmbedder for ConvAutoencoder {
    fn component(&self) -> ComponentKind {
        self.component
    }

    fn crop_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn encode(&self, crop: &ComponentCrop) -> Result<LatentVector> {
        check_crop(self, crop)?;
        let z = Self::run(&self.encoder, self.pad_input(crop.raster.ink()))
            .pop()
            .unwrap();
        LatentVector::new(self.component, z.data)
    }

    fn decode_raw(&self, latent: &LatentVector) -> Result<Vec<f64>> {
        check_latent(self, latent)?;
        let z = Tensor::from_vec(self.latent_dim, 1, 1, latent.values.clone());
        let out = Self::run(&self.decoder, z).pop().unwrap();
        Ok(self.unpad(&out))
    }

    fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"conv-autoencoder");
        h.update([self.component.index() as u8]);
        for v in [self.width, self.height, self.latent_dim] {
            h.update((v as u64).to_le_bytes());
        }
        for l in self.layers() {
            for p in l.params() {
                h.update(p.to_le_bytes());
            }
        }
        h.finalize().into()
    }
}

const MAGIC: &[u8; 4] = b"FMAE";
const FORMAT_VERSION: u32 = 1;

impl ConvAutoencoder {
    /// `"FMAE" | version u32 | component u8 | width, height, c1, c2, d (u32)`
    /// then, per parametric layer, a u64 count and that many f64. All
    /// little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.component.index() as u8);
        for v in [self.width, self.height, self.widths[0], self.widths[1], self.latent_dim] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for l in self.layers().filter(|l| !l.params().is_empty()) {
            out.extend_from_slice(&(l.params().len() as u64).to_le_bytes());
            for p in l.params() {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::Corrupt(format!("autoencoder file: {m}"));
        if bytes.len() < 29 || &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let component = ComponentKind::from_index(bytes[8] as usize).ok_or_else(|| corrupt("bad component"))?;
        let [w, h, c1, c2, d] = [9, 13, 17, 21, 25].map(|o| u32_at(o) as usize);
        let config = AutoencoderConfig {
            widths: [c1, c2],
            latent_dim: d,
            ..AutoencoderConfig::default()
        };
        if w == 0 || h == 0 {
            return Err(corrupt("empty crop size"));
        }
        let mut net = Self::new(component, w, h, &config).map_err(|e| corrupt(&e.to_string()))?;
        let mut pos = 29;
        for l in net.layers_mut().filter(|l| !l.params().is_empty()) {
            let want = l.params().len();
            let count = bytes
                .get(pos..pos + 8)
                .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(|| corrupt("truncated"))?;
            if count != want as u64 {
                return Err(corrupt("layer size mismatch"));
            }
            pos += 8;
            let data = bytes.get(pos..pos + want * 8).ok_or_else(|| corrupt("truncated"))?;
            for (p, c) in l.params_mut().iter_mut().zip(data.chunks_exact(8)) {
                *p = f64::from_le_bytes(c.try_into().unwrap());
            }
            pos += want * 8;
        }
        if pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        if net.layers().any(|l| l.params().iter().any(|p| !p.is_finite())) {
            return Err(Error::NonFinite("autoencoder parameters"));
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::SketchRaster;

    fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor {
        // keep clear of the LeakyReLU kink so central differences are exact
        let data = (0..c * h * w)
            .map(|_| {
                let v: f64 = rng.random_range(0.05..1.0);
                if rng.random_bool(0.5) { v } else { -v }
            })
            .collect();
        Tensor::from_vec(c, h, w, data)
    }

    /// Max relative error between analytic and central-difference gradients
    /// of `L = Σ g ⊙ layer(x)` w.r.t. both input and parameters.
    fn check_layer(mut layer: Layer, x: Tensor, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if !matches!(layer, Layer::LeakyRelu) {
            layer.init(&mut rng);
            for p in layer.params_mut() {
                *p += rng.random_range(-0.1..0.1);
            }
        }
        let y = layer.forward(&x);
        let g = random_tensor(&mut rng, y.c, y.h, y.w);
        let loss = |l: &Layer, x: &Tensor| -> f64 {
            l.forward(x).data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
        };
        let mut pgrad = vec![0.0; layer.params().len()];
        let dx = layer.backward(&x, &g, &mut pgrad);
        let h = 1e-3;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        let mut worst = 0.0f64;
        for i in 0..x.data.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp.data[i] += h;
            xm.data[i] -= h;
            let num = (loss(&layer, &xp) - loss(&layer, &xm)) / (2.0 * h);
            worst = worst.max(rel(dx.data[i], num));
        }
        for j in 0..pgrad.len() {
            let (mut lp, mut lm) = (layer.clone(), layer.clone());
            lp.params_mut()[j] += h;
            lm.params_mut()[j] -= h;
            let num = (loss(&lp, &x) - loss(&lm, &x)) / (2.0 * h);
            worst = worst.max(rel(pgrad[j], num));
        }
        worst
    }

    #[test]
    fn layer_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cases = vec![
            (Layer::Conv(Conv2d::new(2, 3, 4, 2, 1)), random_tensor(&mut rng, 2, 8, 6)),
            (Layer::Conv(Conv2d::new(3, 1, 3, 1, 1)), random_tensor(&mut rng, 3, 5, 4)),
            (Layer::ConvT(ConvTranspose2d::new(3, 2, 4, 2, 1)), random_tensor(&mut rng, 3, 3, 4)),
            (Layer::Linear(Linear::new(12, (2, 2, 1))), random_tensor(&mut rng, 3, 2, 2)),
            (Layer::LeakyRelu, random_tensor(&mut rng, 2, 3, 3)),
        ];
        for (i, (layer, x)) in cases.into_iter().enumerate() {
            let err = check_layer(layer, x, i as u64);
            assert!(err <= 1e-4, "case {i}: relative error {err}");
        }
    }

    #[test]
    fn transposed_conv_doubles_and_conv_halves() {
        let c = Conv2d::new(1, 1, 4, 2, 1);
        assert_eq!(c.out_dims(16, 20), (8, 10));
        let t = ConvTranspose2d::new(1, 1, 4, 2, 1);
        assert_eq!(t.out_dims(4, 5), (8, 10));
    }

    fn crops(n: usize, seed: u64) -> Vec<ComponentCrop> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut r = SketchRaster::blank(10, 7);
                let y = rng.random_range(1.0..6.0);
                r.draw_stroke(&crate::raster::Stroke::new(vec![(1.0, y), (9.0, 7.0 - y)], 1.5))
                    .unwrap();
                ComponentCrop::new(ComponentKind::Mouth, r)
            })
            .collect()
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let data = crops(16, 1);
        let refs: Vec<_> = data.iter().collect();
        let cfg = AutoencoderConfig {
            widths: [4, 4],
            latent_dim: 4,
            epochs: 4,
            batch_size: 4,
            ..Default::default()
        };
        let (a, ha) = train_autoencoder(&refs, &cfg).unwrap();
        let (b, hb) = train_autoencoder(&refs, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        assert!(ha.final_loss < ha.initial_loss);
        assert_eq!(ha.epoch_losses.len(), 4);
        // padded 10x7 crop decodes back to 10x7
        let z = a.encode(&data[0]).unwrap();
        assert_eq!(z.dim(), 4);
        assert_eq!(a.decode(&z).unwrap().dims(), (10, 7));
    }

    #[test]
    fn config_validation() {
        let bad = AutoencoderConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = AutoencoderConfig {
            latent_dim: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let d = AutoencoderConfig::default();
        assert_eq!((d.beta1, d.beta2, d.learning_rate), (0.5, 0.999, 0.0002));
        assert!(matches!(train_autoencoder(&[], &d), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn diverging_training_reports_failure() {
        let data = crops(4, 2);
        let refs: Vec<_> = data.iter().collect();
        let cfg = AutoencoderConfig {
            widths: [2, 2],
            latent_dim: 2,
            epochs: 2,
            batch_size: 2,
            learning_rate: f64::MAX,
            ..Default::default()
        };
        assert!(matches!(
            train_autoencoder(&refs, &cfg),
            Err(Error::TrainingFailed(_))
        ));
    }

    #[test]
    fn file_round_trip() {
        let cfg = AutoencoderConfig {
            widths: [2, 3],
            latent_dim: 4,
            seed: 9,
            ..Default::default()
        };
        let net = ConvAutoencoder::new(ComponentKind::Mouth, 7, 5, &cfg).unwrap();
        let bytes = net.to_bytes();
        let back = ConvAutoencoder::from_bytes(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.fingerprint(), net.fingerprint());
        assert!(ConvAutoencoder::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(ConvAutoencoder::from_bytes(&extra).is_err());
    }
}
