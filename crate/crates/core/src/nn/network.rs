//! Parameters, forward pass, loss and backpropagation for a [`ModelConfig`]
//! layer stack. Activations are kept as flat row-major buffers of
//! `batch * per-sample size`; channels-first for spatial shapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{LayerSpec, ModelConfig, Shape};
use super::scalar::{gemm, Scalar};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::seed::mix;
use crate::segmentation::GlyphImage;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T = f32> {
    /// `[out, in, k, k]` for conv2d, `[units, inputs]` for dense.
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// One entry per layer; `None` for layers without parameters. Gradients
/// use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T = f32> {
    pub layers: Vec<Option<LayerParams<T>>>,
}

fn param_shapes(config: &ModelConfig) -> Result<Vec<Option<(Vec<usize>, usize)>>> {
    let shapes = config.shapes()?;
    Ok(config
        .layers
        .iter()
        .enumerate()
        .map(|(i, spec)| match (*spec, shapes[i]) {
            (
                LayerSpec::Conv2d {
                    out_channels, kernel, ..
                },
                Shape::Spatial { c, .. },
            ) => Some((vec![out_channels, c, kernel, kernel], out_channels)),
            (LayerSpec::Dense { units }, Shape::Flat(d)) => Some((vec![units, d], units)),
            _ => None,
        })
        .collect())
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        let layers = param_shapes(config)?
            .into_iter()
            .map(|p| {
                p.map(|(w, b)| LayerParams {
                    weight: Tensor::zeros(w).expect("validated shape"),
                    bias: Tensor::zeros(vec![b]).expect("validated shape"),
                })
            })
            .collect();
        Ok(Self { layers })
    }

    /// Kaiming-uniform weights, `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`,
    /// and zero biases. Layer `i` draws from stream `mix(init_seed, i)`.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        for (i, lp) in params.layers.iter_mut().enumerate() {
            let Some(lp) = lp else { continue };
            let fan_in: usize = lp.weight.shape()[1..].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(mix(config.init_seed, i as u64));
            for w in lp.weight.data_mut() {
                *w = T::from_f64(rng.gen_range(-bound..bound));
            }
        }
        Ok(params)
    }

    /// Checks that every tensor has the shape `config` implies.
    pub fn check(&self, config: &ModelConfig) -> Result<()> {
        let expected = param_shapes(config)?;
        if expected.len() != self.layers.len() {
            return Err(Error::Shape {
                layer: self.layers.len().min(expected.len()),
                msg: format!(
                    "parameters cover {} layers, config has {}",
                    self.layers.len(),
                    expected.len()
                ),
            });
        }
        for (i, (e, p)) in expected.iter().zip(&self.layers).enumerate() {
            let ok = match (e, p) {
                (None, None) => true,
                (Some((w, b)), Some(lp)) => lp.weight.shape() == &w[..] && lp.bias.shape() == [*b],
                _ => false,
            };
            if !ok {
                return Err(Error::Shape {
                    layer: i,
                    msg: "parameter tensors do not match the layer spec".into(),
                });
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    l.as_ref().map(|lp| LayerParams {
                        weight: lp.weight.cast(),
                        bias: lp.bias.cast(),
                    })
                })
                .collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.tensors().map(|(_, t)| t.len()).sum()
    }

    /// (layer index, tensor) pairs in file order: weight then bias.
    pub fn tensors(&self) -> impl Iterator<Item = (usize, &Tensor<T>)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.iter().flat_map(move |lp| [(i, &lp.weight), (i, &lp.bias)]))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = (usize, &mut Tensor<T>)> {
        self.layers.iter_mut().enumerate().flat_map(|(i, l)| {
            l.iter_mut()
                .flat_map(move |lp| [(i, &mut lp.weight), (i, &mut lp.bias)])
        })
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().all(|(_, t)| t.all_finite())
    }
}

enum LayerCache<T> {
    Conv { cols: Vec<T> },
    Pool { argmax: Vec<u32> },
    Relu { mask: Vec<bool> },
    Dense { input: Vec<T> },
    Pass,
}

/// Intermediate values kept by [`forward`] for [`backward`].
pub struct ForwardCache<T = f32> {
    batch: usize,
    shapes: Vec<Shape>,
    layers: Vec<LayerCache<T>>,
    /// Pre-softmax network output, `[batch, classes]` row-major.
    pub logits: Vec<T>,
}

impl<T> ForwardCache<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Relu masks and pooling winners: the piecewise-linear region the
    /// forward pass landed in. Equal signatures mean the loss is smooth
    /// between two inputs.
    pub fn activation_signature(&self) -> Vec<u64> {
        let mut sig = Vec::new();
        for l in &self.layers {
            match l {
                LayerCache::Relu { mask } => {
                    for chunk in mask.chunks(64) {
                        sig.push(chunk.iter().fold(0u64, |a, &b| a << 1 | b as u64));
                    }
                }
                LayerCache::Pool { argmax } => sig.extend(argmax.iter().map(|&a| a as u64)),
                _ => {}
            }
        }
        sig
    }
}

struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    fn patch(&self) -> usize {
        self.c * self.k * self.k
    }
    fn out_pixels(&self) -> usize {
        self.ho * self.wo
    }
}

fn im2col<T: Scalar>(x: &[T], g: &ConvGeom, cols: &mut [T]) {
    let p = g.out_pixels();
    for c in 0..g.c {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = &mut cols[((c * g.k + ky) * g.k + kx) * p..][..p];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    for ox in 0..g.wo {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        row[oy * g.wo + ox] =
                            if iy >= 0 && ix >= 0 && (iy as usize) < g.h && (ix as usize) < g.w {
                                x[(c * g.h + iy as usize) * g.w + ix as usize]
                            } else {
                                T::ZERO
                            };
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(cols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let p = g.out_pixels();
    for c in 0..g.c {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = &cols[((c * g.k + ky) * g.k + kx) * p..][..p];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy as usize >= g.h {
                        continue;
                    }
                    for ox in 0..g.wo {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && (ix as usize) < g.w {
                            dx[(c * g.h + iy as usize) * g.w + ix as usize] += row[oy * g.wo + ox];
                        }
                    }
                }
            }
        }
    }
}

fn conv_geom(spec: LayerSpec, input: Shape, output: Shape) -> ConvGeom {
    match (spec, input, output) {
        (
            LayerSpec::Conv2d {
                kernel,
                stride,
                padding,
                ..
            },
            Shape::Spatial { c, h, w },
            Shape::Spatial { h: ho, w: wo, .. },
        ) => ConvGeom {
            c,
            h,
            w,
            k: kernel,
            stride,
            pad: padding,
            ho,
            wo,
        },
        _ => unreachable!("validated conv shapes"),
    }
}

/// Row-wise numerically stable softmax of an `n x c` buffer.
pub(crate) fn softmax_rows<T: Scalar>(logits: &[T], c: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; logits.len()];
    for (row, dst) in logits.chunks(c).zip(out.chunks_mut(c)) {
        let max = row.iter().fold(row[0], |m, &v| if v > m { v } else { m });
        let mut sum = T::ZERO;
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = (v - max).exp();
            sum += *d;
        }
        for d in dst.iter_mut() {
            *d = *d / sum;
        }
    }
    out
}

/// Runs the stack on a `[N, channels, side, side]` batch. Returns the final
/// layer's output (`[N, classes]` probabilities when the stack ends in
/// softmax, logits otherwise) and the cache needed by [`backward`].
pub fn forward<T: Scalar>(
    config: &ModelConfig,
    params: &ModelParams<T>,
    batch: &Tensor<T>,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    forward_impl(config, params, batch, None)
}

/// [`forward`] with every relu mask and pooling winner taken from
/// `pattern` instead of recomputed. The result is smooth in the
/// parameters and agrees with [`forward`] at the point `pattern` came from.
pub fn forward_frozen<T: Scalar>(
    config: &ModelConfig,
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    pattern: &ForwardCache<T>,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    if pattern.layers.len() != config.layers.len() || pattern.batch != batch.shape()[0] {
        return Err(Error::Shape {
            layer: 0,
            msg: "activation pattern does not match this model and batch".into(),
        });
    }
    forward_impl(config, params, batch, Some(pattern))
}

fn forward_impl<T: Scalar>(
    config: &ModelConfig,
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    frozen: Option<&ForwardCache<T>>,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    let shapes = config.shapes()?;
    params.check(config)?;
    let s = batch.shape();
    let expect = [config.input_channels, config.input_side, config.input_side];
    if s.len() != 4 || s[1..] != expect {
        return Err(Error::Shape {
            layer: 0,
            msg: format!(
                "input batch {s:?} does not match [N, {}, {}, {}]",
                expect[0], expect[1], expect[2]
            ),
        });
    }
    let n = s[0];
    let mut x = batch.data().to_vec();
    let mut caches = Vec::with_capacity(config.layers.len());
    let mut probs = None;
    for (i, spec) in config.layers.iter().enumerate() {
        let (in_shape, out_shape) = (shapes[i], shapes[i + 1]);
        let (in_size, out_size) = (in_shape.size(), out_shape.size());
        let (y, cache) = match *spec {
            LayerSpec::Conv2d { out_channels, .. } => {
                let g = conv_geom(*spec, in_shape, out_shape);
                let lp = params.layers[i].as_ref().expect("checked params");
                let (kk, p) = (g.patch(), g.out_pixels());
                let mut cols = vec![T::ZERO; n * kk * p];
                let mut y = vec![T::ZERO; n * out_size];
                for b in 0..n {
                    let col = &mut cols[b * kk * p..][..kk * p];
                    im2col(&x[b * in_size..][..in_size], &g, col);
                    let yb = &mut y[b * out_size..][..out_size];
                    for (oc, row) in yb.chunks_mut(p).enumerate() {
                        row.fill(lp.bias.data()[oc]);
                    }
                    gemm(out_channels, kk, p, lp.weight.data(), false, col, false, yb, true);
                }
                (y, LayerCache::Conv { cols })
            }
            LayerSpec::Maxpool { window, stride } => {
                let (Shape::Spatial { c, h, w }, Shape::Spatial { h: ho, w: wo, .. }) = (in_shape, out_shape)
                else {
                    unreachable!("validated pool shapes")
                };
                let mut y = vec![T::ZERO; n * out_size];
                if let Some(LayerCache::Pool { argmax }) = frozen.map(|f| &f.layers[i]) {
                    for (o, (v, &a)) in y.iter_mut().zip(argmax).enumerate() {
                        *v = x[(o / out_size) * in_size + a as usize];
                    }
                    caches.push(LayerCache::Pool {
                        argmax: argmax.clone(),
                    });
                    x = y;
                    continue;
                }
                let mut argmax = vec![0u32; n * out_size];
                for b in 0..n {
                    let xb = &x[b * in_size..][..in_size];
                    for ch in 0..c {
                        for oy in 0..ho {
                            for ox in 0..wo {
                                let mut best = (ch * h + oy * stride) * w + ox * stride;
                                for dy in 0..window {
                                    for dx in 0..window {
                                        let idx = (ch * h + oy * stride + dy) * w + ox * stride + dx;
                                        if xb[idx] > xb[best] {
                                            best = idx;
                                        }
                                    }
                                }
                                let o = b * out_size + (ch * ho + oy) * wo + ox;
                                y[o] = xb[best];
                                argmax[o] = best as u32;
                            }
                        }
                    }
                }
                (y, LayerCache::Pool { argmax })
            }
            LayerSpec::Relu => {
                let mask: Vec<bool> = match frozen.map(|f| &f.layers[i]) {
                    Some(LayerCache::Relu { mask }) => mask.clone(),
                    _ => x.iter().map(|&v| v > T::ZERO).collect(),
                };
                let y = x
                    .iter()
                    .zip(&mask)
                    .map(|(&v, &m)| if m { v } else { T::ZERO })
                    .collect();
                (y, LayerCache::Relu { mask })
            }
            LayerSpec::Flatten => (std::mem::take(&mut x), LayerCache::Pass),
            LayerSpec::Dense { units } => {
                let lp = params.layers[i].as_ref().expect("checked params");
                let mut y = vec![T::ZERO; n * units];
                for row in y.chunks_mut(units) {
                    row.copy_from_slice(lp.bias.data());
                }
                gemm(n, in_size, units, &x, false, lp.weight.data(), true, &mut y, true);
                (
                    y,
                    LayerCache::Dense {
                        input: std::mem::take(&mut x),
                    },
                )
            }
            LayerSpec::Softmax => {
                probs = Some(softmax_rows(&x, in_size));
                caches.push(LayerCache::Pass);
                break;
            }
        };
        caches.push(cache);
        x = y;
    }
    let c = config.num_classes;
    let out = Tensor::new(vec![n, c], probs.unwrap_or_else(|| x.clone()))?;
    Ok((
        out,
        ForwardCache {
            batch: n,
            shapes,
            layers: caches,
            logits: x,
        },
    ))
}

/// Backpropagates `grad_logits` (`[N, classes]`, with respect to the
/// pre-softmax output) through the stack and returns parameter gradients.
pub fn backward<T: Scalar>(
    config: &ModelConfig,
    params: &ModelParams<T>,
    cache: &ForwardCache<T>,
    grad_logits: &[T],
) -> Result<ModelParams<T>> {
    params.check(config)?;
    let n = cache.batch;
    if cache.layers.len() != config.layers.len() || cache.shapes != config.shapes()? {
        return Err(Error::Shape {
            layer: cache.layers.len().min(config.layers.len()),
            msg: "forward cache does not belong to this model".into(),
        });
    }
    if grad_logits.len() != n * config.num_classes {
        return Err(Error::Shape {
            layer: config.layers.len().saturating_sub(1),
            msg: format!(
                "loss gradient has {} values, expected {}",
                grad_logits.len(),
                n * config.num_classes
            ),
        });
    }
    let shapes = &cache.shapes;
    let mut grads = ModelParams::<T>::zeros(config)?;
    let mut dy = grad_logits.to_vec();
    for i in (0..config.layers.len()).rev() {
        let spec = config.layers[i];
        let (in_shape, out_shape) = (shapes[i], shapes[i + 1]);
        let (in_size, out_size) = (in_shape.size(), out_shape.size());
        let need_dx = i > 0;
        dy = match (&cache.layers[i], spec) {
            (LayerCache::Pass, LayerSpec::Softmax | LayerSpec::Flatten) => dy,
            (LayerCache::Relu { mask }, _) => dy
                .iter()
                .zip(mask)
                .map(|(&d, &m)| if m { d } else { T::ZERO })
                .collect(),
            (LayerCache::Pool { argmax }, _) => {
                let mut dx = vec![T::ZERO; n * in_size];
                for (o, (&d, &a)) in dy.iter().zip(argmax).enumerate() {
                    dx[(o / out_size) * in_size + a as usize] += d;
                }
                dx
            }
            (LayerCache::Dense { input }, LayerSpec::Dense { units }) => {
                let lp = params.layers[i].as_ref().expect("checked params");
                let g = grads.layers[i].as_mut().expect("mirrors params");
                gemm(
                    units,
                    n,
                    in_size,
                    &dy,
                    true,
                    input,
                    false,
                    g.weight.data_mut(),
                    false,
                );
                let db = g.bias.data_mut();
                for row in dy.chunks(units) {
                    for (b, &d) in db.iter_mut().zip(row) {
                        *b += d;
                    }
                }
                if !need_dx {
                    break;
                }
                let mut dx = vec![T::ZERO; n * in_size];
                gemm(
                    n,
                    units,
                    in_size,
                    &dy,
                    false,
                    lp.weight.data(),
                    false,
                    &mut dx,
                    false,
                );
                dx
            }
            (LayerCache::Conv { cols }, LayerSpec::Conv2d { out_channels, .. }) => {
                let geom = conv_geom(spec, in_shape, out_shape);
                let lp = params.layers[i].as_ref().expect("checked params");
                let g = grads.layers[i].as_mut().expect("mirrors params");
                let (kk, p) = (geom.patch(), geom.out_pixels());
                let mut dx = if need_dx {
                    vec![T::ZERO; n * in_size]
                } else {
                    Vec::new()
                };
                let mut dcols = vec![T::ZERO; if need_dx { kk * p } else { 0 }];
                for b in 0..n {
                    let dyb = &dy[b * out_size..][..out_size];
                    let col = &cols[b * kk * p..][..kk * p];
                    gemm(
                        out_channels,
                        p,
                        kk,
                        dyb,
                        false,
                        col,
                        true,
                        g.weight.data_mut(),
                        true,
                    );
                    for (bias, row) in g.bias.data_mut().iter_mut().zip(dyb.chunks(p)) {
                        for &d in row {
                            *bias += d;
                        }
                    }
                    if need_dx {
                        gemm(
                            kk,
                            out_channels,
                            p,
                            lp.weight.data(),
                            true,
                            dyb,
                            false,
                            &mut dcols,
                            false,
                        );
                        col2im(&dcols, &geom, &mut dx[b * in_size..][..in_size]);
                    }
                }
                if !need_dx {
                    break;
                }
                dx
            }
            _ => unreachable!("cache kind follows layer kind"),
        };
    }
    Ok(grads)
}

/// Mean cross-entropy of `n x c` probabilities against `labels`, and its
/// gradient with respect to the logits when the probabilities came from a
/// softmax: `(p - onehot) / n`.
pub fn cross_entropy<T: Scalar>(probs: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>)> {
    let s = probs.shape();
    if s.len() != 2 || s[0] != labels.len() {
        return Err(Error::Input(format!(
            "probabilities {s:?} do not match {} labels",
            labels.len()
        )));
    }
    let (n, c) = (s[0], s[1]);
    let mut loss = 0.0;
    let mut grad = probs.data().to_vec();
    for (r, (row, &y)) in probs.data().chunks(c).zip(labels).enumerate() {
        if y >= c {
            return Err(Error::Input(format!("label {y} out of range for {c} classes")));
        }
        let sum: f64 = row.iter().map(|v| v.to_f64()).sum();
        if (sum - 1.0).abs() > 1e-5 || row.iter().any(|&v| v < T::ZERO) {
            return Err(Error::Input(format!("row {r} is not a probability distribution")));
        }
        loss -= row[y].to_f64().max(f64::MIN_POSITIVE).ln();
        grad[r * c + y] -= T::ONE;
    }
    let inv = T::from_f64(1.0 / n as f64);
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok((loss / n as f64, Tensor::new(vec![n, c], grad)?))
}

/// Fused softmax + cross-entropy on raw logits via log-sum-exp, for
/// training. Returns the mean loss and `(softmax - onehot) / n`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], c: usize, labels: &[usize]) -> Result<(f64, Vec<T>)> {
    let n = labels.len();
    if logits.len() != n * c {
        return Err(Error::Input("logit count does not match labels".into()));
    }
    let mut loss = 0.0;
    let mut grad = vec![T::ZERO; n * c];
    let inv = 1.0 / n as f64;
    for ((row, g), &y) in logits.chunks(c).zip(grad.chunks_mut(c)).zip(labels) {
        if y >= c {
            return Err(Error::Input(format!("label {y} out of range for {c} classes")));
        }
        let max = row.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v.to_f64() - max).exp()).sum();
        let lse = max + sum.ln();
        loss += lse - row[y].to_f64();
        for (k, (gk, &v)) in g.iter_mut().zip(row).enumerate() {
            let p = (v.to_f64() - lse).exp();
            *gk = T::from_f64((p - if k == y { 1.0 } else { 0.0 }) * inv);
        }
    }
    Ok((loss * inv, grad))
}

/// Stacks glyphs into a `[N, 1, side, side]` batch (ink 1, background 0).
pub fn glyph_batch<'a>(glyphs: impl IntoIterator<Item = &'a GlyphImage>, side: usize) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut n = 0;
    for g in glyphs {
        if g.side() != side {
            return Err(Error::Shape {
                layer: 0,
                msg: format!("glyph side {} does not match model input {side}", g.side()),
            });
        }
        let start = data.len();
        data.resize(start + side * side, 0.0);
        g.write_input(&mut data[start..]);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Input("empty glyph batch".into()));
    }
    Tensor::new(vec![n, 1, side, side], data)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Class and softmax probability for each glyph, evaluated in chunks.
pub fn predict_batch(
    config: &ModelConfig,
    params: &ModelParams,
    glyphs: &[GlyphImage],
) -> Result<Vec<(usize, f32)>> {
    let mut out = Vec::with_capacity(glyphs.len());
    for chunk in glyphs.chunks(64) {
        let batch = glyph_batch(chunk, config.input_side)?;
        let (_, cache) = forward(config, params, &batch)?;
        let probs = softmax_rows(&cache.logits, config.num_classes);
        out.extend(probs.chunks(config.num_classes).map(|row| {
            let k = argmax(row);
            (k, row[k])
        }));
    }
    Ok(out)
}

pub fn predict(config: &ModelConfig, params: &ModelParams, glyph: &GlyphImage) -> Result<(usize, f32)> {
    Ok(predict_batch(config, params, std::slice::from_ref(glyph))?[0])
}
