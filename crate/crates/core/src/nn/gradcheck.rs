//! Finite-difference verification of [`backward`] in 64-bit arithmetic.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{LayerSpec, ModelConfig};
use super::network::{backward, forward, forward_frozen, softmax_cross_entropy, ForwardCache, ModelParams};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::seed::mix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Coordinates probed per tensor; smaller tensors are probed fully.
    pub coords_per_tensor: usize,
    pub seed: u64,
    /// Relative errors use `max(|analytic|, |numeric|, floor)` as the
    /// denominator so that two near-zero values compare as equal.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            tolerance: 1e-4,
            coords_per_tensor: 16,
            seed: 0x5EED_0005,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub layer: usize,
    pub kind: &'static str,
    pub checked: usize,
    /// Probes whose ±step perturbation would have changed a relu mask or
    /// pooling winner; the frozen-pattern loss is differenced regardless.
    pub kink_crossings: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub layers: Vec<LayerCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.layers.iter().map(|l| l.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() <= self.tolerance
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for l in &self.layers {
            s += &format!(
                "layer {:>2} {:<8} checked {:>4} (kink crossings {:>3}) max rel err {:.3e}\n",
                l.layer, l.kind, l.checked, l.kink_crossings, l.max_rel_error
            );
        }
        s += &format!(
            "overall max rel err {:.3e} (tolerance {:.0e}): {}\n",
            self.max_rel_error(),
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        );
        s
    }
}

/// Loss with the activation pattern frozen, and whether the free forward
/// pass would have left that pattern.
fn probe_loss(
    config: &ModelConfig,
    params: &ModelParams<f64>,
    batch: &Tensor<f64>,
    labels: &[usize],
    pattern: &ForwardCache<f64>,
    base_sig: &[u64],
) -> Result<(f64, bool)> {
    let (_, frozen) = forward_frozen(config, params, batch, pattern)?;
    let (loss, _) = softmax_cross_entropy(&frozen.logits, config.num_classes, labels)?;
    let (_, free) = forward(config, params, batch)?;
    Ok((loss, free.activation_signature() != base_sig))
}

/// Compares analytic gradients of the mean cross-entropy with
/// extrapolated central differences. The loss is differenced with the
/// base point's relu masks and pooling winners held fixed, which makes it
/// smooth near the base point without changing its gradient there. `inject_fault` scales the analytic gradient of one layer
/// by 1.01, which a working check must flag.
pub fn gradcheck(
    config: &ModelConfig,
    params: &ModelParams<f64>,
    batch: &Tensor<f64>,
    labels: &[usize],
    check: &GradCheckConfig,
    inject_fault: Option<usize>,
) -> Result<GradCheckReport> {
    if let Some(l) = inject_fault {
        if !config.layers.get(l).is_some_and(LayerSpec::has_params) {
            return Err(Error::Config(format!("layer {l} has no parameters to fault")));
        }
    }
    let (_, cache) = forward(config, params, batch)?;
    let (_, grad) = softmax_cross_entropy(&cache.logits, config.num_classes, labels)?;
    let mut analytic = backward(config, params, &cache, &grad)?;
    if let Some(l) = inject_fault {
        for (i, t) in analytic.tensors_mut() {
            if i == l {
                t.data_mut().iter_mut().for_each(|g| *g *= 1.01);
            }
        }
    }
    let base_sig = cache.activation_signature();
    let mut rng = ChaCha8Rng::seed_from_u64(check.seed);
    let mut probe = params.clone();
    let mut layers: Vec<LayerCheck> = Vec::new();
    let tensor_count = params.tensors().count();
    for ti in 0..tensor_count {
        let (layer, len) = {
            let (l, t) = params.tensors().nth(ti).expect("index in range");
            (l, t.len())
        };
        let coords: Vec<usize> = if len <= check.coords_per_tensor {
            (0..len).collect()
        } else {
            sample(&mut rng, len, check.coords_per_tensor).into_vec()
        };
        if layers.last().is_none_or(|l| l.layer != layer) {
            layers.push(LayerCheck {
                layer,
                kind: config.layers[layer].name(),
                checked: 0,
                kink_crossings: 0,
                max_rel_error: 0.0,
            });
        }
        let entry = layers.last_mut().expect("pushed above");
        for k in coords {
            let orig = params.tensors().nth(ti).expect("index").1.data()[k];
            let set = |p: &mut ModelParams<f64>, v: f64| {
                p.tensors_mut().nth(ti).expect("index").1.data_mut()[k] = v;
            };
            // Central differences at h and h/2, combined by one Richardson
            // step so the O(h^2) truncation error cancels.
            let mut diffs = [0.0; 2];
            let mut crossed = false;
            for (d, h) in diffs.iter_mut().zip([check.step, check.step / 2.0]) {
                set(&mut probe, orig + h);
                let (lp, cp) = probe_loss(config, &probe, batch, labels, &cache, &base_sig)?;
                set(&mut probe, orig - h);
                let (lm, cm) = probe_loss(config, &probe, batch, labels, &cache, &base_sig)?;
                crossed |= cp || cm;
                *d = (lp - lm) / (2.0 * h);
            }
            set(&mut probe, orig);
            entry.kink_crossings += crossed as usize;
            let numeric = (4.0 * diffs[1] - diffs[0]) / 3.0;
            let a = analytic.tensors().nth(ti).expect("index").1.data()[k];
            let denom = a.abs().max(numeric.abs()).max(check.floor);
            entry.max_rel_error = entry.max_rel_error.max((a - numeric).abs() / denom);
            entry.checked += 1;
        }
    }
    Ok(GradCheckReport {
        layers,
        tolerance: check.tolerance,
    })
}

/// A small random stack exercising every layer kind, f64 parameters
/// drawn from the default initializer, a batch of continuous inputs in
/// [0, 1), and random labels.
pub fn random_instance(seed: u64) -> (ModelConfig, ModelParams<f64>, Tensor<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0));
    loop {
        if let Some(instance) = try_instance(seed, &mut rng) {
            return instance;
        }
    }
}

fn try_instance(
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Option<(ModelConfig, ModelParams<f64>, Tensor<f64>, Vec<usize>)> {
    let side = rng.gen_range(6..=9);
    let channels = rng.gen_range(1..=2);
    let classes = rng.gen_range(2..=4);
    let mut layers = vec![
        LayerSpec::Conv2d {
            out_channels: rng.gen_range(1..=3),
            kernel: rng.gen_range(1..=3),
            stride: rng.gen_range(1..=2),
            padding: rng.gen_range(0..=1),
        },
        LayerSpec::Relu,
        LayerSpec::Maxpool {
            window: 2,
            stride: rng.gen_range(1..=2),
        },
    ];
    if rng.gen_bool(0.5) {
        layers.push(LayerSpec::Conv2d {
            out_channels: rng.gen_range(1..=3),
            kernel: rng.gen_range(1..=2),
            stride: 1,
            padding: rng.gen_range(0..=1),
        });
    }
    layers.push(LayerSpec::Flatten);
    layers.push(LayerSpec::Dense {
        units: rng.gen_range(2..=5),
    });
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::Dense { units: classes });
    layers.push(LayerSpec::Softmax);
    let config = ModelConfig {
        input_side: side,
        input_channels: channels,
        num_classes: classes,
        init_seed: mix(seed, 1),
        class_names: Vec::new(),
        layers,
    };
    let n = rng.gen_range(2..=4);
    let (params, batch, labels) = randomize(&config, n, rng.gen()).ok()?;
    Some((config, params, batch, labels))
}

/// Default-initialized f64 parameters with small random biases, plus `n`
/// continuous random inputs and labels. Nonzero biases and non-binary
/// inputs keep relu and pooling away from exact ties.
pub fn randomize(
    config: &ModelConfig,
    n: usize,
    seed: u64,
) -> Result<(ModelParams<f64>, Tensor<f64>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::<f64>::init(config)?;
    for (_, t) in params.tensors_mut() {
        if t.shape().len() == 1 {
            for b in t.data_mut() {
                *b = rng.gen_range(-0.1..0.1);
            }
        }
    }
    let (c, s) = (config.input_channels, config.input_side);
    let data = (0..n * c * s * s).map(|_| rng.gen::<f64>()).collect();
    let batch = Tensor::new(vec![n, c, s, s], data)?;
    let labels = (0..n).map(|_| rng.gen_range(0..config.num_classes)).collect();
    Ok((params, batch, labels))
}
