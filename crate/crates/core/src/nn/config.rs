use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv2d {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Maxpool {
        window: usize,
        stride: usize,
    },
    Relu,
    Flatten,
    Dense {
        units: usize,
    },
    Softmax,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Maxpool { .. } => "maxpool",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Softmax => "softmax",
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. })
    }
}

/// Per-sample activation shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Spatial { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl Shape {
    pub fn size(&self) -> usize {
        match *self {
            Shape::Spatial { c, h, w } => c * h * w,
            Shape::Flat(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub input_side: usize,
    #[serde(default = "one")]
    pub input_channels: usize,
    pub num_classes: usize,
    pub init_seed: u64,
    /// Sign name of each class id, when known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub class_names: Vec<String>,
    pub layers: Vec<LayerSpec>,
}

fn one() -> usize {
    1
}

/// conv 3x3x16, relu, pool 2, conv 3x3x32, relu, pool 2, flatten,
/// dense 128, relu, dense `num_classes`, softmax.
pub fn default_layers(num_classes: usize) -> Vec<LayerSpec> {
    let conv = |out_channels| LayerSpec::Conv2d {
        out_channels,
        kernel: 3,
        stride: 1,
        padding: 1,
    };
    let pool = LayerSpec::Maxpool { window: 2, stride: 2 };
    vec![
        conv(16),
        LayerSpec::Relu,
        pool,
        conv(32),
        LayerSpec::Relu,
        pool,
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 128 },
        LayerSpec::Relu,
        LayerSpec::Dense { units: num_classes },
        LayerSpec::Softmax,
    ]
}

impl ModelConfig {
    pub fn new_default(input_side: usize, num_classes: usize, init_seed: u64) -> Self {
        Self {
            input_side,
            input_channels: 1,
            num_classes,
            init_seed,
            class_names: Vec::new(),
            layers: default_layers(num_classes),
        }
    }

    pub fn input_shape(&self) -> Shape {
        Shape::Spatial {
            c: self.input_channels,
            h: self.input_side,
            w: self.input_side,
        }
    }

    /// Input shape followed by each layer's output shape, after checking
    /// the whole stack.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        if self.input_side == 0 || self.input_channels == 0 {
            return Err(Error::Config("input_side and input_channels must be >= 1".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("num_classes must be >= 1".into()));
        }
        if !self.class_names.is_empty() && self.class_names.len() != self.num_classes {
            return Err(Error::Config(format!(
                "{} class names for {} classes",
                self.class_names.len(),
                self.num_classes
            )));
        }
        let err = |layer: usize, msg: String| Error::Shape { layer, msg };
        let mut shapes = vec![self.input_shape()];
        for (i, spec) in self.layers.iter().enumerate() {
            let cur = *shapes.last().unwrap();
            let next = match (*spec, cur) {
                (
                    LayerSpec::Conv2d {
                        out_channels,
                        kernel,
                        stride,
                        padding,
                    },
                    Shape::Spatial { h, w, .. },
                ) => {
                    if out_channels == 0 || kernel == 0 || stride == 0 {
                        return Err(err(i, "conv2d needs out_channels, kernel, stride >= 1".into()));
                    }
                    if h + 2 * padding < kernel || w + 2 * padding < kernel {
                        return Err(err(
                            i,
                            format!("kernel {kernel} larger than padded {h}x{w} input"),
                        ));
                    }
                    Shape::Spatial {
                        c: out_channels,
                        h: (h + 2 * padding - kernel) / stride + 1,
                        w: (w + 2 * padding - kernel) / stride + 1,
                    }
                }
                (LayerSpec::Maxpool { window, stride }, Shape::Spatial { c, h, w }) => {
                    if window == 0 || stride == 0 {
                        return Err(err(i, "maxpool needs window, stride >= 1".into()));
                    }
                    if h < window || w < window {
                        return Err(err(i, format!("pool window {window} larger than {h}x{w} input")));
                    }
                    Shape::Spatial {
                        c,
                        h: (h - window) / stride + 1,
                        w: (w - window) / stride + 1,
                    }
                }
                (LayerSpec::Conv2d { .. } | LayerSpec::Maxpool { .. }, Shape::Flat(_)) => {
                    return Err(err(i, format!("{} needs a spatial input", spec.name())));
                }
                (LayerSpec::Relu, s) => s,
                (LayerSpec::Flatten, s) => Shape::Flat(s.size()),
                (LayerSpec::Dense { units }, Shape::Flat(_)) => {
                    if units == 0 {
                        return Err(err(i, "dense needs units >= 1".into()));
                    }
                    Shape::Flat(units)
                }
                (LayerSpec::Dense { .. }, Shape::Spatial { .. }) => {
                    return Err(err(i, "dense needs a flat input; add a flatten layer".into()));
                }
                (LayerSpec::Softmax, s) => {
                    if i + 1 != self.layers.len() {
                        return Err(err(i, "softmax is only allowed as the final layer".into()));
                    }
                    if !matches!(s, Shape::Flat(_)) {
                        return Err(err(i, "softmax needs a flat input".into()));
                    }
                    s
                }
            };
            shapes.push(next);
        }
        let out = *shapes.last().unwrap();
        if out != Shape::Flat(self.num_classes) {
            return Err(err(
                self.layers.len().saturating_sub(1),
                format!(
                    "network output {out:?} does not match {} classes",
                    self.num_classes
                ),
            ));
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    pub fn ends_in_softmax(&self) -> bool {
        self.layers.last() == Some(&LayerSpec::Softmax)
    }

    pub fn class_name(&self, id: usize) -> String {
        self.class_names
            .get(id)
            .cloned()
            .unwrap_or_else(|| format!("class{id}"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
