use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::*;
use crate::error::{Error, Result};
use crate::gainlayer::{gain_init, GainCache, GainLayer, GainParams, InitScheme};
use crate::npy;
use crate::rng::SeededRng;
use crate::tensor::{Real, Tensor};
use crate::transform::load_filter_set;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        kernel: usize,
        out_channels: usize,
        pad: usize,
    },
    Wavegain {
        levels: usize,
        lowpass_size: usize,
        out_channels: usize,
    },
    Relu,
    Maxpool2,
    Flatten,
    Linear {
        out: usize,
    },
    SoftmaxCe,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Self::F32),
            "f64" => Ok(Self::F64),
            _ => Err(Error::config(format!(
                "unknown precision '{s}' (expected f32 or f64)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    /// `[C, H, W]` of one sample
    pub input_shape: [usize; 3],
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
    pub filter_set: String,
    pub precision: Precision,
}

impl ModelConfig {
    /// Activation shape (without the batch axis) after every layer except
    /// the loss; checks that the stack ends in exactly one loss layer fed
    /// by `num_classes` logits.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut cur = self.input_shape.to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        let Some((last, body)) = self.layers.split_last() else {
            return Err(Error::config("model has no layers"));
        };
        if *last != LayerSpec::SoftmaxCe {
            return Err(Error::config("the last layer must be softmax_ce"));
        }
        for (i, layer) in body.iter().enumerate() {
            let bad = |msg: String| Error::config(format!("layer {i} ({layer:?}): {msg}"));
            cur = match *layer {
                LayerSpec::Conv2d {
                    kernel,
                    out_channels,
                    pad,
                } => {
                    let [_, h, w] = <[usize; 3]>::try_from(cur.as_slice())
                        .map_err(|_| bad(format!("needs [C, H, W], got {cur:?}")))?;
                    if kernel == 0
                        || out_channels == 0
                        || h + 2 * pad < kernel
                        || w + 2 * pad < kernel
                    {
                        return Err(bad(format!(
                            "kernel {kernel} does not fit {h}×{w} with padding {pad}"
                        )));
                    }
                    vec![
                        out_channels,
                        h + 2 * pad + 1 - kernel,
                        w + 2 * pad + 1 - kernel,
                    ]
                }
                LayerSpec::Wavegain {
                    levels,
                    lowpass_size,
                    out_channels,
                } => {
                    if cur.len() != 3 || levels == 0 || out_channels == 0 || lowpass_size % 2 == 0 {
                        return Err(bad(format!(
                            "needs [C, H, W], J ≥ 1, F ≥ 1 and odd klp; input {cur:?}"
                        )));
                    }
                    vec![out_channels, cur[1], cur[2]]
                }
                LayerSpec::Relu => cur,
                LayerSpec::Maxpool2 => {
                    if cur.len() != 3 || cur[1] < 2 || cur[2] < 2 {
                        return Err(bad(format!("needs [C, H, W] with H, W ≥ 2, got {cur:?}")));
                    }
                    vec![cur[0], cur[1] / 2, cur[2] / 2]
                }
                LayerSpec::Flatten => vec![cur.iter().product()],
                LayerSpec::Linear { out } => {
                    if cur.len() != 1 || out == 0 {
                        return Err(bad(format!("needs a flat input, got {cur:?}")));
                    }
                    vec![out]
                }
                LayerSpec::SoftmaxCe => return Err(bad("softmax_ce may only appear last".into())),
            };
            out.push(cur.clone());
        }
        if cur != [self.num_classes] {
            return Err(Error::config(format!(
                "the loss receives {cur:?}, expected [{}] logits",
                self.num_classes
            )));
        }
        Ok(out)
    }
}

fn lenet_layers(first: LayerSpec, second: LayerSpec, num_classes: usize) -> Vec<LayerSpec> {
    vec![
        first,
        LayerSpec::Relu,
        LayerSpec::Maxpool2,
        second,
        LayerSpec::Relu,
        LayerSpec::Maxpool2,
        LayerSpec::Flatten,
        LayerSpec::Linear { out: 120 },
        LayerSpec::Relu,
        LayerSpec::Linear { out: 84 },
        LayerSpec::Relu,
        LayerSpec::Linear { out: num_classes },
        LayerSpec::SoftmaxCe,
    ]
}

fn check_classes(num_classes: usize) -> Result<()> {
    if num_classes == 10 || num_classes == 100 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "num_classes must be 10 or 100, got {num_classes}"
        )))
    }
}

/// Two 5×5 convolutions (6 and 16 filters, zero padding 2), each followed by
/// ReLU and 2×2 max pooling, then 120 → 84 → classes fully connected layers.
pub fn build_lenet(num_classes: usize) -> Result<ModelConfig> {
    check_classes(num_classes)?;
    Ok(ModelConfig {
        name: "lenet".into(),
        input_shape: [3, 32, 32],
        num_classes,
        layers: lenet_layers(
            LayerSpec::Conv2d {
                kernel: 5,
                out_channels: 6,
                pad: 2,
            },
            LayerSpec::Conv2d {
                kernel: 5,
                out_channels: 16,
                pad: 2,
            },
            num_classes,
        ),
        filter_set: crate::transform::FilterSet::default().name,
        precision: Precision::F32,
    })
}

/// [`build_lenet`] with both convolutions replaced by one-level gain layers
/// with a 3×3 lowpass gain.
pub fn build_wavelenet(num_classes: usize) -> Result<ModelConfig> {
    check_classes(num_classes)?;
    Ok(ModelConfig {
        name: "wavelenet".into(),
        layers: lenet_layers(
            LayerSpec::Wavegain {
                levels: 1,
                lowpass_size: 3,
                out_channels: 6,
            },
            LayerSpec::Wavegain {
                levels: 1,
                lowpass_size: 3,
                out_channels: 16,
            },
            num_classes,
        ),
        ..build_lenet(num_classes)?
    })
}

#[derive(Clone, Debug)]
enum Layer<T> {
    Conv {
        w: Tensor<T>,
        b: Tensor<T>,
        pad: usize,
    },
    Gain {
        params: GainParams<T>,
        layer: GainLayer<T>,
    },
    Relu,
    Maxpool2,
    Flatten,
    Linear {
        w: Tensor<T>,
        b: Tensor<T>,
    },
}

enum Cache<T> {
    Input(Tensor<T>),
    Gain(GainCache<T>),
    Pool(Vec<usize>, Vec<usize>),
    Shape(Vec<usize>),
}

/// Result of one forward/backward pass over a batch.
#[derive(Clone, Debug)]
pub struct Step<T> {
    pub loss: f64,
    pub correct: usize,
    /// same order as [`Model::parameters`]
    pub grads: Vec<Tensor<T>>,
}

/// A model built from a [`ModelConfig`] with its parameters.
#[derive(Clone, Debug)]
pub struct Model<T = f64> {
    pub config: ModelConfig,
    pub seed: u64,
    layers: Vec<Layer<T>>,
}

fn uniform_init<T: Real>(rng: &mut SeededRng, shape: &[usize], fan_in: usize) -> Tensor<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    rng.uniform_tensor(shape, -bound, bound)
}

impl<T: Real> Model<T> {
    /// Convolution and linear weights and biases are uniform in
    /// `±1/√fan_in`; gain layers use the glorot-like scheme.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let shapes = config.shapes()?;
        let fs = load_filter_set(&config.filter_set)?;
        let mut layers = Vec::with_capacity(shapes.len());
        let mut input = config.input_shape.to_vec();
        for (i, spec) in config.layers.iter().enumerate().take(shapes.len()) {
            let mut rng = SeededRng::with_stream(seed, i as u64);
            layers.push(match *spec {
                LayerSpec::Conv2d {
                    kernel,
                    out_channels,
                    pad,
                } => {
                    let fan = input[0] * kernel * kernel;
                    Layer::Conv {
                        w: uniform_init(&mut rng, &[out_channels, input[0], kernel, kernel], fan),
                        b: uniform_init(&mut rng, &[out_channels], fan),
                        pad,
                    }
                }
                LayerSpec::Wavegain {
                    levels,
                    lowpass_size,
                    out_channels,
                } => {
                    let layer_seed = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1);
                    Layer::Gain {
                        params: gain_init(
                            out_channels,
                            input[0],
                            levels,
                            lowpass_size,
                            layer_seed,
                            InitScheme::GlorotLike,
                            &fs.name,
                        )?,
                        layer: GainLayer::new(fs.clone()),
                    }
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Maxpool2 => Layer::Maxpool2,
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Linear { out } => Layer::Linear {
                    w: uniform_init(&mut rng, &[out, input[0]], input[0]),
                    b: uniform_init(&mut rng, &[out], input[0]),
                },
                LayerSpec::SoftmaxCe => unreachable!("shapes() excludes the loss layer"),
            });
            input = shapes[i].clone();
        }
        Ok(Self {
            config,
            seed,
            layers,
        })
    }

    /// Every learnable tensor in layer order; gain layers contribute their
    /// real planes in [`GainParams::planes`] order.
    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        let mut v = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Conv { w, b, .. } | Layer::Linear { w, b } => {
                    v.push(w);
                    v.push(b);
                }
                Layer::Gain { params, .. } => v.extend(params.planes()),
                _ => {}
            }
        }
        v
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = Vec::new();
        for l in &mut self.layers {
            match l {
                Layer::Conv { w, b, .. } | Layer::Linear { w, b } => {
                    v.push(w);
                    v.push(b);
                }
                Layer::Gain { params, .. } => v.extend(params.planes_mut()),
                _ => {}
            }
        }
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }

    /// Stored scalars of each layer, weights and biases together.
    pub fn layer_parameter_counts(&self) -> Vec<(String, usize)> {
        self.config
            .layers
            .iter()
            .zip(&self.layers)
            .map(|(spec, l)| {
                let n = match l {
                    Layer::Conv { w, b, .. } | Layer::Linear { w, b } => w.len() + b.len(),
                    Layer::Gain { params, .. } => params.parameter_count(),
                    _ => 0,
                };
                (format!("{spec:?}"), n)
            })
            .collect()
    }

    /// Gain parameters of the `k`-th gain layer.
    pub fn gain_params(&self, k: usize) -> Option<&GainParams<T>> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Gain { params, .. } => Some(params),
                _ => None,
            })
            .nth(k)
    }

    /// Weight and bias of the `k`-th convolution.
    pub fn conv_params(&self, k: usize) -> Option<(&Tensor<T>, &Tensor<T>)> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Conv { w, b, .. } => Some((w, b)),
                _ => None,
            })
            .nth(k)
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.ndim() != 4 || x.shape()[1..] != self.config.input_shape {
            return Err(Error::dim(format!(
                "model expects [N, {:?}], got {:?}",
                self.config.input_shape,
                x.shape()
            )));
        }
        Ok(())
    }

    fn run(&self, x: &Tensor<T>, keep: bool) -> Result<(Tensor<T>, Vec<Cache<T>>)> {
        self.check_input(x)?;
        let mut cur = x.clone();
        let mut caches = Vec::with_capacity(if keep { self.layers.len() } else { 0 });
        for l in &self.layers {
            let (next, cache) = match l {
                Layer::Conv { w, b, pad } => (conv2d_forward(&cur, w, b, *pad)?, Cache::Input(cur)),
                Layer::Gain { params, layer } => {
                    let (y, c) = layer.forward(&cur, params)?;
                    (y, Cache::Gain(c))
                }
                Layer::Relu => (relu_forward(&cur), Cache::Input(cur)),
                Layer::Maxpool2 => {
                    let (y, arg) = maxpool2_forward(&cur)?;
                    (y, Cache::Pool(arg, cur.shape().to_vec()))
                }
                Layer::Flatten => {
                    let shape = cur.shape().to_vec();
                    let n = shape[0];
                    let flat = cur.len() / n.max(1);
                    (cur.reshape(&[n, flat])?, Cache::Shape(shape))
                }
                Layer::Linear { w, b } => (linear_forward(&cur, w, b)?, Cache::Input(cur)),
            };
            if keep {
                caches.push(cache);
            }
            cur = next;
        }
        Ok((cur, caches))
    }

    /// Logits `[N, classes]`.
    pub fn logits(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.run(x, false)?.0)
    }

    /// Mean loss over the batch and the gradient of every parameter.
    pub fn loss_and_grads(&self, x: &Tensor<T>, labels: &[usize]) -> Result<Step<T>> {
        let (logits, caches) = self.run(x, true)?;
        let (loss, correct, mut g) = softmax_cross_entropy(&logits, labels)?;
        let mut grads_rev: Vec<Vec<Tensor<T>>> = Vec::with_capacity(self.layers.len());
        for (l, cache) in self.layers.iter().zip(caches).rev() {
            let (dx, pg) = match (l, cache) {
                (Layer::Conv { w, b, pad }, Cache::Input(x)) => {
                    let (dx, dw, db) = conv2d_backward(&g, &x, w, b, *pad)?;
                    (dx, vec![dw, db])
                }
                (Layer::Gain { params, layer }, Cache::Gain(c)) => {
                    let (dx, dp) = layer.backward(&g, &c, params)?;
                    (dx, dp.planes().into_iter().cloned().collect())
                }
                (Layer::Relu, Cache::Input(x)) => (relu_backward(&g, &x)?, vec![]),
                (Layer::Maxpool2, Cache::Pool(arg, shape)) => {
                    (maxpool2_backward(&g, &arg, &shape)?, vec![])
                }
                (Layer::Flatten, Cache::Shape(shape)) => (g.reshape(&shape)?, vec![]),
                (Layer::Linear { w, b }, Cache::Input(x)) => {
                    let (dx, dw, db) = linear_backward(&g, &x, w, b)?;
                    (dx, vec![dw, db])
                }
                _ => unreachable!("cache variant follows the layer variant"),
            };
            grads_rev.push(pg);
            g = dx;
        }
        let grads = grads_rev.into_iter().rev().flatten().collect();
        Ok(Step {
            loss,
            correct,
            grads,
        })
    }

    /// Copy of the model at another precision.
    pub fn cast<U: Real>(&self) -> Model<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv { w, b, pad } => Layer::Conv {
                    w: w.cast(),
                    b: b.cast(),
                    pad: *pad,
                },
                Layer::Gain { params, layer } => Layer::Gain {
                    params: params.cast(),
                    layer: GainLayer::new(layer.filter_set().clone()),
                },
                Layer::Relu => Layer::Relu,
                Layer::Maxpool2 => Layer::Maxpool2,
                Layer::Flatten => Layer::Flatten,
                Layer::Linear { w, b } => Layer::Linear {
                    w: w.cast(),
                    b: b.cast(),
                },
            })
            .collect();
        Model {
            config: self.config.clone(),
            seed: self.seed,
            layers,
        }
    }

    /// Writes `param_NNN.npy` for every parameter tensor plus `model.json`.
    pub fn save(&self, dir: impl AsRef<Path>, extra: serde_json::Value) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let params = self.parameters();
        for (i, p) in params.iter().enumerate() {
            npy::save(p, dir.join(format!("param_{i:03}.npy")))?;
        }
        let manifest = Checkpoint {
            config: self.config.clone(),
            seed: self.seed,
            dtype: T::NAME.to_owned(),
            parameter_shapes: params.iter().map(|p| p.shape().to_vec()).collect(),
            extra,
        };
        let path = dir.join("model.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    /// Reads a checkpoint written by [`Model::save`], converting the stored
    /// values to `T` if needed. Returns the extra manifest data too.
    pub fn load(dir: impl AsRef<Path>) -> Result<(Self, serde_json::Value)> {
        let dir = dir.as_ref();
        let path = dir.join("model.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Checkpoint = serde_json::from_str(&text)?;
        let mut model = Self::new(manifest.config, manifest.seed)?;
        let f32_stored = manifest.dtype == "f32";
        let shapes = manifest.parameter_shapes;
        let params = model.parameters_mut();
        if params.len() != shapes.len() {
            return Err(Error::format(
                &path,
                "parameter count does not match the configuration",
            ));
        }
        for (i, p) in params.into_iter().enumerate() {
            let file = dir.join(format!("param_{i:03}.npy"));
            let loaded: Tensor<T> = if f32_stored {
                npy::load::<f32>(&file)?.cast()
            } else {
                npy::load::<f64>(&file)?.cast()
            };
            if loaded.shape() != p.shape() || loaded.shape() != shapes[i].as_slice() {
                return Err(Error::format(
                    &file,
                    format!("shape {:?}, expected {:?}", loaded.shape(), p.shape()),
                ));
            }
            *p = loaded;
        }
        Ok((model, manifest.extra))
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: ModelConfig,
    seed: u64,
    dtype: String,
    parameter_shapes: Vec<Vec<usize>>,
    #[serde(default)]
    extra: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn lenet_shapes() {
        let cfg = build_lenet(10).unwrap();
        let shapes = cfg.shapes().unwrap();
        assert_eq!(shapes[0], [6, 32, 32]);
        assert_eq!(shapes[5], [16, 8, 8]);
        assert_eq!(shapes[6], [1024]);
        assert_eq!(shapes.last().unwrap(), &[10]);
        assert!(build_lenet(7).is_err());
    }

    #[test]
    fn first_layer_parameter_counts() {
        let lenet: Model<f32> = Model::new(build_lenet(10).unwrap(), 0).unwrap();
        let wave: Model<f32> = Model::new(build_wavelenet(10).unwrap(), 0).unwrap();
        assert_eq!(lenet.conv_params(0).unwrap().0.len(), 25 * 3 * 6);
        assert_eq!(wave.gain_params(0).unwrap().parameter_count(), 21 * 3 * 6);
        assert_eq!(wave.gain_params(1).unwrap().parameter_count(), 21 * 6 * 16);
        assert_eq!(wave.gain_params(0).unwrap().parameter_count(), 378);
    }

    #[test]
    fn logits_are_finite_on_zero_input() {
        for cfg in [build_lenet(100).unwrap(), build_wavelenet(100).unwrap()] {
            let m: Model<f64> = Model::new(cfg, 1).unwrap();
            let y = m.logits(&Tensor::zeros(&[2, 3, 32, 32])).unwrap();
            assert_eq!(y.shape(), &[2, 100]);
            assert!(y.is_finite());
        }
    }

    #[test]
    fn invalid_stacks() {
        let mut cfg = build_lenet(10).unwrap();
        cfg.layers.pop();
        assert!(cfg.shapes().is_err());
        let mut cfg = build_lenet(10).unwrap();
        cfg.layers.insert(3, LayerSpec::SoftmaxCe);
        assert!(cfg.shapes().is_err());
        let mut cfg = build_lenet(10).unwrap();
        cfg.num_classes = 100;
        assert!(cfg.shapes().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = build_wavelenet(10).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"type\":\"wavegain\""));
        assert_eq!(serde_json::from_str::<ModelConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m: Model<f32> = Model::new(build_wavelenet(10).unwrap(), 3).unwrap();
        m.save(dir.path(), serde_json::json!({"val_acc": 0.5}))
            .unwrap();
        let (back, extra) = Model::<f32>::load(dir.path()).unwrap();
        assert_eq!(extra["val_acc"], 0.5);
        for (a, b) in m.parameters().iter().zip(back.parameters()) {
            assert_eq!(*a, b);
        }
        let (wide, _) = Model::<f64>::load(dir.path()).unwrap();
        assert_eq!(wide.parameter_count(), m.parameter_count());
    }

    #[test]
    fn seeded_initialisation() {
        let a: Model<f64> = Model::new(build_wavelenet(10).unwrap(), 5).unwrap();
        let b: Model<f64> = Model::new(build_wavelenet(10).unwrap(), 5).unwrap();
        let c: Model<f64> = Model::new(build_wavelenet(10).unwrap(), 6).unwrap();
        assert!(a
            .parameters()
            .iter()
            .zip(b.parameters())
            .all(|(x, y)| *x == y));
        assert!(a
            .parameters()
            .iter()
            .zip(c.parameters())
            .any(|(x, y)| *x != y));
    }

    #[test]
    fn whole_model_gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(11);
        let x: Tensor<f64> = rng.normal_tensor(&[3, 3, 32, 32]);
        let labels = [1, 4, 7];
        for cfg in [build_wavelenet(10).unwrap(), build_lenet(10).unwrap()] {
            let mut model: Model<f64> = Model::new(cfg, 2).unwrap();
            let grads = model.loss_and_grads(&x, &labels).unwrap().grads;
            let sizes: Vec<usize> = model.parameters().iter().map(|p| p.len()).collect();
            let h = 1e-5;
            for _ in 0..20 {
                let t = rng.below(sizes.len());
                let k = rng.below(sizes[t]);
                let orig = model.parameters()[t].data()[k];
                let mut at = |v: f64| {
                    model.parameters_mut()[t].data_mut()[k] = v;
                    model.loss_and_grads(&x, &labels).unwrap().loss
                };
                let fd = (at(orig + h) - at(orig - h)) / (2.0 * h);
                at(orig);
                let an = grads[t].data()[k];
                assert!(
                    (fd - an).abs() <= 1e-5 * an.abs().max(1.0),
                    "tensor {t}[{k}]: {fd} vs {an}"
                );
            }
        }
    }
}
