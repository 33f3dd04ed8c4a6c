//! Minimal per-pixel segmentation network: a stack of same-padded
//! convolutions with ReLU between them, softmax cross-entropy loss, and
//! SGD with momentum. With depth guidance enabled every layer becomes a
//! deformable convolution whose offsets are computed once per scene from
//! its depth map and carry no gradient.

use std::fs;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::camera::CameraIntrinsics;
use crate::conv;
use crate::error::{Error, Result};
use crate::grid::ConvSpec;
use crate::io::{read_zten, write_zten, DepthMap};
use crate::metrics::{ConfusionMatrix, LabelMap, MetricsReport};
use crate::offset::{compute_offset_field, OffsetField};
use crate::scene::Scene;
use crate::tensor::Tensor;

/// Training and architecture configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyNetConfig {
    /// Channel widths from input to logits, e.g. `[3, 8, 3]`.
    pub channels: Vec<usize>,
    /// Odd kernel size per layer; one entry per convolution.
    pub kernels: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Depth guidance on/off: off trains a plain CNN with zero offsets.
    pub depth_guided: bool,
    pub seed: u64,
    /// Scene height/width used by the benchmark driver.
    pub height: usize,
    pub width: usize,
}

impl Default for ToyNetConfig {
    fn default() -> Self {
        Self {
            channels: vec![3, 8, 3],
            kernels: vec![3, 3],
            learning_rate: 1e-4,
            momentum: 0.99,
            batch_size: 1,
            epochs: 10,
            depth_guided: true,
            seed: 0,
            height: 32,
            width: 32,
        }
    }
}

impl ToyNetConfig {
    /// Settings for the standard synthetic benchmark (64 train / 16 test
    /// scenes at 32x32).
    pub fn standard_benchmark() -> Self {
        Self {
            channels: vec![3, 8, 3],
            kernels: vec![3, 3],
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 1,
            epochs: 10,
            depth_guided: true,
            seed: 0,
            height: 32,
            width: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() < 2 || self.channels.iter().any(|&c| c == 0) {
            return Err(Error::domain(format!(
                "channels must list input and output widths, got {:?}",
                self.channels
            )));
        }
        if self.kernels.len() != self.channels.len() - 1 {
            return Err(Error::domain(format!(
                "{} channel transitions need {} kernels, got {}",
                self.channels.len(),
                self.channels.len() - 1,
                self.kernels.len()
            )));
        }
        if self.kernels.iter().any(|&n| n == 0 || n % 2 == 0) {
            return Err(Error::domain(format!(
                "kernel sizes must be odd, got {:?}",
                self.kernels
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::domain(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::domain(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::domain("batch size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::domain("epochs must be at least 1"));
        }
        if self.height < 16 || self.width < 16 {
            return Err(Error::domain(format!(
                "scenes need at least 16x16 pixels, got {}x{}",
                self.height, self.width
            )));
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        *self.channels.last().expect("validated non-empty")
    }

    /// Parses `key=value` lines; keys not present keep their defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::default();
        let mut offset = 0u64;
        for line in text.lines() {
            let line_start = offset;
            offset += line.len() as u64 + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                Error::format(path, line_start, format!("expected key=value, got {trimmed:?}"))
            })?;
            let value = value.trim();
            let bad = |what: &str| Error::format(path, line_start, format!("invalid {what} {value:?}"));
            match key.trim() {
                "channels" => {
                    config.channels = parse_usize_list(value).ok_or_else(|| bad("channel list"))?
                }
                "kernels" => {
                    config.kernels = parse_usize_list(value).ok_or_else(|| bad("kernel list"))?
                }
                "learning_rate" => {
                    config.learning_rate = value.parse().map_err(|_| bad("learning rate"))?
                }
                "momentum" => config.momentum = value.parse().map_err(|_| bad("momentum"))?,
                "batch_size" => config.batch_size = value.parse().map_err(|_| bad("batch size"))?,
                "epochs" => config.epochs = value.parse().map_err(|_| bad("epoch count"))?,
                "depth_guided" => {
                    config.depth_guided = match value {
                        "true" | "1" | "on" => true,
                        "false" | "0" | "off" => false,
                        _ => return Err(bad("flag")),
                    }
                }
                "seed" => config.seed = value.parse().map_err(|_| bad("seed"))?,
                "height" => config.height = value.parse().map_err(|_| bad("height"))?,
                "width" => config.width = value.parse().map_err(|_| bad("width"))?,
                other => {
                    return Err(Error::format(
                        path,
                        line_start,
                        format!("unknown key {other:?}"),
                    ))
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "channels={}\nkernels={}\nlearning_rate={}\nmomentum={}\nbatch_size={}\nepochs={}\ndepth_guided={}\nseed={}\nheight={}\nwidth={}\n",
            join_usize(&self.channels),
            join_usize(&self.kernels),
            self.learning_rate,
            self.momentum,
            self.batch_size,
            self.epochs,
            self.depth_guided,
            self.seed,
            self.height,
            self.width,
        )
    }
}

fn parse_usize_list(text: &str) -> Option<Vec<usize>> {
    let items: Option<Vec<usize>> = text
        .split(',')
        .map(|part| part.trim().parse::<usize>().ok())
        .collect();
    items.filter(|v| !v.is_empty())
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// One convolution layer: weights `c_out x c_in x N x N`, bias per output
/// channel, stride 1 with same-padding.
#[derive(Debug, Clone)]
pub struct ConvLayer {
    pub weights: Tensor,
    pub bias: Vec<f64>,
    pub spec: ConvSpec,
}

/// The network: a plain stack of [`ConvLayer`]s with ReLU between them.
#[derive(Debug, Clone)]
pub struct ToyNet {
    pub layers: Vec<ConvLayer>,
}

impl ToyNet {
    /// Seeded initialization: weights uniform in `+/- 1/sqrt(fan_in)`,
    /// biases zero.
    pub fn init(config: &ToyNetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut layers = Vec::with_capacity(config.kernels.len());
        for l in 0..config.kernels.len() {
            let c_in = config.channels[l];
            let c_out = config.channels[l + 1];
            let n = config.kernels[l];
            let spec = ConvSpec::new(n, 1, 1, (n - 1) / 2)?;
            let bound = 1.0 / ((c_in * n * n) as f64).sqrt();
            let data = (0..c_out * c_in * n * n)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            layers.push(ConvLayer {
                weights: Tensor::new(vec![c_out, c_in, n, n], data)?,
                bias: vec![0.0; c_out],
                spec,
            });
        }
        Ok(Self { layers })
    }

    pub fn n_classes(&self) -> usize {
        self.layers
            .last()
            .map(|l| l.weights.shape()[0])
            .unwrap_or(0)
    }

    /// Forward pass to logits; `offsets` holds one field per layer.
    pub fn forward(&self, rgb: &Tensor, offsets: &[OffsetField]) -> Result<Tensor> {
        if offsets.len() != self.layers.len() {
            return Err(Error::shape(format!(
                "{} offset fields for {} layers",
                offsets.len(),
                self.layers.len()
            )));
        }
        let mut x = rgb.clone();
        for (li, layer) in self.layers.iter().enumerate() {
            let z = conv::forward(&x, &layer.weights, &layer.bias, &offsets[li], &layer.spec)?;
            x = if li + 1 == self.layers.len() {
                z
            } else {
                relu(&z)
            };
        }
        Ok(x)
    }

    /// Argmax class map over the logits; ties go to the lower class index.
    pub fn predict(&self, rgb: &Tensor, offsets: &[OffsetField]) -> Result<LabelMap> {
        let logits = self.forward(rgb, offsets)?;
        let (nc, h, w) = (logits.shape()[0], logits.shape()[1], logits.shape()[2]);
        let mut labels = Vec::with_capacity(h * w);
        for i in 0..h {
            for j in 0..w {
                let mut best = 0usize;
                let mut best_v = logits.at3(0, i, j);
                for c in 1..nc {
                    let v = logits.at3(c, i, j);
                    if v > best_v {
                        best = c;
                        best_v = v;
                    }
                }
                labels.push(best as u8);
            }
        }
        LabelMap::new(h, w, labels)
    }
}

fn relu(t: &Tensor) -> Tensor {
    Tensor::new(
        t.shape().to_vec(),
        t.data().iter().map(|&v| v.max(0.0)).collect(),
    )
    .expect("relu preserves shape and finiteness")
}

fn relu_backward(grad: &Tensor, pre_activation: &Tensor) -> Tensor {
    Tensor::new(
        grad.shape().to_vec(),
        grad.data()
            .iter()
            .zip(pre_activation.data())
            .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
            .collect(),
    )
    .expect("mask preserves shape and finiteness")
}

/// Per-layer offset fields for one depth map; zero fields when `guided`
/// is off. Layers sharing a spec share the computation.
pub fn scene_offsets(
    net: &ToyNet,
    depth: &DepthMap,
    k: &CameraIntrinsics,
    guided: bool,
) -> Result<Vec<OffsetField>> {
    let mut cache: Vec<(ConvSpec, OffsetField)> = Vec::new();
    let mut fields = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        let (h1, w1) = layer.spec.output_dims(depth.height(), depth.width())?;
        if !guided {
            fields.push(OffsetField::zeros(layer.spec.tap_count(), h1, w1));
            continue;
        }
        if let Some((_, field)) = cache.iter().find(|(s, _)| *s == layer.spec) {
            fields.push(field.clone());
            continue;
        }
        let field = compute_offset_field(depth, k, &layer.spec, None)?;
        cache.push((layer.spec, field.clone()));
        fields.push(field);
    }
    Ok(fields)
}

/// Mean per-pixel softmax cross-entropy and its gradient on the logits.
pub fn softmax_cross_entropy(logits: &Tensor, truth: &LabelMap) -> Result<(f64, Tensor)> {
    let (nc, h, w) = (logits.shape()[0], logits.shape()[1], logits.shape()[2]);
    if truth.height() != h || truth.width() != w {
        return Err(Error::shape(format!(
            "logits {h}x{w} but labels {}x{}",
            truth.height(),
            truth.width()
        )));
    }
    let pixels = (h * w) as f64;
    let mut grad = Tensor::zeros(vec![nc, h, w])?;
    let mut loss = 0.0;
    for i in 0..h {
        for j in 0..w {
            let t = truth.at(i, j) as usize;
            if t >= nc {
                return Err(Error::domain(format!(
                    "label {t} out of range for {nc} classes"
                )));
            }
            let mut max_v = f64::NEG_INFINITY;
            for c in 0..nc {
                max_v = max_v.max(logits.at3(c, i, j));
            }
            let mut denom = 0.0;
            for c in 0..nc {
                denom += (logits.at3(c, i, j) - max_v).exp();
            }
            loss -= logits.at3(t, i, j) - max_v - denom.ln();
            for c in 0..nc {
                let p = (logits.at3(c, i, j) - max_v).exp() / denom;
                let indicator = if c == t { 1.0 } else { 0.0 };
                grad.set3(c, i, j, (p - indicator) / pixels);
            }
        }
    }
    Ok((loss / pixels, grad))
}

/// A trained network together with its per-step loss trace.
#[derive(Debug)]
pub struct TrainOutcome {
    pub net: ToyNet,
    pub loss_trace: Vec<f64>,
}

fn backprop_scene(
    net: &ToyNet,
    scene: &Scene,
    offsets: &[OffsetField],
) -> Result<(f64, Vec<Tensor>, Vec<Vec<f64>>)> {
    let mut pre_activations = Vec::with_capacity(net.layers.len());
    let mut activations = vec![scene.rgb.clone()];
    for (li, layer) in net.layers.iter().enumerate() {
        let z = conv::forward(
            activations.last().expect("non-empty"),
            &layer.weights,
            &layer.bias,
            &offsets[li],
            &layer.spec,
        )?;
        let a = if li + 1 == net.layers.len() {
            z.clone()
        } else {
            relu(&z)
        };
        pre_activations.push(z);
        activations.push(a);
    }

    let (loss, mut grad) =
        softmax_cross_entropy(activations.last().expect("non-empty"), &scene.labels)?;
    let mut grads_w: Vec<Option<Tensor>> = vec![None; net.layers.len()];
    let mut grads_b: Vec<Vec<f64>> = vec![Vec::new(); net.layers.len()];
    for li in (0..net.layers.len()).rev() {
        let layer = &net.layers[li];
        let (gx, gw, gb) =
            conv::backward(&activations[li], &layer.weights, &offsets[li], &layer.spec, &grad)?;
        grads_w[li] = Some(gw);
        grads_b[li] = gb;
        if li > 0 {
            grad = relu_backward(&gx, &pre_activations[li - 1]);
        }
    }
    Ok((
        loss,
        grads_w.into_iter().map(|g| g.expect("filled")).collect(),
        grads_b,
    ))
}

/// Trains on `scenes` with SGD + momentum. With depth guidance on, each
/// layer's offsets are computed once per scene up front; they receive no
/// gradient. The loss trace holds one entry per optimizer step.
pub fn train(
    config: &ToyNetConfig,
    scenes: &[Scene],
    k: &CameraIntrinsics,
) -> Result<TrainOutcome> {
    config.validate()?;
    if scenes.is_empty() {
        return Err(Error::domain("training needs at least one scene"));
    }
    let mut net = ToyNet::init(config)?;
    let scene_fields: Vec<Vec<OffsetField>> = scenes
        .iter()
        .map(|s| scene_offsets(&net, &s.depth, k, config.depth_guided))
        .collect::<Result<_>>()?;

    let mut velocity_w: Vec<Vec<f64>> = net
        .layers
        .iter()
        .map(|l| vec![0.0; l.weights.data().len()])
        .collect();
    let mut velocity_b: Vec<Vec<f64>> =
        net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect();

    let mut loss_trace = Vec::new();
    let mut step = 0usize;
    for _epoch in 0..config.epochs {
        let mut start = 0;
        while start < scenes.len() {
            let end = (start + config.batch_size).min(scenes.len());
            let batch_len = (end - start) as f64;

            let mut batch_gw: Vec<Vec<f64>> = net
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.data().len()])
                .collect();
            let mut batch_gb: Vec<Vec<f64>> =
                net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect();
            let mut batch_loss = 0.0;

            for idx in start..end {
                let (loss, gw, gb) = backprop_scene(&net, &scenes[idx], &scene_fields[idx])?;
                batch_loss += loss;
                for (acc, g) in batch_gw.iter_mut().zip(&gw) {
                    for (a, v) in acc.iter_mut().zip(g.data()) {
                        *a += v;
                    }
                }
                for (acc, g) in batch_gb.iter_mut().zip(&gb) {
                    for (a, v) in acc.iter_mut().zip(g) {
                        *a += v;
                    }
                }
            }

            let loss = batch_loss / batch_len;
            if !loss.is_finite() {
                return Err(Error::Diverged { step });
            }
            loss_trace.push(loss);

            for li in 0..net.layers.len() {
                for (i, v) in velocity_w[li].iter_mut().enumerate() {
                    *v = config.momentum * *v + batch_gw[li][i] / batch_len;
                    net.layers[li].weights.data_mut()[i] -= config.learning_rate * *v;
                }
                for (i, v) in velocity_b[li].iter_mut().enumerate() {
                    *v = config.momentum * *v + batch_gb[li][i] / batch_len;
                    net.layers[li].bias[i] -= config.learning_rate * *v;
                }
            }
            step += 1;
            start = end;
        }
    }
    Ok(TrainOutcome { net, loss_trace })
}

/// Aggregated metrics of `net` over `scenes` (confusion pooled across all
/// pixels of all scenes).
pub fn evaluate_model(
    net: &ToyNet,
    scenes: &[Scene],
    k: &CameraIntrinsics,
    guided: bool,
) -> Result<MetricsReport> {
    let mut matrix = ConfusionMatrix::new(net.n_classes());
    for scene in scenes {
        let fields = scene_offsets(net, &scene.depth, k, guided)?;
        let pred = net.predict(&scene.rgb, &fields)?;
        matrix.record(&pred, &scene.labels)?;
    }
    Ok(matrix.metrics())
}

/// Writes the model directory: `config.txt`, `manifest.txt`, and one pair
/// of ZTEN files per layer.
pub fn save_model(dir: &Path, net: &ToyNet, config: &ToyNetConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    fs::write(dir.join("config.txt"), config.to_key_values())
        .map_err(|e| Error::io(&dir.join("config.txt"), e))?;

    let mut manifest = format!("layers={}\n", net.layers.len());
    for (li, layer) in net.layers.iter().enumerate() {
        let wname = format!("layer{li}_w.zten");
        let bname = format!("layer{li}_b.zten");
        manifest.push_str(&format!(
            "layer{li}_weights={wname}\nlayer{li}_weights_shape={}\nlayer{li}_bias={bname}\nlayer{li}_bias_shape={}\n",
            join_usize(layer.weights.shape()),
            layer.bias.len(),
        ));
        write_zten(&dir.join(&wname), layer.weights.shape(), layer.weights.data())?;
        write_zten(&dir.join(&bname), &[layer.bias.len()], &layer.bias)?;
    }
    fs::write(dir.join("manifest.txt"), manifest)
        .map_err(|e| Error::io(&dir.join("manifest.txt"), e))
}

/// Loads a model directory written by [`save_model`]. Weight values come
/// back at f32 precision (the ZTEN payload width).
pub fn load_model(dir: &Path) -> Result<(ToyNet, ToyNetConfig)> {
    let config = ToyNetConfig::load(&dir.join("config.txt"))?;
    let manifest_path = dir.join("manifest.txt");
    let manifest =
        fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut expected_layers = None;
    for line in manifest.lines() {
        if let Some(v) = line.strip_prefix("layers=") {
            expected_layers = v.trim().parse::<usize>().ok();
        }
    }
    let n_layers = expected_layers.ok_or_else(|| {
        Error::format(&manifest_path, 0, "manifest is missing the layer count")
    })?;
    if n_layers != config.kernels.len() {
        return Err(Error::format(
            &manifest_path,
            0,
            format!(
                "manifest lists {n_layers} layers but the config builds {}",
                config.kernels.len()
            ),
        ));
    }

    let mut layers = Vec::with_capacity(n_layers);
    for li in 0..n_layers {
        let wpath = dir.join(format!("layer{li}_w.zten"));
        let (wdims, wdata) = read_zten(&wpath)?;
        let expected = [
            config.channels[li + 1],
            config.channels[li],
            config.kernels[li],
            config.kernels[li],
        ];
        if wdims != expected {
            return Err(Error::format(
                &wpath,
                8,
                format!("weight shape {wdims:?} does not match config {expected:?}"),
            ));
        }
        let (bdims, bias) = read_zten(&dir.join(format!("layer{li}_b.zten")))?;
        if bdims != [config.channels[li + 1]] {
            return Err(Error::format(
                &dir.join(format!("layer{li}_b.zten")),
                8,
                format!("bias shape {bdims:?} does not match config"),
            ));
        }
        let n = config.kernels[li];
        layers.push(ConvLayer {
            weights: Tensor::new(wdims, wdata)?,
            bias,
            spec: ConvSpec::new(n, 1, 1, (n - 1) / 2)?,
        });
    }
    Ok((ToyNet { layers }, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_scene, toy_camera};

    /// A scene whose two classes are separated by color alone.
    fn separable_scene(h: usize, w: usize) -> Scene {
        let mut rgb = vec![0.0; 3 * h * w];
        let mut labels = vec![0u8; h * w];
        for r in 0..h {
            for c in 0..w {
                let p = r * w + c;
                if c < w / 2 {
                    rgb[p] = 0.9; // red-ish: class 0
                    rgb[h * w + p] = 0.1;
                } else {
                    rgb[p] = 0.1; // green-ish: class 1
                    rgb[h * w + p] = 0.9;
                    labels[p] = 1;
                }
                rgb[2 * h * w + p] = 0.2;
            }
        }
        Scene {
            rgb: Tensor::new(vec![3, h, w], rgb).unwrap(),
            depth: DepthMap::constant(h, w, 2.0),
            labels: LabelMap::new(h, w, labels).unwrap(),
        }
    }

    fn two_class_config() -> ToyNetConfig {
        ToyNetConfig {
            channels: vec![3, 2],
            kernels: vec![1],
            learning_rate: 0.5,
            momentum: 0.0,
            batch_size: 1,
            epochs: 40,
            depth_guided: false,
            seed: 1,
            height: 16,
            width: 16,
        }
    }

    #[test]
    fn loss_decreases_on_a_separable_scene() {
        let config = two_class_config();
        let scene = separable_scene(16, 16);
        let k = toy_camera(16, 16);
        let outcome = train(&config, &[scene], &k).unwrap();
        let first = outcome.loss_trace[0];
        let last = *outcome.loss_trace.last().unwrap();
        assert!(
            last < first,
            "loss did not decrease: {first} -> {last}"
        );
        assert_eq!(outcome.loss_trace.len(), 40);
    }

    #[test]
    fn fixed_seed_gives_bit_identical_traces() {
        let mut config = ToyNetConfig::standard_benchmark();
        config.epochs = 2;
        let k = toy_camera(32, 32);
        let scenes: Vec<Scene> = (0..3).map(|s| generate_scene(s, &k, 32, 32)).collect();
        let a = train(&config, &scenes, &k).unwrap();
        let b = train(&config, &scenes, &k).unwrap();
        assert_eq!(a.loss_trace.len(), b.loss_trace.len());
        for (x, y) in a.loss_trace.iter().zip(&b.loss_trace) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (la, lb) in a.net.layers.iter().zip(&b.net.layers) {
            for (x, y) in la.weights.data().iter().zip(lb.weights.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn guidance_off_equals_explicit_zero_offsets() {
        let config = ToyNetConfig {
            depth_guided: false,
            ..ToyNetConfig::standard_benchmark()
        };
        let k = toy_camera(32, 32);
        let scene = generate_scene(5, &k, 32, 32);
        let net = ToyNet::init(&config).unwrap();

        let off_path = scene_offsets(&net, &scene.depth, &k, false).unwrap();
        let explicit: Vec<OffsetField> = net
            .layers
            .iter()
            .map(|l| {
                let (h1, w1) = l.spec.output_dims(32, 32).unwrap();
                OffsetField::zeros(l.spec.tap_count(), h1, w1)
            })
            .collect();
        let a = net.forward(&scene.rgb, &off_path).unwrap();
        let b = net.forward(&scene.rgb, &explicit).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn constant_depth_guided_net_matches_plain_net() {
        // Z_p defaults to the constant, so offsets vanish and the guided
        // net reduces to the plain convolution with the same weights.
        let config = ToyNetConfig::standard_benchmark();
        let k = toy_camera(32, 32);
        let mut scene = generate_scene(2, &k, 32, 32);
        scene.depth = DepthMap::constant(32, 32, 3.0);
        let net = ToyNet::init(&config).unwrap();

        let guided = scene_offsets(&net, &scene.depth, &k, true).unwrap();
        let plain = scene_offsets(&net, &scene.depth, &k, false).unwrap();
        let a = net.forward(&scene.rgb, &guided).unwrap();
        let b = net.forward(&scene.rgb, &plain).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn divergence_is_reported_with_the_step() {
        let config = ToyNetConfig {
            learning_rate: 1e12, // drive the logits into overflow
            epochs: 50,
            ..two_class_config()
        };
        let scene = separable_scene(16, 16);
        let k = toy_camera(16, 16);
        match train(&config, &[scene], &k) {
            Err(Error::Diverged { step }) => assert!(step > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn empty_scene_list_is_rejected() {
        let k = toy_camera(32, 32);
        assert!(train(&ToyNetConfig::default(), &[], &k).is_err());
    }

    #[test]
    fn model_roundtrip_preserves_f32_weights() {
        let dir = tempfile::tempdir().unwrap();
        let config = ToyNetConfig::standard_benchmark();
        let net = ToyNet::init(&config).unwrap();
        save_model(dir.path(), &net, &config).unwrap();
        let (back, back_config) = load_model(dir.path()).unwrap();
        assert_eq!(back_config, config);
        assert_eq!(back.layers.len(), net.layers.len());
        for (a, b) in net.layers.iter().zip(&back.layers) {
            for (x, y) in a.weights.data().iter().zip(b.weights.data()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
        // A second save of the reloaded net is byte-identical.
        let dir2 = tempfile::tempdir().unwrap();
        save_model(dir2.path(), &back, &back_config).unwrap();
        for li in 0..net.layers.len() {
            let f1 = std::fs::read(dir.path().join(format!("layer{li}_w.zten"))).unwrap();
            let f2 = std::fs::read(dir2.path().join(format!("layer{li}_w.zten"))).unwrap();
            assert_eq!(f1, f2);
        }
    }

    #[test]
    fn config_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.cfg");
        std::fs::write(
            &path,
            "# toy run\nchannels=3,4,3\nkernels=3,3\nlearning_rate=0.01\nmomentum=0.5\nepochs=2\ndepth_guided=off\n",
        )
        .unwrap();
        let config = ToyNetConfig::load(&path).unwrap();
        assert_eq!(config.channels, vec![3, 4, 3]);
        assert_eq!(config.momentum, 0.5);
        assert!(!config.depth_guided);
        assert_eq!(config.batch_size, 1); // default kept

        std::fs::write(&path, "unknown_key=3\n").unwrap();
        assert!(matches!(
            ToyNetConfig::load(&path),
            Err(Error::Format { .. })
        ));

        std::fs::write(&path, "momentum=1.5\n").unwrap();
        assert!(ToyNetConfig::load(&path).is_err());
    }
}
