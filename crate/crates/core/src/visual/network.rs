use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use super::{EncoderConfig, Result, VisualError, IMAGE_CHANNELS};
use crate::clusters::BinaryClusterVector;
use crate::grad::{ops, Adam, Real, Tape, Tensor, Var};

const KERNEL: usize = 3;

/// How the dense head is initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadInit {
    /// Every head weight and bias is exactly zero: all outputs start at 0.5.
    Zero,
    /// He-uniform weights, zero bias.
    HeUniform,
}

/// Parameters of the encoder. Tensor order: `conv{i}.weight`, `conv{i}.bias`
/// for each stage, then `head.weight` `[N, C_last]` and `head.bias` `[N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    names: Vec<String>,
    params: Vec<Tensor<T>>,
    channels: Vec<usize>,
    n_clusters: usize,
}

/// Variables recorded by [`Network::forward_taped`].
#[derive(Debug, Clone)]
pub struct TapedForward {
    pub params: Vec<Var>,
    pub logits: Var,
    pub probs: Var,
}

fn he_uniform(rng: &mut Pcg64, shape: &[usize], fan_in: usize) -> Vec<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

impl<T: Real> Network<T> {
    /// Freshly initialised network; weights come from a PCG stream seeded by `seed`.
    pub fn new(config: &EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Pcg64::seed_from_u64(seed);
        let mut named = Vec::new();
        let mut in_ch = IMAGE_CHANNELS;
        for (i, &out_ch) in config.channels.iter().enumerate() {
            let shape = [out_ch, in_ch, KERNEL, KERNEL];
            let w = he_uniform(&mut rng, &shape, in_ch * KERNEL * KERNEL);
            named.push((format!("conv{i}.weight"), tensor(&shape, w)));
            named.push((format!("conv{i}.bias"), Tensor::zeros(&[out_ch])));
            in_ch = out_ch;
        }
        let head_shape = [config.n_clusters, in_ch];
        let head = match config.head_init {
            HeadInit::Zero => vec![0.0; config.n_clusters * in_ch],
            HeadInit::HeUniform => he_uniform(&mut rng, &head_shape, in_ch),
        };
        named.push(("head.weight".to_string(), tensor(&head_shape, head)));
        named.push(("head.bias".to_string(), Tensor::zeros(&[config.n_clusters])));
        Self::from_named(named)
    }

    /// Rebuild a network from named tensors, inferring the architecture.
    pub fn from_named(named: Vec<(String, Tensor<T>)>) -> Result<Self> {
        let bad = |msg: String| VisualError::Config(msg);
        if named.len() < 4 || named.len() % 2 != 0 {
            return Err(bad(format!("expected an even number (>= 4) of tensors, got {}", named.len())));
        }
        let stages = named.len() / 2 - 1;
        let mut channels = Vec::with_capacity(stages);
        let mut in_ch = IMAGE_CHANNELS;
        for i in 0..stages {
            let (wn, w) = &named[2 * i];
            let (bn, b) = &named[2 * i + 1];
            if *wn != format!("conv{i}.weight") || *bn != format!("conv{i}.bias") {
                return Err(bad(format!("unexpected tensor names {wn:?}, {bn:?} at stage {i}")));
            }
            let out_ch = *w.shape().first().unwrap_or(&0);
            if w.shape() != [out_ch, in_ch, KERNEL, KERNEL] || out_ch == 0 {
                return Err(bad(format!("{wn} has shape {:?}", w.shape())));
            }
            if b.shape() != [out_ch] {
                return Err(bad(format!("{bn} has shape {:?}, expected [{out_ch}]", b.shape())));
            }
            channels.push(out_ch);
            in_ch = out_ch;
        }
        let (wn, w) = &named[2 * stages];
        let (bn, b) = &named[2 * stages + 1];
        if wn != "head.weight" || bn != "head.bias" {
            return Err(bad(format!("expected head tensors, found {wn:?}, {bn:?}")));
        }
        let n_clusters = *w.shape().first().unwrap_or(&0);
        if w.shape() != [n_clusters, in_ch] || b.shape() != [n_clusters] || n_clusters < 2 {
            return Err(bad(format!(
                "head shapes {:?} / {:?} do not fit {in_ch} features",
                w.shape(),
                b.shape()
            )));
        }
        let (names, params) = named.into_iter().unzip();
        Ok(Self {
            names,
            params,
            channels,
            n_clusters,
        })
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn named_params(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn head_weights(&self) -> &Tensor<T> {
        &self.params[self.params.len() - 2]
    }

    pub fn head_bias(&self) -> &Tensor<T> {
        &self.params[self.params.len() - 1]
    }

    /// Same architecture and values in another precision.
    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            names: self.names.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
            channels: self.channels.clone(),
            n_clusters: self.n_clusters,
        }
    }

    /// Is this a network `config` would build (same widths and cluster count)?
    pub fn matches(&self, config: &EncoderConfig) -> bool {
        self.channels == config.channels && self.n_clusters == config.n_clusters
    }

    pub fn check_images(&self, images: &Tensor<T>) -> Result<()> {
        let shape = images.shape();
        let pools = self.channels.len() - 1;
        match *shape {
            [n, c, h, w] if n > 0 && c == IMAGE_CHANNELS && h == w && h > 0 && h % (1 << pools) == 0 => {
                Ok(())
            }
            _ => Err(VisualError::Images(format!(
                "expected [batch, {IMAGE_CHANNELS}, S, S] with S a multiple of {}, got {shape:?}",
                1 << pools
            ))),
        }
    }

    /// Final convolutional feature maps (after ReLU), `[batch, C_last, s, s]`.
    pub fn features(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_images(images)?;
        let stages = self.channels.len();
        let mut x = images.clone();
        for i in 0..stages {
            x = ops::conv2d(&x, &self.params[2 * i], &self.params[2 * i + 1], 1, 1)?;
            x = ops::relu(&x);
            if i + 1 < stages {
                x = ops::maxpool2(&x)?.0;
            }
        }
        Ok(x)
    }

    /// Pre-sigmoid outputs, `[batch, N]`.
    pub fn logits(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        let pooled = ops::global_avg_pool(&self.features(images)?)?;
        Ok(ops::linear(&pooled, self.head_weights(), self.head_bias())?)
    }

    /// Cluster probabilities, `[batch, N]`, strictly inside `(0, 1)`.
    pub fn forward(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(ops::sigmoid(&self.logits(images)?))
    }

    /// Record the forward pass on `tape`; parameters become trainable leaves.
    pub fn forward_taped(&self, tape: &mut Tape<T>, images: &Tensor<T>) -> Result<TapedForward> {
        self.check_images(images)?;
        let params: Vec<Var> = self.params.iter().map(|p| tape.param(p.clone())).collect();
        let stages = self.channels.len();
        let mut x = tape.constant(images.clone());
        for i in 0..stages {
            x = tape.conv2d(x, params[2 * i], params[2 * i + 1], 1, 1)?;
            x = tape.relu(x)?;
            if i + 1 < stages {
                x = tape.maxpool2(x)?;
            }
        }
        let pooled = tape.global_avg_pool(x)?;
        let logits = tape.linear(pooled, params[2 * stages], params[2 * stages + 1])?;
        let probs = tape.sigmoid(logits)?;
        Ok(TapedForward {
            params,
            logits,
            probs,
        })
    }
}

fn tensor<T: Real>(shape: &[usize], values: Vec<f64>) -> Tensor<T> {
    Tensor::from_vec(shape, values.into_iter().map(T::from_f64).collect()).expect("init shape")
}

/// Threshold one row of probabilities: bit `c` is set iff `probs[c] >= threshold`.
pub fn predict_clusters<T: Real>(probs: &[T], threshold: f64) -> BinaryClusterVector {
    BinaryClusterVector::from_bits(probs.iter().map(|p| p.as_f64() >= threshold).collect())
}

/// One optimisation step of the network toward `targets` under mean binary
/// cross entropy. Returns the loss before the update.
pub fn train_batch<T: Real>(
    images: &Tensor<T>,
    targets: &[BinaryClusterVector],
    net: &mut Network<T>,
    adam: &mut Adam<T>,
) -> Result<T> {
    let batch = images.shape().first().copied().unwrap_or(0);
    if targets.len() != batch {
        return Err(VisualError::TargetCount(targets.len(), batch));
    }
    let n = net.n_clusters();
    let mut target_data = Vec::with_capacity(batch * n);
    for t in targets {
        if t.len() != n {
            return Err(VisualError::Config(format!(
                "target vector of length {} for {n} clusters",
                t.len()
            )));
        }
        target_data.extend(t.bits().iter().map(|&b| if b { T::one() } else { T::zero() }));
    }
    let mut tape = Tape::new();
    let fwd = net.forward_taped(&mut tape, images)?;
    let targets = tape.constant(Tensor::from_vec(&[batch, n], target_data)?);
    let loss_var = tape.bce_loss(fwd.probs, targets)?;
    let loss = tape.value(loss_var)?.item().expect("scalar loss");
    let mut grads = tape.backward(loss_var)?;
    let grads: Vec<Tensor<T>> = fwd
        .params
        .iter()
        .map(|&v| grads.take(v).expect("parameter gradient"))
        .collect();
    adam.step(net.params_mut(), &grads)?;
    Ok(loss)
}
