use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ArchitectureSpec, LearnerError, ParamVector};

/// Probability floor inside the cross-entropy log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Borrowed view of row-major features and their labels.
#[derive(Debug, Clone, Copy)]
pub struct LabeledBatch<'a> {
    features: &'a [f64],
    labels: &'a [usize],
    dim: usize,
}

impl<'a> LabeledBatch<'a> {
    pub fn new(features: &'a [f64], labels: &'a [usize], dim: usize) -> Result<Self, LearnerError> {
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(LearnerError::DimensionMismatch {
                expected: labels.len() * dim,
                actual: features.len(),
            });
        }
        Ok(LabeledBatch {
            features,
            labels,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    fn check_against(&self, arch: &ArchitectureSpec) -> Result<(), LearnerError> {
        if self.dim != arch.input_dim {
            return Err(LearnerError::DimensionMismatch {
                expected: arch.input_dim,
                actual: self.dim,
            });
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= arch.num_classes) {
            return Err(LearnerError::LabelOutOfRange {
                label: bad,
                num_classes: arch.num_classes,
            });
        }
        Ok(())
    }
}

/// Mini-batch SGD settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        if self.epochs == 0 {
            return Err(LearnerError::InvalidHyperparameter(
                "epochs must be at least 1".into(),
            ));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(LearnerError::InvalidHyperparameter(format!(
                "learning rate must be positive and finite, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(LearnerError::InvalidHyperparameter(
                "batch_size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Accuracy and mean cross-entropy on a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

/// Glorot-uniform weights, zero biases.
pub fn init_params<R: Rng + ?Sized>(arch: &ArchitectureSpec, rng: &mut R) -> ParamVector {
    let mut values = Vec::with_capacity(arch.param_count());
    for (fan_in, fan_out) in arch.layers() {
        let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
        values.extend((0..fan_in * fan_out).map(|_| rng.random_range(-s..=s)));
        values.extend(std::iter::repeat_n(0.0, fan_out));
    }
    ParamVector::new(*arch, values).expect("glorot init is finite and correctly sized")
}

/// out[o] = b[o] + sum_i w[o, i] x[i], with `w` row-major (fan_out x fan_in).
fn dense(weights: &[f64], bias: &[f64], x: &[f64], out: &mut [f64]) {
    let fan_in = x.len();
    for (o, slot) in out.iter_mut().enumerate() {
        let row = &weights[o * fan_in..(o + 1) * fan_in];
        *slot = bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z /= sum;
    }
}

fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Forward/backward workspace for one architecture.
struct Network<'p> {
    arch: ArchitectureSpec,
    params: &'p [f64],
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

impl<'p> Network<'p> {
    fn new(params: &'p ParamVector) -> Self {
        let arch = *params.arch();
        Network {
            arch,
            params: params.values(),
            hidden: vec![0.0; arch.hidden_dim.unwrap_or(0)],
            logits: vec![0.0; arch.num_classes],
        }
    }

    /// Fills `self.logits` (and `self.hidden` pre-activations then ReLU).
    fn forward(&mut self, x: &[f64]) {
        let d = self.arch.input_dim;
        let c = self.arch.num_classes;
        match self.arch.hidden_dim {
            None => {
                let (w, b) = self.params.split_at(d * c);
                dense(w, &b[..c], x, &mut self.logits);
            }
            Some(h) => {
                let (w1, rest) = self.params.split_at(d * h);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(h * c);
                dense(w1, b1, x, &mut self.hidden);
                for v in self.hidden.iter_mut() {
                    *v = v.max(0.0);
                }
                dense(w2, b2, &self.hidden, &mut self.logits);
            }
        }
    }

    /// Runs forward on `x`, adds the example's gradient into `grad` and
    /// returns its cross-entropy.
    fn accumulate(&mut self, x: &[f64], label: usize, grad: &mut [f64]) -> f64 {
        self.forward(x);
        softmax_in_place(&mut self.logits);
        let loss = -self.logits[label].max(PROB_FLOOR).ln();
        self.logits[label] -= 1.0; // now dL/dz
        let d = self.arch.input_dim;
        let c = self.arch.num_classes;
        match self.arch.hidden_dim {
            None => {
                let (gw, gb) = grad.split_at_mut(d * c);
                for (o, &dz) in self.logits.iter().enumerate() {
                    for (g, &v) in gw[o * d..(o + 1) * d].iter_mut().zip(x) {
                        *g += dz * v;
                    }
                    gb[o] += dz;
                }
            }
            Some(h) => {
                let w2 = &self.params[d * h + h..d * h + h + h * c];
                let (gw1, rest) = grad.split_at_mut(d * h);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(h * c);
                for (o, &dz) in self.logits.iter().enumerate() {
                    for (g, &a) in gw2[o * h..(o + 1) * h].iter_mut().zip(&self.hidden) {
                        *g += dz * a;
                    }
                    gb2[o] += dz;
                }
                for j in 0..h {
                    if self.hidden[j] <= 0.0 {
                        continue;
                    }
                    let dh: f64 = (0..c).map(|o| w2[o * h + j] * self.logits[o]).sum();
                    for (g, &v) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *g += dh * v;
                    }
                    gb1[j] += dh;
                }
            }
        }
        loss
    }
}

fn batch_loss_and_gradient(
    params: &ParamVector,
    batch: &LabeledBatch<'_>,
    rows: impl ExactSizeIterator<Item = usize>,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let n = rows.len() as f64;
    let mut net = Network::new(params);
    let mut loss = 0.0;
    for i in rows {
        loss += net.accumulate(batch.row(i), batch.label(i), grad);
    }
    grad.iter_mut().for_each(|g| *g /= n);
    loss / n
}

/// Mean cross-entropy over the batch and its gradient.
pub fn loss_and_gradient(
    params: &ParamVector,
    batch: &LabeledBatch<'_>,
) -> Result<(f64, Vec<f64>), LearnerError> {
    if batch.is_empty() {
        return Err(LearnerError::EmptyData);
    }
    batch.check_against(params.arch())?;
    let mut grad = vec![0.0; params.len()];
    let loss = batch_loss_and_gradient(params, batch, 0..batch.len(), &mut grad);
    Ok((loss, grad))
}

/// Runs `config.epochs` epochs of shuffled mini-batch SGD from `params`.
pub fn local_train<R: Rng + ?Sized>(
    params: &ParamVector,
    data: &LabeledBatch<'_>,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<ParamVector, LearnerError> {
    config.validate()?;
    if data.is_empty() {
        return Err(LearnerError::EmptyData);
    }
    data.check_against(params.arch())?;

    let mut current = params.clone();
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.batch_size) {
            let loss = batch_loss_and_gradient(&current, data, chunk.iter().copied(), &mut grad);
            if !loss.is_finite() {
                return Err(LearnerError::NonFiniteLoss { epoch });
            }
            for (v, g) in current.values.iter_mut().zip(&grad) {
                *v -= config.lr * g;
            }
            if current.values.iter().any(|v| !v.is_finite()) {
                return Err(LearnerError::NonFiniteLoss { epoch });
            }
        }
    }
    Ok(current)
}

/// Accuracy (ties go to the lowest class index) and mean cross-entropy.
pub fn evaluate(params: &ParamVector, data: &LabeledBatch<'_>) -> Result<Evaluation, LearnerError> {
    if data.is_empty() {
        return Err(LearnerError::EmptyData);
    }
    data.check_against(params.arch())?;
    let mut net = Network::new(params);
    let mut correct = 0usize;
    let mut loss = 0.0;
    for i in 0..data.len() {
        net.forward(data.row(i));
        if argmax_lowest(&net.logits) == data.label(i) {
            correct += 1;
        }
        softmax_in_place(&mut net.logits);
        loss -= net.logits[data.label(i)].max(PROB_FLOOR).ln();
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        loss: loss / n,
    })
}

/// Accuracy only; skips the softmax.
pub fn accuracy(params: &ParamVector, data: &LabeledBatch<'_>) -> Result<f64, LearnerError> {
    if data.is_empty() {
        return Err(LearnerError::EmptyData);
    }
    data.check_against(params.arch())?;
    let mut net = Network::new(params);
    let correct = (0..data.len())
        .filter(|&i| {
            net.forward(data.row(i));
            argmax_lowest(&net.logits) == data.label(i)
        })
        .count();
    Ok(correct as f64 / data.len() as f64)
}
