//! Dense feed-forward classifier with ReLU hidden layers, inverted dropout and
//! a softmax output, trained by minibatch SGD with hand-written backprop.
//!
//! Matrices are row-per-example. Layer `l` maps `x ↦ x·W_l + b_l`, with `W_l`
//! of shape `(fan_in, fan_out)`. Every hidden layer is followed by ReLU and a
//! dropout mask; the output layer produces logits. The input of the output
//! layer is the embedding returned by [`Classifier::embeddings`].

mod checkpoint;
mod probs;

pub(crate) use probs::argmax as probs_argmax;
pub use probs::{McProbStack, ProbMatrix, ROW_SUM_TOL};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_field, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

/// Architecture of a classifier: `[input, hidden..., classes]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub layer_widths: Vec<usize>,
    pub dropout_rate: f64,
    #[serde(default)]
    pub activation: Activation,
    pub init_seed: u64,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(invalid_field(
                "layer_widths",
                "need at least an input and an output width",
            ));
        }
        if self.layer_widths.contains(&0) {
            return Err(invalid_field("layer_widths", "every width must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(invalid_field("dropout_rate", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_widths.last().expect("validated widths")
    }

    /// Width of the penultimate layer, i.e. the embedding size.
    pub fn embedding_dim(&self) -> usize {
        self.layer_widths[self.layer_widths.len() - 2]
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid_field("epochs", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid_field("batch_size", "must be positive"));
        }
        // Zero is accepted: it freezes the parameters, which is useful for probing.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid_field("learning_rate", "must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// Shape `(fan_in, fan_out)`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Output of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub logits: Array2<f64>,
    pub embeddings: Array2<f64>,
}

/// Parameter gradients, one entry per layer, shaped like [`Dense`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

/// Values kept from the forward pass for backprop.
struct Trace {
    /// Input fed to each layer (after ReLU and dropout for hidden layers).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Array2<f64>>,
    /// Inverted-dropout multipliers of each hidden layer, if dropout ran.
    masks: Vec<Option<Array2<f64>>>,
    logits: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    config: NetConfig,
    layers: Vec<Dense>,
}

impl Classifier {
    /// Uniform(±1/√fan_in) weights and zero biases, drawn from `config.init_seed`.
    pub fn new(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let layers = config
            .layer_widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Dense {
                    weights: Array2::from_shape_fn((fan_in, fan_out), |_| dist.sample(&mut rng)),
                    biases: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self { config, layers })
    }

    /// Builds a classifier from explicit parameters.
    pub fn from_layers(config: NetConfig, layers: Vec<Dense>) -> Result<Self> {
        config.validate()?;
        if layers.len() != config.layer_widths.len() - 1 {
            return Err(Error::Shape(format!(
                "expected {} layers, got {}",
                config.layer_widths.len() - 1,
                layers.len()
            )));
        }
        for (l, (layer, w)) in layers.iter().zip(config.layer_widths.windows(2)).enumerate() {
            if layer.weights.dim() != (w[0], w[1]) || layer.biases.len() != w[1] {
                return Err(Error::Shape(format!(
                    "layer {l} has weights {:?} and {} biases, expected ({}, {})",
                    layer.weights.dim(),
                    layer.biases.len(),
                    w[0],
                    w[1]
                )));
            }
            let finite = layer.weights.iter().chain(layer.biases.iter()).all(|v| v.is_finite());
            if !finite {
                return Err(Error::Numeric(format!("layer {l} has non-finite parameters")));
            }
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes()
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim()
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.config.input_width() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.config.input_width()
            )));
        }
        Ok(())
    }

    fn trace<R: Rng + ?Sized>(&self, x: ArrayView2<'_, f64>, mut rng: Option<&mut R>) -> Trace {
        let n_hidden = self.layers.len() - 1;
        let p = self.config.dropout_rate;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(n_hidden);
        let mut masks = Vec::with_capacity(n_hidden);
        let mut a = x.to_owned();
        for layer in &self.layers[..n_hidden] {
            let z = a.dot(&layer.weights) + &layer.biases;
            let mut h = z.mapv(|v| v.max(0.0));
            let mask = match rng.as_deref_mut() {
                Some(rng) if p > 0.0 => {
                    let keep = 1.0 / (1.0 - p);
                    let m = Array2::from_shape_fn(h.dim(), |_| if rng.random::<f64>() < p { 0.0 } else { keep });
                    h *= &m;
                    Some(m)
                }
                _ => None,
            };
            inputs.push(a);
            pre.push(z);
            masks.push(mask);
            a = h;
        }
        let last = &self.layers[n_hidden];
        let logits = a.dot(&last.weights) + &last.biases;
        inputs.push(a);
        Trace {
            inputs,
            pre,
            masks,
            logits,
        }
    }

    /// Backpropagates `delta = ∂L/∂logits` through a trace.
    ///
    /// Returns parameter gradients and `∂L/∂input`.
    fn backprop(&self, trace: &Trace, mut delta: Array2<f64>) -> (Gradients, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            grads.push(Dense {
                weights: trace.inputs[l].t().dot(&delta),
                biases: delta.sum_axis(Axis(0)),
            });
            let mut d_in = delta.dot(&layer.weights.t());
            if l > 0 {
                if let Some(mask) = &trace.masks[l - 1] {
                    d_in *= mask;
                }
                ndarray::Zip::from(&mut d_in).and(&trace.pre[l - 1]).for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = d_in;
        }
        grads.reverse();
        (Gradients { layers: grads }, delta)
    }

    /// Forward pass. With `rng` present each hidden unit is dropped with
    /// probability `dropout_rate` and survivors scaled by `1/(1-dropout_rate)`.
    pub fn forward<R: Rng + ?Sized>(&self, x: ArrayView2<'_, f64>, rng: Option<&mut R>) -> Result<ForwardOutput> {
        self.check_input(x)?;
        let mut trace = self.trace(x, rng);
        let embeddings = trace.inputs.pop().expect("at least one layer");
        Ok(ForwardOutput {
            logits: trace.logits,
            embeddings,
        })
    }

    /// Deterministic logits.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward::<ChaCha8Rng>(x, None)?.logits)
    }

    pub fn predict_prob(&self, x: ArrayView2<'_, f64>) -> Result<ProbMatrix> {
        ProbMatrix::from_logits(self.logits(x)?.view())
    }

    /// Most probable class per row, lowest index on ties.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(self.predict_prob(x)?.argmax())
    }

    /// Penultimate activations from a dropout-free pass.
    pub fn embeddings(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward::<ChaCha8Rng>(x, None)?.embeddings)
    }

    /// `n_drop` dropout-active passes, each softmaxed.
    pub fn mc_dropout_probs<R: Rng + ?Sized>(
        &self,
        x: ArrayView2<'_, f64>,
        n_drop: usize,
        rng: &mut R,
    ) -> Result<McProbStack> {
        if n_drop == 0 {
            return Err(invalid_field("n_drop", "must be positive"));
        }
        let passes = (0..n_drop)
            .map(|_| {
                let out = self.forward(x, Some(&mut *rng))?;
                ProbMatrix::from_logits(out.logits.view())
            })
            .collect::<Result<Vec<_>>>()?;
        McProbStack::new(passes)
    }

    /// Mean cross-entropy over the batch and its exact parameter gradients.
    ///
    /// Dropout is active iff `rng` is given.
    pub fn loss_and_gradients<R: Rng + ?Sized>(
        &self,
        x: ArrayView2<'_, f64>,
        y: &[usize],
        rng: Option<&mut R>,
    ) -> Result<(f64, Gradients)> {
        self.check_input(x)?;
        if x.nrows() != y.len() {
            return Err(Error::Shape(format!("{} rows but {} labels", x.nrows(), y.len())));
        }
        if x.nrows() == 0 {
            return Err(Error::Precondition("empty batch".into()));
        }
        let k = self.num_classes();
        if let Some(&bad) = y.iter().find(|&&c| c >= k) {
            return Err(Error::Precondition(format!("label {bad} outside [0, {k})")));
        }
        let trace = self.trace(x, rng);
        let n = x.nrows() as f64;
        let mut delta = Array2::zeros(trace.logits.dim());
        let mut loss = 0.0;
        for (i, row) in trace.logits.outer_iter().enumerate() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
            let log_z = max + sum.ln();
            loss += log_z - row[y[i]];
            for (c, &v) in row.iter().enumerate() {
                delta[[i, c]] = (v - log_z).exp() / n;
            }
            delta[[i, y[i]]] -= 1.0 / n;
        }
        let (grads, _) = self.backprop(&trace, delta);
        Ok((loss / n, grads))
    }

    /// Logits at a single input together with the Jacobian `∂logits/∂x`
    /// (shape `(classes, input_width)`), dropout off.
    pub fn logit_jacobian(&self, x: ArrayView1<'_, f64>) -> Result<(Array1<f64>, Array2<f64>)> {
        let x2 = x.insert_axis(Axis(0));
        self.check_input(x2)?;
        let k = self.num_classes();
        let trace = self.trace::<ChaCha8Rng>(x2, None);
        // Backprop an identity seed: one virtual row per class, sharing the
        // ReLU pattern of the single real example.
        let mut delta: Array2<f64> = Array2::eye(k);
        for l in (1..self.layers.len()).rev() {
            let mut d_in = delta.dot(&self.layers[l].weights.t());
            let pre = trace.pre[l - 1].row(0);
            for mut row in d_in.outer_iter_mut() {
                ndarray::Zip::from(&mut row).and(&pre).for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = d_in;
        }
        let jac = delta.dot(&self.layers[0].weights.t());
        Ok((trace.logits.row(0).to_owned(), jac))
    }

    /// Gradient of one class logit with respect to the input, dropout off.
    pub fn input_gradient(&self, x: ArrayView1<'_, f64>, target_class: usize) -> Result<Array1<f64>> {
        if target_class >= self.num_classes() {
            return Err(Error::Shape(format!(
                "class {target_class} outside [0, {})",
                self.num_classes()
            )));
        }
        let (_, jac) = self.logit_jacobian(x)?;
        Ok(jac.row(target_class).to_owned())
    }

    fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.weights.scaled_add(-lr, &g.weights);
            layer.biases.scaled_add(-lr, &g.biases);
        }
    }

    /// Minibatch SGD on mean cross-entropy with dropout active.
    ///
    /// Returns the trained copy and the mean training loss of each epoch.
    pub fn train(&self, x: ArrayView2<'_, f64>, y: &[usize], params: &TrainParams) -> Result<(Classifier, Vec<f64>)> {
        params.validate()?;
        self.check_input(x)?;
        if x.nrows() == 0 {
            return Err(Error::Precondition("no labeled examples to train on".into()));
        }
        let mut model = self.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        let mut history = Vec::with_capacity(params.epochs);
        for epoch in 0..params.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in order.chunks(params.batch_size) {
                let xb = x.select(Axis(0), batch);
                let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
                let (loss, grads) = model.loss_and_gradients(xb.view(), &yb, Some(&mut rng))?;
                total += loss * batch.len() as f64;
                model.sgd_step(&grads, params.learning_rate);
            }
            let mean = total / x.nrows() as f64;
            if !mean.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            history.push(mean);
        }
        Ok((model, history))
    }
}

#[cfg(test)]
mod tests;
