//! Full-batch GNN with hand-derived backpropagation.
//!
//! A GCN layer computes `Z = P H W`; a SAGE-mean layer computes
//! `Z = [H ∥ P H] W` with `P` the row-mean matrix (self-loop included in the
//! mean). ReLU follows every layer but the last. Both layers cache the
//! aggregated input `A` (`P H`, or `[H ∥ P H]`), so `∇W = Aᵀ δ` and the
//! incoming gradient `Pᵀ (δ Wᵀ)` (split across the concatenation for SAGE)
//! flows to the previous layer through the ReLU mask.

use alloc::{format, vec, vec::Vec};

use rand::{Rng, SeedableRng};

use crate::{
    dense::Matrix,
    propagation::{PropagationKind, PropagationMatrix},
    rng::{derive_seed, Purpose, StreamRng},
    Error, Result,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerType {
    Gcn,
    SageMean,
}

impl LayerType {
    /// The propagation matrix a layer of this type expects.
    pub fn propagation_kind(self) -> PropagationKind {
        match self {
            LayerType::Gcn => PropagationKind::GcnSymmetric,
            LayerType::SageMean => PropagationKind::MeanRow,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerType::Gcn => "gcn",
            LayerType::SageMean => "sage",
        }
    }
}

impl core::str::FromStr for LayerType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(LayerType::Gcn),
            "sage" | "sage-mean" => Ok(LayerType::SageMean),
            other => Err(Error::Config(format!("unknown model {other:?} (expected gcn or sage)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    layer_type: LayerType,
    weights: Vec<Matrix>,
}

impl GnnModel {
    /// Wraps explicit weights, checking that their shapes chain.
    pub fn new(layer_type: LayerType, weights: Vec<Matrix>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Shape("a model needs at least one layer".into()));
        }
        let factor = fan_in_factor(layer_type);
        for (l, pair) in weights.windows(2).enumerate() {
            if pair[1].rows() != factor * pair[0].cols() {
                return Err(Error::Shape(format!(
                    "layer {} expects {} inputs but layer {l} produces {}",
                    l + 1,
                    pair[1].rows(),
                    pair[0].cols()
                )));
            }
        }
        if !weights[0].rows().is_multiple_of(factor) {
            return Err(Error::Shape(format!("first SAGE layer has odd input width {}", weights[0].rows())));
        }
        Ok(Self { layer_type, weights })
    }

    /// Glorot-uniform initialization: `U(-√(6/(fan_in+fan_out)), +…)`.
    pub fn init(
        layer_type: LayerType,
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        num_layers: usize,
        seed: u64,
    ) -> Result<Self> {
        if num_layers == 0 {
            return Err(Error::Config("num_layers must be at least 1".into()));
        }
        let mut rng = StreamRng::seed_from_u64(derive_seed(seed, 0, Purpose::Init));
        let factor = fan_in_factor(layer_type);
        let mut weights = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            let d_in = if l == 0 { in_dim } else { hidden_dim };
            let d_out = if l + 1 == num_layers { out_dim } else { hidden_dim };
            let (rows, cols) = (factor * d_in, d_out);
            let limit = libm::sqrt(6.0 / (rows + cols) as f64);
            let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
            weights.push(Matrix::from_vec(rows, cols, data)?);
        }
        Self::new(layer_type, weights)
    }

    pub fn layer_type(&self) -> LayerType {
        self.layer_type
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].rows() / fan_in_factor(self.layer_type)
    }

    pub fn out_dim(&self) -> usize {
        self.weights.last().unwrap().cols()
    }
}

fn fan_in_factor(t: LayerType) -> usize {
    match t {
        LayerType::Gcn => 1,
        LayerType::SageMean => 2,
    }
}

/// Intermediates cached by [`forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct BackwardTape {
    /// Aggregated input of each layer.
    pub aggregated: Vec<Matrix>,
    /// Pre-activation output `Z` of each layer.
    pub pre_activations: Vec<Matrix>,
}

pub fn forward(model: &GnnModel, p: &PropagationMatrix, features: &Matrix) -> Result<(Matrix, BackwardTape)> {
    if features.cols() != model.in_dim() {
        return Err(Error::Shape(format!(
            "features have {} columns, model expects {}",
            features.cols(),
            model.in_dim()
        )));
    }
    let last = model.num_layers() - 1;
    let mut aggregated = Vec::with_capacity(model.num_layers());
    let mut pre_activations = Vec::with_capacity(model.num_layers());
    let mut h = features.clone();
    for (l, w) in model.weights.iter().enumerate() {
        let a = match model.layer_type {
            LayerType::Gcn => p.spmm(&h)?,
            LayerType::SageMean => h.hconcat(&p.spmm(&h)?)?,
        };
        let z = a.matmul(w)?;
        h = if l < last { z.map(relu) } else { z.clone() };
        aggregated.push(a);
        pre_activations.push(z);
    }
    Ok((h, BackwardTape { aggregated, pre_activations }))
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Mean softmax cross-entropy over the masked nodes and `∂L/∂logits`.
/// Rows outside the mask get a zero gradient.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[Option<u32>], mask: &[bool]) -> Result<(f64, Matrix)> {
    if labels.len() != logits.rows() || mask.len() != logits.rows() {
        return Err(Error::Shape(format!(
            "{} logit rows, {} labels, {} mask entries",
            logits.rows(),
            labels.len(),
            mask.len()
        )));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::Training("empty training mask".into()));
    }
    let scale = 1.0 / count as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for v in (0..logits.rows()).filter(|&v| mask[v]) {
        let y = labels[v].ok_or_else(|| Error::Training(format!("training node {v} has no label")))? as usize;
        if y >= logits.cols() {
            return Err(Error::Training(format!("label {y} of node {v} exceeds {} classes", logits.cols())));
        }
        let row = logits.row(v);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&z| libm::exp(z - max)).sum();
        let log_sum = max + libm::log(sum);
        loss += log_sum - row[y];
        let g = grad.row_mut(v);
        for (j, (gj, &z)) in g.iter_mut().zip(row).enumerate() {
            let softmax = libm::exp(z - log_sum);
            *gj = scale * (softmax - if j == y { 1.0 } else { 0.0 });
        }
    }
    Ok((loss * scale, grad))
}

/// Loss and per-layer weight gradients for one forward pass.
pub fn loss_and_backward(
    model: &GnnModel,
    tape: &BackwardTape,
    logits: &Matrix,
    labels: &[Option<u32>],
    train_mask: &[bool],
    p: &PropagationMatrix,
) -> Result<(f64, Vec<Matrix>)> {
    let (loss, mut delta) = softmax_cross_entropy(logits, labels, train_mask)?;
    let layers = model.num_layers();
    let mut grads = vec![Matrix::zeros(0, 0); layers];
    for l in (0..layers).rev() {
        grads[l] = tape.aggregated[l].t_matmul(&delta)?;
        if l == 0 {
            break;
        }
        let d_agg = delta.matmul_t(&model.weights[l])?;
        let d_h = match model.layer_type {
            LayerType::Gcn => p.spmm_t(&d_agg)?,
            LayerType::SageMean => {
                let (own, neigh) = d_agg.hsplit(d_agg.cols() / 2);
                own.add(&p.spmm_t(&neigh)?)?
            }
        };
        let z = &tape.pre_activations[l - 1];
        let mut next = d_h;
        for (d, &zi) in next.as_mut_slice().iter_mut().zip(z.as_slice()) {
            if zi <= 0.0 {
                *d = 0.0;
            }
        }
        delta = next;
    }
    Ok((loss, grads))
}

/// Model plus plain gradient-descent state.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: GnnModel,
    pub learning_rate: f64,
    pub losses: Vec<f64>,
}

impl TrainState {
    pub fn new(model: GnnModel, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {learning_rate}")));
        }
        Ok(Self { model, learning_rate, losses: Vec::new() })
    }

    /// `W ← W − η ∇W`. Rejects non-finite gradients without touching the
    /// weights.
    pub fn sgd_step(&mut self, grads: &[Matrix]) -> Result<()> {
        if grads.len() != self.model.num_layers() {
            return Err(Error::Shape(format!("{} gradients for {} layers", grads.len(), self.model.num_layers())));
        }
        for (l, (g, w)) in grads.iter().zip(&self.model.weights).enumerate() {
            if g.shape() != w.shape() {
                return Err(Error::Shape(format!("gradient {l} is {:?}, weight is {:?}", g.shape(), w.shape())));
            }
            if !g.is_finite() {
                return Err(Error::Numerical(format!("non-finite gradient in layer {l}")));
            }
        }
        let eta = self.learning_rate;
        for (g, w) in grads.iter().zip(&mut self.model.weights) {
            for (wi, gi) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *wi -= eta * gi;
            }
        }
        Ok(())
    }

    /// One forward/backward/update on `p`. Returns the training loss.
    pub fn train_step(
        &mut self,
        p: &PropagationMatrix,
        features: &Matrix,
        labels: &[Option<u32>],
        train_mask: &[bool],
    ) -> Result<f64> {
        let (logits, tape) = forward(&self.model, p, features)?;
        let (loss, grads) = loss_and_backward(&self.model, &tape, &logits, labels, train_mask, p)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("loss is {loss}")));
        }
        self.sgd_step(&grads)?;
        self.losses.push(loss);
        Ok(loss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Number of evaluated nodes.
    pub count: usize,
}

/// Accuracy and macro-F1 of `logits` over the masked nodes. Macro-F1 averages
/// over every class that appears among the true or predicted labels.
pub fn classification_metrics(logits: &Matrix, labels: &[Option<u32>], mask: &[bool]) -> Evaluation {
    let classes = logits.cols();
    let predicted = logits.argmax_rows();
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    let mut correct = 0;
    let mut count = 0;
    for v in (0..logits.rows()).filter(|&v| mask[v]) {
        let Some(y) = labels[v] else { continue };
        let (y, p) = (y as usize, predicted[v]);
        count += 1;
        if y == p {
            correct += 1;
            tp[y] += 1;
        } else {
            fp[p] += 1;
            if y < classes {
                fn_[y] += 1;
            }
        }
    }
    if count == 0 {
        return Evaluation { accuracy: 0.0, macro_f1: 0.0, count: 0 };
    }
    let mut f1_sum = 0.0;
    let mut present = 0;
    for c in 0..classes {
        if tp[c] + fp[c] + fn_[c] == 0 {
            continue;
        }
        present += 1;
        f1_sum += 2.0 * tp[c] as f64 / (2 * tp[c] + fp[c] + fn_[c]) as f64;
    }
    Evaluation { accuracy: correct as f64 / count as f64, macro_f1: f1_sum / present as f64, count }
}

/// Evaluates `model` on the full-graph propagation matrix.
pub fn evaluate(
    model: &GnnModel,
    p_full: &PropagationMatrix,
    features: &Matrix,
    labels: &[Option<u32>],
    mask: &[bool],
) -> Result<Evaluation> {
    let (logits, _) = forward(model, p_full, features)?;
    Ok(classification_metrics(&logits, labels, mask))
}
