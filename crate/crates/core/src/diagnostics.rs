//! Empirical measurements of what spanning-subgraph training perturbs.
//!
//! - [`gradient_noise`]: difference between weight gradients on a subgraph and
//!   on the full graph at identical weights, plus the per-layer pre-activation
//!   difference `‖Z̃ − Z‖_F`.
//! - [`embedding_variance`]: Monte-Carlo variance of the inverse-probability
//!   estimator of the aggregated embedding `P · X W`.
//! - [`memory_proxy`]: peak directed-edge count held by a run.

use alloc::{format, vec, vec::Vec};

use rand::{seq::SliceRandom, Rng, SeedableRng};

use crate::{
    dense::Matrix,
    gnn::{forward, loss_and_backward, GnnModel},
    graph::{EdgeId, Graph, SpanningSubgraph},
    propagation::{build_propagation, PropagationMatrix},
    rng::StreamRng,
    sampler::EdgeProbabilities,
    Error, Result,
};

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseReport {
    pub epoch: usize,
    pub edge_ratio: f64,
    /// `‖∇W̃ − ∇W‖_F` per layer.
    pub noise_norms: Vec<f64>,
    /// `‖Z̃ − Z‖_F` per layer.
    pub z_diff_norms: Vec<f64>,
}

impl NoiseReport {
    pub fn at_epoch(mut self, epoch: usize) -> Self {
        self.epoch = epoch;
        self
    }

    /// Frobenius norm of the pre-activation difference across all layers.
    pub fn total_z_diff(&self) -> f64 {
        libm::sqrt(self.z_diff_norms.iter().map(|z| z * z).sum())
    }
}

/// Runs forward and backward on `p_full` and on `sub`'s matrix with the same
/// weights and reports the per-layer differences.
pub fn gradient_noise(
    model: &GnnModel,
    p_full: &PropagationMatrix,
    sub: &SpanningSubgraph<'_>,
    features: &Matrix,
    labels: &[Option<u32>],
    mask: &[bool],
) -> Result<NoiseReport> {
    let p_sub = build_propagation(sub, p_full.kind());
    let (logits, tape) = forward(model, p_full, features)?;
    let (_, grads) = loss_and_backward(model, &tape, &logits, labels, mask, p_full)?;
    let (logits_sub, tape_sub) = forward(model, &p_sub, features)?;
    let (_, grads_sub) = loss_and_backward(model, &tape_sub, &logits_sub, labels, mask, &p_sub)?;
    let noise_norms = grads_sub
        .iter()
        .zip(&grads)
        .map(|(a, b)| a.sub(b).map(|d| d.frobenius_norm()))
        .collect::<Result<Vec<_>>>()?;
    let z_diff_norms = tape_sub
        .pre_activations
        .iter()
        .zip(&tape.pre_activations)
        .map(|(a, b)| a.sub(b).map(|d| d.frobenius_norm()))
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseReport { epoch: 0, edge_ratio: sub.edge_ratio(), noise_norms, z_diff_norms })
}

#[derive(Debug, Clone)]
pub struct VarianceReport {
    /// Mean of the estimator over the Monte-Carlo draws (`n x d`).
    pub estimator_mean: Matrix,
    /// `E‖ξ − Eξ‖²_F`, estimated with the unbiased `M − 1` divisor.
    pub estimator_variance: f64,
    /// Standard error of `estimator_variance`.
    pub variance_std_error: f64,
    pub samples: usize,
    pub budget: usize,
}

/// Inclusion probabilities of a fixed-size-`k` design proportional to
/// `weights`: edges whose share would reach 1 are taken with certainty and the
/// rest is rescaled, until every probability is at most 1. Sums to `k`.
pub fn inclusion_probabilities(weights: &[f64], k: usize) -> Vec<f64> {
    let mut certain = vec![false; weights.len()];
    let mut pi = vec![0.0; weights.len()];
    loop {
        let remaining = k - certain.iter().filter(|&&c| c).count();
        let mass: f64 = weights.iter().zip(&certain).filter(|(_, &c)| !c).map(|(w, _)| w).sum();
        let mut promoted = false;
        for (i, &w) in weights.iter().enumerate() {
            if certain[i] {
                pi[i] = 1.0;
                continue;
            }
            pi[i] = if mass > 0.0 { remaining as f64 * w / mass } else { 0.0 };
            if pi[i] >= 1.0 {
                certain[i] = true;
                promoted = true;
            }
        }
        if !promoted {
            return pi;
        }
    }
}

/// Randomized systematic sampling: shuffle the edges, lay their inclusion
/// probabilities end to end, and take the edges hit by `r, r+1, …, r+k−1`
/// for a uniform `r ∈ [0, 1)`. Returns exactly `k` distinct edges, each with
/// marginal probability `pi[e]`.
pub fn systematic_sample<R: Rng>(pi: &[f64], k: usize, rng: &mut R) -> Vec<EdgeId> {
    let mut order: Vec<EdgeId> = (0..pi.len() as EdgeId).collect();
    order.shuffle(rng);
    let start: f64 = rng.random();
    let mut picked = Vec::with_capacity(k);
    let mut next = start;
    let mut acc = 0.0;
    for &e in &order {
        acc += pi[e as usize];
        if picked.len() < k && next < acc {
            picked.push(e);
            next += 1.0;
        }
    }
    // Σπ can land a hair under k; the last point then belongs to the tail.
    for &e in order.iter().rev() {
        if picked.len() >= k {
            break;
        }
        if pi[e as usize] > 0.0 && !picked.contains(&e) {
            picked.push(e);
        }
    }
    picked
}

/// Horvitz–Thompson estimate of `P · x̃` from one sampled edge set: self
/// loops are always counted, each sampled edge contributes both directions
/// scaled by `1 / π_e`.
pub fn ht_aggregate(g: &Graph, p: &PropagationMatrix, transformed: &Matrix, pi: &[f64], edges: &[EdgeId]) -> Matrix {
    let d = transformed.cols();
    let mut xi = Matrix::zeros(g.num_nodes(), d);
    for v in 0..g.num_nodes() {
        let w = p.get(v, v);
        for (o, &x) in xi.row_mut(v).iter_mut().zip(transformed.row(v)) {
            *o = w * x;
        }
    }
    for &e in edges {
        let (u, v) = g.edge(e);
        let (u, v) = (u as usize, v as usize);
        let inv = 1.0 / pi[e as usize];
        for (src, dst) in [(u, v), (v, u)] {
            let w = p.get(dst, src) * inv;
            for j in 0..d {
                xi[(dst, j)] += w * transformed[(src, j)];
            }
        }
    }
    xi
}

/// Samples `samples` spanning subgraphs of `budget` edges with inclusion
/// probabilities proportional to `probs` and reports the mean and total
/// variance of the aggregated-embedding estimator. `transformed` is the
/// node-feature matrix after the first layer's linear map.
pub fn embedding_variance(
    g: &Graph,
    p_full: &PropagationMatrix,
    probs: &EdgeProbabilities,
    budget: usize,
    samples: usize,
    transformed: &Matrix,
    seed: u64,
) -> Result<VarianceReport> {
    if samples < 2 {
        return Err(Error::Config(format!("need at least 2 Monte-Carlo samples, got {samples}")));
    }
    if budget == 0 || budget > g.num_edges() || probs.len() != g.num_edges() {
        return Err(Error::Request(format!(
            "budget {budget} invalid for {} edges ({} weights)",
            g.num_edges(),
            probs.len()
        )));
    }
    if transformed.rows() != g.num_nodes() {
        return Err(Error::Shape(format!("{} embedding rows for {} nodes", transformed.rows(), g.num_nodes())));
    }
    let pi = inclusion_probabilities(probs.weights(), budget);
    if let Some(e) = pi.iter().position(|&x| x <= 0.0) {
        return Err(Error::Weighting(format!("edge {e} has zero inclusion probability")));
    }
    let mut rng = StreamRng::seed_from_u64(seed);
    let draws: Vec<Matrix> = (0..samples)
        .map(|_| {
            let mut edges = systematic_sample(&pi, budget, &mut rng);
            edges.sort_unstable();
            ht_aggregate(g, p_full, transformed, &pi, &edges)
        })
        .collect();
    // Deviations are taken from the first draw so identical draws give an
    // exactly zero variance.
    let origin = draws[0].as_slice();
    let mut shift = vec![0.0; origin.len()];
    for x in &draws {
        for ((s, v), o) in shift.iter_mut().zip(x.as_slice()).zip(origin) {
            *s += v - o;
        }
    }
    let m = samples as f64;
    for s in &mut shift {
        *s /= m;
    }
    let sq: Vec<f64> = draws
        .iter()
        .map(|x| {
            x.as_slice()
                .iter()
                .zip(origin)
                .zip(&shift)
                .map(|((v, o), s)| {
                    let dev = (v - o) - s;
                    dev * dev
                })
                .sum()
        })
        .collect();
    let mean = Matrix::from_vec(
        g.num_nodes(),
        transformed.cols(),
        origin.iter().zip(&shift).map(|(o, s)| o + s).collect(),
    )?;
    let variance = sq.iter().sum::<f64>() / (m - 1.0);
    let sq_mean = sq.iter().sum::<f64>() / m;
    let sq_var = sq.iter().map(|s| (s - sq_mean) * (s - sq_mean)).sum::<f64>() / (m - 1.0);
    Ok(VarianceReport {
        estimator_mean: mean,
        estimator_variance: variance,
        variance_std_error: libm::sqrt(sq_var / m) * m / (m - 1.0),
        samples,
        budget,
    })
}

/// Input to the variance estimator: the features after the first layer's
/// linear map. SAGE layers use the neighbour half of the weight matrix.
pub fn first_layer_transform(model: &GnnModel, features: &Matrix) -> Result<Matrix> {
    let w = &model.weights()[0];
    if w.rows() == features.cols() {
        features.matmul(w)
    } else {
        let (_, neigh) = split_rows(w);
        features.matmul(&neigh)
    }
}

fn split_rows(w: &Matrix) -> (Matrix, Matrix) {
    let half = w.rows() / 2;
    let mut top = Matrix::zeros(half, w.cols());
    let mut bottom = Matrix::zeros(w.rows() - half, w.cols());
    for i in 0..w.rows() {
        if i < half {
            top.row_mut(i).copy_from_slice(w.row(i));
        } else {
            bottom.row_mut(i - half).copy_from_slice(w.row(i));
        }
    }
    (top, bottom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryProxy {
    /// Max over epochs of `2·|active| + |V|`.
    pub peak_directed_edges: usize,
    pub bytes_estimate: usize,
}

/// Peak directed-edge count (self-loops included) over a run's per-epoch
/// active edge counts.
pub fn memory_proxy(active_per_epoch: &[usize], num_nodes: usize, bytes_per_edge: usize) -> MemoryProxy {
    let peak = active_per_epoch.iter().map(|&a| 2 * a + num_nodes).max().unwrap_or(num_nodes);
    MemoryProxy { peak_directed_edges: peak, bytes_estimate: peak * bytes_per_edge }
}

/// Default per-edge intermediate cost: one `f64` message per hidden unit.
pub fn default_bytes_per_edge(hidden_dim: usize) -> usize {
    8 * hidden_dim
}
