//! Quality-aware edge sampling.
//!
//! Two edge distributions are supported besides uniform:
//!
//! - **vm** (variance-minimizing): `w(u,v) = 1/deg(u) + 1/deg(v)` with
//!   original-graph degrees. Edges between low-degree nodes carry the most
//!   information about their endpoints' aggregations.
//! - **gnr** (gradient-noise-reducing): each directed pair `(v,u)` is weighted
//!   by `‖P[:,u]‖₂`, the column norm of the full-graph propagation matrix at
//!   the destination. A canonical edge sums its two directions.
//!
//! Weights are computed once from the original graph. Draws are without
//! replacement within a call and use a prefix-sum array built over the
//! candidate set on each call, so [`direct_sample`] pays `O(|E|)` per call
//! while [`two_step_sample`] only pays for its uniform pool.

use alloc::{format, vec, vec::Vec};

use rand::{seq::index, Rng, SeedableRng};

use crate::{
    graph::{EdgeId, Graph},
    propagation::{column_norms, PropagationKind, PropagationMatrix},
    rng::StreamRng,
    Error, Result,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Vm,
    Gnr,
    Uniform,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Vm => "vm",
            SamplerKind::Gnr => "gnr",
            SamplerKind::Uniform => "uniform",
        }
    }
}

impl core::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vm" => Ok(SamplerKind::Vm),
            "gnr" => Ok(SamplerKind::Gnr),
            "uniform" => Ok(SamplerKind::Uniform),
            other => Err(Error::Config(format!("unknown sampler {other:?} (expected vm, gnr or uniform)"))),
        }
    }
}

/// Unnormalized per-edge sampling weights over the canonical edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProbabilities {
    kind: SamplerKind,
    weights: Vec<f64>,
    total: f64,
}

impl EdgeProbabilities {
    pub fn from_weights(kind: SamplerKind, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if let Some((e, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::Weighting(format!("edge {e} has invalid weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Weighting("all edge weights are zero".into()));
        }
        Ok(Self { kind, weights, total })
    }

    /// Variance-minimizing weights from original-graph degrees.
    pub fn vm(g: &Graph) -> Result<Self> {
        let w = g
            .edges()
            .iter()
            .map(|&(u, v)| 1.0 / g.degree(u) as f64 + 1.0 / g.degree(v) as f64)
            .collect();
        Self::from_weights(SamplerKind::Vm, w)
    }

    /// Gradient-noise-reducing weights; `p` must span the full edge set of `g`.
    pub fn gnr(g: &Graph, p: &PropagationMatrix) -> Result<Self> {
        if g.num_edges() == 0 {
            return Err(Error::EmptyDistribution);
        }
        if !p.covers(g) {
            return Err(Error::Consistency(format!(
                "expected the full {}-edge matrix, got one over {} edges",
                g.num_edges(),
                p.num_edges()
            )));
        }
        let norms = column_norms(p);
        let w = g.edges().iter().map(|&(u, v)| norms[u as usize] + norms[v as usize]).collect();
        Self::from_weights(SamplerKind::Gnr, w)
    }

    pub fn uniform(g: &Graph) -> Result<Self> {
        Self::from_weights(SamplerKind::Uniform, vec![1.0; g.num_edges()])
    }

    /// Builds the distribution of `kind`; gnr uses the full-graph matrix of
    /// `propagation`.
    pub fn for_graph(g: &Graph, kind: SamplerKind, propagation: PropagationKind) -> Result<Self> {
        match kind {
            SamplerKind::Vm => Self::vm(g),
            SamplerKind::Gnr => Self::gnr(g, &PropagationMatrix::full(g, propagation)),
            SamplerKind::Uniform => Self::uniform(g),
        }
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn probability(&self, e: EdgeId) -> f64 {
        self.weights[e as usize] / self.total
    }

    /// Normalized probabilities; they sum to 1.
    pub fn normalized(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w / self.total).collect()
    }
}

/// Sizes of the two sampling steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRequest {
    /// Uniform pool size.
    pub s1: usize,
    /// Weighted draws taken from the pool.
    pub s2: usize,
    pub seed: u64,
}

impl SampleRequest {
    pub fn validate(&self, num_edges: usize) -> Result<()> {
        if self.s2 == 0 || self.s2 > self.s1 || self.s1 > num_edges {
            return Err(Error::Request(format!(
                "need 0 < s2 <= s1 <= |E|, got s2={} s1={} |E|={num_edges}",
                self.s2, self.s1
            )));
        }
        Ok(())
    }
}

/// Distinct edges drawn by one sampling call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    /// Selected canonical edge ids, in draw order.
    pub edges: Vec<EdgeId>,
    /// How many of `edges` came from the uniform fallback fill.
    pub uniform_fill: usize,
}

/// Two-step selection: a uniform pool of `s1` distinct edges, then `s2`
/// distinct weighted draws from the pool.
pub fn two_step_sample(probs: &EdgeProbabilities, req: &SampleRequest) -> Result<Sample> {
    req.validate(probs.len())?;
    let mut rng = StreamRng::seed_from_u64(req.seed);
    let pool = index::sample(&mut rng, probs.len(), req.s1).into_vec();
    let pool_weights: Vec<f64> = pool.iter().map(|&e| probs.weights[e]).collect();
    let (picked, uniform_fill) = weighted_distinct(&pool_weights, req.s2, &mut rng);
    Ok(Sample { edges: picked.into_iter().map(|i| pool[i] as EdgeId).collect(), uniform_fill })
}

/// Direct weighted selection of `s2` distinct edges from the whole edge set.
pub fn direct_sample(probs: &EdgeProbabilities, s2: usize, seed: u64) -> Result<Sample> {
    if s2 > probs.len() {
        return Err(Error::Request(format!("s2={s2} exceeds |E|={}", probs.len())));
    }
    let mut rng = StreamRng::seed_from_u64(seed);
    let (picked, uniform_fill) = weighted_distinct(&probs.weights, s2, &mut rng);
    Ok(Sample { edges: picked.into_iter().map(|i| i as EdgeId).collect(), uniform_fill })
}

/// Inclusive prefix sums of `weights`.
pub fn prefix_sums(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// Draws `count` distinct indices proportionally to `weights` by binary search
/// over the prefix sums, rejecting repeats. After `100 * count` consecutive
/// rejections the remainder is filled uniformly from unpicked indices.
fn weighted_distinct<R: Rng>(weights: &[f64], count: usize, rng: &mut R) -> (Vec<usize>, usize) {
    debug_assert!(count <= weights.len());
    let cumulative = prefix_sums(weights);
    let total = cumulative.last().copied().unwrap_or(0.0);
    let mut taken = vec![false; weights.len()];
    let mut picked = Vec::with_capacity(count);
    let max_failures = 100 * count;
    let mut failures = 0;
    while picked.len() < count && total > 0.0 {
        let r = rng.random::<f64>() * total;
        let i = cumulative.partition_point(|&c| c <= r);
        if i == weights.len() {
            // r rounded up to the total
            continue;
        }
        if taken[i] {
            failures += 1;
            if failures > max_failures {
                break;
            }
            continue;
        }
        taken[i] = true;
        picked.push(i);
        failures = 0;
    }
    let missing = count - picked.len();
    if missing > 0 {
        log::warn!(
            "weighted sampling stalled after {} of {count} distinct picks; filling {missing} uniformly",
            picked.len()
        );
        let rest: Vec<usize> = (0..weights.len()).filter(|&i| !taken[i]).collect();
        for k in index::sample(rng, rest.len(), missing) {
            picked.push(rest[k]);
        }
    }
    (picked, missing)
}
