//! Epoch-by-epoch growth of the spanning subgraph under an edge-ratio cap.
//!
//! Each epoch selects a batch of edges `ΔG`. If the current subgraph plus
//! `ΔG` would reach the cap, a fraction `beta` of the current edges is dropped
//! first; then `ΔG` is merged. Any overflow that remains after the merge is
//! trimmed from the fresh part of `ΔG` so the subgraph lands exactly on the
//! cap.

use alloc::{format, vec::Vec};

use rand::{seq::index, Rng};

use crate::{
    graph::{EdgeId, Graph, SpanningSubgraph},
    rng::{self, derive_seed, Purpose},
    sampler::{two_step_sample, EdgeProbabilities, SampleRequest, SamplerKind},
    Error, Result,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    /// Upper bound on `|E_s| / |E|`, in `(0, 1]`.
    pub alpha_up: f64,
    /// Fraction of the current edges dropped when the cap would be reached,
    /// in `[0, 1)`.
    pub beta: f64,
    pub s1: usize,
    pub s2: usize,
    pub sampler_kind: SamplerKind,
    pub epochs: usize,
    pub seed: u64,
}

impl ScheduleConfig {
    pub fn validate(&self, num_edges: usize) -> Result<()> {
        if !(self.alpha_up > 0.0 && self.alpha_up <= 1.0) {
            return Err(Error::Config(format!("alpha_up must be in (0, 1], got {}", self.alpha_up)));
        }
        if !(self.beta >= 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("beta must be in [0, 1), got {}", self.beta)));
        }
        if self.s2 == 0 || self.s2 > self.s1 || self.s1 > num_edges {
            return Err(Error::Config(format!(
                "need 0 < s2 <= s1 <= |E|, got s2={} s1={} |E|={num_edges}",
                self.s2, self.s1
            )));
        }
        if edge_cap(self.alpha_up, num_edges) == 0 {
            return Err(Error::Config(format!(
                "alpha_up={} allows no edge out of {num_edges}",
                self.alpha_up
            )));
        }
        Ok(())
    }

    pub fn cap(&self, num_edges: usize) -> usize {
        edge_cap(self.alpha_up, num_edges)
    }
}

/// Largest edge count `k` with `k / |E| <= alpha` when both sides are
/// evaluated in `f64`, so the ratio check downstream is exact.
pub fn edge_cap(alpha: f64, num_edges: usize) -> usize {
    if num_edges == 0 || alpha <= 0.0 {
        return 0;
    }
    let e = num_edges as f64;
    let mut k = (libm::floor(alpha * e) as usize).min(num_edges);
    while k > 0 && k as f64 / e > alpha {
        k -= 1;
    }
    while k < num_edges && (k + 1) as f64 / e <= alpha {
        k += 1;
    }
    k
}

#[derive(Debug, Clone)]
pub struct EpochState<'g> {
    pub epoch_index: usize,
    pub subgraph: SpanningSubgraph<'g>,
    pub edge_ratio: f64,
    pub dropped_this_epoch: usize,
    pub added_this_epoch: usize,
    /// Size of the batch selected this epoch.
    pub selected_this_epoch: usize,
    pub drop_branch: bool,
}

/// Starts a schedule from the edgeless spanning subgraph.
pub fn init_schedule<'g>(g: &'g Graph, cfg: &ScheduleConfig) -> Result<EpochState<'g>> {
    cfg.validate(g.num_edges())?;
    Ok(EpochState {
        epoch_index: 0,
        subgraph: SpanningSubgraph::empty(g),
        edge_ratio: 0.0,
        dropped_this_epoch: 0,
        added_this_epoch: 0,
        selected_this_epoch: 0,
        drop_branch: false,
    })
}

/// Removes `⌊beta · |active|⌋` active edges chosen uniformly. Returns the
/// number removed.
pub fn random_drop<R: Rng>(sub: &mut SpanningSubgraph<'_>, beta: f64, rng: &mut R) -> usize {
    let n = sub.len();
    let k = (libm::floor(beta * n as f64) as usize).min(n);
    if k == 0 {
        return 0;
    }
    let victims: Vec<EdgeId> = index::sample(rng, n, k).into_iter().map(|i| sub.active()[i]).collect();
    for e in victims {
        sub.remove(e);
    }
    k
}

/// Merges `delta` into `sub` without exceeding `cap` edges. When the fresh
/// edges do not all fit, a uniform subset of them is kept. Returns the number
/// of edges added.
pub fn graph_update<R: Rng>(sub: &mut SpanningSubgraph<'_>, delta: &[EdgeId], cap: usize, rng: &mut R) -> usize {
    let mut fresh: Vec<EdgeId> = delta.iter().copied().filter(|&e| !sub.contains(e)).collect();
    fresh.sort_unstable();
    fresh.dedup();
    let room = cap.saturating_sub(sub.len());
    if fresh.len() > room {
        let keep: Vec<EdgeId> = index::sample(rng, fresh.len(), room).into_iter().map(|i| fresh[i]).collect();
        fresh = keep;
    }
    for &e in &fresh {
        sub.insert(e);
    }
    fresh.len()
}

/// Advances the schedule by one epoch: select, maybe drop, merge.
pub fn step_epoch(state: &mut EpochState<'_>, probs: &EdgeProbabilities, cfg: &ScheduleConfig) -> Result<()> {
    if state.epoch_index >= cfg.epochs {
        return Err(Error::Config(format!("schedule of {} epochs is exhausted", cfg.epochs)));
    }
    let g = state.subgraph.graph();
    let cap = cfg.cap(g.num_edges());
    let epoch = state.epoch_index as u64;
    let req = SampleRequest { s1: cfg.s1, s2: cfg.s2, seed: derive_seed(cfg.seed, epoch, Purpose::Sample) };
    let delta = two_step_sample(probs, &req)?.edges;

    state.drop_branch = state.subgraph.len() + delta.len() >= cap;
    state.dropped_this_epoch = if state.drop_branch {
        random_drop(&mut state.subgraph, cfg.beta, &mut rng::stream(cfg.seed, epoch, Purpose::Drop))
    } else {
        0
    };
    state.added_this_epoch =
        graph_update(&mut state.subgraph, &delta, cap, &mut rng::stream(cfg.seed, epoch, Purpose::Truncate));
    state.selected_this_epoch = delta.len();
    state.epoch_index += 1;
    state.edge_ratio = state.subgraph.edge_ratio();
    assert!(state.subgraph.len() <= cap, "edge cap violated");
    Ok(())
}
