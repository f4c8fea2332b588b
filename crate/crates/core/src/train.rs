//! Epoch loop tying the scheduler to the GNN engine, plus the two baselines.

use alloc::{format, vec::Vec};

use rand::seq::index;

use crate::{
    diagnostics::{self, NoiseReport},
    gnn::{classification_metrics, forward, GnnModel, LayerType, TrainState},
    graph::{Dataset, EdgeId, SpanningSubgraph, Split},
    propagation::{build_propagation, PropagationMatrix},
    rng::{self, Purpose},
    sampler::EdgeProbabilities,
    scheduler::{init_schedule, step_epoch, EpochState, ScheduleConfig},
    Error, Result,
};

/// How the training graph of each epoch is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// Grow a spanning subgraph under an edge-ratio cap.
    SpanGnn(ScheduleConfig),
    /// Train on an independent uniform `1 − beta` share of the original edges
    /// every epoch.
    DropEdge { beta: f64, seed: u64 },
    /// Train on the full graph every epoch.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub layer_type: LayerType,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

/// Deterministic per-epoch results. Timings are left to the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub val_macro_f1: f64,
    pub edge_ratio: f64,
    pub active_edges: usize,
    /// Max of `2·|active| + |V|` over the epochs so far.
    pub peak_directed_edges: usize,
}

enum Plan<'d> {
    Span { cfg: ScheduleConfig, probs: EdgeProbabilities, state: EpochState<'d> },
    DropEdge { beta: f64, seed: u64, sub: SpanningSubgraph<'d> },
    Full,
}

pub struct Session<'d> {
    data: &'d Dataset,
    plan: Plan<'d>,
    train: TrainState,
    p_full: PropagationMatrix,
    train_mask: Vec<bool>,
    val_mask: Vec<bool>,
    epoch: usize,
    selected: bool,
    peak: usize,
}

impl<'d> Session<'d> {
    pub fn new(data: &'d Dataset, variant: Variant, model: ModelConfig) -> Result<Self> {
        let g = &data.graph;
        let kind = model.layer_type.propagation_kind();
        let p_full = PropagationMatrix::full(g, kind);
        let plan = match variant {
            Variant::SpanGnn(cfg) => {
                let state = init_schedule(g, &cfg)?;
                let probs = match cfg.sampler_kind {
                    crate::SamplerKind::Gnr => EdgeProbabilities::gnr(g, &p_full)?,
                    other => EdgeProbabilities::for_graph(g, other, kind)?,
                };
                Plan::Span { cfg, probs, state }
            }
            Variant::DropEdge { beta, seed } => {
                if !(0.0..1.0).contains(&beta) {
                    return Err(Error::Config(format!("beta must be in [0, 1), got {beta}")));
                }
                Plan::DropEdge { beta, seed, sub: SpanningSubgraph::empty(g) }
            }
            Variant::Full => Plan::Full,
        };
        let classes = data.num_classes();
        if classes == 0 {
            return Err(Error::Training("dataset has no labeled nodes".into()));
        }
        let net = GnnModel::init(
            model.layer_type,
            data.features.cols(),
            model.hidden_dim,
            classes,
            model.num_layers,
            model.seed,
        )?;
        let train_mask = data.mask(Split::Train);
        if !train_mask.iter().any(|&m| m) {
            return Err(Error::Training("empty training split".into()));
        }
        Ok(Self {
            data,
            plan,
            train: TrainState::new(net, model.learning_rate)?,
            p_full,
            train_mask,
            val_mask: data.mask(Split::Val),
            epoch: 0,
            selected: false,
            peak: 0,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn model(&self) -> &GnnModel {
        &self.train.model
    }

    pub fn train_state(&self) -> &TrainState {
        &self.train
    }

    pub fn full_propagation(&self) -> &PropagationMatrix {
        &self.p_full
    }

    /// Sampling distribution of a SpanGNN session.
    pub fn probabilities(&self) -> Option<&EdgeProbabilities> {
        match &self.plan {
            Plan::Span { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// The edge set the next [`Session::train_epoch`] trains on, or `None`
    /// for the full-graph baseline.
    pub fn subgraph(&self) -> Option<&SpanningSubgraph<'d>> {
        match &self.plan {
            Plan::Span { state, .. } => Some(&state.subgraph),
            Plan::DropEdge { sub, .. } => Some(sub),
            Plan::Full => None,
        }
    }

    pub fn schedule_state(&self) -> Option<&EpochState<'d>> {
        match &self.plan {
            Plan::Span { state, .. } => Some(state),
            _ => None,
        }
    }

    pub fn active_edges(&self) -> usize {
        self.subgraph().map_or(self.data.graph.num_edges(), |s| s.len())
    }

    /// Chooses this epoch's training graph.
    pub fn select_edges(&mut self) -> Result<()> {
        let epoch = self.epoch;
        match &mut self.plan {
            Plan::Span { cfg, probs, state } => step_epoch(state, probs, cfg)?,
            Plan::DropEdge { beta, seed, sub } => {
                let g = &self.data.graph;
                let e = g.num_edges();
                let keep = e - libm::floor(*beta * e as f64) as usize;
                let mut rng = rng::stream(*seed, epoch as u64, Purpose::DropEdge);
                let picked = index::sample(&mut rng, e, keep).into_iter().map(|i| i as EdgeId);
                *sub = SpanningSubgraph::with_edges(g, picked)?;
            }
            Plan::Full => {}
        }
        self.selected = true;
        Ok(())
    }

    /// One full-batch update on the selected graph, then evaluation on the
    /// full graph.
    pub fn train_epoch(&mut self) -> Result<EpochRecord> {
        if !self.selected {
            self.select_edges()?;
        }
        let data = self.data;
        let p_sub = self.subgraph().map(|s| build_propagation(s, self.p_full.kind()));
        let p = p_sub.as_ref().unwrap_or(&self.p_full);
        let loss = self.train.train_step(p, &data.features, &data.labels, &self.train_mask)?;

        let (logits, _) = forward(&self.train.model, &self.p_full, &data.features)?;
        let train_eval = classification_metrics(&logits, &data.labels, &self.train_mask);
        let val_eval = classification_metrics(&logits, &data.labels, &self.val_mask);

        let active = self.active_edges();
        self.peak = self.peak.max(2 * active + data.graph.num_nodes());
        let edge_ratio = if data.graph.num_edges() == 0 { 0.0 } else { active as f64 / data.graph.num_edges() as f64 };
        let record = EpochRecord {
            epoch: self.epoch,
            loss,
            train_acc: train_eval.accuracy,
            val_acc: val_eval.accuracy,
            val_macro_f1: val_eval.macro_f1,
            edge_ratio,
            active_edges: active,
            peak_directed_edges: self.peak,
        };
        self.epoch += 1;
        self.selected = false;
        Ok(record)
    }

    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        self.select_edges()?;
        self.train_epoch()
    }

    /// Gradient noise of the current training graph at the current weights.
    pub fn gradient_noise(&self) -> Result<NoiseReport> {
        let full;
        let sub = match self.subgraph() {
            Some(s) => s,
            None => {
                full = SpanningSubgraph::full(&self.data.graph);
                &full
            }
        };
        Ok(diagnostics::gradient_noise(
            &self.train.model,
            &self.p_full,
            sub,
            &self.data.features,
            &self.data.labels,
            &self.train_mask,
        )?
        .at_epoch(self.epoch))
    }
}
