//! Training runs and variant comparisons.

use std::{fs, path::Path, str::FromStr, time::Instant};

use spangraph_core::{
    diagnostics::{default_bytes_per_edge, embedding_variance, first_layer_transform, memory_proxy, MemoryProxy},
    rng::{derive_seed, mix64, Purpose},
    sampler::EdgeProbabilities,
    scheduler::edge_cap,
    train::{EpochRecord, ModelConfig, Session, Variant},
    Dataset, GnnModel, SamplerKind, ScheduleConfig,
};

use crate::{
    config::{Baseline, DataSource, RunConfig},
    error::{Error, Result},
    io, metrics, synth,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochTiming {
    pub epoch: usize,
    pub sampling_ms: u64,
    pub train_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagRow {
    pub epoch: usize,
    pub noise_norms: Vec<f64>,
    pub z_diff_norm: f64,
    pub var_xi: f64,
    pub peak_edges: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub label: String,
    pub records: Vec<EpochRecord>,
    pub timings: Vec<EpochTiming>,
    pub diagnostics: Vec<DiagRow>,
    pub model: GnnModel,
    pub memory: MemoryProxy,
}

/// One entry of a comparison, e.g. `spangnn-vm@0.3`, `dropedge@0.7`, `full`.
/// The number after `@` is `alpha_up` for SpanGNN and `beta` for DropEdge;
/// without it the run configuration's value is used.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSpec {
    pub label: String,
    pub baseline: Baseline,
    pub sampler: Option<SamplerKind>,
    pub param: Option<f64>,
}

impl FromStr for VariantSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad variant {s:?}"));
        let (name, param) = match s.split_once('@') {
            Some((n, p)) => (n, Some(p.parse::<f64>().map_err(|_| bad())?)),
            None => (s, None),
        };
        let (baseline, sampler) = match name.split_once('-') {
            Some(("spangnn", k)) => (Baseline::SpanGnn, Some(k.parse().map_err(|_| bad())?)),
            None => (name.parse()?, None),
            _ => return Err(bad()),
        };
        if baseline == Baseline::Full && param.is_some() {
            return Err(bad());
        }
        Ok(VariantSpec { label: s.to_string(), baseline, sampler, param })
    }
}

impl VariantSpec {
    pub fn from_config(cfg: &RunConfig) -> Self {
        let label = match cfg.baseline {
            Baseline::SpanGnn => format!("spangnn-{}", cfg.sampler.name()),
            Baseline::DropEdge => "dropedge".into(),
            Baseline::Full => "full".into(),
        };
        VariantSpec { label, baseline: cfg.baseline, sampler: None, param: None }
    }

    /// Concrete variant for a graph with `num_edges` edges. Unset `s2`
    /// defaults to a tenth of the cap and unset `s1` to ten times `s2`.
    pub fn resolve(&self, cfg: &RunConfig, num_edges: usize, seed: u64) -> Result<Variant> {
        Ok(match self.baseline {
            Baseline::SpanGnn => {
                let alpha_up = self.param.unwrap_or(cfg.alpha_up);
                let cap = edge_cap(alpha_up, num_edges);
                let s2 = cfg.s2.unwrap_or((cap / 10).max(1)).min(num_edges.max(1));
                let s1 = cfg.s1.unwrap_or(10 * s2).min(num_edges.max(1)).max(s2);
                let sched = ScheduleConfig {
                    alpha_up,
                    beta: cfg.beta,
                    s1,
                    s2,
                    sampler_kind: self.sampler.unwrap_or(cfg.sampler),
                    epochs: cfg.epochs,
                    seed,
                };
                sched.validate(num_edges)?;
                Variant::SpanGnn(sched)
            }
            Baseline::DropEdge => Variant::DropEdge { beta: self.param.unwrap_or(cfg.beta), seed },
            Baseline::Full => Variant::Full,
        })
    }
}

pub fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.data {
        DataSource::Files(paths) => io::load_graph(paths),
        DataSource::Generate(spec) => synth::generate(spec),
    }
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn diagnose(session: &Session<'_>, data: &Dataset, cfg: &RunConfig, record: &EpochRecord, seed: u64) -> Result<DiagRow> {
    let noise = session.gradient_noise()?;
    let budget = session.active_edges();
    let full = budget == data.graph.num_edges();
    let var_xi = if budget == 0 || full {
        0.0
    } else {
        let uniform;
        let probs = match session.probabilities() {
            Some(p) => p,
            None => {
                uniform = EdgeProbabilities::uniform(&data.graph)?;
                &uniform
            }
        };
        let x = first_layer_transform(session.model(), &data.features)?;
        let seed = derive_seed(seed, record.epoch as u64, Purpose::Diagnostics);
        embedding_variance(&data.graph, session.full_propagation(), probs, budget, cfg.var_samples, &x, seed)?
            .estimator_variance
    };
    Ok(DiagRow {
        epoch: record.epoch,
        z_diff_norm: noise.total_z_diff(),
        noise_norms: noise.noise_norms,
        var_xi,
        peak_edges: record.peak_directed_edges,
    })
}

/// Runs one variant for `cfg.epochs` epochs. Diagnostics are taken every
/// `cfg.diag_every` epochs and at the last epoch when `with_diagnostics`.
pub fn execute(data: &Dataset, cfg: &RunConfig, spec: &VariantSpec, seed: u64, with_diagnostics: bool) -> Result<RunOutput> {
    let variant = spec.resolve(cfg, data.graph.num_edges(), seed)?;
    let model = ModelConfig {
        layer_type: cfg.layer_type,
        hidden_dim: cfg.hidden_dim,
        num_layers: cfg.num_layers,
        learning_rate: cfg.learning_rate,
        seed,
    };
    let mut session = Session::new(data, variant, model)?;
    let mut out = RunOutput {
        label: spec.label.clone(),
        records: Vec::with_capacity(cfg.epochs),
        timings: Vec::with_capacity(cfg.epochs),
        diagnostics: Vec::new(),
        model: session.model().clone(),
        memory: memory_proxy(&[], 0, 0),
    };
    for epoch in 0..cfg.epochs {
        let t0 = Instant::now();
        session.select_edges()?;
        let sampling_ms = elapsed_ms(t0);
        let t1 = Instant::now();
        let record = session.train_epoch()?;
        let train_ms = elapsed_ms(t1);
        if !record.loss.is_finite() {
            return Err(spangraph_core::Error::Numerical(format!("non-finite loss at epoch {epoch}")).into());
        }
        log::debug!("{} epoch {epoch}: loss {:.4} val_acc {:.4} ratio {:.3}", spec.label, record.loss, record.val_acc, record.edge_ratio);
        if with_diagnostics && ((epoch + 1) % cfg.diag_every == 0 || epoch + 1 == cfg.epochs) {
            out.diagnostics.push(diagnose(&session, data, cfg, &record, seed)?);
        }
        out.records.push(record);
        out.timings.push(EpochTiming { epoch, sampling_ms, train_ms });
    }
    let active: Vec<usize> = out.records.iter().map(|r| r.active_edges).collect();
    out.memory = memory_proxy(&active, data.graph.num_nodes(), default_bytes_per_edge(cfg.hidden_dim));
    out.model = session.model().clone();
    Ok(out)
}

/// Training seed of a comparison entry: a function of the run seed and the
/// label, so repeated labels reproduce each other.
pub fn variant_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a
    let h = label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    mix64(seed ^ h)
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))
}

/// Single run: `metrics.csv`, `timings.csv` and `model.spgw` under `cfg.out`.
pub fn cmd_train(cfg: &RunConfig) -> Result<RunOutput> {
    let data = load_data(cfg)?;
    let spec = VariantSpec::from_config(cfg);
    let run = execute(&data, cfg, &spec, cfg.seed, false)?;
    prepare_out(&cfg.out)?;
    metrics::write_run(&cfg.out, &run)?;
    io::write_checkpoint(&cfg.out.join("model.spgw"), &run.model)?;
    Ok(run)
}

/// Runs every variant in sequence on the same data.
pub fn cmd_compare(cfg: &RunConfig, variants: &[VariantSpec]) -> Result<Vec<RunOutput>> {
    if variants.len() < 2 {
        return Err(Error::Config("compare needs at least two variants".into()));
    }
    let data = load_data(cfg)?;
    let runs = variants
        .iter()
        .map(|v| {
            log::info!("running {}", v.label);
            execute(&data, cfg, v, variant_seed(cfg.seed, &v.label), true)
        })
        .collect::<Result<Vec<_>>>()?;
    prepare_out(&cfg.out)?;
    metrics::write_comparison(&cfg.out, &runs)?;
    Ok(runs)
}
