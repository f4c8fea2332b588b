//! Wall-clock comparison of two-step and direct sampling.

use std::{collections::HashSet, time::Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spangraph_core::{
    sampler::{direct_sample, two_step_sample, EdgeProbabilities, SampleRequest},
    Graph,
};

use crate::error::Result;

/// Uniformly random simple graph with exactly `edges` edges on roughly
/// `edges / 4` nodes.
pub fn random_graph(edges: usize, seed: u64) -> Result<Graph> {
    let mut n = (edges / 4).max(2);
    while n * (n - 1) / 2 < edges {
        n += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(edges);
    let mut pairs = Vec::with_capacity(edges);
    while pairs.len() < edges {
        let (a, b) = (rng.random_range(0..n as u64), rng.random_range(0..n as u64));
        let e = (a.min(b), a.max(b));
        if a != b && seen.insert(e) {
            pairs.push(e);
        }
    }
    Ok(Graph::from_edges(n, pairs)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchSpec {
    pub edges: usize,
    pub s1: usize,
    pub s2: usize,
    pub runs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub two_step_ms: Vec<f64>,
    pub direct_ms: Vec<f64>,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

impl BenchResult {
    pub fn median_two_step_ms(&self) -> f64 {
        median(&self.two_step_ms)
    }

    pub fn median_direct_ms(&self) -> f64 {
        median(&self.direct_ms)
    }

    pub fn speedup(&self) -> f64 {
        self.median_direct_ms() / self.median_two_step_ms()
    }
}

/// Times `runs` calls of each sampler with vm weights at equal `s2`.
pub fn bench_sampling(spec: &BenchSpec) -> Result<BenchResult> {
    let g = random_graph(spec.edges, spec.seed)?;
    let probs = EdgeProbabilities::vm(&g)?;
    let mut out = BenchResult { two_step_ms: Vec::new(), direct_ms: Vec::new() };
    for run in 0..spec.runs as u64 {
        let seed = spec.seed.wrapping_add(run);
        let t = Instant::now();
        std::hint::black_box(two_step_sample(&probs, &SampleRequest { s1: spec.s1, s2: spec.s2, seed })?);
        out.two_step_ms.push(t.elapsed().as_secs_f64() * 1e3);
        let t = Instant::now();
        std::hint::black_box(direct_sample(&probs, spec.s2, seed)?);
        out.direct_ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    Ok(out)
}
