//! Synthetic labeled graphs for desk-scale experiments.

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use spangraph_core::{Dataset, Graph, Matrix, Split};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphKind {
    /// Stochastic block model with contiguous, equal-sized blocks.
    Sbm { p_in: f64, p_out: f64 },
    /// Barabási–Albert growth, `m` edges per arriving node.
    PreferentialAttachment { m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub kind: GraphKind,
    pub nodes: usize,
    pub classes: usize,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian noise around each class centroid.
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.classes < 2 || self.nodes < self.classes {
            return fail(format!("need nodes >= classes >= 2, got nodes={} classes={}", self.nodes, self.classes));
        }
        if self.feature_dim == 0 {
            return fail("feature_dim must be positive".into());
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return fail(format!("noise must be finite and non-negative, got {}", self.noise));
        }
        match self.kind {
            GraphKind::Sbm { p_in, p_out } => {
                for (name, p) in [("p_in", p_in), ("p_out", p_out)] {
                    if !(0.0..=1.0).contains(&p) {
                        return fail(format!("{name} must be in [0, 1], got {p}"));
                    }
                }
            }
            GraphKind::PreferentialAttachment { m } => {
                if m == 0 || m >= self.nodes {
                    return fail(format!("m must be in [1, nodes), got {m}"));
                }
            }
        }
        Ok(())
    }
}

/// Block of node `i` when `n` nodes are cut into `k` contiguous blocks.
fn block_of(i: usize, n: usize, k: usize) -> usize {
    i * k / n
}

fn block_end(b: usize, n: usize, k: usize) -> usize {
    // first node whose block exceeds b
    ((b + 1) * n).div_ceil(k)
}

/// Appends `(u, v)` for each `v` in `range` independently with probability
/// `p`, jumping between hits with geometric gaps.
fn bernoulli_run(rng: &mut ChaCha8Rng, u: usize, range: std::ops::Range<usize>, p: f64, out: &mut Vec<(u64, u64)>) {
    if p <= 0.0 || range.is_empty() {
        return;
    }
    if p >= 1.0 {
        out.extend(range.map(|v| (u as u64, v as u64)));
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut v = range.start;
    loop {
        let r: f64 = rng.random();
        let skip = ((1.0 - r).ln() / log_q).floor();
        if skip >= (range.end - v) as f64 {
            return;
        }
        v += skip as usize;
        out.push((u as u64, v as u64));
        v += 1;
    }
}

fn sbm_edges(rng: &mut ChaCha8Rng, n: usize, k: usize, p_in: f64, p_out: f64) -> Vec<(u64, u64)> {
    let mut pairs = Vec::new();
    for u in 0..n {
        let end = block_end(block_of(u, n, k), n, k);
        bernoulli_run(rng, u, u + 1..end, p_in, &mut pairs);
        bernoulli_run(rng, u, end..n, p_out, &mut pairs);
    }
    pairs
}

fn preferential_edges(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<(u64, u64)> {
    let mut pairs = Vec::new();
    // every endpoint occurrence, so a uniform pick is degree-proportional
    let mut ends: Vec<u64> = Vec::new();
    for u in 0..=m {
        for v in u + 1..=m {
            pairs.push((u as u64, v as u64));
            ends.extend([u as u64, v as u64]);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for u in m + 1..n {
        targets.clear();
        while targets.len() < m {
            let t = ends[rng.random_range(0..ends.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            pairs.push((t, u as u64));
            ends.extend([t, u as u64]);
        }
    }
    pairs
}

/// Per class: 60% train, 20% val, the rest test, after a shuffle.
fn stratified_split(rng: &mut ChaCha8Rng, labels: &[Option<u32>], classes: usize) -> Vec<Split> {
    let mut splits = vec![Split::None; labels.len()];
    for c in 0..classes as u32 {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Some(c)).collect();
        members.shuffle(rng);
        let train = members.len() * 6 / 10;
        let val = members.len() * 2 / 10;
        for (j, &i) in members.iter().enumerate() {
            splits[i] = if j < train {
                Split::Train
            } else if j < train + val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    splits
}

/// Generates a dataset. SBM labels are block ids; preferential-attachment
/// labels are assigned round-robin by arrival order. Features are a
/// standard-normal class centroid plus `noise`-scaled Gaussian noise.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let (n, k, d) = (spec.nodes, spec.classes, spec.feature_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (pairs, labels): (_, Vec<Option<u32>>) = match spec.kind {
        GraphKind::Sbm { p_in, p_out } => {
            (sbm_edges(&mut rng, n, k, p_in, p_out), (0..n).map(|i| Some(block_of(i, n, k) as u32)).collect())
        }
        GraphKind::PreferentialAttachment { m } => {
            (preferential_edges(&mut rng, n, m), (0..n).map(|i| Some((i % k) as u32)).collect())
        }
    };
    let graph = Graph::from_edges(n, pairs)?;
    let centroids: Vec<f64> = (0..k * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut x = Matrix::zeros(n, d);
    for (i, label) in labels.iter().enumerate() {
        let c = label.unwrap() as usize;
        for (j, v) in x.row_mut(i).iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = centroids[c * d + j] + spec.noise * z;
        }
    }
    let splits = stratified_split(&mut rng, &labels, k);
    Ok(Dataset::new(graph, x, labels, splits)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sbm(nodes: usize, classes: usize, p_in: f64, p_out: f64) -> SynthSpec {
        SynthSpec { kind: GraphKind::Sbm { p_in, p_out }, nodes, classes, feature_dim: 4, noise: 1.0, seed: 7 }
    }

    #[test]
    fn blocks_partition_nodes() {
        for (n, k) in [(10, 3), (7, 7), (2000, 4), (11, 2)] {
            let mut seen = vec![0; k];
            for i in 0..n {
                let b = block_of(i, n, k);
                assert!(i < block_end(b, n, k) && (b == 0 || i >= block_end(b - 1, n, k)));
                seen[b] += 1;
            }
            assert!(seen.iter().all(|&s| s >= n / k && s <= n.div_ceil(k)));
        }
    }

    #[test]
    fn dense_sbm_gives_disjoint_cliques() {
        let d = generate(&sbm(10, 2, 1.0, 0.0)).unwrap();
        assert_eq!(d.graph.num_edges(), 2 * 10);
        assert!(d.graph.edges().iter().all(|&(u, v)| d.labels[u as usize] == d.labels[v as usize]));
    }

    #[test]
    fn sbm_edge_density_matches_probabilities() {
        let d = generate(&sbm(400, 2, 0.1, 0.01)).unwrap();
        let (mut within, mut across) = (0.0f64, 0.0f64);
        for &(u, v) in d.graph.edges() {
            if d.labels[u as usize] == d.labels[v as usize] {
                within += 1.0;
            } else {
                across += 1.0;
            }
        }
        let pairs_in = 2.0 * 200.0 * 199.0 / 2.0;
        assert!((within / pairs_in - 0.1).abs() < 0.01);
        assert!((across / 40_000.0 - 0.01).abs() < 0.003);
    }

    #[test]
    fn preferential_attachment_edge_count() {
        let spec = SynthSpec { kind: GraphKind::PreferentialAttachment { m: 3 }, ..sbm(100, 4, 0.0, 0.0) };
        let d = generate(&spec).unwrap();
        assert_eq!(d.graph.num_edges(), 6 + 3 * (100 - 4));
    }

    #[test]
    fn split_is_stratified() {
        let d = generate(&sbm(1000, 4, 0.01, 0.001)).unwrap();
        for c in 0..4 {
            let count = |s| (0..1000).filter(|&i| d.labels[i] == Some(c) && d.splits[i] == s).count();
            assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (150, 50, 50));
        }
    }

    #[test]
    fn invalid_specs_are_config_errors() {
        assert_eq!(generate(&sbm(4, 5, 0.5, 0.1)).unwrap_err().exit_code(), 1);
        assert!(generate(&sbm(4, 1, 0.5, 0.1)).is_err());
        assert!(generate(&sbm(4, 2, 1.5, 0.1)).is_err());
    }
}
