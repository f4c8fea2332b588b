use proptest::prelude::*;
use spangraph_core::{
    sampler::{direct_sample, two_step_sample, EdgeProbabilities, SampleRequest, SamplerKind},
    Graph,
};

fn path4() -> Graph {
    Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap()
}

fn frequencies<F: FnMut(u64) -> Vec<u32>>(num_edges: usize, trials: u64, mut draw: F) -> Vec<f64> {
    let mut counts = vec![0u64; num_edges];
    let mut total = 0u64;
    for t in 0..trials {
        for e in draw(t) {
            counts[e as usize] += 1;
            total += 1;
        }
    }
    counts.into_iter().map(|c| c as f64 / total as f64).collect()
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Exact single-draw frequencies of the two-step sampler with `s2 = 1`,
/// averaging the weighted pick over every equally likely uniform pool.
fn two_step_exact(weights: &[f64], s1: usize) -> Vec<f64> {
    let m = weights.len();
    let mut freq = vec![0.0; m];
    let mut pools = 0usize;
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != s1 {
            continue;
        }
        pools += 1;
        let members: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        let mass: f64 = members.iter().map(|&i| weights[i]).sum();
        for &i in &members {
            freq[i] += weights[i] / mass;
        }
    }
    freq.iter().map(|f| f / pools as f64).collect()
}

#[test]
fn direct_single_draws_follow_vm_distribution() {
    let probs = EdgeProbabilities::vm(&path4()).unwrap();
    let f = frequencies(3, 300_000, |t| direct_sample(&probs, 1, t).unwrap().edges);
    for (got, want) in f.iter().zip([0.375, 0.25, 0.375]) {
        assert!((got - want).abs() < 0.005, "{f:?}");
    }
}

#[test]
fn two_step_with_whole_pool_on_path() {
    let probs = EdgeProbabilities::vm(&path4()).unwrap();
    let exact = two_step_exact(probs.weights(), 3);
    assert_eq!(exact, vec![0.375, 0.25, 0.375]);
    let f = frequencies(3, 300_000, |t| two_step_sample(&probs, &SampleRequest { s1: 3, s2: 1, seed: t }).unwrap().edges);
    assert!((f[1] - 0.25).abs() < 0.005, "{f:?}");
}

#[test]
fn two_step_with_partial_pool_matches_enumeration() {
    let probs = EdgeProbabilities::vm(&path4()).unwrap();
    let exact = two_step_exact(probs.weights(), 2);
    // pools {01},{02},{12}: edge 1 gets 1/2.5 in two of three pools
    assert!((exact[1] - 2.0 / 7.5).abs() < 1e-15);
    let f = frequencies(3, 300_000, |t| two_step_sample(&probs, &SampleRequest { s1: 2, s2: 1, seed: t }).unwrap().edges);
    for (got, want) in f.iter().zip(&exact) {
        assert!((got - want).abs() < 0.005, "{f:?} vs {exact:?}");
    }
}

#[test]
fn equal_weights_give_uniform_marginals() {
    let g = Graph::from_edges(51, (0..50u64).map(|i| (i, i + 1))).unwrap();
    let probs = EdgeProbabilities::from_weights(SamplerKind::Vm, vec![2.0; 50]).unwrap();
    let uniform = vec![1.0 / 50.0; 50];
    let d = frequencies(g.num_edges(), 100_000, |t| direct_sample(&probs, 10, t).unwrap().edges);
    assert!(tv(&d, &uniform) < 0.01);
    let s = frequencies(g.num_edges(), 100_000, |t| {
        two_step_sample(&probs, &SampleRequest { s1: 25, s2: 10, seed: t }).unwrap().edges
    });
    assert!(tv(&s, &uniform) < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn samples_are_distinct_sized_and_reproducible(
        weights in prop::collection::vec(0.0f64..5.0, 1..80),
        s1_frac in 0.0f64..=1.0,
        s2_frac in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(weights.iter().any(|&w| w > 0.0));
        let m = weights.len();
        let s1 = 1 + ((m - 1) as f64 * s1_frac) as usize;
        let s2 = 1 + ((s1 - 1) as f64 * s2_frac) as usize;
        let probs = EdgeProbabilities::from_weights(SamplerKind::Gnr, weights).unwrap();
        let total: f64 = probs.normalized().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);

        let req = SampleRequest { s1, s2, seed };
        let a = two_step_sample(&probs, &req).unwrap();
        prop_assert_eq!(&a, &two_step_sample(&probs, &req).unwrap());
        let mut e = a.edges.clone();
        e.sort_unstable();
        e.dedup();
        prop_assert_eq!(e.len(), s2);
        prop_assert!(e.iter().all(|&x| (x as usize) < m));

        let d = direct_sample(&probs, s2, seed).unwrap();
        prop_assert_eq!(&d, &direct_sample(&probs, s2, seed).unwrap());
        let mut e = d.edges.clone();
        e.sort_unstable();
        e.dedup();
        prop_assert_eq!(e.len(), s2);
    }
}
