use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spangraph_core::{
    gnn::{forward, loss_and_backward, softmax_cross_entropy, GnnModel, LayerType, TrainState},
    Graph, Matrix, PropagationMatrix,
};

const EPS: f64 = 1e-5;

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let mut pairs = Vec::new();
    for u in 0..n as u64 {
        for v in u + 1..n as u64 {
            if rng.random_bool(0.3) {
                pairs.push((u, v));
            }
        }
    }
    Graph::from_edges(n, pairs).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

struct Instance {
    model: GnnModel,
    p: PropagationMatrix,
    x: Matrix,
    labels: Vec<Option<u32>>,
    mask: Vec<bool>,
}

fn instance(seed: u64, layer_type: LayerType, layers: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(5..=20);
    let g = random_graph(&mut rng, n);
    let p = PropagationMatrix::full(&g, layer_type.propagation_kind());
    let (d_in, hidden, classes) = (3, 4, 3);
    let model = GnnModel::init(layer_type, d_in, hidden, classes, layers, seed).unwrap();
    let x = random_matrix(&mut rng, n, d_in);
    let labels = (0..n).map(|_| Some(rng.random_range(0..classes as u32))).collect();
    let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
    mask[0] = true;
    Instance { model, p, x, labels, mask }
}

fn loss_at(inst: &Instance, model: &GnnModel) -> f64 {
    let (logits, _) = forward(model, &inst.p, &inst.x).unwrap();
    softmax_cross_entropy(&logits, &inst.labels, &inst.mask).unwrap().0
}

/// Central finite differences of the loss with respect to every weight.
fn numerical_gradients(inst: &Instance) -> Vec<Matrix> {
    let mut probe = inst.model.clone();
    let mut out = Vec::new();
    for l in 0..probe.num_layers() {
        let (rows, cols) = probe.weights()[l].shape();
        let mut g = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let orig = probe.weights()[l][(i, j)];
                probe.weights_mut()[l][(i, j)] = orig + EPS;
                let up = loss_at(inst, &probe);
                probe.weights_mut()[l][(i, j)] = orig - EPS;
                let down = loss_at(inst, &probe);
                probe.weights_mut()[l][(i, j)] = orig;
                g[(i, j)] = (up - down) / (2.0 * EPS);
            }
        }
        out.push(g);
    }
    out
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn check(layer_type: LayerType, layers: usize, seeds: std::ops::Range<u64>) {
    for seed in seeds {
        let inst = instance(seed, layer_type, layers);
        let (logits, tape) = forward(&inst.model, &inst.p, &inst.x).unwrap();
        let (_, analytic) = loss_and_backward(&inst.model, &tape, &logits, &inst.labels, &inst.mask, &inst.p).unwrap();
        let numeric = numerical_gradients(&inst);
        for (l, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
            for (k, (&x, &y)) in a.as_slice().iter().zip(n.as_slice()).enumerate() {
                assert!(
                    rel_err(x, y) < 1e-4,
                    "{layer_type:?} layers={layers} seed={seed} layer {l} entry {k}: analytic {x} numeric {y}"
                );
            }
        }
    }
}

#[test]
fn gcn_gradients_match_finite_differences() {
    for layers in 1..=3 {
        check(LayerType::Gcn, layers, 0..8);
    }
}

#[test]
fn sage_gradients_match_finite_differences() {
    for layers in 1..=3 {
        check(LayerType::SageMean, layers, 100..108);
    }
}

#[test]
fn two_steps_equal_one_summed_step_only_for_constant_gradients() {
    // Gradients that do not depend on the weights compose additively.
    let w0 = Matrix::from_rows(&[&[0.5, -1.0], &[2.0, 0.25]]).unwrap();
    let g1 = Matrix::from_rows(&[&[0.1, 0.2], &[-0.3, 0.4]]).unwrap();
    let g2 = Matrix::from_rows(&[&[1.0, -0.5], &[0.0, 2.0]]).unwrap();
    let model = GnnModel::new(LayerType::Gcn, vec![w0.clone()]).unwrap();
    let mut twice = TrainState::new(model.clone(), 0.1).unwrap();
    twice.sgd_step(std::slice::from_ref(&g1)).unwrap();
    twice.sgd_step(std::slice::from_ref(&g2)).unwrap();
    let mut once = TrainState::new(model, 0.1).unwrap();
    once.sgd_step(&[g1.add(&g2).unwrap()]).unwrap();
    for (a, b) in twice.model.weights()[0].as_slice().iter().zip(once.model.weights()[0].as_slice()) {
        assert!((a - b).abs() < 1e-15);
    }

    // With the real cross-entropy gradient, re-evaluating after the first
    // step changes the second gradient, so the two paths separate.
    let inst = instance(42, LayerType::Gcn, 1);
    let grad_at = |m: &GnnModel| {
        let (logits, tape) = forward(m, &inst.p, &inst.x).unwrap();
        loss_and_backward(m, &tape, &logits, &inst.labels, &inst.mask, &inst.p).unwrap().1
    };
    let mut seq = TrainState::new(inst.model.clone(), 0.5).unwrap();
    let first = grad_at(&seq.model);
    seq.sgd_step(&first).unwrap();
    let second = grad_at(&seq.model);
    seq.sgd_step(&second).unwrap();
    let mut frozen = TrainState::new(inst.model.clone(), 0.5).unwrap();
    frozen.sgd_step(&[first[0].add(&first[0]).unwrap()]).unwrap();
    let diff = seq.model.weights()[0].sub(&frozen.model.weights()[0]).unwrap().frobenius_norm();
    assert!(diff > 1e-8);
}

#[test]
fn logits_are_permutation_equivariant() {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 10;
        let g = random_graph(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted = Graph::from_edges(
            n,
            g.edges().iter().map(|&(u, v)| (perm[u as usize] as u64, perm[v as usize] as u64)),
        )
        .unwrap();
        let x = random_matrix(&mut rng, n, 3);
        let px = x.permute_rows(&perm);
        for layer_type in [LayerType::Gcn, LayerType::SageMean] {
            let model = GnnModel::init(layer_type, 3, 5, 2, 2, seed).unwrap();
            let kind = layer_type.propagation_kind();
            let (a, _) = forward(&model, &PropagationMatrix::full(&g, kind), &x).unwrap();
            let (b, _) = forward(&model, &PropagationMatrix::full(&permuted, kind), &px).unwrap();
            let a = a.permute_rows(&perm);
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
