//! Layer behaviour checked against hand-built ndarray oracles.

use celetrip::graphs::WordArticleGraph;
use celetrip::model::*;
use celetrip_tensor::Tape;
use ndarray::{array, s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config() -> ModelConfig {
    ModelConfig {
        word_dim: 4,
        article_dim: 3,
        kb_dim: 3,
        hidden_dim: 5,
        f_dim: 4,
        blocks: 2,
        epsilon: 0.5,
        q: 1,
        trip_layers: 2,
        use_oriented_pooling: true,
        use_entity_event: true,
    }
}

fn set(model: &mut Model, name: &str, value: Array2<f64>) {
    let id = model.params.id(name).unwrap();
    *model.params.get_mut(id) = value;
}

fn get(model: &Model, name: &str) -> Array2<f64> {
    model.params.get(model.params.id(name).unwrap()).clone()
}

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

fn close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) -> bool {
    a.shape() == b.shape() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
}

/// Dense GAT oracle with explicit loops over neighbours.
fn gat_oracle(h: &Array2<f64>, adj: &Array2<f64>, w: &Array2<f64>, a1: &Array2<f64>, a2: &Array2<f64>) -> Array2<f64> {
    let wh = h.dot(w);
    let n = h.nrows();
    let mut out = Array2::zeros((n, w.ncols()));
    for i in 0..n {
        let nbrs: Vec<usize> = (0..n).filter(|&j| adj[[i, j]] != 0.0).collect();
        let e: Vec<f64> = nbrs
            .iter()
            .map(|&j| {
                let x = wh.row(i).dot(&a1.column(0)) + wh.row(j).dot(&a2.column(0));
                if x > 0.0 {
                    x
                } else {
                    0.2 * x
                }
            })
            .collect();
        let m = e.iter().cloned().fold(f64::MIN, f64::max);
        let z: f64 = e.iter().map(|x| (x - m).exp()).sum();
        for (k, &j) in nbrs.iter().enumerate() {
            let alpha = (e[k] - m).exp() / z;
            let r = &wh.row(j) * alpha;
            let mut o = out.row_mut(i);
            o += &r;
        }
    }
    out.mapv(elu)
}

#[test]
fn project_nodes_cases() {
    let mut model = Model::new(small_config(), 1).unwrap();
    let x_w = array![[1.0, 2.0, 3.0, 4.0], [0.0, -1.0, 0.5, 2.0]];
    let x_a = array![[0.6, 0.8, 0.0]];
    // Zero weights and biases.
    let mut zeroed = model.clone();
    for name in ["word_proj.w", "word_proj.b", "article_proj.w", "article_proj.b"] {
        let shape = get(&zeroed, name).dim();
        set(&mut zeroed, name, Array2::zeros(shape));
    }
    let tape = Tape::new();
    let h0 = project_nodes(&tape, &zeroed, &x_w, &x_a).unwrap().to_array();
    assert_eq!(h0, Array2::<f64>::zeros((3, 5)));

    // Random fixture against a direct matrix product.
    set(&mut model, "word_proj.b", array![[0.1, 0.2, 0.3, 0.4, 0.5]]);
    let tape = Tape::new();
    let h0 = project_nodes(&tape, &model, &x_w, &x_a).unwrap().to_array();
    let words = x_w.dot(&get(&model, "word_proj.w")) + get(&model, "word_proj.b");
    let arts = x_a.dot(&get(&model, "article_proj.w")) + get(&model, "article_proj.b");
    let expected = ndarray::concatenate(Axis(0), &[words.view(), arts.view()]).unwrap();
    assert!(close(&h0, &expected, 1e-12));

    // Shape mismatch is an error.
    let tape = Tape::new();
    assert!(project_nodes(&tape, &model, &array![[1.0, 2.0]], &x_a).is_err());
}

#[test]
fn identity_projection_passes_words_through() {
    let cfg = ModelConfig {
        hidden_dim: 4,
        ..small_config()
    };
    let mut model = Model::new(cfg, 0).unwrap();
    set(&mut model, "word_proj.w", Array2::eye(4));
    let x_w = array![[1.0, -2.0, 3.0, 0.5]];
    let tape = Tape::new();
    let h0 = project_nodes(&tape, &model, &x_w, &Array2::zeros((0, 3)))
        .unwrap()
        .to_array();
    assert_eq!(h0, x_w);
}

#[test]
fn gat_matches_oracle_and_is_local() {
    let model = Model::new(small_config(), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Components {0, 1, 2} and {3, 4}.
    let adj = array![
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 1.0, 0.0, 0.0],
        [0.0, 1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 1.0],
        [0.0, 0.0, 0.0, 1.0, 1.0]
    ];
    let h = random(5, 5, &mut rng);
    let layer = model.ids.loc_gat[0];
    let tape = Tape::new();
    let (out, attn) = gat_layer(&tape, &model, layer, tape.constant(h.clone()), &adj).unwrap();
    let expected = gat_oracle(
        &h,
        &adj,
        &get(&model, "loc.gat0.w"),
        &get(&model, "loc.gat0.a_src"),
        &get(&model, "loc.gat0.a_dst"),
    );
    assert!(close(&out.to_array(), &expected, 1e-12));
    for r in attn.to_array().rows() {
        assert!((r.sum() - 1.0).abs() < 1e-12);
    }

    let mut h2 = h.clone();
    h2.slice_mut(s![3.., ..]).mapv_inplace(|v| v * 7.0 - 1.0);
    let tape = Tape::new();
    let out2 = gat_layer(&tape, &model, layer, tape.constant(h2), &adj)
        .unwrap()
        .0
        .to_array();
    assert_eq!(out.to_array().slice(s![..3, ..]), out2.slice(s![..3, ..]));
}

#[test]
fn gat_single_node_is_elu_of_projection() {
    let model = Model::new(small_config(), 3).unwrap();
    let h = array![[0.3, -1.2, 0.8, 2.0, -0.1]];
    let tape = Tape::new();
    let (out, attn) = gat_layer(
        &tape,
        &model,
        model.ids.loc_gat[0],
        tape.constant(h.clone()),
        &array![[1.0]],
    )
    .unwrap();
    assert_eq!(attn.to_array(), array![[1.0]]);
    let expected = h.dot(&get(&model, "loc.gat0.w")).mapv(elu);
    assert!(close(&out.to_array(), &expected, 1e-14));
    let tape = Tape::new();
    assert!(gat_layer(&tape, &model, model.ids.loc_gat[0], tape.constant(h), &array![[0.0]]).is_err());
}

fn path_graph(n: usize, word_dim: usize, art_dim: usize, seed: u64) -> WordArticleGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj = Array2::eye(n + 1);
    for i in 0..n {
        if i + 1 < n {
            adj[[i, i + 1]] = 1.0;
            adj[[i + 1, i]] = 1.0;
        }
        adj[[i, n]] = 1.0;
        adj[[n, i]] = 1.0;
    }
    WordArticleGraph {
        word_nodes: (0..n).map(|i| format!("w{i}")).collect(),
        article_nodes: vec!["a".into()],
        adjacency: adj,
        x_w: random(n, word_dim, &mut rng),
        x_a: random(1, art_dim, &mut rng),
        lw_idx: vec![1],
        cw_idx: vec![3],
    }
}

#[test]
fn pooling_keeps_ceiling_and_targets() {
    let model = Model::new(small_config(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut adj = Array2::eye(5);
    for (i, j) in [(0, 1), (1, 2), (2, 3), (3, 4)] {
        adj[[i, j]] = 1.0;
        adj[[j, i]] = 1.0;
    }
    let tape = Tape::new();
    let h = tape.constant(random(5, 5, &mut rng));
    let p = oriented_pooling(&tape, &model, 0, h, &adj, &[4], &[0]).unwrap();
    assert_eq!(p.kept.len(), 3);
    assert!(p.kept.contains(&0) && p.kept.contains(&4));
    assert_eq!(p.adjacency, p.adjacency.t());
    assert_eq!(p.h.shape(), (3, 5));
}

#[test]
fn identical_node_has_unit_similarity() {
    let mut model = Model::new(small_config(), 5).unwrap();
    // Isolate the similarity term: zero attention score, unit combiner on s_sim.
    set(&mut model, "loc.pool0.w_score", Array2::zeros((5, 1)));
    set(&mut model, "loc.pool0.w_alpha", array![[0.0], [1.0]]);
    let target = array![0.5, -1.0, 2.0, 0.0, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut h = random(6, 5, &mut rng);
    h.row_mut(2).assign(&target);
    h.row_mut(4).assign(&target);
    h.row_mut(5).assign(&(&target * 3.0));
    let tape = Tape::new();
    let p = oriented_pooling(&tape, &model, 0, tape.constant(h), &Array2::eye(6), &[2], &[4]).unwrap();
    let scores = p.scores.to_array();
    let top = 1f64.tanh();
    for i in [2, 4, 5] {
        assert!((scores[[i, 0]] - top).abs() < 1e-12);
    }
    assert!(scores.iter().all(|&s| s <= top + 1e-12));
    assert_eq!(p.kept, vec![2, 4, 5]);
}

#[test]
fn constant_features_keep_lowest_indices() {
    let model = Model::new(small_config(), 6).unwrap();
    let h = Array2::from_elem((7, 5), 0.3);
    let tape = Tape::new();
    let p = oriented_pooling(&tape, &model, 0, tape.constant(h), &Array2::ones((7, 7)), &[0], &[1]).unwrap();
    assert_eq!(p.kept, vec![0, 1, 2, 3]);
}

#[test]
fn location_module_shapes_and_single_node() {
    let model = Model::new(small_config(), 7).unwrap();
    let g = path_graph(6, 4, 3, 1);
    let tape = Tape::new();
    let out = location_module(&tape, &model, &g).unwrap();
    assert_eq!(out.shape(), (1, 4));

    let cfg = ModelConfig {
        blocks: 1,
        ..small_config()
    };
    let model = Model::new(cfg, 8).unwrap();
    let single = WordArticleGraph {
        word_nodes: vec!["w".into()],
        article_nodes: vec![],
        adjacency: array![[1.0]],
        x_w: array![[0.2, -0.4, 1.0, 0.5]],
        x_a: Array2::zeros((0, 3)),
        lw_idx: vec![0],
        cw_idx: vec![0],
    };
    let tape = Tape::new();
    let out = location_module(&tape, &model, &single).unwrap().to_array();
    let h0 = single.x_w.dot(&get(&model, "word_proj.w")) + get(&model, "word_proj.b");
    let gat = h0.dot(&get(&model, "loc.gat0.w")).mapv(elu);
    let expected = gat.dot(&get(&model, "loc.out.w")) + get(&model, "loc.out.b");
    assert!(close(&out, &expected, 1e-12));
}

#[test]
fn noise_component_does_not_move_target_rows() {
    let model = Model::new(small_config(), 10).unwrap();
    let mut g = path_graph(6, 4, 3, 2);
    // Append a disconnected 3-node noise component.
    let n = g.adjacency.nrows();
    let mut adj = Array2::eye(n + 3);
    adj.slice_mut(s![..n, ..n]).assign(&g.adjacency);
    for (i, j) in [(n, n + 1), (n + 1, n + 2)] {
        adj[[i, j]] = 1.0;
        adj[[j, i]] = 1.0;
    }
    // Reorder so noise words sit before the article node.
    let words = 6;
    let mut order: Vec<usize> = (0..words).collect();
    order.extend([n, n + 1, n + 2]);
    order.push(words);
    let adj = adj.select(Axis(0), &order).select(Axis(1), &order);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = random(3, 4, &mut rng);
    let x_w = ndarray::concatenate(Axis(0), &[g.x_w.view(), noise.view()]).unwrap();
    g.word_nodes.extend(["n0".to_string(), "n1".into(), "n2".into()]);
    g.adjacency = adj;
    g.x_w = x_w;

    let targets = |g: &WordArticleGraph| {
        let tape = Tape::new();
        let (h, lw, cw) = location_node_states(&tape, &model, g).unwrap();
        let h = h.to_array();
        (h.row(lw[0]).to_owned(), h.row(cw[0]).to_owned())
    };
    let before = targets(&g);
    let mut doubled = g.clone();
    doubled.x_w.slice_mut(s![6..9, ..]).mapv_inplace(|v| 2.0 * v);
    let after = targets(&doubled);
    assert_eq!(before, after);
}

fn compgcn_model() -> Model {
    let mut m = Model::new(small_config(), 11).unwrap();
    set(&mut m, "ent.w_es", Array2::eye(3));
    m
}

#[test]
fn compgcn_cases() {
    let mut model = compgcn_model();
    let tape = Tape::new();
    let empty = compgcn_layer(&tape, &model, &Array2::zeros((0, 3)), &Array2::zeros((0, 3))).unwrap();
    assert_eq!(empty.to_array(), Array2::<f64>::zeros((1, 3)));

    // ℓ'_r = ℓ_r W_edge = all ones with W_edge = I and ℓ_r = 1.
    set(&mut model, "ent.w_edge", Array2::eye(3));
    let u = array![[0.5, -2.0, 0.1]];
    let tape = Tape::new();
    let one = compgcn_layer(&tape, &model, &u, &Array2::ones((1, 3))).unwrap();
    assert!(close(&one.to_array(), &u.mapv(f64::tanh), 1e-15));

    // Two neighbours, random weights: tanh(Σ (h_u ⊙ ℓ_r W_edge) W_es).
    let model = Model::new(small_config(), 12).unwrap();
    let u = array![[0.5, -2.0, 0.1], [1.0, 0.0, -0.3]];
    let l = array![[0.2, 0.4, -1.0], [-0.5, 0.3, 0.9]];
    let (we, ws) = (get(&model, "ent.w_edge"), get(&model, "ent.w_es"));
    let mut sum = Array1::<f64>::zeros(3);
    for i in 0..2 {
        let rel = l.row(i).dot(&we);
        let msg = (&u.row(i) * &rel).dot(&ws);
        sum += &msg;
    }
    let tape = Tape::new();
    let two = compgcn_layer(&tape, &model, &u, &l).unwrap().to_array();
    assert!(close(&two, &sum.mapv(f64::tanh).insert_axis(Axis(0)), 1e-12));
}

#[test]
fn entity_module_cases() {
    let model = Model::new(small_config(), 13).unwrap();
    let proj = |x: Array2<f64>| x.dot(&get(&model, "ent.proj.w")) + get(&model, "ent.proj.b");
    let init = array![0.1, -0.7, 0.3, 1.2];
    let unlinked = EntityInput {
        name: "x".into(),
        init: init.clone(),
        subgraph: None,
    };
    let tape = Tape::new();
    let out = entity_module(&tape, &model, &unlinked).unwrap().to_array();
    let joined = ndarray::concatenate![Axis(0), init.mapv(f64::tanh), Array1::zeros(3)];
    assert!(close(&out, &proj(joined.insert_axis(Axis(0))), 1e-12));

    let zero = EntityInput {
        name: "z".into(),
        init: Array1::zeros(4),
        subgraph: None,
    };
    let tape = Tape::new();
    assert!(close(
        &entity_module(&tape, &model, &zero).unwrap().to_array(),
        &proj(Array2::zeros((1, 7))),
        1e-15
    ));

    let u = array![[0.5, -2.0, 0.1]];
    let l = array![[0.2, 0.4, -1.0]];
    let linked = EntityInput {
        name: "y".into(),
        init: init.clone(),
        subgraph: Some((u.clone(), l.clone())),
    };
    let tape = Tape::new();
    let out = entity_module(&tape, &model, &linked).unwrap().to_array();
    let tape2 = Tape::new();
    let agg = compgcn_layer(&tape2, &model, &u, &l).unwrap().to_array();
    let joined = ndarray::concatenate![Axis(1), init.insert_axis(Axis(0)), agg].mapv(f64::tanh);
    assert!(close(&out, &proj(joined), 1e-12));
}

#[test]
fn event_module_cases() {
    let cfg = ModelConfig { q: 7, ..small_config() };
    let model = Model::new(cfg, 14).unwrap();
    assert_eq!(model.config.count_dim(), 15);
    let v1 = array![[0.3, -0.2, 0.9, 0.0]];
    let tape = Tape::new();
    let lambda = event_attention(&tape, &model, &v1).unwrap().unwrap().to_array();
    assert_eq!(lambda, array![[1.0]]);

    let counts = Array1::from_iter((0..15).map(|i| (i % 4) as f64));
    let ev = EventInput {
        name: "e".into(),
        init: Array1::zeros(4),
        sentences: v1.clone(),
        counts: counts.clone(),
    };
    let tape = Tape::new();
    let out = event_module(&tape, &model, &ev).unwrap().to_array();
    let h_z = counts.insert_axis(Axis(0)).dot(&get(&model, "eve.psi1.w")) + get(&model, "eve.psi1.b");
    let joined = ndarray::concatenate![Axis(1), h_z.view(), v1.view()];
    let expected = (joined.dot(&get(&model, "eve.psi2.w")) + get(&model, "eve.psi2.b")).mapv(f64::tanh) + &h_z;
    assert!(close(&out, &expected, 1e-12));

    let bad = EventInput {
        counts: Array1::zeros(3),
        ..ev
    };
    let tape = Tape::new();
    assert!(event_module(&tape, &model, &bad).is_err());
}

fn tiny_input(seed: u64) -> TripInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g1 = path_graph(4, 4, 3, seed);
    let g2 = path_graph(5, 4, 3, seed + 1);
    let entity = |rng: &mut ChaCha8Rng, name: &str| EntityInput {
        name: name.into(),
        init: Array1::from_iter((0..4).map(|_| rng.random_range(-1.0..1.0))),
        subgraph: Some((random(2, 3, rng), random(2, 3, rng))),
    };
    let entities = vec![entity(&mut rng, "e0"), entity(&mut rng, "e1"), entity(&mut rng, "e2")];
    let events = vec![EventInput {
        name: "ev".into(),
        init: Array1::zeros(4),
        sentences: random(3, 4, &mut rng),
        counts: array![1.0, 3.0, 0.0],
    }];
    // loc0 - e0, loc1 - e1, both - e2, loc1 - event.
    let mut adj = Array2::eye(6);
    for (a, b) in [(0, 2), (1, 3), (0, 4), (1, 4), (1, 5)] {
        adj[[a, b]] = 1.0;
        adj[[b, a]] = 1.0;
    }
    TripInput {
        graphs: vec![g1, g2],
        entities,
        events,
        adjacency: adj,
    }
}

#[test]
fn trip_forward_shapes_and_range() {
    let model = Model::new(small_config(), 15).unwrap();
    let input = tiny_input(1);
    let tape = Tape::new();
    let y = trip_forward(&tape, &model, &input).unwrap().to_array();
    assert_eq!(y.dim(), (2, 1));
    assert!(y.iter().all(|&p| p > 0.0 && p < 1.0));

    let lone = TripInput {
        graphs: vec![input.graphs[0].clone()],
        entities: vec![],
        events: vec![],
        adjacency: array![[1.0]],
    };
    let tape = Tape::new();
    assert_eq!(trip_forward(&tape, &model, &lone).unwrap().shape(), (1, 1));
}

#[test]
fn entity_permutation_leaves_predictions_unchanged() {
    let model = Model::new(small_config(), 16).unwrap();
    let input = tiny_input(2);
    let mut perm = input.clone();
    // Swap entities 0 and 2 (rows 2 and 4 of the trip graph).
    perm.entities.swap(0, 2);
    let order = [0, 1, 4, 3, 2, 5];
    perm.adjacency = input.adjacency.select(Axis(0), &order).select(Axis(1), &order);
    let t1 = Tape::new();
    let t2 = Tape::new();
    let a = trip_forward(&t1, &model, &input).unwrap().to_array();
    let b = trip_forward(&t2, &model, &perm).unwrap().to_array();
    assert!(close(&a, &b, 1e-12), "{a} vs {b}");
}

#[test]
fn trip_loss_cases() {
    let tape = Tape::new();
    let perfect = trip_loss(tape.constant(array![[1.0], [0.0]]), &[1.0, 0.0], 1.0)
        .unwrap()
        .scalar();
    assert!(perfect < 1e-6);
    let half = trip_loss(tape.constant(array![[0.5], [0.5], [0.5]]), &[1.0, 0.0, 1.0], 1.0)
        .unwrap()
        .scalar();
    assert!((half - 2f64.ln()).abs() < 1e-15);
    let mixed = trip_loss(tape.constant(array![[0.8], [0.25]]), &[1.0, 0.0], 1.0)
        .unwrap()
        .scalar();
    let expected = -(0.8f64.ln() + 0.75f64.ln()) / 2.0;
    assert!((mixed - expected).abs() < 1e-15);
}

#[test]
fn ablated_context_uses_init_projection() {
    let cfg = ModelConfig {
        use_entity_event: false,
        use_oriented_pooling: false,
        ..small_config()
    };
    let model = Model::new(cfg, 17).unwrap();
    let input = tiny_input(3);
    let tape = Tape::new();
    let e = entity_module(&tape, &model, &input.entities[0]).unwrap().to_array();
    let init = input.entities[0].init.clone().insert_axis(Axis(0));
    let expected = init.dot(&get(&model, "ent.init.w")) + get(&model, "ent.init.b");
    assert!(close(&e, &expected, 1e-14));
    let tape = Tape::new();
    assert_eq!(trip_forward(&tape, &model, &input).unwrap().shape(), (2, 1));
}
