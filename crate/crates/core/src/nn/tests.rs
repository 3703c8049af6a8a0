use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn config(widths: &[usize], dropout_rate: f64, seed: u64) -> NetConfig {
    NetConfig {
        layer_widths: widths.to_vec(),
        dropout_rate,
        activation: Activation::Relu,
        init_seed: seed,
    }
}

fn zeroed(widths: &[usize]) -> Classifier {
    let mut clf = Classifier::new(config(widths, 0.0, 0)).unwrap();
    for layer in &mut clf.layers {
        layer.weights.fill(0.0);
        layer.biases.fill(0.0);
    }
    clf
}

fn random_x(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-2.0..2.0))
}

#[test]
fn init_is_deterministic_in_seed() {
    let a = Classifier::new(config(&[2, 4, 2], 0.0, 7)).unwrap();
    let b = Classifier::new(config(&[2, 4, 2], 0.0, 7)).unwrap();
    assert_eq!(a, b);
    let c = Classifier::new(config(&[2, 4, 2], 0.0, 8)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn init_rejects_single_width() {
    let err = Classifier::new(config(&[2], 0.0, 0)).unwrap_err();
    assert!(matches!(err, Error::InvalidField { ref field, .. } if field == "layer_widths"));
}

#[test]
fn init_rejects_dropout_of_one() {
    assert!(Classifier::new(config(&[2, 3, 2], 1.0, 0)).is_err());
}

#[test]
fn init_shapes_and_bounds() {
    let clf = Classifier::new(config(&[3, 5, 2], 0.0, 1)).unwrap();
    let shapes: Vec<_> = clf.layers().iter().map(|l| l.weights.dim()).collect();
    assert_eq!(shapes, vec![(3, 5), (5, 2)]);
    let biases: Vec<_> = clf.layers().iter().map(|l| l.biases.len()).collect();
    assert_eq!(biases, vec![5, 2]);
    for layer in clf.layers() {
        let bound = 1.0 / (layer.weights.nrows() as f64).sqrt();
        assert!(layer.weights.iter().all(|w| w.abs() <= bound));
        assert!(layer.biases.iter().all(|&b| b == 0.0));
    }
    assert_eq!(clf.embedding_dim(), 5);
}

#[test]
fn zero_net_gives_zero_logits_class_zero_and_zero_embeddings() {
    let clf = zeroed(&[3, 4, 2]);
    let x = random_x(6, 3, 0);
    assert!(clf.logits(x.view()).unwrap().iter().all(|&v| v == 0.0));
    assert_eq!(clf.predict(x.view()).unwrap(), vec![0; 6]);
    let emb = clf.embeddings(x.view()).unwrap();
    assert_eq!(emb.dim(), (6, 4));
    assert!(emb.iter().all(|&v| v == 0.0));
    let g = clf.input_gradient(x.row(0), 1).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn forward_rejects_wrong_width() {
    let clf = Classifier::new(config(&[3, 4, 2], 0.0, 0)).unwrap();
    let x = random_x(2, 2, 0);
    assert!(matches!(clf.logits(x.view()), Err(Error::Shape(_))));
    assert!(matches!(clf.input_gradient(x.row(0), 0), Err(Error::Shape(_))));
}

#[test]
fn zero_dropout_is_identity() {
    let clf = Classifier::new(config(&[3, 6, 4, 2], 0.0, 3)).unwrap();
    let x = random_x(5, 3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let on = clf.forward(x.view(), Some(&mut rng)).unwrap();
    let off = clf.forward::<ChaCha8Rng>(x.view(), None).unwrap();
    assert_eq!(on.logits, off.logits);
    assert_eq!(on.embeddings, off.embeddings);
}

#[test]
fn dropout_replays_with_same_rng_state() {
    let clf = Classifier::new(config(&[3, 6, 2], 0.5, 3)).unwrap();
    let x = random_x(5, 3, 1);
    let a = clf.forward(x.view(), Some(&mut ChaCha8Rng::seed_from_u64(4))).unwrap();
    let b = clf.forward(x.view(), Some(&mut ChaCha8Rng::seed_from_u64(4))).unwrap();
    assert_eq!(a.logits, b.logits);
    let off = clf.logits(x.view()).unwrap();
    assert_ne!(a.logits, off);
}

#[test]
fn dropout_scales_survivors() {
    let clf = Classifier::new(config(&[2, 50, 2], 0.5, 3)).unwrap();
    let x = array![[1.0, -0.5]];
    let clean = clf.embeddings(x.view()).unwrap();
    let noisy = clf
        .forward(x.view(), Some(&mut ChaCha8Rng::seed_from_u64(2)))
        .unwrap()
        .embeddings;
    for (c, n) in clean.iter().zip(noisy.iter()) {
        assert!(*n == 0.0 || (*n - 2.0 * c).abs() < 1e-15);
    }
}

#[test]
fn identical_rows_embed_identically() {
    let clf = Classifier::new(config(&[3, 7, 2], 0.3, 5)).unwrap();
    let x = array![[0.3, -1.0, 2.0], [0.3, -1.0, 2.0]];
    let emb = clf.embeddings(x.view()).unwrap();
    assert_eq!(emb.row(0), emb.row(1));
}

#[test]
fn predict_is_argmax_of_predict_prob() {
    let clf = Classifier::new(config(&[4, 8, 3], 0.0, 11)).unwrap();
    let x = random_x(40, 4, 2);
    let probs = clf.predict_prob(x.view()).unwrap();
    assert_eq!(clf.predict(x.view()).unwrap(), probs.argmax());
}

#[test]
fn mc_dropout_with_zero_rate_repeats_deterministic_probs() {
    let clf = Classifier::new(config(&[3, 5, 2], 0.0, 1)).unwrap();
    let x = random_x(4, 3, 3);
    let stack = clf
        .mc_dropout_probs(x.view(), 3, &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
    let det = clf.predict_prob(x.view()).unwrap();
    assert!(stack.passes().iter().all(|p| *p == det));
}

#[test]
fn mc_dropout_is_replayable_and_mean_is_stochastic() {
    let clf = Classifier::new(config(&[3, 16, 3], 0.4, 1)).unwrap();
    let x = random_x(10, 3, 3);
    let a = clf
        .mc_dropout_probs(x.view(), 1, &mut ChaCha8Rng::seed_from_u64(5))
        .unwrap();
    let b = clf
        .mc_dropout_probs(x.view(), 1, &mut ChaCha8Rng::seed_from_u64(5))
        .unwrap();
    assert_eq!(a, b);
    let many = clf
        .mc_dropout_probs(x.view(), 8, &mut ChaCha8Rng::seed_from_u64(5))
        .unwrap();
    for row in many.mean().view().outer_iter() {
        assert!((row.sum() - 1.0).abs() < 1e-9);
    }
    assert!(matches!(
        clf.mc_dropout_probs(x.view(), 0, &mut ChaCha8Rng::seed_from_u64(5)),
        Err(Error::InvalidField { .. })
    ));
}

#[test]
fn single_layer_input_gradient_is_weight_column() {
    let clf = Classifier::new(config(&[3, 2], 0.0, 4)).unwrap();
    let x = array![0.5, -0.2, 1.3];
    for k in 0..2 {
        let g = clf.input_gradient(x.view(), k).unwrap();
        assert_eq!(g, clf.layers()[0].weights.column(k));
    }
    assert!(clf.input_gradient(x.view(), 2).is_err());
}

#[test]
fn training_separates_linearly_separable_points() {
    // 20 points: class by sign of x0 + x1, with a margin.
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    while labels.len() < 20 {
        let p: [f64; 2] = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let s = p[0] + p[1];
        if s.abs() < 0.3 {
            continue;
        }
        rows.extend_from_slice(&p);
        labels.push(usize::from(s > 0.0));
    }
    let x = Array2::from_shape_vec((20, 2), rows).unwrap();
    let clf = Classifier::new(config(&[2, 8, 2], 0.0, 0)).unwrap();
    let params = TrainParams {
        epochs: 200,
        batch_size: 4,
        learning_rate: 0.1,
        seed: 0,
    };
    let (trained, history) = clf.train(x.view(), &labels, &params).unwrap();
    assert_eq!(history.len(), 200);
    assert_eq!(trained.predict(x.view()).unwrap(), labels);
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let clf = Classifier::new(config(&[2, 8, 2], 0.0, 2)).unwrap();
    let x = random_x(12, 2, 4);
    let y: Vec<usize> = (0..12).map(|i| i % 2).collect();
    let params = TrainParams {
        epochs: 5,
        batch_size: 5,
        learning_rate: 0.0,
        seed: 3,
    };
    let (trained, history) = clf.train(x.view(), &y, &params).unwrap();
    assert_eq!(trained, clf);
    assert!(history.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-15));
}

#[test]
fn xor_loss_decreases_over_first_epochs() {
    let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
    let y = [0, 1, 1, 0];
    let clf = Classifier::new(config(&[2, 8, 2], 0.0, 0)).unwrap();
    let params = TrainParams {
        epochs: 5,
        batch_size: 4,
        learning_rate: 0.1,
        seed: 0,
    };
    let (_, history) = clf.train(x.view(), &y, &params).unwrap();
    assert!(history.windows(2).all(|w| w[1] < w[0]), "{history:?}");
}

#[test]
fn training_preconditions() {
    let clf = Classifier::new(config(&[2, 3, 2], 0.0, 0)).unwrap();
    let params = TrainParams {
        epochs: 1,
        batch_size: 1,
        learning_rate: 0.1,
        seed: 0,
    };
    let empty = Array2::<f64>::zeros((0, 2));
    assert!(matches!(
        clf.train(empty.view(), &[], &params),
        Err(Error::Precondition(_))
    ));
    let x = random_x(2, 2, 0);
    assert!(matches!(
        clf.train(x.view(), &[0, 2], &params),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn exploding_training_reports_epoch() {
    let clf = Classifier::new(config(&[2, 4, 2], 0.0, 0)).unwrap();
    let mut x = random_x(8, 2, 0);
    x[[3, 1]] = f64::INFINITY;
    let y: Vec<usize> = (0..8).map(|i| i % 2).collect();
    let params = TrainParams {
        epochs: 3,
        batch_size: 8,
        learning_rate: 0.1,
        seed: 0,
    };
    let err = clf.train(x.view(), &y, &params).unwrap_err();
    assert!(matches!(err, Error::NonFiniteLoss { epoch: 0 }), "{err}");
}

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let clf = Classifier::new(config(&[3, 7, 5, 4], 0.25, 99)).unwrap();
    let x = random_x(30, 3, 1);
    let y: Vec<usize> = (0..30).map(|i| i % 4).collect();
    let params = TrainParams {
        epochs: 3,
        batch_size: 7,
        learning_rate: 0.05,
        seed: 1,
    };
    let (trained, _) = clf.train(x.view(), &y, &params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clf.json");
    trained.save(&path).unwrap();
    let loaded = Classifier::load(&path).unwrap();
    for (a, b) in trained.layers().iter().zip(loaded.layers()) {
        for (p, q) in a.weights.iter().zip(b.weights.iter()) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
        for (p, q) in a.biases.iter().zip(b.biases.iter()) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
    }
    assert_eq!(loaded.config(), trained.config());
}

#[test]
fn checkpoint_rejects_wrong_shapes() {
    let clf = Classifier::new(config(&[3, 2], 0.0, 0)).unwrap();
    let text = clf.to_checkpoint_string().unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["config"]["layer_widths"] = serde_json::json!([4, 2]);
    assert!(Classifier::from_checkpoint_str(&value.to_string()).is_err());
}
