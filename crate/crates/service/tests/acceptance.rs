//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use ndarray::{Array1, Array2, Axis};
use poolal_core::harness::{
    compare_strategies, format_curve, run_experiment, CurveFormat, DatasetSpec, Experiment, ExperimentConfig,
    RoundRecord,
};
use poolal_core::nn::{Activation, Classifier, Dense, McProbStack, NetConfig, ProbMatrix};
use poolal_core::strategies::{
    adv_bim_distance, adv_deepfool_distance, bald_scores, entropy, entropy_scores, kcenter_greedy,
    least_confidence_scores, margin_scores, select_top, StrategyKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($msg)*));
        }
    };
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("gradient correctness", gradients),
        ("probability calculus", probability_calculus),
        ("binary equivalence", binary_equivalence),
        ("core-set oracle", coreset_oracle),
        ("adversarial oracle", adversarial_oracle),
        ("active-learning benefit", active_learning_benefit),
        ("determinism", determinism),
        ("loop bookkeeping", loop_bookkeeping),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<24} {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<24} {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

// Gradients

const STEP: f64 = 1e-5;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-7)
}

fn random_net(seed: u64) -> Classifier {
    let clf = Classifier::new(NetConfig {
        layer_widths: vec![3, 5, 4, 2],
        dropout_rate: 0.0,
        activation: Activation::Relu,
        init_seed: seed,
    })
    .unwrap();
    // Nonzero biases keep pre-activations off the ReLU kink.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xacce);
    let mut layers = clf.layers().to_vec();
    for layer in &mut layers {
        layer.biases.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    Classifier::from_layers(clf.config().clone(), layers).unwrap()
}

fn nudged(clf: &Classifier, layer: usize, flat: usize, delta: f64) -> Classifier {
    let mut layers: Vec<Dense> = clf.layers().to_vec();
    let n_w = layers[layer].weights.len();
    if flat < n_w {
        let cols = layers[layer].weights.ncols();
        layers[layer].weights[[flat / cols, flat % cols]] += delta;
    } else {
        layers[layer].biases[flat - n_w] += delta;
    }
    Classifier::from_layers(clf.config().clone(), layers).unwrap()
}

fn gradients() -> Outcome {
    let started = Instant::now();
    let (mut worst_param, mut worst_input): (f64, f64) = (0.0, 0.0);
    for seed in 0..20 {
        let clf = random_net(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = Array2::from_shape_fn((6, 3), |_| rng.random_range(-2.0..2.0));
        let y: Vec<usize> = (0..6).map(|_| rng.random_range(0..2)).collect();
        let loss = |c: &Classifier| c.loss_and_gradients(x.view(), &y, None::<&mut ChaCha8Rng>).unwrap().0;
        let (_, grads) = clf.loss_and_gradients(x.view(), &y, None::<&mut ChaCha8Rng>).unwrap();
        for (l, g) in grads.layers.iter().enumerate() {
            for (flat, &a) in g.weights.iter().chain(g.biases.iter()).enumerate() {
                let n = (loss(&nudged(&clf, l, flat, STEP)) - loss(&nudged(&clf, l, flat, -STEP))) / (2.0 * STEP);
                worst_param = worst_param.max(rel_err(a, n));
            }
        }
        for row in x.outer_iter() {
            for class in 0..2 {
                let g = clf.input_gradient(row, class).unwrap();
                for j in 0..3 {
                    let logit = |d: f64| {
                        let mut v = row.to_owned();
                        v[j] += d;
                        clf.logits(v.insert_axis(Axis(0)).view()).unwrap()[[0, class]]
                    };
                    worst_input = worst_input.max(rel_err(g[j], (logit(STEP) - logit(-STEP)) / (2.0 * STEP)));
                }
            }
        }
    }
    let elapsed = started.elapsed();
    let detail = format!("max rel err: params {worst_param:.2e}, inputs {worst_input:.2e}");
    ensure!(worst_param <= 1e-4 && worst_input <= 1e-4, "{detail}");
    ensure!(elapsed < Duration::from_secs(5), "{detail}; took {elapsed:?}");
    Ok(detail)
}

// Probabilities

fn random_probs(rng: &mut ChaCha8Rng, rows: usize, k: usize) -> ProbMatrix {
    let mut m = Array2::from_shape_fn((rows, k), |_| rng.random::<f64>() + 1e-3);
    for mut row in m.outer_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    ProbMatrix::new(m).unwrap()
}

fn probability_calculus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_sum: f64 = 0.0;
    for _ in 0..200 {
        let logits = Array2::from_shape_fn((10, 7), |_| rng.random_range(-1000.0..1000.0));
        let p = ProbMatrix::from_logits(logits.view()).map_err(|e| e.to_string())?;
        for row in p.view().outer_iter() {
            worst_sum = worst_sum.max((row.sum() - 1.0).abs());
        }
    }
    ensure!(worst_sum <= 1e-9, "softmax row sum off by {worst_sum:e}");

    let mut worst_uniform: f64 = 0.0;
    for k in 2..=20 {
        let row = Array1::from_elem(k, 1.0 / k as f64);
        worst_uniform = worst_uniform.max((entropy(row.view()) - (k as f64).ln()).abs());
    }
    ensure!(worst_uniform <= 1e-12, "uniform entropy off by {worst_uniform:e}");

    let mut worst_identical: f64 = 0.0;
    for _ in 0..100 {
        let p = random_probs(&mut rng, 5, 4);
        let stack = McProbStack::new(vec![p; 8]).unwrap();
        worst_identical = worst_identical.max(bald_scores(&stack).scores().iter().fold(0.0, |m, &v| m.max(v)));
    }
    ensure!(
        worst_identical <= 1e-9,
        "BALD of identical passes is {worst_identical:e}"
    );

    let mut lowest = f64::INFINITY;
    for _ in 0..1000 {
        let k = rng.random_range(2..6);
        let t = rng.random_range(2..10);
        let stack = McProbStack::new((0..t).map(|_| random_probs(&mut rng, 4, k)).collect()).unwrap();
        lowest = lowest.min(
            bald_scores(&stack)
                .scores()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
        );
    }
    ensure!(lowest >= -1e-9, "BALD reached {lowest:e}");
    Ok(format!(
        "row-sum err {worst_sum:.1e}, ln K err {worst_uniform:.1e}, identical-pass BALD {worst_identical:.1e}, min BALD {lowest:.1e}"
    ))
}

fn binary_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut comparisons = 0;
    for m in 0..100 {
        let rows = rng.random_range(2..50);
        let probs = random_probs(&mut rng, rows, 2);
        let cands: Vec<usize> = (0..rows).collect();
        let scores = [
            least_confidence_scores(&probs),
            margin_scores(&probs),
            entropy_scores(&probs),
        ];
        for n in 1..=rows {
            let sets: Vec<HashSet<usize>> = scores
                .iter()
                .map(|s| select_top(s, &cands, n).unwrap().into_iter().collect())
                .collect();
            ensure!(
                sets[0] == sets[1] && sets[0] == sets[2],
                "matrix {m}, n = {n}: selections differ"
            );
            comparisons += 1;
        }
    }
    Ok(format!("100 matrices, {comparisons} (matrix, n) pairs agree"))
}

fn coreset_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut instances = 0;
    while instances < 200 {
        let n = rng.random_range(2..=25);
        let dim = rng.random_range(1..=3);
        let points = Array2::from_shape_fn((n, dim), |_| rng.random_range(-3..=3) as f64);
        let mut labeled: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        labeled[rng.random_range(0..n)] = true;
        if labeled.iter().all(|&l| l) {
            continue;
        }
        let mut expected = None;
        let mut best = f64::NEG_INFINITY;
        for i in (0..n).filter(|&i| !labeled[i]) {
            let d = (0..n)
                .filter(|&j| labeled[j])
                .map(|j| (&points.row(i) - &points.row(j)).mapv(|v| v * v).sum().sqrt())
                .fold(f64::INFINITY, f64::min);
            if d > best {
                best = d;
                expected = Some(i);
            }
        }
        let got = kcenter_greedy(points.view(), &labeled, 1)
            .map_err(|e| e.to_string())?
            .selected;
        ensure!(
            got == vec![expected.unwrap()],
            "instance {instances}: got {got:?}, want {expected:?}"
        );
        instances += 1;
    }
    Ok("200 instances match exhaustive search".into())
}

// Adversarial distances

fn adversarial_oracle() -> Outcome {
    let mut config = ExperimentConfig {
        dataset: DatasetSpec::TwoGaussians {
            n_per_class: 100,
            separation: 6.0,
            noise_sd: 0.7,
        },
        n_init: 40,
        rounds: 0,
        ..Default::default()
    };
    config.net.hidden = vec![];
    config.net.dropout_rate = 0.0;
    config.train.epochs = 200;
    let exp = Experiment::start(config.clone()).map_err(|e| e.to_string())?;
    let clf = exp.classifier();
    let (w, b) = (&clf.layers()[0].weights, &clf.layers()[0].biases);
    let normal: Array1<f64> = &w.column(1) - &w.column(0);
    let offset = b[1] - b[0];
    let overshoot = config.strategy.deepfool_overshoot;
    let eps = config.strategy.bim_eps;
    let slack = 2.0 * eps * 2f64.sqrt();

    let pool = exp.pool();
    let x_train = pool.x_train();
    let unlabeled = pool.unlabeled_indices();
    let (mut close, mut bim_ok) = (0, 0);
    for &g in &unlabeled {
        let x = x_train.row(g);
        let exact = (x.dot(&normal) + offset).abs() / normal.dot(&normal).sqrt() * (1.0 + overshoot);
        let df = adv_deepfool_distance(clf, x, config.strategy.adv_max_iter, overshoot)
            .map_err(|e| e.to_string())?
            .norm;
        let bim = adv_bim_distance(clf, x, eps, config.strategy.adv_max_iter)
            .map_err(|e| e.to_string())?
            .norm;
        if (df - exact).abs() <= 0.05 * exact {
            close += 1;
        }
        if bim >= df - slack {
            bim_ok += 1;
        }
    }
    let total = unlabeled.len();
    let frac = close as f64 / total as f64;
    let detail = format!(
        "DeepFool within 5% on {close}/{total} ({:.1}%), BIM bound holds on {bim_ok}/{total}",
        100.0 * frac
    );
    ensure!(frac >= 0.95 && bim_ok == total, "{detail}");
    Ok(detail)
}

// Benchmark criteria

const BENCH_SEEDS: std::ops::Range<u64> = 0..10;
const UNCERTAINTY: [StrategyKind; 3] = [
    StrategyKind::Entropy,
    StrategyKind::Margin,
    StrategyKind::LeastConfidence,
];

/// Two Gaussians at separation 3 with unit noise; 600 rows split 400/200.
fn benchmark_config() -> ExperimentConfig {
    ExperimentConfig::default()
}

fn active_learning_benefit() -> Outcome {
    let config = benchmark_config();
    let seeds: Vec<u64> = BENCH_SEEDS.collect();
    let mut kinds = vec![StrategyKind::Random];
    kinds.extend(UNCERTAINTY);
    let started = Instant::now();
    let table = compare_strategies(&config, &kinds, &seeds).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let random = table.get(StrategyKind::Random).unwrap();
    let (r_aulc, r_rounds) = (random.mean_aulc, random.mean_rounds_to_reach(0.9));
    let mut parts = vec![format!("random AULC {r_aulc:.4} rounds→90% {r_rounds:.2}")];
    let mut ok = true;
    for kind in UNCERTAINTY {
        let row = table.get(kind).unwrap();
        let rounds = row.mean_rounds_to_reach(0.9);
        ok &= row.mean_aulc > r_aulc && rounds <= r_rounds;
        parts.push(format!("{kind} {:.4}/{rounds:.2}", row.mean_aulc));
    }
    let detail = format!("{}; {:.1}s", parts.join(", "), elapsed.as_secs_f64());
    ensure!(ok, "{detail}");
    ensure!(elapsed < Duration::from_secs(120), "{detail}: over two minutes");
    Ok(detail)
}

fn small_config(kind: StrategyKind, seed: u64) -> ExperimentConfig {
    let mut config = ExperimentConfig {
        dataset: DatasetSpec::TwoGaussians {
            n_per_class: 80,
            separation: 3.0,
            noise_sd: 1.0,
        },
        rounds: 4,
        seed,
        ..Default::default()
    };
    config.train.epochs = 40;
    config.strategy.kind = kind;
    config.strategy.n_drop = 5;
    config
}

async fn request(app: &axum::Router, method: &str, uri: &str, body: String) -> (StatusCode, serde_json::Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null),
    )
}

async fn session_curve(app: &axum::Router, config: &ExperimentConfig) -> Result<Vec<RoundRecord>, String> {
    let body = serde_json::json!({"config": config, "mode": "simulated"}).to_string();
    let (status, created) = request(app, "POST", "/sessions", body).await;
    ensure!(status == StatusCode::CREATED, "create failed: {created}");
    let id = created["session_id"].as_str().unwrap().to_owned();
    loop {
        let (status, body) = request(app, "POST", &format!("/sessions/{id}/advance"), String::new()).await;
        ensure!(status == StatusCode::OK, "advance failed: {body}");
        if body["status"] == "done" {
            break;
        }
    }
    let (_, curve) = request(app, "GET", &format!("/sessions/{id}/curve"), String::new()).await;
    serde_json::from_value(curve["records"].clone()).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let mut configs = 0;
    for kind in StrategyKind::ALL {
        for seed in [0, 7] {
            let config = small_config(kind, seed);
            let a = run_experiment(&config).map_err(|e| e.to_string())?;
            let b = run_experiment(&config).map_err(|e| e.to_string())?;
            for format in [CurveFormat::Csv, CurveFormat::Json] {
                ensure!(
                    format_curve(&a, format) == format_curve(&b, format),
                    "{kind} seed {seed}: {format:?} exports differ"
                );
            }
            configs += 1;
        }
    }
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let app = poolal_service::router(Arc::new(poolal_service::SessionStore::new()));
    let mut sessions = 0;
    for kind in StrategyKind::ALL {
        let config = small_config(kind, 3);
        let via_api = runtime.block_on(session_curve(&app, &config))?;
        let direct = run_experiment(&config).map_err(|e| e.to_string())?;
        ensure!(via_api == direct, "{kind}: service curve differs from harness");
        sessions += 1;
    }
    Ok(format!(
        "{configs} configs export byte-identical curves; {sessions} simulated sessions match the harness"
    ))
}

fn loop_bookkeeping() -> Outcome {
    let mut runs = 0;
    for seed in [0, 1, 2] {
        let mut round0 = None;
        for kind in StrategyKind::ALL {
            let config = small_config(kind, seed);
            let curve = run_experiment(&config).map_err(|e| e.to_string())?;
            for (t, r) in curve.iter().enumerate() {
                ensure!(
                    r.round == t && r.n_labeled == config.n_init + t * config.n_query,
                    "{kind} seed {seed}: round {t} has {} labeled",
                    r.n_labeled
                );
            }
            let all: Vec<usize> = curve.iter().flat_map(|r| r.selected.iter().copied()).collect();
            let unique: HashSet<usize> = all.iter().copied().collect();
            ensure!(
                unique.len() == all.len(),
                "{kind} seed {seed}: an index was selected twice"
            );
            ensure!(
                all.len() == config.rounds * config.n_query,
                "{kind} seed {seed}: {} selections",
                all.len()
            );
            let acc0 = curve[0].accuracy.to_bits();
            ensure!(
                *round0.get_or_insert(acc0) == acc0,
                "{kind} seed {seed}: round-0 accuracy differs across strategies"
            );
            runs += 1;
        }
    }
    Ok(format!("{runs} runs over all strategies and 3 seeds"))
}
