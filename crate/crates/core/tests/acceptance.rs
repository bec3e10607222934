//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use gagsl::augment::{
    characteristic_function, heat_wavelet, ppr_diffusion, structural_embedding, WaveletConfig,
};
use gagsl::autodiff::{gradient_check, ParamGroup, Tape};
use gagsl::experiment::{
    augment, run_experiment, run_trial, DatasetSource, ExperimentConfig, TrialOutput,
};
use gagsl::graph::{eigendecompose_sym, normalized_laplacian, Graph};
use gagsl::harness::{
    attack_edges, attack_features, evaluate, sbm_generate, AttackKind, AttackSpec, SbmConfig,
};
use gagsl::structure::ThetaVars;
use gagsl::train::{infonce, ClassifierVars, Phase, PhiVars, TrainSchedule, Trainer};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_graph(n: usize, p: f64, features: usize, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    let x = Array2::from_shape_fn((n, features), |_| rng.random_range(-1.0..1.0));
    Graph::from_edges(n, &edges, x).unwrap()
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

// 1 ------------------------------------------------------------------------

fn perturb(group: &mut impl ParamGroup, rng: &mut ChaCha8Rng) {
    for t in group.tensors_mut() {
        t.mapv_inplace(|v| v + rng.random_range(-0.1..0.1));
    }
}

fn criterion_gradients() -> Outcome {
    let mut worst: [f64; 3] = [0.0; 3];
    for (k, n) in [8usize, 10, 12].into_iter().enumerate() {
        let sbm = SbmConfig {
            nodes: n,
            blocks: 2,
            p_in: 0.6,
            p_out: 0.15,
            feature_dim: 4,
            feature_shift: 0.5,
            train_fraction: 0.4,
            val_fraction: 0.2,
        };
        let data = sbm_generate(&sbm, &mut ChaCha8Rng::seed_from_u64(100 + k as u64)).unwrap();
        let views = augment(&data, &Default::default(), &Default::default()).unwrap();
        let schedule = TrainSchedule {
            hidden: 5,
            projection_dim: 4,
            beta: 0.7,
            seed: k as u64,
            ..Default::default()
        };
        let estimator = gagsl::structure::EstimatorConfig {
            hidden: 4,
            mlp_hidden: 5,
            ppr_candidates: 3,
            gamma1: 0.5,
            gamma2: 0.5,
            mu: 0.5,
            ..Default::default()
        };
        let trainer = Trainer::new(
            &data,
            &views.structural,
            &views.diffusion.matrix,
            &estimator,
            &schedule,
        )
        .unwrap();
        // Zero biases put collapsed projection rows on the norm floor of the
        // cosine, where the loss has a kink; check at a generic point instead.
        let mut jitter = ChaCha8Rng::seed_from_u64(200 + k as u64);
        let (mut theta, mut phi, mut omega) = trainer.init_params();
        perturb(&mut theta, &mut jitter);
        perturb(&mut phi, &mut jitter);
        perturb(&mut omega, &mut jitter);
        let sample = trainer.sample(Phase::Structure, 0, 0);
        let (redefined, fused) = trainer.learner().materialize(&theta);

        let cls = gradient_check(
            |tape: &mut Tape, v| {
                trainer.omega_loss(tape, fused.matrix(), &ClassifierVars::from_slice(v), None)
            },
            &omega.tensors().into_iter().cloned().collect::<Vec<_>>(),
            1e-6,
        );
        let mi = gradient_check(
            |tape: &mut Tape, v| {
                trainer.phi_loss(
                    tape,
                    &PhiVars::from_slice(v),
                    &redefined,
                    &fused,
                    &sample,
                    None,
                )
            },
            &phi.tensors().into_iter().cloned().collect::<Vec<_>>(),
            1e-6,
        );
        let full = gradient_check(
            |tape: &mut Tape, v| {
                let p = phi.bind(tape, false);
                let o = omega.bind(tape, false);
                trainer
                    .theta_loss(tape, &ThetaVars::from_slice(v), &p, &o, &sample, None)
                    .total
            },
            &theta.tensors().into_iter().cloned().collect::<Vec<_>>(),
            1e-6,
        );
        for (w, e) in worst.iter_mut().zip([cls, mi, full]) {
            *w = w.max(e);
        }
    }
    let pass = worst.iter().all(|&e| e <= 1e-3);
    outcome(
        pass,
        format!(
            "max rel err L_cls {:.2e}, L_MI {:.2e}, full {:.2e} (<= 1e-3)",
            worst[0], worst[1], worst[2]
        ),
    )
}

// 2 ------------------------------------------------------------------------

fn transition(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| {
        if d[i] == 0.0 || d[j] == 0.0 {
            0.0
        } else {
            a[[i, j]] / (d[i] * d[j]).sqrt()
        }
    })
}

fn ppr_power_series(a: &Array2<f64>, alpha: f64) -> Array2<f64> {
    let t = transition(a);
    let n = a.nrows();
    let mut term = Array2::<f64>::eye(n) * alpha;
    let mut sum = term.clone();
    for _ in 0..20_000 {
        term = term.dot(&t) * (1.0 - alpha);
        sum += &term;
        if term.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-16 {
            break;
        }
    }
    sum
}

fn criterion_closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(2..=50);
        let g = random_graph(n, rng.random_range(0.05..0.4), 1, &mut rng);
        let alpha = rng.random_range(0.1..0.9);
        let d = ppr_diffusion(&g, alpha).unwrap();
        worst = worst.max(max_abs_diff(
            &d.matrix,
            &ppr_power_series(g.adjacency(), alpha),
        ));
    }
    let g = random_graph(12, 0.3, 1, &mut rng);
    let identity = ppr_diffusion(&g, 1.0).unwrap().matrix == Array2::<f64>::eye(12);
    let eigen = eigendecompose_sym(&normalized_laplacian(g.adjacency())).unwrap();
    let delta = (0..12).all(|i| {
        let psi = heat_wavelet(&eigen, 0.0, i);
        psi.iter()
            .enumerate()
            .all(|(j, &v)| v == if i == j { 1.0 } else { 0.0 })
    });
    let psi = Array1::from_shape_fn(12, |_| rng.random_range(-1.0..1.0));
    let cf = characteristic_function(psi.view(), 0.0) == (1.0, 0.0);
    let pass = worst <= 1e-8 && identity && delta && cf;
    outcome(
        pass,
        format!("ppr vs power series {worst:.2e} (<= 1e-8); alpha=1 identity {identity}; s=0 delta {delta}; t=0 (1,0) {cf}"),
    )
}

// 3 ------------------------------------------------------------------------

fn embedding(edges: &[(usize, usize)], n: usize) -> Array2<f64> {
    let g = Graph::from_edges(n, edges, Array2::zeros((n, 1))).unwrap();
    let eigen = eigendecompose_sym(&normalized_laplacian(g.adjacency())).unwrap();
    let config = WaveletConfig::spectral_default(&eigen.eigenvalues);
    structural_embedding(&g, &config).unwrap().into_inner()
}

fn row_gap(m: &Array2<f64>, i: usize, j: usize) -> f64 {
    m.row(i)
        .iter()
        .zip(m.row(j).iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn criterion_structural_roles() -> Outcome {
    let p3 = embedding(&[(0, 1), (1, 2)], 3);
    let star = embedding(&[(0, 1), (0, 2), (0, 3), (0, 4)], 5);
    let mut automorphic = row_gap(&p3, 0, 2);
    for leaf in 2..5 {
        automorphic = automorphic.max(row_gap(&star, 1, leaf));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut equivariance: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.random_range(4..=30);
        let g = random_graph(n, rng.random_range(0.1..0.5), 1, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let edges = g.edges();
        let permuted: Vec<(usize, usize)> =
            edges.iter().map(|&(i, j)| (perm[i], perm[j])).collect();
        let e = embedding(&edges, n);
        let ep = embedding(&permuted, n);
        for i in 0..n {
            let gap = e
                .row(i)
                .iter()
                .zip(ep.row(perm[i]).iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            equivariance = equivariance.max(gap);
        }
    }
    let pass = automorphic <= 1e-9 && equivariance <= 1e-9;
    outcome(
        pass,
        format!(
            "automorphic row gap {automorphic:.2e}, permutation gap {equivariance:.2e} (<= 1e-9)"
        ),
    )
}

// 4 ------------------------------------------------------------------------

fn oracle_softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

/// Confusion-matrix F1 and pairwise-comparison AUC.
fn oracle_metrics(logits: &Array2<f64>, labels: &[usize], idx: &[usize]) -> (f64, f64, f64) {
    let c = logits.ncols();
    let mut confusion = vec![vec![0usize; c]; c];
    let mut scores = Vec::new();
    for &i in idx {
        let row: Vec<f64> = logits.row(i).to_vec();
        let mut pred = 0;
        for k in 1..c {
            if row[k] > row[pred] {
                pred = k;
            }
        }
        confusion[labels[i]][pred] += 1;
        scores.push(oracle_softmax(&row));
    }
    let correct: usize = (0..c).map(|k| confusion[k][k]).sum();
    let micro = correct as f64 / idx.len() as f64;
    let mut macro_ = 0.0;
    for k in 0..c {
        let tp = confusion[k][k] as f64;
        let fp: f64 = (0..c)
            .filter(|&r| r != k)
            .map(|r| confusion[r][k] as f64)
            .sum();
        let fneg: f64 = (0..c)
            .filter(|&p| p != k)
            .map(|p| confusion[k][p] as f64)
            .sum();
        if tp + fp + fneg > 0.0 {
            macro_ += 2.0 * tp / (2.0 * tp + fp + fneg);
        }
    }
    macro_ /= c as f64;
    let mut auc = 0.0;
    let mut used = 0;
    for k in 0..c {
        let pos: Vec<f64> = idx
            .iter()
            .zip(&scores)
            .filter(|(&i, _)| labels[i] == k)
            .map(|(_, s)| s[k])
            .collect();
        let neg: Vec<f64> = idx
            .iter()
            .zip(&scores)
            .filter(|(&i, _)| labels[i] != k)
            .map(|(_, s)| s[k])
            .collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        let mut wins = 0.0;
        for p in &pos {
            for q in &neg {
                wins += if p > q {
                    1.0
                } else if p == q {
                    0.5
                } else {
                    0.0
                };
            }
        }
        auc += wins / (pos.len() * neg.len()) as f64;
        used += 1;
    }
    let auc = if used == 0 { 0.5 } else { auc / used as f64 };
    (auc, macro_, micro)
}

fn criterion_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..=40);
        let c = rng.random_range(2..=5);
        let coarse = rng.random_bool(0.5);
        let logits = Array2::from_shape_fn((n, c), |_| {
            let v: f64 = rng.random_range(-3.0..3.0);
            if coarse {
                v.round()
            } else {
                v
            }
        });
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let idx: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.7)).collect();
        let idx = if idx.is_empty() { vec![0] } else { idx };
        let m = evaluate(&logits, &labels, &idx);
        let (auc, f1_macro, f1_micro) = oracle_metrics(&logits, &labels, &idx);
        worst = worst
            .max((m.auc - auc).abs())
            .max((m.f1_macro - f1_macro).abs())
            .max((m.f1_micro - f1_micro).abs());
    }
    outcome(
        worst <= 1e-12,
        format!("max deviation from brute force {worst:.2e} (<= 1e-12)"),
    )
}

// 5 ------------------------------------------------------------------------

fn sbm_config(nodes: usize, p_in: f64, shift: f64) -> SbmConfig {
    SbmConfig {
        nodes,
        blocks: 2,
        p_in,
        p_out: 0.01,
        feature_dim: 16,
        feature_shift: shift,
        ..Default::default()
    }
}

fn criterion_degenerate() -> Outcome {
    let mut config = ExperimentConfig {
        seed: 5,
        trials: 1,
        baseline: true,
        output: None,
        dataset: DatasetSource::Sbm(sbm_config(200, 0.1, 0.3)),
        attacks: Vec::new(),
        wavelet: Default::default(),
        diffusion: Default::default(),
        estimator: Default::default(),
        schedule: TrainSchedule {
            beta: 0.0,
            ..Default::default()
        },
    };
    config.estimator.gamma1 = 0.0;
    config.estimator.gamma2 = 0.0;
    config.estimator.mu = 1.0;
    let base = gagsl::experiment::load_dataset_source(&config.dataset, config.seed).unwrap();
    let trial = run_trial(&base, &config, 0).unwrap();
    let g = trial.metrics;
    let b = trial.baseline.unwrap();
    let gap = (g.auc - b.auc)
        .abs()
        .max((g.f1_macro - b.f1_macro).abs())
        .max((g.f1_micro - b.f1_micro).abs());
    let same_structure = trial.a_star == *base.graph.adjacency();
    outcome(
        gap == 0.0 && same_structure,
        format!(
            "gagsl (auc {:.4}, f1-macro {:.4}, f1-micro {:.4}) vs gcn (auc {:.4}, f1-macro {:.4}, f1-micro {:.4}); A* == A {same_structure}",
            g.auc, g.f1_macro, g.f1_micro, b.auc, b.f1_macro, b.f1_micro
        ),
    )
}

// 6, 7 --------------------------------------------------------------------

/// Class-mean offset of the criterion-6 block model's features.
const ROBUSTNESS_FEATURE_SHIFT: f64 = 0.3;

fn robustness_runs() -> Vec<TrialOutput> {
    (0..5u64)
        .map(|seed| {
            let config = ExperimentConfig {
                seed,
                trials: 1,
                baseline: true,
                output: None,
                dataset: DatasetSource::Sbm(SbmConfig {
                    nodes: 300,
                    ..sbm_config(300, 0.08, ROBUSTNESS_FEATURE_SHIFT)
                }),
                attacks: vec![AttackSpec {
                    kind: AttackKind::EdgeAdd,
                    rate: 0.5,
                }],
                wavelet: Default::default(),
                diffusion: Default::default(),
                estimator: Default::default(),
                schedule: Default::default(),
            };
            let base =
                gagsl::experiment::load_dataset_source(&config.dataset, config.seed).unwrap();
            run_trial(&base, &config, 0).unwrap()
        })
        .collect()
}

fn criterion_robustness(runs: &[TrialOutput]) -> Outcome {
    let mean =
        |f: &dyn Fn(&TrialOutput) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
    let g = mean(&|t| t.metrics.f1_micro);
    let b = mean(&|t| t.baseline.unwrap().f1_micro);
    let per: Vec<String> = runs
        .iter()
        .map(|t| {
            format!(
                "{:.3}/{:.3}",
                t.metrics.f1_micro,
                t.baseline.unwrap().f1_micro
            )
        })
        .collect();
    outcome(
        g - b >= 0.02,
        format!(
            "mean test f1-micro gagsl {g:.4} vs gcn {b:.4}, gap {:+.4} (>= +0.02); per seed {}",
            g - b,
            per.join(" ")
        ),
    )
}

fn criterion_structure_quality(runs: &[TrialOutput]) -> Outcome {
    let ok = runs
        .iter()
        .filter(|t| t.pair_means.inter < t.pair_means.intra)
        .count();
    let per: Vec<String> = runs
        .iter()
        .map(|t| format!("{:.4}<{:.4}", t.pair_means.inter, t.pair_means.intra))
        .collect();
    outcome(
        ok == runs.len(),
        format!(
            "inter < intra mean A* weight on {ok}/{} seeds: {}",
            runs.len(),
            per.join(" ")
        ),
    )
}

// 8 ------------------------------------------------------------------------

fn criterion_infonce() -> Outcome {
    let mut worst: f64 = 0.0;
    for b in [2usize, 4, 8, 16] {
        let mut tape = Tape::eval();
        let u = tape.constant(Array2::from_elem((b, 3), 0.4));
        let v = tape.constant(Array2::from_elem((b, 3), 0.4));
        let sample: Vec<usize> = (0..b).collect();
        let l = infonce(&mut tape, u, v, 0.5, &sample);
        worst = worst.max((tape.scalar(l) - (b as f64).ln()).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut min = f64::INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(2..=20);
        let b = rng.random_range(2..=n);
        let p = rng.random_range(1..=6);
        let tau = rng.random_range(0.05..2.0);
        let mut tape = Tape::eval();
        let u = tape.constant(Array2::from_shape_fn((n, p), |_| {
            rng.random_range(-2.0..2.0)
        }));
        let v = tape.constant(Array2::from_shape_fn((n, p), |_| {
            rng.random_range(-2.0..2.0)
        }));
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        idx.truncate(b);
        let l = infonce(&mut tape, u, v, tau, &idx);
        min = min.min(tape.scalar(l));
    }
    outcome(
        worst <= 1e-9 && min >= 0.0,
        format!(
            "|loss - log B| {worst:.2e} (<= 1e-9); min loss over random instances {min:.4} (>= 0)"
        ),
    )
}

// 9 ------------------------------------------------------------------------

fn criterion_determinism() -> Outcome {
    let config = ExperimentConfig {
        seed: 9,
        trials: 1,
        baseline: true,
        output: None,
        dataset: DatasetSource::Sbm(sbm_config(100, 0.1, 0.5)),
        attacks: vec![AttackSpec {
            kind: AttackKind::EdgeAdd,
            rate: 0.25,
        }],
        wavelet: Default::default(),
        diffusion: Default::default(),
        estimator: Default::default(),
        schedule: TrainSchedule {
            epochs: 30,
            ..Default::default()
        },
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let bytes: Vec<Vec<u8>> = dirs
        .iter()
        .map(|d| {
            run_experiment(&config, d.path()).unwrap();
            std::fs::read(d.path().join("metrics.json")).unwrap()
        })
        .collect();
    let same = bytes[0] == bytes[1];
    outcome(
        same,
        format!(
            "metrics.json identical across two runs: {same} ({} bytes)",
            bytes[0].len()
        ),
    )
}

// 10 -----------------------------------------------------------------------

fn criterion_attacks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut exact = true;
    for _ in 0..20 {
        let g = random_graph(rng.random_range(10..60), 0.15, 2, &mut rng);
        let e = g.edge_count();
        for (kind, ratio) in [
            (AttackKind::EdgeAdd, 0.25),
            (AttackKind::EdgeAdd, 0.75),
            (AttackKind::EdgeDelete, 0.05),
            (AttackKind::EdgeDelete, 0.15),
        ] {
            let k = (ratio * e as f64).floor() as usize;
            let a = attack_edges(&g, kind, ratio, &mut rng).unwrap();
            let expected = if kind == AttackKind::EdgeAdd {
                e + k
            } else {
                e - k
            };
            exact &= a.edge_count() == expected;
        }
    }
    let x = Array2::from_shape_fn((100, 100), |_| rng.random_range(0.0..2.0));
    let r = x
        .rows()
        .into_iter()
        .map(|row| row.fold(f64::MIN, |a, &b| a.max(b)))
        .sum::<f64>()
        / 100.0;
    let g = Graph::new(Array2::zeros((100, 100)), x.clone()).unwrap();
    let lambda = 0.3;
    let noisy = attack_features(&g, lambda, &mut rng).unwrap();
    let noise = noisy.features() - &x;
    let m = noise.len() as f64;
    let mean = noise.sum() / m;
    let std = (noise.mapv(|v| (v - mean).powi(2)).sum() / (m - 1.0)).sqrt();
    let sigma = lambda * r;
    let band = 3.0 * sigma / (2.0 * (m - 1.0)).sqrt();
    let in_band = (std - sigma).abs() <= band;
    outcome(
        exact && in_band,
        format!(
            "edge counts exact {exact}; noise std {std:.5} vs {sigma:.5} +- {band:.5} over {} entries",
            noise.len()
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |id: &str, name: &str, limit: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let elapsed = start.elapsed();
        let status = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failures += 1;
        }
        let slow = if elapsed > limit {
            " [over runtime target]"
        } else {
            ""
        };
        println!(
            "{status} criterion {id:>2} {name}: {} [{:.1}s, target {}s]{slow}",
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    };
    let s = Duration::from_secs;
    report("1", "gradient correctness", s(30), &mut criterion_gradients);
    report(
        "2",
        "closed-form oracles",
        s(10),
        &mut criterion_closed_forms,
    );
    report(
        "3",
        "structural-role properties",
        s(20),
        &mut criterion_structural_roles,
    );
    report(
        "4",
        "metric oracle equivalence",
        s(5),
        &mut criterion_metrics,
    );
    report(
        "5",
        "degenerate equivalence",
        s(60),
        &mut criterion_degenerate,
    );
    let start = Instant::now();
    let runs = robustness_runs();
    let shared = start.elapsed();
    println!(
        "      criteria 6 and 7 share {:.1}s of training (target 600s)",
        shared.as_secs_f64()
    );
    report("6", "directional robustness", s(600), &mut || {
        criterion_robustness(&runs)
    });
    report("7", "structure quality", s(600), &mut || {
        criterion_structure_quality(&runs)
    });
    report("8", "infonce analytics", s(5), &mut criterion_infonce);
    report("9", "determinism", s(120), &mut criterion_determinism);
    report("10", "attack counting", s(5), &mut criterion_attacks);
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
