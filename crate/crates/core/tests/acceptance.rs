//! Acceptance criteria 1-11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! The full stochastic search of criterion 7 takes hours; it only runs when
//! the binary is invoked with `--ignored` (or `--include-ignored`). Otherwise
//! criterion 7 checks the search-loop mechanics on the smoke config.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use symham::cli::{self, ExperimentConfig, RunDir};
use symham::expr::{ExpressionTree, OperatorSequence, OperatorSets, TreeTemplate};
use symham::grad::{central_difference, softmax, Arith, Energy};
use symham::integrate::{leapfrog_step, rk2_step, step, Scheme, State, Trajectory};
use symham::metrics::{aggregate, mse_over_time, percentile, relative_energy_error, sai, Statistic};
use symham::rng::{substream, INIT};
use symham::search::{
    compute_score, empirical_loss, finetune, loss_and_gradient, node_operators, risk_quantile,
    risk_seeking_gradient, sample_choices, score_from_loss, search_loop, Candidate, CandidatePool,
    Controller, Provenance, SearchConfig, SearchState,
};
use symham::systems::{generate_dataset, sample_three_body_init, DatasetSpec, System, ThreeBodyParams};

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

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

/// `|a - b| ≤ rel · max(|a|, |b|)`, with an absolute floor for values that
/// are analytically zero.
fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) || (a - b).abs() <= 1e-9
}

// ---------------------------------------------------------------- 1

fn random_tree<R: Rng>(template: &TreeTemplate, sets: &OperatorSets, rng: &mut R) -> ExpressionTree {
    let ops = node_operators(template, sets).unwrap();
    let seq = OperatorSequence(ops.iter().map(|o| o[rng.gen_range(0..o.len())]).collect());
    let w = (0..template.weight_count())
        .map(|_| {
            let m: f64 = rng.gen_range(0.5..1.5);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    ExpressionTree::new(template.clone(), seq, w).unwrap()
}

fn random_point<R: Rng>(system: &System, rng: &mut R) -> State {
    match system {
        System::ThreeBody(params) => sample_three_body_init(rng, params),
        _ => State::new(vec![rng.gen_range(-1.0..1.0)], vec![rng.gen_range(-1.0..1.0)]),
    }
}

/// A tree and point are usable when evaluation and partials are finite and
/// moderate, i.e. the point is away from singular inputs.
fn regular(tree: &ExpressionTree, s: &State) -> bool {
    let Ok(h) = tree.evaluate(&s.p, &s.q) else { return false };
    let Ok((dp, dq)) = tree.partials(&s.p, &s.q) else { return false };
    h.abs() < 1e4 && dp.iter().chain(&dq).all(|g| g.abs() < 1e4)
}

/// Singular-input screen that does not consult the gradient under test:
/// differences at a step 100 times wider must agree within 1%, so the
/// function has no nearby pole or kink.
fn smooth_nearby<F: Fn(&[f64]) -> Option<f64>>(f: F, x: &[f64], fd: &[f64]) -> bool {
    let Some(wide) = central_difference(&f, x, 1e-3) else { return false };
    wide.iter().zip(fd).all(|(a, b)| close(*a, *b, 1e-2))
}

fn criterion_1() -> Outcome {
    let mut rng = substream(11, &[1]);
    let mut worst_partial: f64 = 0.0;
    let mut worst_weight: f64 = 0.0;
    let mut failures = Vec::new();
    let mut checked = 0;
    for (system, sets, scheme) in [
        (System::nonseparable(), OperatorSets::nonseparable(), Scheme::Rk2),
        (System::three_body(), OperatorSets::three_body(), Scheme::Leapfrog),
    ] {
        let template = system.template().build();
        let data = generate_dataset(
            &DatasetSpec {
                system,
                count: 2,
                end: 0.3,
                ..if matches!(system, System::ThreeBody(_)) {
                    DatasetSpec::three_body_train(0.3)
                } else {
                    DatasetSpec::nonseparable_train()
                }
            },
            4,
        )
        .unwrap()
        .trajectories;
        let mut accepted = 0;
        while accepted < 50 {
            let tree = random_tree(&template, &sets, &mut rng);
            let s = random_point(&system, &mut rng);
            if !regular(&tree, &s) || !data.iter().flat_map(|t| &t.states).all(|x| regular(&tree, x)) {
                continue;
            }
            let w = tree.weights().to_vec();
            let Ok((loss, g)) = loss_and_gradient(&tree, &w, &data, scheme, 2) else { continue };
            // Same moderate-magnitude bound as for H and its partials.
            if !loss.is_finite() || loss > 1e4 || g.iter().any(|x| x.abs() > 1e4) {
                continue;
            }
            let loss_at = |x: &[f64]| empirical_loss(&tree, x, &data, scheme, 2).ok().filter(|l| l.is_finite());
            let Some(fd_w) = central_difference(loss_at, &w, 1e-5) else { continue };
            if !smooth_nearby(loss_at, &w, &fd_w) {
                continue;
            }
            let (dp, dq) = tree.partials(&s.p, &s.q).unwrap();
            let y = s.to_vec();
            let d = s.dim();
            let h_at = |x: &[f64]| tree.evaluate(&x[..d], &x[d..]).ok();
            let fd_x = central_difference(h_at, &y, 1e-5).unwrap();
            if !smooth_nearby(h_at, &y, &fd_x) {
                continue;
            }
            accepted += 1;
            checked += 1;
            for (a, b) in dp.iter().chain(&dq).zip(&fd_x) {
                let r = (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
                if !close(*a, *b, 1e-4) {
                    failures.push(format!("∂H {} vs fd {} for {}", a, b, tree.sequence()));
                } else if (a - b).abs() > 1e-9 {
                    worst_partial = worst_partial.max(r);
                }
            }
            for (a, b) in g.iter().zip(&fd_w) {
                let r = (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
                if !close(*a, *b, 1e-4) {
                    failures.push(format!("∂L {} vs fd {} for {}", a, b, tree.sequence()));
                } else if (a - b).abs() > 1e-9 {
                    worst_weight = worst_weight.max(r);
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{checked} trees; worst relative error: partials {worst_partial:.2e}, weight gradient {worst_weight:.2e}{}",
            failures.first().map(|f| format!("; first failure: {f}")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- 2, 3

/// `H = ½(p² + q²)`.
struct Oscillator;

impl Energy for Oscillator {
    fn param_count(&self) -> usize {
        0
    }
    fn energy<A: Arith>(&self, ctx: &mut A, _: &[A::Value], p: &[A::Value], q: &[A::Value]) -> symham::Result<A::Value> {
        let p2 = ctx.mul(p[0], p[0]);
        let q2 = ctx.mul(q[0], q[0]);
        let s = ctx.add(p2, q2);
        Ok(ctx.scale(s, 0.5))
    }
}

fn criterion_2() -> Outcome {
    let s = State::new(vec![0.0], vec![1.0]);
    let lf = leapfrog_step(&Oscillator, &[], &s, 0.1, 1).unwrap();
    let rk = rk2_step(&Oscillator, &[], &s, 0.1, 1).unwrap();
    // Kick p = -0.05, drift q = 0.995, kick p = -0.05 - 0.05·0.995.
    let lf_ok = (lf.p[0] + 0.09975).abs() <= 1e-12 && (lf.q[0] - 0.995).abs() <= 1e-12;
    // Midpoint (p, q) = (-0.05, 1), then p = -0.1, q = 1 - 0.005.
    let rk_ok = (rk.p[0] + 0.1).abs() <= 1e-12 && (rk.q[0] - 0.995).abs() <= 1e-12;

    let mut chain_ok = true;
    let start = State::new(vec![0.3], vec![-0.8]);
    for scheme in [Scheme::Leapfrog, Scheme::Rk2] {
        for k in [1usize, 2, 5, 20] {
            let once = step(scheme, &Oscillator, &[], &start, 0.1, k).unwrap();
            let mut s = start.clone();
            for _ in 0..k {
                s = step(scheme, &Oscillator, &[], &s, 0.1 / k as f64, 1).unwrap();
            }
            chain_ok &= once == s;
        }
    }
    outcome(
        lf_ok && rk_ok && chain_ok,
        format!(
            "leapfrog ({:.15}, {:.15}), rk2 ({:.15}, {:.15}), substep chaining bit-exact: {chain_ok}",
            lf.p[0], lf.q[0], rk.p[0], rk.q[0]
        ),
    )
}

fn max_drift(scheme: Scheme) -> f64 {
    let h = |s: &State| 0.5 * (s.p[0] * s.p[0] + s.q[0] * s.q[0]);
    let mut s = State::new(vec![0.0], vec![1.0]);
    let h0 = h(&s);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        s = step(scheme, &Oscillator, &[], &s, 0.01, 1).unwrap();
        worst = worst.max((h(&s) - h0).abs() / h0);
    }
    worst
}

fn criterion_3() -> Outcome {
    let lf = max_drift(Scheme::Leapfrog);
    let rk = max_drift(Scheme::Rk2);
    let map = |x: &[f64], i: usize| {
        let s = leapfrog_step(&Oscillator, &[], &State::new(vec![x[0]], vec![x[1]]), 0.01, 1).ok()?;
        Some(if i == 0 { s.p[0] } else { s.q[0] })
    };
    let x = [0.4, -0.7];
    let row0 = central_difference(|y| map(y, 0), &x, 1e-5).unwrap();
    let row1 = central_difference(|y| map(y, 1), &x, 1e-5).unwrap();
    let det = row0[0] * row1[1] - row0[1] * row1[0];
    outcome(
        lf < 1e-3 && (det - 1.0).abs() <= 1e-10 && rk > lf,
        format!("drift leapfrog {lf:.3e}, rk2 {rk:.3e}; det J - 1 = {:.2e}", det - 1.0),
    )
}

// ---------------------------------------------------------------- 4

/// Smallest attained score `s` with at least a `(1 - ν)` fraction of the
/// scores `≤ s`, using exact integer comparisons for ν = num/den.
fn quantile_by_enumeration(scores: &[f64], num: usize, den: usize) -> f64 {
    let m = scores.len();
    let mut candidates = scores.to_vec();
    candidates.sort_by(f64::total_cmp);
    for s in candidates {
        let below = scores.iter().filter(|&&x| x <= s).count();
        if den * below >= (den - num) * m {
            return s;
        }
    }
    unreachable!()
}

fn criterion_4() -> Outcome {
    let mut score_ok = true;
    for b in [1u32, 2, 4, 8, 1024] {
        for a in 0..50u32 {
            let l = a as f64 / b as f64;
            let exact = b as f64 / (a + b) as f64;
            score_ok &= score_from_loss(l) == exact;
        }
    }
    score_ok &= score_from_loss(0.0) == 1.0 && score_from_loss(3.0) == 0.25;

    let mut cases = 0usize;
    let mut quant_ok = true;
    let levels = [0.1, 0.2, 0.3];
    for m in 1..=8usize {
        for code in 0..3usize.pow(m as u32) {
            let mut c = code;
            let scores: Vec<f64> = (0..m)
                .map(|_| {
                    let v = levels[c % 3];
                    c /= 3;
                    v
                })
                .collect();
            for (num, den) in [(1usize, 4usize), (1, 2)] {
                let nu = num as f64 / den as f64;
                quant_ok &= risk_quantile(&scores, nu).unwrap() == quantile_by_enumeration(&scores, num, den);
                cases += 1;
            }
        }
    }
    outcome(
        score_ok && quant_ok,
        format!("dyadic score identities: {score_ok}; {cases} quantile cases match enumeration: {quant_ok}"),
    )
}

// ---------------------------------------------------------------- 5

/// Upper-tail mean of the score distribution above its `(1 - ν)` quantile.
fn tail_objective(logits: &[f64], scores: &[f64], nu: f64) -> f64 {
    let probs = softmax(logits);
    let mut outcomes: Vec<(f64, f64)> = scores.iter().copied().zip(probs).collect();
    outcomes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    let mut cdf: f64 = 0.0;
    for (s, p) in outcomes {
        let lo = cdf.max(1.0 - nu);
        cdf += p;
        let hi = cdf;
        if hi > lo {
            acc += s * (hi - lo);
        }
    }
    acc / nu
}

fn criterion_5() -> Outcome {
    let scores = [0.9, 0.1];
    let nu = 0.5;
    let logits = vec![(0.2f64 / 0.8).ln(), 0.0];
    let brute = central_difference(|x| Some(tail_objective(x, &scores, nu)), &logits, 1e-6).unwrap();

    let controller = Controller {
        logits: vec![logits.clone()],
    };
    let pmfs = controller.pmfs();
    let mut rng = substream(5, &[5]);
    let batches = 100_000;
    let batch = 20;
    let mut mean = [0.0; 2];
    for _ in 0..batches {
        let samples: Vec<(Vec<usize>, f64)> = (0..batch)
            .map(|_| {
                let c = sample_choices(&pmfs, 0.0, &mut rng);
                let s = scores[c[0]];
                (c, s)
            })
            .collect();
        let g = risk_seeking_gradient(&controller, &samples, nu).unwrap();
        mean[0] += g[0][0] / batches as f64;
        mean[1] += g[0][1] / batches as f64;
    }
    let rel = (mean[0] - brute[0]).abs() / brute[0].abs();
    outcome(
        rel <= 0.02 && (mean[1] - brute[1]).abs() <= 0.02 * brute[1].abs(),
        format!(
            "estimator mean ({:.4}, {:.4}) vs brute force ({:.4}, {:.4}), relative error {:.2}% (batch size {batch})",
            mean[0],
            mean[1],
            brute[0],
            brute[1],
            100.0 * rel
        ),
    )
}

// ---------------------------------------------------------------- 6, 8, 9

/// Score-stage fit of a fixed sequence, restarting from a fresh initial
/// draw while the best loss stays above `accept`, then fine-tuned.
fn fit_known_structure(
    template: &TreeTemplate,
    sequence: &OperatorSequence,
    data: &[Trajectory],
    cfg: &SearchConfig,
    accept: f64,
    attempts: u64,
) -> (Candidate, u64) {
    let mut best: Option<Candidate> = None;
    let mut used = 0;
    for attempt in 0..attempts {
        used = attempt + 1;
        let mut rng = substream(cfg.seed, &[INIT, attempt]);
        let prov = Provenance {
            iteration: 0,
            sample: attempt as usize,
        };
        let c = compute_score(template, sequence, data, cfg, &mut rng, prov).unwrap();
        let done = c.loss.is_some_and(|l| l < accept);
        if best.as_ref().is_none_or(|b| c.score > b.score) {
            best = Some(c);
        }
        if done {
            break;
        }
    }
    let mut pool = CandidatePool::new(1);
    pool.insert(best.expect("at least one attempt"));
    let tuned = finetune(template, &pool, data, cfg).unwrap().remove(0);
    (tuned, used)
}

static NONSEPARABLE_FIT: OnceLock<ExpressionTree> = OnceLock::new();

fn nonseparable_fit() -> &'static ExpressionTree {
    NONSEPARABLE_FIT.get_or_init(|| {
        let data = generate_dataset(&DatasetSpec::nonseparable_train(), 0).unwrap();
        let template = TreeTemplate::nonseparable();
        let seq = OperatorSequence::nonseparable_target();
        let (c, _) = fit_known_structure(&template, &seq, &data.trajectories, &SearchConfig::nonseparable(), 1e-4, 3);
        ExpressionTree::new(template, seq, c.weights).unwrap()
    })
}

fn criterion_6() -> Outcome {
    let tree = nonseparable_fit();
    let w = tree.weights();
    // exp(w3·(w1·p² + w2·q⁴))·w4 folds to w4·exp(-a·p² - b·q⁴).
    let a = -w[0] * w[2];
    let b = -w[1] * w[2];
    let ok = (a - 1.0).abs() <= 1e-2 && (b - 1.1).abs() <= 1e-2;
    outcome(
        ok,
        format!("folded coefficients ({a:.7}, {b:.7}), prefactor {:.7}: {}", w[3], tree.fold().render()),
    )
}

fn criterion_8() -> Outcome {
    let tree = nonseparable_fit();
    let test = generate_dataset(&DatasetSpec::nonseparable_test(), 0).unwrap();
    let grid = test.grid().with_substeps(20).unwrap();
    let system = System::nonseparable();
    let mut mse = Vec::new();
    let mut energy = Vec::new();
    for obs in &test.trajectories {
        let pred = match symham::integrate::rollout_eval(tree, tree.weights(), obs.initial(), &grid, Scheme::Rk2) {
            Ok(p) => p,
            Err(e) => return outcome(false, format!("rollout failed: {e}")),
        };
        mse.push(mse_over_time(&pred, obs).unwrap());
        energy.push(relative_energy_error(|s| system.hamiltonian(s), &pred).unwrap());
    }
    let max_mse = aggregate(&mse, Statistic::Mean).unwrap().into_iter().fold(0.0, f64::max);
    let max_e = aggregate(&energy, Statistic::Mean).unwrap().into_iter().fold(0.0, f64::max);
    outcome(
        max_mse <= 1e-3 && max_e <= 1e-2,
        format!(
            "{} test trajectories on [0, 60]: max mean MSE {max_mse:.3e}, max mean E_rel {max_e:.3e}",
            test.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let template = TreeTemplate::three_body();
    let seq = OperatorSequence::three_body_target();
    let mut w = vec![0.5005, 0.4981, 0.4996, 0.4985, 0.4976, 0.5024, 1.0];
    let pairs = [-0.9985, -0.9970, -0.9949];
    w.extend(pairs);
    w.push(1.0);
    let reported = ExpressionTree::new(template.clone(), seq.clone(), w).unwrap();
    let state = symham::systems::circular_orbit(1.0, 0.0, &ThreeBodyParams::default());
    let zero = State::new(vec![0.0; 6], state.q.clone());
    let value = reported.evaluate(&zero.p, &zero.q).unwrap();
    let hand = pairs.iter().sum::<f64>() / 3f64.sqrt();
    let structure_ok = (value - hand).abs() <= 1e-6;

    let data = generate_dataset(&DatasetSpec::three_body_train(7.0), 0).unwrap();
    let (c, attempts) = fit_known_structure(
        &template,
        &seq,
        &data.trajectories,
        &SearchConfig::three_body(),
        1e-4,
        3,
    );
    let fitted = ExpressionTree::new(template, seq, c.weights).unwrap();
    let coefs = fitted.fold().coefficients();
    let mut worst: f64 = 0.0;
    for (term, v) in &coefs {
        let target = if term.starts_with('p') { 0.5 } else { -1.0 };
        worst = worst.max(((v - target) / target).abs());
    }
    let fit_ok = coefs.len() == 9 && worst <= 0.02;
    outcome(
        structure_ok && fit_ok,
        format!(
            "symmetric configuration H = {value:.9} vs hand {hand:.9}; fitted coefficients worst relative deviation {:.3}% ({attempts} init draw(s))",
            100.0 * worst
        ),
    )
}

// ---------------------------------------------------------------- 7, 11

fn smoke_config() -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join("nonseparable_smoke.json")).unwrap()
}

fn criterion_7_smoke() -> Outcome {
    let cfg = smoke_config();
    let data = generate_dataset(&cfg.train_spec(), cfg.seed).unwrap();
    let template = cfg.template();
    let scfg = cfg.search_config();
    let mut state = SearchState::new(&template, &cfg.operators, &scfg).unwrap();
    let mut iterations = Vec::new();
    let mut ok = true;
    search_loop(&template, &cfg.operators, &data.trajectories, &scfg, &mut state, |r, s| {
        iterations.push(r.iteration);
        ok &= r.scores.len() == scfg.samples;
        ok &= s.pool.len() <= scfg.pool_size;
        ok &= s.pool.entries().windows(2).all(|w| w[0].score >= w[1].score);
        ok &= s.pool.entries().iter().all(|c| c.score > 0.0 && c.score <= 1.0);
        Ok(())
    })
    .unwrap();
    ok &= iterations == (0..scfg.iterations).collect::<Vec<_>>();
    let tuned = finetune(&template, &state.pool, &data.trajectories, &scfg).unwrap();
    ok &= tuned.iter().zip(state.pool.entries()).all(|(t, c)| t.score >= c.score || t.sequence != c.sequence);
    outcome(
        ok,
        format!(
            "smoke mechanics only ({} iterations, pool {} of {}); run with --ignored for the full 3-seed search",
            iterations.len(),
            state.pool.len(),
            scfg.pool_size
        ),
    )
}

fn criterion_7_full() -> Outcome {
    let base = ExperimentConfig::load(&configs_dir().join("nonseparable.json")).unwrap();
    let target = OperatorSequence::nonseparable_target();
    let mut tops = Vec::new();
    for seed in 0..3 {
        let cfg = ExperimentConfig { seed, ..base.clone() };
        let data = generate_dataset(&cfg.train_spec(), seed).unwrap();
        let template = cfg.template();
        let scfg = cfg.search_config();
        let mut state = SearchState::new(&template, &cfg.operators, &scfg).unwrap();
        search_loop(&template, &cfg.operators, &data.trajectories, &scfg, &mut state, |r, _| {
            eprintln!("seed {seed} iteration {} best {:.6}", r.iteration, r.best_score);
            Ok(())
        })
        .unwrap();
        let tuned = finetune(&template, &state.pool, &data.trajectories, &scfg).unwrap();
        tops.push(tuned[0].sequence.clone());
    }
    let hits = tops.iter().filter(|s| **s == target).count();
    outcome(
        hits >= 1,
        format!(
            "{hits} of 3 seeds pooled the true sequence on top; tops: {}",
            tops.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" | ")
        ),
    )
}

fn run_smoke_pipeline(dir: &Path, workers: usize) -> symham::Result<()> {
    let mut cfg = smoke_config();
    cfg.output = dir.to_path_buf();
    let run = RunDir::new(dir);
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .unwrap()
        .install(|| {
            let (_, test) = cli::gen_data(&cfg, &run)?;
            let best = cli::search(&cfg, &run, false)?.expect("smoke search pools a candidate");
            cli::eval(&cfg, &run, &best.tree, &test)?;
            Ok(())
        })
}

fn criterion_11() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("one_worker");
    let b = tmp.path().join("three_workers");
    run_smoke_pipeline(&a, 1).unwrap();
    run_smoke_pipeline(&b, 3).unwrap();
    let files = [
        "search/pool.json",
        "search/finetuned.json",
        "search/best.json",
        "search/log.jsonl",
        "eval/mse.csv",
        "eval/energy_error.csv",
        "eval/sai.csv",
        "eval/summary.json",
    ];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| fs::read(a.join(f)).unwrap() != fs::read(b.join(f)).unwrap())
        .collect();
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} artifacts bit-identical with 1 and 3 workers", files.len())
        } else {
            format!("differing artifacts: {differing:?}")
        },
    )
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let flat = |end: f64| -> Vec<f64> {
        let d = generate_dataset(&DatasetSpec::three_body_train(end), 0).unwrap();
        d.trajectories.iter().flat_map(|t| sai(t).unwrap()).collect()
    };
    let short = flat(3.0);
    let long = flat(7.0);
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let (s_max, l_max) = (max(&short), max(&long));
    let s_99 = percentile(&short, 99.0).unwrap();
    let l_99 = percentile(&long, 99.0).unwrap();
    outcome(
        l_max > s_max && l_99 > s_99,
        format!("SAI max {l_max:.4} vs {s_max:.4}, p99 {l_99:.4} vs {s_99:.4} ([0,7] vs [0,3])"),
    )
}

// ----------------------------------------------------------------

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let full = args.iter().any(|a| a == "--ignored" || a == "--include-ignored");
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let seven: fn() -> Outcome = if full { criterion_7_full } else { criterion_7_smoke };
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "gradient correctness", criterion_1),
        (2, "integrator exactness", criterion_2),
        (3, "symplectic behavior", criterion_3),
        (4, "score and quantile algebra", criterion_4),
        (5, "policy-gradient estimator", criterion_5),
        (6, "coefficient recovery", criterion_6),
        (7, "non-separable search", seven),
        (8, "trajectory fidelity", criterion_8),
        (9, "three-body structure", criterion_9),
        (10, "SAI stiffness ordering", criterion_10),
        (11, "determinism", criterion_11),
    ];
    // Bare numeric arguments select criteria; cargo passes its own flags too.
    let selected: Vec<u32> = args.iter().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {name}: {} [{:.1}s] {}",
            if result.pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
