//! Policy-gradient search over operator sequences of a fixed tree template.

mod adam;
mod controller;
mod loss;
mod pool;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState};
pub use controller::{
    node_operators, policy_gradient_update, risk_quantile, risk_seeking_gradient, sample_choices,
    sample_sequence, Controller,
};
pub use loss::{empirical_loss, loss_and_gradient};
pub use pool::{score_from_loss, Candidate, CandidatePool, Provenance};

use crate::error::{Error, Result};
use crate::expr::{ExpressionTree, OperatorSequence, OperatorSets, TreeTemplate};
use crate::integrate::{Scheme, Trajectory};
use crate::rng::{substream, SEARCH};

fn default_init_range() -> [f64; 2] {
    [-1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub iterations: usize,
    pub samples: usize,
    pub epsilon: f64,
    pub risk_quantile: f64,
    pub score_steps: usize,
    pub score_rate: f64,
    pub finetune_steps: usize,
    pub finetune_rate: f64,
    pub substeps: usize,
    pub pool_size: usize,
    pub scheme: Scheme,
    pub controller_rate: f64,
    /// Initial weights are drawn uniformly from this interval.
    #[serde(default = "default_init_range")]
    pub init_range: [f64; 2],
    /// Experiment configs supply this from their top-level seed.
    #[serde(default)]
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            samples: 15,
            epsilon: 0.2,
            risk_quantile: 0.25,
            score_steps: 150,
            score_rate: 0.1,
            finetune_steps: 300,
            finetune_rate: 0.001,
            substeps: 20,
            pool_size: 15,
            scheme: Scheme::Rk2,
            controller_rate: 1.0,
            init_range: default_init_range(),
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn nonseparable() -> Self {
        Self::default()
    }

    pub fn three_body() -> Self {
        Self {
            samples: 10,
            scheme: Scheme::Leapfrog,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Usage(format!("search.{m}")));
        if self.samples == 0 {
            return bad("samples must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(self.risk_quantile > 0.0 && self.risk_quantile <= 1.0) {
            return bad("risk_quantile must lie in (0, 1]");
        }
        if self.substeps == 0 {
            return bad("substeps must be at least 1");
        }
        if !(self.score_rate > 0.0 && self.finetune_rate > 0.0 && self.controller_rate >= 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.init_range[0] <= self.init_range[1]) {
            return bad("init_range must be an ordered interval");
        }
        Ok(())
    }
}

fn draw_weights<R: Rng + ?Sized>(n: usize, range: [f64; 2], rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(range[0]..=range[1])).collect()
}

/// Adam on the empirical loss from `start`, tracking the minimum loss seen.
/// Stops at the first non-finite loss.
fn minimize(
    tree: &ExpressionTree,
    start: &[f64],
    best: Option<(f64, Vec<f64>)>,
    data: &[Trajectory],
    config: &SearchConfig,
    steps: usize,
    rate: f64,
) -> Result<Option<(f64, Vec<f64>)>> {
    let mut best = best;
    let mut theta = start.to_vec();
    let mut adam = AdamState::new(theta.len());
    let keep = |loss: f64, theta: &[f64], best: &mut Option<(f64, Vec<f64>)>| {
        if best.as_ref().is_none_or(|b| loss < b.0) {
            *best = Some((loss, theta.to_vec()));
        }
    };
    for _ in 0..steps {
        let (loss, grad) = loss_and_gradient(tree, &theta, data, config.scheme, config.substeps)?;
        if !loss.is_finite() {
            return Ok(best);
        }
        keep(loss, &theta, &mut best);
        adam_step(&mut theta, &grad, &mut adam, rate)?;
    }
    let loss = empirical_loss(tree, &theta, data, config.scheme, config.substeps)?;
    if loss.is_finite() {
        keep(loss, &theta, &mut best);
    }
    Ok(best)
}

fn candidate(
    sequence: OperatorSequence,
    init: Vec<f64>,
    best: Option<(f64, Vec<f64>)>,
    provenance: Provenance,
) -> Candidate {
    match best {
        Some((loss, weights)) => Candidate {
            sequence,
            weights,
            init,
            loss: Some(loss),
            score: score_from_loss(loss),
            provenance,
        },
        None => Candidate {
            sequence,
            weights: init.clone(),
            init,
            loss: None,
            score: 0.0,
            provenance,
        },
    }
}

/// Fits the weights of `sequence` with the score-stage budget and scores the
/// best loss reached. Numerical failure gives a failed candidate with score 0.
pub fn compute_score<R: Rng + ?Sized>(
    template: &TreeTemplate,
    sequence: &OperatorSequence,
    data: &[Trajectory],
    config: &SearchConfig,
    rng: &mut R,
    provenance: Provenance,
) -> Result<Candidate> {
    let init = draw_weights(template.weight_count(), config.init_range, rng);
    let tree = ExpressionTree::new(template.clone(), sequence.clone(), init.clone())?;
    let best = minimize(&tree, &init, None, data, config, config.score_steps, config.score_rate)?;
    Ok(candidate(sequence.clone(), init, best, provenance))
}

/// Continues optimizing a pooled candidate with fresh Adam moments at the
/// fine-tuning rate. The recorded loss never increases.
pub fn finetune_candidate(
    template: &TreeTemplate,
    c: &Candidate,
    data: &[Trajectory],
    config: &SearchConfig,
) -> Result<Candidate> {
    let tree = ExpressionTree::new(template.clone(), c.sequence.clone(), c.weights.clone())?;
    let start = c.loss.map(|l| (l, c.weights.clone()));
    let best = minimize(
        &tree,
        &c.weights,
        start,
        data,
        config,
        config.finetune_steps,
        config.finetune_rate,
    )?;
    Ok(candidate(c.sequence.clone(), c.init.clone(), best, c.provenance))
}

/// Fine-tunes every pooled candidate and returns them re-ranked, best first.
pub fn finetune(
    template: &TreeTemplate,
    pool: &CandidatePool,
    data: &[Trajectory],
    config: &SearchConfig,
) -> Result<Vec<Candidate>> {
    if pool.is_empty() {
        return Err(Error::Structural("cannot fine-tune an empty pool".into()));
    }
    let mut tuned = pool
        .entries()
        .par_iter()
        .map(|c| finetune_candidate(template, c, data, config))
        .collect::<Result<Vec<_>>>()?;
    tuned.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.provenance.cmp(&b.provenance)));
    Ok(tuned)
}

/// Everything needed to continue a search: the checkpoint contents. The
/// random state is implied by `(seed, next_iteration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub next_iteration: usize,
    pub controller: Controller,
    pub pool: CandidatePool,
}

impl SearchState {
    pub fn new(template: &TreeTemplate, sets: &OperatorSets, config: &SearchConfig) -> Result<Self> {
        Ok(Self {
            next_iteration: 0,
            controller: Controller::uniform(template, sets)?,
            pool: CandidatePool::new(config.pool_size),
        })
    }
}

/// Per-iteration summary emitted by [`search_loop`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub sequences: Vec<String>,
    pub scores: Vec<f64>,
    pub quantile: f64,
    pub best_score: f64,
    pub mean_score: f64,
    pub pool_best_score: Option<f64>,
    pub pool_best_expression: Option<String>,
}

/// Runs iterations `state.next_iteration..config.iterations`, calling
/// `observe` after each one with its record and the updated state.
pub fn search_loop<F>(
    template: &TreeTemplate,
    sets: &OperatorSets,
    data: &[Trajectory],
    config: &SearchConfig,
    state: &mut SearchState,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(&IterationRecord, &SearchState) -> Result<()>,
{
    config.validate()?;
    let operators = node_operators(template, sets)?;
    if state.controller.logits.len() != operators.len()
        || state
            .controller
            .logits
            .iter()
            .zip(&operators)
            .any(|(l, o)| l.len() != o.len())
    {
        return Err(Error::Structural("controller does not match the template".into()));
    }
    while state.next_iteration < config.iterations {
        let it = state.next_iteration;
        let pmfs = state.controller.pmfs();
        let scored = (0..config.samples)
            .into_par_iter()
            .map(|j| {
                let mut rng = substream(config.seed, &[SEARCH, it as u64, j as u64]);
                let (seq, choices) = sample_sequence(&pmfs, &operators, config.epsilon, &mut rng);
                let prov = Provenance { iteration: it, sample: j };
                let c = compute_score(template, &seq, data, config, &mut rng, prov)?;
                Ok((choices, c))
            })
            .collect::<Result<Vec<_>>>()?;

        let samples: Vec<(Vec<usize>, f64)> =
            scored.iter().map(|(ch, c)| (ch.clone(), c.score)).collect();
        let scores: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let quantile = risk_quantile(&scores, config.risk_quantile)?;
        policy_gradient_update(
            &mut state.controller,
            &samples,
            config.risk_quantile,
            config.controller_rate,
        )?;
        let sequences = scored.iter().map(|(_, c)| c.sequence.to_string()).collect();
        for (_, c) in scored {
            state.pool.insert(c);
        }
        state.next_iteration += 1;

        let pool_best = state.pool.best();
        let record = IterationRecord {
            iteration: it,
            sequences,
            best_score: scores.iter().copied().fold(0.0, f64::max),
            mean_score: scores.iter().sum::<f64>() / scores.len() as f64,
            scores,
            quantile,
            pool_best_score: pool_best.map(|c| c.score),
            pool_best_expression: pool_best
                .map(|c| ExpressionTree::new(template.clone(), c.sequence.clone(), c.weights.clone()))
                .transpose()?
                .map(|t| t.fold().render()),
        };
        log::info!(
            "iteration {it}: best {:.6}, mean {:.6}, quantile {:.6}",
            record.best_score,
            record.mean_score,
            record.quantile
        );
        observe(&record, state)?;
    }
    Ok(())
}
