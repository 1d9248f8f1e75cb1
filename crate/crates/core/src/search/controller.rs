use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Operator, OperatorSequence, OperatorSets, TreeTemplate};
use crate::grad::{logprob_gradient, softmax};

/// Per-node categorical logits over each node's operator set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub logits: Vec<Vec<f64>>,
}

impl Controller {
    /// Uniform controller for `template` with operators drawn from `sets`.
    pub fn uniform(template: &TreeTemplate, sets: &OperatorSets) -> Result<Self> {
        let logits = node_operators(template, sets)?
            .iter()
            .map(|ops| vec![0.0; ops.len()])
            .collect();
        Ok(Self { logits })
    }

    pub fn pmfs(&self) -> Vec<Vec<f64>> {
        self.logits.iter().map(|l| softmax(l)).collect()
    }
}

/// The operator choices of every node, in inorder.
pub fn node_operators(template: &TreeTemplate, sets: &OperatorSets) -> Result<Vec<Vec<Operator>>> {
    sets.validate()?;
    template
        .kinds()
        .into_iter()
        .enumerate()
        .map(|(i, kind)| {
            let ops = sets.for_kind(kind);
            if ops.is_empty() {
                Err(Error::Structural(format!("no {kind:?} operators for node {i}")))
            } else {
                Ok(ops)
            }
        })
        .collect()
}

/// ε-greedy draw: per node, uniform with probability ε, else from the PMF.
/// Returns the chosen index per node.
pub fn sample_choices<R: Rng + ?Sized>(pmfs: &[Vec<f64>], epsilon: f64, rng: &mut R) -> Vec<usize> {
    pmfs.iter()
        .map(|pmf| {
            if rng.gen::<f64>() < epsilon {
                rng.gen_range(0..pmf.len())
            } else {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (k, &p) in pmf.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k;
                    }
                }
                pmf.len() - 1
            }
        })
        .collect()
}

pub fn sample_sequence<R: Rng + ?Sized>(
    pmfs: &[Vec<f64>],
    operators: &[Vec<Operator>],
    epsilon: f64,
    rng: &mut R,
) -> (OperatorSequence, Vec<usize>) {
    let choices = sample_choices(pmfs, epsilon, rng);
    let seq = choices
        .iter()
        .zip(operators)
        .map(|(&k, ops)| ops[k])
        .collect();
    (OperatorSequence(seq), choices)
}

/// Lower nearest-rank `(1 − ν)` quantile: element `⌈(1−ν)M⌉ − 1` of the
/// ascending sort.
pub fn risk_quantile(scores: &[f64], nu: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Structural("quantile of an empty score list".into()));
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    let rank = ((1.0 - nu) * m).ceil().max(1.0) as usize;
    Ok(s[rank.min(s.len()) - 1])
}

/// Risk-seeking estimate of the controller gradient from one batch of
/// `(choices, score)` samples.
pub fn risk_seeking_gradient(
    controller: &Controller,
    samples: &[(Vec<usize>, f64)],
    nu: f64,
) -> Result<Vec<Vec<f64>>> {
    let scores: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let threshold = risk_quantile(&scores, nu)?;
    let mut grad: Vec<Vec<f64>> = controller.logits.iter().map(|l| vec![0.0; l.len()]).collect();
    let norm = 1.0 / (nu * samples.len() as f64);
    for (choices, score) in samples {
        if *score < threshold {
            continue;
        }
        let weight = (score - threshold) * norm;
        if weight == 0.0 {
            continue;
        }
        let g = logprob_gradient(&controller.logits, choices)?;
        for (acc, node) in grad.iter_mut().zip(g) {
            for (a, x) in acc.iter_mut().zip(node) {
                *a += weight * x;
            }
        }
    }
    Ok(grad)
}

/// Plain gradient ascent on the logits with the risk-seeking estimate.
pub fn policy_gradient_update(
    controller: &mut Controller,
    samples: &[(Vec<usize>, f64)],
    nu: f64,
    rate: f64,
) -> Result<()> {
    let grad = risk_seeking_gradient(controller, samples, nu)?;
    for (l, g) in controller.logits.iter_mut().zip(grad) {
        for (x, d) in l.iter_mut().zip(g) {
            *x += rate * d;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;

    #[test]
    fn pmf_examples() {
        let c = Controller {
            logits: vec![vec![0.0; 4], vec![2f64.ln(), 0.0]],
        };
        let p = c.pmfs();
        assert_eq!(p[0], vec![0.25; 4]);
        assert!((p[1][0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1][1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn epsilon_mixture_frequency() {
        let mut rng = substream(1, &[2]);
        let pmfs = vec![vec![1.0, 0.0]];
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sample_choices(&pmfs, 0.2, &mut rng)[0] == 0)
            .count();
        assert!((hits as f64 / n as f64 - 0.9).abs() < 0.01);
        assert!((0..1000).all(|_| sample_choices(&pmfs, 0.0, &mut rng)[0] == 0));
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(risk_quantile(&[0.4, 0.1, 0.3, 0.2], 0.25).unwrap(), 0.3);
        assert_eq!(risk_quantile(&[0.7; 5], 0.5).unwrap(), 0.7);
        assert_eq!(risk_quantile(&[0.4, 0.1, 0.3], 0.999).unwrap(), 0.1);
        assert!(risk_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn equal_scores_do_not_move_the_controller() {
        let mut c = Controller {
            logits: vec![vec![0.3, -0.1, 0.0]],
        };
        let before = c.clone();
        let samples = vec![(vec![0], 0.5), (vec![1], 0.5), (vec![2], 0.5)];
        policy_gradient_update(&mut c, &samples, 0.25, 1.0).unwrap();
        assert_eq!(c, before);
    }

    #[test]
    fn better_operator_gains_probability() {
        let mut c = Controller {
            logits: vec![vec![0.0, 0.0]],
        };
        let samples = vec![(vec![0], 0.9), (vec![1], 0.1)];
        // Quantile index ⌈0.5·2⌉−1 = 0, so S̃ = 0.1 and only the first
        // sample contributes: (0.9 − 0.1)/(0.5·2)·(0.5, −0.5).
        let g = risk_seeking_gradient(&c, &samples, 0.5).unwrap();
        assert!((g[0][0] - 0.4).abs() < 1e-15 && (g[0][1] + 0.4).abs() < 1e-15);
        policy_gradient_update(&mut c, &samples, 0.5, 1.0).unwrap();
        assert!(c.pmfs()[0][0] > 0.5);
    }

    proptest! {
        #[test]
        fn logit_shift_invariance(
            raw in proptest::collection::vec(-2.0f64..2.0, 3),
            shift in -5.0f64..5.0,
            seed in 0u64..1000,
        ) {
            let a = Controller { logits: vec![raw.clone()] };
            let b = Controller { logits: vec![raw.iter().map(|x| x + shift).collect()] };
            for (x, y) in a.pmfs()[0].iter().zip(&b.pmfs()[0]) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let samples: Vec<(Vec<usize>, f64)> =
                (0..6).map(|k| (vec![(k + seed as usize) % 3], (k as f64 * 0.37 + seed as f64).sin().abs())).collect();
            let ga = risk_seeking_gradient(&a, &samples, 0.25).unwrap();
            let gb = risk_seeking_gradient(&b, &samples, 0.25).unwrap();
            for (x, y) in ga[0].iter().zip(&gb[0]) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn pmfs_sum_to_one(raw in proptest::collection::vec(-30.0f64..30.0, 1..8)) {
            let c = Controller { logits: vec![raw] };
            prop_assert!((c.pmfs()[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
