use symham::expr::{ExpressionTree, OperatorSequence, TreeTemplate};
use symham::integrate::{rollout_eval, Scheme};
use symham::metrics::{aggregate, mse_over_time, Statistic};
use symham::search::empirical_loss;
use symham::systems::{generate_dataset, DatasetSpec};

fn nonseparable(weights: Vec<f64>) -> ExpressionTree {
    ExpressionTree::new(TreeTemplate::nonseparable(), OperatorSequence::nonseparable_target(), weights).unwrap()
}

/// `exp(-(p² + 1.1·q⁴))`, the generating Hamiltonian.
fn truth() -> ExpressionTree {
    nonseparable(vec![1.0, 1.1, -1.0, 1.0])
}

#[test]
fn true_hamiltonian_loss_is_integrator_truncation() {
    let data = generate_dataset(&DatasetSpec::nonseparable_train(), 0).unwrap();
    let t = truth();
    let loss = empirical_loss(&t, t.weights(), &data.trajectories, Scheme::Rk2, 20).unwrap();
    assert!(loss < 1e-8, "{loss}");
}

fn max_mean_mse(tree: &ExpressionTree, end: f64, count: usize) -> f64 {
    let spec = DatasetSpec {
        end,
        count,
        ..DatasetSpec::nonseparable_test()
    };
    let test = generate_dataset(&spec, 0).unwrap();
    let grid = test.grid().with_substeps(20).unwrap();
    let mse: Vec<Vec<f64>> = test
        .trajectories
        .iter()
        .map(|obs| {
            let pred = rollout_eval(tree, tree.weights(), obs.initial(), &grid, Scheme::Rk2).unwrap();
            mse_over_time(&pred, obs).unwrap()
        })
        .collect();
    aggregate(&mse, Statistic::Mean).unwrap().into_iter().fold(0.0, f64::max)
}

#[test]
fn true_hamiltonian_rollout_tracks_reference() {
    let m = max_mean_mse(&truth(), 3.0, 10);
    assert!(m < 1e-8, "{m}");
}

#[test]
fn reported_expression_stays_close_over_long_horizon() {
    let m = max_mean_mse(&nonseparable(vec![0.9236, 1.0159, -1.083, 1.0]), 60.0, 30);
    assert!(m <= 1e-3, "{m}");
}
