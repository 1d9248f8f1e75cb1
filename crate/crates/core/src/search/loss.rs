//! Teacher-forced empirical loss and its weight gradient.

use crate::error::{Error, Result};
use crate::grad::{Arith, Energy, Tape, Var};
use crate::integrate::{step, step_in, Scheme, Trajectory};

fn check<H: Energy + ?Sized>(h: &H, params: &[f64], data: &[Trajectory]) -> Result<usize> {
    if params.len() != h.param_count() {
        return Err(Error::Structural(format!(
            "expected {} weights, got {}",
            h.param_count(),
            params.len()
        )));
    }
    if data.is_empty() {
        return Err(Error::Structural("empty dataset".into()));
    }
    Ok(data.iter().map(|t| t.states.len() - 1).sum())
}

fn normalizer(data: &[Trajectory]) -> f64 {
    // N·|D| with N the step count of the (shared) grid.
    let n = data[0].states.len() - 1;
    (n * data.len()).max(1) as f64
}

/// Mean over trajectories and steps of the one-step squared state error.
///
/// Returns `+∞` if any step fails numerically.
pub fn empirical_loss<H: Energy + ?Sized>(
    h: &H,
    params: &[f64],
    data: &[Trajectory],
    scheme: Scheme,
    substeps: usize,
) -> Result<f64> {
    check(h, params, data)?;
    let mut total = 0.0;
    for traj in data {
        let dt = traj.grid.step;
        for w in traj.states.windows(2) {
            match step(scheme, h, params, &w[0], dt, substeps) {
                Ok(pred) => total += pred.squared_distance(&w[1]),
                Err(e) if e.is_numerical() => return Ok(f64::INFINITY),
                Err(e) => return Err(e),
            }
        }
    }
    let loss = total / normalizer(data);
    Ok(if loss.is_finite() { loss } else { f64::INFINITY })
}

/// [`empirical_loss`] together with its gradient with respect to `params`,
/// differentiated through every integrator substep.
///
/// Each teacher-forced step is independent, so it gets its own short tape
/// and the per-step gradients are summed.
pub fn loss_and_gradient<H: Energy + ?Sized>(
    h: &H,
    params: &[f64],
    data: &[Trajectory],
    scheme: Scheme,
    substeps: usize,
) -> Result<(f64, Vec<f64>)> {
    check(h, params, data)?;
    let mut tape = Tape::with_capacity(1 << 14);
    let mut total = 0.0;
    let mut grad = vec![0.0; params.len()];
    for traj in data {
        let dt = traj.grid.step;
        for w in traj.states.windows(2) {
            tape.clear();
            let wv: Vec<Var> = params.iter().map(|&x| tape.var(x)).collect();
            let p: Vec<Var> = w[0].p.iter().map(|&x| tape.constant(x)).collect();
            let q: Vec<Var> = w[0].q.iter().map(|&x| tape.constant(x)).collect();
            let (pp, qq) = match step_in(scheme, &mut tape, h, &wv, &p, &q, dt, substeps) {
                Ok(r) => r,
                Err(e) if e.is_numerical() => return Ok((f64::INFINITY, grad)),
                Err(e) => return Err(e),
            };
            let mut err = tape.constant(0.0);
            for (&x, &y) in pp.iter().zip(&w[1].p).chain(qq.iter().zip(&w[1].q)) {
                let target = tape.constant(y);
                let d = tape.sub(x, target);
                let d2 = tape.powi(d, 2);
                err = tape.add(err, d2);
            }
            let e = tape.value(err);
            if !e.is_finite() {
                return Ok((f64::INFINITY, grad));
            }
            total += e;
            tape.backward(err);
            for (g, &v) in grad.iter_mut().zip(&wv) {
                *g += tape.adjoint(v);
            }
        }
    }
    let scale = 1.0 / normalizer(data);
    let loss = total * scale;
    for g in &mut grad {
        *g *= scale;
    }
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Ok((f64::INFINITY, grad));
    }
    Ok((loss, grad))
}
