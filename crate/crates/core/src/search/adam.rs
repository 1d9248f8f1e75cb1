use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `theta` towards lower loss.
pub fn adam_step(theta: &mut [f64], grad: &[f64], state: &mut AdamState, rate: f64) -> Result<()> {
    if theta.len() != grad.len() || theta.len() != state.m.len() {
        return Err(Error::Structural(format!(
            "adam shapes differ: θ {}, gradient {}, moments {}",
            theta.len(),
            grad.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let c1 = 1.0 - BETA1.powi(state.t as i32);
    let c2 = 1.0 - BETA2.powi(state.t as i32);
    for i in 0..theta.len() {
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * grad[i];
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * grad[i] * grad[i];
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        theta[i] -= rate * mh / (vh.sqrt() + EPS);
    }
    Ok(())
}
