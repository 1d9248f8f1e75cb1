//! Ground-truth Hamiltonian systems, their vector fields and samplers.

mod dataset;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::TemplateId;
use crate::grad::{Arith, Energy};
use crate::integrate::{State, VectorField};

pub use dataset::{generate_dataset, Dataset, DatasetMeta, DatasetSpec, Sampler};

/// `H = exp(−α₁p² − α₂q⁴)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NonseparableParams {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Default for NonseparableParams {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 1.1,
        }
    }
}

/// Planar gravitational three-body problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThreeBodyParams {
    pub masses: [f64; 3],
    pub g: f64,
}

impl Default for ThreeBodyParams {
    fn default() -> Self {
        Self {
            masses: [1.0; 3],
            g: 1.0,
        }
    }
}

pub fn nonseparable_hamiltonian(p: f64, q: f64, params: &NonseparableParams) -> f64 {
    (-params.alpha1 * p * p - params.alpha2 * q.powi(4)).exp()
}

/// `(dp/dt, dq/dt) = (−∂H/∂q, ∂H/∂p)`.
pub fn nonseparable_field(p: f64, q: f64, params: &NonseparableParams) -> (f64, f64) {
    let e = nonseparable_hamiltonian(p, q, params);
    (
        4.0 * params.alpha2 * q.powi(3) * e,
        -2.0 * params.alpha1 * p * e,
    )
}

const SPATIAL: usize = 2;

fn three_body_check(state: &State) -> Result<()> {
    if state.p.len() != 3 * SPATIAL || state.q.len() != 3 * SPATIAL {
        return Err(Error::Structural(format!(
            "three-body state needs 6 momentum and 6 position components, got {} and {}",
            state.p.len(),
            state.q.len()
        )));
    }
    for (i, j) in crate::expr::pairs(3) {
        if state.q[i * SPATIAL..(i + 1) * SPATIAL] == state.q[j * SPATIAL..(j + 1) * SPATIAL] {
            return Err(Error::Singularity(format!(
                "bodies {} and {} coincide",
                i + 1,
                j + 1
            )));
        }
    }
    Ok(())
}

fn distance(q: &[f64], i: usize, j: usize) -> f64 {
    let dx = q[i * SPATIAL] - q[j * SPATIAL];
    let dy = q[i * SPATIAL + 1] - q[j * SPATIAL + 1];
    dx.hypot(dy)
}

pub fn three_body_hamiltonian(state: &State, params: &ThreeBodyParams) -> Result<f64> {
    three_body_check(state)?;
    let m = &params.masses;
    let kinetic: f64 = state
        .p
        .iter()
        .enumerate()
        .map(|(k, x)| x * x / (2.0 * m[k / SPATIAL]))
        .sum();
    let potential: f64 = crate::expr::pairs(3)
        .map(|(i, j)| params.g * m[i] * m[j] / distance(&state.q, i, j))
        .sum();
    Ok(kinetic - potential)
}

/// Writes `(dp/dt, dq/dt)` for the stacked state `y = (p, q)`.
pub fn three_body_field(y: &[f64], dy: &mut [f64], params: &ThreeBodyParams) {
    let n = 3 * SPATIAL;
    let (p, q) = y.split_at(n);
    let (dp, dq) = dy.split_at_mut(n);
    let m = &params.masses;
    for k in 0..n {
        dq[k] = p[k] / m[k / SPATIAL];
    }
    dp.fill(0.0);
    for (i, j) in crate::expr::pairs(3) {
        let r = distance(q, i, j);
        let c = params.g * m[i] * m[j] / (r * r * r);
        for a in 0..SPATIAL {
            let f = c * (q[j * SPATIAL + a] - q[i * SPATIAL + a]);
            dp[i * SPATIAL + a] += f;
            dp[j * SPATIAL + a] -= f;
        }
    }
}

/// A ground-truth system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum System {
    Nonseparable(NonseparableParams),
    ThreeBody(ThreeBodyParams),
}

impl System {
    pub fn nonseparable() -> Self {
        System::Nonseparable(NonseparableParams::default())
    }

    pub fn three_body() -> Self {
        System::ThreeBody(ThreeBodyParams::default())
    }

    /// Length of the momentum (and position) block.
    pub fn dim(&self) -> usize {
        match self {
            System::Nonseparable(_) => 1,
            System::ThreeBody(_) => 3 * SPATIAL,
        }
    }

    pub fn template(&self) -> TemplateId {
        match self {
            System::Nonseparable(_) => TemplateId::Nonseparable,
            System::ThreeBody(_) => TemplateId::ThreeBody,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            System::Nonseparable(p) => p.alpha1.is_finite() && p.alpha2.is_finite(),
            System::ThreeBody(p) => p.g > 0.0 && p.masses.iter().all(|&m| m > 0.0 && m.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Structural(format!("invalid system parameters {self:?}")))
        }
    }

    pub fn hamiltonian(&self, state: &State) -> Result<f64> {
        match self {
            System::Nonseparable(params) => {
                if state.p.len() != 1 || state.q.len() != 1 {
                    return Err(Error::Structural("non-separable system is one-dimensional".into()));
                }
                Ok(nonseparable_hamiltonian(state.p[0], state.q[0], params))
            }
            System::ThreeBody(params) => three_body_hamiltonian(state, params),
        }
    }

    /// Draws an initial condition with the default sampler for this
    /// system.
    pub fn sample_init<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        match self {
            System::Nonseparable(_) => sample_nonseparable_init(rng),
            System::ThreeBody(params) => sample_three_body_init(rng, params),
        }
    }
}

impl VectorField for System {
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        match self {
            System::Nonseparable(params) => {
                let (a, b) = nonseparable_field(y[0], y[1], params);
                dy[0] = a;
                dy[1] = b;
            }
            System::ThreeBody(params) => three_body_field(y, dy, params),
        }
    }
}

impl Energy for System {
    fn param_count(&self) -> usize {
        0
    }

    fn energy<A: Arith>(
        &self,
        ctx: &mut A,
        _params: &[A::Value],
        p: &[A::Value],
        q: &[A::Value],
    ) -> Result<A::Value> {
        if p.len() != self.dim() || q.len() != self.dim() {
            return Err(Error::Structural(format!(
                "expected blocks of length {}, got {} and {}",
                self.dim(),
                p.len(),
                q.len()
            )));
        }
        match self {
            System::Nonseparable(params) => {
                let p2 = ctx.powi(p[0], 2);
                let q4 = ctx.powi(q[0], 4);
                let a = ctx.scale(p2, -params.alpha1);
                let s = ctx.add_scaled(a, q4, -params.alpha2);
                Ok(ctx.exp(s))
            }
            System::ThreeBody(params) => {
                let m = &params.masses;
                let mut acc = ctx.constant(0.0);
                for (k, &x) in p.iter().enumerate() {
                    let x2 = ctx.powi(x, 2);
                    acc = ctx.add_scaled(acc, x2, 0.5 / m[k / SPATIAL]);
                }
                for (i, j) in crate::expr::pairs(3) {
                    let mut d2 = ctx.constant(0.0);
                    for a in 0..SPATIAL {
                        let diff = ctx.sub(q[i * SPATIAL + a], q[j * SPATIAL + a]);
                        let sq = ctx.powi(diff, 2);
                        d2 = ctx.add(d2, sq);
                    }
                    if ctx.value(d2) == 0.0 {
                        return Err(Error::Singularity(format!(
                            "bodies {} and {} coincide",
                            i + 1,
                            j + 1
                        )));
                    }
                    let r = ctx.sqrt(d2);
                    let inv = ctx.recip(r);
                    acc = ctx.add_scaled(acc, inv, -params.g * m[i] * m[j]);
                }
                Ok(acc)
            }
        }
    }
}

/// Uniform on `[−1, 1]²`.
pub fn sample_nonseparable_init<R: Rng + ?Sized>(rng: &mut R) -> State {
    let p = rng.gen_range(-1.0..=1.0);
    let q = rng.gen_range(-1.0..=1.0);
    State::new(vec![p], vec![q])
}

/// Three bodies at 120° spacing on a circle of radius `radius`, body 1 at
/// `angle`, with momenta for a circular orbit about the origin.
pub fn circular_orbit(radius: f64, angle: f64, params: &ThreeBodyParams) -> State {
    let mut q = vec![0.0; 3 * SPATIAL];
    for b in 0..3 {
        let th = angle + b as f64 * 2.0 * std::f64::consts::PI / 3.0;
        q[b * SPATIAL] = radius * th.cos();
        q[b * SPATIAL + 1] = radius * th.sin();
    }
    // Balance the inward gravitational pull on each body against the
    // centripetal requirement m·v²/R.
    let mut y = vec![0.0; 6 * SPATIAL];
    y[3 * SPATIAL..].copy_from_slice(&q);
    let mut dy = vec![0.0; 6 * SPATIAL];
    three_body_field(&y, &mut dy, params);
    let mut p = vec![0.0; 3 * SPATIAL];
    for b in 0..3 {
        let (x, yb) = (q[b * SPATIAL], q[b * SPATIAL + 1]);
        let r = x.hypot(yb);
        let (ux, uy) = (x / r, yb / r);
        let inward = -(dy[b * SPATIAL] * ux + dy[b * SPATIAL + 1] * uy);
        let m = params.masses[b];
        let v = (inward.max(0.0) * r / m).sqrt();
        p[b * SPATIAL] = -m * v * uy;
        p[b * SPATIAL + 1] = m * v * ux;
    }
    State::new(p, q)
}

/// Random circle radius in `[0.9, 1.2]`, random phase, momenta perturbed by
/// independent factors in `[0.8, 1.2]`.
pub fn sample_three_body_init<R: Rng + ?Sized>(rng: &mut R, params: &ThreeBodyParams) -> State {
    sample_circular(rng, params, [0.9, 1.2], [0.8, 1.2])
}

pub(crate) fn sample_circular<R: Rng + ?Sized>(
    rng: &mut R,
    params: &ThreeBodyParams,
    radius: [f64; 2],
    momentum_scale: [f64; 2],
) -> State {
    let r = rng.gen_range(radius[0]..=radius[1]);
    let angle = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    let mut s = circular_orbit(r, angle, params);
    for b in 0..3 {
        let f = rng.gen_range(momentum_scale[0]..=momentum_scale[1]);
        for a in 0..SPATIAL {
            s.p[b * SPATIAL + a] *= f;
        }
    }
    s
}
