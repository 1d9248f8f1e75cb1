//! Time integration of Hamiltonian systems.
//!
//! The fixed-step schemes ([`leapfrog_step_in`], [`rk2_step_in`]) are generic
//! over [`Arith`] so the same code drives plain rollouts and weight-gradient
//! tapes. [`rk45_reference`] is an adaptive Dormand–Prince integrator used
//! only for ground-truth data.

mod io;
mod rk45;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::{partials_in, Arith, Energy, Real};

pub use rk45::{rk45_reference, VectorField};

/// Uniformly spaced time points `start + n·step`, `n = 0..=steps`, each
/// interval split into `substeps` integrator substeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub step: f64,
    pub steps: usize,
    #[serde(default = "one")]
    pub substeps: usize,
}

fn one() -> usize {
    1
}

impl TimeGrid {
    pub fn new(start: f64, step: f64, steps: usize) -> Result<Self> {
        let g = Self {
            start,
            step,
            steps,
            substeps: 1,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid on `[start, end]` with the given spacing. The interval must be an
    /// integer multiple of `step` to relative 1e−12.
    pub fn over(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(end > start) {
            return Err(Error::Structural(format!(
                "invalid interval [{start}, {end}] with step {step}"
            )));
        }
        let n = ((end - start) / step).round();
        if ((start + n * step) - end).abs() > 1e-12 * end.abs().max(step) {
            return Err(Error::Structural(format!(
                "[{start}, {end}] is not a multiple of {step}"
            )));
        }
        Self::new(start, step, n as usize)
    }

    pub fn with_substeps(mut self, substeps: usize) -> Result<Self> {
        self.substeps = substeps;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) || !self.start.is_finite() {
            return Err(Error::Structural(format!(
                "grid step must be positive and finite, got {}",
                self.step
            )));
        }
        if self.substeps == 0 {
            return Err(Error::Structural("substeps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, n: usize) -> f64 {
        self.start + n as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.time(n)).collect()
    }
}

/// A phase-space point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl State {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Self {
        Self { p, q }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(&self.q).all(|x| x.is_finite())
    }

    /// `(p, q)` concatenated.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.p.clone();
        v.extend_from_slice(&self.q);
        v
    }

    pub fn from_slice(y: &[f64]) -> Self {
        let d = y.len() / 2;
        Self::new(y[..d].to_vec(), y[d..].to_vec())
    }

    pub fn squared_distance(&self, other: &State) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .chain(self.q.iter().zip(&other.q))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, states: Vec<State>) -> Result<Self> {
        if states.len() != grid.len() {
            return Err(Error::Structural(format!(
                "{} states for a grid of {} points",
                states.len(),
                grid.len()
            )));
        }
        let d = states[0].dim();
        for (n, s) in states.iter().enumerate() {
            if s.p.len() != d || s.q.len() != d {
                return Err(Error::Structural(format!("state {n} has inconsistent dimension")));
            }
            if !s.is_finite() {
                return Err(Error::Divergence { index: n });
            }
        }
        Ok(Self { grid, states })
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn initial(&self) -> &State {
        &self.states[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Leapfrog,
    Rk2,
}

type Pair<V> = (Vec<V>, Vec<V>);

fn check_finite<A: Arith>(ctx: &A, p: &[A::Value], q: &[A::Value], index: usize) -> Result<()> {
    if p.iter().chain(q).all(|&v| ctx.value(v).is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { index })
    }
}

/// Multi-step kick-drift-kick Leapfrog in an arbitrary arithmetic context.
pub fn leapfrog_step_in<A: Arith, H: Energy + ?Sized>(
    ctx: &mut A,
    h: &H,
    params: &[A::Value],
    p: &[A::Value],
    q: &[A::Value],
    dt: f64,
    substeps: usize,
) -> Result<Pair<A::Value>> {
    let tau = dt / substeps as f64;
    let mut p = p.to_vec();
    let mut q = q.to_vec();
    for s in 0..substeps {
        let (_, hq) = partials_in(ctx, h, params, &p, &q)?;
        let half: Vec<_> = p
            .iter()
            .zip(&hq)
            .map(|(&a, &g)| ctx.add_scaled(a, g, -0.5 * tau))
            .collect();
        let (hp, _) = partials_in(ctx, h, params, &half, &q)?;
        q = q
            .iter()
            .zip(&hp)
            .map(|(&a, &g)| ctx.add_scaled(a, g, tau))
            .collect();
        let (_, hq) = partials_in(ctx, h, params, &half, &q)?;
        p = half
            .iter()
            .zip(&hq)
            .map(|(&a, &g)| ctx.add_scaled(a, g, -0.5 * tau))
            .collect();
        check_finite(ctx, &p, &q, s)?;
    }
    Ok((p, q))
}

/// Multi-step explicit midpoint (RK2) in an arbitrary arithmetic context.
pub fn rk2_step_in<A: Arith, H: Energy + ?Sized>(
    ctx: &mut A,
    h: &H,
    params: &[A::Value],
    p: &[A::Value],
    q: &[A::Value],
    dt: f64,
    substeps: usize,
) -> Result<Pair<A::Value>> {
    let tau = dt / substeps as f64;
    let mut p = p.to_vec();
    let mut q = q.to_vec();
    for s in 0..substeps {
        let (hp, hq) = partials_in(ctx, h, params, &p, &q)?;
        let pm: Vec<_> = p
            .iter()
            .zip(&hq)
            .map(|(&a, &g)| ctx.add_scaled(a, g, -0.5 * tau))
            .collect();
        let qm: Vec<_> = q
            .iter()
            .zip(&hp)
            .map(|(&a, &g)| ctx.add_scaled(a, g, 0.5 * tau))
            .collect();
        let (hp, hq) = partials_in(ctx, h, params, &pm, &qm)?;
        p = p
            .iter()
            .zip(&hq)
            .map(|(&a, &g)| ctx.add_scaled(a, g, -tau))
            .collect();
        q = q
            .iter()
            .zip(&hp)
            .map(|(&a, &g)| ctx.add_scaled(a, g, tau))
            .collect();
        check_finite(ctx, &p, &q, s)?;
    }
    Ok((p, q))
}

/// One grid interval with the chosen scheme.
#[allow(clippy::too_many_arguments)]
pub fn step_in<A: Arith, H: Energy + ?Sized>(
    scheme: Scheme,
    ctx: &mut A,
    h: &H,
    params: &[A::Value],
    p: &[A::Value],
    q: &[A::Value],
    dt: f64,
    substeps: usize,
) -> Result<Pair<A::Value>> {
    if !(dt > 0.0) || substeps == 0 {
        return Err(Error::Structural(format!(
            "step needs dt > 0 and substeps ≥ 1, got dt={dt}, substeps={substeps}"
        )));
    }
    match scheme {
        Scheme::Leapfrog => leapfrog_step_in(ctx, h, params, p, q, dt, substeps),
        Scheme::Rk2 => rk2_step_in(ctx, h, params, p, q, dt, substeps),
    }
}

pub fn leapfrog_step<H: Energy + ?Sized>(
    h: &H,
    params: &[f64],
    state: &State,
    dt: f64,
    substeps: usize,
) -> Result<State> {
    let (p, q) = step_in(Scheme::Leapfrog, &mut Real, h, params, &state.p, &state.q, dt, substeps)?;
    Ok(State::new(p, q))
}

pub fn rk2_step<H: Energy + ?Sized>(
    h: &H,
    params: &[f64],
    state: &State,
    dt: f64,
    substeps: usize,
) -> Result<State> {
    let (p, q) = step_in(Scheme::Rk2, &mut Real, h, params, &state.p, &state.q, dt, substeps)?;
    Ok(State::new(p, q))
}

pub fn step<H: Energy + ?Sized>(
    scheme: Scheme,
    h: &H,
    params: &[f64],
    state: &State,
    dt: f64,
    substeps: usize,
) -> Result<State> {
    let (p, q) = step_in(scheme, &mut Real, h, params, &state.p, &state.q, dt, substeps)?;
    Ok(State::new(p, q))
}

/// Recursive rollout: each state is integrated from the previous prediction.
///
/// Fails with [`Error::Divergence`] carrying the last valid index.
pub fn rollout_eval<H: Energy + ?Sized>(
    h: &H,
    params: &[f64],
    init: &State,
    grid: &TimeGrid,
    scheme: Scheme,
) -> Result<Trajectory> {
    grid.validate()?;
    if !init.is_finite() {
        return Err(Error::Structural("initial state is not finite".into()));
    }
    let mut states = Vec::with_capacity(grid.len());
    states.push(init.clone());
    for n in 0..grid.steps {
        let next = match step(scheme, h, params, &states[n], grid.step, grid.substeps) {
            Ok(s) if s.is_finite() => s,
            Ok(_) => return Err(Error::Divergence { index: n }),
            Err(e) if e.is_numerical() => return Err(Error::Divergence { index: n }),
            Err(e) => return Err(e),
        };
        states.push(next);
    }
    Trajectory::new(
        TimeGrid {
            substeps: 1,
            ..*grid
        },
        states,
    )
}

/// One-step predictions from every observed state except the last.
/// Failures are reported per step.
pub fn rollout_teacher_forced<H: Energy + ?Sized>(
    h: &H,
    params: &[f64],
    observed: &Trajectory,
    substeps: usize,
    scheme: Scheme,
) -> Vec<Result<State>> {
    let dt = observed.grid.step;
    observed.states[..observed.states.len() - 1]
        .iter()
        .map(|s| step(scheme, h, params, s, dt, substeps))
        .collect()
}

/// Parallel form of [`rollout_teacher_forced`]; results are identical.
pub fn rollout_teacher_forced_par<H: Energy + Sync + ?Sized>(
    h: &H,
    params: &[f64],
    observed: &Trajectory,
    substeps: usize,
    scheme: Scheme,
) -> Vec<Result<State>> {
    let dt = observed.grid.step;
    observed.states[..observed.states.len() - 1]
        .par_iter()
        .map(|s| step(scheme, h, params, s, dt, substeps))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// H = ½(p² + q²) in any dimension.
    pub(crate) struct Oscillator;

    impl Energy for Oscillator {
        fn param_count(&self) -> usize {
            0
        }
        fn energy<A: Arith>(
            &self,
            ctx: &mut A,
            _: &[A::Value],
            p: &[A::Value],
            q: &[A::Value],
        ) -> Result<A::Value> {
            let mut acc = ctx.constant(0.0);
            for &x in p.iter().chain(q) {
                let x2 = ctx.powi(x, 2);
                acc = ctx.add_scaled(acc, x2, 0.5);
            }
            Ok(acc)
        }
    }

    struct Constant;

    impl Energy for Constant {
        fn param_count(&self) -> usize {
            0
        }
        fn energy<A: Arith>(&self, ctx: &mut A, _: &[A::Value], _: &[A::Value], _: &[A::Value]) -> Result<A::Value> {
            Ok(ctx.constant(3.0))
        }
    }

    fn energy(s: &State) -> f64 {
        0.5 * (s.p[0] * s.p[0] + s.q[0] * s.q[0])
    }

    #[test]
    fn hand_stepped_values() {
        let s = State::new(vec![0.0], vec![1.0]);
        let lf = leapfrog_step(&Oscillator, &[], &s, 0.1, 1).unwrap();
        // p½ = −0.05, q = 1 − 0.005, p = −0.05 − 0.05·0.995
        assert!((lf.p[0] + 0.09975).abs() < 1e-12);
        assert!((lf.q[0] - 0.995).abs() < 1e-12);
        let rk = rk2_step(&Oscillator, &[], &s, 0.1, 1).unwrap();
        assert!((rk.p[0] + 0.1).abs() < 1e-12);
        assert!((rk.q[0] - 0.995).abs() < 1e-12);
    }

    #[test]
    fn more_substeps_track_the_rotation_better() {
        let s = State::new(vec![0.0], vec![1.0]);
        let dt: f64 = 0.1;
        let exact = State::new(vec![-dt.sin()], vec![dt.cos()]);
        let one = leapfrog_step(&Oscillator, &[], &s, dt, 1).unwrap();
        let ten = leapfrog_step(&Oscillator, &[], &s, dt, 10).unwrap();
        assert!(ten.squared_distance(&exact) < one.squared_distance(&exact));
    }

    #[test]
    fn substeps_chain_bit_exactly() {
        let s = State::new(vec![0.3, -0.2], vec![0.7, 0.1]);
        for scheme in [Scheme::Leapfrog, Scheme::Rk2] {
            let once = step(scheme, &Oscillator, &[], &s, 0.2, 5).unwrap();
            let mut chained = s.clone();
            for _ in 0..5 {
                chained = step(scheme, &Oscillator, &[], &chained, 0.2 / 5.0, 1).unwrap();
            }
            assert_eq!(once, chained);
        }
    }

    #[test]
    fn constant_field_is_stationary() {
        let s = State::new(vec![0.4], vec![-0.9]);
        for scheme in [Scheme::Leapfrog, Scheme::Rk2] {
            assert_eq!(step(scheme, &Constant, &[], &s, 0.1, 3).unwrap(), s);
        }
        let grid = TimeGrid::new(0.0, 0.1, 5).unwrap();
        let traj = rollout_eval(&Constant, &[], &s, &grid, Scheme::Rk2).unwrap();
        assert!(traj.states.iter().all(|x| *x == s));
    }

    #[test]
    fn leapfrog_is_time_reversible() {
        let s = State::new(vec![0.3], vec![-0.8]);
        let fwd = leapfrog_step(&Oscillator, &[], &s, 0.05, 4).unwrap();
        let (p, q) = leapfrog_step_in(&mut Real, &Oscillator, &[], &fwd.p, &fwd.q, -0.05, 4).unwrap();
        assert!((p[0] - s.p[0]).abs() < 1e-10);
        assert!((q[0] - s.q[0]).abs() < 1e-10);
    }

    #[test]
    fn energy_drift_ordering() {
        let s0 = State::new(vec![0.0], vec![1.0]);
        let grid = TimeGrid::new(0.0, 0.01, 10_000).unwrap();
        let lf = rollout_eval(&Oscillator, &[], &s0, &grid, Scheme::Leapfrog).unwrap();
        let rk = rollout_eval(&Oscillator, &[], &s0, &grid, Scheme::Rk2).unwrap();
        let drift = |t: &Trajectory| {
            t.states
                .iter()
                .map(|s| (energy(s) - 0.5).abs() / 0.5)
                .fold(0.0, f64::max)
        };
        assert!(drift(&lf) < drift(&rk));
    }

    #[test]
    fn teacher_forcing_edge_cases() {
        let grid = TimeGrid::new(0.0, 0.1, 0).unwrap();
        let t = Trajectory::new(grid, vec![State::new(vec![0.0], vec![1.0])]).unwrap();
        assert!(rollout_teacher_forced(&Oscillator, &[], &t, 4, Scheme::Rk2).is_empty());

        let grid = TimeGrid::new(0.0, 0.1, 40).unwrap();
        let obs = rollout_eval(&Oscillator, &[], &State::new(vec![0.2], vec![0.9]), &grid, Scheme::Rk2).unwrap();
        let serial = rollout_teacher_forced(&Oscillator, &[], &obs, 3, Scheme::Leapfrog);
        let par = rollout_teacher_forced_par(&Oscillator, &[], &obs, 3, Scheme::Leapfrog);
        let a: Vec<State> = serial.into_iter().map(|r| r.unwrap()).collect();
        let b: Vec<State> = par.into_iter().map(|r| r.unwrap()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_over_interval() {
        let g = TimeGrid::over(0.0, 3.0, 0.1).unwrap();
        assert_eq!(g.len(), 31);
        assert!((g.end() - 3.0).abs() < 1e-12);
        assert!(TimeGrid::over(0.0, 3.05, 0.1).is_err());
        assert!(TimeGrid::new(0.0, 0.0, 3).is_err());
    }
}
