//! Dormand–Prince 5(4) with PI step control and dense output.

use super::{State, TimeGrid, Trajectory};
use crate::error::{Error, Result};

/// An autonomous ODE `y' = f(y)` on the stacked state `y = (p, q)`.
pub trait VectorField {
    /// Writes `f(y)` into `dy`.
    fn rhs(&self, y: &[f64], dy: &mut [f64]);
}

impl<F: Fn(&[f64], &mut [f64])> VectorField for F {
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        self(y, dy)
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;
const MIN_SHRINK: f64 = 0.2;
const MAX_GROW: f64 = 10.0;
const MAX_STEPS: usize = 50_000_000;

struct Stepper<'a, F: ?Sized> {
    f: &'a F,
    rtol: f64,
    atol: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
}

impl<F: VectorField + ?Sized> Stepper<'_, F> {
    fn stage(&mut self, y: &[f64], h: f64, coefs: &[(usize, f64)], out: usize) {
        for i in 0..y.len() {
            let mut acc = 0.0;
            for &(j, a) in coefs {
                acc += a * self.k[j][i];
            }
            self.tmp[i] = y[i] + h * acc;
        }
        let mut dy = std::mem::take(&mut self.k[out]);
        self.f.rhs(&self.tmp, &mut dy);
        self.k[out] = dy;
    }

    /// Attempts one step from `y` (with `k[0] = f(y)`). Returns the scaled
    /// error norm; `y_new` and `k[6] = f(y_new)` are filled in.
    fn attempt(&mut self, y: &[f64], h: f64) -> f64 {
        self.stage(y, h, &[(0, A21)], 1);
        self.stage(y, h, &[(0, A31), (1, A32)], 2);
        self.stage(y, h, &[(0, A41), (1, A42), (2, A43)], 3);
        self.stage(y, h, &[(0, A51), (1, A52), (2, A53), (3, A54)], 4);
        self.stage(y, h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], 5);
        for i in 0..y.len() {
            let k = &self.k;
            self.y_new[i] = y[i]
                + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i]
                    + A76 * k[5][i]);
        }
        let mut dy = std::mem::take(&mut self.k[6]);
        self.f.rhs(&self.y_new, &mut dy);
        self.k[6] = dy;
        let mut sum = 0.0;
        for i in 0..y.len() {
            let k = &self.k;
            self.err[i] = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
            let sc = self.atol + self.rtol * y[i].abs().max(self.y_new[i].abs());
            sum += (self.err[i] / sc).powi(2);
        }
        let norm = (sum / y.len() as f64).sqrt();
        if norm.is_finite() && self.y_new.iter().all(|v| v.is_finite()) {
            norm
        } else {
            f64::INFINITY
        }
    }

    /// Fourth-order continuous extension on `[t, t + h]` at fraction `theta`.
    fn dense(&self, y: &[f64], h: f64, theta: f64, out: &mut [f64]) {
        let k = &self.k;
        let t1 = 1.0 - theta;
        for i in 0..y.len() {
            let diff = self.y_new[i] - y[i];
            let bspl = h * k[0][i] - diff;
            let r4 = diff - h * k[6][i] - bspl;
            let r5 = h
                * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                    + D7 * k[6][i]);
            out[i] = y[i] + theta * (diff + t1 * (bspl + theta * (r4 + t1 * r5)));
        }
    }
}

fn rms(v: &[f64], scale: &[f64]) -> f64 {
    (v.iter().zip(scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Integrates `field` from `init` across `grid` with adaptive Dormand–Prince
/// steps, sampling the dense output at every grid point. The absolute
/// tolerance is `rel_tol · 1e−2`.
///
/// Fails with [`Error::Stiffness`] when the step size underflows.
pub fn rk45_reference<F: VectorField + ?Sized>(
    field: &F,
    init: &State,
    grid: &TimeGrid,
    rel_tol: f64,
) -> Result<Trajectory> {
    grid.validate()?;
    if !(rel_tol > 0.0) {
        return Err(Error::Structural(format!("relTol must be positive, got {rel_tol}")));
    }
    let n = init.p.len() * 2;
    let mut y = init.to_vec();
    let mut st = Stepper {
        f: field,
        rtol: rel_tol,
        atol: rel_tol * 1e-2,
        k: std::array::from_fn(|_| vec![0.0; n]),
        tmp: vec![0.0; n],
        y_new: vec![0.0; n],
        err: vec![0.0; n],
    };
    let mut k0 = std::mem::take(&mut st.k[0]);
    field.rhs(&y, &mut k0);
    st.k[0] = k0;

    let t_end = grid.end();
    let mut t = grid.start;
    let span = t_end - t;
    let mut states = Vec::with_capacity(grid.len());
    states.push(init.clone());
    if grid.steps == 0 {
        return Trajectory::new(*grid, states);
    }

    // Initial step size from the local scale of y and f(y).
    let scale: Vec<f64> = y.iter().map(|v| st.atol + st.rtol * v.abs()).collect();
    let d0 = rms(&y, &scale);
    let d1 = rms(&st.k[0], &scale);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h = h.min(span).min(grid.step);

    let mut next = 1;
    let mut fac_old: f64 = 1e-4;
    let mut rejected = false;
    let mut out = vec![0.0; n];
    for _ in 0..MAX_STEPS {
        if next > grid.steps {
            return Trajectory::new(*grid, states);
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Stiffness { t });
        }
        let h_try = h.min(t_end - t);
        let err = st.attempt(&y, h_try);
        if err <= 1.0 {
            let fac11 = err.powf(EXPO);
            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / MAX_GROW, 1.0 / MIN_SHRINK);
            fac_old = err.max(1e-4);
            let t_new = if h_try == t_end - t { t_end } else { t + h_try };
            while next <= grid.steps {
                let tn = grid.time(next);
                if tn > t_new {
                    break;
                }
                if tn == t_new {
                    out.copy_from_slice(&st.y_new);
                } else {
                    st.dense(&y, h_try, (tn - t) / h_try, &mut out);
                }
                states.push(State::from_slice(&out));
                next += 1;
            }
            y.copy_from_slice(&st.y_new);
            st.k.swap(0, 6);
            t = t_new;
            let mut h_new = h_try / fac;
            if rejected {
                h_new = h_new.min(h_try);
            }
            rejected = false;
            h = h_new;
        } else {
            let fac11 = if err.is_finite() { err.powf(EXPO) } else { 1.0 / MIN_SHRINK };
            h = h_try / (fac11 / SAFETY).min(1.0 / MIN_SHRINK);
            rejected = true;
        }
    }
    Err(Error::Stiffness { t })
}
