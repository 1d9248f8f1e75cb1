//! Reverse-mode differentiation.
//!
//! Two layers cooperate:
//!
//! * [`Tape`] is a flat `f64` tape used for loss gradients with respect to
//!   tree weights. It is cheap to clear and reuse per integration step.
//! * [`Trace`] records one Hamiltonian evaluation and differentiates it with
//!   respect to `(p, q)`. Its reverse pass is written in terms of an outer
//!   [`Arith`], so running it on top of a [`Tape`] makes `∂H/∂p` and `∂H/∂q`
//!   themselves differentiable. This is what lets weight gradients flow
//!   through every integrator substep.

mod tape;
mod trace;

pub use tape::{Tape, Var};
pub use trace::{Entry, Prim, Trace, TraceVar};

use crate::error::{Error, Result};

/// Scalar arithmetic over some value representation.
///
/// Implemented by [`Real`] (plain floats), [`Tape`] (recorded for reverse
/// mode) and [`Trace`] (recorded, with a differentiable reverse pass).
pub trait Arith {
    type Value: Copy;

    fn constant(&mut self, c: f64) -> Self::Value;
    fn value(&self, v: Self::Value) -> f64;

    fn add(&mut self, a: Self::Value, b: Self::Value) -> Self::Value;
    fn sub(&mut self, a: Self::Value, b: Self::Value) -> Self::Value;
    fn mul(&mut self, a: Self::Value, b: Self::Value) -> Self::Value;
    fn div(&mut self, a: Self::Value, b: Self::Value) -> Self::Value;
    fn neg(&mut self, a: Self::Value) -> Self::Value;
    /// Multiplication by a constant.
    fn scale(&mut self, a: Self::Value, c: f64) -> Self::Value;
    fn exp(&mut self, a: Self::Value) -> Self::Value;
    fn sin(&mut self, a: Self::Value) -> Self::Value;
    fn cos(&mut self, a: Self::Value) -> Self::Value;
    fn powi(&mut self, a: Self::Value, n: i32) -> Self::Value;
    fn recip(&mut self, a: Self::Value) -> Self::Value;
    fn sqrt(&mut self, a: Self::Value) -> Self::Value;

    /// `a + c * b`, the axpy used by every integrator update.
    fn add_scaled(&mut self, a: Self::Value, b: Self::Value, c: f64) -> Self::Value {
        let t = self.scale(b, c);
        self.add(a, t)
    }
}

/// Plain `f64` arithmetic.
#[derive(Debug, Default, Clone, Copy)]
pub struct Real;

impl Arith for Real {
    type Value = f64;

    fn constant(&mut self, c: f64) -> f64 {
        c
    }
    fn value(&self, v: f64) -> f64 {
        v
    }
    fn add(&mut self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        a - b
    }
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn div(&mut self, a: f64, b: f64) -> f64 {
        a / b
    }
    fn neg(&mut self, a: f64) -> f64 {
        -a
    }
    fn scale(&mut self, a: f64, c: f64) -> f64 {
        a * c
    }
    fn exp(&mut self, a: f64) -> f64 {
        a.exp()
    }
    fn sin(&mut self, a: f64) -> f64 {
        a.sin()
    }
    fn cos(&mut self, a: f64) -> f64 {
        a.cos()
    }
    fn powi(&mut self, a: f64, n: i32) -> f64 {
        a.powi(n)
    }
    fn recip(&mut self, a: f64) -> f64 {
        1.0 / a
    }
    fn sqrt(&mut self, a: f64) -> f64 {
        a.sqrt()
    }
}

/// A scalar energy function `H(params; p, q)` that can be evaluated in any
/// arithmetic context.
pub trait Energy {
    /// Number of trainable parameters expected in `params`.
    fn param_count(&self) -> usize;

    fn energy<A: Arith>(
        &self,
        ctx: &mut A,
        params: &[A::Value],
        p: &[A::Value],
        q: &[A::Value],
    ) -> Result<A::Value>;
}

/// `(∂H/∂p, ∂H/∂q)` evaluated in the context `ctx`.
pub type Partials<V> = (Vec<V>, Vec<V>);

/// Reverse-mode partials of `h` with respect to `p` and `q`.
///
/// The parameters and state live in `ctx`; the returned partials are values
/// of `ctx` as well, so they remain differentiable when `ctx` is a [`Tape`].
pub fn partials_in<A: Arith, H: Energy + ?Sized>(
    ctx: &mut A,
    h: &H,
    params: &[A::Value],
    p: &[A::Value],
    q: &[A::Value],
) -> Result<Partials<A::Value>> {
    let mut trace = Trace::new(ctx);
    let tp: Vec<TraceVar> = p.iter().map(|&v| trace.input(v)).collect();
    let tq: Vec<TraceVar> = q.iter().map(|&v| trace.input(v)).collect();
    let tw: Vec<TraceVar> = params.iter().map(|&v| trace.input(v)).collect();
    let out = h.energy(&mut trace, &tw, &tp, &tq)?;
    let mut wrt = tp;
    wrt.extend_from_slice(&tq);
    let mut grads = trace.backward(out, &wrt)?;
    let dq = grads.split_off(p.len());
    Ok((grads, dq))
}

/// Partials of `h` at a plain numeric point.
pub fn hamiltonian_partials<H: Energy + ?Sized>(
    h: &H,
    params: &[f64],
    p: &[f64],
    q: &[f64],
) -> Result<Partials<f64>> {
    partials_in(&mut Real, h, params, p, q)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Gradient of `Σᵢ log softmax(logitsᵢ)[choiceᵢ]` with respect to every logit,
/// which is `onehot(choiceᵢ) − softmax(logitsᵢ)` per node.
pub fn logprob_gradient(logits: &[Vec<f64>], choices: &[usize]) -> Result<Vec<Vec<f64>>> {
    if logits.len() != choices.len() {
        return Err(Error::Structural(format!(
            "{} logit vectors but {} choices",
            logits.len(),
            choices.len()
        )));
    }
    logits
        .iter()
        .zip(choices)
        .map(|(node, &c)| {
            if c >= node.len() {
                return Err(Error::Structural(format!(
                    "choice {c} out of range for {} operators",
                    node.len()
                )));
            }
            let mut g: Vec<f64> = softmax(node).into_iter().map(|p| -p).collect();
            g[c] += 1.0;
            Ok(g)
        })
        .collect()
}

/// Central finite-difference gradient of `f` at `x` with step `h`.
///
/// Returns `None` if `f` fails at any probe point.
pub fn central_difference<F>(mut f: F, x: &[f64], h: f64) -> Option<Vec<f64>>
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe)?;
        probe[i] = x[i] - h;
        let down = f(&probe)?;
        probe[i] = x[i];
        grad.push((up - down) / (2.0 * h));
    }
    Some(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// H = a·p² + b·q², parameters (a, b).
    struct Quadratic;

    impl Energy for Quadratic {
        fn param_count(&self) -> usize {
            2
        }
        fn energy<A: Arith>(
            &self,
            ctx: &mut A,
            w: &[A::Value],
            p: &[A::Value],
            q: &[A::Value],
        ) -> Result<A::Value> {
            let p2 = ctx.powi(p[0], 2);
            let q2 = ctx.powi(q[0], 2);
            let a = ctx.mul(w[0], p2);
            let b = ctx.mul(w[1], q2);
            Ok(ctx.add(a, b))
        }
    }

    #[test]
    fn quadratic_partials() {
        let (dp, dq) = hamiltonian_partials(&Quadratic, &[1.0, 1.0], &[1.0], &[2.0]).unwrap();
        assert_eq!(dp, vec![2.0]);
        assert_eq!(dq, vec![4.0]);
    }

    #[test]
    fn mixed_partials_through_tape() {
        let mut tape = Tape::new();
        let a = tape.var(0.5);
        let b = tape.var(1.5);
        let p = tape.var(0.3);
        let q = tape.var(-0.8);
        let (dp, dq) = partials_in(&mut tape, &Quadratic, &[a, b], &[p], &[q]).unwrap();
        // dH/dp = 2ap: d/da = 2p, d/dp = 2a
        let g = tape.gradient(dp[0], &[a, b, p, q]);
        assert_eq!(g, vec![0.6, 0.0, 1.0, 0.0]);
        let g = tape.gradient(dq[0], &[a, b, p, q]);
        assert_eq!(g, vec![0.0, -1.6, 0.0, 3.0]);
    }

    #[test]
    fn logprob_uniform_pair() {
        let g = logprob_gradient(&[vec![0.0, 0.0]], &[0]).unwrap();
        assert_eq!(g, vec![vec![0.5, -0.5]]);
    }

    #[test]
    fn logprob_degenerate_pmf_is_flat() {
        let g = logprob_gradient(&[vec![40.0, 0.0, 0.0]], &[0]).unwrap();
        assert!(g[0].iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn logprob_rejects_bad_choice() {
        assert!(logprob_gradient(&[vec![0.0, 0.0]], &[2]).is_err());
        assert!(logprob_gradient(&[vec![0.0, 0.0]], &[]).is_err());
    }

    fn log_prob(logits: &[Vec<f64>], choices: &[usize]) -> f64 {
        logits
            .iter()
            .zip(choices)
            .map(|(l, &c)| softmax(l)[c].ln())
            .sum()
    }

    proptest! {
        #[test]
        fn logprob_matches_finite_differences(
            raw in proptest::collection::vec(-3.0f64..3.0, 2..7),
            pick in 0usize..64,
        ) {
            let logits = vec![raw.clone(), raw.iter().rev().copied().collect::<Vec<_>>()];
            let choices = vec![pick % raw.len(), (pick / 2) % raw.len()];
            let analytic = logprob_gradient(&logits, &choices).unwrap();
            for node in 0..2 {
                let fd = central_difference(
                    |x| {
                        let mut l = logits.clone();
                        l[node] = x.to_vec();
                        Some(log_prob(&l, &choices))
                    },
                    &logits[node],
                    1e-5,
                ).unwrap();
                for (a, f) in analytic[node].iter().zip(&fd) {
                    prop_assert!((a - f).abs() <= 1e-6 * a.abs().max(1e-2));
                }
                let s: f64 = analytic[node].iter().sum();
                prop_assert!(s.abs() < 1e-12);
            }
        }

        #[test]
        fn softmax_sums_to_one(raw in proptest::collection::vec(-50.0f64..50.0, 1..10)) {
            let p = softmax(&raw);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
