//! Evaluation traces whose reverse pass is expressed in an outer [`Arith`].
//!
//! A [`Trace`] wraps another arithmetic context. Each primitive executed on the
//! trace is forwarded to the outer context and recorded. The reverse pass then
//! builds adjoints with the outer context's own operations, so when the outer
//! context is a [`Tape`](super::Tape) the partial derivatives of a Hamiltonian
//! stay differentiable with respect to everything the outer tape tracks
//! (tree weights, integrator states).

use super::Arith;
use crate::error::{Error, Result};

/// Primitive operation kinds recorded in a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prim {
    Input,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale(f64),
    Exp,
    Sin,
    Cos,
    Powi(i32),
    Recip,
    Sqrt,
}

/// Handle to an entry of a [`Trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceVar(u32);

impl TraceVar {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Entry<V> {
    pub prim: Prim,
    pub args: [u32; 2],
    pub value: V,
    /// Plain numeric value, kept so checks never need the outer context.
    pub real: f64,
}

/// A record of the primitives executed during one forward evaluation.
pub struct Trace<'a, A: Arith> {
    ctx: &'a mut A,
    entries: Vec<Entry<A::Value>>,
}

impl<'a, A: Arith> Trace<'a, A> {
    pub fn new(ctx: &'a mut A) -> Self {
        Self {
            ctx,
            entries: Vec::with_capacity(64),
        }
    }

    pub fn entries(&self) -> &[Entry<A::Value>] {
        &self.entries
    }

    pub fn outer(&mut self) -> &mut A {
        self.ctx
    }

    /// Lifts a value of the outer context into the trace as an input.
    pub fn input(&mut self, v: A::Value) -> TraceVar {
        let real = self.ctx.value(v);
        self.record(Prim::Input, [0, 0], v, real)
    }

    fn record(&mut self, prim: Prim, args: [u32; 2], value: A::Value, real: f64) -> TraceVar {
        let idx = self.entries.len() as u32;
        self.entries.push(Entry {
            prim,
            args,
            value,
            real,
        });
        TraceVar(idx)
    }

    fn outer_value(&self, v: TraceVar) -> A::Value {
        self.entries[v.index()].value
    }

    fn op1(&mut self, prim: Prim, a: TraceVar, f: impl FnOnce(&mut A, A::Value) -> A::Value) -> TraceVar {
        let x = self.outer_value(a);
        let v = f(self.ctx, x);
        let real = self.ctx.value(v);
        self.record(prim, [a.0, 0], v, real)
    }

    fn op2(
        &mut self,
        prim: Prim,
        a: TraceVar,
        b: TraceVar,
        f: impl FnOnce(&mut A, A::Value, A::Value) -> A::Value,
    ) -> TraceVar {
        let x = self.outer_value(a);
        let y = self.outer_value(b);
        let v = f(self.ctx, x, y);
        let real = self.ctx.value(v);
        self.record(prim, [a.0, b.0], v, real)
    }

    /// Reverse pass seeded at `output`. Returns the adjoint of each entry in
    /// `wrt`, expressed in the outer context. Entries that do not influence
    /// the output get an outer constant zero.
    pub fn backward(&mut self, output: TraceVar, wrt: &[TraceVar]) -> Result<Vec<A::Value>> {
        let n = output.index() + 1;
        let mut adj: Vec<Option<A::Value>> = vec![None; n];
        adj[output.index()] = Some(self.ctx.constant(1.0));

        for i in (0..n).rev() {
            let Some(g) = adj[i] else { continue };
            let Entry { prim, args, value: out, real } = self.entries[i];
            let a = args[0] as usize;
            let b = args[1] as usize;
            let ctx = &mut *self.ctx;
            match prim {
                Prim::Input | Prim::Const => {}
                Prim::Add => {
                    accumulate(ctx, &mut adj, a, g);
                    accumulate(ctx, &mut adj, b, g);
                }
                Prim::Sub => {
                    accumulate(ctx, &mut adj, a, g);
                    let ng = ctx.neg(g);
                    accumulate(ctx, &mut adj, b, ng);
                }
                Prim::Mul => {
                    let va = self.entries[a].value;
                    let vb = self.entries[b].value;
                    let ga = ctx.mul(g, vb);
                    accumulate(ctx, &mut adj, a, ga);
                    let gb = ctx.mul(g, va);
                    accumulate(ctx, &mut adj, b, gb);
                }
                Prim::Div => {
                    if self.entries[b].real == 0.0 {
                        return Err(Error::NonFiniteGradient { entry: i });
                    }
                    let vb = self.entries[b].value;
                    let ga = ctx.div(g, vb);
                    accumulate(ctx, &mut adj, a, ga);
                    let t = ctx.mul(ga, out);
                    let gb = ctx.neg(t);
                    accumulate(ctx, &mut adj, b, gb);
                }
                Prim::Neg => {
                    let ga = ctx.neg(g);
                    accumulate(ctx, &mut adj, a, ga);
                }
                Prim::Scale(c) => {
                    let ga = ctx.scale(g, c);
                    accumulate(ctx, &mut adj, a, ga);
                }
                Prim::Exp => {
                    let ga = ctx.mul(g, out);
                    accumulate(ctx, &mut adj, a, ga);
                }
                Prim::Sin => {
                    let c = ctx.cos(self.entries[a].value);
                    let ga = ctx.mul(g, c);
                    accumulate(ctx, &mut adj, a, ga);
                }
                Prim::Cos => {
                    let s = ctx.sin(self.entries[a].value);
                    let t = ctx.mul(g, s);
                    let ga = ctx.neg(t);
                    accumulate(ctx, &mut adj, a, ga);
                }
                Prim::Powi(k) => {
                    let va = self.entries[a].value;
                    let ga = match k {
                        0 => None,
                        1 => Some(g),
                        2 => {
                            let t = ctx.mul(g, va);
                            Some(ctx.scale(t, 2.0))
                        }
                        _ => {
                            let p = ctx.powi(va, k - 1);
                            let t = ctx.mul(g, p);
                            Some(ctx.scale(t, f64::from(k)))
                        }
                    };
                    if let Some(ga) = ga {
                        accumulate(ctx, &mut adj, a, ga);
                    }
                }
                Prim::Recip => {
                    if self.entries[a].real == 0.0 {
                        return Err(Error::NonFiniteGradient { entry: i });
                    }
                    let t = ctx.mul(g, out);
                    let t = ctx.mul(t, out);
                    let ga = ctx.neg(t);
                    accumulate(ctx, &mut adj, a, ga);
                }
                Prim::Sqrt => {
                    if real == 0.0 {
                        return Err(Error::NonFiniteGradient { entry: i });
                    }
                    let t = ctx.scale(g, 0.5);
                    let ga = ctx.div(t, out);
                    accumulate(ctx, &mut adj, a, ga);
                }
            }
        }

        let mut result = Vec::with_capacity(wrt.len());
        for v in wrt {
            let g = match adj.get(v.index()).copied().flatten() {
                Some(g) => g,
                None => self.ctx.constant(0.0),
            };
            if !self.ctx.value(g).is_finite() {
                return Err(Error::NonFiniteGradient { entry: v.index() });
            }
            result.push(g);
        }
        Ok(result)
    }

    /// Re-executes the recorded primitives in plain `f64`, starting from the
    /// recorded input values, and returns every entry's value.
    pub fn replay(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let a = e.args[0] as usize;
            let b = e.args[1] as usize;
            let v = match e.prim {
                Prim::Input | Prim::Const => e.real,
                Prim::Add => vals[a] + vals[b],
                Prim::Sub => vals[a] - vals[b],
                Prim::Mul => vals[a] * vals[b],
                Prim::Div => vals[a] / vals[b],
                Prim::Neg => -vals[a],
                Prim::Scale(c) => vals[a] * c,
                Prim::Exp => vals[a].exp(),
                Prim::Sin => vals[a].sin(),
                Prim::Cos => vals[a].cos(),
                Prim::Powi(k) => vals[a].powi(k),
                Prim::Recip => 1.0 / vals[a],
                Prim::Sqrt => vals[a].sqrt(),
            };
            vals.push(v);
        }
        vals
    }
}

fn accumulate<A: Arith>(ctx: &mut A, adj: &mut [Option<A::Value>], i: usize, g: A::Value) {
    adj[i] = Some(match adj[i] {
        Some(prev) => ctx.add(prev, g),
        None => g,
    });
}

impl<A: Arith> Arith for Trace<'_, A> {
    type Value = TraceVar;

    fn constant(&mut self, c: f64) -> TraceVar {
        let v = self.ctx.constant(c);
        self.record(Prim::Const, [0, 0], v, c)
    }

    fn value(&self, v: TraceVar) -> f64 {
        self.entries[v.index()].real
    }

    fn add(&mut self, a: TraceVar, b: TraceVar) -> TraceVar {
        self.op2(Prim::Add, a, b, |c, x, y| c.add(x, y))
    }

    fn sub(&mut self, a: TraceVar, b: TraceVar) -> TraceVar {
        self.op2(Prim::Sub, a, b, |c, x, y| c.sub(x, y))
    }

    fn mul(&mut self, a: TraceVar, b: TraceVar) -> TraceVar {
        self.op2(Prim::Mul, a, b, |c, x, y| c.mul(x, y))
    }

    fn div(&mut self, a: TraceVar, b: TraceVar) -> TraceVar {
        self.op2(Prim::Div, a, b, |c, x, y| c.div(x, y))
    }

    fn neg(&mut self, a: TraceVar) -> TraceVar {
        self.op1(Prim::Neg, a, |c, x| c.neg(x))
    }

    fn scale(&mut self, a: TraceVar, k: f64) -> TraceVar {
        self.op1(Prim::Scale(k), a, |c, x| c.scale(x, k))
    }

    fn exp(&mut self, a: TraceVar) -> TraceVar {
        self.op1(Prim::Exp, a, |c, x| c.exp(x))
    }

    fn sin(&mut self, a: TraceVar) -> TraceVar {
        self.op1(Prim::Sin, a, |c, x| c.sin(x))
    }

    fn cos(&mut self, a: TraceVar) -> TraceVar {
        self.op1(Prim::Cos, a, |c, x| c.cos(x))
    }

    fn powi(&mut self, a: TraceVar, n: i32) -> TraceVar {
        self.op1(Prim::Powi(n), a, |c, x| c.powi(x, n))
    }

    fn recip(&mut self, a: TraceVar) -> TraceVar {
        self.op1(Prim::Recip, a, |c, x| c.recip(x))
    }

    fn sqrt(&mut self, a: TraceVar) -> TraceVar {
        self.op1(Prim::Sqrt, a, |c, x| c.sqrt(x))
    }
}
