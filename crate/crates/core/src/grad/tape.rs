//! Flat reverse-mode tape over `f64`.
//!
//! Every recorded node stores up to two parent links together with the local
//! partial derivative towards each parent, evaluated during the forward pass.
//! The reverse sweep is then a single accumulation loop.

use super::Arith;

const NO_PARENT: u32 = u32::MAX;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    values: Vec<f64>,
    parents: Vec<[u32; 2]>,
    partials: Vec<[f64; 2]>,
    adjoints: Vec<f64>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            values: Vec::with_capacity(n),
            parents: Vec::with_capacity(n),
            partials: Vec::with_capacity(n),
            adjoints: Vec::with_capacity(n),
        }
    }

    /// Drops every node while keeping the allocations.
    pub fn clear(&mut self) {
        self.values.clear();
        self.parents.clear();
        self.partials.clear();
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Records an independent variable.
    pub fn var(&mut self, value: f64) -> Var {
        self.push(value, [NO_PARENT, NO_PARENT], [0.0, 0.0])
    }

    fn push(&mut self, value: f64, parents: [u32; 2], partials: [f64; 2]) -> Var {
        let idx = self.values.len() as u32;
        self.values.push(value);
        self.parents.push(parents);
        self.partials.push(partials);
        Var(idx)
    }

    fn unary(&mut self, a: Var, value: f64, da: f64) -> Var {
        self.push(value, [a.0, NO_PARENT], [da, 0.0])
    }

    fn binary(&mut self, a: Var, b: Var, value: f64, da: f64, db: f64) -> Var {
        self.push(value, [a.0, b.0], [da, db])
    }

    /// Runs the reverse sweep seeded at `output` and returns d(output)/d(v)
    /// for each requested variable.
    pub fn gradient(&mut self, output: Var, wrt: &[Var]) -> Vec<f64> {
        self.backward(output);
        wrt.iter().map(|v| self.adjoints[v.index()]).collect()
    }

    /// Reverse sweep; afterwards [`Tape::adjoint`] is valid for every node.
    pub fn backward(&mut self, output: Var) {
        let n = output.index() + 1;
        self.adjoints.clear();
        self.adjoints.resize(self.values.len(), 0.0);
        self.adjoints[output.index()] = 1.0;
        for i in (0..n).rev() {
            let g = self.adjoints[i];
            if g == 0.0 {
                continue;
            }
            let [pa, pb] = self.parents[i];
            let [da, db] = self.partials[i];
            if pa != NO_PARENT {
                self.adjoints[pa as usize] += g * da;
            }
            if pb != NO_PARENT {
                self.adjoints[pb as usize] += g * db;
            }
        }
    }

    pub fn adjoint(&self, v: Var) -> f64 {
        self.adjoints.get(v.index()).copied().unwrap_or(0.0)
    }
}

impl Arith for Tape {
    type Value = Var;

    fn constant(&mut self, c: f64) -> Var {
        self.push(c, [NO_PARENT, NO_PARENT], [0.0, 0.0])
    }

    fn value(&self, v: Var) -> f64 {
        self.values[v.index()]
    }

    fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.binary(a, b, v, 1.0, 1.0)
    }

    fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.binary(a, b, v, 1.0, -1.0)
    }

    fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.binary(a, b, x * y, y, x)
    }

    fn div(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        let v = x / y;
        self.binary(a, b, v, 1.0 / y, -v / y)
    }

    fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.unary(a, v, -1.0)
    }

    fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.unary(a, v, c)
    }

    fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).exp();
        self.unary(a, v, v)
    }

    fn sin(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.unary(a, x.sin(), x.cos())
    }

    fn cos(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.unary(a, x.cos(), -x.sin())
    }

    fn powi(&mut self, a: Var, n: i32) -> Var {
        let x = self.value(a);
        let d = match n {
            0 => 0.0,
            1 => 1.0,
            2 => 2.0 * x,
            _ => f64::from(n) * x.powi(n - 1),
        };
        self.unary(a, x.powi(n), d)
    }

    fn recip(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = 1.0 / x;
        self.unary(a, v, -v * v)
    }

    fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).sqrt();
        self.unary(a, v, 0.5 / v)
    }
}
