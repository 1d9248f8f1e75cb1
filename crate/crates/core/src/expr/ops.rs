use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::Arith;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnaryOp {
    Id,
    Square,
    Cube,
    Quartic,
    Exp,
    Sin,
    Recip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryOp {
    Add,
    Mul,
    Sub,
    Div,
}

/// Pairwise operators over the column vectors of a position block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionOp {
    /// ‖qᵢ − qⱼ‖²
    DistanceSquared,
    /// ‖qᵢ − qⱼ‖
    Distance,
    /// ‖qᵢ ⊙ qⱼ‖²
    ProductNormSquared,
    /// ‖qᵢ ⊙ qⱼ‖
    ProductNorm,
}

impl UnaryOp {
    pub fn apply<A: Arith>(self, ctx: &mut A, x: A::Value) -> A::Value {
        match self {
            UnaryOp::Id => x,
            UnaryOp::Square => ctx.powi(x, 2),
            UnaryOp::Cube => ctx.powi(x, 3),
            UnaryOp::Quartic => ctx.powi(x, 4),
            UnaryOp::Exp => ctx.exp(x),
            UnaryOp::Sin => ctx.sin(x),
            UnaryOp::Recip => ctx.recip(x),
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        self.apply(&mut crate::grad::Real, x)
    }

    /// Integer power for the monomial operators.
    pub fn power(self) -> Option<i32> {
        match self {
            UnaryOp::Id => Some(1),
            UnaryOp::Square => Some(2),
            UnaryOp::Cube => Some(3),
            UnaryOp::Quartic => Some(4),
            UnaryOp::Recip => Some(-1),
            UnaryOp::Exp | UnaryOp::Sin => None,
        }
    }
}

impl BinaryOp {
    pub fn apply<A: Arith>(self, ctx: &mut A, a: A::Value, b: A::Value) -> A::Value {
        match self {
            BinaryOp::Add => ctx.add(a, b),
            BinaryOp::Mul => ctx.mul(a, b),
            BinaryOp::Sub => ctx.sub(a, b),
            BinaryOp::Div => ctx.div(a, b),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Mul => "*",
            BinaryOp::Sub => "-",
            BinaryOp::Div => "/",
        }
    }
}

impl InteractionOp {
    /// Applies the operator to one pair of column vectors.
    pub fn apply_pair<A: Arith>(self, ctx: &mut A, xi: &[A::Value], xj: &[A::Value]) -> A::Value {
        let mut acc: Option<A::Value> = None;
        for (&a, &b) in xi.iter().zip(xj) {
            let c = match self {
                InteractionOp::DistanceSquared | InteractionOp::Distance => ctx.sub(a, b),
                InteractionOp::ProductNormSquared | InteractionOp::ProductNorm => ctx.mul(a, b),
            };
            let c2 = ctx.powi(c, 2);
            acc = Some(match acc {
                Some(s) => ctx.add(s, c2),
                None => c2,
            });
        }
        let sq = acc.unwrap_or_else(|| ctx.constant(0.0));
        match self {
            InteractionOp::DistanceSquared | InteractionOp::ProductNormSquared => sq,
            InteractionOp::Distance | InteractionOp::ProductNorm => ctx.sqrt(sq),
        }
    }
}

/// Applies `op` to every pair `(i, j)`, `i < j`, of the `r` column vectors
/// stored consecutively in `columns` (each of length `dim`). Output order is
/// lexicographic in `(i, j)`.
pub fn apply_interaction<A: Arith>(
    ctx: &mut A,
    op: InteractionOp,
    columns: &[A::Value],
    dim: usize,
) -> Result<Vec<A::Value>> {
    if dim == 0 || columns.len() % dim != 0 {
        return Err(Error::Structural(format!(
            "{} values cannot be split into columns of length {dim}",
            columns.len()
        )));
    }
    let r = columns.len() / dim;
    if r < 2 {
        return Err(Error::Structural(format!(
            "interaction needs at least 2 columns, got {r}"
        )));
    }
    let mut out = Vec::with_capacity(r * (r - 1) / 2);
    for (i, j) in pairs(r) {
        let xi = &columns[i * dim..(i + 1) * dim];
        let xj = &columns[j * dim..(j + 1) * dim];
        out.push(op.apply_pair(ctx, xi, xj));
    }
    Ok(out)
}

/// Lexicographic pairs `(i, j)` with `i < j < r`.
pub fn pairs(r: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..r).flat_map(move |i| (i + 1..r).map(move |j| (i, j)))
}

/// An operator of any node kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Operator {
    Unary(UnaryOp),
    Binary(BinaryOp),
    Interaction(InteractionOp),
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Operator::Unary(UnaryOp::Id) => "Id",
            Operator::Unary(UnaryOp::Square) => "(.)^2",
            Operator::Unary(UnaryOp::Cube) => "(.)^3",
            Operator::Unary(UnaryOp::Quartic) => "(.)^4",
            Operator::Unary(UnaryOp::Exp) => "exp",
            Operator::Unary(UnaryOp::Sin) => "sin",
            Operator::Unary(UnaryOp::Recip) => "(.)^-1",
            Operator::Binary(b) => b.symbol(),
            Operator::Interaction(InteractionOp::DistanceSquared) => "‖qi - qj‖^2",
            Operator::Interaction(InteractionOp::Distance) => "‖qi - qj‖",
            Operator::Interaction(InteractionOp::ProductNormSquared) => "‖qi ⊙ qj‖^2",
            Operator::Interaction(InteractionOp::ProductNorm) => "‖qi ⊙ qj‖",
        };
        f.write_str(s)
    }
}

/// The operator dictionaries each node kind samples from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSets {
    pub unary: Vec<UnaryOp>,
    pub binary: Vec<BinaryOp>,
    #[serde(default)]
    pub interaction: Vec<InteractionOp>,
}

impl OperatorSets {
    /// Dictionaries used for the non-separable benchmark.
    pub fn nonseparable() -> Self {
        use UnaryOp::*;
        Self {
            unary: vec![Id, Square, Cube, Quartic, Exp, Sin, Recip],
            binary: vec![BinaryOp::Add, BinaryOp::Mul, BinaryOp::Sub, BinaryOp::Div],
            interaction: vec![],
        }
    }

    /// Dictionaries used for the planar three-body benchmark.
    pub fn three_body() -> Self {
        use InteractionOp::*;
        use UnaryOp::*;
        Self {
            unary: vec![Id, Square, Cube, Exp, Sin, Recip],
            binary: vec![BinaryOp::Add, BinaryOp::Mul, BinaryOp::Sub],
            interaction: vec![DistanceSquared, Distance, ProductNormSquared, ProductNorm],
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn unique<T: PartialEq + fmt::Debug>(name: &str, v: &[T]) -> Result<()> {
            for (i, a) in v.iter().enumerate() {
                if v[i + 1..].contains(a) {
                    return Err(Error::Structural(format!("duplicate {name} operator {a:?}")));
                }
            }
            Ok(())
        }
        unique("unary", &self.unary)?;
        unique("binary", &self.binary)?;
        unique("interaction", &self.interaction)
    }

    /// Operators available to a node of the given kind, in dictionary order.
    pub fn for_kind(&self, kind: super::NodeKind) -> Vec<Operator> {
        use super::NodeKind;
        match kind {
            NodeKind::Unary => self.unary.iter().map(|&u| Operator::Unary(u)).collect(),
            NodeKind::Binary => self.binary.iter().map(|&b| Operator::Binary(b)).collect(),
            NodeKind::Interaction => self
                .interaction
                .iter()
                .map(|&i| Operator::Interaction(i))
                .collect(),
        }
    }
}
