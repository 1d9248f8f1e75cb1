use serde::{Deserialize, Serialize};

use super::ops::{apply_interaction, BinaryOp, InteractionOp, Operator, UnaryOp};
use super::template::{Block, NodeKind, Operand, TemplateId, TreeTemplate};
use crate::error::{Error, Result};
use crate::grad::{self, Arith, Energy, Real};

/// One operator per template node, in inorder.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OperatorSequence(pub Vec<Operator>);

impl OperatorSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn operators(&self) -> &[Operator] {
        &self.0
    }

    /// Checks length and operator/node-kind agreement against `template`.
    pub fn check(&self, template: &TreeTemplate) -> Result<()> {
        if self.0.len() != template.node_count() {
            return Err(Error::Structural(format!(
                "sequence has {} operators, template has {} nodes",
                self.0.len(),
                template.node_count()
            )));
        }
        for (i, (op, node)) in self.0.iter().zip(template.nodes()).enumerate() {
            let ok = matches!(
                (op, node.kind),
                (Operator::Unary(_), NodeKind::Unary)
                    | (Operator::Binary(_), NodeKind::Binary)
                    | (Operator::Interaction(_), NodeKind::Interaction)
            );
            if !ok {
                return Err(Error::Structural(format!(
                    "operator {op} cannot be placed on {:?} node {i}",
                    node.kind
                )));
            }
        }
        Ok(())
    }
}

impl OperatorSequence {
    /// `((·)², +, (·)⁴, exp)`: the structure of `exp(−αp² − βq⁴)` on the
    /// non-separable template.
    pub fn nonseparable_target() -> Self {
        OperatorSequence(vec![
            Operator::Unary(UnaryOp::Square),
            Operator::Binary(BinaryOp::Add),
            Operator::Unary(UnaryOp::Quartic),
            Operator::Unary(UnaryOp::Exp),
        ])
    }

    /// `((·)², +, ‖qᵢ−qⱼ‖, (·)⁻¹, Id)`: kinetic plus pairwise inverse-distance
    /// potential on the three-body template.
    pub fn three_body_target() -> Self {
        OperatorSequence(vec![
            Operator::Unary(UnaryOp::Square),
            Operator::Binary(BinaryOp::Add),
            Operator::Interaction(InteractionOp::Distance),
            Operator::Unary(UnaryOp::Recip),
            Operator::Unary(UnaryOp::Id),
        ])
    }
}

impl std::fmt::Display for OperatorSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("(")?;
        for (i, op) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{op}")?;
        }
        f.write_str(")")
    }
}

/// A full template document, or the name of a built-in template.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum TemplateRef {
    Builtin(TemplateId),
    Doc(TreeTemplate),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TreeDoc {
    template: TemplateRef,
    sequence: OperatorSequence,
    weights: Vec<f64>,
}

/// A template with its operators and weights fixed: an evaluable surrogate
/// Hamiltonian. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeDoc", into = "TreeDoc")]
pub struct ExpressionTree {
    template: TreeTemplate,
    sequence: OperatorSequence,
    weights: Vec<f64>,
}

impl TryFrom<TreeDoc> for ExpressionTree {
    type Error = Error;

    fn try_from(doc: TreeDoc) -> Result<Self> {
        let template = match doc.template {
            TemplateRef::Builtin(id) => id.build(),
            TemplateRef::Doc(t) => t,
        };
        ExpressionTree::new(template, doc.sequence, doc.weights)
    }
}

impl From<ExpressionTree> for TreeDoc {
    fn from(t: ExpressionTree) -> Self {
        TreeDoc {
            template: TemplateRef::Doc(t.template),
            sequence: t.sequence,
            weights: t.weights,
        }
    }
}

impl ExpressionTree {
    pub fn new(template: TreeTemplate, sequence: OperatorSequence, weights: Vec<f64>) -> Result<Self> {
        sequence.check(&template)?;
        if weights.len() != template.weight_count() {
            return Err(Error::Structural(format!(
                "template expects {} weights, got {}",
                template.weight_count(),
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Structural(format!("weight {i} is not finite")));
        }
        Ok(Self {
            template,
            sequence,
            weights,
        })
    }

    pub fn template(&self) -> &TreeTemplate {
        &self.template
    }

    pub fn sequence(&self) -> &OperatorSequence {
        &self.sequence
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same structure, new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.template.clone(), self.sequence.clone(), weights)
    }

    /// Ĥ(p, q) with the stored weights.
    pub fn evaluate(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        self.eval_in(&mut Real, &self.weights, p, q)
    }

    /// `(∂Ĥ/∂p, ∂Ĥ/∂q)` with the stored weights.
    pub fn partials(&self, p: &[f64], q: &[f64]) -> Result<grad::Partials<f64>> {
        grad::hamiltonian_partials(self, &self.weights, p, q)
    }

    /// Evaluates the tree in an arbitrary arithmetic context, with the weights
    /// supplied as context values.
    pub fn eval_in<A: Arith>(
        &self,
        ctx: &mut A,
        weights: &[A::Value],
        p: &[A::Value],
        q: &[A::Value],
    ) -> Result<A::Value> {
        let t = &self.template;
        if weights.len() != t.weight_count() {
            return Err(Error::Structural(format!(
                "expected {} weights, got {}",
                t.weight_count(),
                weights.len()
            )));
        }
        if p.len() != t.momentum_dim() || q.len() != t.position_dim() {
            return Err(Error::Structural(format!(
                "expected (p, q) of dimensions ({}, {}), got ({}, {})",
                t.momentum_dim(),
                t.position_dim(),
                p.len(),
                q.len()
            )));
        }
        let mut eval = Evaluator {
            tree: self,
            weights,
            p,
            q,
        };
        let out = eval.node(ctx, t.root())?;
        let total = sum(ctx, &out);
        if !ctx.value(total).is_finite() {
            return Err(Error::NonFinite { node: t.root() });
        }
        Ok(total)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl Energy for ExpressionTree {
    fn param_count(&self) -> usize {
        self.template.weight_count()
    }

    fn energy<A: Arith>(
        &self,
        ctx: &mut A,
        params: &[A::Value],
        p: &[A::Value],
        q: &[A::Value],
    ) -> Result<A::Value> {
        self.eval_in(ctx, params, p, q)
    }
}

fn sum<A: Arith>(ctx: &mut A, xs: &[A::Value]) -> A::Value {
    let mut it = xs.iter().copied();
    let first = it.next().unwrap_or_else(|| ctx.constant(0.0));
    it.fold(first, |acc, x| ctx.add(acc, x))
}

struct Evaluator<'a, V> {
    tree: &'a ExpressionTree,
    weights: &'a [V],
    p: &'a [V],
    q: &'a [V],
}

impl<V: Copy> Evaluator<'_, V> {
    fn operand<A: Arith<Value = V>>(&mut self, ctx: &mut A, op: Operand) -> Result<Vec<V>> {
        match op {
            Operand::Input(Block::Momentum) => Ok(self.p.to_vec()),
            Operand::Input(Block::Position) => Ok(self.q.to_vec()),
            Operand::Node(j) => self.node(ctx, j),
        }
    }

    fn node<A: Arith<Value = V>>(&mut self, ctx: &mut A, i: usize) -> Result<Vec<V>> {
        let template = &self.tree.template;
        let spec = &template.nodes()[i];
        let mut out = match self.tree.sequence.0[i] {
            Operator::Unary(op) => {
                let x = self.operand(ctx, spec.operands[0])?;
                x.into_iter().map(|v| op.apply(ctx, v)).collect::<Vec<_>>()
            }
            Operator::Binary(op) => {
                let a = self.operand(ctx, spec.operands[0])?;
                let b = self.operand(ctx, spec.operands[1])?;
                let n = a.len().max(b.len());
                (0..n)
                    .map(|k| {
                        let x = a[if a.len() == 1 { 0 } else { k }];
                        let y = b[if b.len() == 1 { 0 } else { k }];
                        op.apply(ctx, x, y)
                    })
                    .collect()
            }
            Operator::Interaction(op) => {
                let cols = self.operand(ctx, spec.operands[0])?;
                apply_interaction(ctx, op, &cols, template.column_dim())?
            }
        };
        if let Some(slot) = template.slot(i) {
            let w = &self.weights[slot.offset..slot.offset + slot.len];
            for (k, v) in out.iter_mut().enumerate() {
                let wk = if slot.len == 1 { w[0] } else { w[k] };
                *v = ctx.mul(wk, *v);
            }
        }
        if out.iter().any(|&v| !ctx.value(v).is_finite()) {
            return Err(Error::NonFinite { node: i });
        }
        if spec.sum {
            out = vec![sum(ctx, &out)];
        }
        Ok(out)
    }
}
