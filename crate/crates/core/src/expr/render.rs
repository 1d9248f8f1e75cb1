//! Human-readable rendering of expression trees.
//!
//! [`ExpressionTree::render`] prints the tree as stored, weights included.
//! [`ExpressionTree::fold`] pushes scalar multipliers through linear nodes
//! and monomials so that, e.g., `1·exp(−1.083·(0.9236·p² + 1.0159·q⁴))`
//! becomes `exp(-1.000259*p^2 - 1.100220*q^4)`.

use std::fmt::Write as _;

use super::ops::{pairs, BinaryOp, InteractionOp, Operator, UnaryOp};
use super::template::{Block, Operand, SlotShape};
use super::tree::ExpressionTree;

/// `%g`-style formatting with `sig` significant digits.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        return format!("{:.*e}", sig.saturating_sub(1), x);
    }
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Fixed six-decimal coefficient formatting used by the folded form.
fn format_coef(c: f64) -> String {
    format!("{c:.6}")
}

fn is_unit(c: f64) -> bool {
    format_coef(c) == "1.000000"
}

fn is_neg_unit(c: f64) -> bool {
    format_coef(c) == "-1.000000"
}

/// A non-linear building block of a folded expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Var { block: Block, index: usize },
    Pair { op: InteractionOp, i: usize, j: usize },
    Pow(Box<Atom>, i32),
    Recip(Box<Atom>),
    Exp(Linear),
    Sin(Linear),
    Group(Linear),
    Product(Box<Atom>, Box<Atom>),
    Quotient(Box<Atom>, Box<Atom>),
}

/// A linear combination `Σ cₖ·atomₖ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Linear(pub Vec<(f64, Atom)>);

/// Naming and shape information needed to print and evaluate atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Naming {
    pub dim: usize,
    pub bodies: Option<usize>,
}

impl Naming {
    fn column_dim(&self) -> usize {
        self.bodies.map_or(self.dim, |r| self.dim / r)
    }

    fn var(&self, block: Block, index: usize) -> String {
        let letter = match block {
            Block::Momentum => "p",
            Block::Position => "q",
        };
        if self.dim == 1 {
            return letter.to_string();
        }
        match self.bodies {
            Some(_) => {
                let s = self.column_dim();
                let (body, axis) = (index / s, index % s);
                if s <= 3 {
                    format!("{letter}{}{}", body + 1, ["x", "y", "z"][axis])
                } else {
                    format!("{letter}{}_{axis}", body + 1)
                }
            }
            None => format!("{letter}{}", index + 1),
        }
    }
}

impl Atom {
    fn pow(self, n: i32) -> Atom {
        match self {
            Atom::Pow(a, m) => Atom::Pow(a, m * n),
            Atom::Recip(a) => Atom::Recip(Box::new(a.pow(n))),
            a => Atom::Pow(Box::new(a), n),
        }
    }

    fn recip(self) -> Atom {
        match self {
            Atom::Recip(a) => *a,
            a => Atom::Recip(Box::new(a)),
        }
    }

    pub fn eval(&self, naming: &Naming, p: &[f64], q: &[f64]) -> f64 {
        match self {
            Atom::Var { block, index } => match block {
                Block::Momentum => p[*index],
                Block::Position => q[*index],
            },
            Atom::Pair { op, i, j } => {
                let s = naming.column_dim();
                op.apply_pair(
                    &mut crate::grad::Real,
                    &q[i * s..(i + 1) * s],
                    &q[j * s..(j + 1) * s],
                )
            }
            Atom::Pow(a, n) => a.eval(naming, p, q).powi(*n),
            Atom::Recip(a) => 1.0 / a.eval(naming, p, q),
            Atom::Exp(l) => l.eval(naming, p, q).exp(),
            Atom::Sin(l) => l.eval(naming, p, q).sin(),
            Atom::Group(l) => l.eval(naming, p, q),
            Atom::Product(a, b) => a.eval(naming, p, q) * b.eval(naming, p, q),
            Atom::Quotient(a, b) => a.eval(naming, p, q) / b.eval(naming, p, q),
        }
    }

    fn is_simple(&self) -> bool {
        matches!(
            self,
            Atom::Var { .. } | Atom::Pair { .. } | Atom::Exp(_) | Atom::Sin(_) | Atom::Group(_)
        )
    }

    pub fn render(&self, naming: &Naming) -> String {
        match self {
            Atom::Var { block, index } => naming.var(*block, *index),
            Atom::Pair { op, i, j } => {
                let (sym, squared) = match op {
                    InteractionOp::DistanceSquared => ("-", true),
                    InteractionOp::Distance => ("-", false),
                    InteractionOp::ProductNormSquared => ("⊙", true),
                    InteractionOp::ProductNorm => ("⊙", false),
                };
                let base = format!("‖q{} {sym} q{}‖", i + 1, j + 1);
                if squared {
                    format!("{base}^2")
                } else {
                    base
                }
            }
            Atom::Pow(a, n) => {
                if matches!(**a, Atom::Var { .. } | Atom::Pair { op: InteractionOp::Distance | InteractionOp::ProductNorm, .. }) || matches!(**a, Atom::Group(_)) {
                    format!("{}^{n}", a.render(naming))
                } else {
                    format!("({})^{n}", a.render(naming))
                }
            }
            Atom::Recip(a) => format!("1/{}", a.render_operand(naming)),
            Atom::Exp(l) => format!("exp({})", l.render(naming)),
            Atom::Sin(l) => format!("sin({})", l.render(naming)),
            Atom::Group(l) => format!("({})", l.render(naming)),
            Atom::Product(a, b) => {
                format!("{}*{}", a.render_operand(naming), b.render_operand(naming))
            }
            Atom::Quotient(a, b) => {
                format!("{}/{}", a.render_operand(naming), b.render_operand(naming))
            }
        }
    }

    fn render_operand(&self, naming: &Naming) -> String {
        if self.is_simple() || matches!(self, Atom::Pow(..)) {
            self.render(naming)
        } else {
            format!("({})", self.render(naming))
        }
    }
}

impl Linear {
    fn single(c: f64, a: Atom) -> Self {
        Linear(vec![(c, a)])
    }

    fn scaled(mut self, w: f64) -> Self {
        for (c, _) in &mut self.0 {
            *c *= w;
        }
        self
    }

    fn into_atom(self) -> (f64, Atom) {
        if self.0.len() == 1 {
            self.0.into_iter().next().expect("one term")
        } else {
            (1.0, Atom::Group(self))
        }
    }

    pub fn terms(&self) -> &[(f64, Atom)] {
        &self.0
    }

    pub fn eval(&self, naming: &Naming, p: &[f64], q: &[f64]) -> f64 {
        self.0.iter().map(|(c, a)| c * a.eval(naming, p, q)).sum()
    }

    pub fn render(&self, naming: &Naming) -> String {
        let mut out = String::new();
        for (k, (c, a)) in self.0.iter().enumerate() {
            let term = render_term(*c, a, naming);
            if k == 0 {
                out.push_str(&term);
            } else if let Some(rest) = term.strip_prefix('-') {
                let _ = write!(out, " - {rest}");
            } else {
                let _ = write!(out, " + {term}");
            }
        }
        out
    }
}

fn render_term(c: f64, a: &Atom, naming: &Naming) -> String {
    if let Atom::Recip(inner) = a {
        return format!("{}/{}", format_coef(c), inner.render_operand(naming));
    }
    let body = a.render(naming);
    if is_unit(c) {
        body
    } else if is_neg_unit(c) {
        format!("-{body}")
    } else {
        format!("{}*{}", format_coef(c), a.render_operand(naming))
    }
}

/// A folded expression plus what is needed to evaluate or print it.
#[derive(Debug, Clone, PartialEq)]
pub struct Folded {
    pub naming: Naming,
    pub expr: Linear,
}

impl Folded {
    pub fn eval(&self, p: &[f64], q: &[f64]) -> f64 {
        self.expr.eval(&self.naming, p, q)
    }

    pub fn render(&self) -> String {
        self.expr.render(&self.naming)
    }

    /// `(term, coefficient)` rows, one per top-level term.
    pub fn coefficients(&self) -> Vec<(String, f64)> {
        self.expr
            .0
            .iter()
            .map(|(c, a)| (a.render(&self.naming), *c))
            .collect()
    }
}

impl ExpressionTree {
    fn naming(&self) -> Naming {
        let t = self.template();
        Naming {
            dim: t.momentum_dim().max(t.position_dim()),
            bodies: t.bodies(),
        }
    }

    /// Folds scalar multipliers into a linear combination of atoms.
    pub fn fold(&self) -> Folded {
        let root = self.fold_node(self.template().root());
        let mut expr = Linear::default();
        for l in root {
            expr.0.extend(l.0);
        }
        Folded {
            naming: self.naming(),
            expr,
        }
    }

    fn fold_operand(&self, op: Operand) -> Vec<Linear> {
        match op {
            Operand::Input(block) => {
                let n = match block {
                    Block::Momentum => self.template().momentum_dim(),
                    Block::Position => self.template().position_dim(),
                };
                (0..n)
                    .map(|index| Linear::single(1.0, Atom::Var { block, index }))
                    .collect()
            }
            Operand::Node(j) => self.fold_node(j),
        }
    }

    fn fold_node(&self, i: usize) -> Vec<Linear> {
        let t = self.template();
        let spec = &t.nodes()[i];
        let mut out: Vec<Linear> = match self.sequence().0[i] {
            Operator::Unary(op) => self
                .fold_operand(spec.operands[0])
                .into_iter()
                .map(|l| fold_unary(op, l))
                .collect(),
            Operator::Binary(op) => {
                let a = self.fold_operand(spec.operands[0]);
                let b = self.fold_operand(spec.operands[1]);
                let n = a.len().max(b.len());
                (0..n)
                    .map(|k| {
                        let x = a[if a.len() == 1 { 0 } else { k }].clone();
                        let y = b[if b.len() == 1 { 0 } else { k }].clone();
                        fold_binary(op, x, y)
                    })
                    .collect()
            }
            Operator::Interaction(op) => {
                let r = t.bodies().unwrap_or(0);
                pairs(r)
                    .map(|(i, j)| Linear::single(1.0, Atom::Pair { op, i, j }))
                    .collect()
            }
        };
        if let Some(slot) = t.slot(i) {
            let w = &self.weights()[slot.offset..slot.offset + slot.len];
            out = out
                .into_iter()
                .enumerate()
                .map(|(k, l)| l.scaled(if slot.len == 1 { w[0] } else { w[k] }))
                .collect();
        }
        if spec.sum {
            let mut s = Linear::default();
            for l in out {
                s.0.extend(l.0);
            }
            out = vec![s];
        }
        out
    }

    /// Infix rendering of the stored tree with weights to 6 significant
    /// digits. Unit weights are omitted.
    pub fn render(&self) -> String {
        let s = self.render_node(self.template().root());
        let s = strip_outer_parens(&s);
        let t = self.template();
        if t.output_len(t.root()) > 1 && !t.nodes()[t.root()].sum {
            format!("sum({s})")
        } else {
            s.to_string()
        }
    }

    fn render_operand(&self, op: Operand) -> String {
        match op {
            Operand::Input(Block::Momentum) => "p".into(),
            Operand::Input(Block::Position) => "q".into(),
            Operand::Node(j) => self.render_node(j),
        }
    }

    fn render_node(&self, i: usize) -> String {
        let t = self.template();
        let spec = &t.nodes()[i];
        let mut s = match self.sequence().0[i] {
            Operator::Unary(op) => {
                let x = self.render_operand(spec.operands[0]);
                match op {
                    UnaryOp::Id => x,
                    UnaryOp::Square => format!("{}^2", wrap(&x)),
                    UnaryOp::Cube => format!("{}^3", wrap(&x)),
                    UnaryOp::Quartic => format!("{}^4", wrap(&x)),
                    UnaryOp::Exp => format!("exp({})", strip_outer_parens(&x)),
                    UnaryOp::Sin => format!("sin({})", strip_outer_parens(&x)),
                    UnaryOp::Recip => format!("1/{}", wrap(&x)),
                }
            }
            Operator::Binary(op) => {
                let a = self.render_operand(spec.operands[0]);
                let b = self.render_operand(spec.operands[1]);
                format!("({a} {} {b})", op.symbol())
            }
            Operator::Interaction(op) => match op {
                InteractionOp::DistanceSquared => "‖qi - qj‖^2".into(),
                InteractionOp::Distance => "‖qi - qj‖".into(),
                InteractionOp::ProductNormSquared => "‖qi ⊙ qj‖^2".into(),
                InteractionOp::ProductNorm => "‖qi ⊙ qj‖".into(),
            },
        };
        if let Some(slot) = t.slot(i) {
            let w = &self.weights()[slot.offset..slot.offset + slot.len];
            let shape = t
                .weight_slots()
                .iter()
                .find(|ws| ws.node == i)
                .map(|ws| ws.shape)
                .unwrap_or(SlotShape::Scalar);
            s = match shape {
                SlotShape::Scalar if w[0] == 1.0 => s,
                SlotShape::Scalar => format!("{}*{}", format_sig(w[0], 6), wrap(&s)),
                SlotShape::PerElement => {
                    let ws: Vec<String> = w.iter().map(|&x| format_sig(x, 6)).collect();
                    format!("[{}]⊙{}", ws.join(", "), wrap(&s))
                }
            };
        }
        if spec.sum && t.output_len(i) > 1 {
            s = format!("sum({})", strip_outer_parens(&s));
        }
        s
    }
}

fn fold_unary(op: UnaryOp, l: Linear) -> Linear {
    match op {
        UnaryOp::Id => l,
        UnaryOp::Exp => Linear::single(1.0, Atom::Exp(l)),
        UnaryOp::Sin => Linear::single(1.0, Atom::Sin(l)),
        UnaryOp::Square | UnaryOp::Cube | UnaryOp::Quartic => {
            let n = op.power().expect("monomial");
            let (c, a) = l.into_atom();
            Linear::single(c.powi(n), a.pow(n))
        }
        UnaryOp::Recip => {
            let (c, a) = l.into_atom();
            Linear::single(1.0 / c, a.recip())
        }
    }
}

fn fold_binary(op: BinaryOp, a: Linear, b: Linear) -> Linear {
    match op {
        BinaryOp::Add => {
            let mut v = a.0;
            v.extend(b.0);
            Linear(v)
        }
        BinaryOp::Sub => {
            let mut v = a.0;
            v.extend(b.scaled(-1.0).0);
            Linear(v)
        }
        BinaryOp::Mul => {
            let (c1, a1) = a.into_atom();
            let (c2, a2) = b.into_atom();
            Linear::single(c1 * c2, Atom::Product(Box::new(a1), Box::new(a2)))
        }
        BinaryOp::Div => {
            let (c1, a1) = a.into_atom();
            let (c2, a2) = b.into_atom();
            Linear::single(c1 / c2, Atom::Quotient(Box::new(a1), Box::new(a2)))
        }
    }
}

fn wrap(s: &str) -> String {
    let simple = s
        .chars()
        .all(|c| c.is_alphanumeric() || matches!(c, '_' | '.' | '^'))
        || (s.starts_with('(') && strip_outer_parens(s).len() + 2 == s.len());
    if simple {
        s.to_string()
    } else {
        format!("({s})")
    }
}

/// Removes one pair of parentheses if it encloses the whole string.
fn strip_outer_parens(s: &str) -> &str {
    if !(s.starts_with('(') && s.ends_with(')')) {
        return s;
    }
    let mut depth = 0i32;
    for (k, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 && k != s.len() - 1 {
                    return s;
                }
            }
            _ => {}
        }
    }
    &s[1..s.len() - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{OperatorSequence, TreeTemplate};

    fn seq(ops: &[Operator]) -> OperatorSequence {
        OperatorSequence(ops.to_vec())
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.9236, 6), "0.9236");
        assert_eq!(format_sig(-1.0002588, 6), "-1.00026");
        assert_eq!(format_sig(123456.7, 6), "123457");
        assert_eq!(format_sig(1.0, 6), "1");
    }

    #[test]
    fn folds_nonseparable_candidate() {
        let t = ExpressionTree::new(
            TreeTemplate::nonseparable(),
            seq(&[
                Operator::Unary(UnaryOp::Square),
                Operator::Binary(BinaryOp::Add),
                Operator::Unary(UnaryOp::Quartic),
                Operator::Unary(UnaryOp::Exp),
            ]),
            vec![0.9236, 1.0159, -1.083, 1.000],
        )
        .unwrap();
        let folded = t.fold().render();
        assert!(
            folded.contains("exp(-1.000259*p^2 - 1.100220*q^4)"),
            "{folded}"
        );
        assert_eq!(t.render(), "exp(-1.083*(0.9236*p^2 + 1.0159*q^4))");
    }

    #[test]
    fn identity_tree_passes_through() {
        let t = ExpressionTree::new(
            TreeTemplate::nonseparable(),
            seq(&[
                Operator::Unary(UnaryOp::Id),
                Operator::Binary(BinaryOp::Add),
                Operator::Unary(UnaryOp::Id),
                Operator::Unary(UnaryOp::Id),
            ]),
            vec![1.0; 4],
        )
        .unwrap();
        assert_eq!(t.render(), "p + q");
        assert_eq!(t.fold().render(), "p + q");
    }

    #[test]
    fn three_body_reciprocal_distances() {
        let mut w = vec![0.5005, 0.4981, 0.4996, 0.4985, 0.4976, 0.5024];
        w.extend([1.0, -0.9985, -0.9970, -0.9949, 1.0]);
        let t = ExpressionTree::new(
            TreeTemplate::three_body(),
            seq(&[
                Operator::Unary(UnaryOp::Square),
                Operator::Binary(BinaryOp::Add),
                Operator::Interaction(InteractionOp::Distance),
                Operator::Unary(UnaryOp::Recip),
                Operator::Unary(UnaryOp::Id),
            ]),
            w,
        )
        .unwrap();
        let s = t.fold().render();
        assert!(s.contains("0.500500*p1x^2"), "{s}");
        assert!(s.contains("/‖q1 - q2‖"), "{s}");
        assert!(s.contains("- 0.994900/‖q2 - q3‖"), "{s}");
        assert_eq!(t.fold().coefficients().len(), 9);
    }

    #[test]
    fn folding_through_products_and_quotients() {
        let t = ExpressionTree::new(
            TreeTemplate::nonseparable(),
            seq(&[
                Operator::Unary(UnaryOp::Recip),
                Operator::Binary(BinaryOp::Div),
                Operator::Unary(UnaryOp::Sin),
                Operator::Unary(UnaryOp::Cube),
            ]),
            vec![2.0, -0.5, 3.0, 0.25],
        )
        .unwrap();
        let f = t.fold();
        for &(p, q) in &[(0.3, 0.7), (-1.2, 0.4), (2.0, -0.9)] {
            let a = t.evaluate(&[p], &[q]).unwrap();
            let b = f.eval(&[p], &[q]);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
