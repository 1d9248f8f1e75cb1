use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Unary,
    Binary,
    Interaction,
}

/// Input slices a leaf can consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Momentum,
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Node(usize),
    Input(Block),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateNode {
    pub kind: NodeKind,
    pub operands: Vec<Operand>,
    /// Reduce this node's (weighted) output to a scalar by summation.
    #[serde(default)]
    pub sum: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotShape {
    Scalar,
    PerElement,
}

/// A multiplicative weight attached to the output of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightSlot {
    pub node: usize,
    pub shape: SlotShape,
}

/// Where a node's weights live inside the flat weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct SlotLayout {
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TemplateDoc {
    name: String,
    momentum_dim: usize,
    position_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bodies: Option<usize>,
    root: usize,
    nodes: Vec<TemplateNode>,
    weights: Vec<WeightSlot>,
}

/// A fixed tree structure. Nodes are stored in inorder; a unary node comes
/// right after its operand subtree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TemplateDoc", into = "TemplateDoc")]
pub struct TreeTemplate {
    doc: TemplateDoc,
    lengths: Vec<usize>,
    slots: Vec<Option<SlotLayout>>,
    weight_count: usize,
}

impl TreeTemplate {
    pub fn new(
        name: impl Into<String>,
        momentum_dim: usize,
        position_dim: usize,
        bodies: Option<usize>,
        root: usize,
        nodes: Vec<TemplateNode>,
        weights: Vec<WeightSlot>,
    ) -> Result<Self> {
        Self::try_from(TemplateDoc {
            name: name.into(),
            momentum_dim,
            position_dim,
            bodies,
            root,
            nodes,
            weights,
        })
    }

    /// Three unary nodes and one binary node: `u(u(p) ∘ u(q))` with a scalar
    /// weight on every node output. Weight order is postorder:
    /// momentum leaf, position leaf, binary, root.
    pub fn nonseparable() -> Self {
        Self::nonseparable_with_dim(1)
    }

    pub fn nonseparable_with_dim(dim: usize) -> Self {
        let nodes = vec![
            unary(Operand::Input(Block::Momentum), false),
            TemplateNode {
                kind: NodeKind::Binary,
                operands: vec![Operand::Node(0), Operand::Node(2)],
                sum: false,
            },
            unary(Operand::Input(Block::Position), false),
            unary(Operand::Node(1), false),
        ];
        let weights = [0, 2, 1, 3]
            .into_iter()
            .map(|node| WeightSlot {
                node,
                shape: SlotShape::Scalar,
            })
            .collect();
        Self::new("nonseparable", dim, dim, None, 3, nodes, weights)
            .expect("built-in template is valid")
    }

    /// Planar three-body template.
    pub fn three_body() -> Self {
        Self::n_body(3, 2)
    }

    /// `Σ w ⊙ u(p) + Σ w ⊙ u(u(I(q)))` with an interaction node on the
    /// position block. The momentum leaf and the outer position unary carry
    /// per-element weights; the inner unary and the binary root carry scalars.
    pub fn n_body(bodies: usize, spatial_dim: usize) -> Self {
        let nodes = vec![
            unary(Operand::Input(Block::Momentum), true),
            TemplateNode {
                kind: NodeKind::Binary,
                operands: vec![Operand::Node(0), Operand::Node(4)],
                sum: false,
            },
            TemplateNode {
                kind: NodeKind::Interaction,
                operands: vec![Operand::Input(Block::Position)],
                sum: false,
            },
            unary(Operand::Node(2), false),
            unary(Operand::Node(3), true),
        ];
        let weights = vec![
            WeightSlot {
                node: 0,
                shape: SlotShape::PerElement,
            },
            WeightSlot {
                node: 3,
                shape: SlotShape::Scalar,
            },
            WeightSlot {
                node: 4,
                shape: SlotShape::PerElement,
            },
            WeightSlot {
                node: 1,
                shape: SlotShape::Scalar,
            },
        ];
        let dim = bodies * spatial_dim;
        Self::new("three_body", dim, dim, Some(bodies), 1, nodes, weights)
            .expect("built-in template is valid")
    }

    pub fn name(&self) -> &str {
        &self.doc.name
    }

    pub fn momentum_dim(&self) -> usize {
        self.doc.momentum_dim
    }

    pub fn position_dim(&self) -> usize {
        self.doc.position_dim
    }

    pub fn bodies(&self) -> Option<usize> {
        self.doc.bodies
    }

    /// Spatial dimension of one body's column when the position block is
    /// split for interaction nodes.
    pub fn column_dim(&self) -> usize {
        match self.doc.bodies {
            Some(r) => self.doc.position_dim / r,
            None => self.doc.position_dim,
        }
    }

    pub fn root(&self) -> usize {
        self.doc.root
    }

    pub fn nodes(&self) -> &[TemplateNode] {
        &self.doc.nodes
    }

    pub fn weight_slots(&self) -> &[WeightSlot] {
        &self.doc.weights
    }

    /// Number of operator nodes `Q`.
    pub fn node_count(&self) -> usize {
        self.doc.nodes.len()
    }

    pub fn kinds(&self) -> Vec<NodeKind> {
        self.doc.nodes.iter().map(|n| n.kind).collect()
    }

    /// Total number of scalar weights.
    pub fn weight_count(&self) -> usize {
        self.weight_count
    }

    /// Output length of node `i` before any summation.
    pub fn output_len(&self, i: usize) -> usize {
        self.lengths[i]
    }

    pub(crate) fn slot(&self, node: usize) -> Option<SlotLayout> {
        self.slots[node]
    }

    pub(crate) fn operand_len(&self, op: Operand) -> usize {
        match op {
            Operand::Input(Block::Momentum) => self.doc.momentum_dim,
            Operand::Input(Block::Position) => self.doc.position_dim,
            Operand::Node(j) => {
                if self.doc.nodes[j].sum {
                    1
                } else {
                    self.lengths[j]
                }
            }
        }
    }
}

fn unary(operand: Operand, sum: bool) -> TemplateNode {
    TemplateNode {
        kind: NodeKind::Unary,
        operands: vec![operand],
        sum,
    }
}

fn structural(msg: impl Into<String>) -> Error {
    Error::Structural(msg.into())
}

impl TryFrom<TemplateDoc> for TreeTemplate {
    type Error = Error;

    fn try_from(doc: TemplateDoc) -> Result<Self> {
        let n = doc.nodes.len();
        if n == 0 {
            return Err(structural("template has no nodes"));
        }
        if doc.root >= n {
            return Err(structural(format!("root {} out of range", doc.root)));
        }
        if doc.momentum_dim == 0 || doc.position_dim == 0 {
            return Err(structural("input blocks must be non-empty"));
        }
        if let Some(r) = doc.bodies {
            if r < 2 || doc.position_dim % r != 0 {
                return Err(structural(format!(
                    "position block of length {} cannot hold {r} bodies",
                    doc.position_dim
                )));
            }
        }

        let mut parent_count = vec![0usize; n];
        for (i, node) in doc.nodes.iter().enumerate() {
            let arity = match node.kind {
                NodeKind::Unary | NodeKind::Interaction => 1,
                NodeKind::Binary => 2,
            };
            if node.operands.len() != arity {
                return Err(structural(format!(
                    "node {i} ({:?}) needs {arity} operands, has {}",
                    node.kind,
                    node.operands.len()
                )));
            }
            if node.kind == NodeKind::Interaction {
                if node.operands[0] != Operand::Input(Block::Position) {
                    return Err(structural(format!(
                        "interaction node {i} must consume the position block"
                    )));
                }
                if doc.bodies.is_none() {
                    return Err(structural("interaction nodes require `bodies`"));
                }
            }
            for op in &node.operands {
                if let Operand::Node(j) = *op {
                    if j >= n || j == i {
                        return Err(structural(format!("node {i} has invalid operand {j}")));
                    }
                    parent_count[j] += 1;
                }
            }
        }
        for (i, &c) in parent_count.iter().enumerate() {
            let expected = usize::from(i != doc.root);
            if c != expected {
                return Err(structural(format!(
                    "node {i} is referenced {c} times; the nodes must form one tree"
                )));
            }
        }

        // The stored order must be the inorder traversal from the root.
        let mut order = Vec::with_capacity(n);
        let mut stack: Vec<(usize, bool)> = vec![(doc.root, false)];
        while let Some((i, expanded)) = stack.pop() {
            if order.len() > n {
                return Err(structural("template contains a cycle"));
            }
            if expanded {
                order.push(i);
                continue;
            }
            let node = &doc.nodes[i];
            match node.kind {
                NodeKind::Binary => {
                    if let Operand::Node(r) = node.operands[1] {
                        stack.push((r, false));
                    }
                    stack.push((i, true));
                    if let Operand::Node(l) = node.operands[0] {
                        stack.push((l, false));
                    }
                }
                _ => {
                    stack.push((i, true));
                    if let Operand::Node(c) = node.operands[0] {
                        stack.push((c, false));
                    }
                }
            }
        }
        if order != (0..n).collect::<Vec<_>>() {
            return Err(structural(format!(
                "nodes are not stored in inorder (traversal gives {order:?})"
            )));
        }

        let mut template = TreeTemplate {
            lengths: vec![0; n],
            slots: vec![None; n],
            weight_count: 0,
            doc,
        };

        // Operands precede their parent in postorder; compute lengths that way.
        let mut post = Vec::with_capacity(n);
        postorder(&template.doc.nodes, template.doc.root, &mut post);
        for &i in &post {
            let node = &template.doc.nodes[i];
            let len = match node.kind {
                NodeKind::Unary => template.operand_len(node.operands[0]),
                NodeKind::Binary => {
                    let a = template.operand_len(node.operands[0]);
                    let b = template.operand_len(node.operands[1]);
                    if a == b || b == 1 {
                        a
                    } else if a == 1 {
                        b
                    } else {
                        return Err(structural(format!(
                            "binary node {i} combines lengths {a} and {b}"
                        )));
                    }
                }
                NodeKind::Interaction => {
                    let r = template.doc.bodies.unwrap_or(0);
                    r * (r - 1) / 2
                }
            };
            template.lengths[i] = len;
        }

        let mut offset = 0;
        for slot in &template.doc.weights {
            let i = slot.node;
            if i >= n {
                return Err(structural(format!("weight slot on missing node {i}")));
            }
            if template.doc.nodes[i].kind == NodeKind::Interaction {
                return Err(structural(format!(
                    "interaction node {i} cannot carry a weight slot"
                )));
            }
            if template.slots[i].is_some() {
                return Err(structural(format!("node {i} has two weight slots")));
            }
            let len = match slot.shape {
                SlotShape::Scalar => 1,
                SlotShape::PerElement => template.lengths[i],
            };
            template.slots[i] = Some(SlotLayout { offset, len });
            offset += len;
        }
        template.weight_count = offset;
        Ok(template)
    }
}

pub(crate) fn postorder(nodes: &[TemplateNode], i: usize, out: &mut Vec<usize>) {
    for op in &nodes[i].operands {
        if let Operand::Node(j) = *op {
            postorder(nodes, j, out);
        }
    }
    out.push(i);
}

impl From<TreeTemplate> for TemplateDoc {
    fn from(t: TreeTemplate) -> Self {
        t.doc
    }
}

/// Named built-in templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Nonseparable,
    ThreeBody,
}

impl TemplateId {
    pub fn build(self) -> TreeTemplate {
        match self {
            TemplateId::Nonseparable => TreeTemplate::nonseparable(),
            TemplateId::ThreeBody => TreeTemplate::three_body(),
        }
    }
}
