//! Expression trees: operator dictionaries, fixed templates, evaluation and
//! rendering.

mod ops;
mod render;
mod template;
mod tree;

pub use ops::{
    apply_interaction, pairs, BinaryOp, InteractionOp, Operator, OperatorSets, UnaryOp,
};
pub use render::{format_sig, Atom, Folded, Linear, Naming};
pub use template::{
    Block, NodeKind, Operand, SlotShape, TemplateId, TemplateNode, TreeTemplate, WeightSlot,
};
pub use tree::{ExpressionTree, OperatorSequence};
