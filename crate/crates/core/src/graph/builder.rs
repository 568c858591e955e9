use super::{Graph, InteractionKind, Node, NodeId, NodeOp, Params, SemanticType, Task};

/// Assembles a graph by hand. Node ids are assigned in insertion order and
/// every node starts without parameters.
///
/// ```
/// use pathlattice::graph::{GraphBuilder, InteractionKind, SemanticType, Task};
///
/// let mut b = GraphBuilder::new(Task::Regressor);
/// let x0 = b.input("x0", SemanticType::Numerical);
/// let x1 = b.input("x1", SemanticType::Numerical);
/// let m = b.interaction(InteractionKind::Multiply, &[x0, x1]);
/// let g = b.output("y", m);
/// assert!(g.validate().is_empty());
/// assert_eq!(g.depth(), 1);
/// ```
#[derive(Debug)]
pub struct GraphBuilder {
    task: Task,
    nodes: Vec<Node>,
}

impl GraphBuilder {
    pub fn new(task: Task) -> Self {
        GraphBuilder { task, nodes: Vec::new() }
    }

    fn push(&mut self, op: NodeOp, incoming: Vec<NodeId>) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node { id, op, params: Params::Empty, incoming });
        id
    }

    pub fn input(&mut self, feature: &str, stype: SemanticType) -> NodeId {
        self.push(NodeOp::InputRegister { feature: feature.to_string(), stype }, Vec::new())
    }

    pub fn interaction(&mut self, kind: InteractionKind, args: &[NodeId]) -> NodeId {
        self.push(NodeOp::Interaction { kind, cell: None }, args.to_vec())
    }

    pub fn output(mut self, feature: &str, source: NodeId) -> Graph {
        self.push(NodeOp::OutputRegister { feature: feature.to_string() }, vec![source]);
        Graph::new(self.task, self.nodes)
    }
}
