//! Model graphs: input registers feeding interaction nodes feeding a single
//! output register.
//!
//! Edges carry no weights. Every trainable value lives in a node's
//! [`Params`]: numerical registers hold a frozen `[min, max]` scaling plus a
//! trainable affine `(w, b)`, categorical registers hold one weight per
//! training category and a shared bias, `linear` interactions and the output
//! register hold an affine `(w, b)`.

mod builder;
mod interaction;
mod program;

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Sample, Value};
use crate::error::{Error, Result};
use crate::lattice::CellId;

pub use builder::GraphBuilder;
pub use interaction::{eval_interaction, InteractionKind, SINGULARITY_EPSILON};
pub(crate) use interaction::{apply as apply_interaction, partials as interaction_partials};
pub(crate) use program::{Batch, Program};

pub type NodeId = u32;

/// Encoded register values are clipped to this magnitude.
pub const REGISTER_CLIP: f64 = 3.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemanticType {
    #[default]
    Numerical,
    Categorical,
}

impl fmt::Display for SemanticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SemanticType::Numerical => "numerical",
            SemanticType::Categorical => "categorical",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classifier,
    Regressor,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classifier => "classifier",
            Task::Regressor => "regressor",
        })
    }
}

/// What a node does, independent of its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "kebab-case")]
pub enum NodeOp {
    InputRegister {
        feature: String,
        #[serde(default)]
        stype: SemanticType,
    },
    Interaction {
        kind: InteractionKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cell: Option<CellId>,
    },
    OutputRegister {
        feature: String,
    },
}

/// Trainable (and frozen) values of a node.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub enum Params {
    /// Placeholder before initialization, and the only valid value for
    /// parameter-free interactions.
    #[default]
    Empty,
    /// Numerical register: raw values in `[min, max]` map to `[-1, 1]`
    /// (frozen), then `w·s + b` (trainable).
    Scaling { min: f64, max: f64, w: f64, b: f64 },
    /// Categorical register: `weights[category] + bias`.
    Categorical { weights: BTreeMap<String, f64>, bias: f64 },
    /// `w·a + b`, used by `linear` and the output register.
    Affine { w: f64, b: f64 },
}

#[derive(Serialize, Deserialize, Default)]
struct RawParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<f64>,
}

impl TryFrom<RawParams> for Params {
    type Error = String;

    fn try_from(raw: RawParams) -> std::result::Result<Self, String> {
        match raw {
            RawParams { min: None, max: None, weights: None, w: None, b: None, bias: None } => Ok(Params::Empty),
            RawParams { min: Some(min), max: Some(max), weights: None, w: Some(w), b: Some(b), bias: None } => {
                Ok(Params::Scaling { min, max, w, b })
            }
            RawParams { min: None, max: None, weights: Some(weights), w: None, b: None, bias: Some(bias) } => {
                Ok(Params::Categorical { weights, bias })
            }
            RawParams { min: None, max: None, weights: None, w: Some(w), b: Some(b), bias: None } => {
                Ok(Params::Affine { w, b })
            }
            _ => Err("unrecognized parameter layout".to_string()),
        }
    }
}

impl From<Params> for RawParams {
    fn from(p: Params) -> Self {
        match p {
            Params::Empty => RawParams::default(),
            Params::Scaling { min, max, w, b } => RawParams {
                min: Some(min),
                max: Some(max),
                w: Some(w),
                b: Some(b),
                ..Default::default()
            },
            Params::Categorical { weights, bias } => RawParams {
                weights: Some(weights),
                bias: Some(bias),
                ..Default::default()
            },
            Params::Affine { w, b } => RawParams {
                w: Some(w),
                b: Some(b),
                ..Default::default()
            },
        }
    }
}

impl Params {
    /// Number of trainable reals. Frozen scaling bounds are not counted.
    pub fn trainable_count(&self) -> usize {
        match self {
            Params::Empty => 0,
            Params::Scaling { .. } | Params::Affine { .. } => 2,
            Params::Categorical { weights, .. } => weights.len() + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    #[serde(flatten)]
    pub op: NodeOp,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub incoming: Vec<NodeId>,
}

impl Node {
    pub fn feature(&self) -> Option<&str> {
        match &self.op {
            NodeOp::InputRegister { feature, .. } | NodeOp::OutputRegister { feature } => Some(feature),
            NodeOp::Interaction { .. } => None,
        }
    }

    pub fn kind(&self) -> Option<InteractionKind> {
        match self.op {
            NodeOp::Interaction { kind, .. } => Some(kind),
            _ => None,
        }
    }

    pub fn is_input(&self) -> bool {
        matches!(self.op, NodeOp::InputRegister { .. })
    }

    fn needs_params(&self) -> bool {
        match self.op {
            NodeOp::InputRegister { .. } | NodeOp::OutputRegister { .. } => true,
            NodeOp::Interaction { kind, .. } => kind.param_count() > 0,
        }
    }
}

/// Names one trainable real inside a graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId {
    pub node: NodeId,
    pub slot: ParamSlot,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamSlot {
    Weight,
    Bias,
    Category(String),
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.slot {
            ParamSlot::Weight => write!(f, "n{}.w", self.node),
            ParamSlot::Bias => write!(f, "n{}.b", self.node),
            ParamSlot::Category(c) => write!(f, "n{}.cat[{c}]", self.node),
        }
    }
}

/// A single problem found by [`Graph::validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub node: Option<NodeId>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(id) => write!(f, "node {id}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Parameter-free view of a graph: the only thing the lattice ever sees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    pub nodes: Vec<StructureNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureNode {
    pub id: NodeId,
    #[serde(flatten)]
    pub op: NodeOp,
    #[serde(default)]
    pub incoming: Vec<NodeId>,
}

/// Digest of topology, interaction kinds and feature names, excluding
/// parameters and lattice placement.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StructureHash(pub String);

impl fmt::Display for StructureHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub task: Task,
    pub nodes: Vec<Node>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unusable: bool,
}

impl Graph {
    pub fn new(task: Task, nodes: Vec<Node>) -> Self {
        Graph {
            task,
            nodes,
            train_loss: None,
            unusable: false,
        }
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn output(&self) -> Option<&Node> {
        self.nodes
            .iter()
            .find(|n| matches!(n.op, NodeOp::OutputRegister { .. }))
    }

    /// Name of the target column.
    pub fn target(&self) -> Option<&str> {
        self.output().and_then(Node::feature)
    }

    /// Distinct input feature names with their semantic types, sorted by name.
    pub fn inputs(&self) -> BTreeMap<String, SemanticType> {
        self.nodes
            .iter()
            .filter_map(|n| match &n.op {
                NodeOp::InputRegister { feature, stype } => Some((feature.clone(), *stype)),
                _ => None,
            })
            .collect()
    }

    pub fn interactions(&self) -> impl Iterator<Item = &Node> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.op, NodeOp::Interaction { .. }))
    }

    /// True once every register and `linear` node carries parameters.
    pub fn is_initialized(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| !n.needs_params() || n.params != Params::Empty)
    }

    /// Whether the graph has been through at least one fit.
    pub fn is_fitted(&self) -> bool {
        self.train_loss.is_some()
    }

    /// Number of trainable reals, the `k` of AIC/BIC.
    pub fn param_count(&self) -> usize {
        self.nodes.iter().map(|n| n.params.trainable_count()).sum()
    }

    /// Checks every structural invariant and reports each violation.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |node: Option<NodeId>, message: String| out.push(Violation { node, message });

        let mut index: HashMap<NodeId, &Node> = HashMap::new();
        for n in &self.nodes {
            if index.insert(n.id, n).is_some() {
                push(Some(n.id), "duplicate node id".into());
            }
        }

        let outputs: Vec<&Node> = self
            .nodes
            .iter()
            .filter(|n| matches!(n.op, NodeOp::OutputRegister { .. }))
            .collect();
        if outputs.len() != 1 {
            push(None, format!("expected exactly one output register, found {}", outputs.len()));
        }

        for n in &self.nodes {
            for src in &n.incoming {
                match index.get(src) {
                    None => push(Some(n.id), format!("unknown source node {src}")),
                    Some(s) if matches!(s.op, NodeOp::OutputRegister { .. }) => {
                        push(Some(n.id), "output register used as a source".into())
                    }
                    _ => {}
                }
            }
            match &n.op {
                NodeOp::InputRegister { stype, .. } => {
                    if !n.incoming.is_empty() {
                        push(Some(n.id), "input register has incoming edges".into());
                    }
                    let ok = matches!(
                        (&n.params, stype),
                        (Params::Empty, _)
                            | (Params::Scaling { .. }, SemanticType::Numerical)
                            | (Params::Categorical { .. }, SemanticType::Categorical)
                    );
                    if !ok {
                        push(Some(n.id), "register parameters do not match its semantic type".into());
                    }
                }
                NodeOp::Interaction { kind, .. } => {
                    if n.incoming.len() != kind.arity() {
                        push(
                            Some(n.id),
                            format!(
                                "arity mismatch: {kind} takes {} inputs, has {}",
                                kind.arity(),
                                n.incoming.len()
                            ),
                        );
                    }
                    let ok = matches!(
                        (&n.params, kind),
                        (Params::Empty, _) | (Params::Affine { .. }, InteractionKind::Linear)
                    );
                    if !ok {
                        push(Some(n.id), format!("invalid parameters for {kind}"));
                    }
                }
                NodeOp::OutputRegister { .. } => {
                    if n.incoming.len() != 1 {
                        push(
                            Some(n.id),
                            format!("output register must have exactly one source, has {}", n.incoming.len()),
                        );
                    }
                    if !matches!(n.params, Params::Empty | Params::Affine { .. }) {
                        push(Some(n.id), "invalid output register parameters".into());
                    }
                }
            }
        }

        if self.topo_order().is_err() {
            push(None, "cycle detected".into());
        } else if let Some(output) = outputs.first() {
            // Everything must feed the output.
            let mut reachable = BTreeSet::new();
            let mut stack = vec![output.id];
            while let Some(id) = stack.pop() {
                if reachable.insert(id) {
                    if let Some(n) = index.get(&id) {
                        stack.extend(n.incoming.iter().copied());
                    }
                }
            }
            for n in &self.nodes {
                if !reachable.contains(&n.id) {
                    push(Some(n.id), "node is not on a path to the output register".into());
                }
            }
        }
        out
    }

    /// Node ids ordered so every node follows its sources. Ties are broken
    /// by ascending node id.
    pub fn topo_order(&self) -> Result<Vec<NodeId>> {
        let ids: BTreeSet<NodeId> = self.nodes.iter().map(|n| n.id).collect();
        let mut indegree: BTreeMap<NodeId, usize> = BTreeMap::new();
        let mut consumers: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for n in &self.nodes {
            let known = n.incoming.iter().filter(|s| ids.contains(s)).count();
            *indegree.entry(n.id).or_default() += known;
            for s in n.incoming.iter().filter(|s| ids.contains(s)) {
                consumers.entry(*s).or_default().push(n.id);
            }
        }
        let mut ready: BinaryHeap<Reverse<NodeId>> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| Reverse(*id))
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse(id)) = ready.pop() {
            order.push(id);
            for c in consumers.get(&id).into_iter().flatten() {
                let d = indegree.get_mut(c).expect("consumer is a node");
                *d -= 1;
                if *d == 0 {
                    ready.push(Reverse(*c));
                }
            }
        }
        if order.len() != indegree.len() {
            return Err(Error::NotADag);
        }
        Ok(order)
    }

    /// Maximum number of interaction nodes on any input-to-output path.
    pub fn depth(&self) -> usize {
        let Ok(order) = self.topo_order() else {
            return 0;
        };
        let mut depth: HashMap<NodeId, usize> = HashMap::new();
        let mut best = 0;
        for id in order {
            let n = self.node(id).expect("ordered id exists");
            let below = n
                .incoming
                .iter()
                .filter_map(|s| depth.get(s))
                .copied()
                .max()
                .unwrap_or(0);
            let own = usize::from(matches!(n.op, NodeOp::Interaction { .. }));
            depth.insert(id, below + own);
            best = best.max(below + own);
        }
        best
    }

    /// Canonical text form of the topology. Arguments of commutative
    /// interactions are sorted, so `add(a, b)` and `add(b, a)` coincide.
    pub fn canonical_form(&self) -> String {
        fn walk(g: &Graph, id: NodeId, memo: &mut HashMap<NodeId, String>, guard: usize) -> String {
            if let Some(s) = memo.get(&id) {
                return s.clone();
            }
            let Some(n) = g.node(id) else {
                return "?".into();
            };
            if guard > g.nodes.len() {
                return "cycle".into();
            }
            let mut args: Vec<String> = n.incoming.iter().map(|s| walk(g, *s, memo, guard + 1)).collect();
            let s = match &n.op {
                NodeOp::InputRegister { feature, stype } => format!("in({feature:?}:{stype})"),
                NodeOp::Interaction { kind, .. } => {
                    if kind.is_commutative() {
                        args.sort();
                    }
                    format!("{kind}({})", args.join(","))
                }
                NodeOp::OutputRegister { feature } => format!("out({feature:?}:{})({})", g.task, args.join(",")),
            };
            memo.insert(id, s.clone());
            s
        }
        match self.output() {
            Some(out) => walk(self, out.id, &mut HashMap::new(), 0),
            None => String::new(),
        }
    }

    pub fn structure_hash(&self) -> StructureHash {
        let digest = Sha256::digest(self.canonical_form().as_bytes());
        StructureHash(hex::encode(&digest[..16]))
    }

    pub fn structure(&self) -> Structure {
        Structure {
            nodes: self
                .nodes
                .iter()
                .map(|n| StructureNode {
                    id: n.id,
                    op: n.op.clone(),
                    incoming: n.incoming.clone(),
                })
                .collect(),
        }
    }

    /// Trainable parameters in canonical order (topological, then slot).
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut out = Vec::new();
        let order = self.topo_order().unwrap_or_else(|_| self.nodes.iter().map(|n| n.id).collect());
        for id in order {
            let n = self.node(id).expect("ordered id exists");
            match &n.params {
                Params::Empty => {}
                Params::Scaling { .. } | Params::Affine { .. } => {
                    out.push(ParamId { node: id, slot: ParamSlot::Weight });
                    out.push(ParamId { node: id, slot: ParamSlot::Bias });
                }
                Params::Categorical { weights, .. } => {
                    for c in weights.keys() {
                        out.push(ParamId { node: id, slot: ParamSlot::Category(c.clone()) });
                    }
                    out.push(ParamId { node: id, slot: ParamSlot::Bias });
                }
            }
        }
        out
    }

    pub fn param(&self, id: &ParamId) -> Option<f64> {
        let n = self.node(id.node)?;
        match (&n.params, &id.slot) {
            (Params::Scaling { w, .. } | Params::Affine { w, .. }, ParamSlot::Weight) => Some(*w),
            (Params::Scaling { b, .. } | Params::Affine { b, .. }, ParamSlot::Bias) => Some(*b),
            (Params::Categorical { bias, .. }, ParamSlot::Bias) => Some(*bias),
            (Params::Categorical { weights, .. }, ParamSlot::Category(c)) => weights.get(c).copied(),
            _ => None,
        }
    }

    pub fn set_param(&mut self, id: &ParamId, value: f64) -> Result<()> {
        let n = self
            .nodes
            .iter_mut()
            .find(|n| n.id == id.node)
            .ok_or_else(|| Error::InvalidInput(format!("no node {}", id.node)))?;
        let slot = match (&mut n.params, &id.slot) {
            (Params::Scaling { w, .. } | Params::Affine { w, .. }, ParamSlot::Weight) => Some(w),
            (Params::Scaling { b, .. } | Params::Affine { b, .. }, ParamSlot::Bias) => Some(b),
            (Params::Categorical { bias, .. }, ParamSlot::Bias) => Some(bias),
            (Params::Categorical { weights, .. }, ParamSlot::Category(c)) => weights.get_mut(c),
            _ => None,
        };
        *slot.ok_or_else(|| Error::InvalidInput(format!("no parameter {id}")))? = value;
        Ok(())
    }

    /// Forward pass on one sample. Classifiers return a probability in
    /// `(0, 1)`, regressors the output register's affine value.
    pub fn eval(&self, sample: &Sample) -> Result<f64> {
        let program = Program::compile(self)?;
        let row = program.bind_sample(sample)?;
        let z = program.forward_row(&row, &mut Vec::new())?;
        Ok(program.finish(z))
    }

    /// Output register pre-activation (before the logistic, for classifiers).
    pub fn eval_linear(&self, sample: &Sample) -> Result<f64> {
        let program = Program::compile(self)?;
        let row = program.bind_sample(sample)?;
        program.forward_row(&row, &mut Vec::new())
    }
}

/// The logistic function, with the result kept strictly inside `(0, 1)`.
pub fn logistic(z: f64) -> f64 {
    const EDGE: f64 = 1e-15;
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(EDGE, 1.0 - EDGE)
}

/// Encoding applied by an input register, returned with a flag that is set
/// when a categorical value was not seen during training.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Encoded {
    pub value: f64,
    pub unseen_category: bool,
}

/// Maps a raw value through a register's scaling or category table.
///
/// Numerical: `clip((raw - min) / (max - min) · 2 - 1) · w + b, ±3)`;
/// a constant training column (`min == max`) encodes to `b`.
/// Categorical: `weights[raw] + bias`, or `bias` alone for unseen categories.
pub fn encode_input(node: &Node, raw: &Value) -> Result<Encoded> {
    let feature = node.feature().unwrap_or_default();
    match (&node.op, &node.params) {
        (NodeOp::InputRegister { .. }, Params::Scaling { min, max, w, b }) => {
            let x = match raw {
                Value::Num(x) => *x,
                Value::Missing => return Err(Error::MissingFeature(feature.to_string())),
                Value::Cat(s) => {
                    return Err(Error::Type(format!(
                        "numerical register `{feature}` given non-numeric value `{s}`"
                    )))
                }
            };
            let value = (scale(x, *min, *max) * w + b).clamp(-REGISTER_CLIP, REGISTER_CLIP);
            Ok(Encoded { value, unseen_category: false })
        }
        (NodeOp::InputRegister { .. }, Params::Categorical { weights, bias }) => {
            let key = match raw {
                Value::Cat(s) => s.clone(),
                Value::Num(x) => x.to_string(),
                Value::Missing => return Err(Error::MissingFeature(feature.to_string())),
            };
            Ok(match weights.get(&key) {
                Some(wc) => Encoded { value: wc + bias, unseen_category: false },
                None => Encoded { value: *bias, unseen_category: true },
            })
        }
        (NodeOp::InputRegister { .. }, Params::Empty) => Err(Error::Uninitialized),
        _ => Err(Error::InvalidInput(format!("node {} is not an input register", node.id))),
    }
}

/// Frozen min/max scaling onto `[-1, 1]`.
pub(crate) fn scale(x: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (x - min) / (max - min) * 2.0 - 1.0
    } else {
        0.0
    }
}
