//! The lattice: a `width × depth` grid of cells, each holding reinforcable
//! categorical counts over interaction kinds and connection sources, from
//! which candidate graphs are sampled.
//!
//! Sampling probability at a cell is `(count + α) / Σ (count_j + α)`, so a
//! fresh lattice samples uniformly. [`LatticeState::update`] adds one count
//! per interaction node (its kind) and per incoming edge (its source).
//!
//! The lattice only ever sees feature names and graph [`Structure`]s, never
//! data values or fitted parameters.
//!
//! # Concurrency
//!
//! `register_features`, `update`, `reset` and [`LatticeState::sample_graph`]
//! take `&mut self`. Concurrent readers call [`LatticeState::sampler`], which
//! borrows the lattice immutably and owns an independent random stream
//! derived from the lattice's generator state; the borrow checker rules out
//! writes while any sampler is alive.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{Graph, InteractionKind, Node, NodeId, NodeOp, Params, SemanticType, Structure, Task};

/// Rejection-sampling attempts per requested graph before giving up.
pub const MAX_ATTEMPTS: usize = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatticeConfig {
    /// Cells per layer.
    pub width: usize,
    /// Number of interaction layers.
    pub depth: usize,
    pub islands: usize,
    /// Laplace smoothing added to every count.
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            width: 8,
            depth: 4,
            islands: 2,
            smoothing: 1.0,
            seed: 0,
        }
    }
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 1 || self.depth < 1 || self.islands < 1 {
            return Err(Error::Config("width, depth and islands must be at least 1".into()));
        }
        if self.islands > self.width {
            return Err(Error::Config(format!(
                "{} islands cannot share {} columns",
                self.islands, self.width
            )));
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(Error::Config("smoothing must be positive".into()));
        }
        Ok(())
    }
}

/// Position of a cell: `layer` 0 is closest to the inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub layer: usize,
    pub column: usize,
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}C{}", self.layer, self.column)
    }
}

/// Where an interaction's argument comes from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Feature(String),
    Cell(CellId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub inputs: Vec<(String, SemanticType)>,
    pub output: String,
    pub task: Task,
    pub max_depth: usize,
    #[serde(default = "all_kinds")]
    pub allowed_kinds: BTreeSet<InteractionKind>,
}

fn all_kinds() -> BTreeSet<InteractionKind> {
    InteractionKind::ALL.into_iter().collect()
}

impl GraphSpec {
    /// A spec over numerical inputs with every interaction kind allowed.
    pub fn new(inputs: &[&str], output: &str, task: Task, max_depth: usize) -> Self {
        GraphSpec {
            inputs: inputs.iter().map(|n| (n.to_string(), SemanticType::Numerical)).collect(),
            output: output.to_string(),
            task,
            max_depth,
            allowed_kinds: all_kinds(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::Precondition("spec has no inputs".into()));
        }
        if self.inputs.iter().any(|(n, _)| *n == self.output) {
            return Err(Error::Precondition(format!("output `{}` is also an input", self.output)));
        }
        let mut seen = BTreeSet::new();
        for (n, _) in &self.inputs {
            if !seen.insert(n) {
                return Err(Error::Precondition(format!("input `{n}` listed twice")));
            }
        }
        if self.max_depth < 1 {
            return Err(Error::Precondition("max_depth must be at least 1".into()));
        }
        if self.allowed_kinds.is_empty() {
            return Err(Error::Precondition("no interaction kinds allowed".into()));
        }
        Ok(())
    }

    pub fn has_input(&self, name: &str) -> bool {
        self.inputs.iter().any(|(n, _)| n == name)
    }
}

/// Constraint on the graphs a question admits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    Contains(String),
    Excludes(String),
    MaxDepth(usize),
    Functions(BTreeSet<InteractionKind>),
}

impl Filter {
    /// Whether `graph` satisfies this filter.
    pub fn accepts(&self, graph: &Graph) -> bool {
        match self {
            Filter::Contains(f) => graph.inputs().contains_key(f),
            Filter::Excludes(f) => !graph.inputs().contains_key(f),
            Filter::MaxDepth(d) => graph.depth() <= *d,
            Filter::Functions(kinds) => graph.interactions().all(|n| n.kind().is_some_and(|k| kinds.contains(&k))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Cell {
    kind_counts: [f64; 10],
    source_counts: BTreeMap<Source, f64>,
}

impl Cell {
    fn fresh() -> Self {
        Cell {
            kind_counts: [0.0; 10],
            source_counts: BTreeMap::new(),
        }
    }
}

/// Probabilities at one cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Distribution {
    pub kinds: BTreeMap<InteractionKind, f64>,
    pub sources: Vec<(Source, f64)>,
}

#[derive(Clone, Debug)]
pub struct LatticeState {
    config: LatticeConfig,
    cells: Vec<Cell>,
    features: BTreeMap<String, SemanticType>,
    outputs: BTreeSet<String>,
    rng: ChaCha8Rng,
}

impl PartialEq for LatticeState {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.cells == other.cells
            && self.features == other.features
            && self.outputs == other.outputs
            && rng_to_string(&self.rng) == rng_to_string(&other.rng)
    }
}

impl LatticeState {
    pub fn new(config: LatticeConfig) -> Result<Self> {
        config.validate()?;
        Ok(LatticeState {
            cells: vec![Cell::fresh(); config.width * config.depth],
            features: BTreeMap::new(),
            outputs: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
        })
    }

    pub fn config(&self) -> &LatticeConfig {
        &self.config
    }

    pub fn features(&self) -> &BTreeMap<String, SemanticType> {
        &self.features
    }

    pub fn island_of_column(&self, column: usize) -> usize {
        column * self.config.islands / self.config.width
    }

    pub fn island_of(&self, cell: CellId) -> usize {
        self.island_of_column(cell.column)
    }

    fn island_columns(&self, island: usize) -> Vec<usize> {
        (0..self.config.width)
            .filter(|&c| self.island_of_column(c) == island)
            .collect()
    }

    fn cell_index(&self, cell: CellId) -> Result<usize> {
        if cell.layer < self.config.depth && cell.column < self.config.width {
            Ok(cell.layer * self.config.width + cell.column)
        } else {
            Err(Error::UnknownCell(cell.to_string()))
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.config.depth)
            .flat_map(move |layer| (0..self.config.width).map(move |column| CellId { layer, column }))
    }

    /// Makes feature names available as sources. Only names and semantic
    /// types cross this boundary.
    pub fn register_features(&mut self, inputs: &[(String, SemanticType)], output: &str) -> Result<()> {
        if output.is_empty() || inputs.iter().any(|(n, _)| n.is_empty()) {
            return Err(Error::InvalidInput("feature names must be non-empty".into()));
        }
        let mut batch: BTreeMap<&str, SemanticType> = BTreeMap::new();
        for (name, stype) in inputs {
            if let Some(prev) = batch.insert(name, *stype) {
                if prev != *stype {
                    return Err(Error::FeatureConflict(name.clone()));
                }
            }
            if self.features.get(name).is_some_and(|s| s != stype) {
                return Err(Error::FeatureConflict(name.clone()));
            }
        }
        for (name, stype) in batch {
            self.features.insert(name.to_string(), stype);
        }
        self.outputs.insert(output.to_string());
        Ok(())
    }

    /// Admissible sources of `cell` (registered features, then same-island
    /// cells in shallower layers) with their smoothed weights.
    fn source_weights(&self, cell: CellId) -> Vec<(Source, f64)> {
        let c = &self.cells[cell.layer * self.config.width + cell.column];
        let alpha = self.config.smoothing;
        let island = self.island_of(cell);
        let weight = |s: &Source| c.source_counts.get(s).copied().unwrap_or(0.0) + alpha;
        let mut out: Vec<(Source, f64)> = self
            .features
            .keys()
            .map(|f| {
                let s = Source::Feature(f.clone());
                let w = weight(&s);
                (s, w)
            })
            .collect();
        for layer in 0..cell.layer {
            for column in self.island_columns(island) {
                let s = Source::Cell(CellId { layer, column });
                let w = weight(&s);
                out.push((s, w));
            }
        }
        out
    }

    pub fn sampling_distribution(&self, cell: CellId) -> Result<Distribution> {
        let idx = self.cell_index(cell)?;
        let alpha = self.config.smoothing;
        let counts = &self.cells[idx].kind_counts;
        let total: f64 = counts.iter().map(|c| c + alpha).sum();
        let kinds = InteractionKind::ALL
            .into_iter()
            .map(|k| (k, (counts[k.index()] + alpha) / total))
            .collect();
        let weights = self.source_weights(cell);
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        let sources = weights.into_iter().map(|(s, w)| (s, w / total)).collect();
        Ok(Distribution { kinds, sources })
    }

    /// Draws one graph with the lattice's own generator.
    pub fn sample_graph(&mut self, spec: &GraphSpec, filters: &[Filter]) -> Result<Graph> {
        let mut rng = self.rng.clone();
        let out = draw(self, &mut rng, spec, filters);
        self.rng = rng;
        out
    }

    /// A read-only sampler with an independent stream keyed by `stream`.
    pub fn sampler(&self, stream: u64) -> Sampler<'_> {
        let mut h = Sha256::new();
        h.update(self.rng.get_seed());
        h.update(self.rng.get_word_pos().to_le_bytes());
        h.update(stream.to_le_bytes());
        let seed: [u8; 32] = h.finalize().into();
        Sampler {
            lattice: self,
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    /// Draws a 64-bit value from the lattice generator, e.g. to seed a pool.
    pub fn next_seed(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Reinforces the cells, kinds and sources used by `structures`.
    ///
    /// Either every structure is applied or, on error, none is.
    pub fn update<'a>(&mut self, structures: impl IntoIterator<Item = &'a Structure>) -> Result<()> {
        let mut increments: Vec<(usize, Option<InteractionKind>, Option<Source>)> = Vec::new();
        for s in structures {
            let by_id: HashMap<NodeId, &NodeOp> = s.nodes.iter().map(|n| (n.id, &n.op)).collect();
            for n in &s.nodes {
                match &n.op {
                    NodeOp::InputRegister { feature, .. } => {
                        if !self.features.contains_key(feature) {
                            return Err(Error::UnregisteredFeature(feature.clone()));
                        }
                    }
                    NodeOp::Interaction { kind, cell } => {
                        let cell = cell.ok_or_else(|| {
                            Error::InvalidInput(format!("interaction node {} has no lattice cell", n.id))
                        })?;
                        let idx = self.cell_index(cell)?;
                        increments.push((idx, Some(*kind), None));
                        for src in &n.incoming {
                            let source = match by_id.get(src) {
                                Some(NodeOp::InputRegister { feature, .. }) => Source::Feature(feature.clone()),
                                Some(NodeOp::Interaction { cell: Some(sc), .. })
                                    if sc.layer < cell.layer && self.island_of(*sc) == self.island_of(cell) =>
                                {
                                    Source::Cell(*sc)
                                }
                                _ => {
                                    return Err(Error::InvalidInput(format!(
                                        "node {} has a source that is not admissible at cell {cell}",
                                        n.id
                                    )))
                                }
                            };
                            increments.push((idx, None, Some(source)));
                        }
                    }
                    NodeOp::OutputRegister { .. } => {}
                }
            }
        }
        for (idx, kind, source) in increments {
            let cell = &mut self.cells[idx];
            if let Some(k) = kind {
                cell.kind_counts[k.index()] += 1.0;
            }
            if let Some(s) = source {
                *cell.source_counts.entry(s).or_insert(0.0) += 1.0;
            }
        }
        Ok(())
    }

    /// Returns to a fresh lattice with a seed derived from the current
    /// generator. Registered features are cleared.
    pub fn reset(&mut self) {
        let config = LatticeConfig {
            seed: self.rng.next_u64(),
            ..self.config
        };
        *self = LatticeState::new(config).expect("config was already valid");
    }

    /// Raw kind count at a cell.
    pub fn kind_count(&self, cell: CellId, kind: InteractionKind) -> Result<f64> {
        Ok(self.cells[self.cell_index(cell)?].kind_counts[kind.index()])
    }

    pub fn snapshot(&self) -> LatticeSnapshot {
        let counts = self
            .cells()
            .zip(&self.cells)
            .filter(|(_, c)| c.kind_counts.iter().any(|x| *x != 0.0) || !c.source_counts.is_empty())
            .map(|(id, c)| CellCounts {
                cell: id,
                kinds: InteractionKind::ALL
                    .into_iter()
                    .filter(|k| c.kind_counts[k.index()] != 0.0)
                    .map(|k| (k, c.kind_counts[k.index()]))
                    .collect(),
                sources: c
                    .source_counts
                    .iter()
                    .map(|(s, n)| SourceCount { source: s.clone(), count: *n })
                    .collect(),
            })
            .collect();
        LatticeSnapshot {
            version: SNAPSHOT_VERSION,
            config: self.config,
            counts,
            islands: (0..self.config.width).map(|c| self.island_of_column(c)).collect(),
            features: self
                .features
                .iter()
                .map(|(name, stype)| FeatureEntry { name: name.clone(), stype: *stype })
                .collect(),
            outputs: self.outputs.iter().cloned().collect(),
            rng: rng_to_string(&self.rng),
        }
    }

    pub fn from_snapshot(snap: &LatticeSnapshot) -> Result<Self> {
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Config(format!("unsupported lattice snapshot version {}", snap.version)));
        }
        let mut lattice = LatticeState::new(snap.config)?;
        let expected: Vec<usize> = (0..snap.config.width).map(|c| lattice.island_of_column(c)).collect();
        if expected != snap.islands {
            return Err(Error::Config("island layout does not match configuration".into()));
        }
        for cc in &snap.counts {
            let idx = lattice.cell_index(cc.cell)?;
            let cell = &mut lattice.cells[idx];
            for (k, n) in &cc.kinds {
                cell.kind_counts[k.index()] = *n;
            }
            for sc in &cc.sources {
                cell.source_counts.insert(sc.source.clone(), sc.count);
            }
        }
        lattice.features = snap.features.iter().map(|f| (f.name.clone(), f.stype)).collect();
        lattice.outputs = snap.outputs.iter().cloned().collect();
        lattice.rng = rng_from_string(&snap.rng)?;
        Ok(lattice)
    }
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// Serializable lattice state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSnapshot {
    pub version: u32,
    pub config: LatticeConfig,
    pub counts: Vec<CellCounts>,
    pub islands: Vec<usize>,
    pub features: Vec<FeatureEntry>,
    #[serde(default)]
    pub outputs: Vec<String>,
    pub rng: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCounts {
    pub cell: CellId,
    pub kinds: BTreeMap<InteractionKind, f64>,
    pub sources: Vec<SourceCount>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceCount {
    pub source: Source,
    pub count: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub name: String,
    pub stype: SemanticType,
}

fn rng_to_string(rng: &ChaCha8Rng) -> String {
    format!("{}:{}:{}", hex::encode(rng.get_seed()), rng.get_stream(), rng.get_word_pos())
}

fn rng_from_string(s: &str) -> Result<ChaCha8Rng> {
    let bad = || Error::Config(format!("malformed generator state `{s}`"));
    let mut parts = s.split(':');
    let seed = hex::decode(parts.next().ok_or_else(bad)?).map_err(|_| bad())?;
    let seed: [u8; 32] = seed.try_into().map_err(|_| bad())?;
    let stream: u64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let pos: u128 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    if parts.next().is_some() {
        return Err(bad());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(pos);
    Ok(rng)
}

/// Immutable view of a lattice with its own random stream.
pub struct Sampler<'a> {
    lattice: &'a LatticeState,
    rng: ChaCha8Rng,
}

impl Sampler<'_> {
    pub fn sample(&mut self, spec: &GraphSpec, filters: &[Filter]) -> Result<Graph> {
        draw(self.lattice, &mut self.rng, spec, filters)
    }
}

/// Picks an index with probability proportional to `weights`.
fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

struct Constraints<'s> {
    depth: usize,
    kinds: Vec<InteractionKind>,
    features: BTreeMap<&'s str, SemanticType>,
    contains: Vec<&'s str>,
}

fn constraints<'s>(lattice: &LatticeState, spec: &'s GraphSpec, filters: &'s [Filter]) -> Result<Constraints<'s>> {
    spec.validate()?;
    if lattice.features.is_empty() {
        return Err(Error::NoFeatures);
    }
    let mut depth = spec.max_depth.min(lattice.config.depth);
    let mut kinds: BTreeSet<InteractionKind> = spec.allowed_kinds.clone();
    let mut features: BTreeMap<&str, SemanticType> = BTreeMap::new();
    for (name, stype) in &spec.inputs {
        match lattice.features.get(name) {
            Some(s) if s == stype => {
                features.insert(name, *stype);
            }
            Some(_) => return Err(Error::FeatureConflict(name.clone())),
            None => return Err(Error::UnregisteredFeature(name.clone())),
        }
    }
    let mut contains = Vec::new();
    for f in filters {
        match f {
            Filter::Contains(name) => {
                if !spec.has_input(name) {
                    return Err(Error::Precondition(format!("Contains(`{name}`) names a feature outside the spec")));
                }
                contains.push(name.as_str());
            }
            Filter::Excludes(name) => {
                if features.remove(name.as_str()).is_none() {
                    log::warn!("Excludes(`{name}`) names a feature outside the spec; ignored");
                }
            }
            Filter::MaxDepth(d) => {
                if *d < 1 {
                    return Err(Error::Precondition("MaxDepth must be at least 1".into()));
                }
                depth = depth.min(*d);
            }
            Filter::Functions(set) => kinds = kinds.intersection(set).copied().collect(),
        }
    }
    if kinds.is_empty() {
        return Err(Error::Precondition("filters leave no interaction kinds".into()));
    }
    if features.is_empty() {
        return Err(Error::Precondition("filters leave no input features".into()));
    }
    for name in &contains {
        if !features.contains_key(name) {
            return Err(Error::Precondition(format!("`{name}` is both required and excluded")));
        }
    }
    Ok(Constraints {
        depth,
        kinds: kinds.into_iter().collect(),
        features,
        contains,
    })
}

/// Top-down sampling: pick an island, a cell in the deepest permitted
/// layer, then recursively draw each cell's kind and argument sources.
fn draw(lattice: &LatticeState, rng: &mut ChaCha8Rng, spec: &GraphSpec, filters: &[Filter]) -> Result<Graph> {
    let c = constraints(lattice, spec, filters)?;
    for _ in 0..MAX_ATTEMPTS {
        let island = rng.random_range(0..lattice.config.islands);
        let columns = lattice.island_columns(island);
        let top = CellId {
            layer: c.depth - 1,
            column: columns[rng.random_range(0..columns.len())],
        };
        let mut builder = Builder {
            lattice,
            constraints: &c,
            nodes: Vec::new(),
            by_cell: HashMap::new(),
            by_feature: HashMap::new(),
        };
        let root = builder.build(rng, top);
        let out_id = builder.nodes.len() as NodeId;
        builder.nodes.push(Node {
            id: out_id,
            op: NodeOp::OutputRegister { feature: spec.output.clone() },
            params: Params::Empty,
            incoming: vec![root],
        });
        let graph = Graph::new(spec.task, builder.nodes);
        let inputs = graph.inputs();
        if c.contains.iter().all(|f| inputs.contains_key(*f)) {
            return Ok(graph);
        }
    }
    Err(Error::FilterStarvation {
        attempts: MAX_ATTEMPTS,
        acceptance_rate: 0.0,
    })
}

struct Builder<'a> {
    lattice: &'a LatticeState,
    constraints: &'a Constraints<'a>,
    nodes: Vec<Node>,
    by_cell: HashMap<CellId, NodeId>,
    by_feature: HashMap<String, NodeId>,
}

impl Builder<'_> {
    fn build(&mut self, rng: &mut ChaCha8Rng, cell: CellId) -> NodeId {
        if let Some(id) = self.by_cell.get(&cell) {
            return *id;
        }
        let state = &self.lattice.cells[cell.layer * self.lattice.config.width + cell.column];
        let alpha = self.lattice.config.smoothing;
        let kind_weights: Vec<f64> = self
            .constraints
            .kinds
            .iter()
            .map(|k| state.kind_counts[k.index()] + alpha)
            .collect();
        let kind = self.constraints.kinds[pick(rng, &kind_weights)];

        let admissible: Vec<(Source, f64)> = self
            .lattice
            .source_weights(cell)
            .into_iter()
            .filter(|(s, _)| match s {
                Source::Feature(f) => self.constraints.features.contains_key(f.as_str()),
                Source::Cell(_) => true,
            })
            .collect();
        let weights: Vec<f64> = admissible.iter().map(|(_, w)| *w).collect();
        let mut incoming = Vec::with_capacity(kind.arity());
        for _ in 0..kind.arity() {
            let src = admissible[pick(rng, &weights)].0.clone();
            let id = match src {
                Source::Feature(f) => self.register(&f),
                Source::Cell(sub) => self.build(rng, sub),
            };
            incoming.push(id);
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node {
            id,
            op: NodeOp::Interaction { kind, cell: Some(cell) },
            params: Params::Empty,
            incoming,
        });
        self.by_cell.insert(cell, id);
        id
    }

    fn register(&mut self, feature: &str) -> NodeId {
        if let Some(id) = self.by_feature.get(feature) {
            return *id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node {
            id,
            op: NodeOp::InputRegister {
                feature: feature.to_string(),
                stype: self.constraints.features[feature],
            },
            params: Params::Empty,
            incoming: Vec::new(),
        });
        self.by_feature.insert(feature.to_string(), id);
        id
    }
}
