//! A session: one lattice, the datasets loaded next to it, the pools asked
//! of it and an append-only log of everything that changed them.
//!
//! Data never reaches the lattice. Questions register feature names and
//! semantic types; updates pass graph structures. Everything else stays in
//! [`LoadedData`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use pathlattice::analysis::{
    classifier_scores, fixed_defaults, partial2d, probability_scores, roc_auc, segmented_loss, PlotData,
    PlotPayload, DEFAULT_LOSS_BINS, DEFAULT_SCORE_BINS,
};
use pathlattice::data::{parse_csv, stratified_split, Dataset, DatasetManifest, SplitIndices, SplitSpec, Splits};
use pathlattice::fit::{Criterion, FitConfig};
use pathlattice::graph::{InteractionKind, SemanticType, Structure, Task};
use pathlattice::lattice::{Filter, GraphSpec, LatticeConfig, LatticeState};
use pathlattice::pool::{get_qgraph, FitReport, Member, PoolConfig, QGraphPool};
use pathlattice::sympify::{render, to_expression, Expression, Format};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const DEFAULT_DATASET: &str = "data";
pub const DEFAULT_RESOLUTION: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Valid,
    Holdout,
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Holdout => "holdout",
        })
    }
}

impl FromStr for SplitName {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "valid" => Ok(SplitName::Valid),
            "holdout" => Ok(SplitName::Holdout),
            _ => Err(LabError::BadRequest(format!("unknown dataset split `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Roc,
    ProbabilityScores,
    Partial2d,
    SegmentedLoss,
}

impl FromStr for PlotKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "roc" => Ok(PlotKind::Roc),
            "probability_scores" => Ok(PlotKind::ProbabilityScores),
            "partial2d" => Ok(PlotKind::Partial2d),
            "segmented_loss" => Ok(PlotKind::SegmentedLoss),
            _ => Err(LabError::BadRequest(format!("unknown plot kind `{s}`"))),
        }
    }
}

/// Something that changed the session, in the order it happened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionCreated {
        id: String,
        config: LatticeConfig,
    },
    DataLoaded {
        label: String,
        csv: String,
        #[serde(default)]
        overrides: BTreeMap<String, SemanticType>,
        split: SplitSpec,
        manifest: DatasetManifest,
    },
    QuestionPosed {
        pool: String,
        dataset: String,
        spec: GraphSpec,
        filters: Vec<Filter>,
        config: PoolConfig,
    },
    FitRound {
        pool: String,
        report: FitReport,
    },
    UpdateApplied {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pool: Option<String>,
        members: Vec<u64>,
        structures: Vec<Structure>,
        auto: bool,
    },
    HoldoutUnlocked,
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::SessionCreated { .. } => "session_created",
            Event::DataLoaded { .. } => "data_loaded",
            Event::QuestionPosed { .. } => "question_posed",
            Event::FitRound { .. } => "fit_round",
            Event::UpdateApplied { .. } => "update_applied",
            Event::HoldoutUnlocked => "holdout_unlocked",
        }
    }
}

/// A dataset and its three splits. Held by the session only.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub manifest: DatasetManifest,
    pub split: SplitSpec,
    pub indices: SplitIndices,
    splits: Arc<Splits>,
}

impl LoadedData {
    pub fn parse(csv: &str, overrides: &BTreeMap<String, SemanticType>, split: &SplitSpec) -> Result<Self> {
        let data = parse_csv(csv, overrides)?;
        let indices = stratified_split(&data, split)?;
        Ok(LoadedData {
            manifest: data.manifest(),
            split: split.clone(),
            splits: Arc::new(indices.apply(&data)),
            indices,
        })
    }

    /// The rows of one split, ignoring the holdout gate.
    fn rows(&self, split: SplitName) -> &Dataset {
        match split {
            SplitName::Train => &self.splits.train,
            SplitName::Valid => &self.splits.valid,
            SplitName::Holdout => &self.splits.holdout,
        }
    }

    pub fn train(&self) -> &Dataset {
        &self.splits.train
    }
}

/// A pool and the dataset it is fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub dataset: String,
    pub pool: QGraphPool,
}

fn default_dataset() -> String {
    DEFAULT_DATASET.to_string()
}

fn default_max_depth() -> usize {
    2
}

/// A research question: which inputs may explain which output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Question {
    #[serde(default = "default_dataset")]
    pub dataset: String,
    pub inputs: Vec<String>,
    pub output: String,
    pub task: Task,
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed_kinds: Option<BTreeSet<InteractionKind>>,
    #[serde(default)]
    pub filters: Vec<Filter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<Criterion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
}

impl Question {
    pub fn new(inputs: &[&str], output: &str, task: Task, max_depth: usize) -> Self {
        Question {
            dataset: default_dataset(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            output: output.to_string(),
            task,
            max_depth,
            allowed_kinds: None,
            filters: Vec::new(),
            capacity: None,
            criterion: None,
            fit: None,
        }
    }
}

/// Outcome of one fit round as reported to clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub generation: u64,
    pub best_score: Option<f64>,
    pub best_loss: Option<f64>,
    pub best_structure_hash: Option<String>,
    pub unusable: usize,
    pub discarded: usize,
    pub replenished: usize,
    /// Members the lattice was reinforced with after this round.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub updated_with: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub rank: usize,
    pub id: u64,
    pub structure_hash: String,
    pub formula: String,
    pub loss: Option<f64>,
    pub score: Option<f64>,
    pub depth: usize,
    pub params: usize,
    pub inputs: Vec<String>,
    pub structure: Structure,
}

impl GraphSummary {
    fn of(rank: usize, m: &Member) -> Self {
        GraphSummary {
            rank,
            id: m.id,
            structure_hash: m.graph.structure_hash().0,
            formula: m.graph.canonical_form(),
            loss: m.graph.train_loss,
            score: m.score,
            depth: m.graph.depth(),
            params: m.graph.param_count(),
            inputs: m.graph.inputs().into_keys().collect(),
            structure: m.graph.structure(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationView {
    pub text: String,
    pub format: Format,
    pub signif: usize,
    pub expression: Expression,
}

/// Optional knobs of a plot request; unset fields take defaults derived
/// from the graph.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<SplitName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub by: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub manifest: DatasetManifest,
    pub split: SplitSpec,
    pub rows: BTreeMap<SplitName, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub dataset: String,
    pub spec: GraphSpec,
    pub filters: Vec<Filter>,
    pub generation: u64,
    pub size: usize,
    pub criterion: Criterion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub lattice: LatticeConfig,
    pub datasets: BTreeMap<String, DatasetSummary>,
    pub pools: BTreeMap<String, PoolSummary>,
    pub holdout_unlocked: bool,
    pub events: usize,
}

/// Everything one fit round needs, detached from the session so it can run
/// without holding the session lock.
#[derive(Clone, Debug)]
pub struct FitJob {
    pool_id: String,
    base_events: usize,
    lattice: LatticeState,
    pool: QGraphPool,
    data: Arc<Splits>,
    workers: usize,
    auto_update: bool,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pool_id: String,
    base_events: usize,
    lattice: Option<LatticeState>,
    pool: QGraphPool,
    events: Vec<Event>,
    summary: RoundSummary,
}

impl FitJob {
    pub fn run(mut self) -> Result<FitOutcome> {
        let report = self.pool.fit(&self.lattice, &self.data.train, self.workers)?;
        let mut events = vec![Event::FitRound {
            pool: self.pool_id.clone(),
            report: report.clone(),
        }];
        let mut updated_with = Vec::new();
        let lattice = if self.auto_update {
            let best = self.pool.best()?;
            updated_with = best.iter().map(|m| m.id).collect();
            let structures: Vec<Structure> = best.iter().map(|m| m.graph.structure()).collect();
            self.lattice.update(&structures)?;
            events.push(Event::UpdateApplied {
                pool: Some(self.pool_id.clone()),
                members: updated_with.clone(),
                structures,
                auto: true,
            });
            Some(self.lattice)
        } else {
            None
        };
        let best = self.pool.members().first().filter(|m| m.score.is_some());
        let summary = RoundSummary {
            generation: report.generation,
            best_score: report.best_score,
            best_loss: report.best_loss,
            best_structure_hash: best.map(|m| m.graph.structure_hash().0),
            unusable: report.unusable,
            discarded: report.discarded,
            replenished: report.replenished,
            updated_with,
        };
        Ok(FitOutcome {
            pool_id: self.pool_id,
            base_events: self.base_events,
            lattice,
            pool: self.pool,
            events,
            summary,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Session {
    id: String,
    lattice: LatticeState,
    datasets: BTreeMap<String, LoadedData>,
    pools: BTreeMap<String, PoolEntry>,
    next_pool: u64,
    history: Vec<Event>,
    holdout_unlocked: bool,
}

pub fn new_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

impl Session {
    pub fn new(config: LatticeConfig) -> Result<Self> {
        Session::with_id(new_session_id(), config)
    }

    pub fn with_id(id: String, config: LatticeConfig) -> Result<Self> {
        let lattice = LatticeState::new(config)?;
        Ok(Session {
            history: vec![Event::SessionCreated { id: id.clone(), config }],
            id,
            lattice,
            datasets: BTreeMap::new(),
            pools: BTreeMap::new(),
            next_pool: 0,
            holdout_unlocked: false,
        })
    }

    pub(crate) fn from_parts(
        id: String,
        lattice: LatticeState,
        datasets: BTreeMap<String, LoadedData>,
        pools: BTreeMap<String, PoolEntry>,
        next_pool: u64,
        history: Vec<Event>,
        holdout_unlocked: bool,
    ) -> Self {
        Session {
            id,
            lattice,
            datasets,
            pools,
            next_pool,
            history,
            holdout_unlocked,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn lattice(&self) -> &LatticeState {
        &self.lattice
    }

    pub fn history(&self) -> &[Event] {
        &self.history
    }

    pub fn holdout_unlocked(&self) -> bool {
        self.holdout_unlocked
    }

    pub(crate) fn next_pool(&self) -> u64 {
        self.next_pool
    }

    pub fn pools(&self) -> &BTreeMap<String, PoolEntry> {
        &self.pools
    }

    pub fn pool(&self, id: &str) -> Result<&PoolEntry> {
        self.pools.get(id).ok_or_else(|| LabError::not_found("pool", id))
    }

    /// The most recently created pool.
    pub fn latest_pool(&self) -> Option<&str> {
        self.pools
            .keys()
            .max_by_key(|k| k.trim_start_matches('p').parse::<u64>().unwrap_or(0))
            .map(String::as_str)
    }

    pub fn dataset(&self, label: &str) -> Result<&LoadedData> {
        self.datasets.get(label).ok_or_else(|| LabError::not_found("dataset", label))
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.id.clone(),
            lattice: *self.lattice.config(),
            datasets: self
                .datasets
                .iter()
                .map(|(k, d)| {
                    let rows = [SplitName::Train, SplitName::Valid, SplitName::Holdout]
                        .into_iter()
                        .map(|s| (s, d.rows(s).n_rows()))
                        .collect();
                    (
                        k.clone(),
                        DatasetSummary {
                            manifest: d.manifest.clone(),
                            split: d.split.clone(),
                            rows,
                        },
                    )
                })
                .collect(),
            pools: self
                .pools
                .iter()
                .map(|(k, e)| {
                    (
                        k.clone(),
                        PoolSummary {
                            dataset: e.dataset.clone(),
                            spec: e.pool.spec.clone(),
                            filters: e.pool.filters.clone(),
                            generation: e.pool.generation(),
                            size: e.pool.len(),
                            criterion: e.pool.criterion(),
                        },
                    )
                })
                .collect(),
            holdout_unlocked: self.holdout_unlocked,
            events: self.history.len(),
        }
    }

    /// Parses `csv`, splits it and keeps it under `label`.
    pub fn load_data(
        &mut self,
        label: &str,
        csv: &str,
        overrides: &BTreeMap<String, SemanticType>,
        split: &SplitSpec,
    ) -> Result<DatasetSummary> {
        if label.is_empty() {
            return Err(LabError::BadRequest("dataset label is empty".into()));
        }
        if self.datasets.contains_key(label) {
            return Err(LabError::BadRequest(format!("dataset `{label}` is already loaded")));
        }
        let loaded = LoadedData::parse(csv, overrides, split)?;
        self.history.push(Event::DataLoaded {
            label: label.to_string(),
            csv: csv.to_string(),
            overrides: overrides.clone(),
            split: split.clone(),
            manifest: loaded.manifest.clone(),
        });
        self.datasets.insert(label.to_string(), loaded);
        Ok(self.summary().datasets.remove(label).expect("just inserted"))
    }

    pub(crate) fn insert_dataset(&mut self, label: String, loaded: LoadedData) {
        self.datasets.insert(label, loaded);
    }

    /// Builds a pool for `question`. Semantic types come from the dataset.
    pub fn pose_question(&mut self, question: &Question) -> Result<String> {
        let data = self.dataset(&question.dataset)?;
        let train = data.train();
        let stype = |name: &str| {
            train
                .stype(name)
                .ok_or_else(|| LabError::BadRequest(format!("dataset `{}` has no column `{name}`", question.dataset)))
        };
        let inputs = question
            .inputs
            .iter()
            .map(|n| Ok((n.clone(), stype(n)?)))
            .collect::<Result<Vec<_>>>()?;
        if stype(&question.output)? != SemanticType::Numerical {
            return Err(LabError::BadRequest(format!("output `{}` must be numerical", question.output)));
        }
        let spec = GraphSpec {
            inputs,
            output: question.output.clone(),
            task: question.task,
            max_depth: question.max_depth,
            allowed_kinds: question
                .allowed_kinds
                .clone()
                .unwrap_or_else(|| InteractionKind::ALL.into_iter().collect()),
        };
        let defaults = PoolConfig::default();
        let config = PoolConfig {
            capacity: question.capacity.unwrap_or(defaults.capacity),
            criterion: question.criterion,
            fit: question.fit.unwrap_or(defaults.fit),
            ..defaults
        };
        let id = format!("p{}", self.next_pool);
        self.add_pool(id.clone(), question.dataset.clone(), spec, question.filters.clone(), config)?;
        Ok(id)
    }

    fn add_pool(
        &mut self,
        id: String,
        dataset: String,
        spec: GraphSpec,
        filters: Vec<Filter>,
        config: PoolConfig,
    ) -> Result<()> {
        let mut lattice = self.lattice.clone();
        let pool = get_qgraph(&mut lattice, spec.clone(), filters.clone(), config)?;
        self.lattice = lattice;
        self.history.push(Event::QuestionPosed {
            pool: id.clone(),
            dataset: dataset.clone(),
            spec,
            filters,
            config,
        });
        self.pools.insert(id, PoolEntry { dataset, pool });
        self.next_pool += 1;
        Ok(())
    }

    /// Detaches one fit round of `pool_id`.
    pub fn prepare_fit(&self, pool_id: &str, workers: usize, auto_update: bool) -> Result<FitJob> {
        let entry = self.pool(pool_id)?;
        let data = self.dataset(&entry.dataset)?;
        Ok(FitJob {
            pool_id: pool_id.to_string(),
            base_events: self.history.len(),
            lattice: self.lattice.clone(),
            pool: entry.pool.clone(),
            data: Arc::clone(&data.splits),
            workers,
            auto_update,
        })
    }

    /// Applies a finished round. Fails if the session changed since the
    /// job was prepared.
    pub fn commit_fit(&mut self, outcome: FitOutcome) -> Result<RoundSummary> {
        if outcome.base_events != self.history.len() {
            return Err(LabError::BadRequest("session changed while the fit was running".into()));
        }
        let entry = self
            .pools
            .get_mut(&outcome.pool_id)
            .ok_or_else(|| LabError::not_found("pool", &outcome.pool_id))?;
        entry.pool = outcome.pool;
        if let Some(lattice) = outcome.lattice {
            self.lattice = lattice;
        }
        self.history.extend(outcome.events);
        Ok(outcome.summary)
    }

    /// Runs `rounds` fit rounds, each followed by an update with the best
    /// members when `auto_update` is set.
    pub fn fit(&mut self, pool_id: &str, rounds: usize, workers: usize, auto_update: bool) -> Result<Vec<RoundSummary>> {
        let mut out = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let outcome = self.prepare_fit(pool_id, workers, auto_update)?.run()?;
            out.push(self.commit_fit(outcome)?);
        }
        Ok(out)
    }

    /// Reinforces the lattice with exactly the members `ids` of `pool_id`.
    pub fn update(&mut self, pool_id: &str, ids: &[u64]) -> Result<Vec<String>> {
        if ids.is_empty() {
            return Err(LabError::BadRequest("no graphs to update with".into()));
        }
        let entry = self.pool(pool_id)?;
        let members = ids
            .iter()
            .map(|&id| entry.pool.member(id).ok_or_else(|| LabError::not_found("graph", id)))
            .collect::<Result<Vec<_>>>()?;
        let structures: Vec<Structure> = members.iter().map(|m| m.graph.structure()).collect();
        let hashes = members.iter().map(|m| m.graph.structure_hash().0).collect();
        self.lattice.update(&structures)?;
        self.history.push(Event::UpdateApplied {
            pool: Some(pool_id.to_string()),
            members: ids.to_vec(),
            structures,
            auto: false,
        });
        Ok(hashes)
    }

    /// Sets the irreversible holdout flag. Returns whether this call
    /// changed it.
    pub fn unlock_holdout(&mut self) -> bool {
        if self.holdout_unlocked {
            return false;
        }
        self.holdout_unlocked = true;
        self.history.push(Event::HoldoutUnlocked);
        true
    }

    pub fn graphs(&self, pool_id: &str, n: usize) -> Result<Vec<GraphSummary>> {
        let head = self.pool(pool_id)?.pool.head(n)?;
        Ok(head.into_iter().enumerate().map(|(i, m)| GraphSummary::of(i, m)).collect())
    }

    pub fn member(&self, pool_id: &str, id: u64) -> Result<&Member> {
        self.pool(pool_id)?
            .pool
            .member(id)
            .ok_or_else(|| LabError::not_found("graph", id))
    }

    /// Member at sorted position `rank`.
    pub fn member_at(&self, pool_id: &str, rank: usize) -> Result<&Member> {
        Ok(self.pool(pool_id)?.pool.index(rank)?)
    }

    pub fn equation(&self, pool_id: &str, id: u64, signif: usize, format: Format) -> Result<EquationView> {
        if signif == 0 {
            return Err(LabError::BadRequest("signif must be at least 1".into()));
        }
        let expression = to_expression(&self.member(pool_id, id)?.graph)?;
        Ok(EquationView {
            text: render(&expression, signif, format),
            format,
            signif,
            expression,
        })
    }

    /// One split of a pool's dataset, refusing the holdout until unlocked.
    pub fn split(&self, pool_id: &str, split: SplitName) -> Result<&Dataset> {
        if split == SplitName::Holdout && !self.holdout_unlocked {
            return Err(LabError::HoldoutLocked);
        }
        let entry = self.pool(pool_id)?;
        Ok(self.dataset(&entry.dataset)?.rows(split))
    }

    pub fn plot(&self, pool_id: &str, id: u64, kind: PlotKind, req: &PlotRequest) -> Result<PlotData> {
        let split = req.dataset.unwrap_or(SplitName::Valid);
        let data = self.split(pool_id, split)?;
        let graph = &self.member(pool_id, id)?.graph;
        let inputs: Vec<String> = graph.inputs().into_keys().collect();
        let (payload, features) = match kind {
            PlotKind::Roc => {
                let (y, s) = classifier_scores(graph, data)?;
                (PlotPayload::Roc(roc_auc(&y, &s)?), inputs)
            }
            PlotKind::ProbabilityScores => {
                let (y, s) = classifier_scores(graph, data)?;
                let bins = req.bins.unwrap_or(DEFAULT_SCORE_BINS);
                (PlotPayload::ProbabilityScores(probability_scores(&y, &s, bins)?), inputs)
            }
            PlotKind::Partial2d => {
                let numeric: Vec<String> = graph
                    .inputs()
                    .into_iter()
                    .filter(|(_, t)| *t == SemanticType::Numerical)
                    .map(|(n, _)| n)
                    .collect();
                let pick = |given: &Option<String>, other: Option<&str>| {
                    given
                        .clone()
                        .or_else(|| numeric.iter().find(|n| Some(n.as_str()) != other).cloned())
                        .ok_or_else(|| LabError::BadRequest("partial2d needs two numerical inputs".into()))
                };
                let x = pick(&req.x, req.y.as_deref())?;
                let y = pick(&req.y, Some(&x))?;
                let train = self.split(pool_id, SplitName::Train)?;
                let fixed = fixed_defaults(graph, train, &[&x, &y])?;
                let res = req.resolution.unwrap_or(DEFAULT_RESOLUTION);
                (PlotPayload::Partial2d(partial2d(graph, data, &x, &y, res, &fixed)?), vec![x, y])
            }
            PlotKind::SegmentedLoss => {
                let by = match &req.by {
                    Some(b) => b.clone(),
                    None => inputs.first().cloned().ok_or_else(|| LabError::BadRequest("graph has no inputs".into()))?,
                };
                let bins = req.bins.unwrap_or(DEFAULT_LOSS_BINS);
                (PlotPayload::SegmentedLoss(segmented_loss(graph, data, &by, bins)?), vec![by])
            }
        };
        Ok(PlotData::new(payload, graph, &split.to_string(), features))
    }

    pub(crate) fn push_event(&mut self, event: Event) {
        self.history.push(event);
    }

    pub(crate) fn lattice_mut(&mut self) -> &mut LatticeState {
        &mut self.lattice
    }

    pub(crate) fn set_holdout_unlocked(&mut self) {
        self.holdout_unlocked = true;
    }

    pub(crate) fn add_pool_replayed(
        &mut self,
        id: String,
        dataset: String,
        spec: GraphSpec,
        filters: Vec<Filter>,
        config: PoolConfig,
    ) -> Result<()> {
        self.add_pool(id, dataset, spec, filters, config)
    }

    pub(crate) fn pool_mut(&mut self, id: &str) -> Result<&mut PoolEntry> {
        self.pools.get_mut(id).ok_or_else(|| LabError::not_found("pool", id))
    }
}

#[cfg(test)]
mod tests;
