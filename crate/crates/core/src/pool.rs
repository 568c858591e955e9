//! A bounded, sorted pool of candidate graphs for one question.
//!
//! Each [`QGraphPool::fit`] trains every member, sorts by the pool's
//! criterion, discards unusable graphs and the worst fraction, and refills
//! the pool with fresh lattice samples that are fitted on the next call.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{compute_stats_for, Dataset, InputStats};
use crate::error::{Error, Result};
use crate::fit::{fit_initialized, init_params, score_from_loss, Criterion, FitConfig};
use crate::graph::{Graph, StructureHash};
use crate::lattice::{Filter, GraphSpec, LatticeState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolConfig {
    pub capacity: usize,
    /// Fraction of the sorted pool dropped after each fit.
    pub discard_fraction: f64,
    /// Ranking criterion; `None` means the task loss.
    pub criterion: Option<Criterion>,
    pub fit: FitConfig,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            capacity: 200,
            discard_fraction: 0.5,
            criterion: None,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    /// Stable identifier, unique within the pool.
    pub id: u64,
    pub graph: Graph,
    /// Criterion value on the training data from the latest fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// What one [`QGraphPool::fit`] call did.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub generation: u64,
    pub best_score: Option<f64>,
    pub best_loss: Option<f64>,
    pub unusable: usize,
    pub discarded: usize,
    pub replenished: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QGraphPool {
    pub spec: GraphSpec,
    pub filters: Vec<Filter>,
    pub config: PoolConfig,
    seed: u64,
    generation: u64,
    next_id: u64,
    members: Vec<Member>,
}

fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 8 bytes"))
}

/// Registers the spec's features and samples a fresh pool of `config.capacity`
/// unfitted graphs.
pub fn get_qgraph(
    lattice: &mut LatticeState,
    spec: GraphSpec,
    filters: Vec<Filter>,
    config: PoolConfig,
) -> Result<QGraphPool> {
    spec.validate()?;
    if config.capacity == 0 {
        return Err(Error::Config("pool capacity must be positive".into()));
    }
    if !(0.0..1.0).contains(&config.discard_fraction) {
        return Err(Error::Config("discard_fraction must be in [0, 1)".into()));
    }
    if let Some(c) = config.criterion {
        if !c.supports(spec.task) {
            return Err(Error::IncompatibleCriterion {
                criterion: c.to_string(),
                task: spec.task.to_string(),
            });
        }
    }
    config.fit.validate()?;
    lattice.register_features(&spec.inputs, &spec.output)?;
    let seed = lattice.next_seed();
    let mut pool = QGraphPool {
        spec,
        filters,
        config,
        seed,
        generation: 0,
        next_id: 0,
        members: Vec::new(),
    };
    pool.replenish(lattice)?;
    Ok(pool)
}

impl QGraphPool {
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn criterion(&self) -> Criterion {
        self.config
            .criterion
            .unwrap_or_else(|| Criterion::task_loss(self.spec.task))
    }

    pub fn member(&self, id: u64) -> Option<&Member> {
        self.members.iter().find(|m| m.id == id)
    }

    fn replenish(&mut self, lattice: &LatticeState) -> Result<usize> {
        let mut added = 0;
        while self.members.len() < self.config.capacity {
            let id = self.next_id;
            let mut sampler = lattice.sampler(derive_seed(&[self.seed, self.generation, id]));
            let graph = sampler.sample(&self.spec, &self.filters)?;
            self.next_id += 1;
            self.members.push(Member { id, graph, score: None });
            added += 1;
        }
        Ok(added)
    }

    /// Fits every member on `train` using up to `workers` threads, then
    /// sorts, discards and replenishes. Results do not depend on `workers`.
    pub fn fit(&mut self, lattice: &LatticeState, train: &Dataset, workers: usize) -> Result<FitReport> {
        for name in self.spec.inputs.iter().map(|(n, _)| n).chain([&self.spec.output]) {
            if train.column(name).is_none() {
                return Err(Error::MissingFeature(name.clone()));
            }
        }
        let names: Vec<&str> = self.spec.inputs.iter().map(|(n, _)| n.as_str()).collect();
        let stats = compute_stats_for(train, &names)?;
        let criterion = self.criterion();
        let pool_seed = self.seed;
        let fit_config = self.config.fit;

        let fit_member = |m: &Member| -> Result<Member> {
            let config = FitConfig {
                seed: derive_seed(&[pool_seed, m.id]),
                ..fit_config
            };
            let graph = prepare(&m.graph, &stats, config.seed)?;
            let (graph, _) = fit_initialized(graph, train, &config)?;
            let score = match graph.train_loss {
                Some(l) if !graph.unusable => {
                    let n = rows_used(&graph, train);
                    Some(score_from_loss(graph.task, criterion, l, graph.param_count(), n))
                }
                _ => None,
            };
            Ok(Member { id: m.id, graph, score })
        };

        let threads = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        let fitted: Vec<Result<Member>> = threads.install(|| self.members.par_iter().map(fit_member).collect());

        let mut usable = Vec::with_capacity(fitted.len());
        let mut unusable = 0;
        for m in fitted {
            let m = m?;
            match m.score {
                Some(s) if s.is_finite() => usable.push(m),
                _ => unusable += 1,
            }
        }
        usable.sort_by(|a, b| {
            a.score
                .expect("usable members are scored")
                .total_cmp(&b.score.expect("usable members are scored"))
                .then(a.id.cmp(&b.id))
        });
        let keep = self.config.capacity - (self.config.capacity as f64 * self.config.discard_fraction).floor() as usize;
        let keep = keep.max(1);
        let discarded = usable.len().saturating_sub(keep);
        usable.truncate(keep);
        self.members = usable;
        self.generation += 1;
        let replenished = self.replenish(lattice)?;
        let best = self.members.first().filter(|m| m.score.is_some());
        Ok(FitReport {
            generation: self.generation,
            best_score: best.and_then(|m| m.score),
            best_loss: best.and_then(|m| m.graph.train_loss),
            unusable,
            discarded,
            replenished,
        })
    }

    fn ensure_fitted(&self) -> Result<()> {
        if self.generation == 0 {
            Err(Error::FitBeforeBest)
        } else {
            Ok(())
        }
    }

    /// The best 3-4 members with pairwise distinct structures.
    pub fn best(&self) -> Result<Vec<&Member>> {
        self.ensure_fitted()?;
        let mut seen: BTreeSet<StructureHash> = BTreeSet::new();
        Ok(self
            .members
            .iter()
            .filter(|m| m.score.is_some())
            .filter(|m| seen.insert(m.graph.structure_hash()))
            .take(4)
            .collect())
    }

    /// The `n` best members in sorted order.
    pub fn head(&self, n: usize) -> Result<Vec<&Member>> {
        self.ensure_fitted()?;
        Ok(self.members.iter().take(n).collect())
    }

    pub fn index(&self, i: usize) -> Result<&Member> {
        self.ensure_fitted()?;
        self.members.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.members.len(),
        })
    }
}

fn prepare(graph: &Graph, stats: &InputStats, seed: u64) -> Result<Graph> {
    if graph.is_initialized() {
        Ok(graph.clone())
    } else {
        init_params(graph, stats, seed)
    }
}

/// Rows of `data` with every feature of `graph` and its target present.
fn rows_used(graph: &Graph, data: &Dataset) -> usize {
    let mut names: Vec<String> = graph.inputs().into_keys().collect();
    names.extend(graph.target().map(str::to_string));
    (0..data.n_rows())
        .filter(|&i| {
            names
                .iter()
                .all(|n| data.value(n, i).is_some_and(|v| v != crate::data::Value::Missing))
        })
        .count()
}
