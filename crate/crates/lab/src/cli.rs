//! The `pathlattice` command line.
//!
//! Every command except `serve` loads the working session file, applies one
//! step and writes it back. Failures print an [`ErrorPayload`] as JSON on
//! stderr and exit nonzero.
//!
//! [`ErrorPayload`]: crate::ErrorPayload

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use pathlattice::data::SplitSpec;
use pathlattice::fit::Criterion;
use pathlattice::graph::{InteractionKind, SemanticType, Task};
use pathlattice::lattice::Filter;
use pathlattice::sympify::Format;

use crate::api::{self, AppState};
use crate::error::{LabError, Result};
use crate::persist::SessionFile;
use crate::refs::GraphRef;
use crate::session::{PlotKind, PlotRequest, Question, Session, SplitName, DEFAULT_DATASET};

pub const SESSION_ENV: &str = "PATHLATTICE_SESSION";

#[derive(Debug, Parser)]
#[command(name = "pathlattice", version, about = "Interactive symbolic regression sessions")]
pub struct Cli {
    /// Working session file.
    #[arg(long, global = true, env = SESSION_ENV, default_value = "pathlattice-session.json")]
    pub session: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TaskArg {
    Classifier,
    Regressor,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Classifier => Task::Classifier,
            TaskArg::Regressor => Task::Regressor,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start a new session in the working session file.
    NewSession {
        /// Lattice config JSON; defaults to $PATHLATTICE_LATTICE_CONFIG.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the lattice seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Replace an existing session file.
        #[arg(long)]
        force: bool,
    },
    /// Load a CSV file and split it.
    LoadData {
        csv: PathBuf,
        #[arg(long, default_value = DEFAULT_DATASET)]
        label: String,
        /// Train, valid and holdout fractions.
        #[arg(long, default_value = "0.6,0.2,0.2")]
        split: String,
        #[arg(long)]
        stratify: Option<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Columns forced to categorical.
        #[arg(long, value_delimiter = ',')]
        categorical: Vec<String>,
        /// Columns forced to numerical.
        #[arg(long, value_delimiter = ',')]
        numerical: Vec<String>,
    },
    /// Pose a question, creating a pool.
    Ask {
        #[arg(long, value_delimiter = ',', required = true)]
        inputs: Vec<String>,
        #[arg(long)]
        output: String,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, default_value_t = 2)]
        max_depth: usize,
        #[arg(long)]
        contains: Vec<String>,
        #[arg(long)]
        excludes: Vec<String>,
        /// Allowed interaction kinds.
        #[arg(long, value_delimiter = ',')]
        functions: Vec<String>,
        #[arg(long)]
        capacity: Option<usize>,
        #[arg(long)]
        criterion: Option<String>,
        #[arg(long, default_value = DEFAULT_DATASET)]
        dataset: String,
    },
    /// Run fit rounds on a pool.
    Fit {
        #[arg(long)]
        pool: Option<String>,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[arg(long)]
        workers: Option<usize>,
        /// Update the lattice with the best graphs after each round.
        #[arg(long)]
        auto_update: bool,
    },
    /// List the best graphs of a pool.
    Show {
        #[arg(long)]
        pool: Option<String>,
        #[arg(long, default_value_t = 5)]
        head: usize,
        #[arg(long)]
        json: bool,
    },
    /// Render a graph as an equation.
    Equation {
        graph: String,
        #[arg(long)]
        pool: Option<String>,
        #[arg(long, default_value_t = 3)]
        signif: usize,
        #[arg(long, default_value = "text")]
        format: String,
        #[arg(long)]
        json: bool,
    },
    /// Compute a diagnostic plot as JSON or SVG.
    Plot {
        /// roc, probability_scores, partial2d or segmented_loss.
        kind: String,
        graph: String,
        #[arg(long)]
        pool: Option<String>,
        #[arg(long, default_value = "valid")]
        dataset: String,
        /// Output file; `.svg` renders an image, anything else JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        y: Option<String>,
        #[arg(long)]
        by: Option<String>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Reinforce the lattice with the given graphs.
    Update {
        #[arg(required = true)]
        graphs: Vec<String>,
        #[arg(long)]
        pool: Option<String>,
    },
    /// Allow evaluation on the holdout split. Irreversible.
    UnlockHoldout {
        #[arg(long)]
        confirm: bool,
    },
    /// Write a copy of the working session.
    Save { out: PathBuf },
    /// Make a saved session the working session.
    Resume { file: PathBuf },
    /// Print the event log.
    History,
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long)]
        workers: Option<usize>,
    },
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(out) => {
            if !out.is_empty() {
                println!("{}", out.trim_end());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.payload()).expect("error payload serializes"));
            1
        }
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn pool_or_latest(session: &Session, pool: Option<String>) -> Result<String> {
    match pool {
        Some(p) => Ok(p),
        None => session
            .latest_pool()
            .map(str::to_string)
            .ok_or_else(|| LabError::BadRequest("no pool yet: run `ask` first".into())),
    }
}

fn parse_fractions(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| LabError::BadRequest(format!("bad split `{s}`")))?;
    parts
        .try_into()
        .map_err(|_| LabError::BadRequest(format!("split `{s}` needs three fractions")))
}

fn with_session<T>(path: &Path, f: impl FnOnce(&mut Session) -> Result<T>) -> Result<T> {
    let mut session = Session::load(path)?;
    let out = f(&mut session)?;
    session.save(path)?;
    Ok(out)
}

pub fn execute(cli: Cli) -> Result<String> {
    let path = cli.session.as_path();
    match cli.command {
        Command::NewSession { config, seed, force } => {
            if path.exists() && !force {
                return Err(LabError::BadRequest(format!(
                    "{} exists; pass --force to replace it",
                    path.display()
                )));
            }
            let mut config = match config {
                Some(p) => crate::read_lattice_config(&p)?,
                None => crate::default_lattice_config()?,
            };
            if let Some(s) = seed {
                config.seed = s;
            }
            let session = Session::new(config)?;
            session.save(path)?;
            to_json(&session.summary())
        }
        Command::LoadData {
            csv,
            label,
            split,
            stratify,
            seed,
            categorical,
            numerical,
        } => {
            let text = std::fs::read_to_string(&csv)?;
            let spec = SplitSpec {
                fractions: parse_fractions(&split)?,
                stratify_by: stratify,
                seed,
            };
            let mut overrides = BTreeMap::new();
            overrides.extend(categorical.into_iter().map(|c| (c, SemanticType::Categorical)));
            overrides.extend(numerical.into_iter().map(|c| (c, SemanticType::Numerical)));
            let out = with_session(path, |s| s.load_data(&label, &text, &overrides, &spec))?;
            to_json(&out)
        }
        Command::Ask {
            inputs,
            output,
            task,
            max_depth,
            contains,
            excludes,
            functions,
            capacity,
            criterion,
            dataset,
        } => {
            let mut filters: Vec<Filter> = contains.into_iter().map(Filter::Contains).collect();
            filters.extend(excludes.into_iter().map(Filter::Excludes));
            let allowed_kinds = if functions.is_empty() {
                None
            } else {
                Some(
                    functions
                        .iter()
                        .map(|f| f.parse::<InteractionKind>())
                        .collect::<pathlattice::Result<BTreeSet<_>>>()?,
                )
            };
            let question = Question {
                dataset,
                inputs,
                output,
                task: task.into(),
                max_depth,
                allowed_kinds,
                filters,
                capacity,
                criterion: criterion.map(|c| c.parse::<Criterion>()).transpose()?,
                fit: None,
            };
            let out = with_session(path, |s| {
                let pool = s.pose_question(&question)?;
                let summary = s.summary().pools.remove(&pool).expect("pool was just created");
                Ok(api::PoolCreated { pool, summary })
            })?;
            to_json(&out)
        }
        Command::Fit {
            pool,
            rounds,
            workers,
            auto_update,
        } => {
            if rounds == 0 || rounds > api::MAX_ROUNDS {
                return Err(LabError::BadRequest(format!("rounds must be between 1 and {}", api::MAX_ROUNDS)));
            }
            let out = with_session(path, |s| {
                let pool = pool_or_latest(s, pool)?;
                let rounds = s.fit(&pool, rounds, workers.unwrap_or_else(default_workers), auto_update)?;
                Ok(api::FitResponse { pool, rounds })
            })?;
            to_json(&out)
        }
        Command::Show { pool, head, json } => {
            let session = Session::load(path)?;
            let pool = pool_or_latest(&session, pool)?;
            let graphs = session.graphs(&pool, head)?;
            if json {
                return to_json(&graphs);
            }
            let entry = session.pool(&pool)?;
            let mut out = String::new();
            let _ = writeln!(
                out,
                "pool {pool}  generation {}  criterion {}",
                entry.pool.generation(),
                entry.pool.criterion()
            );
            let _ = writeln!(out, "{:<5} {:>6} {:>12} {:>12} {:>5} {:>3}  formula", "rank", "id", "loss", "score", "depth", "k");
            let num = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
            for g in graphs {
                let _ = writeln!(
                    out,
                    "g{:<4} {:>6} {:>12} {:>12} {:>5} {:>3}  {}",
                    g.rank,
                    g.id,
                    num(g.loss),
                    num(g.score),
                    g.depth,
                    g.params,
                    g.formula
                );
            }
            Ok(out)
        }
        Command::Equation {
            graph,
            pool,
            signif,
            format,
            json,
        } => {
            let session = Session::load(path)?;
            let pool = pool_or_latest(&session, pool)?;
            let id = graph.parse::<GraphRef>()?.resolve(&session, &pool)?;
            let eq = session.equation(&pool, id, signif, format.parse::<Format>()?)?;
            if json {
                to_json(&eq)
            } else {
                Ok(eq.text)
            }
        }
        Command::Plot {
            kind,
            graph,
            pool,
            dataset,
            out,
            bins,
            x,
            y,
            by,
            resolution,
        } => {
            let kind: PlotKind = kind.parse()?;
            let split: SplitName = dataset.parse()?;
            let session = Session::load(path)?;
            if split == SplitName::Holdout && !session.holdout_unlocked() {
                return Err(LabError::HoldoutLocked);
            }
            let pool = pool_or_latest(&session, pool)?;
            let id = graph.parse::<GraphRef>()?.resolve(&session, &pool)?;
            let req = PlotRequest {
                dataset: Some(split),
                bins,
                x,
                y,
                by,
                resolution,
            };
            let plot = session.plot(&pool, id, kind, &req)?;
            let json = to_json(&plot)?;
            match out {
                Some(file) => {
                    let svg = file.extension().is_some_and(|e| e.eq_ignore_ascii_case("svg"));
                    std::fs::write(&file, if svg { crate::svg::render(&plot) } else { json })?;
                    Ok(String::new())
                }
                None => Ok(json),
            }
        }
        Command::Update { graphs, pool } => {
            let out = with_session(path, |s| {
                let pool = pool_or_latest(s, pool)?;
                let ids = graphs
                    .iter()
                    .map(|g| g.parse::<GraphRef>()?.resolve(s, &pool))
                    .collect::<Result<Vec<_>>>()?;
                let structure_hashes = s.update(&pool, &ids)?;
                Ok(api::UpdateResponse {
                    pool,
                    graphs: ids,
                    structure_hashes,
                })
            })?;
            to_json(&out)
        }
        Command::UnlockHoldout { confirm } => {
            if !confirm {
                return Err(LabError::BadRequest(
                    "unlocking the holdout is irreversible; pass --confirm".into(),
                ));
            }
            let changed = with_session(path, |s| Ok(s.unlock_holdout()))?;
            to_json(&api::Unlocked {
                holdout_unlocked: true,
                changed,
            })
        }
        Command::Save { out } => {
            let session = Session::load(path)?;
            session.save(&out)?;
            to_json(&session.summary())
        }
        Command::Resume { file } => {
            let session = Session::from_file(&SessionFile::read(&file)?)?;
            session.save(path)?;
            to_json(&session.summary())
        }
        Command::History => {
            let session = Session::load(path)?;
            let mut out = String::new();
            for (i, e) in session.history().iter().enumerate() {
                let _ = writeln!(out, "{i:>5}  {}", e.name());
            }
            Ok(out)
        }
        Command::Serve { bind, workers } => {
            let state = Arc::new(AppState::new(
                crate::default_lattice_config()?,
                workers.unwrap_or_else(default_workers),
            ));
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(api::serve(bind, state))?;
            Ok(String::new())
        }
    }
}
