//! Sessions, an HTTP API and a command-line front end over `pathlattice`.
//!
//! A [`Session`] owns one lattice, the datasets loaded next to it and the
//! pools asked of it. Every change is appended to the session's event log,
//! and sessions persist as digest-checked JSON files.

pub mod api;
pub mod cli;
pub mod error;
pub mod persist;
pub mod refs;
pub mod session;
pub mod svg;

pub use error::{ErrorPayload, LabError, Result};
pub use persist::{replay, SessionFile};
pub use session::{Event, PlotKind, PlotRequest, Question, Session, SplitName};

/// Environment variable naming a JSON lattice config used for new sessions.
pub const LATTICE_CONFIG_ENV: &str = "PATHLATTICE_LATTICE_CONFIG";

/// The lattice config from [`LATTICE_CONFIG_ENV`], or the defaults.
pub fn default_lattice_config() -> Result<pathlattice::LatticeConfig> {
    match std::env::var_os(LATTICE_CONFIG_ENV) {
        Some(path) => read_lattice_config(std::path::Path::new(&path)),
        None => Ok(pathlattice::LatticeConfig::default()),
    }
}

pub fn read_lattice_config(path: &std::path::Path) -> Result<pathlattice::LatticeConfig> {
    let config: pathlattice::LatticeConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    config.validate()?;
    Ok(config)
}
