//! Session files.
//!
//! A file is `{version, digest, body}` where `digest` is the SHA-256 of the
//! body's compact JSON with sorted keys. The body carries the event log plus
//! lattice and pool snapshots, so resuming is cheap; [`replay`] rebuilds the
//! same state from the log alone.

use std::collections::BTreeMap;
use std::path::Path;

use pathlattice::lattice::{LatticeSnapshot, LatticeState};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::session::{Event, LoadedData, PoolEntry, Session};

pub const FILE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionFile {
    pub version: u32,
    pub digest: String,
    pub body: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SessionBody {
    id: String,
    history: Vec<Event>,
    lattice: LatticeSnapshot,
    pools: BTreeMap<String, PoolEntry>,
    next_pool: u64,
    holdout_unlocked: bool,
}

fn digest(body: &serde_json::Value) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(body)?)))
}

impl SessionFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        SessionFile::from_json(&std::fs::read_to_string(path)?)
    }

    /// Writes through a temporary file in the same directory.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        std::fs::write(&tmp, self.to_json()?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

impl Session {
    pub fn to_file(&self) -> Result<SessionFile> {
        let body = SessionBody {
            id: self.id().to_string(),
            history: self.history().to_vec(),
            lattice: self.lattice().snapshot(),
            pools: self.pools().clone(),
            next_pool: self.next_pool(),
            holdout_unlocked: self.holdout_unlocked(),
        };
        let body = serde_json::to_value(&body)?;
        Ok(SessionFile {
            version: FILE_VERSION,
            digest: digest(&body)?,
            body,
        })
    }

    /// Restores a session from its snapshots after checking the version,
    /// the digest and the dataset manifests.
    pub fn from_file(file: &SessionFile) -> Result<Self> {
        if file.version != FILE_VERSION {
            return Err(LabError::Version {
                found: file.version,
                expected: FILE_VERSION,
            });
        }
        let actual = digest(&file.body)?;
        if actual != file.digest {
            return Err(LabError::Integrity(format!(
                "digest mismatch: recorded {}, computed {actual}",
                file.digest
            )));
        }
        let body: SessionBody = serde_json::from_value(file.body.clone())?;
        match body.history.first() {
            Some(Event::SessionCreated { id, .. }) if *id == body.id => {}
            _ => return Err(LabError::Integrity("history does not start with this session's creation".into())),
        }
        let unlocks = body.history.iter().filter(|e| matches!(e, Event::HoldoutUnlocked)).count();
        if unlocks != usize::from(body.holdout_unlocked) {
            return Err(LabError::Integrity("holdout flag disagrees with the history".into()));
        }
        let lattice = LatticeState::from_snapshot(&body.lattice)?;
        let mut datasets = BTreeMap::new();
        for e in &body.history {
            if let Event::DataLoaded {
                label,
                csv,
                overrides,
                split,
                manifest,
            } = e
            {
                let loaded = LoadedData::parse(csv, overrides, split)?;
                if loaded.manifest != *manifest {
                    return Err(LabError::Integrity(format!("dataset `{label}` does not match its manifest")));
                }
                datasets.insert(label.clone(), loaded);
            }
        }
        for (id, entry) in &body.pools {
            if !datasets.contains_key(&entry.dataset) {
                return Err(LabError::Integrity(format!("pool `{id}` refers to a missing dataset")));
            }
        }
        Ok(Session::from_parts(
            body.id,
            lattice,
            datasets,
            body.pools,
            body.next_pool,
            body.history,
            body.holdout_unlocked,
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_file()?.write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Session::from_file(&SessionFile::read(path)?)
    }
}

/// Rebuilds a session by re-executing its history. Every recorded fit
/// report must come out identical.
pub fn replay(history: &[Event], workers: usize) -> Result<Session> {
    let mut events = history.iter().enumerate();
    let mut session = match events.next() {
        Some((_, Event::SessionCreated { id, config })) => Session::with_id(id.clone(), *config)?,
        _ => return Err(LabError::Integrity("history does not start with a session creation".into())),
    };
    for (i, event) in events {
        let diverged = |what: &str| LabError::Integrity(format!("replay diverged at event {i}: {what}"));
        match event {
            Event::SessionCreated { .. } => return Err(diverged("second session creation")),
            Event::DataLoaded {
                label,
                csv,
                overrides,
                split,
                manifest,
            } => {
                let loaded = LoadedData::parse(csv, overrides, split)?;
                if loaded.manifest != *manifest {
                    return Err(diverged("dataset manifest"));
                }
                session.insert_dataset(label.clone(), loaded);
                session.push_event(event.clone());
            }
            Event::QuestionPosed {
                pool,
                dataset,
                spec,
                filters,
                config,
            } => {
                session.dataset(dataset)?;
                session.add_pool_replayed(pool.clone(), dataset.clone(), spec.clone(), filters.clone(), *config)?;
            }
            Event::FitRound { pool, report } => {
                let train = session.dataset(&session.pool(pool)?.dataset)?.train().clone();
                let lattice = session.lattice().clone();
                let got = session.pool_mut(pool)?.pool.fit(&lattice, &train, workers)?;
                if got != *report {
                    return Err(diverged("fit report"));
                }
                session.push_event(event.clone());
            }
            Event::UpdateApplied { structures, .. } => {
                session.lattice_mut().update(structures)?;
                session.push_event(event.clone());
            }
            Event::HoldoutUnlocked => {
                if session.holdout_unlocked() {
                    return Err(diverged("second holdout unlock"));
                }
                session.set_holdout_unlocked();
                session.push_event(event.clone());
            }
        }
    }
    Ok(session)
}
