//! Graph references on the command line: `3` and `g3` name the member at
//! sorted position 3, `id:17` names the member with stable id 17.

use std::fmt;
use std::str::FromStr;

use crate::error::{LabError, Result};
use crate::session::Session;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphRef {
    Rank(usize),
    Id(u64),
}

impl FromStr for GraphRef {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || LabError::BadRequest(format!("bad graph reference `{s}`: use N, gN or id:N"));
        if let Some(id) = s.strip_prefix("id:") {
            return id.parse().map(GraphRef::Id).map_err(|_| bad());
        }
        s.strip_prefix('g').unwrap_or(s).parse().map(GraphRef::Rank).map_err(|_| bad())
    }
}

impl fmt::Display for GraphRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphRef::Rank(r) => write!(f, "g{r}"),
            GraphRef::Id(id) => write!(f, "id:{id}"),
        }
    }
}

impl GraphRef {
    /// The stable member id this reference points at in `pool`.
    pub fn resolve(self, session: &Session, pool: &str) -> Result<u64> {
        match self {
            GraphRef::Rank(r) => Ok(session.member_at(pool, r)?.id),
            GraphRef::Id(id) => Ok(session.member(pool, id)?.id),
        }
    }
}
