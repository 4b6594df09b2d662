use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Agent, KnowledgeFile, UnitVector};

/// Outcome of comparing two unit vectors. `degree` is the raw count of
/// shared units; `matched` holds iff at least one unit is shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub matched: bool,
    pub degree: usize,
}

impl MatchResult {
    fn from_degree(degree: usize) -> Self {
        MatchResult {
            matched: degree >= 1,
            degree,
        }
    }
}

pub fn match_vectors(a: &UnitVector, b: &UnitVector) -> Result<MatchResult> {
    a.dot(b).map(MatchResult::from_degree)
}

pub fn match_agent_file(agent: &Agent, file: &KnowledgeFile) -> Result<MatchResult> {
    match_vectors(&agent.interests, &file.units)
}

/// Match degree between two files, used to gate adding a file into an item.
pub fn match_file_file(f1: &KnowledgeFile, f2: &KnowledgeFile) -> Result<MatchResult> {
    match_vectors(&f1.units, &f2.units)
}
