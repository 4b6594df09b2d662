//! Domain types shared by every other module: the unit universe, sparse
//! 0-1 unit vectors, files, agents, items and their identifiers.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matching;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl From<u64> for $name {
            fn from(v: u64) -> Self {
                $name(v)
            }
        }
    };
}

id_type!(
    /// Identifier of a knowledge file.
    FileId
);
id_type!(
    /// Identifier of an agent.
    AgentId
);
id_type!(
    /// Identifier of a knowledge item (a graph node).
    ItemId
);

/// The fixed set of `m` indivisible knowledge units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitUniverse {
    m: usize,
}

impl UnitUniverse {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("unit universe must contain at least one unit"));
        }
        Ok(UnitUniverse { m })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// Builds a canonical vector from an arbitrary collection of indices.
    pub fn vector<I>(&self, active: I) -> Result<UnitVector>
    where
        I: IntoIterator<Item = usize>,
    {
        UnitVector::new(*self, active)
    }

    pub fn zeros(&self) -> UnitVector {
        UnitVector {
            dim: self.m,
            active: Vec::new(),
        }
    }

    pub fn ones(&self) -> UnitVector {
        UnitVector {
            dim: self.m,
            active: (0..self.m as u32).collect(),
        }
    }
}

/// A sparse m-dimensional 0-1 vector, stored as its sorted set of active
/// coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UnitVector {
    dim: usize,
    active: Vec<u32>,
}

impl UnitVector {
    pub fn new<I>(universe: UnitUniverse, active: I) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        let m = universe.dim();
        let mut idx = Vec::new();
        for i in active {
            if i >= m {
                return Err(invalid(format!("unit index {i} out of range for m={m}")));
            }
            idx.push(i as u32);
        }
        idx.sort_unstable();
        idx.dedup();
        Ok(UnitVector { dim: m, active: idx })
    }

    pub fn from_dense(bits: &[bool]) -> Result<Self> {
        let universe = UnitUniverse::new(bits.len())?;
        universe.vector(bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i))
    }

    pub fn to_dense(&self) -> Vec<bool> {
        let mut out = vec![false; self.dim];
        for &i in &self.active {
            out[i as usize] = true;
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sorted active coordinates.
    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active.binary_search(&(i as u32)).is_ok()
    }

    /// ‖v‖², which for a 0-1 vector is the number of active units.
    pub fn norm_sq(&self) -> usize {
        self.active.len()
    }

    pub fn is_zero(&self) -> bool {
        self.active.is_empty()
    }

    /// Inner product with another vector of the same dimension.
    pub fn dot(&self, other: &UnitVector) -> Result<usize> {
        if self.dim != other.dim {
            return Err(invalid(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(sorted_intersection_len(&self.active, &other.active))
    }
}

/// Size of the intersection of two sorted, duplicate-free slices.
pub(crate) fn sorted_intersection_len<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeFile {
    pub id: FileId,
    pub units: UnitVector,
    /// Agent that posted the file; `None` when posted by the system.
    pub poster: Option<AgentId>,
    pub arrival_index: u64,
}

impl KnowledgeFile {
    pub fn new(id: FileId, units: UnitVector) -> Self {
        KnowledgeFile {
            id,
            units,
            poster: None,
            arrival_index: id.0,
        }
    }
}

/// One push of a file to an agent, with the match outcome frozen at push time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PushRecord {
    pub file: FileId,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub interests: UnitVector,
    pub pushed_log: Vec<PushRecord>,
    pub memberships: BTreeSet<ItemId>,
}

impl Agent {
    pub fn new(id: AgentId, interests: UnitVector) -> Self {
        Agent {
            id,
            interests,
            pushed_log: Vec::new(),
            memberships: BTreeSet::new(),
        }
    }

    pub fn pushed(&self) -> usize {
        self.pushed_log.len()
    }

    pub fn matched(&self) -> usize {
        self.pushed_log.iter().filter(|p| p.matched).count()
    }
}

/// A knowledge item: the files voted into it and the agents belonging to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    pub files: BTreeSet<FileId>,
    pub agents: BTreeSet<AgentId>,
    pub founding_file: FileId,
}

impl Item {
    pub fn new<I>(id: ItemId, founding_file: FileId, agents: I) -> Self
    where
        I: IntoIterator<Item = AgentId>,
    {
        Item {
            id,
            files: BTreeSet::from([founding_file]),
            agents: agents.into_iter().collect(),
            founding_file,
        }
    }

    /// Number of files, `k`.
    pub fn k(&self) -> usize {
        self.files.len()
    }

    /// Number of member agents, `n`.
    pub fn n(&self) -> usize {
        self.agents.len()
    }
}

/// Decides whether an agent is interested in a pushed file.
///
/// Implementations must answer the same way for the same (agent, file)
/// pair within a run.
pub trait AgentResponder {
    fn respond(&self, agent: &Agent, file: &KnowledgeFile) -> bool;
}

/// Synthetic agents: interested iff interests and file share a unit.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticResponder;

impl AgentResponder for SyntheticResponder {
    fn respond(&self, agent: &Agent, file: &KnowledgeFile) -> bool {
        matching::match_agent_file(agent, file)
            .map(|r| r.matched)
            .unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn universe_construction() {
        assert_eq!(UnitUniverse::new(54).unwrap().dim(), 54);
        assert_eq!(UnitUniverse::new(1).unwrap().dim(), 1);
        assert!(matches!(
            UnitUniverse::new(0),
            Err(crate::EciError::InvalidArgument(_))
        ));
    }

    #[test]
    fn make_vector_examples() {
        let u = UnitUniverse::new(3).unwrap();
        assert_eq!(u.vector([0, 2]).unwrap().to_dense(), vec![true, false, true]);
        let z = u.vector([]).unwrap();
        assert!(z.is_zero());
        assert_eq!(z.to_dense(), vec![false; 3]);
        assert!(u.vector([5]).is_err());
    }

    #[test]
    fn dense_round_trip_exhaustive() {
        for m in 1..=16usize {
            for mask in 0u32..(1 << m) {
                let bits: Vec<bool> = (0..m).map(|i| mask >> i & 1 == 1).collect();
                let v = UnitVector::from_dense(&bits).unwrap();
                assert_eq!(v.to_dense(), bits);
                assert_eq!(v.norm_sq(), mask.count_ones() as usize);
            }
        }
    }

    #[test]
    fn founding_file_is_member() {
        let item = Item::new(ItemId(0), FileId(7), [AgentId(1), AgentId(2)]);
        assert!(item.files.contains(&item.founding_file));
        assert_eq!((item.k(), item.n()), (1, 2));
    }

    proptest! {
        #[test]
        fn canonical_equality(mut idx in proptest::collection::vec(0usize..40, 0..30)) {
            let u = UnitUniverse::new(40).unwrap();
            let a = u.vector(idx.clone()).unwrap();
            idx.reverse();
            let mut doubled = idx.clone();
            doubled.extend(idx.iter().copied());
            let b = u.vector(doubled).unwrap();
            prop_assert_eq!(&a, &b);
            let again = u.vector(a.active().iter().map(|&i| i as usize)).unwrap();
            prop_assert_eq!(a, again);
        }
    }
}
