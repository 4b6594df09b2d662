//! Recommendation quality (SNR) and item cohesion (MSRE) metrics, with the
//! brute-force references they are checked against.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EciError, Result};
use crate::model::{Agent, AgentId, FileId, Item, ItemId, KnowledgeFile, UnitUniverse, UnitVector};
use crate::rng;

/// Matched-to-unmatched odds for one agent. Unbounded when nothing pushed
/// to the agent was unmatched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Odds {
    pub matched: usize,
    pub unmatched: usize,
}

impl Odds {
    pub fn value(&self) -> Option<f64> {
        (self.unmatched > 0).then(|| self.matched as f64 / self.unmatched as f64)
    }

    pub fn exact(&self) -> Option<Ratio<u64>> {
        (self.unmatched > 0).then(|| Ratio::new(self.matched as u64, self.unmatched as u64))
    }

    pub fn is_unbounded(&self) -> bool {
        self.unmatched == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnr {
    pub agent: AgentId,
    pub pushed: usize,
    pub matched: usize,
    /// matched / pushed; `None` for an agent that was never pushed anything.
    pub snr: Option<f64>,
    pub odds: Odds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub per_agent: Vec<AgentSnr>,
    /// Mean of per-agent matched/pushed over agents with at least one push.
    pub system: f64,
    pub eligible_agents: usize,
    pub total_pushed: usize,
    pub total_matched: usize,
}

/// Fraction of the files pushed to `agent` that it matched.
pub fn agent_snr(agent: &Agent) -> Option<f64> {
    let t = agent.pushed();
    (t > 0).then(|| agent.matched() as f64 / t as f64)
}

pub fn system_snr<'a, I>(agents: I) -> Result<SnrReport>
where
    I: IntoIterator<Item = &'a Agent>,
{
    let mut per_agent = Vec::new();
    let (mut sum, mut eligible, mut total_pushed, mut total_matched) = (0.0, 0, 0, 0);
    for a in agents {
        let pushed = a.pushed();
        let matched = a.matched();
        let snr = agent_snr(a);
        if let Some(s) = snr {
            sum += s;
            eligible += 1;
        }
        total_pushed += pushed;
        total_matched += matched;
        per_agent.push(AgentSnr {
            agent: a.id,
            pushed,
            matched,
            snr,
            odds: Odds {
                matched,
                unmatched: pushed - matched,
            },
        });
    }
    if eligible == 0 {
        return Err(EciError::NoData);
    }
    Ok(SnrReport {
        per_agent,
        system: sum / eligible as f64,
        eligible_agents: eligible,
        total_pushed,
        total_matched,
    })
}

/// Expected system SNR of pushing files uniformly at random over this
/// population: the mean, over agents, of the fraction of files each agent
/// matches.
pub fn population_random_snr(agents: &[Agent], files: &[KnowledgeFile]) -> Result<f64> {
    if agents.is_empty() || files.is_empty() {
        return Err(EciError::NoData);
    }
    let mut sum = 0.0;
    for a in agents {
        let mut hits = 0usize;
        for f in files {
            hits += (a.interests.dot(&f.units)? > 0) as usize;
        }
        sum += hits as f64 / files.len() as f64;
    }
    Ok(sum / agents.len() as f64)
}

/// Exact mean squared deviation of 0-1 vectors from their mean.
///
/// With `c_j` of the `k` vectors active at coordinate `j`, the deviations
/// at `j` sum to `c_j (k - c_j) / k`, so the mean over vectors is
/// `Σ_j c_j (k - c_j) / k²`.
pub fn msre_exact(vectors: &[&UnitVector]) -> Result<Ratio<i128>> {
    let k = vectors.len();
    if k == 0 {
        return Err(invalid("msre of an empty file set"));
    }
    let dim = vectors[0].dim();
    let mut counts = vec![0i128; dim];
    for v in vectors {
        if v.dim() != dim {
            return Err(invalid("msre over vectors of mixed dimension"));
        }
        for &i in v.active() {
            counts[i as usize] += 1;
        }
    }
    let k = k as i128;
    let num: i128 = counts.iter().map(|&c| c * (k - c)).sum();
    Ok(Ratio::new(num, k * k))
}

fn ratio_to_f64(r: &Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn item_vectors<'a>(
    item: &Item,
    files: &'a BTreeMap<FileId, KnowledgeFile>,
) -> Result<Vec<&'a UnitVector>> {
    item.files
        .iter()
        .map(|id| {
            files
                .get(id)
                .map(|f| &f.units)
                .ok_or(EciError::MissingVector(id.0))
        })
        .collect()
}

pub fn item_msre(item: &Item, files: &BTreeMap<FileId, KnowledgeFile>) -> Result<f64> {
    Ok(ratio_to_f64(&msre_exact(&item_vectors(item, files)?)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMsre {
    pub item: ItemId,
    pub k: usize,
    pub msre: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsreReport {
    pub per_item: Vec<ItemMsre>,
    pub system: f64,
    pub l: usize,
}

pub fn system_msre<'a, I>(items: I, files: &BTreeMap<FileId, KnowledgeFile>) -> Result<MsreReport>
where
    I: IntoIterator<Item = &'a Item>,
{
    let mut per_item = Vec::new();
    for item in items {
        per_item.push(ItemMsre {
            item: item.id,
            k: item.k(),
            msre: item_msre(item, files)?,
        });
    }
    if per_item.is_empty() {
        return Err(EciError::EmptyGraph);
    }
    let system = per_item.iter().map(|m| m.msre).sum::<f64>() / per_item.len() as f64;
    Ok(MsreReport {
        l: per_item.len(),
        per_item,
        system,
    })
}

/// Exact system MSRE of a set of blocks, each a list of vectors.
pub fn partition_msre_exact(blocks: &[Vec<&UnitVector>]) -> Result<Ratio<i128>> {
    if blocks.is_empty() {
        return Err(EciError::EmptyGraph);
    }
    let mut total = Ratio::from_integer(0i128);
    for b in blocks {
        total += msre_exact(b)?;
    }
    Ok(total / blocks.len() as i128)
}

pub const ORACLE_MAX_FILES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePartition {
    /// Blocks in order of first appearance in the input.
    pub blocks: Vec<Vec<FileId>>,
    /// Block index of each input file (restricted growth string).
    pub assignment: Vec<usize>,
    pub msre: Ratio<i128>,
}

impl OraclePartition {
    pub fn msre_f64(&self) -> f64 {
        ratio_to_f64(&self.msre)
    }
}

/// Exhaustive minimum-MSRE partition over all set partitions of `files`
/// with at most `max_clusters` blocks. Ties resolve to the
/// lexicographically smallest block assignment.
pub fn oracle_min_msre(files: &[KnowledgeFile], max_clusters: usize) -> Result<OraclePartition> {
    let n = files.len();
    if n > ORACLE_MAX_FILES {
        return Err(EciError::TooLarge {
            count: n,
            limit: ORACLE_MAX_FILES,
        });
    }
    if n == 0 || max_clusters == 0 {
        return Err(invalid("oracle needs at least one file and one cluster"));
    }
    let mut rgs = vec![0usize; n];
    let mut best: Option<(Ratio<i128>, Vec<usize>)> = None;
    loop {
        let blocks = 1 + *rgs.iter().max().expect("nonempty");
        let mut grouped: Vec<Vec<&UnitVector>> = vec![Vec::new(); blocks];
        for (f, &b) in files.iter().zip(&rgs) {
            grouped[b].push(&f.units);
        }
        let value = partition_msre_exact(&grouped)?;
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, rgs.clone()));
        }
        if !next_rgs(&mut rgs, max_clusters) {
            break;
        }
    }
    let (msre, assignment) = best.expect("at least one partition");
    let blocks = 1 + assignment.iter().max().copied().unwrap_or(0);
    let mut out = vec![Vec::new(); blocks];
    for (f, &b) in files.iter().zip(&assignment) {
        out[b].push(f.id);
    }
    Ok(OraclePartition {
        blocks: out,
        assignment,
        msre,
    })
}

/// Advances a restricted growth string in lexicographic order, keeping every
/// value below `max_blocks`. Returns false after the last one.
fn next_rgs(rgs: &mut [usize], max_blocks: usize) -> bool {
    for i in (1..rgs.len()).rev() {
        let prefix_max = *rgs[..i].iter().max().expect("nonempty prefix");
        if rgs[i] <= prefix_max && rgs[i] + 1 < max_blocks {
            rgs[i] += 1;
            for r in &mut rgs[i + 1..] {
                *r = 0;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineEstimate {
    /// `1 - (1 - p_file * p_agent)^m`.
    pub closed_form: f64,
    pub monte_carlo: Option<f64>,
    pub stderr: Option<f64>,
    pub trials: u64,
}

/// Match probability of a random (file, agent) pair under independent
/// Bernoulli coordinates, in closed form and by Monte-Carlo.
///
/// Each trial compares uniform draws against the densities, so for a fixed
/// seed the estimate is monotone in both densities.
pub fn random_baseline_snr(
    universe: UnitUniverse,
    p_file: f64,
    p_agent: f64,
    trials: u64,
    seed: u64,
) -> Result<BaselineEstimate> {
    for (name, p) in [("p_file", p_file), ("p_agent", p_agent)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("{name} {p} outside [0, 1]")));
        }
    }
    let m = universe.dim();
    let closed_form = 1.0 - (1.0 - p_file * p_agent).powi(m as i32);
    if trials == 0 {
        return Ok(BaselineEstimate {
            closed_form,
            monte_carlo: None,
            stderr: None,
            trials,
        });
    }
    let mut rng = rng::substream(seed, rng::MONTE_CARLO);
    let mut hits = 0u64;
    for _ in 0..trials {
        let mut hit = false;
        for _ in 0..m {
            let f = rng.gen::<f64>() < p_file;
            let a = rng.gen::<f64>() < p_agent;
            hit |= f && a;
        }
        hits += hit as u64;
    }
    let p = hits as f64 / trials as f64;
    Ok(BaselineEstimate {
        closed_form,
        monte_carlo: Some(p),
        stderr: Some((p * (1.0 - p) / trials as f64).sqrt()),
        trials,
    })
}
