//! Reproducible synthetic populations and file streams.
//!
//! Every vector is drawn from its own random substream keyed by kind and
//! index, so a population of `n` agents is a prefix of the population of
//! `n + 1` agents under the same seed.
//!
//! Vectors that come out all-zero are redrawn (an agent with no interests
//! can never match anything). Redrawing conditions on a nonzero vector,
//! which would inflate the mean norm, so the per-coordinate probabilities
//! are scaled down beforehand until the conditional mean norm equals the
//! target `p * m`.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{Agent, AgentId, FileId, KnowledgeFile, UnitUniverse, UnitVector};
use crate::rng;

pub const MAX_RESAMPLE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Structure {
    Independent,
    /// Units are split into `k_clusters` contiguous blocks; each vector gets
    /// a home block whose units are `intra_boost` times as likely as the
    /// base density, with the remaining units scaled down so the expected
    /// norm is unchanged. Boosts of `m / block_size` or more confine a
    /// vector to its home block.
    Clustered { k_clusters: usize, intra_boost: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub m: usize,
    pub n_agents: usize,
    pub n_files: usize,
    /// Per-unit density of agent interests: target mean ‖a‖² divided by m.
    pub p_agent: f64,
    /// Per-unit density of files: target mean ‖f‖² divided by m.
    pub p_file: f64,
    pub structure: Structure,
    pub seed: u64,
}

impl Default for PopulationSpec {
    /// 1000 agents, 54 units and 953 files with mean norms 1.543 and 3.178.
    fn default() -> Self {
        PopulationSpec {
            m: 54,
            n_agents: 1000,
            n_files: 953,
            p_agent: 1.543 / 54.0,
            p_file: 3.178 / 54.0,
            structure: Structure::Independent,
            seed: 0,
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        if self.n_agents == 0 || self.n_files == 0 {
            return Err(invalid("n_agents and n_files must be at least 1"));
        }
        for (name, p) in [("p_agent", self.p_agent), ("p_file", self.p_file)] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(invalid(format!("{name} {p} outside (0, 1]")));
            }
        }
        if let Structure::Clustered {
            k_clusters,
            intra_boost,
        } = self.structure
        {
            if k_clusters == 0 || k_clusters > self.m {
                return Err(invalid(format!(
                    "k_clusters {k_clusters} must be in 1..={}",
                    self.m
                )));
            }
            if intra_boost.is_nan() || intra_boost < 1.0 {
                return Err(invalid(format!("intra_boost {intra_boost} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// Per-unit activation probabilities for one vector kind and home block.
#[derive(Debug, Clone)]
struct Profile {
    probs: Vec<f64>,
}

impl Profile {
    fn build(m: usize, p: f64, structure: Structure, home: Option<usize>) -> Result<Profile> {
        let mut probs = vec![p; m];
        if let (Structure::Clustered { k_clusters, intra_boost }, Some(h)) = (structure, home) {
            let range = block_range(m, k_clusters, h);
            let b = range.len();
            if b < m {
                // a boost of m/b already puts all mass in the home block
                let boost = intra_boost.min(m as f64 / b as f64);
                let inside = p * boost;
                let outside = (p * (m as f64 - b as f64 * boost) / (m - b) as f64).max(0.0);
                if inside > 1.0 {
                    return Err(invalid(format!(
                        "density {p} with boost {intra_boost} cannot keep the expected norm over {b} of {m} units"
                    )));
                }
                for (i, q) in probs.iter_mut().enumerate() {
                    *q = if range.contains(&i) { inside } else { outside };
                }
            }
        }
        let target = p * m as f64;
        let scale = calibrate(&probs, target)?;
        for q in &mut probs {
            *q = (*q * scale).min(1.0);
        }
        Ok(Profile { probs })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| rng.gen::<f64>() < **p)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Expected norm conditioned on the vector being nonzero.
fn conditional_norm(probs: &[f64], scale: f64) -> f64 {
    let (mut mean, mut all_zero) = (0.0, 1.0);
    for p in probs {
        let q = (p * scale).min(1.0);
        mean += q;
        all_zero *= 1.0 - q;
    }
    if all_zero >= 1.0 {
        return 1.0;
    }
    mean / (1.0 - all_zero)
}

/// Scale factor on `probs` making the nonzero-conditioned mean norm hit
/// `target`. Targets below one unit cannot be met by nonzero vectors; the
/// unscaled profile is used for those.
fn calibrate(probs: &[f64], target: f64) -> Result<f64> {
    let m = probs.len() as f64;
    if target > m + 1e-12 {
        return Err(invalid(format!("expected norm {target} exceeds m={m}")));
    }
    if target <= 1.0 {
        return Ok(1.0);
    }
    let max_p = probs.iter().cloned().fold(0.0, f64::max);
    let mut hi = 1.0 / max_p;
    if conditional_norm(probs, hi) < target - 1e-9 {
        return Err(invalid(format!("expected norm {target} is unachievable")));
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if conditional_norm(probs, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Units of block `h` when `m` units are split into `k` near-equal
/// contiguous blocks.
pub fn block_range(m: usize, k: usize, h: usize) -> std::ops::Range<usize> {
    (h * m / k)..((h + 1) * m / k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub universe: UnitUniverse,
    pub agents: Vec<Agent>,
    pub files: Vec<KnowledgeFile>,
    /// Home block of each agent and file in clustered mode.
    pub agent_homes: Vec<Option<usize>>,
    pub file_homes: Vec<Option<usize>>,
}

struct Drawer {
    m: usize,
    p: f64,
    structure: Structure,
    stream: u64,
    seed: u64,
    profiles: Vec<Option<Profile>>,
}

impl Drawer {
    fn new(spec: &PopulationSpec, p: f64, stream: u64) -> Self {
        let homes = match spec.structure {
            Structure::Independent => 1,
            Structure::Clustered { k_clusters, .. } => k_clusters,
        };
        Drawer {
            m: spec.m,
            p,
            structure: spec.structure,
            stream,
            seed: spec.seed,
            profiles: vec![None; homes],
        }
    }

    fn draw(&mut self, index: usize) -> Result<(Vec<usize>, Option<usize>)> {
        let mut rng = rng::substream(self.seed, self.stream | index as u64);
        let home = match self.structure {
            Structure::Independent => None,
            Structure::Clustered { k_clusters, .. } => Some(rng.gen_range(0..k_clusters)),
        };
        let slot = home.unwrap_or(0);
        if self.profiles[slot].is_none() {
            self.profiles[slot] = Some(Profile::build(self.m, self.p, self.structure, home)?);
        }
        let profile = self.profiles[slot].as_ref().expect("built above");
        for _ in 0..=MAX_RESAMPLE {
            let v = profile.draw(&mut rng);
            if !v.is_empty() {
                return Ok((v, home));
            }
        }
        log::warn!("vector {index} still empty after {MAX_RESAMPLE} redraws; keeping it");
        Ok((Vec::new(), home))
    }
}

pub fn generate(spec: &PopulationSpec) -> Result<Population> {
    spec.validate()?;
    let universe = UnitUniverse::new(spec.m)?;
    let mut agents = Vec::with_capacity(spec.n_agents);
    let mut agent_homes = Vec::with_capacity(spec.n_agents);
    let mut drawer = Drawer::new(spec, spec.p_agent, rng::AGENTS);
    for i in 0..spec.n_agents {
        let (idx, home) = drawer.draw(i)?;
        agents.push(Agent::new(AgentId(i as u64), universe.vector(idx)?));
        agent_homes.push(home);
    }
    let mut files = Vec::with_capacity(spec.n_files);
    let mut file_homes = Vec::with_capacity(spec.n_files);
    let mut drawer = Drawer::new(spec, spec.p_file, rng::FILES);
    for i in 0..spec.n_files {
        let (idx, home) = drawer.draw(i)?;
        files.push(KnowledgeFile::new(FileId(i as u64), universe.vector(idx)?));
        file_homes.push(home);
    }
    Ok(Population {
        universe,
        agents,
        files,
        agent_homes,
        file_homes,
    })
}

fn write_record(out: &mut String, kind: &str, id: u64, v: &UnitVector) {
    write!(out, "{kind},{id},").expect("write to string");
    let idx: Vec<String> = v.active().iter().map(u32::to_string).collect();
    out.push_str(&idx.join(","));
    out.push('\n');
}

/// Serializes a population as `kind,id,i1,i2,...` lines after a `# m=<m>`
/// header; agents first, then files in arrival order.
pub fn export_population(universe: UnitUniverse, agents: &[Agent], files: &[KnowledgeFile]) -> String {
    let mut out = format!("# m={}\n", universe.dim());
    for a in agents {
        write_record(&mut out, "agent", a.id.0, &a.interests);
    }
    for f in files {
        write_record(&mut out, "file", f.id.0, &f.units);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedPopulation {
    pub universe: UnitUniverse,
    pub agents: Vec<Agent>,
    pub files: Vec<KnowledgeFile>,
}

/// Parses the output of [`export_population`]. `m` is required when the
/// text has no `# m=` header.
pub fn import_population(text: &str, m: Option<usize>) -> Result<ImportedPopulation> {
    let mut dim = m;
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("m=") {
                dim = Some(
                    v.trim()
                        .parse()
                        .map_err(|_| invalid(format!("line {}: bad m {v:?}", n + 1)))?,
                );
            }
            continue;
        }
        records.push((n + 1, line));
    }
    let universe = UnitUniverse::new(dim.ok_or_else(|| invalid("population has no `# m=` header"))?)?;
    let mut agents = Vec::new();
    let mut files = Vec::new();
    for (n, line) in records {
        let mut fields = line.split(',');
        let kind = fields.next().unwrap_or_default();
        let id: u64 = fields
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| invalid(format!("line {n}: missing or bad id")))?;
        let idx = fields
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| invalid(format!("line {n}: bad unit index {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let v = universe
            .vector(idx)
            .map_err(|e| invalid(format!("line {n}: {e}")))?;
        match kind {
            "agent" => agents.push(Agent::new(AgentId(id), v)),
            "file" => files.push(KnowledgeFile::new(FileId(id), v)),
            other => return Err(invalid(format!("line {n}: unknown record kind {other:?}"))),
        }
    }
    Ok(ImportedPopulation {
        universe,
        agents,
        files,
    })
}
