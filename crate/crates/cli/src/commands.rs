//! Subcommand bodies. Each returns the text to print on success.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use eci_core::engine::replay;
use eci_core::export::{dot, edge_list, event_log, parse_event_log};
use eci_core::graph::ItemStore;
use eci_core::metrics::{msre_exact, oracle_min_msre, random_baseline_snr, ORACLE_MAX_FILES};
use eci_core::report::metrics;
use eci_core::synth::{export_population, import_population};
use eci_core::{generate, run_simulation, EciError, FileId, KnowledgeFile, UnitUniverse, UnitVector};

use crate::config::{MetricsFormat, RunConfig};
use crate::CliError;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

fn items_tsv(items: &ItemStore) -> String {
    let mut out = String::from("item\tfounding_file\tfiles\tagents\n");
    for v in items.values() {
        let files: Vec<String> = v.files.iter().map(|f| f.to_string()).collect();
        let agents: Vec<String> = v.agents.iter().map(|a| a.to_string()).collect();
        writeln!(out, "{}\t{}\t{}\t{}", v.id, v.founding_file, files.join(","), agents.join(","))
            .expect("write to string");
    }
    out
}

/// Reads the file sets of an `items.tsv`.
fn parse_items_tsv(text: &str) -> Result<Vec<(u64, Vec<FileId>)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || CliError::Config(format!("items line {}: malformed row", n + 1));
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 3 {
            return Err(bad());
        }
        let id = cols[0].parse().map_err(|_| bad())?;
        let files = cols[2]
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map(FileId).map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        out.push((id, files));
    }
    Ok(out)
}

/// Runs a simulation and writes its artifacts into the output directory.
pub fn simulate(cfg: &RunConfig, format: Option<MetricsFormat>) -> Result<String, CliError> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let pop = generate(&cfg.population)?;
    let population_text = cfg
        .report
        .population
        .then(|| export_population(pop.universe, &pop.agents, &pop.files));
    let sim = run_simulation(pop.universe, pop.agents, pop.files, cfg.t_e, &cfg.engine)?;
    let doc = metrics(&sim, cfg.population.p_file, cfg.population.p_agent)?;

    match format.unwrap_or(cfg.report.format) {
        MetricsFormat::Json => write(dir, "metrics.json", &doc.to_json())?,
        MetricsFormat::Tsv => write(dir, "metrics.tsv", &doc.to_tsv())?,
    };
    write(dir, "edges.tsv", &edge_list(sim.graph()))?;
    write(dir, "events.csv", &event_log(sim.events()))?;
    write(dir, "items.tsv", &items_tsv(sim.items()))?;
    if cfg.report.dot {
        write(dir, "graph.dot", &dot(sim.graph(), sim.items()))?;
    }
    if let Some(text) = population_text {
        write(dir, "population.txt", &text)?;
    }
    if cfg.report.hierarchy {
        let h = sim.graph().mine_hierarchy(sim.items())?;
        let mut out = String::from("# merges: left\tright\tsimilarity\tsize\n");
        for m in &h.merges {
            writeln!(out, "{}\t{}\t{:.6}\t{}", m.left, m.right, m.similarity, m.size).expect("write to string");
        }
        out.push_str("# dominance: above\tbelow\n");
        for (a, b) in &h.dominance {
            writeln!(out, "{a}\t{b}").expect("write to string");
        }
        write(dir, "hierarchy.tsv", &out)?;
    }

    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    let mut summary = String::new();
    writeln!(summary, "agents {} files {} units {}", sim.agents().len(), sim.files().len(), sim.universe().dim())
        .expect("write to string");
    writeln!(summary, "items {} edges {} pushes {}", doc.n_items, doc.n_edges, doc.n_pushes).expect("write to string");
    writeln!(
        summary,
        "system snr {:.4} random baseline {:.4} (closed form {:.4}) uplift {:.2}x",
        doc.system_snr,
        doc.random_baseline_snr,
        doc.random_baseline_closed_form,
        doc.system_snr / doc.random_baseline_snr
    )
    .expect("write to string");
    writeln!(
        summary,
        "initial-spread snr {} item-spread snr {}",
        opt(doc.initial_spread_snr),
        opt(doc.item_spread_snr)
    )
    .expect("write to string");
    writeln!(summary, "system msre {}", opt(doc.system_msre)).expect("write to string");
    write(dir, "summary.txt", &summary)?;
    Ok(summary)
}

fn ratio_f64(r: &num_rational::Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Exhaustive minimum-MSRE partition of the files in a population export,
/// optionally compared against an engine partition from `items.tsv`.
pub fn oracle(files_path: &Path, max_clusters: usize, partition: Option<&Path>) -> Result<String, CliError> {
    let pop = import_population(&read(files_path)?, None).map_err(|e| CliError::Config(e.to_string()))?;
    let files = pop.files;
    if files.len() > ORACLE_MAX_FILES {
        return Err(CliError::Config(format!(
            "{} files exceeds the exhaustive oracle limit of {ORACLE_MAX_FILES}",
            files.len()
        )));
    }
    if max_clusters == 0 {
        return Err(CliError::Config("max-clusters must be at least 1".into()));
    }
    let best = oracle_min_msre(&files, max_clusters)?;
    let mut out = String::new();
    writeln!(out, "files {} max clusters {max_clusters}", files.len()).expect("write to string");
    writeln!(out, "optimal msre {} ({:.6})", best.msre, best.msre_f64()).expect("write to string");
    for (i, b) in best.blocks.iter().enumerate() {
        let ids: Vec<String> = b.iter().map(|f| f.to_string()).collect();
        writeln!(out, "block {i}: {}", ids.join(",")).expect("write to string");
    }
    if let Some(p) = partition {
        let present: BTreeSet<FileId> = files.iter().map(|f| f.id).collect();
        let by_id = |id: FileId| -> &KnowledgeFile { files.iter().find(|f| f.id == id).expect("present") };
        let mut total = num_rational::Ratio::from_integer(0i128);
        let mut blocks = 0i128;
        for (_, fs) in parse_items_tsv(&read(p)?)? {
            let vs: Vec<&UnitVector> = fs.iter().filter(|f| present.contains(f)).map(|&f| &by_id(f).units).collect();
            if vs.is_empty() {
                continue;
            }
            total += msre_exact(&vs)?;
            blocks += 1;
        }
        if blocks == 0 {
            writeln!(out, "engine partition covers none of these files").expect("write to string");
        } else {
            let msre = total / blocks;
            writeln!(out, "engine msre {msre} ({:.6}) over {blocks} items", ratio_f64(&msre)).expect("write to string");
        }
    }
    Ok(out)
}

pub fn baseline(m: usize, p_file: f64, p_agent: f64, trials: u64, seed: u64) -> Result<String, CliError> {
    let universe = UnitUniverse::new(m).map_err(|e| CliError::Config(format!("m: {e}")))?;
    let b = random_baseline_snr(universe, p_file, p_agent, trials, seed).map_err(|e| match e {
        EciError::InvalidArgument(msg) => CliError::Config(msg),
        other => other.into(),
    })?;
    let mut out = format!("closed form {:.6}\n", b.closed_form);
    if let (Some(mc), Some(se)) = (b.monte_carlo, b.stderr) {
        writeln!(out, "monte carlo {mc:.6} stderr {se:.6} trials {}", b.trials).expect("write to string");
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    Tsv,
}

/// Rebuilds the item graph from an event log and population export.
pub fn export_graph(
    events_path: &Path,
    population_path: &Path,
    t_e: f64,
    format: GraphFormat,
) -> Result<String, CliError> {
    if !(0.0..=1.0).contains(&t_e) {
        return Err(CliError::Config(format!("t-e {t_e} outside [0, 1]")));
    }
    let pop = import_population(&read(population_path)?, None).map_err(|e| CliError::Config(e.to_string()))?;
    let events = parse_event_log(&read(events_path)?).map_err(|e| CliError::Config(e.to_string()))?;
    let state = replay(pop.agents, &events, t_e)?;
    Ok(match format {
        GraphFormat::Dot => dot(&state.graph, &state.items),
        GraphFormat::Tsv => edge_list(&state.graph),
    })
}
