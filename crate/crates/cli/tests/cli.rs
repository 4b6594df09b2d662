//! End-to-end runs of the `eci` binary and config handling.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use eci_cli::{MetricsFormat, RunConfig};
use eci_core::Structure;

fn eci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eci"))
        .args(args)
        .output()
        .expect("run eci")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = r#"
seed = 5
t_e = 0.2

[population]
n_agents = 200
n_files = 120
structure = { kind = "clustered", k_clusters = 6, intra_boost = 6.0 }

[engine]
n_init = 15
edge_propagation = true

[report]
hierarchy = true
"#;

#[test]
fn empty_config_takes_defaults() {
    assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
}

#[test]
fn config_round_trips() {
    let cfg = RunConfig::parse(SMALL).unwrap();
    assert_eq!(cfg.population.seed, 5);
    assert_eq!(cfg.engine.rng_seed, 5);
    assert_eq!(cfg.t_e, 0.2);
    assert!(cfg.engine.edge_propagation && cfg.report.hierarchy);
    assert_eq!(cfg.report.format, MetricsFormat::Json);
    assert_eq!(
        cfg.population.structure,
        Structure::Clustered { k_clusters: 6, intra_boost: 6.0 }
    );
    let again = RunConfig::parse(&cfg.to_toml()).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn strict_parsing_names_the_field() {
    let err = RunConfig::parse("[engine]\nrho = 0.5\nrhoo = 1\n").unwrap_err();
    let msg = err.to_string();
    assert_eq!(err.exit_code(), 2);
    assert!(msg.contains("rhoo") && msg.contains("line 3"), "{msg}");

    let err = RunConfig::parse("[population]\nm = 0\n").unwrap_err();
    assert!(err.to_string().contains("population") && err.to_string().contains("m must be"));

    let err = RunConfig::parse("t_e = 1.5\n").unwrap_err();
    assert!(err.to_string().contains("t_e"));
    assert!(RunConfig::parse("[engine]\nrho = 0\n").is_err());
}

fn simulate(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    eci(&args)
}

#[test]
fn simulate_writes_byte_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, SMALL).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = simulate(&config, &a, &[]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(simulate(&config, &b, &[]).status.success());
    assert!(stdout(&first).contains("system snr"));

    let names = [
        "metrics.json",
        "edges.tsv",
        "events.csv",
        "items.tsv",
        "graph.dot",
        "population.txt",
        "hierarchy.tsv",
        "summary.txt",
    ];
    for name in names {
        let x = fs::read(a.join(name)).unwrap();
        assert!(!x.is_empty(), "{name} empty");
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name} differs");
    }

    // a different seed changes the run
    let c = dir.path().join("c");
    assert!(simulate(&config, &c, &["--seed", "6", "--format", "tsv"]).status.success());
    assert!(c.join("metrics.tsv").exists());
    assert_ne!(fs::read(a.join("events.csv")).unwrap(), fs::read(c.join("events.csv")).unwrap());

    // the graph rebuilt from the event log equals the one written
    let out = eci(&[
        "export-graph",
        "--events",
        a.join("events.csv").to_str().unwrap(),
        "--population",
        a.join("population.txt").to_str().unwrap(),
        "--t-e",
        "0.2",
        "--format",
        "tsv",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), fs::read_to_string(a.join("edges.tsv")).unwrap());
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[population]\nm = 0\n").unwrap();
    let out = simulate(&config, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m must be"));

    let out = eci(&["simulate", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

fn write_files(dir: &Path, sets: &[&[usize]]) -> std::path::PathBuf {
    let mut text = String::from("# m=8\n");
    for (i, s) in sets.iter().enumerate() {
        let idx: Vec<String> = s.iter().map(usize::to_string).collect();
        text.push_str(&format!("file,{i},{}\n", idx.join(",")));
    }
    let path = dir.join("files.txt");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn oracle_reports_exact_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let planted: [&[usize]; 6] = [&[0, 1, 2], &[0, 1], &[1, 2], &[5, 6, 7], &[5, 6], &[6, 7]];
    let path = write_files(dir.path(), &planted);
    let out = eci(&["oracle", "--files", path.to_str().unwrap(), "--max-clusters", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    // each planted cluster has counts (2, 3, 2) over 3 files: (2 + 0 + 2) / 9
    assert!(text.contains("optimal msre 4/9"), "{text}");
    assert!(text.contains("block 0: 0,1,2") && text.contains("block 1: 3,4,5"));

    let items = dir.path().join("items.tsv");
    fs::write(&items, "item\tfounding_file\tfiles\tagents\n0\t0\t0,1,2,3,4,5\t0\n").unwrap();
    let out = eci(&[
        "oracle",
        "--files",
        path.to_str().unwrap(),
        "--max-clusters",
        "2",
        "--partition",
        items.to_str().unwrap(),
    ]);
    assert!(stdout(&out).contains("engine msre"), "{}", stdout(&out));

    let one = write_files(dir.path(), &[&[1, 2]]);
    assert!(stdout(&eci(&["oracle", "--files", one.to_str().unwrap()])).contains("optimal msre 0 "));

    let many: Vec<&[usize]> = vec![&[0]; 11];
    let eleven = write_files(dir.path(), &many);
    assert_eq!(eci(&["oracle", "--files", eleven.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn baseline_subcommand() {
    let out = eci(&["baseline", "--trials", "20000"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("closed form 0.0868"), "{text}");
    assert!(text.contains("monte carlo"));

    let out = eci(&["baseline", "--p-file", "1", "--p-agent", "1", "--trials", "0"]);
    assert_eq!(stdout(&out), "closed form 1.000000\n");

    assert_eq!(eci(&["baseline", "--p-agent", "1.5"]).status.code(), Some(2));
}

#[test]
fn shipped_config_parses() {
    let text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/full_scale.toml")).unwrap();
    let cfg = RunConfig::parse(&text).unwrap();
    assert_eq!(cfg.population, eci_core::PopulationSpec {
        structure: Structure::Clustered { k_clusters: 6, intra_boost: 6.0 },
        seed: 1,
        ..Default::default()
    });
    assert_eq!(cfg.engine, eci_core::EngineConfig { rng_seed: 1, ..Default::default() });
}
