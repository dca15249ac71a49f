//! Running the bundled scenarios and checking them against goldens and
//! hand-derived expectations.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use semrob_core::codec;
use semrob_core::engine::Evaluation;
use semrob_core::model::{Graph, Iri, Term, Triple, Variable};
use semrob_core::runtime::{Domain, Mode};
use semrob_core::scenario::{self, RunOptions, RunReport, Scenario};
use semrob_core::vocab;

pub fn scenario_path(dir: &str, file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(dir).join(file)
}

pub fn all_scenarios() -> Vec<PathBuf> {
    [
        ("fuse2cams", "scenario.toml"),
        ("fuse3sensors", "scenario.toml"),
        ("discovery", "scenario.toml"),
        ("discovery", "no_lidar.toml"),
        ("multi-agent", "scenario.toml"),
    ]
    .iter()
    .map(|(d, f)| scenario_path(d, f))
    .collect()
}

pub fn load(path: &Path) -> Scenario {
    Scenario::load(path).unwrap_or_else(|e| panic!("{}: {e} {:?}", path.display(), e.problems()))
}

pub fn options(mode: Mode, evaluation: Evaluation) -> RunOptions {
    RunOptions { mode, evaluation, ..RunOptions::default() }
}

pub fn run(path: &Path, mode: Mode, evaluation: Evaluation) -> RunReport {
    let report = scenario::run(&load(path), &options(mode, evaluation));
    assert!(report.problems.is_empty(), "{}: {:?}", path.display(), report.problems);
    report
}

/// Builds and runs the domain so tests can inspect node state directly.
pub fn run_domain(path: &Path) -> Domain {
    let s = load(path);
    let mut d = scenario::build_domain(&s, &options(Mode::Reference, Evaluation::Incremental));
    match s.run.duration_ms {
        Some(ms) => d.run_until(ms),
        None => d.run(),
    }
    d
}

fn golden_dir(path: &Path) -> PathBuf {
    path.parent().unwrap().join("golden").join(path.file_stem().unwrap())
}

fn result_files(report: &RunReport) -> BTreeMap<String, String> {
    report.result_files().map(|(k, v)| (k.clone(), v.clone())).collect()
}

fn read_golden(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for sub in ["results", "outputs"] {
        let Ok(entries) = std::fs::read_dir(dir.join(sub)) else { continue };
        for e in entries {
            let e = e.unwrap();
            let name = format!("{sub}/{}", e.file_name().to_string_lossy());
            out.insert(name, std::fs::read_to_string(e.path()).unwrap());
        }
    }
    out
}

/// The brute-force recomputation run is the oracle. With `UPDATE_GOLDEN`
/// set its files replace the golden copies. Incremental runs in both modes
/// must reproduce the goldens byte for byte.
pub fn check_golden(path: &Path) -> Result<(), String> {
    let oracle = result_files(&run(path, Mode::Reference, Evaluation::Recompute));
    let dir = golden_dir(path);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        let _ = std::fs::remove_dir_all(&dir);
        for (name, content) in &oracle {
            let p = dir.join(name);
            std::fs::create_dir_all(p.parent().unwrap()).unwrap();
            std::fs::write(p, content).unwrap();
        }
    }
    let golden = read_golden(&dir);
    if golden.is_empty() {
        return Err(format!("{}: no golden files", dir.display()));
    }
    if oracle != golden {
        return Err(format!("{}: recomputation differs from golden", path.display()));
    }
    for mode in [Mode::Reference, Mode::Threaded] {
        let files = result_files(&run(path, mode, Evaluation::Incremental));
        if files != golden {
            let differing: Vec<_> = golden.keys().chain(files.keys()).filter(|k| golden.get(*k) != files.get(*k)).collect();
            return Err(format!("{}: {mode:?} run differs from golden in {differing:?}", path.display()));
        }
    }
    Ok(())
}

pub fn ex(local: &str) -> Iri {
    Iri::new(format!("{}{local}", vocab::DEFAULT_BASE)).unwrap()
}

fn ssn(local: &str) -> Iri {
    Iri::new(format!("{}{local}", vocab::ssn::NS)).unwrap()
}

/// Splits an outputs file into its `# t=` blocks.
pub fn output_blocks(text: &str) -> Vec<(String, Graph)> {
    let mut blocks: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        match line.strip_prefix("# t=") {
            Some(t) => blocks.push((t.to_string(), String::new())),
            None => {
                let body = &mut blocks.last_mut().expect("header first").1;
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    blocks.into_iter().map(|(t, body)| (t, codec::decode(&body).unwrap())).collect()
}

fn union(blocks: &[(String, Graph)]) -> Graph {
    blocks.iter().flat_map(|(_, g)| g.iter().cloned()).collect()
}

/// `(observation, box, time)` for every detection in a replayed stream.
fn detections(s: &Scenario, topic: &Iri) -> Vec<(Term, Term, Term)> {
    let has_result = ssn("hasResult");
    let result_time = ssn("resultTime");
    let mut out = Vec::new();
    for n in &s.nodes {
        for (t, messages) in &n.replays {
            if t != topic {
                continue;
            }
            for m in messages {
                for r in m.graph.with_predicate(&has_result) {
                    for time in m.graph.with_predicate(&result_time).filter(|x| x.subject() == r.subject()) {
                        out.push((r.subject().clone(), r.object().clone(), time.object().clone()));
                    }
                }
            }
        }
    }
    out
}

fn annotation(b: &Term, relation: &str, time: &Term) -> Triple {
    let inner = Triple::new(b.clone(), ex(relation), ex("myCar")).unwrap();
    Triple::new(inner, ssn("resultTime"), time.clone()).unwrap()
}

/// Every left/right detection pair of one frame yields exactly its two
/// annotations, one emission per pair.
pub fn check_two_camera_fusion() -> Result<(), String> {
    let path = scenario_path("fuse2cams", "scenario.toml");
    let s = load(&path);
    let left = detections(&s, &ex("frontLeftCamNode"));
    let right = detections(&s, &ex("frontRightCamNode"));
    let mut expected: BTreeSet<Graph> = BTreeSet::new();
    for (lo, lb, lt) in &left {
        for (ro, rb, rt) in &right {
            if lo == ro && lt == rt {
                expected.insert([annotation(lb, "frontLeftOf", lt), annotation(rb, "frontRightOf", rt)].into_iter().collect());
            }
        }
    }
    let report = run(&path, Mode::Reference, Evaluation::Incremental);
    let text = report.files.get("outputs/semrobAgent.fuse.nt").ok_or("no fused output")?;
    let emitted: Vec<Graph> = output_blocks(text).into_iter().map(|(_, g)| g).collect();
    if expected.is_empty() {
        return Err("replays contain no synchronized pairs".into());
    }
    if emitted.len() != expected.len() || emitted.iter().cloned().collect::<BTreeSet<_>>() != expected {
        return Err(format!("{} emissions for {} synchronized pairs", emitted.len(), expected.len()));
    }
    check_golden(&path)
}

/// The chained pipeline (fused cameras, then the LiDAR query) and the flat
/// three-stream query produce the same boxes.
pub fn check_pipeline_composition() -> Result<(), String> {
    let path = scenario_path("fuse3sensors", "scenario.toml");
    let report = run(&path, Mode::Reference, Evaluation::Incremental);
    let chained = union(&output_blocks(report.files.get("outputs/semrobAgent.boxes.nt").ok_or("no chained output")?));
    let flat = union(&output_blocks(report.files.get("outputs/semrobAgent.flat.nt").ok_or("no flat output")?));
    if chained.is_empty() {
        return Err("chained pipeline produced nothing".into());
    }
    if chained != flat {
        return Err(format!("chained output has {} triples, flat output {}", chained.len(), flat.len()));
    }
    Ok(())
}

pub const LIDAR_JOIN_MS: u64 = 10_000;

fn lines_by_sensor(text: &str) -> (Vec<&str>, Vec<&str>) {
    text.lines().partition(|l| !l.contains(&format!("?sensor={}", ex("lidar"))))
}

/// The variable selector binds the two cameras and the LiDAR; the LiDAR
/// only contributes once it has joined, and the camera results are the
/// same as in a run where it never joins.
pub fn check_discovery() -> Result<(), String> {
    let with = scenario_path("discovery", "scenario.toml");
    let without = scenario_path("discovery", "no_lidar.toml");
    let key = "results/semrobAgent.obstacles.log";
    let a = run(&with, Mode::Reference, Evaluation::Incremental);
    let b = run(&without, Mode::Reference, Evaluation::Incremental);
    let (cams_a, lidar_a) = lines_by_sensor(a.files.get(key).ok_or("no results")?);
    let (cams_b, lidar_b) = lines_by_sensor(b.files.get(key).ok_or("no results")?);
    if lidar_a.is_empty() || !lidar_b.is_empty() {
        return Err(format!("lidar rows: {} with the join, {} without", lidar_a.len(), lidar_b.len()));
    }
    if cams_a != cams_b {
        return Err("camera rows differ when the LiDAR joins".into());
    }

    let d = run_domain(&with);
    let agent = d.node(&ex("semrobAgent")).unwrap();
    let sensor = Variable::new("sensor").unwrap();
    let mut sensors = BTreeSet::new();
    for r in agent.results() {
        for b in &r.bindings {
            let s = b.get(&sensor).cloned().ok_or("row without ?sensor")?;
            if s == Term::Iri(ex("lidar")) && r.virtual_time < LIDAR_JOIN_MS {
                return Err(format!("LiDAR row at virtual time {} before its join", r.virtual_time));
            }
            sensors.insert(s);
        }
    }
    let wanted: BTreeSet<Term> = ["leftCam", "rightCam", "lidar"].iter().map(|s| Term::Iri(ex(s))).collect();
    if sensors != wanted {
        return Err(format!("selector bound sensors {sensors:?}"));
    }
    Ok(())
}
