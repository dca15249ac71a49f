//! Scenario files: nodes, ontology, knowledge, queries and replay data run
//! deterministically on a simulated domain.
//!
//! A scenario is a TOML document. Relative paths inside it are resolved
//! against the directory holding the file.

mod replay;
mod schema;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::codec;
use crate::engine::{EngineMetrics, Evaluation};
use crate::federation::FederationError;
use crate::model::{Graph, Iri, Term, Triple};
use crate::query::{parse, PrefixMap, Query, ResultForm};
use crate::reasoner::{Closure, Ontology};
use crate::runtime::{Domain, DomainConfig, DomainMetrics, LatencyModel, Mode, NodeSpec};
use crate::vocab;

pub use replay::{parse_replay, write_replay, ReplayMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ProblemKind {
    Scenario,
    Query,
}

/// Something wrong with a scenario, found while loading or running it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub kind: ProblemKind,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("{} problem(s) found", .0.len())]
    Problems(Vec<Problem>),
    #[error("cannot write {path}: {reason}")]
    Output { path: PathBuf, reason: String },
}

impl ScenarioError {
    pub fn problems(&self) -> &[Problem] {
        match self {
            Self::Problems(p) => p,
            Self::Output { .. } => &[],
        }
    }

    /// 1 for scenario or I/O problems, 2 when only queries are at fault.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Problems(p) if p.iter().all(|p| p.kind == ProblemKind::Query) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSettings {
    /// Stop at this virtual time; run until quiescent when absent.
    pub duration_ms: Option<u64>,
    pub seed: u64,
    pub service_timeout_ms: u64,
    pub generated_by: Iri,
    pub latency: LatencyModel,
}

#[derive(Debug, Clone)]
pub struct QueryDef {
    pub name: String,
    pub query: Query,
    /// Defaults to the node's join time.
    pub deploy_ms: Option<u64>,
    /// Write CONSTRUCT output messages to the outputs directory.
    pub tee: bool,
}

#[derive(Debug, Clone)]
pub struct NodeDef {
    pub spec: NodeSpec,
    pub join_ms: u64,
    pub leave_ms: Option<u64>,
    pub replays: Vec<(Iri, Vec<ReplayMessage>)>,
    pub queries: Vec<QueryDef>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub path: PathBuf,
    pub prefixes: PrefixMap,
    pub ontology: Ontology,
    pub run: RunSettings,
    pub nodes: Vec<NodeDef>,
}

impl Scenario {
    /// Loads a scenario, failing with every problem found.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let (scenario, problems) = read(path);
        match scenario {
            Some(s) if problems.is_empty() => Ok(s),
            _ => Err(ScenarioError::Problems(problems)),
        }
    }
}

/// Parses the scenario, its queries and replay files without running
/// anything. An empty report means the scenario is valid.
pub fn validate(path: &Path) -> Vec<Problem> {
    read(path).1
}

struct Loader {
    dir: PathBuf,
    prefixes: PrefixMap,
    problems: Vec<Problem>,
}

impl Loader {
    fn problem(&mut self, kind: ProblemKind, location: impl Into<String>, message: impl Into<String>) {
        self.problems.push(Problem { kind, location: location.into(), message: message.into() });
    }

    fn read_file(&mut self, path: &Path) -> Option<String> {
        let full = self.dir.join(path);
        match fs::read_to_string(&full) {
            Ok(text) => Some(text),
            Err(e) => {
                self.problem(ProblemKind::Scenario, full.display().to_string(), e.to_string());
                None
            }
        }
    }

    fn graph_file(&mut self, path: &Path) -> Option<Graph> {
        let text = self.read_file(path)?;
        match codec::decode(&text) {
            Ok(g) => Some(g),
            Err(e) => {
                let location = format!("{}:{}", self.dir.join(path).display(), e.line);
                self.problem(ProblemKind::Scenario, location, e.reason);
                None
            }
        }
    }

    /// `prefix:local`, or any term in codec syntax.
    fn term(&self, text: &str) -> Result<Term, String> {
        let text = text.trim();
        if text.starts_with('<') || text.starts_with('"') || text.starts_with("_:") {
            return codec::decode_term(text).map_err(|e| e.reason);
        }
        let (prefix, local) = text.split_once(':').ok_or_else(|| format!("{text:?} is not a prefixed name"))?;
        self.prefixes
            .expand(prefix, local)
            .map(Term::Iri)
            .ok_or_else(|| format!("cannot expand {text:?}"))
    }

    fn iri(&mut self, location: &str, text: &str) -> Option<Iri> {
        match self.term(text) {
            Ok(Term::Iri(iri)) => Some(iri),
            Ok(other) => {
                self.problem(ProblemKind::Scenario, location, format!("{other} is not an IRI"));
                None
            }
            Err(e) => {
                self.problem(ProblemKind::Scenario, location, e);
                None
            }
        }
    }

    fn triple(&mut self, location: &str, parts: &[String; 3]) -> Option<Triple> {
        let s = self.term(&parts[0]);
        let p = self.iri(location, &parts[1]);
        let o = self.term(&parts[2]);
        match (s, p, o) {
            (Ok(s), Some(p), Ok(o)) => match Triple::new(s, p, o) {
                Ok(t) => Some(t),
                Err(e) => {
                    self.problem(ProblemKind::Scenario, location, e.to_string());
                    None
                }
            },
            (Err(e), _, _) | (_, _, Err(e)) => {
                self.problem(ProblemKind::Scenario, location, e);
                None
            }
            _ => None,
        }
    }
}

fn read(path: &Path) -> (Option<Scenario>, Vec<Problem>) {
    let mut loader = Loader {
        dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        prefixes: PrefixMap::standard(),
        problems: Vec::new(),
    };
    let location = path.display().to_string();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            loader.problem(ProblemKind::Scenario, location, e.to_string());
            return (None, loader.problems);
        }
    };
    let file: schema::ScenarioFile = match toml::from_str(&text) {
        Ok(f) => f,
        Err(e) => {
            loader.problem(ProblemKind::Scenario, location, e.message().to_string());
            return (None, loader.problems);
        }
    };
    for (prefix, ns) in &file.prefixes {
        loader.prefixes.insert(prefix.clone(), ns.clone());
    }

    let mut ontology = Ontology::new();
    if let Some(p) = &file.ontology.file {
        if let Some(g) = loader.graph_file(p) {
            ontology.add_graph(&g);
        }
    }
    for (i, [sub, sup]) in file.ontology.sub_property_of.iter().enumerate() {
        let at = format!("ontology.sub_property_of[{i}]");
        if let (Some(a), Some(b)) = (loader.iri(&at, sub), loader.iri(&at, sup)) {
            ontology.add_sub_property(a, b);
        }
    }
    for (i, [sub, sup]) in file.ontology.sub_class_of.iter().enumerate() {
        let at = format!("ontology.sub_class_of[{i}]");
        if let (Some(a), Some(b)) = (loader.iri(&at, sub), loader.iri(&at, sup)) {
            ontology.add_sub_class(a, b);
        }
    }

    let run = run_settings(&mut loader, &file.run);
    let mut nodes = Vec::new();
    let mut ids = BTreeSet::new();
    let mut topics: BTreeMap<Iri, String> = BTreeMap::new();
    for (i, section) in file.nodes.iter().enumerate() {
        let at = format!("node[{i}]");
        let Some(node) = node_def(&mut loader, &at, section) else {
            continue;
        };
        if !ids.insert(node.spec.id.clone()) {
            loader.problem(ProblemKind::Scenario, &at, format!("duplicate node id {}", node.spec.id));
        }
        for s in &node.spec.streams {
            if let Some(other) = topics.insert(s.topic.clone(), at.clone()) {
                loader.problem(ProblemKind::Scenario, &at, format!("topic {} is also declared by {other}", s.topic));
            }
            if vocab::sys::is_reserved(&s.topic) {
                loader.problem(ProblemKind::Scenario, &at, format!("topic {} is reserved", s.topic));
            }
        }
        nodes.push(node);
    }

    let scenario = Scenario {
        path: path.to_path_buf(),
        prefixes: loader.prefixes,
        ontology,
        run,
        nodes,
    };
    (Some(scenario), loader.problems)
}

fn run_settings(loader: &mut Loader, run: &schema::RunSection) -> RunSettings {
    let generated_by = run
        .generated_by
        .as_deref()
        .and_then(|g| loader.iri("run.generated_by", g))
        .unwrap_or_else(|| DomainConfig::default().generated_by);
    let mut links = BTreeMap::new();
    for (i, link) in run.latency.links.iter().enumerate() {
        let at = format!("run.latency.link[{i}]");
        if let (Some(a), Some(b)) = (loader.iri(&at, &link.from), loader.iri(&at, &link.to)) {
            if link.symmetric {
                links.insert((b.clone(), a.clone()), link.ms);
            }
            links.insert((a, b), link.ms);
        }
    }
    RunSettings {
        duration_ms: run.duration_ms,
        seed: run.seed,
        service_timeout_ms: run.service_timeout_ms,
        generated_by,
        latency: LatencyModel { default_ms: run.latency.default_ms, jitter_ms: run.latency.jitter_ms, links },
    }
}

fn node_def(loader: &mut Loader, at: &str, section: &schema::NodeSection) -> Option<NodeDef> {
    let id = loader.iri(&format!("{at}.id"), &section.id)?;
    let mut spec = NodeSpec::new(id);
    if let Some(p) = &section.knowledge {
        spec.knowledge = loader.graph_file(p).unwrap_or_default();
    }
    if section.leave_ms.is_some_and(|l| l < section.join_ms) {
        loader.problem(ProblemKind::Scenario, at, "leave_ms is earlier than join_ms");
    }
    let mut replays = Vec::new();
    for (j, s) in section.streams.iter().enumerate() {
        let at = format!("{at}.stream[{j}]");
        let Some(topic) = loader.iri(&format!("{at}.topic"), &s.topic) else {
            continue;
        };
        let mut metadata = Graph::new();
        for (k, parts) in s.metadata.iter().enumerate() {
            if let Some(t) = loader.triple(&format!("{at}.metadata[{k}]"), parts) {
                metadata.insert(t);
            }
        }
        if let Some(p) = &s.metadata_file {
            if let Some(g) = loader.graph_file(p) {
                metadata.extend_from(&g);
            }
        }
        if let Some(p) = &s.replay {
            if let Some(text) = loader.read_file(p) {
                let (messages, problems) = parse_replay(&text);
                for (line, reason) in problems {
                    let location = format!("{}:{line}", loader.dir.join(p).display());
                    loader.problem(ProblemKind::Scenario, location, reason);
                }
                replays.push((topic.clone(), messages));
            }
        }
        spec = spec.with_stream(topic, metadata);
    }
    let mut queries = Vec::new();
    let mut names = BTreeSet::new();
    for (j, q) in section.queries.iter().enumerate() {
        let at = format!("{at}.query[{j}]");
        if !names.insert(q.name.clone()) {
            loader.problem(ProblemKind::Scenario, &at, format!("duplicate query name {:?}", q.name));
        }
        let (text, location) = match (&q.file, &q.text) {
            (Some(p), None) => match loader.read_file(p) {
                Some(t) => (t, loader.dir.join(p).display().to_string()),
                None => continue,
            },
            (None, Some(t)) => (t.clone(), at.clone()),
            _ => {
                loader.problem(ProblemKind::Scenario, &at, "exactly one of `file` and `text` is required");
                continue;
            }
        };
        match parse(&text, &loader.prefixes) {
            Ok(query) => queries.push(QueryDef { name: q.name.clone(), query, deploy_ms: q.deploy_ms, tee: q.tee }),
            Err(e) => loader.problem(ProblemKind::Query, location, e.to_string()),
        }
    }
    Some(NodeDef { spec, join_ms: section.join_ms, leave_ms: section.leave_ms, replays, queries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Overrides the scenario's seed.
    pub seed: Option<u64>,
    pub mode: Mode,
    pub evaluation: Evaluation,
    /// Report concrete stream selectors nothing publishes at the end.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryMetrics {
    pub node: String,
    pub query: String,
    pub emissions: usize,
    pub engine: EngineMetrics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub domain: DomainMetrics,
    pub queries: Vec<QueryMetrics>,
}

/// Files produced by a run, keyed by path relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub files: BTreeMap<String, String>,
    pub metrics: RunMetrics,
    pub problems: Vec<Problem>,
}

impl RunReport {
    pub fn write(&self, dir: &Path) -> Result<(), ScenarioError> {
        let out = |path: &Path, e: std::io::Error| ScenarioError::Output { path: path.to_path_buf(), reason: e.to_string() };
        for (name, content) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| out(parent, e))?;
            }
            fs::write(&path, content).map_err(|e| out(&path, e))?;
        }
        fs::create_dir_all(dir).map_err(|e| out(dir, e))?;
        let path = dir.join("metrics.json");
        let json = serde_json::to_string_pretty(&self.metrics).expect("metrics serialize");
        fs::write(&path, json + "\n").map_err(|e| out(&path, e))
    }

    /// `results/*.log` and `outputs/*.nt` only.
    pub fn result_files(&self) -> impl Iterator<Item = (&String, &String)> {
        self.files.iter().filter(|(k, _)| k.starts_with("results/") || k.starts_with("outputs/"))
    }
}

fn local_name(iri: &Iri) -> &str {
    let s = iri.as_str();
    s.rsplit(['#', '/']).next().filter(|l| !l.is_empty()).unwrap_or(s)
}

/// Builds the domain for `scenario` with every join, leave, deployment and
/// replayed emission scheduled.
pub fn build_domain(scenario: &Scenario, options: &RunOptions) -> Domain {
    let config = DomainConfig {
        seed: options.seed.unwrap_or(scenario.run.seed),
        latency: scenario.run.latency.clone(),
        service_timeout_ms: scenario.run.service_timeout_ms,
        mode: options.mode,
        evaluation: options.evaluation,
        generated_by: scenario.run.generated_by.clone(),
    };
    let mut domain = Domain::new(config, Arc::new(Closure::new(&scenario.ontology)));
    for n in &scenario.nodes {
        domain.add_node(n.spec.clone()).expect("node ids checked at load");
    }
    for n in &scenario.nodes {
        domain.schedule_join(n.join_ms, &n.spec.id).expect("node exists");
    }
    for n in &scenario.nodes {
        for q in &n.queries {
            let at = q.deploy_ms.unwrap_or(n.join_ms);
            domain.schedule_deploy(at, &n.spec.id, &q.name, q.query.clone()).expect("node exists");
        }
    }
    for n in &scenario.nodes {
        for (topic, messages) in &n.replays {
            for m in messages {
                domain
                    .schedule_emit(m.emit_ms, &n.spec.id, topic.clone(), m.graph.clone())
                    .expect("node exists");
            }
        }
    }
    for n in &scenario.nodes {
        if let Some(at) = n.leave_ms {
            domain.schedule_leave(at, &n.spec.id).expect("node exists");
        }
    }
    domain
}

/// Runs `scenario` to completion and collects its results.
pub fn run(scenario: &Scenario, options: &RunOptions) -> RunReport {
    let mut domain = build_domain(scenario, options);
    match scenario.run.duration_ms {
        Some(d) => domain.run_until(d),
        None => domain.run(),
    }
    report(scenario, &domain, options)
}

fn report(scenario: &Scenario, domain: &Domain, options: &RunOptions) -> RunReport {
    let mut files = BTreeMap::new();
    let mut queries = Vec::new();
    let mut problems = Vec::new();
    for def in &scenario.nodes {
        let node = domain.node(&def.spec.id).expect("node exists");
        for e in node.errors() {
            problems.push(Problem { kind: ProblemKind::Query, location: node.id().to_string(), message: e.clone() });
        }
        for q in node.queries() {
            let tee = def.queries.iter().find(|d| d.name == q.name).is_some_and(|d| d.tee);
            let stem = format!("{}.{}", local_name(node.id()), q.name);
            let records: Vec<_> = node.results().iter().filter(|r| r.query == q.iri).collect();
            match &q.query().form {
                ResultForm::Select(_) => {
                    let mut log = String::new();
                    for r in &records {
                        let time = r.at_time.map_or("-".to_string(), |t| t.to_string());
                        for b in &r.bindings {
                            log.push_str(&format!("{}\t{time}", q.iri));
                            for (var, term) in b.iter() {
                                log.push_str(&format!("\t?{}={term}", var.name()));
                            }
                            log.push('\n');
                        }
                    }
                    files.insert(format!("results/{stem}.log"), log);
                }
                ResultForm::Construct(_) if tee => {
                    let mut out = String::new();
                    for r in &records {
                        if let Some(graph) = q.runtime.construct_output(&r.bindings) {
                            let time = r.at_time.map_or("-".to_string(), |t| t.to_string());
                            out.push_str(&format!("# t={time}\n"));
                            out.push_str(&codec::encode(&graph));
                        }
                    }
                    files.insert(format!("outputs/{stem}.nt"), out);
                }
                ResultForm::Construct(_) => {}
            }
            queries.push(QueryMetrics {
                node: node.id().to_string(),
                query: q.name.clone(),
                emissions: records.len(),
                engine: q.runtime.metrics().clone(),
            });
        }
    }
    if options.strict {
        for (query, topic) in domain.unresolved_streams() {
            let e = FederationError::UnresolvableStream { query: query.clone(), topic };
            problems.push(Problem { kind: ProblemKind::Query, location: query.to_string(), message: e.to_string() });
        }
    }
    let metrics = RunMetrics {
        seed: domain.config().seed,
        domain: domain.metrics(),
        queries,
    };
    RunReport { files, metrics, problems }
}
