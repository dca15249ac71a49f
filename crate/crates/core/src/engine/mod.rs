//! Sliding RANGE windows over application time and incremental evaluation
//! of continuous queries.
//!
//! Each stream pattern keeps a buffer of elements ordered by
//! `(app_time, arrival)` and the set of bindings its BGP has over the union
//! of the buffered graphs. Insertions are evaluated semi-naively against the
//! new element; evictions use delete-and-rederive. The query's live result
//! set is the join of those per-window sets with the static bindings.

mod time;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    construct, join, match_bgp, BlankNode, Binding, Graph, Iri, PatternSource, Triple, TriplePattern,
    Variable,
};
use crate::query::{Query, ResultForm, Selector, StreamPattern};
use crate::reasoner::{materialize, Closure, EntailedGraph};

pub use time::{extract_app_time, format_date_time, parse_timestamp, Millis};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("message has no timestamp under {0}")]
    MissingTimestamp(Iri),
    #[error("malformed timestamp {0}")]
    MalformedTimestamp(String),
    #[error("no stream pattern reads topic {0}")]
    UnroutedTopic(Iri),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamElement {
    pub topic: Iri,
    pub graph: Graph,
    pub seq: u64,
}

impl StreamElement {
    pub fn new(topic: Iri, graph: Graph, seq: u64) -> Self {
        Self { topic, graph, seq }
    }
}

/// Results that became true with one ingest or refresh.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultDelta {
    pub bindings: BTreeSet<Binding>,
    pub at_time: Option<Millis>,
}

impl ResultDelta {
    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EngineMetrics {
    pub ingested: u64,
    pub late_dropped: u64,
    pub malformed_dropped: u64,
    pub evicted: u64,
    pub evaluations: u64,
    pub results_emitted: u64,
}

#[derive(Debug, Clone)]
struct Element {
    topic: Iri,
    seq: u64,
    graph: Graph,
}

/// Union of element graphs that tolerates removing one element's triples.
#[derive(Debug, Clone, Default)]
struct Group {
    graph: Graph,
    counts: BTreeMap<Triple, usize>,
}

impl Group {
    fn add(&mut self, graph: &Graph) {
        for t in graph.iter() {
            *self.counts.entry(t.clone()).or_default() += 1;
            self.graph.insert(t.clone());
        }
    }

    fn remove(&mut self, graph: &Graph) {
        for t in graph.iter() {
            if let Some(n) = self.counts.get_mut(t) {
                *n -= 1;
                if *n == 0 {
                    self.counts.remove(t);
                    self.graph.remove(t);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Window {
    pattern: StreamPattern,
    vars: BTreeSet<Variable>,
    topics: BTreeSet<Iri>,
    elements: BTreeMap<(Millis, u64), Element>,
    groups: BTreeMap<Iri, Group>,
    results: BTreeSet<Binding>,
}

/// Matches that use at least one triple of `pinned`: each pattern in turn is
/// matched against `pinned` and the others against `rest`.
fn pinned_matches<P, R>(patterns: &[TriplePattern], pinned: &P, rest: &R, seed: &Binding) -> BTreeSet<Binding>
where
    P: PatternSource + ?Sized,
    R: PatternSource + ?Sized,
{
    let mut out = BTreeSet::new();
    let mut first = Vec::new();
    for (j, pattern) in patterns.iter().enumerate() {
        first.clear();
        pinned.extend_matches(pattern, seed, &mut first);
        if first.is_empty() {
            continue;
        }
        let others: Vec<TriplePattern> = patterns
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, p)| p.clone())
            .collect();
        let starts: BTreeSet<Binding> = first.drain(..).collect();
        for b in &starts {
            out.extend(match_bgp(&others, rest, b));
        }
    }
    out
}

impl Window {
    fn new(pattern: StreamPattern) -> Self {
        let topics = match &pattern.selector {
            Selector::Iri(iri) => BTreeSet::from([iri.clone()]),
            Selector::Var(_) => BTreeSet::new(),
        };
        Self {
            vars: pattern.variables(),
            pattern,
            topics,
            elements: BTreeMap::new(),
            groups: BTreeMap::new(),
            results: BTreeSet::new(),
        }
    }

    fn seed(&self, topic: &Iri) -> Binding {
        match &self.pattern.selector {
            Selector::Var(v) => Binding::new().with(v, topic.clone()),
            Selector::Iri(_) => Binding::new(),
        }
    }

    fn insert(&mut self, key: (Millis, u64), element: Element, closure: &Closure) -> BTreeSet<Binding> {
        let seed = self.seed(&element.topic);
        let group = self.groups.entry(element.topic.clone()).or_default();
        group.add(&element.graph);
        let found = pinned_matches(
            &self.pattern.patterns,
            &EntailedGraph::new(&element.graph, closure),
            &EntailedGraph::new(&group.graph, closure),
            &seed,
        );
        self.elements.insert(key, element);
        let added: BTreeSet<Binding> = found.difference(&self.results).cloned().collect();
        self.results.extend(added.iter().cloned());
        added
    }

    /// Removes the given elements and every result that no longer holds.
    fn remove_elements(&mut self, keys: Vec<(Millis, u64)>, closure: &Closure) -> BTreeSet<Binding> {
        let mut by_topic: BTreeMap<Iri, Vec<Element>> = BTreeMap::new();
        for key in keys {
            if let Some(e) = self.elements.remove(&key) {
                by_topic.entry(e.topic.clone()).or_default().push(e);
            }
        }
        let mut removed = BTreeSet::new();
        for (topic, gone) in by_topic {
            let seed = self.seed(&topic);
            let group = self.groups.get_mut(&topic).expect("group exists for buffered element");
            let pinned: Graph = gone.iter().flat_map(|e| e.graph.iter().cloned()).collect();
            let candidates = pinned_matches(
                &self.pattern.patterns,
                &EntailedGraph::new(&pinned, closure),
                &EntailedGraph::new(&group.graph, closure),
                &seed,
            );
            for e in &gone {
                group.remove(&e.graph);
            }
            let source = EntailedGraph::new(&group.graph, closure);
            for c in candidates {
                if self.results.contains(&c) && match_bgp(&self.pattern.patterns, &source, &c).is_empty() {
                    self.results.remove(&c);
                    removed.insert(c);
                }
            }
            if group.counts.is_empty() {
                self.groups.remove(&topic);
            }
        }
        removed
    }

    fn evict(&mut self, watermark: Millis, closure: &Closure) -> (usize, BTreeSet<Binding>) {
        let bound = watermark.saturating_sub(self.range());
        let keys: Vec<(Millis, u64)> = self
            .elements
            .range(..=(bound, u64::MAX))
            .map(|(k, _)| *k)
            .collect();
        let n = keys.len();
        if n == 0 {
            return (0, BTreeSet::new());
        }
        (n, self.remove_elements(keys, closure))
    }

    fn range(&self) -> Millis {
        Millis::try_from(self.pattern.window.range_ms).unwrap_or(Millis::MAX)
    }

    fn is_late(&self, app_time: Millis, watermark: Option<Millis>) -> bool {
        watermark.is_some_and(|wm| app_time <= wm.saturating_sub(self.range()))
    }
}

/// How result deltas are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Evaluation {
    #[default]
    Incremental,
    /// Re-evaluate the whole query after every change and diff the result
    /// sets. Slow; used as an oracle.
    Recompute,
}

/// Evaluation state of one continuous query.
#[derive(Debug, Clone)]
pub struct QueryRuntime {
    query: Query,
    evaluation: Evaluation,
    closure: Arc<Closure>,
    windows: Vec<Window>,
    statics: BTreeSet<Binding>,
    live: BTreeSet<Binding>,
    watermark: Option<Millis>,
    next_id: u64,
    metrics: EngineMetrics,
}

impl QueryRuntime {
    /// A runtime with no static bindings yet, unless the query has no static
    /// patterns, in which case the single empty binding is used.
    pub fn new(query: Query, closure: Arc<Closure>) -> Self {
        let statics = if query.statics.is_empty() {
            BTreeSet::from([Binding::new()])
        } else {
            BTreeSet::new()
        };
        let windows = query.streams.iter().cloned().map(Window::new).collect();
        Self {
            query,
            evaluation: Evaluation::Incremental,
            closure,
            windows,
            statics,
            live: BTreeSet::new(),
            watermark: None,
            next_id: 0,
            metrics: EngineMetrics::default(),
        }
    }

    pub fn with_evaluation(mut self, evaluation: Evaluation) -> Self {
        self.evaluation = evaluation;
        self
    }

    pub fn evaluation(&self) -> Evaluation {
        self.evaluation
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn closure(&self) -> &Closure {
        &self.closure
    }

    pub fn watermark(&self) -> Option<Millis> {
        self.watermark
    }

    pub fn metrics(&self) -> &EngineMetrics {
        &self.metrics
    }

    pub fn live(&self) -> &BTreeSet<Binding> {
        &self.live
    }

    pub fn static_bindings(&self) -> &BTreeSet<Binding> {
        &self.statics
    }

    /// Static-pattern bindings of this query over `knowledge`.
    pub fn evaluate_statics(&self, knowledge: &Graph) -> BTreeSet<Binding> {
        if self.query.statics.is_empty() {
            return BTreeSet::from([Binding::new()]);
        }
        match_bgp(&self.query.statics, &EntailedGraph::new(knowledge, &self.closure), &Binding::new())
    }

    /// Replaces the static bindings and returns the results that became true.
    pub fn set_static_bindings(&mut self, statics: BTreeSet<Binding>) -> ResultDelta {
        self.statics = statics;
        let full = match self.evaluation {
            Evaluation::Incremental => self.combine(),
            Evaluation::Recompute => self.evaluate_full(),
        };
        let bindings: BTreeSet<Binding> = full.difference(&self.live).cloned().collect();
        self.live = full;
        self.metrics.results_emitted += bindings.len() as u64;
        ResultDelta { bindings, at_time: self.watermark }
    }

    /// Topics read by stream pattern `index`.
    pub fn topics(&self, index: usize) -> &BTreeSet<Iri> {
        &self.windows[index].topics
    }

    /// Sets the topics a variable-selector stream pattern reads. Buffered
    /// elements of topics no longer listed are dropped with their results.
    pub fn set_topics(&mut self, index: usize, topics: BTreeSet<Iri>) {
        let window = &mut self.windows[index];
        if matches!(window.pattern.selector, Selector::Iri(_)) {
            return;
        }
        let keys: Vec<(Millis, u64)> = window
            .elements
            .iter()
            .filter(|(_, e)| !topics.contains(&e.topic))
            .map(|(k, _)| *k)
            .collect();
        window.topics = topics;
        let dropped = keys.len();
        let removed = window.remove_elements(keys, &self.closure);
        self.metrics.evicted += dropped as u64;
        self.prune_live(index, &removed);
    }

    /// Drops every buffered element of `topic` from all stream patterns.
    pub fn drop_topic(&mut self, topic: &Iri) {
        for index in 0..self.windows.len() {
            let window = &mut self.windows[index];
            let keys: Vec<(Millis, u64)> = window
                .elements
                .iter()
                .filter(|(_, e)| e.topic == *topic)
                .map(|(k, _)| *k)
                .collect();
            if keys.is_empty() {
                continue;
            }
            let removed = window.remove_elements(keys, &self.closure);
            self.prune_live(index, &removed);
        }
    }

    /// Whether any stream pattern reads `topic`.
    pub fn reads(&self, topic: &Iri) -> bool {
        self.windows.iter().any(|w| w.topics.contains(topic))
    }

    /// Every topic some stream pattern reads.
    pub fn all_topics(&self) -> BTreeSet<Iri> {
        self.windows.iter().flat_map(|w| w.topics.iter().cloned()).collect()
    }

    /// Application times buffered by stream pattern `index`, oldest first.
    pub fn window_times(&self, index: usize) -> Vec<Millis> {
        self.windows[index].elements.keys().map(|(t, _)| *t).collect()
    }

    /// Sequence numbers buffered by stream pattern `index`, oldest first.
    pub fn window_seqs(&self, index: usize) -> Vec<(Iri, u64)> {
        self.windows[index]
            .elements
            .values()
            .map(|e| (e.topic.clone(), e.seq))
            .collect()
    }

    pub fn window_count(&self) -> usize {
        self.windows.len()
    }

    /// Adds `element` to the windows reading its topic and returns the
    /// results that became true.
    pub fn ingest(&mut self, element: StreamElement) -> Result<ResultDelta, EngineError> {
        let targets: Vec<usize> = (0..self.windows.len())
            .filter(|&i| self.windows[i].topics.contains(&element.topic))
            .collect();
        if targets.is_empty() {
            return Err(EngineError::UnroutedTopic(element.topic));
        }
        self.metrics.ingested += 1;
        let mut stamped = Vec::with_capacity(targets.len());
        for i in targets {
            match extract_app_time(&element.graph, &self.windows[i].pattern.window.on) {
                Ok(t) => stamped.push((i, t)),
                Err(e) => {
                    self.metrics.malformed_dropped += 1;
                    return Err(e);
                }
            }
        }
        stamped.retain(|&(i, t)| !self.windows[i].is_late(t, self.watermark));
        let Some(newest) = stamped.iter().map(|&(_, t)| t).max() else {
            self.metrics.late_dropped += 1;
            return Ok(ResultDelta { bindings: BTreeSet::new(), at_time: self.watermark });
        };
        let watermark = self.watermark.map_or(newest, |wm| wm.max(newest));
        self.watermark = Some(watermark);

        for index in 0..self.windows.len() {
            let (n, removed) = self.windows[index].evict(watermark, &self.closure);
            self.metrics.evicted += n as u64;
            self.prune_live(index, &removed);
        }

        let id = self.next_id;
        self.next_id += 1;
        let graph = if element.graph.has_blank_nodes() {
            element.graph.map_blank_nodes(&|b: &BlankNode| {
                BlankNode::new(format!("{}_e{id}", b.label())).expect("suffixed label is valid")
            })
        } else {
            element.graph
        };
        let mut added = Vec::new();
        for (i, t) in stamped {
            let e = Element { topic: element.topic.clone(), seq: element.seq, graph: graph.clone() };
            let new = self.windows[i].insert((t, id), e, &self.closure);
            if !new.is_empty() {
                added.push((i, new));
            }
        }

        if self.evaluation == Evaluation::Recompute {
            let full = self.evaluate_full();
            let bindings: BTreeSet<Binding> = full.difference(&self.live).cloned().collect();
            self.live = full;
            self.metrics.evaluations += 1;
            self.metrics.results_emitted += bindings.len() as u64;
            return Ok(ResultDelta { bindings, at_time: Some(watermark) });
        }
        let mut bindings = BTreeSet::new();
        for (i, new) in &added {
            let mut part = join(new, &self.statics);
            for (k, w) in self.windows.iter().enumerate() {
                if k != *i && !part.is_empty() {
                    part = join(&part, &w.results);
                }
            }
            bindings.extend(part.into_iter().filter(|b| !self.live.contains(b)));
        }
        self.live.extend(bindings.iter().cloned());
        self.metrics.evaluations += 1;
        self.metrics.results_emitted += bindings.len() as u64;
        Ok(ResultDelta { bindings, at_time: Some(watermark) })
    }

    /// Non-incremental evaluation of the current window contents.
    pub fn evaluate_full(&self) -> BTreeSet<Binding> {
        let mut acc = self.statics.clone();
        for w in &self.windows {
            let mut per_topic: BTreeMap<&Iri, Graph> = BTreeMap::new();
            for e in w.elements.values() {
                per_topic.entry(&e.topic).or_default().extend_from(&e.graph);
            }
            let mut matches = BTreeSet::new();
            for (topic, graph) in per_topic {
                let graph = if self.closure.is_trivial() { graph } else { materialize(&graph, &self.closure) };
                matches.extend(match_bgp(&w.pattern.patterns, &graph, &w.seed(topic)));
            }
            acc = join(&acc, &matches);
        }
        acc
    }

    /// CONSTRUCT output for `bindings`; `None` for SELECT queries or when
    /// nothing can be instantiated.
    pub fn construct_output<'a>(&self, bindings: impl IntoIterator<Item = &'a Binding>) -> Option<Graph> {
        let ResultForm::Construct(template) = &self.query.form else {
            return None;
        };
        let graph = construct(template, bindings);
        (!graph.is_empty()).then_some(graph)
    }

    /// SELECT rows of `bindings`, projected and de-duplicated.
    pub fn select_rows<'a>(&self, bindings: impl IntoIterator<Item = &'a Binding>) -> BTreeSet<Binding> {
        let ResultForm::Select(vars) = &self.query.form else {
            return BTreeSet::new();
        };
        let vars: BTreeSet<Variable> = vars.iter().cloned().collect();
        bindings.into_iter().map(|b| b.project(&vars)).collect()
    }

    fn combine(&self) -> BTreeSet<Binding> {
        self.windows
            .iter()
            .fold(self.statics.clone(), |acc, w| join(&acc, &w.results))
    }

    fn prune_live(&mut self, index: usize, removed: &BTreeSet<Binding>) {
        if self.evaluation == Evaluation::Recompute {
            self.live = self.evaluate_full();
            return;
        }
        if removed.is_empty() {
            return;
        }
        let vars = &self.windows[index].vars;
        self.live.retain(|b| !removed.contains(&b.project(vars)));
    }
}
