//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

pub mod broker;
pub mod graphs;
pub mod queries;
pub mod scenarios;

use std::collections::BTreeSet;

use proptest::prelude::*;
use semrob_core::engine::{extract_app_time, Millis};
use semrob_core::model::{match_bgp, Binding, Graph, Iri, Literal, PatternTerm, Term, Triple, TriplePattern};
use semrob_core::query::{Query, Selector};
use semrob_core::reasoner::Ontology;
use semrob_core::vocab;

pub fn ex(name: &str) -> Iri {
    Iri::new(format!("http://ex.org/{name}")).unwrap()
}

pub fn time_predicate() -> Iri {
    ex("time")
}

pub fn topic(i: usize) -> Iri {
    ex(&format!("s{i}"))
}

/// Applies the sub-property and sub-class rules one step at a time, at every
/// quoting depth, until nothing new appears.
pub fn naive_materialize(graph: &Graph, ontology: &Ontology) -> Graph {
    let mut out = graph.clone();
    loop {
        let mut fresh = Vec::new();
        for t in out.iter() {
            for r in one_step(t, ontology) {
                if !out.contains(&r) {
                    fresh.push(r);
                }
            }
        }
        if fresh.is_empty() {
            return out;
        }
        out.extend(fresh);
    }
}

fn one_step(t: &Triple, ontology: &Ontology) -> Vec<Triple> {
    let mut out = Vec::new();
    let rdf_type = vocab::rdf::type_();
    for (sub, sup) in &ontology.sub_properties {
        if t.predicate() == sub {
            out.push(Triple::new(t.subject().clone(), sup.clone(), t.object().clone()).unwrap());
        }
    }
    if *t.predicate() == rdf_type {
        for (sub, sup) in &ontology.sub_classes {
            if t.object().as_iri() == Some(sub) {
                out.push(Triple::new(t.subject().clone(), rdf_type.clone(), sup.clone()).unwrap());
            }
        }
    }
    if let Term::Triple(inner) = t.subject() {
        for r in one_step(inner, ontology) {
            out.push(Triple::new(r, t.predicate().clone(), t.object().clone()).unwrap());
        }
    }
    if let Term::Triple(inner) = t.object() {
        for r in one_step(inner, ontology) {
            out.push(Triple::new(t.subject().clone(), t.predicate().clone(), r).unwrap());
        }
    }
    out
}

/// Brute-force window model: keeps raw elements and re-evaluates everything
/// from scratch over naively materialized graphs.
pub struct NaiveRuntime {
    pub query: Query,
    pub ontology: Ontology,
    pub statics: BTreeSet<Binding>,
    pub topics: Vec<BTreeSet<Iri>>,
    elements: Vec<(usize, Millis, Iri, Graph)>,
    pub watermark: Option<Millis>,
    /// Result of the latest evaluation, valid until elements change.
    last: Option<BTreeSet<Binding>>,
}

impl NaiveRuntime {
    pub fn new(query: Query, ontology: Ontology, knowledge: &Graph, topics: Vec<BTreeSet<Iri>>) -> Self {
        let statics = if query.statics.is_empty() {
            BTreeSet::from([Binding::new()])
        } else {
            match_bgp(&query.statics, &naive_materialize(knowledge, &ontology), &Binding::new())
        };
        Self { query, ontology, statics, topics, elements: Vec::new(), watermark: None, last: None }
    }

    fn range(&self, i: usize) -> Millis {
        self.query.streams[i].window.range_ms as Millis
    }

    /// Applies one arrival; returns `(results after eviction, results after insertion)`.
    pub fn step(&mut self, topic: &Iri, graph: &Graph) -> Option<(BTreeSet<Binding>, BTreeSet<Binding>)> {
        let mut stamped = Vec::new();
        for (i, s) in self.query.streams.iter().enumerate() {
            if self.topics[i].contains(topic) {
                stamped.push((i, extract_app_time(graph, &s.window.on).ok()?));
            }
        }
        let wm = self.watermark;
        stamped.retain(|&(i, t)| wm.is_none_or(|w| t > w - self.range(i)));
        let newest = stamped.iter().map(|&(_, t)| t).max()?;
        let wm = wm.map_or(newest, |w| w.max(newest));
        self.watermark = Some(wm);
        let ranges: Vec<Millis> = (0..self.query.streams.len()).map(|i| self.range(i)).collect();
        let held = self.elements.len();
        self.elements.retain(|(i, t, _, _)| *t > wm - ranges[*i]);
        let before = match self.last.take() {
            Some(last) if held == self.elements.len() => last,
            _ => self.evaluate(),
        };
        let materialized = naive_materialize(graph, &self.ontology);
        for (i, t) in stamped {
            self.elements.push((i, t, topic.clone(), materialized.clone()));
        }
        let after = self.evaluate();
        self.last = Some(after.clone());
        Some((before, after))
    }

    pub fn drop_topic(&mut self, topic: &Iri) {
        self.last = None;
        self.elements.retain(|(_, _, t, _)| t != topic);
    }

    pub fn times(&self, i: usize) -> Vec<Millis> {
        let mut v: Vec<Millis> = self.elements.iter().filter(|e| e.0 == i).map(|e| e.1).collect();
        v.sort();
        v
    }

    pub fn evaluate(&self) -> BTreeSet<Binding> {
        let mut acc = self.statics.clone();
        for (i, s) in self.query.streams.iter().enumerate() {
            let mut matches = BTreeSet::new();
            for topic in &self.topics[i] {
                let union: Graph = self
                    .elements
                    .iter()
                    .filter(|(j, _, t, _)| *j == i && t == topic)
                    .flat_map(|(_, _, _, g)| g.iter().cloned())
                    .collect();
                if union.is_empty() {
                    continue;
                }
                let seed = match &s.selector {
                    Selector::Var(v) => Binding::new().with(v, topic.clone()),
                    Selector::Iri(_) => Binding::new(),
                };
                matches.extend(match_bgp(&s.patterns, &union, &seed));
            }
            acc = nested_loop_join(&acc, &matches);
        }
        acc
    }
}

pub fn nested_loop_join(left: &BTreeSet<Binding>, right: &BTreeSet<Binding>) -> BTreeSet<Binding> {
    left.iter().flat_map(|l| right.iter().filter_map(move |r| l.merge(r))).collect()
}

// ---- generators ----

pub const ENTITIES: usize = 3;
pub const PREDICATES: usize = 3;
pub const CLASSES: usize = 3;

pub fn entity(i: usize) -> Iri {
    ex(&format!("e{i}"))
}

pub fn predicate(i: usize) -> Iri {
    ex(&format!("p{i}"))
}

pub fn class(i: usize) -> Iri {
    ex(&format!("C{i}"))
}

pub fn ontology_strategy(max: usize) -> impl Strategy<Value = Ontology> {
    let axiom = (any::<bool>(), 0..PREDICATES.max(CLASSES), 0..PREDICATES.max(CLASSES));
    proptest::collection::vec(axiom, 0..=max).prop_map(|axioms| {
        let mut o = Ontology::new();
        for (is_property, a, b) in axioms {
            if is_property {
                o.add_sub_property(predicate(a % PREDICATES), predicate(b % PREDICATES));
            } else {
                o.add_sub_class(class(a % CLASSES), class(b % CLASSES));
            }
        }
        o
    })
}

/// A data triple over the small vocabulary; `kind` 0 is `rdf:type`.
pub fn data_triple_strategy() -> impl Strategy<Value = Triple> {
    (0..ENTITIES, 0..=PREDICATES, 0..ENTITIES.max(CLASSES)).prop_map(|(s, p, o)| {
        if p == PREDICATES {
            Triple::new(entity(s), vocab::rdf::type_(), class(o % CLASSES)).unwrap()
        } else {
            Triple::new(entity(s), predicate(p), entity(o % ENTITIES)).unwrap()
        }
    })
}

/// Data triple that may be quoted up to `depth` levels in subject or object.
pub fn nested_triple_strategy(depth: u32) -> BoxedStrategy<Triple> {
    let leaf = data_triple_strategy().boxed();
    leaf.prop_recursive(depth, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), 0..PREDICATES, 0..ENTITIES)
                .prop_map(|(t, p, o)| Triple::new(t, predicate(p), entity(o)).unwrap()),
            (0..ENTITIES, 0..PREDICATES, inner)
                .prop_map(|(s, p, t)| Triple::new(entity(s), predicate(p), t).unwrap()),
        ]
    })
    .boxed()
}

fn entity_term() -> impl Strategy<Value = String> {
    let vars = prop_oneof![Just("?a"), Just("?b"), Just("?c")].prop_map(str::to_string);
    let ents = (0..ENTITIES).prop_map(|i| entity(i).to_string());
    prop_oneof![5 => vars, 1 => ents]
}

fn class_term() -> impl Strategy<Value = String> {
    prop_oneof![1 => Just("?k".to_string()), 2 => (0..CLASSES).prop_map(|i| class(i).to_string())]
}

fn pattern_text() -> impl Strategy<Value = String> {
    let typed = (entity_term(), class_term()).prop_map(|(s, o)| format!("{s} a {o} ."));
    let linked = (
        entity_term(),
        prop_oneof![3 => (0..PREDICATES).prop_map(|i| predicate(i).to_string()), 1 => Just("?p".to_string())],
        entity_term(),
    )
        .prop_map(|(s, p, o)| format!("{s} {p} {o} ."));
    prop_oneof![1 => typed, 2 => linked]
}

fn stream_text(index: usize) -> impl Strategy<Value = String> {
    let time = format!("{}", time_predicate());
    (
        any::<bool>(),
        prop_oneof![Just(1000u64), Just(1500u64)],
        proptest::collection::vec(pattern_text(), 1..=2),
        any::<bool>(),
    )
        .prop_map(move |(variable, range, patterns, timed)| {
            let selector = if variable { "?sel".to_string() } else { format!("{}", topic(index)) };
            let mut body = patterns.join(" ");
            if timed || index == 0 {
                body.push_str(&format!(" ?a {time} ?t ."));
            }
            format!("STREAM {selector} [RANGE {range}ms ON {time}] {{ {body} }}")
        })
}

/// Text of a random SELECT query over 1 to 3 streams.
pub fn query_text_strategy() -> impl Strategy<Value = String> {
    prop_oneof![2 => Just(1usize), 3 => Just(2usize), 2 => Just(3usize)]
        .prop_flat_map(|n| {
            let streams: Vec<_> = (0..n).map(stream_text).collect();
            let statics = prop_oneof![2 => Just(Vec::new()), 1 => proptest::collection::vec(pattern_text(), 1..=1)];
            (streams, statics)
        })
        .prop_map(|(streams, statics)| {
            let body = format!("{} {}", streams.join(" "), statics.join(" "));
            let vars: Vec<&str> = ["?a", "?b", "?c", "?k", "?p", "?t", "?sel"]
                .into_iter()
                .filter(|v| body.contains(&format!("{v} ")))
                .collect();
            format!("SELECT {} WHERE {{ {body} }}", vars.join(" "))
        })
}

#[derive(Debug, Clone)]
pub struct Event {
    pub topic: usize,
    pub time: Millis,
    pub subject: usize,
    pub triples: Vec<Triple>,
}

impl Event {
    pub fn graph(&self) -> Graph {
        let mut g: Graph = self.triples.iter().cloned().collect();
        g.insert(Triple::new(entity(self.subject), time_predicate(), Literal::integer(self.time)).unwrap());
        g
    }
}

/// Arrivals whose timestamps drift forward across about four window ranges,
/// jittered so that some arrive out of order or late. Times are multiples of
/// 100 ms so equal-time joins happen.
pub fn events_strategy(max_len: usize) -> impl Strategy<Value = Vec<Event>> {
    let event = (
        0..3usize,
        -12i64..=3,
        0..ENTITIES,
        proptest::collection::vec(data_triple_strategy(), 1..=4),
    );
    proptest::collection::vec(event, 1..=max_len).prop_map(|raw| {
        let len = raw.len() as i64;
        raw.into_iter()
            .enumerate()
            .map(|(i, (topic, jitter, subject, triples))| {
                let base = i as i64 * 40 / len;
                let time = (base + jitter).max(0) * 100;
                Event { topic, time, subject, triples }
            })
            .collect()
    })
}

pub fn knowledge_strategy() -> impl Strategy<Value = Graph> {
    proptest::collection::vec(data_triple_strategy(), 2..=10).prop_map(|v| v.into_iter().collect())
}

/// Replays `events` through the incremental runtime and the brute-force
/// model, comparing deltas, live results, `evaluate_full` and window contents
/// after every arrival.
pub fn check_engine_case(
    query_text: &str,
    ontology: &Ontology,
    knowledge: &Graph,
    events: &[Event],
    recompute: bool,
) -> Result<(), String> {
    use semrob_core::engine::{Evaluation, QueryRuntime, StreamElement};
    use semrob_core::query::{parse, PrefixMap};
    use semrob_core::reasoner::Closure;
    use std::sync::Arc;

    let query = parse(query_text, &PrefixMap::new()).map_err(|e| format!("{e}: {query_text}"))?;
    let all_topics: BTreeSet<Iri> = (0..3).map(topic).collect();
    let topics: Vec<BTreeSet<Iri>> = query
        .streams
        .iter()
        .map(|s| match &s.selector {
            Selector::Iri(iri) => BTreeSet::from([iri.clone()]),
            Selector::Var(_) => all_topics.clone(),
        })
        .collect();
    let mut naive = NaiveRuntime::new(query.clone(), ontology.clone(), knowledge, topics.clone());
    let closure = Arc::new(Closure::new(ontology));
    let mut rt = QueryRuntime::new(query.clone(), closure.clone());
    let mut brute = recompute.then(|| QueryRuntime::new(query, closure).with_evaluation(Evaluation::Recompute));
    for (i, t) in topics.iter().enumerate() {
        rt.set_topics(i, t.clone());
        if let Some(b) = brute.as_mut() {
            b.set_topics(i, t.clone());
        }
    }
    let statics = rt.evaluate_statics(knowledge);
    if statics != naive.statics {
        return Err(format!("static bindings differ: {statics:?} vs {:?}", naive.statics));
    }
    rt.set_static_bindings(statics.clone());
    if let Some(b) = brute.as_mut() {
        b.set_static_bindings(statics);
    }
    let mut last_wm = None;
    for (n, e) in events.iter().enumerate() {
        let t = topic(e.topic);
        let graph = e.graph();
        let expected = naive.step(&t, &graph);
        let recomputed = brute.as_mut().map(|b| b.ingest(StreamElement::new(t.clone(), graph.clone(), n as u64)));
        let got = match rt.ingest(StreamElement::new(t.clone(), graph, n as u64)) {
            Ok(d) => d,
            Err(semrob_core::engine::EngineError::UnroutedTopic(_)) if expected.is_none() => continue,
            Err(err) => return Err(format!("event {n}: unexpected error {err}")),
        };
        let (before, after) = match expected {
            Some(pair) => pair,
            None => {
                if !got.is_empty() {
                    return Err(format!("event {n}: late or unrouted element produced {got:?}"));
                }
                continue;
            }
        };
        let want: BTreeSet<Binding> = after.difference(&before).cloned().collect();
        if recomputed.as_ref().is_some_and(|r| r.as_ref().map(|d| &d.bindings) != Ok(&want)) {
            return Err(format!("event {n}: recomputed delta {recomputed:?} != expected {want:?}"));
        }
        if got.bindings != want {
            return Err(format!("event {n}: delta {:?} != expected {:?}", got.bindings, want));
        }
        if *rt.live() != after {
            return Err(format!("event {n}: live set diverged"));
        }
        if rt.evaluate_full() != after {
            return Err(format!("event {n}: evaluate_full diverged"));
        }
        if rt.watermark() < last_wm {
            return Err(format!("event {n}: watermark decreased"));
        }
        last_wm = rt.watermark();
        let wm = rt.watermark().unwrap();
        for i in 0..rt.window_count() {
            let range = rt.query().streams[i].window.range_ms as Millis;
            let times = rt.window_times(i);
            if times.iter().any(|&x| x <= wm - range || x > wm) {
                return Err(format!("event {n}: window {i} holds {times:?} outside ({}, {wm}]", wm - range));
            }
            if times != naive.times(i) {
                return Err(format!("event {n}: window {i} contents {times:?} vs {:?}", naive.times(i)));
            }
        }
    }
    Ok(())
}

fn vocab_term(var_weight: u32, class_weight: u32) -> impl Strategy<Value = PatternTerm> {
    prop_oneof![
        var_weight => "[xyz]".prop_map(|v| PatternTerm::var(&v).unwrap()),
        3 => (0..ENTITIES).prop_map(|i| PatternTerm::Term(Term::Iri(entity(i)))),
        class_weight => (0..CLASSES).prop_map(|i| PatternTerm::Term(Term::Iri(class(i)))),
    ]
}

/// Patterns over the generator vocabulary, possibly quoting patterns in
/// subject or object position.
pub fn vocab_pattern_strategy(depth: u32) -> BoxedStrategy<TriplePattern> {
    let predicate = prop_oneof![
        1 => "[xyz]".prop_map(|v| PatternTerm::var(&v).unwrap()),
        3 => (0..PREDICATES).prop_map(|i| PatternTerm::Term(Term::Iri(predicate(i)))),
        1 => Just(PatternTerm::Term(Term::Iri(vocab::rdf::type_()))),
    ];
    let flat = (vocab_term(2, 0), predicate.clone(), vocab_term(2, 1))
        .prop_map(|(subject, predicate, object)| TriplePattern { subject, predicate, object })
        .boxed();
    if depth == 0 {
        return flat;
    }
    let inner = vocab_pattern_strategy(depth - 1);
    prop_oneof![
        2 => flat,
        1 => (inner.clone(), predicate.clone(), vocab_term(2, 0)).prop_map(|(q, predicate, object)| TriplePattern {
            subject: PatternTerm::Quoted(Box::new(q)),
            predicate,
            object,
        }),
        1 => (vocab_term(2, 0), predicate, inner).prop_map(|(subject, predicate, q)| TriplePattern {
            subject,
            predicate,
            object: PatternTerm::Quoted(Box::new(q)),
        }),
    ]
    .boxed()
}
