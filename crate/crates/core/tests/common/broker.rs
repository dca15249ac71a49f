//! Randomized membership and publish schedules, executed against a domain
//! and checked against a model of who should receive what.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use proptest::prelude::*;
use semrob_core::codec;
use semrob_core::model::{Graph, Iri, Literal, Triple};
use semrob_core::reasoner::{Closure, Ontology};
use semrob_core::runtime::{DeliveryRecord, Domain, DomainConfig, DomainMetrics, LatencyModel, Mode, NodeSpec, RuntimeError};
use semrob_core::vocab;

pub const TOPICS: usize = 3;
const PHASE_MS: u64 = 1_000;

#[derive(Debug, Clone)]
pub struct Schedule {
    pub seed: u64,
    pub default_ms: u64,
    pub jitter_ms: u64,
    /// Topics each node declares.
    pub nodes: Vec<BTreeSet<usize>>,
    pub phases: Vec<Phase>,
}

#[derive(Debug, Clone)]
pub struct Phase {
    /// `(node, join)`; `false` leaves.
    pub membership: Vec<(usize, bool)>,
    /// `(node, topic, subscribe)`; `false` unsubscribes.
    pub subscriptions: Vec<(usize, usize, bool)>,
    /// Emits scheduled at `(offset_ms, node, topic)` within the phase.
    pub emits: Vec<(u64, usize, usize)>,
    /// Publishes issued right away at the start of the phase.
    pub direct: Vec<(usize, usize)>,
}

pub fn schedule_strategy() -> impl Strategy<Value = Schedule> {
    (2usize..=5).prop_flat_map(|n| {
        let nodes = proptest::collection::vec(proptest::collection::btree_set(0..TOPICS, 0..=2), n);
        let phase = (
            proptest::collection::vec((0..n, prop::bool::weighted(0.7)), 0..4),
            proptest::collection::vec((0..n, 0..TOPICS, prop::bool::weighted(0.7)), 0..5),
            proptest::collection::vec((0u64..500, 0..n, 0..TOPICS), 0..10),
            proptest::collection::vec((0..n, 0..TOPICS), 0..3),
        )
            .prop_map(|(membership, subscriptions, emits, direct)| Phase { membership, subscriptions, emits, direct });
        (any::<u64>(), 0u64..=50, 0u64..=20, nodes, proptest::collection::vec(phase, 1..=6)).prop_map(
            |(seed, default_ms, jitter_ms, nodes, phases)| Schedule { seed, default_ms, jitter_ms, nodes, phases },
        )
    })
}

pub fn node_id(i: usize) -> Iri {
    Iri::new(format!("http://ex.org/node{i}")).unwrap()
}

pub fn topic_id(i: usize) -> Iri {
    Iri::new(format!("http://ex.org/topic{i}")).unwrap()
}

/// Everything observable about one execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub deliveries: BTreeMap<Iri, Vec<DeliveryRecord>>,
    pub inboxes: BTreeMap<Iri, Vec<u64>>,
    pub published: Vec<(u64, Iri, u64, Iri)>,
    pub metrics: DomainMetrics,
    /// Contract violations found while running.
    pub violations: Vec<String>,
}

fn payload(phase: usize, i: usize) -> Graph {
    let t = Triple::new(
        Iri::new(format!("http://ex.org/m{phase}_{i}")).unwrap(),
        vocab::rdf::type_(),
        Literal::new(format!("{phase}/{i}"), vocab::xsd::string()),
    )
    .unwrap();
    [t].into_iter().collect()
}

pub fn execute(s: &Schedule, mode: Mode) -> Trace {
    let config = DomainConfig {
        seed: s.seed,
        latency: LatencyModel { default_ms: s.default_ms, jitter_ms: s.jitter_ms, links: BTreeMap::new() },
        mode,
        ..DomainConfig::default()
    };
    let mut d = Domain::new(config, Arc::new(Closure::new(&Ontology::new())));
    let ids: Vec<Iri> = (0..s.nodes.len()).map(node_id).collect();
    for (i, topics) in s.nodes.iter().enumerate() {
        let mut spec = NodeSpec::new(ids[i].clone());
        for &t in topics {
            spec = spec.with_stream(topic_id(t), payload(usize::MAX, t));
        }
        d.add_node(spec).unwrap();
    }

    let mut violations = Vec::new();
    let mut alive = vec![false; s.nodes.len()];
    let mut subscribed: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); s.nodes.len()];
    let mut seen_log = 0;
    let mut seen_inbox: BTreeMap<Iri, usize> = BTreeMap::new();

    for (p, phase) in s.phases.iter().enumerate() {
        let start = (p as u64 + 1) * PHASE_MS;
        d.run_until(start);
        for &(n, join) in &phase.membership {
            if join {
                d.schedule_join(start, &ids[n]).unwrap();
            } else {
                d.schedule_leave(start, &ids[n]).unwrap();
                subscribed[n].clear();
            }
            alive[n] = join;
        }
        d.run();

        for &(n, t, on) in &phase.subscriptions {
            let result = if on { d.subscribe(&ids[n], &topic_id(t)) } else { d.unsubscribe(&ids[n], &topic_id(t)) };
            match (alive[n], result) {
                (true, Ok(())) => {
                    if on {
                        subscribed[n].insert(t);
                    } else {
                        subscribed[n].remove(&t);
                    }
                }
                (false, Err(RuntimeError::NodeUnavailable(_))) if on => {}
                (false, Ok(())) if !on => {}
                (a, r) => violations.push(format!("phase {p}: subscribe({n}, {t}, {on}) alive={a} gave {r:?}")),
            }
        }

        let mut expected_publishes = 0;
        for (i, &(n, t)) in phase.direct.iter().enumerate() {
            let result = d.publish(&ids[n], &topic_id(t), &payload(p, i));
            let ok = alive[n] && s.nodes[n].contains(&t);
            match (ok, &result) {
                (true, Ok(())) => expected_publishes += 1,
                (false, Err(RuntimeError::NodeUnavailable(_))) if !alive[n] => {}
                (false, Err(RuntimeError::UndeclaredTopic(_))) if alive[n] => {}
                _ => violations.push(format!("phase {p}: publish({n}, {t}) alive={} gave {result:?}", alive[n])),
            }
        }
        for (i, &(offset, n, t)) in phase.emits.iter().enumerate() {
            d.schedule_emit(start + offset, &ids[n], topic_id(t), payload(p, 100 + i)).unwrap();
            if alive[n] && s.nodes[n].contains(&t) {
                expected_publishes += 1;
            }
        }
        d.run();

        // Exactly-once delivery of every user message to the subscribers of
        // its topic at publish time.
        let fresh: Vec<_> = d.published()[seen_log..].iter().filter(|m| !vocab::sys::is_reserved(&m.topic)).cloned().collect();
        seen_log = d.published().len();
        if fresh.len() != expected_publishes {
            violations.push(format!("phase {p}: {} messages published, expected {expected_publishes}", fresh.len()));
        }
        let mut received: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (n, id) in ids.iter().enumerate() {
            let inbox = d.node(id).unwrap().inbox();
            let from = seen_inbox.insert(id.clone(), inbox.len()).unwrap_or(0);
            for m in &inbox[from..] {
                received.entry(m.id).or_default().push(n);
            }
        }
        for m in &fresh {
            let t: usize = m.topic.as_str().trim_start_matches("http://ex.org/topic").parse().unwrap();
            let expected: Vec<usize> = (0..ids.len()).filter(|&n| subscribed[n].contains(&t)).collect();
            let got = received.remove(&m.id).unwrap_or_default();
            if got != expected {
                violations.push(format!("phase {p}: message {} on topic{t} reached {got:?}, expected {expected:?}", m.id));
            }
            if codec::decode(&m.payload).is_err() {
                violations.push(format!("message {} does not decode", m.id));
            }
        }
        if !received.is_empty() {
            violations.push(format!("phase {p}: unexpected deliveries {received:?}"));
        }

        // Every live node agrees on who is alive and what they publish.
        let expected_view: BTreeMap<Iri, BTreeMap<Iri, Graph>> = (0..ids.len())
            .filter(|&n| alive[n])
            .map(|n| {
                let streams = s.nodes[n].iter().map(|&t| (topic_id(t), payload(usize::MAX, t))).collect();
                (ids[n].clone(), streams)
            })
            .collect();
        for n in (0..ids.len()).filter(|&n| alive[n]) {
            let view = d.node(&ids[n]).unwrap().registry().live_view();
            if view != expected_view {
                violations.push(format!("phase {p}: registry of node{n} is {:?}, expected {:?}", view.keys(), expected_view.keys()));
            }
        }
    }

    // Per topic and subscriber, deliveries follow publish order.
    let mut deliveries = BTreeMap::new();
    let mut inboxes = BTreeMap::new();
    for id in &ids {
        let node = d.node(id).unwrap();
        let mut last: BTreeMap<&Iri, u64> = BTreeMap::new();
        for r in node.deliveries() {
            if let Some(prev) = last.insert(&r.topic, r.seq) {
                if r.seq <= prev {
                    violations.push(format!("{id}: {} delivered seq {} after {prev}", r.topic, r.seq));
                }
            }
        }
        deliveries.insert(id.clone(), node.deliveries().to_vec());
        inboxes.insert(id.clone(), node.inbox().iter().map(|m| m.id).collect());
    }
    let metrics = d.metrics();
    if metrics.delivered + metrics.cancelled != metrics.broker.deliveries_scheduled {
        violations.push(format!(
            "{} delivered + {} cancelled != {} scheduled",
            metrics.delivered, metrics.cancelled, metrics.broker.deliveries_scheduled
        ));
    }
    let published = d.published().iter().map(|m| (m.id, m.topic.clone(), m.seq, m.publisher.clone())).collect();
    Trace { deliveries, inboxes, published, metrics, violations }
}

/// Runs the schedule twice in reference mode and once threaded; returns
/// every contract violation.
pub fn check_schedule(s: &Schedule) -> Vec<String> {
    let reference = execute(s, Mode::Reference);
    let mut problems = reference.violations.clone();
    if execute(s, Mode::Reference) != reference {
        problems.push("two reference runs differ".into());
    }
    let threaded = execute(s, Mode::Threaded);
    if threaded != reference {
        problems.push(format!("threaded run differs: {:?}", threaded.violations));
    }
    problems
}
