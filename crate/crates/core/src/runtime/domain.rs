use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use super::broker::{Broker, BrokerStats, LatencyModel, Message, VirtualTime};
use super::node::{Ctx, Effect, NodeEvent, NodeSpec, SemanticNode};
use super::RuntimeError;
use crate::codec;
use crate::engine::{EngineMetrics, Evaluation};
use crate::model::{Graph, Iri};
use crate::query::Query;
use crate::reasoner::Closure;
use crate::vocab;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// One event at a time, in `(time, seq)` order.
    #[default]
    Reference,
    /// Events due at the same virtual time run on one worker per node.
    Threaded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainConfig {
    pub seed: u64,
    pub latency: LatencyModel,
    pub service_timeout_ms: u64,
    pub mode: Mode,
    pub evaluation: Evaluation,
    /// Predicate linking a derived stream to the query producing it.
    pub generated_by: Iri,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            latency: LatencyModel::default(),
            service_timeout_ms: 1_000,
            mode: Mode::Reference,
            evaluation: Evaluation::Incremental,
            generated_by: Iri::new(format!("{}generatedBy", vocab::DEFAULT_BASE)).expect("valid IRI"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DomainMetrics {
    pub virtual_time_ms: u64,
    pub broker: BrokerStats,
    pub delivered: u64,
    pub cancelled: u64,
    pub decode_errors: u64,
    pub skipped_emits: u64,
    pub ingest_errors: u64,
    pub engine: EngineMetrics,
}

#[derive(Debug)]
enum Item {
    Node(Iri, NodeEvent),
}

/// Semantic nodes sharing one simulated broker.
#[derive(Debug)]
pub struct Domain {
    broker: Broker<Item>,
    nodes: BTreeMap<Iri, SemanticNode>,
    closure: Arc<Closure>,
    config: DomainConfig,
}

impl Domain {
    pub fn new(config: DomainConfig, closure: Arc<Closure>) -> Self {
        Self {
            broker: Broker::new(config.latency.clone(), config.seed),
            nodes: BTreeMap::new(),
            closure,
            config,
        }
    }

    pub fn now(&self) -> VirtualTime {
        self.broker.now()
    }

    pub fn config(&self) -> &DomainConfig {
        &self.config
    }

    pub fn node(&self, id: &Iri) -> Option<&SemanticNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &SemanticNode> {
        self.nodes.values()
    }

    /// Every published message, in publish order.
    pub fn published(&self) -> &[Arc<Message>] {
        self.broker.log()
    }

    /// Adds a node without joining it.
    pub fn add_node(&mut self, spec: NodeSpec) -> Result<(), RuntimeError> {
        if self.nodes.contains_key(&spec.id) {
            return Err(RuntimeError::DuplicateNodeId(spec.id));
        }
        let mut node = SemanticNode::new(spec, self.closure.clone(), self.config.generated_by.clone());
        node.set_evaluation(self.config.evaluation);
        self.nodes.insert(node.id().clone(), node);
        Ok(())
    }

    /// Adds a node and joins it now.
    pub fn create_node(&mut self, spec: NodeSpec) -> Result<(), RuntimeError> {
        let id = spec.id.clone();
        self.add_node(spec)?;
        self.immediate(&id, |node, ctx| {
            node.handle(NodeEvent::Join, ctx);
            Ok(())
        })
    }

    pub fn schedule_join(&mut self, at: VirtualTime, node: &Iri) -> Result<(), RuntimeError> {
        self.schedule(at, node, NodeEvent::Join)
    }

    pub fn schedule_leave(&mut self, at: VirtualTime, node: &Iri) -> Result<(), RuntimeError> {
        self.schedule(at, node, NodeEvent::Leave)
    }

    pub fn schedule_emit(&mut self, at: VirtualTime, node: &Iri, topic: Iri, graph: Graph) -> Result<(), RuntimeError> {
        self.schedule(at, node, NodeEvent::Emit { topic, graph })
    }

    pub fn schedule_deploy(&mut self, at: VirtualTime, node: &Iri, name: &str, query: Query) -> Result<(), RuntimeError> {
        self.schedule(at, node, NodeEvent::Deploy { name: name.to_string(), query: Box::new(query) })
    }

    fn schedule(&mut self, at: VirtualTime, node: &Iri, event: NodeEvent) -> Result<(), RuntimeError> {
        if !self.nodes.contains_key(node) {
            return Err(RuntimeError::UnknownNode(node.clone()));
        }
        self.broker.schedule(at, Item::Node(node.clone(), event));
        Ok(())
    }

    /// Leaves `node` now.
    pub fn leave(&mut self, node: &Iri) -> Result<(), RuntimeError> {
        self.immediate(node, |n, ctx| {
            n.handle(NodeEvent::Leave, ctx);
            Ok(())
        })
    }

    /// Deploys a query on `node` now and returns its IRI.
    pub fn register_query(&mut self, node: &Iri, name: &str, query: Query) -> Result<Iri, RuntimeError> {
        let mut iri = None;
        self.immediate(node, |n, ctx| {
            iri = Some(n.deploy(name, query, ctx)?);
            Ok(())
        })?;
        Ok(iri.expect("set on success"))
    }

    /// Publishes `graph` on a topic `node` declared.
    pub fn publish(&mut self, node: &Iri, topic: &Iri, graph: &Graph) -> Result<(), RuntimeError> {
        self.immediate(node, |n, ctx| {
            if !n.is_alive() {
                return Err(RuntimeError::NodeUnavailable(n.id().clone()));
            }
            if !n.declares(topic) {
                return Err(RuntimeError::UndeclaredTopic(topic.clone()));
            }
            n.publish_external(topic.clone(), graph, ctx);
            Ok(())
        })
    }

    /// Subscribes `node` to `topic`; delivered messages land in its inbox.
    pub fn subscribe(&mut self, node: &Iri, topic: &Iri) -> Result<(), RuntimeError> {
        self.immediate(node, |n, ctx| {
            if !n.is_alive() {
                return Err(RuntimeError::NodeUnavailable(n.id().clone()));
            }
            n.subscribe_external(topic, ctx);
            Ok(())
        })
    }

    pub fn unsubscribe(&mut self, node: &Iri, topic: &Iri) -> Result<(), RuntimeError> {
        self.immediate(node, |n, ctx| {
            n.unsubscribe_external(topic, ctx);
            Ok(())
        })
    }

    fn immediate(
        &mut self,
        id: &Iri,
        f: impl FnOnce(&mut SemanticNode, &mut Ctx) -> Result<(), RuntimeError>,
    ) -> Result<(), RuntimeError> {
        let seq = self.broker.alloc_seq();
        let node = self.nodes.get_mut(id).ok_or_else(|| RuntimeError::UnknownNode(id.clone()))?;
        let mut ctx = Ctx::new(self.broker.now(), seq);
        let result = f(node, &mut ctx);
        self.apply(id, ctx.effects);
        result
    }

    /// Synchronous request/response with `to`, encoded both ways.
    pub fn call_service(&self, from: &Iri, to: &Iri, request: &Graph) -> Result<Graph, RuntimeError> {
        if !self.nodes.contains_key(from) {
            return Err(RuntimeError::UnknownNode(from.clone()));
        }
        let target = match self.nodes.get(to) {
            Some(n) if n.is_alive() => n,
            _ => return Err(RuntimeError::NodeUnavailable(to.clone())),
        };
        let latency = self.broker.latency();
        let round_trip = latency.base(from, to) + latency.base(to, from);
        if round_trip > self.config.service_timeout_ms {
            return Err(RuntimeError::Timeout { to: to.clone(), round_trip_ms: round_trip });
        }
        let request = codec::decode(&codec::encode(request))?;
        let response = codec::encode(&target.serve(&request));
        Ok(codec::decode(&response)?)
    }

    fn apply(&mut self, from: &Iri, effects: Vec<Effect>) {
        for effect in effects {
            match effect {
                Effect::Subscribe { topic, stamp } => self.broker.subscribe(from, &topic, stamp),
                Effect::Unsubscribe { topic } => self.broker.unsubscribe(from, &topic),
                Effect::Publish { topic, payload } => {
                    let (_, deliveries) = self.broker.publish(from, &topic, payload);
                    for d in deliveries {
                        let event = NodeEvent::Deliver { message: d.message, stamp: d.stamp };
                        self.broker.schedule(d.at, Item::Node(d.to, event));
                    }
                }
            }
        }
    }

    /// Processes everything due up to and including `until`, then advances
    /// the clock to `until`.
    pub fn run_until(&mut self, until: VirtualTime) {
        while self.broker.next_time().is_some_and(|t| t <= until) {
            self.step();
        }
        self.broker.advance_to(until);
    }

    /// Processes events until the queue is empty.
    pub fn run(&mut self) {
        while !self.broker.is_idle() {
            self.step();
        }
    }

    fn step(&mut self) {
        match self.config.mode {
            Mode::Reference => {
                if let Some((time, seq, Item::Node(id, event))) = self.broker.pop() {
                    if let Some(node) = self.nodes.get_mut(&id) {
                        let mut ctx = Ctx::new(time, seq);
                        node.handle(event, &mut ctx);
                        self.apply(&id, ctx.effects);
                    }
                }
            }
            Mode::Threaded => self.step_batch(),
        }
    }

    fn step_batch(&mut self) {
        let batch = self.broker.pop_batch();
        let mut per_node: BTreeMap<Iri, Vec<(VirtualTime, u64, NodeEvent)>> = BTreeMap::new();
        for (time, seq, Item::Node(id, event)) in batch {
            per_node.entry(id).or_default().push((time, seq, event));
        }
        let mut outcomes: Vec<(u64, Iri, Vec<Effect>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = self
                .nodes
                .iter_mut()
                .filter_map(|(id, node)| per_node.remove(id).map(|events| (id, node, events)))
                .map(|(id, node, events)| {
                    scope.spawn(move || {
                        events
                            .into_iter()
                            .map(|(time, seq, event)| {
                                let mut ctx = Ctx::new(time, seq);
                                node.handle(event, &mut ctx);
                                (seq, id.clone(), ctx.effects)
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("node worker panicked"))
                .collect()
        });
        outcomes.sort_by_key(|(seq, _, _)| *seq);
        for (_, id, effects) in outcomes {
            self.apply(&id, effects);
        }
    }

    pub fn metrics(&self) -> DomainMetrics {
        let mut m = DomainMetrics {
            virtual_time_ms: self.broker.now(),
            broker: self.broker.stats().clone(),
            ..DomainMetrics::default()
        };
        for node in self.nodes.values() {
            let n = node.metrics();
            m.delivered += n.delivered;
            m.cancelled += n.cancelled;
            m.decode_errors += n.decode_errors;
            m.skipped_emits += n.skipped_emits;
            m.ingest_errors += n.ingest_errors;
            for q in node.queries() {
                let e = q.runtime.metrics();
                m.engine.ingested += e.ingested;
                m.engine.late_dropped += e.late_dropped;
                m.engine.malformed_dropped += e.malformed_dropped;
                m.engine.evicted += e.evicted;
                m.engine.evaluations += e.evaluations;
                m.engine.results_emitted += e.results_emitted;
            }
        }
        m
    }

    /// `(query, topic)` pairs of concrete selectors no node publishes.
    pub fn unresolved_streams(&self) -> Vec<(Iri, Iri)> {
        self.nodes.values().filter(|n| n.is_alive()).flat_map(|n| n.unresolved_streams()).collect()
    }
}
