use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;

use super::advert::{AdvertEvent, Advertisement, Registry};
use super::broker::{Message, Stamp, VirtualTime};
use crate::codec;
use crate::engine::{Evaluation, Millis, ResultDelta, StreamElement};
use crate::federation::{DeployedQuery, FederationError};
use crate::model::{Binding, Graph, Iri};
use crate::query::{Query, ResultForm};
use crate::reasoner::Closure;
use crate::vocab::sys;

/// Something a node asks the broker to do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    Publish { topic: Iri, payload: Arc<str> },
    Subscribe { topic: Iri, stamp: Stamp },
    Unsubscribe { topic: Iri },
}

/// Work scheduled for a node.
#[derive(Debug, Clone)]
pub enum NodeEvent {
    Join,
    Leave,
    Emit { topic: Iri, graph: Graph },
    Deploy { name: String, query: Box<Query> },
    Deliver { message: Arc<Message>, stamp: Stamp },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Interest {
    Discovery,
    Service,
    External,
    Query(usize),
}

/// One emission of a deployed query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultRecord {
    pub query: Iri,
    pub virtual_time: VirtualTime,
    pub at_time: Option<Millis>,
    pub bindings: Vec<Binding>,
}

/// A message a node actually handled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryRecord {
    pub time: VirtualTime,
    pub message: u64,
    pub topic: Iri,
    pub seq: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct NodeMetrics {
    pub delivered: u64,
    pub cancelled: u64,
    pub decode_errors: u64,
    pub skipped_emits: u64,
    pub ingest_errors: u64,
}

/// Declared stream of a node with its discovery metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamDecl {
    pub topic: Iri,
    pub metadata: Graph,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: Iri,
    pub knowledge: Graph,
    pub streams: Vec<StreamDecl>,
}

impl NodeSpec {
    pub fn new(id: Iri) -> Self {
        Self { id, knowledge: Graph::new(), streams: Vec::new() }
    }

    pub fn with_stream(mut self, topic: Iri, metadata: Graph) -> Self {
        self.streams.push(StreamDecl { topic, metadata });
        self
    }

    pub fn with_knowledge(mut self, knowledge: Graph) -> Self {
        self.knowledge = knowledge;
        self
    }
}

pub(crate) struct Ctx {
    pub now: VirtualTime,
    pub seq: u64,
    pub effects: Vec<Effect>,
}

impl Ctx {
    pub fn new(now: VirtualTime, seq: u64) -> Self {
        Self { now, seq, effects: Vec::new() }
    }

    fn stamp(&self) -> Stamp {
        (self.seq, self.effects.len() as u32)
    }
}

/// A processing unit holding background knowledge, declared streams,
/// deployed queries and its own view of the discovery registry.
#[derive(Debug, Clone)]
pub struct SemanticNode {
    id: Iri,
    knowledge: Graph,
    closure: Arc<Closure>,
    generated_by: Iri,
    evaluation: Evaluation,
    streams: BTreeMap<Iri, Graph>,
    alive: bool,
    version: u64,
    registry: Registry,
    interests: BTreeMap<Iri, BTreeSet<Interest>>,
    subscriptions: BTreeMap<Iri, Stamp>,
    queries: Vec<DeployedQuery>,
    inbox: Vec<Arc<Message>>,
    results: Vec<ResultRecord>,
    deliveries: Vec<DeliveryRecord>,
    errors: Vec<String>,
    metrics: NodeMetrics,
}

impl SemanticNode {
    pub fn new(spec: NodeSpec, closure: Arc<Closure>, generated_by: Iri) -> Self {
        Self {
            id: spec.id,
            knowledge: spec.knowledge,
            closure,
            generated_by,
            evaluation: Evaluation::Incremental,
            streams: spec.streams.into_iter().map(|s| (s.topic, s.metadata)).collect(),
            alive: false,
            version: 0,
            registry: Registry::new(),
            interests: BTreeMap::new(),
            subscriptions: BTreeMap::new(),
            queries: Vec::new(),
            inbox: Vec::new(),
            results: Vec::new(),
            deliveries: Vec::new(),
            errors: Vec::new(),
            metrics: NodeMetrics::default(),
        }
    }

    /// Evaluation mode of queries deployed from now on.
    pub fn set_evaluation(&mut self, evaluation: Evaluation) {
        self.evaluation = evaluation;
    }

    pub fn id(&self) -> &Iri {
        &self.id
    }

    pub fn is_alive(&self) -> bool {
        self.alive
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn knowledge(&self) -> &Graph {
        &self.knowledge
    }

    pub fn declared_topics(&self) -> impl Iterator<Item = &Iri> {
        self.streams.keys()
    }

    pub fn declares(&self, topic: &Iri) -> bool {
        self.streams.contains_key(topic)
    }

    pub fn queries(&self) -> &[DeployedQuery] {
        &self.queries
    }

    pub fn subscriptions(&self) -> impl Iterator<Item = &Iri> {
        self.subscriptions.keys()
    }

    pub fn inbox(&self) -> &[Arc<Message>] {
        &self.inbox
    }

    pub fn results(&self) -> &[ResultRecord] {
        &self.results
    }

    pub fn deliveries(&self) -> &[DeliveryRecord] {
        &self.deliveries
    }

    pub fn errors(&self) -> &[String] {
        &self.errors
    }

    pub fn metrics(&self) -> &NodeMetrics {
        &self.metrics
    }

    /// Background knowledge plus every metadata graph in the registry.
    pub fn effective_knowledge(&self) -> Graph {
        let mut g = self.knowledge.clone();
        g.extend_from(&self.registry.metadata());
        g
    }

    fn advertisement(&self, event: AdvertEvent) -> Advertisement {
        let streams = if event == AdvertEvent::Leave { BTreeMap::new() } else { self.streams.clone() };
        Advertisement { node: self.id.clone(), event, version: self.version, streams }
    }

    fn publish(&self, ctx: &mut Ctx, topic: Iri, graph: &Graph) {
        ctx.effects.push(Effect::Publish { topic, payload: codec::encode(graph).into() });
    }

    fn add_interest(&mut self, ctx: &mut Ctx, topic: &Iri, interest: Interest) {
        let set = self.interests.entry(topic.clone()).or_default();
        let first = set.is_empty();
        set.insert(interest);
        if first {
            let stamp = ctx.stamp();
            self.subscriptions.insert(topic.clone(), stamp);
            ctx.effects.push(Effect::Subscribe { topic: topic.clone(), stamp });
        }
    }

    fn remove_interest(&mut self, ctx: &mut Ctx, topic: &Iri, interest: Interest) {
        let Some(set) = self.interests.get_mut(topic) else {
            return;
        };
        if set.remove(&interest) && set.is_empty() {
            self.interests.remove(topic);
            self.subscriptions.remove(topic);
            ctx.effects.push(Effect::Unsubscribe { topic: topic.clone() });
        }
    }

    fn readvertise(&mut self, ctx: &mut Ctx, event: AdvertEvent) {
        self.version += 1;
        let adv = self.advertisement(event);
        self.registry.apply(&adv);
        self.publish(ctx, sys::discovery_topic(), &adv.to_graph());
    }

    pub(crate) fn handle(&mut self, event: NodeEvent, ctx: &mut Ctx) {
        match event {
            NodeEvent::Join => self.on_join(ctx),
            NodeEvent::Leave => self.on_leave(ctx),
            NodeEvent::Emit { topic, graph } => {
                if self.alive && self.streams.contains_key(&topic) {
                    self.publish(ctx, topic, &graph);
                } else {
                    self.metrics.skipped_emits += 1;
                }
            }
            NodeEvent::Deploy { name, query } => {
                if let Err(e) = self.deploy(&name, *query, ctx) {
                    self.errors.push(format!("{name}: {e}"));
                }
            }
            NodeEvent::Deliver { message, stamp } => self.on_deliver(message, stamp, ctx),
        }
    }

    fn on_join(&mut self, ctx: &mut Ctx) {
        if self.alive {
            return;
        }
        self.alive = true;
        let (discovery, service) = (sys::discovery_topic(), sys::service_topic(&self.id));
        self.add_interest(ctx, &discovery, Interest::Discovery);
        self.add_interest(ctx, &service, Interest::Service);
        self.readvertise(ctx, AdvertEvent::Join);
        self.refresh_queries(ctx);
    }

    fn on_leave(&mut self, ctx: &mut Ctx) {
        if !self.alive {
            return;
        }
        self.readvertise(ctx, AdvertEvent::Leave);
        self.alive = false;
        self.registry = Registry::new();
        for topic in std::mem::take(&mut self.interests).into_keys() {
            ctx.effects.push(Effect::Unsubscribe { topic });
        }
        self.subscriptions.clear();
        for q in &mut self.queries {
            for topic in q.subscribed_topics() {
                q.runtime.drop_topic(&topic);
            }
            q.resolved.iter_mut().for_each(BTreeSet::clear);
        }
    }

    /// Deploys `query` under `name`; registered outputs are declared and
    /// advertised.
    pub(crate) fn deploy(&mut self, name: &str, query: Query, ctx: &mut Ctx) -> Result<Iri, FederationError> {
        let mut deployed = DeployedQuery::new(&self.id, name, query, self.closure.clone())?;
        deployed.runtime = deployed.runtime.with_evaluation(self.evaluation);
        if self.queries.iter().any(|q| q.iri == deployed.iri) {
            return Err(FederationError::InvalidName(format!("{name} is already deployed")));
        }
        if let Some(output) = &deployed.output {
            if self.streams.contains_key(output) || self.registry.contains_topic(output) {
                return Err(FederationError::TopicAlreadyRegistered(output.clone()));
            }
        }
        let iri = deployed.iri.clone();
        if let (Some(output), Some(meta)) = (deployed.output.clone(), deployed.output_metadata(&self.generated_by)) {
            self.streams.insert(output, meta);
        }
        let fresh_output = deployed.output.is_some();
        self.queries.push(deployed);
        if self.alive {
            if fresh_output {
                self.readvertise(ctx, AdvertEvent::Join);
            }
            self.refresh_queries(ctx);
        }
        Ok(iri)
    }

    pub(crate) fn subscribe_external(&mut self, topic: &Iri, ctx: &mut Ctx) {
        self.add_interest(ctx, topic, Interest::External);
    }

    pub(crate) fn unsubscribe_external(&mut self, topic: &Iri, ctx: &mut Ctx) {
        self.remove_interest(ctx, topic, Interest::External);
    }

    pub(crate) fn publish_external(&mut self, topic: Iri, graph: &Graph, ctx: &mut Ctx) {
        self.publish(ctx, topic, graph);
    }

    fn on_deliver(&mut self, message: Arc<Message>, stamp: Stamp, ctx: &mut Ctx) {
        if self.subscriptions.get(&message.topic) != Some(&stamp) {
            self.metrics.cancelled += 1;
            return;
        }
        self.metrics.delivered += 1;
        self.deliveries.push(DeliveryRecord {
            time: ctx.now,
            message: message.id,
            topic: message.topic.clone(),
            seq: message.seq,
        });
        let interests = self.interests.get(&message.topic).cloned().unwrap_or_default();
        if interests.is_empty() {
            return;
        }
        let graph = match codec::decode(&message.payload) {
            Ok(g) => g,
            Err(e) => {
                log::warn!("{}: undecodable message on {}: {e}", self.id, message.topic);
                self.metrics.decode_errors += 1;
                return;
            }
        };
        for interest in interests {
            match interest {
                Interest::Discovery | Interest::Service => self.on_advertisement(&graph, ctx),
                Interest::External => self.inbox.push(message.clone()),
                Interest::Query(i) => {
                    let element = StreamElement::new(message.topic.clone(), graph.clone(), message.seq);
                    match self.queries[i].runtime.ingest(element) {
                        Ok(delta) => self.emit(i, delta, ctx),
                        Err(e) => {
                            log::warn!("{}: {} dropped message {}: {e}", self.id, self.queries[i].iri, message.id);
                            self.metrics.ingest_errors += 1;
                        }
                    }
                }
            }
        }
    }

    fn on_advertisement(&mut self, graph: &Graph, ctx: &mut Ctx) {
        let adv = match Advertisement::from_graph(graph) {
            Ok(a) => a,
            Err(e) => {
                log::warn!("{}: bad advertisement: {e}", self.id);
                self.metrics.decode_errors += 1;
                return;
            }
        };
        if adv.node == self.id {
            return;
        }
        let was_alive = self.registry.is_alive(&adv.node);
        let changed = self.registry.apply(&adv);
        if adv.event == AdvertEvent::Join && !was_alive && self.alive && self.registry.is_alive(&adv.node) {
            let reply = self.advertisement(AdvertEvent::Announce);
            self.publish(ctx, sys::service_topic(&adv.node), &reply.to_graph());
        }
        if changed {
            self.refresh_queries(ctx);
        }
    }

    fn refresh_queries(&mut self, ctx: &mut Ctx) {
        if !self.alive || self.queries.is_empty() {
            return;
        }
        let knowledge = self.effective_knowledge();
        let topics = self.registry.topic_set();
        for i in 0..self.queries.len() {
            let before = self.queries[i].subscribed_topics();
            let delta = self.queries[i].on_discovery_event(&knowledge, &topics);
            let after = self.queries[i].subscribed_topics();
            for topic in before.difference(&after) {
                self.remove_interest(ctx, topic, Interest::Query(i));
            }
            for topic in after.difference(&before) {
                self.add_interest(ctx, topic, Interest::Query(i));
            }
            self.emit(i, delta, ctx);
        }
    }

    fn emit(&mut self, index: usize, delta: ResultDelta, ctx: &mut Ctx) {
        if delta.is_empty() {
            return;
        }
        let q = &self.queries[index];
        let bindings: Vec<Binding> = match &q.query().form {
            ResultForm::Select(_) => q.runtime.select_rows(&delta.bindings).into_iter().collect(),
            ResultForm::Construct(_) => delta.bindings.iter().cloned().collect(),
        };
        let output = match (&q.output, q.runtime.construct_output(&delta.bindings)) {
            (Some(topic), Some(graph)) => Some((topic.clone(), graph)),
            _ => None,
        };
        self.results.push(ResultRecord {
            query: q.iri.clone(),
            virtual_time: ctx.now,
            at_time: delta.at_time,
            bindings,
        });
        if let Some((topic, graph)) = output {
            self.publish(ctx, topic, &graph);
        }
    }

    /// Answers a service request. Registry dumps are the only request kind.
    pub fn serve(&self, request: &Graph) -> Graph {
        let wants_dump = request
            .with_predicate(&sys::requests())
            .any(|t| t.object().as_iri() == Some(&sys::registry_dump()));
        if wants_dump {
            self.registry.dump()
        } else {
            log::warn!("{}: unsupported service request", self.id);
            Graph::new()
        }
    }

    /// Concrete stream selectors of deployed queries that nothing publishes.
    pub fn unresolved_streams(&self) -> Vec<(Iri, Iri)> {
        self.queries
            .iter()
            .flat_map(|q| q.pending_topics().into_iter().map(|t| (q.iri.clone(), t)))
            .collect()
    }
}
