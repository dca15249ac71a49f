use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{Graph, Iri, Literal, Term, Triple};
use crate::vocab::{sys, xsd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AdvertEvent {
    Join,
    Leave,
    /// Reply to a newcomer's Join, sent on its service channel.
    Announce,
}

impl AdvertEvent {
    fn iri(self) -> Iri {
        match self {
            Self::Join => sys::join(),
            Self::Leave => sys::leave(),
            Self::Announce => sys::announce(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdvertError {
    #[error("advertisement has no sys:event triple")]
    MissingEvent,
    #[error("advertisement has {0} sys:event triples")]
    AmbiguousEvent(usize),
    #[error("unknown advertisement event {0}")]
    UnknownEvent(String),
    #[error("advertisement version {0} is not a non-negative integer")]
    BadVersion(String),
    #[error("metadata for undeclared topic {0}")]
    UndeclaredMetadata(Iri),
}

/// A node's description of itself: its id, what happened, and the streams
/// it publishes with their metadata graphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Advertisement {
    pub node: Iri,
    pub event: AdvertEvent,
    /// Per-node counter; a receiver only applies versions newer than the
    /// last one it saw from that node.
    pub version: u64,
    pub streams: BTreeMap<Iri, Graph>,
}

impl Advertisement {
    pub fn to_graph(&self) -> Graph {
        let mut g = Graph::new();
        let node = Term::Iri(self.node.clone());
        g.insert(Triple::from_parts_unchecked(node.clone(), sys::event(), self.event.iri().into()));
        g.insert(Triple::from_parts_unchecked(
            node.clone(),
            sys::version(),
            Literal::new(self.version.to_string(), xsd::integer()).into(),
        ));
        for (topic, metadata) in &self.streams {
            g.insert(Triple::from_parts_unchecked(node.clone(), sys::publishes(), topic.clone().into()));
            for m in metadata.iter() {
                g.insert(Triple::from_parts_unchecked(m.clone().into(), sys::describes(), topic.clone().into()));
            }
        }
        g
    }

    pub fn from_graph(graph: &Graph) -> Result<Self, AdvertError> {
        let event_p = sys::event();
        let events: Vec<&Triple> = graph.with_predicate(&event_p).collect();
        let head = match events.as_slice() {
            [] => return Err(AdvertError::MissingEvent),
            [one] => *one,
            many => return Err(AdvertError::AmbiguousEvent(many.len())),
        };
        let node = head.subject().as_iri().cloned().ok_or(AdvertError::MissingEvent)?;
        let event = match head.object().as_iri() {
            Some(e) if *e == sys::join() => AdvertEvent::Join,
            Some(e) if *e == sys::leave() => AdvertEvent::Leave,
            Some(e) if *e == sys::announce() => AdvertEvent::Announce,
            _ => return Err(AdvertError::UnknownEvent(head.object().to_string())),
        };
        let version = match graph.with_predicate(&sys::version()).next() {
            None => 0,
            Some(t) => {
                let text = t.object().as_literal().map(Literal::lexical).unwrap_or_default();
                text.parse().map_err(|_| AdvertError::BadVersion(t.object().to_string()))?
            }
        };
        let mut streams: BTreeMap<Iri, Graph> = BTreeMap::new();
        for t in graph.with_predicate(&sys::publishes()) {
            if let Some(topic) = t.object().as_iri() {
                streams.entry(topic.clone()).or_default();
            }
        }
        for t in graph.with_predicate(&sys::describes()) {
            let (Some(inner), Some(topic)) = (t.subject().as_triple(), t.object().as_iri()) else {
                continue;
            };
            streams
                .get_mut(topic)
                .ok_or_else(|| AdvertError::UndeclaredMetadata(topic.clone()))?
                .insert(inner.clone());
        }
        Ok(Self { node, event, version, streams })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryEntry {
    pub version: u64,
    pub alive: bool,
    pub streams: BTreeMap<Iri, Graph>,
}

/// What a node knows about every node's streams, built only from the
/// advertisements it has applied.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    entries: BTreeMap<Iri, RegistryEntry>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies `adv` if it is newer than what is known about its node.
    /// Returns whether anything changed.
    pub fn apply(&mut self, adv: &Advertisement) -> bool {
        if self.entries.get(&adv.node).is_some_and(|e| e.version >= adv.version) {
            return false;
        }
        let alive = adv.event != AdvertEvent::Leave;
        let streams = if alive { adv.streams.clone() } else { BTreeMap::new() };
        let entry = RegistryEntry { version: adv.version, alive, streams };
        let changed = self.entries.get(&adv.node).is_none_or(|old| old.alive != entry.alive || old.streams != entry.streams);
        self.entries.insert(adv.node.clone(), entry);
        changed
    }

    pub fn is_alive(&self, node: &Iri) -> bool {
        self.entries.get(node).is_some_and(|e| e.alive)
    }

    pub fn version(&self, node: &Iri) -> Option<u64> {
        self.entries.get(node).map(|e| e.version)
    }

    /// Every live topic with its publisher and metadata.
    pub fn topics(&self) -> BTreeMap<&Iri, (&Iri, &Graph)> {
        let mut out = BTreeMap::new();
        for (node, e) in self.entries.iter().filter(|(_, e)| e.alive) {
            for (topic, meta) in &e.streams {
                out.insert(topic, (node, meta));
            }
        }
        out
    }

    pub fn topic_set(&self) -> BTreeSet<Iri> {
        self.topics().into_keys().cloned().collect()
    }

    pub fn contains_topic(&self, topic: &Iri) -> bool {
        self.entries.values().any(|e| e.alive && e.streams.contains_key(topic))
    }

    pub fn len(&self) -> usize {
        self.entries.values().filter(|e| e.alive).map(|e| e.streams.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Union of all live metadata graphs.
    pub fn metadata(&self) -> Graph {
        let mut g = Graph::new();
        for e in self.entries.values().filter(|e| e.alive) {
            for meta in e.streams.values() {
                g.extend_from(meta);
            }
        }
        g
    }

    /// Live nodes and their streams; equal across nodes once discovery has
    /// settled.
    pub fn live_view(&self) -> BTreeMap<Iri, BTreeMap<Iri, Graph>> {
        self.entries
            .iter()
            .filter(|(_, e)| e.alive)
            .map(|(n, e)| (n.clone(), e.streams.clone()))
            .collect()
    }

    pub fn live_nodes(&self) -> BTreeSet<Iri> {
        self.entries.iter().filter(|(_, e)| e.alive).map(|(n, _)| n.clone()).collect()
    }

    /// Registry contents in the advertisement vocabulary, without event or
    /// version triples.
    pub fn dump(&self) -> Graph {
        let mut g = Graph::new();
        for (node, e) in self.entries.iter().filter(|(_, e)| e.alive) {
            for (topic, meta) in &e.streams {
                g.insert(Triple::from_parts_unchecked(node.clone().into(), sys::publishes(), topic.clone().into()));
                for m in meta.iter() {
                    g.insert(Triple::from_parts_unchecked(m.clone().into(), sys::describes(), topic.clone().into()));
                }
            }
        }
        g
    }

    /// Reads back a [`Registry::dump`] as topic to metadata.
    pub fn parse_dump(graph: &Graph) -> BTreeMap<Iri, Graph> {
        let mut out: BTreeMap<Iri, Graph> = BTreeMap::new();
        for t in graph.with_predicate(&sys::publishes()) {
            if let Some(topic) = t.object().as_iri() {
                out.entry(topic.clone()).or_default();
            }
        }
        for t in graph.with_predicate(&sys::describes()) {
            if let (Some(inner), Some(topic)) = (t.subject().as_triple(), t.object().as_iri()) {
                out.entry(topic.clone()).or_default().insert(inner.clone());
            }
        }
        out
    }
}
