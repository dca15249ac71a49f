use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::Iri;

/// Virtual milliseconds since the start of a run.
pub type VirtualTime = u64;

/// Identifies the effect that opened a subscription: the sequence number of
/// the event being handled and the effect's index within it.
pub type Stamp = (u64, u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    /// Unique across the domain, in publish order.
    pub id: u64,
    pub topic: Iri,
    /// Per-topic publish counter.
    pub seq: u64,
    pub publisher: Iri,
    pub published_at: VirtualTime,
    pub payload: Arc<str>,
}

/// Fixed per-link latency plus optional seeded jitter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LatencyModel {
    pub default_ms: u64,
    pub jitter_ms: u64,
    pub links: BTreeMap<(Iri, Iri), u64>,
}

impl LatencyModel {
    /// Latency of `from -> to` before jitter. Links to self are free unless
    /// overridden.
    pub fn base(&self, from: &Iri, to: &Iri) -> u64 {
        match self.links.get(&(from.clone(), to.clone())) {
            Some(ms) => *ms,
            None if from == to => 0,
            None => self.default_ms,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BrokerStats {
    pub published: u64,
    pub published_unrouted: u64,
    pub deliveries_scheduled: u64,
}

/// Deterministic discrete-event queue and topic table.
///
/// Items are ordered by `(time, seq)`. Deliveries on one topic to one
/// subscriber never overtake each other: each is scheduled no earlier than
/// the previous one.
#[derive(Debug)]
pub struct Broker<T> {
    clock: VirtualTime,
    next_seq: u64,
    queue: BTreeMap<(VirtualTime, u64), T>,
    topics: BTreeMap<Iri, BTreeMap<Iri, Stamp>>,
    topic_seq: BTreeMap<Iri, u64>,
    fifo: BTreeMap<(Iri, Iri), VirtualTime>,
    next_message: u64,
    latency: LatencyModel,
    rng: ChaCha8Rng,
    stats: BrokerStats,
    log: Vec<Arc<Message>>,
}

/// A delivery the broker wants scheduled.
#[derive(Debug, Clone)]
pub struct Delivery {
    pub to: Iri,
    pub stamp: Stamp,
    pub at: VirtualTime,
    pub message: Arc<Message>,
}

impl<T> Broker<T> {
    pub fn new(latency: LatencyModel, seed: u64) -> Self {
        Self {
            clock: 0,
            next_seq: 0,
            queue: BTreeMap::new(),
            topics: BTreeMap::new(),
            topic_seq: BTreeMap::new(),
            fifo: BTreeMap::new(),
            next_message: 0,
            latency,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats: BrokerStats::default(),
            log: Vec::new(),
        }
    }

    pub fn now(&self) -> VirtualTime {
        self.clock
    }

    pub fn latency(&self) -> &LatencyModel {
        &self.latency
    }

    pub fn stats(&self) -> &BrokerStats {
        &self.stats
    }

    /// Every published message, in publish order.
    pub fn log(&self) -> &[Arc<Message>] {
        &self.log
    }

    pub fn alloc_seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    /// Queues `item` at `time` (never earlier than now) and returns its
    /// sequence number.
    pub fn schedule(&mut self, time: VirtualTime, item: T) -> u64 {
        let seq = self.alloc_seq();
        self.queue.insert((time.max(self.clock), seq), item);
        seq
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn next_time(&self) -> Option<VirtualTime> {
        self.queue.keys().next().map(|(t, _)| *t)
    }

    /// Removes the earliest item and advances the clock to its time.
    pub fn pop(&mut self) -> Option<(VirtualTime, u64, T)> {
        let ((time, seq), item) = self.queue.pop_first()?;
        self.clock = time;
        Some((time, seq, item))
    }

    /// Removes every item due at the earliest pending time.
    pub fn pop_batch(&mut self) -> Vec<(VirtualTime, u64, T)> {
        let Some(time) = self.next_time() else {
            return Vec::new();
        };
        self.clock = time;
        let mut out = Vec::new();
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 != time {
                break;
            }
            let ((t, seq), item) = entry.remove_entry();
            out.push((t, seq, item));
        }
        out
    }

    /// Moves the clock forward without processing anything.
    pub fn advance_to(&mut self, time: VirtualTime) {
        self.clock = self.clock.max(time);
    }

    pub fn subscribe(&mut self, node: &Iri, topic: &Iri, stamp: Stamp) {
        self.topics.entry(topic.clone()).or_default().insert(node.clone(), stamp);
    }

    pub fn unsubscribe(&mut self, node: &Iri, topic: &Iri) {
        if let Some(subs) = self.topics.get_mut(topic) {
            subs.remove(node);
            if subs.is_empty() {
                self.topics.remove(topic);
            }
        }
    }

    pub fn subscribers(&self, topic: &Iri) -> BTreeSet<Iri> {
        self.topics.get(topic).map(|s| s.keys().cloned().collect()).unwrap_or_default()
    }

    /// Records a publication and returns the deliveries it causes, one per
    /// current subscriber in node order.
    pub fn publish(&mut self, from: &Iri, topic: &Iri, payload: Arc<str>) -> (Arc<Message>, Vec<Delivery>) {
        let seq = self.topic_seq.entry(topic.clone()).or_default();
        let message = Arc::new(Message {
            id: self.next_message,
            topic: topic.clone(),
            seq: *seq,
            publisher: from.clone(),
            published_at: self.clock,
            payload,
        });
        *seq += 1;
        self.next_message += 1;
        self.stats.published += 1;
        self.log.push(message.clone());
        let subscribers: Vec<(Iri, Stamp)> = self
            .topics
            .get(topic)
            .map(|s| s.iter().map(|(n, st)| (n.clone(), *st)).collect())
            .unwrap_or_default();
        if subscribers.is_empty() {
            self.stats.published_unrouted += 1;
        }
        let mut out = Vec::with_capacity(subscribers.len());
        for (to, stamp) in subscribers {
            let mut delay = self.latency.base(from, &to);
            if self.latency.jitter_ms > 0 {
                delay += self.rng.gen_range(0..=self.latency.jitter_ms);
            }
            let floor = self.fifo.entry((topic.clone(), to.clone())).or_default();
            let at = (self.clock + delay).max(*floor);
            *floor = at;
            self.stats.deliveries_scheduled += 1;
            out.push(Delivery { to, stamp, at, message: message.clone() });
        }
        (message, out)
    }
}
