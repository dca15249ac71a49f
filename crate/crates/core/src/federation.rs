//! Registered queries deployed on a node: derived-stream output topics and
//! dynamic resolution of stream selectors against the discovery registry.

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::engine::{QueryRuntime, ResultDelta};
use crate::model::{match_bgp, Binding, Graph, Iri, Triple, TriplePattern, Variable};
use crate::query::{Query, Selector};
use crate::reasoner::{Closure, EntailedGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FederationError {
    #[error("output topic {0} is already published")]
    TopicAlreadyRegistered(Iri),
    #[error("query {query} reads {topic}, which no node publishes")]
    UnresolvableStream { query: Iri, topic: Iri },
    #[error("invalid query name {0:?}")]
    InvalidName(String),
}

/// Static patterns connected to `var` through shared variables.
pub fn selector_component(statics: &[TriplePattern], var: &Variable) -> Vec<TriplePattern> {
    let mut reached: BTreeSet<Variable> = BTreeSet::from([var.clone()]);
    let mut taken = vec![false; statics.len()];
    loop {
        let mut grew = false;
        for (i, p) in statics.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let vars = p.variables();
            if vars.iter().any(|v| reached.contains(v)) {
                taken[i] = true;
                reached.extend(vars);
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    statics
        .iter()
        .zip(taken)
        .filter(|(_, t)| *t)
        .map(|(p, _)| p.clone())
        .collect()
}

/// Topics each stream pattern reads. A concrete selector resolves to itself
/// whether or not it is published yet; a variable selector resolves to every
/// registry topic for which the static patterns connected to the variable
/// have an entailed match over `knowledge`.
pub fn resolve_selectors(
    query: &Query,
    knowledge: &Graph,
    closure: &Closure,
    registry_topics: &BTreeSet<Iri>,
) -> Vec<BTreeSet<Iri>> {
    let source = EntailedGraph::new(knowledge, closure);
    query
        .streams
        .iter()
        .map(|s| match &s.selector {
            Selector::Iri(iri) => BTreeSet::from([iri.clone()]),
            Selector::Var(v) => {
                let component = selector_component(&query.statics, v);
                registry_topics
                    .iter()
                    .filter(|topic| {
                        let seed = Binding::new().with(v, (*topic).clone());
                        component.is_empty() || !match_bgp(&component, &source, &seed).is_empty()
                    })
                    .cloned()
                    .collect()
            }
        })
        .collect()
}

/// A query running on its host node.
#[derive(Debug, Clone)]
pub struct DeployedQuery {
    pub name: String,
    pub iri: Iri,
    pub host: Iri,
    pub output: Option<Iri>,
    pub runtime: QueryRuntime,
    /// Per stream pattern, the topics currently subscribed.
    pub resolved: Vec<BTreeSet<Iri>>,
}

impl DeployedQuery {
    pub fn new(host: &Iri, name: &str, query: Query, closure: Arc<Closure>) -> Result<Self, FederationError> {
        let iri = query_iri(host, name)?;
        let resolved = vec![BTreeSet::new(); query.streams.len()];
        Ok(Self {
            name: name.to_string(),
            iri,
            host: host.clone(),
            output: query.register.clone(),
            runtime: QueryRuntime::new(query, closure),
            resolved,
        })
    }

    pub fn query(&self) -> &Query {
        self.runtime.query()
    }

    /// Provenance metadata advertised for the output stream.
    pub fn output_metadata(&self, generated_by: &Iri) -> Option<Graph> {
        let output = self.output.as_ref()?;
        let t = Triple::new(output.clone(), generated_by.clone(), self.iri.clone()).ok()?;
        Some([t].into_iter().collect())
    }

    /// Re-resolves selectors and static bindings after a discovery event.
    /// Windows of topics that disappeared are dropped; everything else is
    /// kept. Returns the results that became true.
    pub fn on_discovery_event(&mut self, knowledge: &Graph, registry_topics: &BTreeSet<Iri>) -> ResultDelta {
        let resolution = resolve_selectors(self.runtime.query(), knowledge, self.runtime.closure(), registry_topics);
        let mut active = Vec::with_capacity(resolution.len());
        for (i, topics) in resolution.into_iter().enumerate() {
            let live: BTreeSet<Iri> = topics.intersection(registry_topics).cloned().collect();
            match &self.runtime.query().streams[i].selector {
                Selector::Var(_) => self.runtime.set_topics(i, live.clone()),
                Selector::Iri(iri) => {
                    if !live.contains(iri) && self.resolved[i].contains(iri) {
                        let iri = iri.clone();
                        self.runtime.drop_topic(&iri);
                    }
                }
            }
            active.push(live);
        }
        self.resolved = active;
        let statics = self.runtime.evaluate_statics(knowledge);
        if statics == *self.runtime.static_bindings() {
            return ResultDelta { bindings: BTreeSet::new(), at_time: self.runtime.watermark() };
        }
        self.runtime.set_static_bindings(statics)
    }

    /// Every topic the query currently subscribes to.
    pub fn subscribed_topics(&self) -> BTreeSet<Iri> {
        self.resolved.iter().flatten().cloned().collect()
    }

    /// Concrete selectors whose topic no node publishes.
    pub fn pending_topics(&self) -> Vec<Iri> {
        self.runtime
            .query()
            .streams
            .iter()
            .zip(&self.resolved)
            .filter_map(|(s, r)| match &s.selector {
                Selector::Iri(iri) if !r.contains(iri) => Some(iri.clone()),
                _ => None,
            })
            .collect()
    }
}

/// `{host}/query/{name}`
pub fn query_iri(host: &Iri, name: &str) -> Result<Iri, FederationError> {
    let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if !ok {
        return Err(FederationError::InvalidName(name.to_string()));
    }
    Iri::new(format!("{}/query/{name}", host.as_str())).map_err(|_| FederationError::InvalidName(name.to_string()))
}
