//! Semantic nodes, the simulated publish/subscribe broker, request/response
//! services and the discovery protocol.

mod advert;
mod broker;
mod domain;
mod node;

use thiserror::Error;

use crate::codec::CodecError;
use crate::federation::FederationError;
use crate::model::Iri;

pub use advert::{AdvertError, AdvertEvent, Advertisement, Registry, RegistryEntry};
pub use broker::{Broker, BrokerStats, Delivery, LatencyModel, Message, Stamp, VirtualTime};
pub use domain::{Domain, DomainConfig, DomainMetrics, Mode};
pub use node::{DeliveryRecord, NodeEvent, NodeMetrics, NodeSpec, ResultRecord, SemanticNode, StreamDecl};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("node id {0} is already in use")]
    DuplicateNodeId(Iri),
    #[error("no node {0}")]
    UnknownNode(Iri),
    #[error("topic {0} was not declared by the publishing node")]
    UndeclaredTopic(Iri),
    #[error("node {0} is not available")]
    NodeUnavailable(Iri),
    #[error("service call to {to} timed out (round trip {round_trip_ms} ms)")]
    Timeout { to: Iri, round_trip_ms: u64 },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Federation(#[from] FederationError),
}
