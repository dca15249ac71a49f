//! Well-known IRIs.

use crate::model::Iri;

fn iri(s: &str) -> Iri {
    Iri::new(s).expect("static IRI is valid")
}

/// A constant IRI, validated once and then handed out as cheap clones.
macro_rules! constant {
    ($(#[$doc:meta])* $name:ident, $iri:literal) => {
        $(#[$doc])*
        pub fn $name() -> super::Iri {
            static IRI: std::sync::LazyLock<super::Iri> = std::sync::LazyLock::new(|| super::iri($iri));
            IRI.clone()
        }
    };
}

pub mod rdf {
    pub const NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";

    constant!(type_, "http://www.w3.org/1999/02/22-rdf-syntax-ns#type");
}

pub mod rdfs {
    pub const NS: &str = "http://www.w3.org/2000/01/rdf-schema#";

    constant!(sub_class_of, "http://www.w3.org/2000/01/rdf-schema#subClassOf");
    constant!(sub_property_of, "http://www.w3.org/2000/01/rdf-schema#subPropertyOf");
}

pub mod xsd {
    pub const NS: &str = "http://www.w3.org/2001/XMLSchema#";

    constant!(string, "http://www.w3.org/2001/XMLSchema#string");
    constant!(integer, "http://www.w3.org/2001/XMLSchema#integer");
    constant!(long, "http://www.w3.org/2001/XMLSchema#long");
    constant!(date_time, "http://www.w3.org/2001/XMLSchema#dateTime");
    constant!(date_time_stamp, "http://www.w3.org/2001/XMLSchema#dateTimeStamp");
}

pub mod ssn {
    pub const NS: &str = "http://www.w3.org/ns/ssn/";
}

pub mod sosa {
    pub const NS: &str = "http://www.w3.org/ns/sosa/";
}

/// Sensor-stream-reasoning vocabulary used by the bundled scenarios.
pub mod ssr {
    pub const NS: &str = "https://w3id.org/semrob/ssr#";
}

/// Default namespace bound to the empty prefix `:` unless a scenario overrides it.
pub const DEFAULT_BASE: &str = "https://w3id.org/semrob/ex#";

/// Vocabulary of discovery advertisements and service payloads.
pub mod sys {
    pub const NS: &str = "https://w3id.org/semrob/sys#";

    constant!(event, "https://w3id.org/semrob/sys#event");
    constant!(join, "https://w3id.org/semrob/sys#Join");
    constant!(leave, "https://w3id.org/semrob/sys#Leave");
    constant!(announce, "https://w3id.org/semrob/sys#Announce");
    constant!(version, "https://w3id.org/semrob/sys#version");
    constant!(publishes, "https://w3id.org/semrob/sys#publishes");
    constant!(describes, "https://w3id.org/semrob/sys#describes");
    constant!(requests, "https://w3id.org/semrob/sys#requests");
    constant!(registry_dump, "https://w3id.org/semrob/sys#RegistryDump");

    constant!(
        /// Reserved broker channel carrying join/leave advertisements.
        discovery_topic,
        "sys:discovery"
    );

    /// Reserved per-node service channel.
    pub fn service_topic(node: &super::Iri) -> super::Iri {
        super::iri(&format!("sys:service/{}", node.as_str()))
    }

    pub fn is_reserved(topic: &super::Iri) -> bool {
        topic.as_str().starts_with("sys:")
    }
}
