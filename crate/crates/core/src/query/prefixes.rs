use std::collections::BTreeMap;

use crate::model::Iri;
use crate::vocab;

/// Prefix table used to expand prefixed names such as `ssn:resultTime`.
/// The empty prefix is the default namespace bound to `:`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrefixMap {
    entries: BTreeMap<String, String>,
}

impl PrefixMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// rdf, rdfs, xsd, ssn, sosa, ssr, sys and the default namespace.
    pub fn standard() -> Self {
        let mut map = Self::new();
        map.insert("rdf", vocab::rdf::NS);
        map.insert("rdfs", vocab::rdfs::NS);
        map.insert("xsd", vocab::xsd::NS);
        map.insert("ssn", vocab::ssn::NS);
        map.insert("sosa", vocab::sosa::NS);
        map.insert("ssr", vocab::ssr::NS);
        map.insert("semrob", vocab::sys::NS);
        map.insert("", vocab::DEFAULT_BASE);
        map
    }

    pub fn insert(&mut self, prefix: impl Into<String>, namespace: impl Into<String>) {
        self.entries.insert(prefix.into(), namespace.into());
    }

    pub fn namespace(&self, prefix: &str) -> Option<&str> {
        self.entries.get(prefix).map(String::as_str)
    }

    pub fn expand(&self, prefix: &str, local: &str) -> Option<Iri> {
        let ns = self.namespace(prefix)?;
        Iri::new(format!("{ns}{local}")).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
