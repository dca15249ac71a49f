use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ScenarioFile {
    #[serde(default)]
    pub prefixes: BTreeMap<String, String>,
    #[serde(default)]
    pub ontology: OntologySection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, rename = "node")]
    pub nodes: Vec<NodeSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct OntologySection {
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub sub_property_of: Vec<[String; 2]>,
    #[serde(default)]
    pub sub_class_of: Vec<[String; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RunSection {
    pub duration_ms: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_timeout")]
    pub service_timeout_ms: u64,
    pub generated_by: Option<String>,
    #[serde(default)]
    pub latency: LatencySection,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            duration_ms: None,
            seed: 0,
            service_timeout_ms: default_timeout(),
            generated_by: None,
            latency: LatencySection::default(),
        }
    }
}

fn default_timeout() -> u64 {
    1_000
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct LatencySection {
    #[serde(default)]
    pub default_ms: u64,
    #[serde(default)]
    pub jitter_ms: u64,
    #[serde(default, rename = "link")]
    pub links: Vec<LinkSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct LinkSection {
    pub from: String,
    pub to: String,
    pub ms: u64,
    #[serde(default)]
    pub symmetric: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct NodeSection {
    pub id: String,
    pub knowledge: Option<PathBuf>,
    #[serde(default)]
    pub join_ms: u64,
    pub leave_ms: Option<u64>,
    #[serde(default, rename = "stream")]
    pub streams: Vec<StreamSection>,
    #[serde(default, rename = "query")]
    pub queries: Vec<QuerySection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct StreamSection {
    pub topic: String,
    #[serde(default)]
    pub metadata: Vec<[String; 3]>,
    pub metadata_file: Option<PathBuf>,
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct QuerySection {
    pub name: String,
    pub file: Option<PathBuf>,
    pub text: Option<String>,
    pub deploy_ms: Option<u64>,
    #[serde(default = "yes")]
    pub tee: bool,
}

fn yes() -> bool {
    true
}
