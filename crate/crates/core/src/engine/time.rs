use chrono::{DateTime, NaiveDateTime};

use super::EngineError;
use crate::codec::encode_triple;
use crate::model::{Graph, Iri, Term};
use crate::vocab::xsd;

/// Application time in milliseconds since the Unix epoch.
pub type Millis = i64;

/// Reads the timestamp object of the canonically first `on` triple.
pub fn extract_app_time(graph: &Graph, on: &Iri) -> Result<Millis, EngineError> {
    let mut candidates: Vec<(String, &Term)> = graph
        .with_predicate(on)
        .map(|t| (encode_triple(t), t.object()))
        .collect();
    candidates.sort_by(|a, b| a.0.cmp(&b.0));
    let Some((line, object)) = candidates.first() else {
        return Err(EngineError::MissingTimestamp(on.clone()));
    };
    if candidates.iter().any(|(_, o)| *o != *object) {
        log::warn!("{} timestamps under {on}; using {line}", candidates.len());
    }
    parse_timestamp(object)
}

/// Accepts `xsd:dateTime`/`xsd:dateTimeStamp` (no offset means UTC) and
/// integer milliseconds.
pub fn parse_timestamp(term: &Term) -> Result<Millis, EngineError> {
    let malformed = || EngineError::MalformedTimestamp(term.to_string());
    let lit = term.as_literal().ok_or_else(malformed)?;
    let dt = lit.datatype();
    if *dt == xsd::integer() || *dt == xsd::long() {
        lit.lexical().trim().parse::<i64>().map_err(|_| malformed())
    } else if *dt == xsd::date_time() || *dt == xsd::date_time_stamp() {
        let text = lit.lexical().trim();
        if let Ok(t) = DateTime::parse_from_rfc3339(text) {
            return Ok(t.timestamp_millis());
        }
        NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S%.f")
            .map(|t| t.and_utc().timestamp_millis())
            .map_err(|_| malformed())
    } else {
        Err(malformed())
    }
}

/// Formats milliseconds as an `xsd:dateTime` lexical form in UTC.
pub fn format_date_time(ms: Millis) -> Option<String> {
    DateTime::from_timestamp_millis(ms).map(|t| t.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string())
}
