use crate::codec;
use crate::model::Graph;

/// One recorded message: when its node emits it, and the payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayMessage {
    pub emit_ms: u64,
    pub graph: Graph,
}

/// Parses a replay file. Each message starts with a line `@ <ms>`; the
/// lines up to the next `@` are its payload in the message codec.
/// Problems are reported with 1-based line numbers and parsing continues
/// with the next message.
pub fn parse_replay(text: &str) -> (Vec<ReplayMessage>, Vec<(usize, String)>) {
    let mut messages = Vec::new();
    let mut problems = Vec::new();
    let mut current: Option<(usize, u64, String)> = None;
    let mut last_emit: Option<u64> = None;

    let finish = |cur: Option<(usize, u64, String)>, messages: &mut Vec<ReplayMessage>, problems: &mut Vec<(usize, String)>| {
        let Some((line, emit_ms, body)) = cur else { return };
        match codec::decode(&body) {
            Ok(graph) => messages.push(ReplayMessage { emit_ms, graph }),
            Err(e) => problems.push((line + e.line, e.reason)),
        }
    };

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix('@') {
            finish(current.take(), &mut messages, &mut problems);
            match rest.trim().parse::<u64>() {
                Ok(ms) => {
                    if last_emit.is_some_and(|prev| ms < prev) {
                        problems.push((line, format!("emit time {ms} is earlier than the previous message")));
                    }
                    last_emit = Some(ms);
                    current = Some((line, ms, String::new()));
                }
                Err(_) => problems.push((line, format!("bad emit time {:?}", rest.trim()))),
            }
            continue;
        }
        match current.as_mut() {
            Some((_, _, body)) => {
                body.push_str(raw);
                body.push('\n');
            }
            None if trimmed.is_empty() || trimmed.starts_with('#') => {}
            None => problems.push((line, "payload before the first `@ <ms>` line".to_string())),
        }
    }
    finish(current.take(), &mut messages, &mut problems);
    (messages, problems)
}

/// Inverse of [`parse_replay`].
pub fn write_replay(messages: &[ReplayMessage]) -> String {
    let mut out = String::new();
    for m in messages {
        out.push_str(&format!("@ {}\n", m.emit_ms));
        out.push_str(&codec::encode(&m.graph));
    }
    out
}
