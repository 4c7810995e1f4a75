//! Event log records and the aggregates learned from them.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::CategoryId;
use crate::click_model::Outcome;
use crate::weights::CategoryStats;

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    View,
    Click,
}

/// The interactions that count as a click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickKind {
    Favorite,
    DetailPage,
    Modal,
}

/// One line of the event log. `category` is null for items missing from
/// the catalog when the event arrived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_id: Option<String>,
    pub user_id: String,
    pub item_id: String,
    #[serde(default)]
    pub category: Option<CategoryId>,
    pub event: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<ClickKind>,
    pub ts: i64,
}

impl EventRecord {
    pub fn is_click(&self) -> bool {
        self.event == EventKind::Click
    }
}

impl CategoryStats {
    /// Counts one event; events without a category below `d` are ignored.
    pub fn record(&mut self, e: &EventRecord, d: usize) {
        match e.category {
            Some(c) if c < d && c < self.views.len() => match e.event {
                EventKind::View => self.views[c] += 1,
                EventKind::Click => self.clicks[c] += 1,
            },
            _ => {}
        }
    }
}

/// Interaction types accepted from clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionType {
    View,
    Favorite,
    DetailPage,
    Modal,
}

impl InteractionType {
    pub fn kind(self) -> (EventKind, Option<ClickKind>) {
        match self {
            InteractionType::View => (EventKind::View, None),
            InteractionType::Favorite => (EventKind::Click, Some(ClickKind::Favorite)),
            InteractionType::DetailPage => (EventKind::Click, Some(ClickKind::DetailPage)),
            InteractionType::Modal => (EventKind::Click, Some(ClickKind::Modal)),
        }
    }
}

/// One client interaction as posted to the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventEnvelope {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_id: Option<String>,
    pub user_id: String,
    pub item_id: String,
    #[serde(rename = "type")]
    pub kind: InteractionType,
    pub ts: i64,
}

impl EventEnvelope {
    pub fn into_record(self, category: Option<CategoryId>) -> EventRecord {
        let (event, subtype) = self.kind.kind();
        EventRecord {
            event_id: self.event_id,
            user_id: self.user_id,
            item_id: self.item_id,
            category,
            event,
            subtype,
            ts: self.ts,
        }
    }
}

pub fn read_event_log(path: impl AsRef<Path>) -> Result<Vec<EventRecord>, EventLogError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EventLogError::Malformed {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Reads a log that may end in a partially written line, as left by a crash
/// mid-append. Returns the records and the byte length of the valid prefix.
pub fn read_event_log_recovering(path: impl AsRef<Path>) -> Result<(Vec<EventRecord>, u64), EventLogError> {
    let bytes = std::fs::read(path)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let mut out = Vec::new();
    for (i, line) in bytes[..complete].split(|&b| b == b'\n').enumerate() {
        let text = std::str::from_utf8(line).map_err(|e| EventLogError::Malformed {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(text).map_err(|e| EventLogError::Malformed {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    if complete < bytes.len() {
        log::warn!("ignoring {} bytes of incomplete trailing event", bytes.len() - complete);
    }
    Ok((out, complete as u64))
}

pub fn write_events<W: Write>(mut out: W, events: &[EventRecord]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Clicks and views per category. Events without a category below `d` are skipped.
pub fn category_stats<'a>(events: impl IntoIterator<Item = &'a EventRecord>, d: usize) -> CategoryStats {
    let mut stats = CategoryStats::new(d);
    for e in events {
        stats.record(e, d);
    }
    stats
}

/// Each user's click categories in log order.
pub fn user_click_lists<'a>(
    events: impl IntoIterator<Item = &'a EventRecord>,
) -> BTreeMap<String, Vec<CategoryId>> {
    let mut out: BTreeMap<String, Vec<CategoryId>> = BTreeMap::new();
    for e in events.into_iter().filter(|e| e.is_click()) {
        if let Some(c) = e.category {
            out.entry(e.user_id.clone()).or_default().push(c);
        }
    }
    out
}

/// Click-model training pairs in log order: every view is an observation,
/// clicked when a later click by the same user on the same item claims it.
/// Clicks that find no unclaimed view become click observations of their own.
pub fn observations<'a>(events: impl IntoIterator<Item = &'a EventRecord>) -> Vec<(String, Outcome)> {
    let mut out: Vec<(String, Outcome)> = Vec::new();
    let mut open: HashMap<(&str, &str), VecDeque<usize>> = HashMap::new();
    for e in events {
        let key = (e.user_id.as_str(), e.item_id.as_str());
        match e.event {
            EventKind::View => {
                open.entry(key).or_default().push_back(out.len());
                out.push((e.item_id.clone(), Outcome::NotClicked));
            }
            EventKind::Click => match open.get_mut(&key).and_then(VecDeque::pop_front) {
                Some(idx) => out[idx].1 = Outcome::Clicked,
                None => out.push((e.item_id.clone(), Outcome::Clicked)),
            },
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(user: &str, item: &str, category: CategoryId, event: EventKind, ts: i64) -> EventRecord {
        EventRecord {
            event_id: None,
            user_id: user.into(),
            item_id: item.into(),
            category: Some(category),
            event,
            subtype: None,
            ts,
        }
    }

    #[test]
    fn pairs_clicks_with_views() {
        use EventKind::*;
        let log = vec![
            ev("u", "a", 0, View, 1),
            ev("u", "b", 1, View, 2),
            ev("v", "a", 0, View, 3),
            ev("u", "a", 0, Click, 4),
            ev("w", "c", 2, Click, 5),
        ];
        let obs = observations(&log);
        assert_eq!(
            obs,
            vec![
                ("a".to_string(), Outcome::Clicked),
                ("b".to_string(), Outcome::NotClicked),
                ("a".to_string(), Outcome::NotClicked),
                ("c".to_string(), Outcome::Clicked),
            ]
        );
        let stats = category_stats(&log, 3);
        assert_eq!(stats.views, vec![2, 1, 0]);
        assert_eq!(stats.clicks, vec![1, 0, 1]);
        let users = user_click_lists(&log);
        assert_eq!(users["u"], vec![0]);
        assert!(!users.contains_key("v"));
    }

    #[test]
    fn log_round_trip_and_line_errors() {
        let log = vec![EventRecord {
            event_id: Some("e1".into()),
            subtype: Some(ClickKind::Favorite),
            ..ev("u", "a", 0, EventKind::Click, 9)
        }];
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write_events(&mut f, &log).unwrap();
        writeln!(f).unwrap();
        assert_eq!(read_event_log(f.path()).unwrap(), log);
        writeln!(f, "{{\"user_id\": 3}}").unwrap();
        match read_event_log(f.path()) {
            Err(EventLogError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = serde_json::to_string(&log[0]).unwrap();
        assert!(text.contains("\"event\":\"click\"") && text.contains("\"subtype\":\"favorite\""));
    }

    #[test]
    fn recovering_reader_drops_partial_tail() {
        let log = vec![ev("u", "a", 0, EventKind::View, 1), ev("u", "a", 0, EventKind::Click, 2)];
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write_events(&mut f, &log).unwrap();
        let full = f.as_file().metadata().unwrap().len();
        write!(f, "{{\"user_id\":\"u\",\"item").unwrap();
        let (read, valid) = read_event_log_recovering(f.path()).unwrap();
        assert_eq!((read, valid), (log, full));
    }

    #[test]
    fn envelope_types_map_to_clicks() {
        let env: EventEnvelope =
            serde_json::from_str(r#"{"user_id":"u","item_id":"a","type":"detail_page","ts":5}"#).unwrap();
        let rec = env.into_record(None);
        assert!(rec.is_click());
        assert_eq!(rec.subtype, Some(ClickKind::DetailPage));
        let text = serde_json::to_string(&rec).unwrap();
        assert!(text.contains("\"category\":null"));
        assert!(serde_json::from_str::<EventEnvelope>(r#"{"user_id":"u","item_id":"a","type":"click","ts":5}"#).is_err());
        let spec_line = r#"{"user_id":"u","item_id":"a","category":3,"event":"view","ts":1}"#;
        assert_eq!(serde_json::from_str::<EventRecord>(spec_line).unwrap().category, Some(3));
    }
}
