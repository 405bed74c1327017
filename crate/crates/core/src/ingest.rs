//! Parsing and validation of the input archives.
//!
//! Tweets are read from line-delimited JSON with per-line error accumulation,
//! since social data is dirty and a bad line should not sink a 15M-line file.
//! Rates and events are small curated CSV files and fail fast on the first
//! bad row: corrupt market data would invalidate every downstream return.
//!
//! All timestamps are normalized to UTC when parsed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, Read};

use chrono::{DateTime, SecondsFormat, Timelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A tweet's implied trading signal for EUR against USD.
///
/// The derived ordering is `Sell < Hold < Buy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Sell,
    Hold,
    Buy,
}

impl Stance {
    /// Buy, Hold, Sell: the row/column order used by confusion matrices and reports.
    pub const REPORT_ORDER: [Stance; 3] = [Stance::Buy, Stance::Hold, Stance::Sell];

    /// Position in [`Stance::REPORT_ORDER`].
    pub fn report_index(self) -> usize {
        match self {
            Stance::Buy => 0,
            Stance::Hold => 1,
            Stance::Sell => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Buy => "buy",
            Stance::Hold => "hold",
            Stance::Sell => "sell",
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Stance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "buy" => Ok(Stance::Buy),
            "hold" => Ok(Stance::Hold),
            "sell" => Ok(Stance::Sell),
            other => Err(format!("unknown stance {other:?}")),
        }
    }
}

/// Second-precision RFC 3339 timestamps, always written with a `Z` suffix.
mod utc_seconds {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_timestamp(*t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse_timestamp(&raw).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(t: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
            match t {
                Some(t) => super::serialize(t, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Option<DateTime<Utc>>, D::Error> {
            match Option::<String>::deserialize(d)? {
                Some(raw) => parse_timestamp(&raw).map(Some).map_err(serde::de::Error::custom),
                None => Ok(None),
            }
        }
    }
}

/// Parses an RFC 3339 timestamp, converts it to UTC and drops sub-second digits.
pub fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, String> {
    let parsed = DateTime::parse_from_rfc3339(raw.trim())
        .map_err(|e| format!("invalid timestamp {raw:?}: {e}"))?;
    let utc = parsed.with_timezone(&Utc);
    Ok(utc.with_nanosecond(0).unwrap_or(utc))
}

/// Formats a timestamp as `YYYY-MM-DDTHH:MM:SSZ`.
pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One collected tweet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    #[serde(rename = "user_id", alias = "author_id")]
    pub author_id: String,
    #[serde(with = "utc_seconds")]
    pub timestamp: DateTime<Utc>,
    pub text: String,
    pub is_retweet: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweet_of: Option<String>,
    /// How many times other users retweeted this tweet.
    pub retweet_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<Stance>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub deleted: bool,
    #[serde(
        default,
        with = "utc_seconds::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub audit_time: Option<DateTime<Utc>>,
}

impl TweetRecord {
    fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        match (self.is_retweet, &self.retweet_of) {
            (true, None) => Err("is_retweet is true but retweet_of is missing".into()),
            (false, Some(_)) => Err("retweet_of present but is_retweet is false".into()),
            _ => Ok(()),
        }
    }

    /// Serializes the record as one archive line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("tweet records always serialize")
    }
}

/// A per-line failure while reading a tweet archive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseError {
    /// 1-based physical line number.
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

/// Result of parsing a tweet archive: the valid records in input order and
/// every rejected line.
#[derive(Debug, Clone, Default)]
pub struct TweetArchive {
    pub records: Vec<TweetRecord>,
    pub errors: Vec<ParseError>,
}

/// Fatal ingest errors.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("non-monotonic at row {row}")]
    NonMonotonic { row: usize },
    #[error("audit line {line}: {reason}")]
    AuditLine { line: usize, reason: String },
    #[error("conflicting audit entries for ids: {}", ids.join(", "))]
    ConflictingAudit { ids: Vec<String> },
    #[error("audit for {id} checked at {checked_at} precedes the tweet ({tweet_time})")]
    AuditPredatesTweet {
        id: String,
        checked_at: String,
        tweet_time: String,
    },
}

/// Parses line-delimited tweet objects. Blank lines are ignored; every other
/// line yields either a record or a [`ParseError`]. Duplicate ids keep the
/// first occurrence.
pub fn parse_tweet_archive<I, S>(lines: I) -> TweetArchive
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut archive = TweetArchive::default();
    let mut first_seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in lines.into_iter().enumerate() {
        let line_no = idx + 1;
        let line = line.as_ref().trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let record = match serde_json::from_str::<TweetRecord>(line) {
            Ok(r) => r,
            Err(e) => {
                archive.errors.push(ParseError {
                    line: line_no,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if let Err(reason) = record.validate() {
            archive.errors.push(ParseError { line: line_no, reason });
            continue;
        }
        if let Some(&first) = first_seen.get(&record.id) {
            archive.errors.push(ParseError {
                line: line_no,
                reason: format!("duplicate id {:?} (first seen at line {first})", record.id),
            });
            continue;
        }
        first_seen.insert(record.id.clone(), line_no);
        archive.records.push(record);
    }
    archive
}

/// Streams a tweet archive from a reader.
pub fn read_tweet_archive<R: BufRead>(reader: R) -> Result<TweetArchive, IngestError> {
    let lines = reader.lines().collect::<Result<Vec<_>, _>>()?;
    Ok(parse_tweet_archive(lines))
}

/// One minute-resolution price observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub timestamp: DateTime<Utc>,
    pub price: f64,
}

/// Time-ordered prices for one currency pair. Market-closure gaps are kept as-is.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    pub pair: String,
    points: Vec<RatePoint>,
}

impl RateSeries {
    /// Builds a series, checking strict time order, minute alignment and positive prices.
    /// Row numbers in errors are 1-based positions in `points`.
    pub fn new(pair: impl Into<String>, points: Vec<RatePoint>) -> Result<Self, IngestError> {
        for (i, p) in points.iter().enumerate() {
            check_rate_point(i + 1, p)?;
            if i > 0 && p.timestamp <= points[i - 1].timestamp {
                return Err(IngestError::NonMonotonic { row: i + 1 });
            }
        }
        Ok(RateSeries {
            pair: pair.into(),
            points,
        })
    }

    pub fn points(&self) -> &[RatePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes the series in the `timestamp,price` CSV layout.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,price\n");
        for p in &self.points {
            out.push_str(&format_timestamp(p.timestamp));
            out.push(',');
            out.push_str(&p.price.to_string());
            out.push('\n');
        }
        out
    }
}

fn check_rate_point(row: usize, p: &RatePoint) -> Result<(), IngestError> {
    if !(p.price.is_finite() && p.price > 0.0) {
        return Err(IngestError::Row {
            row,
            reason: format!("price must be positive, got {}", p.price),
        });
    }
    if p.timestamp.second() != 0 || p.timestamp.nanosecond() != 0 {
        return Err(IngestError::Row {
            row,
            reason: format!(
                "timestamp {} is not minute-aligned",
                format_timestamp(p.timestamp)
            ),
        });
    }
    Ok(())
}

fn check_header(
    reader: &mut csv::Reader<impl Read>,
    expected: &[&str],
) -> Result<(), IngestError> {
    let header = reader.headers().map_err(|e| IngestError::Row {
        row: 0,
        reason: e.to_string(),
    })?;
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != expected {
        return Err(IngestError::Header {
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(())
}

/// Parses `rates.csv`. Row numbers count data rows from 1 (the header is not a row).
pub fn parse_rate_series(pair: &str, input: impl Read) -> Result<RateSeries, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(&mut reader, &["timestamp", "price"])?;
    let mut points: Vec<RatePoint> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| IngestError::Row {
            row,
            reason: e.to_string(),
        })?;
        let timestamp = parse_timestamp(&rec[0]).map_err(|reason| IngestError::Row { row, reason })?;
        let price: f64 = rec[1].parse().map_err(|_| IngestError::Row {
            row,
            reason: format!("invalid price {:?}", &rec[1]),
        })?;
        let point = RatePoint { timestamp, price };
        check_rate_point(row, &point)?;
        if points.last().is_some_and(|last| last.timestamp >= timestamp) {
            return Err(IngestError::NonMonotonic { row });
        }
        points.push(point);
    }
    Ok(RateSeries {
        pair: pair.to_string(),
        points,
    })
}

/// Who issued an announcement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventSource {
    #[serde(rename = "ECB")]
    Ecb,
    #[serde(rename = "FED")]
    Fed,
    #[serde(rename = "GOV")]
    Gov,
}

impl EventSource {
    pub fn as_str(self) -> &'static str {
        match self {
            EventSource::Ecb => "ECB",
            EventSource::Fed => "FED",
            EventSource::Gov => "GOV",
        }
    }
}

impl std::str::FromStr for EventSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ECB" => Ok(EventSource::Ecb),
            "FED" => Ok(EventSource::Fed),
            "GOV" => Ok(EventSource::Gov),
            other => Err(format!("unknown source {other:?} (expected ECB, FED or GOV)")),
        }
    }
}

/// A central-bank or government announcement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnouncementEvent {
    pub event_id: String,
    #[serde(with = "utc_seconds")]
    pub timestamp: DateTime<Utc>,
    pub source: EventSource,
    pub description: String,
}

/// Event ids are assigned after sorting: `E00001` is the earliest announcement.
pub fn event_id_for_position(pos: usize) -> String {
    format!("E{:05}", pos + 1)
}

/// Parses `events.csv` and returns the events sorted by time (stable for ties).
pub fn parse_event_list(input: impl Read) -> Result<Vec<AnnouncementEvent>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(&mut reader, &["timestamp", "source", "description"])?;
    let mut events = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| IngestError::Row {
            row,
            reason: e.to_string(),
        })?;
        let timestamp = parse_timestamp(&rec[0]).map_err(|reason| IngestError::Row { row, reason })?;
        let source = rec[1]
            .parse::<EventSource>()
            .map_err(|reason| IngestError::Row { row, reason })?;
        events.push(AnnouncementEvent {
            event_id: String::new(),
            timestamp,
            source,
            description: rec[2].to_string(),
        });
    }
    events.sort_by_key(|e| e.timestamp);
    for (pos, e) in events.iter_mut().enumerate() {
        e.event_id = event_id_for_position(pos);
    }
    Ok(events)
}

/// Writes events in the `events.csv` layout, in the given order.
pub fn write_event_list(events: &[AnnouncementEvent]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["timestamp", "source", "description"])
        .expect("in-memory csv");
    for e in events {
        w.write_record([
            format_timestamp(e.timestamp).as_str(),
            e.source.as_str(),
            e.description.as_str(),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

/// One re-check of a collected tweet id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletionAuditEntry {
    #[serde(rename = "id")]
    pub tweet_id: String,
    pub alive: bool,
    #[serde(with = "utc_seconds")]
    pub checked_at: DateTime<Utc>,
}

impl DeletionAuditEntry {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("audit entries always serialize")
    }
}

/// Parses `audit.jsonl`, failing on the first malformed line.
pub fn parse_audit<I, S>(lines: I) -> Result<Vec<DeletionAuditEntry>, IngestError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = Vec::new();
    for (idx, line) in lines.into_iter().enumerate() {
        let line = line.as_ref().trim();
        if line.is_empty() {
            continue;
        }
        let entry: DeletionAuditEntry =
            serde_json::from_str(line).map_err(|e| IngestError::AuditLine {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        out.push(entry);
    }
    Ok(out)
}

pub fn read_audit<R: BufRead>(reader: R) -> Result<Vec<DeletionAuditEntry>, IngestError> {
    let lines = reader.lines().collect::<Result<Vec<_>, _>>()?;
    parse_audit(lines)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AuditOptions {
    /// Resolve alive/dead conflicts for one id by the most recent `checked_at`.
    pub latest_wins: bool,
}

/// Tweets with deletion flags applied, plus audit ids that matched no tweet
/// (in order of first appearance in the audit).
#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub tweets: Vec<TweetRecord>,
    pub unmatched: Vec<String>,
}

/// Marks tweets the audit found dead. Every matched tweet gets `audit_time`;
/// tweets absent from the audit are left untouched.
pub fn apply_deletion_audit(
    mut tweets: Vec<TweetRecord>,
    audit: &[DeletionAuditEntry],
    options: AuditOptions,
) -> Result<AuditOutcome, IngestError> {
    // BTreeMap keeps conflict reporting deterministic.
    let mut grouped: BTreeMap<&str, Vec<&DeletionAuditEntry>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for entry in audit {
        let slot = grouped.entry(entry.tweet_id.as_str()).or_default();
        if slot.is_empty() {
            order.push(entry.tweet_id.as_str());
        }
        slot.push(entry);
    }

    let mut resolved: HashMap<&str, (bool, DateTime<Utc>)> = HashMap::new();
    let mut conflicts = Vec::new();
    for (id, entries) in &grouped {
        let any_alive = entries.iter().any(|e| e.alive);
        let any_dead = entries.iter().any(|e| !e.alive);
        let latest = entries.iter().map(|e| e.checked_at).max().expect("nonempty");
        if any_alive && any_dead {
            let at_latest: Vec<bool> = entries
                .iter()
                .filter(|e| e.checked_at == latest)
                .map(|e| e.alive)
                .collect();
            let unanimous = at_latest.iter().all(|&a| a == at_latest[0]);
            if options.latest_wins && unanimous {
                resolved.insert(id, (at_latest[0], latest));
            } else {
                conflicts.push(id.to_string());
            }
        } else {
            resolved.insert(id, (any_alive, latest));
        }
    }
    if !conflicts.is_empty() {
        return Err(IngestError::ConflictingAudit { ids: conflicts });
    }

    let unmatched: Vec<String> = {
        let ids: HashSet<&str> = tweets.iter().map(|t| t.id.as_str()).collect();
        order
            .into_iter()
            .filter(|id| !ids.contains(id))
            .map(str::to_string)
            .collect()
    };
    for tweet in tweets.iter_mut() {
        if let Some(&(alive, checked_at)) = resolved.get(tweet.id.as_str()) {
            if checked_at < tweet.timestamp {
                return Err(IngestError::AuditPredatesTweet {
                    id: tweet.id.clone(),
                    checked_at: format_timestamp(checked_at),
                    tweet_time: format_timestamp(tweet.timestamp),
                });
            }
            tweet.deleted = !alive;
            tweet.audit_time = Some(checked_at);
        }
    }
    Ok(AuditOutcome { tweets, unmatched })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"id":"1","user_id":"u1","timestamp":"2014-01-02T10:00:00Z","text":"EURUSD up","is_retweet":false,"retweet_count":0}"#;

    fn line(id: &str, ts: &str) -> String {
        format!(
            r#"{{"id":"{id}","user_id":"u1","timestamp":"{ts}","text":"t {id}","is_retweet":false,"retweet_count":0}}"#
        )
    }

    fn ts(s: &str) -> DateTime<Utc> {
        parse_timestamp(s).unwrap()
    }

    #[test]
    fn minimal_record_parses() {
        let archive = parse_tweet_archive([MINIMAL]);
        assert!(archive.errors.is_empty());
        assert_eq!(archive.records.len(), 1);
        let r = &archive.records[0];
        assert_eq!(r.author_id, "u1");
        assert_eq!(r.timestamp, ts("2014-01-02T10:00:00Z"));
        assert!(!r.deleted);
        assert_eq!(r.gold_label, None);
    }

    #[test]
    fn empty_stream() {
        let archive = parse_tweet_archive(Vec::<String>::new());
        assert!(archive.records.is_empty());
        assert!(archive.errors.is_empty());
    }

    #[test]
    fn bad_timestamp_on_fourth_line() {
        let lines = vec![
            line("a", "2014-01-02T10:00:00Z"),
            line("b", "2014-01-02T10:01:00Z"),
            line("c", "2014-01-02T10:02:00Z"),
            line("d", "not-a-date"),
        ];
        let archive = parse_tweet_archive(&lines);
        assert_eq!(archive.records.len(), 3);
        assert_eq!(archive.errors.len(), 1);
        assert_eq!(archive.errors[0].line, 4);
    }

    #[test]
    fn duplicate_ids_keep_first() {
        let lines = vec![
            line("a", "2014-01-02T10:00:00Z"),
            String::new(),
            line("a", "2014-01-02T10:05:00Z"),
        ];
        let archive = parse_tweet_archive(&lines);
        assert_eq!(archive.records.len(), 1);
        assert_eq!(archive.records[0].timestamp, ts("2014-01-02T10:00:00Z"));
        assert_eq!(archive.errors[0].line, 3);
        assert!(archive.errors[0].reason.contains("line 1"));
    }

    #[test]
    fn retweet_invariants() {
        let bad = r#"{"id":"1","user_id":"u","timestamp":"2014-01-02T10:00:00Z","text":"RT x","is_retweet":true,"retweet_count":0}"#;
        let bad2 = r#"{"id":"2","user_id":"u","timestamp":"2014-01-02T10:00:00Z","text":"x","is_retweet":false,"retweet_of":"9","retweet_count":0}"#;
        let neg = r#"{"id":"3","user_id":"u","timestamp":"2014-01-02T10:00:00Z","text":"x","is_retweet":false,"retweet_count":-1}"#;
        let empty_id = r#"{"id":"","user_id":"u","timestamp":"2014-01-02T10:00:00Z","text":"x","is_retweet":false,"retweet_count":0}"#;
        let archive = parse_tweet_archive([bad, bad2, neg, empty_id]);
        assert!(archive.records.is_empty());
        assert_eq!(
            archive.errors.iter().map(|e| e.line).collect::<Vec<_>>(),
            vec![1, 2, 3, 4]
        );
    }

    #[test]
    fn timestamps_normalize_to_utc() {
        assert_eq!(
            parse_timestamp("2014-01-02T12:00:00.750+02:00").unwrap(),
            ts("2014-01-02T10:00:00Z")
        );
        assert_eq!(format_timestamp(ts("2014-01-02T10:00:00Z")), "2014-01-02T10:00:00Z");
    }

    #[test]
    fn gold_label_and_deletion_fields() {
        let l = r#"{"id":"1","user_id":"u","timestamp":"2014-01-02T10:00:00Z","text":"x","is_retweet":true,"retweet_of":"0","retweet_count":3,"gold_label":"sell","deleted":true,"audit_time":"2015-01-01T00:00:00Z"}"#;
        let r = &parse_tweet_archive([l]).records[0];
        assert_eq!(r.gold_label, Some(Stance::Sell));
        assert!(r.deleted);
        assert_eq!(r.audit_time, Some(ts("2015-01-01T00:00:00Z")));
        assert_eq!(r.to_json_line(), l);
    }

    #[test]
    fn stance_order() {
        assert!(Stance::Sell < Stance::Hold && Stance::Hold < Stance::Buy);
    }

    #[test]
    fn two_rate_rows() {
        let csv = "timestamp,price\n2014-01-02T10:00:00Z,1.10\n2014-01-02T10:01:00Z,1.11\n";
        let s = parse_rate_series("EURUSD", csv.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.points()[1].price, 1.11);
    }

    #[test]
    fn non_monotonic_rates() {
        let csv = "timestamp,price\n2014-01-02T10:00:00Z,1.10\n2014-01-02T10:02:00Z,1.11\n2014-01-02T10:01:00Z,1.12\n";
        let err = parse_rate_series("EURUSD", csv.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "non-monotonic at row 3");
    }

    #[test]
    fn nonpositive_price_rejected() {
        let csv = "timestamp,price\n2014-01-02T10:00:00Z,0\n";
        assert!(matches!(
            parse_rate_series("EURUSD", csv.as_bytes()),
            Err(IngestError::Row { row: 1, .. })
        ));
        let csv = "timestamp,price\n2014-01-02T10:00:00Z,-1.2\n";
        assert!(parse_rate_series("EURUSD", csv.as_bytes()).is_err());
    }

    #[test]
    fn rate_header_checked() {
        let csv = "time,price\n2014-01-02T10:00:00Z,1.1\n";
        assert!(matches!(
            parse_rate_series("EURUSD", csv.as_bytes()),
            Err(IngestError::Header { .. })
        ));
    }

    #[test]
    fn weekend_gap_preserved() {
        // Friday 21:57..21:59, then Sunday 22:00..22:02
        let rows = [
            "2014-01-03T21:57:00Z",
            "2014-01-03T21:58:00Z",
            "2014-01-03T21:59:00Z",
            "2014-01-05T22:00:00Z",
            "2014-01-05T22:01:00Z",
            "2014-01-05T22:02:00Z",
        ];
        let mut csv = String::from("timestamp,price\n");
        for r in &rows {
            csv.push_str(&format!("{r},1.3600\n"));
        }
        let s = parse_rate_series("EURUSD", csv.as_bytes()).unwrap();
        assert_eq!(s.len(), rows.len());
        let gap = s.points()[3].timestamp - s.points()[2].timestamp;
        assert_eq!(gap.num_minutes(), 2 * 24 * 60 + 1);
        assert_eq!(parse_rate_series("EURUSD", s.to_csv().as_bytes()).unwrap(), s);
    }

    #[test]
    fn single_event_and_bad_source() {
        let ev = parse_event_list(
            "timestamp,source,description\n2014-01-09T12:45:00Z,ECB,Rate decision\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].source, EventSource::Ecb);
        assert_eq!(ev[0].event_id, "E00001");

        let err = parse_event_list(
            "timestamp,source,description\n2014-01-09T12:45:00Z,ECB,a\n2014-01-10T12:45:00Z,IMF,b\n"
                .as_bytes(),
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::Row { row: 2, .. }), "{err}");
    }

    #[test]
    fn events_sorted_stably() {
        let csv = "timestamp,source,description\n\
            2014-03-01T00:00:00Z,FED,c\n\
            2014-01-01T00:00:00Z,ECB,a\n\
            2014-02-01T00:00:00Z,GOV,\"b1, with comma\"\n\
            2014-05-01T00:00:00Z,ECB,e\n\
            2014-02-01T00:00:00Z,FED,b2\n";
        let ev = parse_event_list(csv.as_bytes()).unwrap();
        let desc: Vec<&str> = ev.iter().map(|e| e.description.as_str()).collect();
        assert_eq!(desc, vec!["a", "b1, with comma", "b2", "c", "e"]);
        let ids: Vec<&str> = ev.iter().map(|e| e.event_id.as_str()).collect();
        assert_eq!(ids, vec!["E00001", "E00002", "E00003", "E00004", "E00005"]);
        assert_eq!(parse_event_list(write_event_list(&ev).as_bytes()).unwrap(), ev);
    }

    fn ten_tweets() -> Vec<TweetRecord> {
        let lines: Vec<String> = (0..10)
            .map(|i| line(&i.to_string(), &format!("2014-01-02T10:{i:02}:00Z")))
            .collect();
        parse_tweet_archive(&lines).records
    }

    fn entry(id: &str, alive: bool, at: &str) -> DeletionAuditEntry {
        DeletionAuditEntry {
            tweet_id: id.into(),
            alive,
            checked_at: ts(at),
        }
    }

    #[test]
    fn audit_marks_one_dead() {
        let audit = vec![entry("3", false, "2015-01-01T00:00:00Z"), entry("4", true, "2015-01-01T00:00:00Z")];
        let out = apply_deletion_audit(ten_tweets(), &audit, AuditOptions::default()).unwrap();
        assert_eq!(out.tweets.iter().filter(|t| t.deleted).count(), 1);
        assert!(out.tweets[3].deleted);
        assert_eq!(out.tweets[3].audit_time, Some(ts("2015-01-01T00:00:00Z")));
        assert!(out.unmatched.is_empty());
    }

    #[test]
    fn empty_audit_is_identity() {
        let before = ten_tweets();
        let out = apply_deletion_audit(before.clone(), &[], AuditOptions::default()).unwrap();
        assert_eq!(out.tweets, before);
        assert!(out.unmatched.is_empty());
    }

    #[test]
    fn unmatched_ids_reported() {
        let audit = vec![entry("zzz", false, "2015-01-01T00:00:00Z")];
        let out = apply_deletion_audit(ten_tweets(), &audit, AuditOptions::default()).unwrap();
        assert_eq!(out.unmatched, vec!["zzz".to_string()]);
        assert!(out.tweets.iter().all(|t| !t.deleted));
    }

    #[test]
    fn conflicting_entries() {
        let audit = vec![
            entry("2", true, "2015-01-01T00:00:00Z"),
            entry("2", false, "2015-02-01T00:00:00Z"),
        ];
        let err = apply_deletion_audit(ten_tweets(), &audit, AuditOptions::default()).unwrap_err();
        match err {
            IngestError::ConflictingAudit { ids } => assert_eq!(ids, vec!["2".to_string()]),
            other => panic!("unexpected {other}"),
        }
        let out =
            apply_deletion_audit(ten_tweets(), &audit, AuditOptions { latest_wins: true }).unwrap();
        assert!(out.tweets[2].deleted);
        assert_eq!(out.tweets[2].audit_time, Some(ts("2015-02-01T00:00:00Z")));
    }

    #[test]
    fn audit_before_tweet_rejected() {
        let audit = vec![entry("2", false, "2013-01-01T00:00:00Z")];
        assert!(matches!(
            apply_deletion_audit(ten_tweets(), &audit, AuditOptions::default()),
            Err(IngestError::AuditPredatesTweet { .. })
        ));
    }

    #[test]
    fn audit_lines_parse() {
        let entries = parse_audit([
            r#"{"id":"7","alive":false,"checked_at":"2017-01-01T00:00:00Z"}"#,
            "",
        ])
        .unwrap();
        assert_eq!(entries, vec![entry("7", false, "2017-01-01T00:00:00Z")]);
        assert!(matches!(
            parse_audit([r#"{"id":"7"}"#]),
            Err(IngestError::AuditLine { line: 1, .. })
        ));
    }
}
