//! Trace recording and the line-oriented text format.
//!
//! One record per line: `<time_ns> <thread_name> <tag> <detail>`. Record times
//! are non-decreasing and identical scenario inputs produce byte-identical
//! trace text. Detail strings are space-separated `key=value` pairs so the
//! post-hoc checker can consume them without any side channel.

use std::fmt;

use crate::time::TimeNs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TraceTag {
    Arrive,
    Take,
    Signal,
    CbStart,
    CbEnd,
    Publish,
    Exhaust,
    Replenish,
    PrioDrop,
    PrioRestore,
    Lock,
    Unlock,
    SkipBusy,
    DropMsg,
}

impl TraceTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceTag::Arrive => "ARRIVE",
            TraceTag::Take => "TAKE",
            TraceTag::Signal => "SIGNAL",
            TraceTag::CbStart => "CB_START",
            TraceTag::CbEnd => "CB_END",
            TraceTag::Publish => "PUBLISH",
            TraceTag::Exhaust => "EXHAUST",
            TraceTag::Replenish => "REPLENISH",
            TraceTag::PrioDrop => "PRIO_DROP",
            TraceTag::PrioRestore => "PRIO_RESTORE",
            TraceTag::Lock => "LOCK",
            TraceTag::Unlock => "UNLOCK",
            TraceTag::SkipBusy => "SKIP_BUSY",
            TraceTag::DropMsg => "DROP_MSG",
        }
    }

    pub fn parse(s: &str) -> Option<TraceTag> {
        Some(match s {
            "ARRIVE" => TraceTag::Arrive,
            "TAKE" => TraceTag::Take,
            "SIGNAL" => TraceTag::Signal,
            "CB_START" => TraceTag::CbStart,
            "CB_END" => TraceTag::CbEnd,
            "PUBLISH" => TraceTag::Publish,
            "EXHAUST" => TraceTag::Exhaust,
            "REPLENISH" => TraceTag::Replenish,
            "PRIO_DROP" => TraceTag::PrioDrop,
            "PRIO_RESTORE" => TraceTag::PrioRestore,
            "LOCK" => TraceTag::Lock,
            "UNLOCK" => TraceTag::Unlock,
            "SKIP_BUSY" => TraceTag::SkipBusy,
            "DROP_MSG" => TraceTag::DropMsg,
            _ => return None,
        })
    }
}

impl fmt::Display for TraceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: TimeNs,
    pub thread: String,
    pub tag: TraceTag,
    pub detail: String,
}

impl TraceRecord {
    /// Looks up `key=` in the detail string.
    pub fn detail_field(&self, key: &str) -> Option<&str> {
        self.detail
            .split(' ')
            .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
    }

    pub fn detail_u64(&self, key: &str) -> Option<u64> {
        self.detail_field(key)?.parse().ok()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("trace parse error at line {line}: {reason}")]
pub struct TraceParseError {
    pub line: usize,
    pub reason: String,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, time: TimeNs, thread: &str, tag: TraceTag, detail: String) {
        debug_assert!(
            self.records.last().is_none_or(|r| r.time <= time),
            "trace times must be non-decreasing"
        );
        self.records.push(TraceRecord {
            time,
            thread: thread.to_owned(),
            tag,
            detail,
        });
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&format!("{} {} {}", r.time, r.thread, r.tag));
            if !r.detail.is_empty() {
                out.push(' ');
                out.push_str(&r.detail);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trace, TraceParseError> {
        let mut records = Vec::new();
        let mut last_time = TimeNs::ZERO;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(4, ' ');
            let time = parts
                .next()
                .and_then(|t| t.parse::<u64>().ok())
                .map(TimeNs::from_nanos)
                .ok_or_else(|| TraceParseError {
                    line: line_no,
                    reason: "expected integer nanosecond timestamp".into(),
                })?;
            let thread = parts.next().ok_or_else(|| TraceParseError {
                line: line_no,
                reason: "missing thread name".into(),
            })?;
            let tag_str = parts.next().ok_or_else(|| TraceParseError {
                line: line_no,
                reason: "missing tag".into(),
            })?;
            let tag = TraceTag::parse(tag_str).ok_or_else(|| TraceParseError {
                line: line_no,
                reason: format!("unknown tag `{tag_str}`"),
            })?;
            if time < last_time {
                return Err(TraceParseError {
                    line: line_no,
                    reason: format!("time {} decreases (previous {})", time, last_time),
                });
            }
            last_time = time;
            records.push(TraceRecord {
                time,
                thread: thread.to_owned(),
                tag,
                detail: parts.next().unwrap_or("").to_owned(),
            });
        }
        Ok(Trace { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut t = Trace::new();
        t.record(
            TimeNs::from_millis(10),
            "mw",
            TraceTag::Arrive,
            "topic=ping seq=1".into(),
        );
        t.record(
            TimeNs::from_millis(10),
            "executor",
            TraceTag::Take,
            "topic=ping seq=1".into(),
        );
        t.record(
            TimeNs::from_millis(20),
            "hprt",
            TraceTag::CbEnd,
            "topic=ping seq=1".into(),
        );
        let text = t.to_text();
        assert_eq!(Trace::parse(&text).unwrap(), t);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = Trace::parse("1000 mw ARRIVE x=1\nbogus\n").unwrap_err();
        assert_eq!(err.line, 2);
        let err = Trace::parse("1000 mw NOPE\n").unwrap_err();
        assert_eq!(err.line, 1);
        let err = Trace::parse("2000 mw ARRIVE a=1\n1000 mw ARRIVE a=2\n").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn detail_field_lookup() {
        let r = TraceRecord {
            time: TimeNs::ZERO,
            thread: "hprt".into(),
            tag: TraceTag::Replenish,
            detail: "amount=30000000 activation=0 budget=30000000 period=100000000".into(),
        };
        assert_eq!(r.detail_u64("amount"), Some(30_000_000));
        assert_eq!(r.detail_u64("activation"), Some(0));
        assert_eq!(r.detail_u64("missing"), None);
    }
}
