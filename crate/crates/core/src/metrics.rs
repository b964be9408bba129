//! Per-scenario result metrics and their CSV form.
//!
//! One row per subscribed topic. All values are integers in nanoseconds or
//! plain counts except the mean latency, which is a fixed three-decimal
//! string computed in integer arithmetic (locale-independent, deterministic).

use crate::time::TimeNs;

pub const CSV_HEADER: &str = "sweep_value,topic,sent,received,dropped,skipped_busy,\
mean_latency_ns,max_latency_ns,normal_prio_cpu_ns,low_prio_cpu_ns,exhaustions,replenishments";

/// Results for one topic / subscription / worker triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamMetrics {
    pub topic: String,
    pub sent: u64,
    pub received: u64,
    pub dropped: u64,
    pub skipped_busy: u64,
    pub taken: u64,
    pub queued_at_end: u64,
    pub latency_sum_ns: u128,
    pub latency_count: u64,
    pub max_latency: TimeNs,
    pub normal_prio_cpu: TimeNs,
    pub low_prio_cpu: TimeNs,
    pub exhaustions: u64,
    pub replenishments: u64,
}

impl StreamMetrics {
    /// Mean round-trip latency as a fixed `x.yyy` nanosecond string.
    pub fn mean_latency(&self) -> String {
        if self.latency_count == 0 {
            return "0.000".to_owned();
        }
        let scaled = self.latency_sum_ns * 1000 / self.latency_count as u128;
        format!("{}.{:03}", scaled / 1000, scaled % 1000)
    }

    fn csv_row(&self, sweep_value: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            sweep_value,
            self.topic,
            self.sent,
            self.received,
            self.dropped,
            self.skipped_busy,
            self.mean_latency(),
            self.max_latency,
            self.normal_prio_cpu,
            self.low_prio_cpu,
            self.exhaustions,
            self.replenishments,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metrics {
    pub streams: Vec<StreamMetrics>,
    pub published_without_subscriber: u64,
}

impl Metrics {
    pub fn stream(&self, topic: &str) -> Option<&StreamMetrics> {
        self.streams.iter().find(|s| s.topic == topic)
    }

    /// CSV rows without header, one per topic, tagged with `sweep_value`.
    pub fn csv_rows(&self, sweep_value: &str) -> String {
        let mut out = String::new();
        for s in &self.streams {
            out.push_str(&s.csv_row(sweep_value));
            out.push('\n');
        }
        out
    }

    /// Full CSV document for a single run.
    pub fn to_csv(&self, sweep_value: &str) -> String {
        format!("{CSV_HEADER}\n{}", self.csv_rows(sweep_value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> StreamMetrics {
        StreamMetrics {
            topic: "ping_hprt".into(),
            sent: 1000,
            received: 300,
            dropped: 600,
            skipped_busy: 42,
            taken: 310,
            queued_at_end: 16,
            latency_sum_ns: 100,
            latency_count: 3,
            max_latency: TimeNs::from_nanos(70),
            normal_prio_cpu: TimeNs::from_secs(3),
            low_prio_cpu: TimeNs::ZERO,
            exhaustions: 7,
            replenishments: 300,
        }
    }

    #[test]
    fn mean_latency_is_fixed_decimal() {
        let s = sample();
        assert_eq!(s.mean_latency(), "33.333");
        let empty = StreamMetrics {
            latency_sum_ns: 0,
            latency_count: 0,
            ..sample()
        };
        assert_eq!(empty.mean_latency(), "0.000");
    }

    #[test]
    fn csv_shape() {
        let m = Metrics {
            streams: vec![sample()],
            published_without_subscriber: 0,
        };
        let csv = m.to_csv("0.3");
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "0.3,ping_hprt,1000,300,600,42,33.333,70,3000000000,0,7,300"
        );
        assert_eq!(CSV_HEADER.split(',').count(), 12);
    }
}
