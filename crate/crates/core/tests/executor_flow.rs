//! Executor-path tests: readiness gating, lock ordering, skip-busy handling,
//! message conservation and the ping/pong scenarios end to end.

use budgetsim_core::executor::MiddlewareCosts;
use budgetsim_core::trace::{TraceRecord, TraceTag};
use budgetsim_core::workload::{PingSpec, Scenario, SubscriptionSpec};
use budgetsim_core::*;

fn ms(v: u64) -> TimeNs {
    TimeNs::from_millis(v)
}

fn one_topic_scenario(busy: TimeNs, sleep: TimeNs, duration: TimeNs) -> Scenario {
    Scenario {
        duration,
        executor_priority: 110,
        wait_timeout: ms(100),
        queue_depth: 16,
        costs: MiddlewareCosts::default(),
        pings: vec![PingSpec {
            send_topic: "ping".into(),
            reply_topic: "pong".into(),
            period: ms(10),
        }],
        subscriptions: vec![SubscriptionSpec {
            topic: "ping".into(),
            worker_name: "worker".into(),
            busy,
            sleep,
            publishes: Some("pong".into()),
            sched: SchedParams::fifo(50),
        }],
        seed: 0,
    }
}

fn records_for(trace: &Trace, tag: TraceTag) -> Vec<&TraceRecord> {
    trace.records().iter().filter(|r| r.tag == tag).collect()
}

/// Uncontended 10 ms callback: CB_END lands exactly busy_time after CB_START,
/// pong count matches the analytic rate.
#[test]
fn single_stream_round_trips() {
    let scenario = one_topic_scenario(ms(10), TimeNs::ZERO, TimeNs::from_secs(1));
    let (metrics, trace) = run_scenario_checked(&scenario, true).unwrap();
    let s = metrics.stream("ping").unwrap();
    assert_eq!(s.sent, 100);
    // Arrival k at 10k ms is processed during [10k, 10k+10): the arrival at
    // t=1 s starts a callback that cannot finish before the end.
    assert_eq!(s.received, 99);
    assert_eq!(s.dropped, 0);
    assert_eq!(s.queued_at_end, 0);
    assert_eq!(s.taken, 100);
    // Round trip is exactly the 10 ms of processing.
    assert_eq!(s.max_latency, ms(10));
    assert_eq!(s.mean_latency(), "10000000.000");

    let starts = records_for(&trace, TraceTag::CbStart);
    let ends = records_for(&trace, TraceTag::CbEnd);
    assert_eq!(starts.len(), 100);
    assert_eq!(ends.len(), 99);
    for (start, end) in starts.iter().zip(ends.iter()) {
        assert_eq!(end.time, start.time + ms(10));
    }
}

/// busy 0, sleep 0: the worker is READY again at the signal instant.
#[test]
fn zero_cost_callback_is_instant() {
    let scenario = one_topic_scenario(TimeNs::ZERO, TimeNs::ZERO, ms(100));
    let (metrics, trace) = run_scenario_checked(&scenario, true).unwrap();
    let s = metrics.stream("ping").unwrap();
    assert_eq!(s.sent, 10);
    assert_eq!(s.received, 10);
    assert_eq!(s.max_latency, TimeNs::ZERO);
    for r in trace.records() {
        if r.tag == TraceTag::CbStart {
            let seq = r.detail_u64("seq").unwrap();
            let end = trace
                .records()
                .iter()
                .find(|e| e.tag == TraceTag::CbEnd && e.detail_u64("seq") == Some(seq))
                .unwrap();
            assert_eq!(end.time, r.time);
        }
    }
}

/// Callback busy 25 ms > ping period 10 ms: SKIP_BUSY records appear, no
/// message is dispatched while BUSY, and arrivals == taken + queued + dropped.
#[test]
fn busy_worker_skips_and_conserves_messages() {
    let scenario = one_topic_scenario(ms(25), TimeNs::ZERO, TimeNs::from_secs(1));
    let (metrics, trace) = run_scenario_checked(&scenario, true).unwrap();
    let s = metrics.stream("ping").unwrap();
    assert!(s.skipped_busy > 0, "expected SKIP_BUSY records");
    assert_eq!(s.sent, s.taken + s.queued_at_end + s.dropped);
    assert!(
        s.dropped > 0,
        "25 ms service on a 10 ms stream must overflow depth 16"
    );

    // Readiness gating: between two SIGNALs for the topic there is a CB_END.
    let mut busy = false;
    for r in trace.records() {
        match r.tag {
            TraceTag::Signal => {
                assert!(!busy, "SIGNAL while worker busy at t={}", r.time);
                busy = true;
            }
            TraceTag::CbEnd => busy = false,
            _ => {}
        }
    }
}

/// Take order is FIFO per topic: the executor always takes the oldest
/// queued message.
#[test]
fn takes_are_fifo_oldest_first() {
    let scenario = one_topic_scenario(ms(25), TimeNs::ZERO, TimeNs::from_secs(1));
    let (_, trace) = run_scenario(&scenario).unwrap();
    let takes = records_for(&trace, TraceTag::Take);
    let seqs: Vec<u64> = takes.iter().map(|r| r.detail_u64("seq").unwrap()).collect();
    let mut sorted = seqs.clone();
    sorted.sort();
    assert_eq!(seqs, sorted);
}

/// Lock records are properly nested: LOCK and UNLOCK alternate and the
/// unlocking thread is the one that locked.
#[test]
fn lock_records_nest_per_holder() {
    let scenario = one_topic_scenario(ms(10), TimeNs::ZERO, TimeNs::from_secs(1));
    let (_, trace) = run_scenario(&scenario).unwrap();
    let mut holder: Option<&str> = None;
    let mut transitions = 0;
    for r in trace.records() {
        match r.tag {
            TraceTag::Lock => {
                assert!(holder.is_none(), "LOCK while {holder:?} holds it");
                holder = Some(&r.thread);
                transitions += 1;
            }
            TraceTag::Unlock => {
                assert_eq!(holder, Some(r.thread.as_str()));
                holder = None;
            }
            _ => {}
        }
    }
    assert!(holder.is_none());
    assert!(transitions > 100);
}

/// The executor thread always runs before any worker: no CB_START while the
/// executor is between its wake and its park (priority 110 vs 50/60).
#[test]
fn executor_precedence_over_workers() {
    let scenario = build_case1("0.3".parse().unwrap()).unwrap();
    let (_, trace) = run_scenario(&scenario).unwrap();
    // The executor parks (releases its last lock of the instant) before any
    // worker starts a callback at that instant: at any single timestamp, all
    // executor TAKE/SIGNAL records precede all CB_START records.
    let mut last_time = TimeNs::ZERO;
    let mut seen_cb_start_at = false;
    for r in trace.records() {
        if r.time != last_time {
            last_time = r.time;
            seen_cb_start_at = false;
        }
        match r.tag {
            TraceTag::CbStart => seen_cb_start_at = true,
            TraceTag::Take | TraceTag::Signal => {
                assert!(
                    !seen_cb_start_at,
                    "executor took after a worker started at t={}",
                    r.time
                );
            }
            _ => {}
        }
    }
}

/// Nonzero middleware costs: executor take/fill/wait work happens while
/// holding the lock, publishing workers contend for it, and LOCK/UNLOCK
/// spans become positive-length but stay properly nested.
#[test]
fn middleware_costs_create_lock_contention() {
    let mut scenario = one_topic_scenario(ms(5), TimeNs::ZERO, TimeNs::from_secs(1));
    scenario.pings.push(budgetsim_core::workload::PingSpec {
        send_topic: "ping2".into(),
        reply_topic: "pong2".into(),
        period: ms(10),
    });
    scenario
        .subscriptions
        .push(budgetsim_core::workload::SubscriptionSpec {
            topic: "ping2".into(),
            worker_name: "worker2".into(),
            busy: ms(5),
            sleep: TimeNs::ZERO,
            publishes: Some("pong2".into()),
            sched: SchedParams::fifo(40),
        });
    scenario.costs = budgetsim_core::executor::MiddlewareCosts {
        fill: TimeNs::from_micros(200),
        wait: TimeNs::from_micros(200),
        take: ms(2),
        publish: ms(1),
    };
    let (metrics, trace) = run_scenario_checked(&scenario, true).unwrap();

    // Lock spans have positive length and proper nesting per holder.
    let mut holder: Option<(&str, TimeNs)> = None;
    let mut positive_spans = 0;
    let mut worker_held = false;
    for r in trace.records() {
        match r.tag {
            TraceTag::Lock => {
                assert!(holder.is_none(), "LOCK while held at t={}", r.time);
                holder = Some((&r.thread, r.time));
            }
            TraceTag::Unlock => {
                let (h, since) = holder.take().expect("UNLOCK without LOCK");
                assert_eq!(h, r.thread.as_str());
                if r.time > since {
                    positive_spans += 1;
                }
                if h != "executor" {
                    worker_held = true;
                }
            }
            _ => {}
        }
    }
    assert!(
        positive_spans > 10,
        "middleware costs must serialize work under the lock"
    );
    assert!(worker_held, "workers must publish under the lock");
    // Both streams still flow.
    assert!(metrics.stream("ping").unwrap().received > 50);
    assert!(metrics.stream("ping2").unwrap().received > 0);
}

/// No traffic at all: the executor wakes on its wait timeout, re-fills the
/// wait set (a fresh LOCK/UNLOCK pair each time) and never takes anything.
#[test]
fn timeout_path_refills_wait_set() {
    let mut scenario = one_topic_scenario(ms(10), TimeNs::ZERO, ms(450));
    scenario.pings.clear();
    scenario.wait_timeout = ms(100);
    let (_, trace) = run_scenario(&scenario).unwrap();
    assert!(records_for(&trace, TraceTag::Take).is_empty());
    let lock_times: Vec<TimeNs> = records_for(&trace, TraceTag::Lock)
        .iter()
        .map(|r| r.time)
        .collect();
    // Iteration at t=0 plus one per elapsed timeout.
    assert_eq!(
        lock_times,
        vec![TimeNs::ZERO, ms(100), ms(200), ms(300), ms(400)]
    );
}

/// A callback can publish into a locally subscribed topic: the message
/// enters that topic's queue like any arrival and flows through the second
/// subscription's worker.
#[test]
fn chained_local_publish() {
    let mut scenario = one_topic_scenario(ms(2), TimeNs::ZERO, TimeNs::from_secs(1));
    scenario.subscriptions[0].publishes = Some("stage2".into());
    scenario
        .subscriptions
        .push(budgetsim_core::workload::SubscriptionSpec {
            topic: "stage2".into(),
            worker_name: "second".into(),
            busy: ms(1),
            sleep: TimeNs::ZERO,
            publishes: Some("pong".into()),
            sched: SchedParams::fifo(40),
        });
    let (metrics, trace) = run_scenario_checked(&scenario, true).unwrap();
    let stage2 = metrics.stream("stage2").unwrap();
    assert!(stage2.sent > 90, "stage2 arrivals: {}", stage2.sent);
    assert_eq!(stage2.sent, stage2.taken + stage2.queued_at_end + stage2.dropped);
    // The ping node hears the full chain's replies.
    assert!(metrics.stream("ping").unwrap().received > 90);
    // stage2 arrivals are traced like external ones.
    assert!(trace
        .records()
        .iter()
        .any(|r| r.tag == TraceTag::Arrive && r.detail_field("topic") == Some("stage2")));
}

/// Publish to a topic nobody subscribes to or pings: counted, then discarded.
#[test]
fn publish_without_subscriber_is_counted() {
    let mut scenario = one_topic_scenario(TimeNs::ZERO, TimeNs::ZERO, ms(100));
    scenario.subscriptions[0].publishes = Some("nowhere".into());
    scenario.pings[0].reply_topic = "pong".into();
    let (metrics, _) = run_scenario(&scenario).unwrap();
    assert_eq!(metrics.published_without_subscriber, 10);
    assert_eq!(metrics.stream("ping").unwrap().received, 0);
}

/// Empty scenario (no pings): all counters zero, trace has no arrivals.
#[test]
fn empty_scenario_is_quiet() {
    let mut scenario = one_topic_scenario(ms(10), TimeNs::ZERO, TimeNs::from_secs(1));
    scenario.pings.clear();
    let (metrics, trace) = run_scenario(&scenario).unwrap();
    let s = metrics.stream("ping").unwrap();
    assert_eq!(s.sent, 0);
    assert_eq!(s.received, 0);
    assert_eq!(s.taken, 0);
    assert!(records_for(&trace, TraceTag::Arrive).is_empty());
    assert!(records_for(&trace, TraceTag::Take).is_empty());
}

/// Duplicate topics and invalid sporadic parameter sets are rejected with the
/// offending field named.
#[test]
fn scenario_validation_names_fields() {
    let mut scenario = one_topic_scenario(ms(10), TimeNs::ZERO, ms(100));
    scenario
        .subscriptions
        .push(scenario.subscriptions[0].clone());
    let err = scenario.validate().unwrap_err().to_string();
    assert!(err.contains("duplicate topic"), "{err}");

    let mut scenario = one_topic_scenario(ms(10), TimeNs::ZERO, ms(100));
    scenario.subscriptions[0].sched = SchedParams::sporadic(60, 10, ms(101), ms(100), 100);
    let err = scenario.validate().unwrap_err().to_string();
    assert!(err.contains("init_budget"), "{err}");

    let mut scenario = one_topic_scenario(ms(10), TimeNs::ZERO, ms(100));
    scenario.pings[0].send_topic = "unknown".into();
    let err = scenario.validate().unwrap_err().to_string();
    assert!(err.contains("unknown"), "{err}");
}

/// A sporadic worker that blocks before its budget runs out: the armed
/// exhaustion event is cancelled and never logged.
#[test]
fn early_block_cancels_exhaustion() {
    let mut scenario = one_topic_scenario(ms(10), TimeNs::ZERO, ms(400));
    // 10 ms callbacks every 50 ms demand only 20 ms of each 100 ms window:
    // the worker always blocks with budget left.
    scenario.pings[0].period = ms(50);
    scenario.subscriptions[0].sched = SchedParams::sporadic(60, 10, ms(30), ms(100), 100);
    let (_, trace) = run_scenario_checked(&scenario, true).unwrap();
    assert!(records_for(&trace, TraceTag::CbEnd).len() >= 6);
    assert!(records_for(&trace, TraceTag::Exhaust).is_empty());
    assert!(records_for(&trace, TraceTag::PrioDrop).is_empty());
    // The consumed slices still replenish one period after their activations.
    assert!(trace.records().iter().any(|r| r.tag == TraceTag::Replenish));
}

/// Worker under sporadic with a budget smaller than the callback: the
/// callback's CPU consumption spans a priority drop but still totals exactly
/// busy_time (work integrity under preemption and drops).
#[test]
fn callback_work_integrity_across_budget_drop() {
    let mut scenario = one_topic_scenario(ms(10), TimeNs::ZERO, TimeNs::from_secs(1));
    scenario.subscriptions[0].sched = SchedParams::sporadic(60, 10, ms(3), ms(100), 100);
    let (metrics, trace) = run_scenario_checked(&scenario, true).unwrap();
    let s = metrics.stream("ping").unwrap();
    // 3 ms of normal-priority budget per 100 ms, rest of each callback runs
    // at low priority on the otherwise idle CPU: every message still takes
    // 10 ms of CPU total and completes.
    assert!(s.received > 90, "received {}", s.received);
    let total_cpu = s.normal_prio_cpu + s.low_prio_cpu;
    // Completed callbacks consumed exactly 10 ms each; at most one callback
    // is in flight at the end.
    let done = s.received;
    let cpu_ns = total_cpu.as_nanos();
    let done_ns = ms(10).as_nanos() * done;
    assert!(
        cpu_ns >= done_ns && cpu_ns <= done_ns + ms(10).as_nanos(),
        "cpu {cpu_ns} vs completed work {done_ns}"
    );
    assert!(s.exhaustions > 0);
    // Each CB_START..CB_END pair spans at least busy_time.
    for start in records_for(&trace, TraceTag::CbStart) {
        let seq = start.detail_u64("seq").unwrap();
        if let Some(end) = trace
            .records()
            .iter()
            .find(|e| e.tag == TraceTag::CbEnd && e.detail_u64("seq") == Some(seq))
        {
            assert!(end.time >= start.time + ms(10));
        }
    }
}
