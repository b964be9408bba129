//! Post-hoc trace verification.
//!
//! Works on the trace text alone. Five checks:
//!
//! 1. sliding-window budget enforcement — normal-priority run slices of each
//!    sporadic thread are reconstructed from EXHAUST/REPLENISH details
//!    (`activation`, `consumed`/`amount`, `budget`, `period`) and no window of
//!    one replenishment period may hold more than the initial budget;
//! 2. lock nesting — LOCK/UNLOCK alternate and only the holder unlocks;
//! 3. readiness gating — per topic, TAKE/SIGNAL only for a READY worker,
//!    exactly one CB_START per signal, CB_END closes it;
//! 4. work conservation — no interval where a signaled worker certainly sits
//!    ready while the CPU is certainly idle (occupancy is approximated from
//!    callback spans, lock spans and sporadic normal-priority slices, so this
//!    check is conservative: it never reports a false violation);
//! 5. message conservation — every taken or dropped message was queued, none
//!    is disposed twice, and takes are FIFO oldest-first.
//!
//! An empty trace passes everything vacuously.

use std::collections::BTreeMap;

use budgetsim_core::trace::{Trace, TraceRecord, TraceTag};
use budgetsim_core::TimeNs;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// First violation instant and what went wrong there.
    pub violation: Option<(TimeNs, String)>,
}

impl CheckOutcome {
    fn pass(name: &'static str) -> Self {
        CheckOutcome {
            name,
            passed: true,
            violation: None,
        }
    }

    fn fail(name: &'static str, at: TimeNs, what: String) -> Self {
        CheckOutcome {
            name,
            passed: false,
            violation: Some((at, what)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub checks: Vec<CheckOutcome>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            match &c.violation {
                None => out.push_str(&format!("PASS {}\n", c.name)),
                Some((at, what)) => out.push_str(&format!("FAIL {} at t={at}: {what}\n", c.name)),
            }
        }
        out
    }
}

pub fn check_trace(trace: &Trace) -> Report {
    Report {
        checks: vec![
            check_budget_windows(trace),
            check_lock_nesting(trace),
            check_readiness_gating(trace),
            check_work_conservation(trace),
            check_message_conservation(trace),
        ],
    }
}

/// Normal-priority run slices per sporadic thread, deduped by activation
/// start (an exhaustion-closed slice shows up both in its EXHAUST record and
/// in the later REPLENISH component).
fn sporadic_slices(trace: &Trace) -> BTreeMap<String, (u64, u64, BTreeMap<u64, u64>)> {
    let mut per_thread: BTreeMap<String, (u64, u64, BTreeMap<u64, u64>)> = BTreeMap::new();
    for r in trace.records() {
        let (amount_key, is_slice) = match r.tag {
            TraceTag::Exhaust => ("consumed", true),
            TraceTag::Replenish => ("amount", true),
            _ => ("", false),
        };
        if !is_slice {
            continue;
        }
        let (Some(activation), Some(amount), Some(budget), Some(period)) = (
            r.detail_u64("activation"),
            r.detail_u64(amount_key),
            r.detail_u64("budget"),
            r.detail_u64("period"),
        ) else {
            continue;
        };
        let entry = per_thread
            .entry(r.thread.clone())
            .or_insert_with(|| (budget, period, BTreeMap::new()));
        entry.2.entry(activation).or_insert(amount);
    }
    per_thread
}

const NAME_BUDGET: &str = "budget-enforcement";

fn check_budget_windows(trace: &Trace) -> CheckOutcome {
    for (thread, (budget, period, slices)) in sporadic_slices(trace) {
        let slices: Vec<(u64, u64)> = slices.iter().map(|(&s, &a)| (s, s + a)).collect();
        // A window integral of a piecewise-constant 0/1 function attains its
        // maximum when a window edge sits on a slice edge.
        let mut anchors: Vec<u64> = Vec::new();
        for &(s, e) in &slices {
            anchors.push(s);
            anchors.push(e.saturating_sub(period));
            anchors.push(s.saturating_sub(period));
            anchors.push(e);
        }
        anchors.sort_unstable();
        anchors.dedup();
        for t0 in anchors {
            let t1 = t0 + period;
            let used: u64 = slices
                .iter()
                .map(|&(s, e)| e.min(t1).saturating_sub(s.max(t0)))
                .sum();
            if used > budget {
                return CheckOutcome::fail(
                    NAME_BUDGET,
                    TimeNs::from_nanos(t0),
                    format!(
                        "thread {thread} ran {used} ns at normal priority in window \
                         [{t0}, {t1}) with budget {budget} ns"
                    ),
                );
            }
        }
    }
    CheckOutcome::pass(NAME_BUDGET)
}

const NAME_LOCK: &str = "lock-nesting";

fn check_lock_nesting(trace: &Trace) -> CheckOutcome {
    let mut holder: Option<&str> = None;
    for r in trace.records() {
        match r.tag {
            TraceTag::Lock => {
                if let Some(h) = holder {
                    return CheckOutcome::fail(
                        NAME_LOCK,
                        r.time,
                        format!("{} locked while {h} holds the lock", r.thread),
                    );
                }
                holder = Some(&r.thread);
            }
            TraceTag::Unlock => {
                if holder != Some(r.thread.as_str()) {
                    return CheckOutcome::fail(
                        NAME_LOCK,
                        r.time,
                        format!(
                            "{} unlocked but the holder is {}",
                            r.thread,
                            holder.unwrap_or("nobody")
                        ),
                    );
                }
                holder = None;
            }
            _ => {}
        }
    }
    CheckOutcome::pass(NAME_LOCK)
}

const NAME_GATING: &str = "readiness-gating";

#[derive(Clone, Copy, PartialEq)]
enum SubPhase {
    Ready,
    Taken,
    Signaled,
    Executing,
}

fn check_readiness_gating(trace: &Trace) -> CheckOutcome {
    let mut state: BTreeMap<String, SubPhase> = BTreeMap::new();
    let fail = |r: &TraceRecord, what: &str| {
        CheckOutcome::fail(NAME_GATING, r.time, format!("topic {what}"))
    };
    for r in trace.records() {
        let Some(topic) = r.detail_field("topic").map(str::to_owned) else {
            continue;
        };
        let phase = state.entry(topic.clone()).or_insert(SubPhase::Ready);
        match r.tag {
            TraceTag::Take => {
                if *phase != SubPhase::Ready {
                    return fail(r, &format!("{topic}: TAKE while worker not READY"));
                }
                *phase = SubPhase::Taken;
            }
            TraceTag::Signal => {
                if *phase != SubPhase::Taken {
                    return fail(r, &format!("{topic}: SIGNAL without a fresh TAKE"));
                }
                *phase = SubPhase::Signaled;
            }
            TraceTag::CbStart => {
                if *phase != SubPhase::Signaled {
                    return fail(r, &format!("{topic}: CB_START without a pending signal"));
                }
                *phase = SubPhase::Executing;
            }
            TraceTag::CbEnd => {
                if *phase != SubPhase::Executing {
                    return fail(r, &format!("{topic}: CB_END without CB_START"));
                }
                *phase = SubPhase::Ready;
            }
            _ => {}
        }
    }
    CheckOutcome::pass(NAME_GATING)
}

const NAME_WORK: &str = "work-conservation";

/// Merge possibly-overlapping intervals into a sorted disjoint cover.
fn merge_intervals(mut v: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    v.retain(|&(s, e)| e > s);
    v.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::new();
    for (s, e) in v {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn check_work_conservation(trace: &Trace) -> CheckOutcome {
    // Certain occupancy: open callbacks (including their sleep portions),
    // held locks, and sporadic normal-priority slices.
    let mut occupied: Vec<(u64, u64)> = Vec::new();
    let end = trace
        .records()
        .last()
        .map(|r| r.time.as_nanos())
        .unwrap_or(0);
    let mut cb_open: BTreeMap<&str, u64> = BTreeMap::new();
    let mut lock_open: Option<u64> = None;
    for r in trace.records() {
        match r.tag {
            TraceTag::CbStart => {
                cb_open.insert(&r.thread, r.time.as_nanos());
            }
            TraceTag::CbEnd => {
                if let Some(s) = cb_open.remove(r.thread.as_str()) {
                    occupied.push((s, r.time.as_nanos()));
                }
            }
            TraceTag::Lock => lock_open = Some(r.time.as_nanos()),
            TraceTag::Unlock => {
                if let Some(s) = lock_open.take() {
                    occupied.push((s, r.time.as_nanos()));
                }
            }
            _ => {}
        }
    }
    for (_, s) in cb_open {
        occupied.push((s, end));
    }
    for (_, (_, _, slices)) in sporadic_slices(trace) {
        for (s, a) in slices {
            occupied.push((s, s + a));
        }
    }
    let occupied = merge_intervals(occupied);

    // Certain readiness: a signaled worker waits from SIGNAL to its CB_START.
    let mut ready: Vec<(u64, u64)> = Vec::new();
    let mut pending_signal: BTreeMap<String, u64> = BTreeMap::new();
    for r in trace.records() {
        let Some(topic) = r.detail_field("topic").map(str::to_owned) else {
            continue;
        };
        match r.tag {
            TraceTag::Signal => {
                pending_signal.insert(topic, r.time.as_nanos());
            }
            TraceTag::CbStart => {
                if let Some(s) = pending_signal.remove(&topic) {
                    ready.push((s, r.time.as_nanos()));
                }
            }
            _ => {}
        }
    }
    for (_, s) in pending_signal {
        ready.push((s, end));
    }

    for (rs, re) in merge_intervals(ready) {
        let mut cursor = rs;
        for &(os, oe) in &occupied {
            if oe <= cursor {
                continue;
            }
            if os > cursor {
                break;
            }
            cursor = oe;
            if cursor >= re {
                break;
            }
        }
        if cursor < re {
            return CheckOutcome::fail(
                NAME_WORK,
                TimeNs::from_nanos(cursor),
                format!("CPU idle in [{cursor}, {re}) while a signaled worker was ready"),
            );
        }
    }
    CheckOutcome::pass(NAME_WORK)
}

const NAME_MSG: &str = "message-conservation";

#[derive(Default)]
struct TopicLedger {
    queued: Vec<u64>,
    taken: Vec<u64>,
    dropped: Vec<u64>,
}

fn check_message_conservation(trace: &Trace) -> CheckOutcome {
    let mut ledgers: BTreeMap<String, TopicLedger> = BTreeMap::new();
    for r in trace.records() {
        let relevant = matches!(r.tag, TraceTag::Arrive | TraceTag::Take | TraceTag::DropMsg);
        if !relevant {
            continue;
        }
        let (Some(topic), Some(seq)) = (
            r.detail_field("topic").map(str::to_owned),
            r.detail_u64("seq"),
        ) else {
            return CheckOutcome::fail(
                NAME_MSG,
                r.time,
                format!("{} record without topic/seq detail", r.tag),
            );
        };
        let ledger = ledgers.entry(topic.clone()).or_default();
        match r.tag {
            TraceTag::Arrive => ledger.queued.push(seq),
            TraceTag::Take | TraceTag::DropMsg => {
                // Take and drop-oldest both consume the head of the queue.
                let verb = if r.tag == TraceTag::Take {
                    "TAKE"
                } else {
                    "DROP_MSG"
                };
                match ledger.queued.first() {
                    Some(&head) if head == seq => {
                        ledger.queued.remove(0);
                        if r.tag == TraceTag::Take {
                            ledger.taken.push(seq);
                        } else {
                            ledger.dropped.push(seq);
                        }
                    }
                    Some(&head) => {
                        return CheckOutcome::fail(
                            NAME_MSG,
                            r.time,
                            format!("{topic}: {verb} of seq {seq} but the oldest queued is {head}"),
                        );
                    }
                    None => {
                        return CheckOutcome::fail(
                            NAME_MSG,
                            r.time,
                            format!("{topic}: {verb} of seq {seq} with an empty queue"),
                        );
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    CheckOutcome::pass(NAME_MSG)
}
