//! Event queue with a documented total order.
//!
//! Dequeue order is strictly `(due, kind rank, sequence)` lexicographic. The
//! kind rank is fixed:
//!
//! ```text
//! Replenishment < BudgetExhaustion < LockRelease < CallbackCompletion
//!               < MessageArrival < SimulationEnd
//! ```
//!
//! so at a shared instant replenishments land before exhaustion checks — a
//! thread replenished exactly when its budget would run out keeps its normal
//! priority. The sequence number is assigned at enqueue, which makes the order
//! reproducible across runs regardless of heap internals.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use crate::time::TimeNs;

/// Identifies a schedulable thread in the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThreadId(pub u32);

/// Identifies an interned topic name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TopicId(pub u32);

/// Identifies a mutual-exclusion resource (the middleware has exactly one).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LockId(pub u32);

/// A message travelling through the middleware.
///
/// `seq` is strictly increasing per topic; `publish_time` is the instant the
/// message was published by its source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub topic: TopicId,
    pub seq: u64,
    pub publish_time: TimeNs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Replenishment { thread: ThreadId, amount: TimeNs },
    BudgetExhaustion { thread: ThreadId },
    LockRelease { lock: LockId },
    CallbackCompletion { thread: ThreadId },
    MessageArrival { message: Message },
    SimulationEnd,
}

impl EventKind {
    /// Fixed tie-break rank for events due at the same instant.
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::Replenishment { .. } => 0,
            EventKind::BudgetExhaustion { .. } => 1,
            EventKind::LockRelease { .. } => 2,
            EventKind::CallbackCompletion { .. } => 3,
            EventKind::MessageArrival { .. } => 4,
            EventKind::SimulationEnd => 5,
        }
    }
}

/// Handle returned by `schedule`, usable to cancel the event before it fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle(u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub due: TimeNs,
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CancelOutcome {
    Confirmed,
    AlreadyFired,
}

#[derive(Debug, PartialEq, Eq)]
struct HeapEntry {
    due: TimeNs,
    rank: u8,
    seq: u64,
    kind: EventKind,
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.due, self.rank, self.seq).cmp(&(other.due, other.rank, other.seq))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Totally ordered event queue with O(log n) cancellation.
///
/// Cancelled entries stay in the heap and are skipped on pop; `live` tracks
/// the sequence numbers that are still scheduled.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<HeapEntry>>,
    live: BTreeSet<u64>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, due: TimeNs, kind: EventKind) -> EventHandle {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.live.insert(seq);
        self.heap.push(Reverse(HeapEntry {
            due,
            rank: kind.rank(),
            seq,
            kind,
        }));
        EventHandle(seq)
    }

    pub fn cancel(&mut self, handle: EventHandle) -> CancelOutcome {
        if self.live.remove(&handle.0) {
            CancelOutcome::Confirmed
        } else {
            CancelOutcome::AlreadyFired
        }
    }

    /// Due time of the next live event, if any.
    pub fn peek_due(&mut self) -> Option<TimeNs> {
        self.skip_cancelled();
        self.heap.peek().map(|Reverse(e)| e.due)
    }

    /// Pops the next live event if it is due at or before `limit`.
    pub fn pop_due(&mut self, limit: TimeNs) -> Option<Event> {
        self.skip_cancelled();
        match self.heap.peek() {
            Some(Reverse(e)) if e.due <= limit => {
                let Reverse(e) = self.heap.pop().unwrap();
                self.live.remove(&e.seq);
                Some(Event {
                    due: e.due,
                    seq: e.seq,
                    kind: e.kind,
                })
            }
            _ => None,
        }
    }

    pub fn is_empty(&mut self) -> bool {
        self.peek_due().is_none()
    }

    fn skip_cancelled(&mut self) {
        while let Some(Reverse(e)) = self.heap.peek() {
            if self.live.contains(&e.seq) {
                return;
            }
            self.heap.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arrival(topic: u32, seq: u64) -> EventKind {
        EventKind::MessageArrival {
            message: Message {
                topic: TopicId(topic),
                seq,
                publish_time: TimeNs::ZERO,
            },
        }
    }

    #[test]
    fn same_due_same_kind_keeps_fifo_order() {
        let mut q = EventQueue::new();
        let due = TimeNs::from_millis(5);
        q.push(due, arrival(0, 1));
        q.push(due, arrival(0, 2));
        let a = q.pop_due(due).unwrap();
        let b = q.pop_due(due).unwrap();
        assert!(matches!(a.kind, EventKind::MessageArrival { message } if message.seq == 1));
        assert!(matches!(b.kind, EventKind::MessageArrival { message } if message.seq == 2));
    }

    #[test]
    fn kind_rank_orders_ties() {
        let mut q = EventQueue::new();
        let due = TimeNs::from_millis(1);
        q.push(due, arrival(0, 1));
        q.push(
            due,
            EventKind::BudgetExhaustion {
                thread: ThreadId(0),
            },
        );
        q.push(
            due,
            EventKind::Replenishment {
                thread: ThreadId(0),
                amount: TimeNs::from_millis(1),
            },
        );
        assert_eq!(q.pop_due(due).unwrap().kind.rank(), 0);
        assert_eq!(q.pop_due(due).unwrap().kind.rank(), 1);
        assert_eq!(q.pop_due(due).unwrap().kind.rank(), 4);
    }

    #[test]
    fn cancel_before_pop_is_confirmed() {
        let mut q = EventQueue::new();
        let h = q.push(TimeNs::from_millis(1), arrival(0, 1));
        assert_eq!(q.cancel(h), CancelOutcome::Confirmed);
        assert!(q.pop_due(TimeNs::from_secs(1)).is_none());
        assert_eq!(q.cancel(h), CancelOutcome::AlreadyFired);
    }

    #[test]
    fn cancel_after_pop_reports_already_fired() {
        let mut q = EventQueue::new();
        let h = q.push(TimeNs::from_millis(1), arrival(0, 1));
        assert!(q.pop_due(TimeNs::from_secs(1)).is_some());
        assert_eq!(q.cancel(h), CancelOutcome::AlreadyFired);
    }
}
