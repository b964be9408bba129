//! The real-time publish/subscribe executor model.
//!
//! One executor thread polls the middleware and hands messages to dedicated
//! per-subscription worker threads. The middleware is single-threaded: every
//! wait, take and publish happens under one mutex. The executor takes a
//! message only when the target worker is READY; otherwise the message stays
//! queued and a SKIP_BUSY record is emitted for that pass.
//!
//! The interaction is modeled as simulation state transitions on the virtual
//! CPU of [`crate::sched`]; the artifact itself never spawns OS threads.

use std::collections::VecDeque;

use crate::event::{EventHandle, Message, ThreadId, TopicId};
use crate::time::TimeNs;

/// Cost model of one subscription callback: `busy` nanoseconds of preemptible
/// CPU, then `sleep` nanoseconds blocked off-CPU, then an optional reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallbackSpec {
    pub busy: TimeNs,
    pub sleep: TimeNs,
    pub publishes: Option<TopicId>,
}

/// CPU consumed by each middleware operation while holding the lock.
/// All zero by default, which is the regime the analytic oracles assume.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MiddlewareCosts {
    pub fill: TimeNs,
    pub wait: TimeNs,
    pub take: TimeNs,
    pub publish: TimeNs,
}

/// READY/BUSY flag of a subscription's worker, as observed by the executor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubState {
    Ready,
    Busy,
}

#[derive(Debug)]
pub struct Subscription {
    pub topic: TopicId,
    pub callback: CallbackSpec,
    pub worker: ThreadId,
    pub state: SubState,
    pub msg_slot: Option<Message>,
    pub taken: u64,
    pub skipped_busy: u64,
}

/// Bounded per-topic FIFO standing in for the DDS queue. On overflow the
/// oldest message is dropped and counted.
#[derive(Debug)]
pub struct TopicQueue {
    pub depth: usize,
    pub messages: VecDeque<Message>,
    pub arrivals: u64,
    pub dropped: u64,
}

impl TopicQueue {
    pub fn new(depth: usize) -> Self {
        TopicQueue {
            depth,
            messages: VecDeque::new(),
            arrivals: 0,
            dropped: 0,
        }
    }

    /// Enqueues `msg`, returning the displaced oldest message on overflow.
    pub fn push(&mut self, msg: Message) -> Option<Message> {
        self.arrivals += 1;
        self.messages.push_back(msg);
        if self.messages.len() > self.depth {
            self.dropped += 1;
            self.messages.pop_front()
        } else {
            None
        }
    }
}

/// The single mutual-exclusion resource serializing middleware access.
///
/// Waiters are granted by effective priority (ties FIFO by arrival). A free
/// lock with queued waiters stays reserved for them: late arrivals may not
/// jump the handover that is already scheduled.
#[derive(Debug, Default)]
pub struct MiddlewareLock {
    pub holder: Option<ThreadId>,
    waiters: Vec<(ThreadId, u64)>,
    next_wait_seq: u64,
}

impl MiddlewareLock {
    pub fn try_acquire(&mut self, tid: ThreadId) -> bool {
        if self.holder.is_none() && self.waiters.is_empty() {
            self.holder = Some(tid);
            true
        } else {
            self.next_wait_seq += 1;
            self.waiters.push((tid, self.next_wait_seq));
            false
        }
    }

    pub fn release(&mut self, tid: ThreadId) {
        assert_eq!(self.holder, Some(tid), "release by non-holder");
        self.holder = None;
    }

    pub fn has_waiters(&self) -> bool {
        !self.waiters.is_empty()
    }

    /// Hands the free lock to the best waiter: highest effective priority,
    /// then earliest arrival.
    pub fn grant<F: Fn(ThreadId) -> i64>(&mut self, priority_of: F) -> Option<ThreadId> {
        if self.holder.is_some() || self.waiters.is_empty() {
            return None;
        }
        let best = self
            .waiters
            .iter()
            .enumerate()
            .max_by(|(_, (ta, sa)), (_, (tb, sb))| {
                priority_of(*ta).cmp(&priority_of(*tb)).then(sb.cmp(sa))
            })
            .map(|(i, _)| i)
            .expect("non-empty waiters");
        let (tid, _) = self.waiters.remove(best);
        self.holder = Some(tid);
        Some(tid)
    }
}

/// Where the executor program stands; advanced when its thread is dispatched
/// or woken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecPhase {
    /// About to start a spin iteration: acquire the lock, fill the wait set.
    StartIteration,
    /// Waiting for the middleware lock to start the iteration.
    WantLockStart,
    /// Holding the lock, consuming the wait-set fill cost.
    FillWork,
    /// Holding the lock, consuming the wait-call cost.
    WaitWork,
    /// Parked in the wait: lock released, wake on arrival or timeout.
    WaitSleeping,
    /// Woken with data; waiting for the middleware lock to run the takes.
    WantLockResume,
    /// Holding the lock, scanning subscriptions from `next`.
    DispatchLoop { next: usize },
    /// Holding the lock, consuming the take cost for subscription `idx`.
    TakeWork { idx: usize },
}

/// Where a worker program stands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerPhase {
    /// Blocked on the condition variable, waiting for a signal.
    Idle,
    /// Signaled; emits CB_START and begins the busy phase when dispatched.
    StartCallback,
    /// On CPU consuming the callback's busy time.
    BusyPhase,
    /// Blocked off-CPU for the callback's sleep time.
    Sleeping,
    /// Waiting for the middleware lock to publish the reply.
    WantPublishLock,
    /// Holding the lock; consume the publish cost, then publish.
    PublishWork,
    /// Publish done (or none configured): emit CB_END, go READY, park.
    FinishCallback,
}

#[derive(Debug)]
pub struct ExecutorState {
    pub thread: ThreadId,
    pub phase: ExecPhase,
    pub wait_timeout: TimeNs,
    pub timeout_event: Option<EventHandle>,
    pub costs: MiddlewareCosts,
}

#[derive(Debug)]
pub struct WorkerState {
    pub sub_idx: usize,
    pub phase: WorkerPhase,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queue_drops_oldest_on_overflow() {
        let mut q = TopicQueue::new(2);
        let msg = |seq| Message {
            topic: TopicId(0),
            seq,
            publish_time: TimeNs::ZERO,
        };
        assert!(q.push(msg(1)).is_none());
        assert!(q.push(msg(2)).is_none());
        let displaced = q.push(msg(3)).unwrap();
        assert_eq!(displaced.seq, 1);
        assert_eq!(q.arrivals, 3);
        assert_eq!(q.dropped, 1);
        assert_eq!(
            q.messages.iter().map(|m| m.seq).collect::<Vec<_>>(),
            vec![2, 3]
        );
    }

    #[test]
    fn lock_grants_by_priority_then_fifo() {
        let mut lock = MiddlewareLock::default();
        assert!(lock.try_acquire(ThreadId(0)));
        assert!(!lock.try_acquire(ThreadId(1))); // prio 50
        assert!(!lock.try_acquire(ThreadId(2))); // prio 110
        assert!(!lock.try_acquire(ThreadId(3))); // prio 50
        lock.release(ThreadId(0));
        let prio = |t: ThreadId| match t.0 {
            1 | 3 => 50,
            2 => 110,
            _ => 0,
        };
        assert_eq!(lock.grant(prio), Some(ThreadId(2)));
        lock.release(ThreadId(2));
        // Equal priority: FIFO by arrival.
        assert_eq!(lock.grant(prio), Some(ThreadId(1)));
        lock.release(ThreadId(1));
        assert_eq!(lock.grant(prio), Some(ThreadId(3)));
    }

    #[test]
    fn free_lock_with_waiters_rejects_newcomers() {
        let mut lock = MiddlewareLock::default();
        assert!(lock.try_acquire(ThreadId(0)));
        assert!(!lock.try_acquire(ThreadId(1)));
        lock.release(ThreadId(0));
        // Handover to thread 1 is pending; thread 2 must queue behind it.
        assert!(!lock.try_acquire(ThreadId(2)));
        assert_eq!(
            lock.grant(|t| if t.0 == 1 { 10 } else { 99 }),
            Some(ThreadId(2))
        );
    }
}
