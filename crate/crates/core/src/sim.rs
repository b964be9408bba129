//! The simulation world: one virtual CPU, one middleware, one executor,
//! per-subscription workers and ideal external ping nodes.
//!
//! Thread behavior is written as small resumable programs (phase enums in
//! [`crate::executor`]). A program advances only while its thread holds the
//! virtual CPU; it suspends by submitting CPU work (a future completion
//! event) or by parking (condition wait, sleep, lock wait). Every dispatch
//! decision happens when an instant settles, after all events due at that
//! instant have been applied.

use std::collections::BTreeMap;

use crate::error::{KernelError, ScenarioError};
use crate::event::{Event, EventKind, LockId, Message, ThreadId, TopicId};
use crate::executor::{
    CallbackSpec, ExecPhase, ExecutorState, MiddlewareCosts, MiddlewareLock, SubState,
    Subscription, TopicQueue, WorkerPhase, WorkerState,
};
use crate::kernel::{EventHandler, Kernel};
use crate::sched::{CpuScheduler, SchedParams, ThreadState, Work};
use crate::time::TimeNs;
use crate::trace::TraceTag;
use crate::workload::PingNodeModel;

const MW_LOCK: LockId = LockId(0);
/// Pseudo thread name for records not attributable to a sim thread.
const MW_NAME: &str = "mw";

pub struct World {
    pub sched: CpuScheduler,
    pub lock: MiddlewareLock,
    pub queues: BTreeMap<TopicId, TopicQueue>,
    pub subs: Vec<Subscription>,
    pub exec: Option<ExecutorState>,
    pub workers: BTreeMap<ThreadId, WorkerState>,
    pub pings: Vec<PingNodeModel>,
    topic_names: Vec<String>,
    topic_ids: BTreeMap<String, TopicId>,
    ping_by_send_topic: BTreeMap<TopicId, usize>,
    ping_by_reply_topic: BTreeMap<TopicId, usize>,
    local_publish_seq: BTreeMap<TopicId, u64>,
    synthetic: Vec<ThreadId>,
    pub costs: MiddlewareCosts,
    pub queue_depth: usize,
    pub duration: TimeNs,
    pub published_without_subscriber: u64,
    /// When set, budget conservation is re-checked after every event.
    pub check_invariants: bool,
}

impl World {
    pub fn new(duration: TimeNs) -> Self {
        World {
            sched: CpuScheduler::new(),
            lock: MiddlewareLock::default(),
            queues: BTreeMap::new(),
            subs: Vec::new(),
            exec: None,
            workers: BTreeMap::new(),
            pings: Vec::new(),
            topic_names: Vec::new(),
            topic_ids: BTreeMap::new(),
            ping_by_send_topic: BTreeMap::new(),
            ping_by_reply_topic: BTreeMap::new(),
            local_publish_seq: BTreeMap::new(),
            synthetic: Vec::new(),
            costs: MiddlewareCosts::default(),
            queue_depth: 16,
            duration,
            published_without_subscriber: 0,
            check_invariants: false,
        }
    }

    pub fn intern_topic(&mut self, name: &str) -> TopicId {
        if let Some(id) = self.topic_ids.get(name) {
            return *id;
        }
        let id = TopicId(self.topic_names.len() as u32);
        self.topic_names.push(name.to_owned());
        self.topic_ids.insert(name.to_owned(), id);
        id
    }

    pub fn topic_name(&self, id: TopicId) -> &str {
        &self.topic_names[id.0 as usize]
    }

    /// Registers the executor thread (FIFO at the scenario's priority).
    pub fn set_executor(
        &mut self,
        priority: i64,
        wait_timeout: TimeNs,
        costs: MiddlewareCosts,
    ) -> Result<ThreadId, ScenarioError> {
        if wait_timeout.is_zero() {
            return Err(ScenarioError::invalid(
                "wait_timeout",
                "must be > 0 (a zero-timeout wait would busy-poll without advancing time)",
            ));
        }
        let tid = self
            .sched
            .add_thread("executor", SchedParams::fifo(priority))?;
        self.costs = costs;
        self.exec = Some(ExecutorState {
            thread: tid,
            phase: ExecPhase::StartIteration,
            wait_timeout,
            timeout_event: None,
            costs,
        });
        Ok(tid)
    }

    /// Creates a subscription with its dedicated worker thread. The worker
    /// starts Blocked, waiting for the executor's signal.
    pub fn add_subscription(
        &mut self,
        topic: &str,
        worker_name: &str,
        callback_busy: TimeNs,
        callback_sleep: TimeNs,
        publishes: Option<&str>,
        sched: SchedParams,
    ) -> Result<ThreadId, ScenarioError> {
        let topic_id = self.intern_topic(topic);
        if self.subs.iter().any(|s| s.topic == topic_id) {
            return Err(ScenarioError::DuplicateTopic(topic.to_owned()));
        }
        let publishes = publishes.map(|t| self.intern_topic(t));
        let worker = self.sched.add_thread(worker_name, sched)?;
        self.queues
            .insert(topic_id, TopicQueue::new(self.queue_depth));
        self.subs.push(Subscription {
            topic: topic_id,
            callback: CallbackSpec {
                busy: callback_busy,
                sleep: callback_sleep,
                publishes,
            },
            worker,
            state: SubState::Ready,
            msg_slot: None,
            taken: 0,
            skipped_busy: 0,
        });
        self.workers.insert(
            worker,
            WorkerState {
                sub_idx: self.subs.len() - 1,
                phase: WorkerPhase::Idle,
            },
        );
        Ok(worker)
    }

    /// Registers an ideal external ping node. Its sends and receives consume
    /// no simulated CPU; the first message arrives at t = period.
    pub fn add_ping(&mut self, send_topic: &str, reply_topic: &str, period: TimeNs) {
        let send = self.intern_topic(send_topic);
        let reply = self.intern_topic(reply_topic);
        let idx = self.pings.len();
        self.pings.push(PingNodeModel::new(send, reply, period));
        self.ping_by_send_topic.insert(send, idx);
        self.ping_by_reply_topic.insert(reply, idx);
    }

    /// Registers an always-ready thread with endless CPU demand; pure
    /// scheduler load, no middleware involvement.
    pub fn add_synthetic_load(
        &mut self,
        name: &str,
        sched: SchedParams,
    ) -> Result<ThreadId, ScenarioError> {
        let tid = self.sched.add_thread(name, sched)?;
        self.synthetic.push(tid);
        Ok(tid)
    }

    /// Makes initial threads ready and schedules the first ping arrivals plus
    /// the end-of-simulation marker, then settles instant zero.
    pub fn start(&mut self, kernel: &mut Kernel) -> Result<(), KernelError> {
        for i in 0..self.pings.len() {
            let ping = &self.pings[i];
            let due = ping.period;
            if due <= self.duration {
                kernel.schedule(
                    due,
                    EventKind::MessageArrival {
                        message: Message {
                            topic: ping.send_topic,
                            seq: 1,
                            publish_time: due,
                        },
                    },
                )?;
            }
        }
        kernel.schedule(self.duration, EventKind::SimulationEnd)?;
        if let Some(exec) = &self.exec {
            let tid = exec.thread;
            self.sched.make_ready(tid, kernel.now())?;
        }
        for tid in self.synthetic.clone() {
            self.sched.preset_endless_work(tid);
            self.sched.make_ready(tid, kernel.now())?;
        }
        self.settle(kernel)?;
        Ok(())
    }

    /// Pushes a message into its topic queue, tracing the arrival and any
    /// overflow drop, and wakes the executor if it is parked in the wait.
    fn enqueue_message(&mut self, msg: Message, kernel: &mut Kernel) -> Result<(), KernelError> {
        let topic = self.topic_name(msg.topic).to_owned();
        let queue = self
            .queues
            .get_mut(&msg.topic)
            .expect("arrival for unsubscribed topic");
        kernel.record(
            MW_NAME,
            TraceTag::Arrive,
            format!("topic={topic} seq={}", msg.seq),
        );
        if let Some(dropped) = queue.push(msg) {
            kernel.record(
                MW_NAME,
                TraceTag::DropMsg,
                format!("topic={topic} seq={}", dropped.seq),
            );
        }
        if let Some(exec) = &mut self.exec {
            if exec.phase == ExecPhase::WaitSleeping {
                if let Some(handle) = exec.timeout_event.take() {
                    kernel.cancel(handle);
                }
                exec.phase = ExecPhase::WantLockResume;
                self.sched.make_ready(exec.thread, kernel.now())?;
            }
        }
        Ok(())
    }

    fn on_arrival(&mut self, msg: Message, kernel: &mut Kernel) -> Result<(), KernelError> {
        if let Some(&idx) = self.ping_by_send_topic.get(&msg.topic) {
            let now = kernel.now();
            let ping = &mut self.pings[idx];
            ping.sent += 1;
            let next_due = now + ping.period;
            let next_seq = msg.seq + 1;
            if next_due <= self.duration {
                kernel.schedule(
                    next_due,
                    EventKind::MessageArrival {
                        message: Message {
                            topic: msg.topic,
                            seq: next_seq,
                            publish_time: next_due,
                        },
                    },
                )?;
            }
        }
        self.enqueue_message(msg, kernel)
    }

    fn on_completion(&mut self, tid: ThreadId, kernel: &mut Kernel) -> Result<(), KernelError> {
        if self.exec.as_ref().map(|e| e.thread) == Some(tid) {
            let exec = self.exec.as_mut().expect("checked above");
            if exec.phase == ExecPhase::WaitSleeping {
                // Wait timed out: wake up and start a fresh iteration
                // (re-fill the wait set).
                exec.timeout_event = None;
                exec.phase = ExecPhase::StartIteration;
                self.sched.make_ready(tid, kernel.now())?;
                return Ok(());
            }
            self.sched.work_completed(tid)?;
            return self.advance_executor(kernel);
        }
        if self.workers.contains_key(&tid) {
            if self.sched.thread(tid).state == ThreadState::Blocked {
                // End of the callback's sleep phase; the tail (publish,
                // READY) runs once the worker is dispatched again.
                debug_assert_eq!(self.workers[&tid].phase, WorkerPhase::Sleeping);
                self.sched.make_ready(tid, kernel.now())?;
                return Ok(());
            }
            self.sched.work_completed(tid)?;
            return self.advance_worker(tid, kernel);
        }
        Err(KernelError::Invariant(format!(
            "completion event for unknown thread {tid:?}"
        )))
    }

    fn grant_lock(&mut self, kernel: &mut Kernel) -> Result<(), KernelError> {
        let sched = &self.sched;
        if let Some(tid) = self.lock.grant(|t| sched.thread(t).effective_priority) {
            let name = self.sched.thread(tid).name.clone();
            kernel.record(&name, TraceTag::Lock, "lock=mw".to_owned());
            self.sched.make_ready(tid, kernel.now())?;
        }
        Ok(())
    }

    fn acquire_or_park(&mut self, tid: ThreadId, kernel: &mut Kernel) -> Result<bool, KernelError> {
        if self.lock.holder == Some(tid) {
            // Granted while parked; the LOCK record was emitted at grant time.
            return Ok(true);
        }
        if self.lock.try_acquire(tid) {
            let name = self.sched.thread(tid).name.clone();
            kernel.record(&name, TraceTag::Lock, "lock=mw".to_owned());
            Ok(true)
        } else {
            self.sched.block_running(tid, kernel)?;
            Ok(false)
        }
    }

    fn release_lock(&mut self, tid: ThreadId, kernel: &mut Kernel) -> Result<(), KernelError> {
        let name = self.sched.thread(tid).name.clone();
        kernel.record(&name, TraceTag::Unlock, "lock=mw".to_owned());
        self.lock.release(tid);
        if self.lock.has_waiters() {
            kernel.schedule(kernel.now(), EventKind::LockRelease { lock: MW_LOCK })?;
        }
        Ok(())
    }

    /// Any subscription with queued data and a READY worker?
    fn takeable(&self) -> bool {
        self.subs
            .iter()
            .any(|s| s.state == SubState::Ready && !self.queues[&s.topic].messages.is_empty())
    }

    fn perform_take(&mut self, idx: usize, kernel: &mut Kernel) -> Result<(), KernelError> {
        let exec_name = "executor";
        let sub = &mut self.subs[idx];
        let msg = self
            .queues
            .get_mut(&sub.topic)
            .expect("queue exists")
            .messages
            .pop_front()
            .expect("take requires queued data");
        let topic = self.topic_names[sub.topic.0 as usize].clone();
        sub.msg_slot = Some(msg);
        sub.state = SubState::Busy;
        sub.taken += 1;
        let worker = sub.worker;
        kernel.record(
            exec_name,
            TraceTag::Take,
            format!("topic={topic} seq={}", msg.seq),
        );
        let worker_name = self.sched.thread(worker).name.clone();
        kernel.record(
            exec_name,
            TraceTag::Signal,
            format!("topic={topic} worker={worker_name}"),
        );
        let w = self.workers.get_mut(&worker).expect("worker exists");
        debug_assert_eq!(w.phase, WorkerPhase::Idle);
        w.phase = WorkerPhase::StartCallback;
        self.sched.make_ready(worker, kernel.now())?;
        Ok(())
    }

    /// Runs the executor program until it parks or submits CPU work.
    fn advance_executor(&mut self, kernel: &mut Kernel) -> Result<(), KernelError> {
        let tid = self.exec.as_ref().expect("executor exists").thread;
        loop {
            let phase = self.exec.as_ref().expect("executor exists").phase;
            match phase {
                ExecPhase::StartIteration | ExecPhase::WantLockStart => {
                    if !self.acquire_or_park(tid, kernel)? {
                        self.exec.as_mut().unwrap().phase = ExecPhase::WantLockStart;
                        return Ok(());
                    }
                    self.exec.as_mut().unwrap().phase = ExecPhase::FillWork;
                    let fill = self.costs.fill;
                    if !fill.is_zero() {
                        self.sched.submit_work(tid, Work::Finite(fill), kernel);
                        return Ok(());
                    }
                }
                ExecPhase::FillWork => {
                    // Wait-set filled; charge the wait call itself.
                    self.exec.as_mut().unwrap().phase = ExecPhase::WaitWork;
                    let wait = self.costs.wait;
                    if !wait.is_zero() {
                        self.sched.submit_work(tid, Work::Finite(wait), kernel);
                        return Ok(());
                    }
                }
                ExecPhase::WaitWork => {
                    if self.takeable() {
                        self.exec.as_mut().unwrap().phase = ExecPhase::DispatchLoop { next: 0 };
                    } else {
                        // Nothing takeable: release the lock and park until a
                        // message arrives or the timeout elapses.
                        self.release_lock(tid, kernel)?;
                        let timeout = self.exec.as_ref().unwrap().wait_timeout;
                        let handle = kernel.schedule(
                            kernel.now() + timeout,
                            EventKind::CallbackCompletion { thread: tid },
                        )?;
                        let exec = self.exec.as_mut().unwrap();
                        exec.phase = ExecPhase::WaitSleeping;
                        exec.timeout_event = Some(handle);
                        self.sched.block_running(tid, kernel)?;
                        return Ok(());
                    }
                }
                ExecPhase::WaitSleeping => {
                    unreachable!("a parked executor is never advanced")
                }
                ExecPhase::WantLockResume => {
                    if !self.acquire_or_park(tid, kernel)? {
                        return Ok(());
                    }
                    self.exec.as_mut().unwrap().phase = ExecPhase::DispatchLoop { next: 0 };
                }
                ExecPhase::DispatchLoop { next } => {
                    let mut idx = next;
                    let mut submitted = false;
                    while idx < self.subs.len() {
                        let sub = &self.subs[idx];
                        let has_data = !self.queues[&sub.topic].messages.is_empty();
                        if has_data {
                            if sub.state == SubState::Ready {
                                let take = self.costs.take;
                                if !take.is_zero() {
                                    self.exec.as_mut().unwrap().phase = ExecPhase::TakeWork { idx };
                                    self.sched.submit_work(tid, Work::Finite(take), kernel);
                                    submitted = true;
                                    break;
                                }
                                self.perform_take(idx, kernel)?;
                            } else {
                                let topic = self.topic_name(sub.topic).to_owned();
                                kernel.record(
                                    "executor",
                                    TraceTag::SkipBusy,
                                    format!("topic={topic}"),
                                );
                                self.subs[idx].skipped_busy += 1;
                            }
                        }
                        idx += 1;
                    }
                    if submitted {
                        return Ok(());
                    }
                    // Iteration done: release and spin again.
                    self.release_lock(tid, kernel)?;
                    self.exec.as_mut().unwrap().phase = ExecPhase::StartIteration;
                }
                ExecPhase::TakeWork { idx } => {
                    self.perform_take(idx, kernel)?;
                    self.exec.as_mut().unwrap().phase = ExecPhase::DispatchLoop { next: idx + 1 };
                }
            }
        }
    }

    /// Runs a worker program until it parks or submits CPU work.
    fn advance_worker(&mut self, tid: ThreadId, kernel: &mut Kernel) -> Result<(), KernelError> {
        let sub_idx = self.workers[&tid].sub_idx;
        loop {
            let phase = self.workers[&tid].phase;
            match phase {
                WorkerPhase::Idle => unreachable!("idle worker is never advanced"),
                WorkerPhase::StartCallback => {
                    let sub = &self.subs[sub_idx];
                    let msg = sub.msg_slot.expect("signaled worker holds a message");
                    let topic = self.topic_name(sub.topic).to_owned();
                    let name = self.sched.thread(tid).name.clone();
                    kernel.record(
                        &name,
                        TraceTag::CbStart,
                        format!("topic={topic} seq={}", msg.seq),
                    );
                    let busy = sub.callback.busy;
                    self.workers.get_mut(&tid).unwrap().phase = WorkerPhase::BusyPhase;
                    if !busy.is_zero() {
                        self.sched.submit_work(tid, Work::Finite(busy), kernel);
                        return Ok(());
                    }
                }
                WorkerPhase::BusyPhase => {
                    // Busy time fully consumed (or zero).
                    let sleep = self.subs[sub_idx].callback.sleep;
                    if !sleep.is_zero() {
                        self.workers.get_mut(&tid).unwrap().phase = WorkerPhase::Sleeping;
                        kernel.schedule(
                            kernel.now() + sleep,
                            EventKind::CallbackCompletion { thread: tid },
                        )?;
                        self.sched.block_running(tid, kernel)?;
                        return Ok(());
                    }
                    self.workers.get_mut(&tid).unwrap().phase = WorkerPhase::WantPublishLock;
                }
                WorkerPhase::Sleeping => {
                    // Woken from sleep and dispatched again: run the tail.
                    self.workers.get_mut(&tid).unwrap().phase = WorkerPhase::WantPublishLock;
                }
                WorkerPhase::WantPublishLock => {
                    if self.subs[sub_idx].callback.publishes.is_none() {
                        self.workers.get_mut(&tid).unwrap().phase = WorkerPhase::FinishCallback;
                        continue;
                    }
                    if !self.acquire_or_park(tid, kernel)? {
                        return Ok(());
                    }
                    let cost = self.costs.publish;
                    if !cost.is_zero() {
                        self.workers.get_mut(&tid).unwrap().phase = WorkerPhase::PublishWork;
                        self.sched.submit_work(tid, Work::Finite(cost), kernel);
                        return Ok(());
                    }
                    self.do_publish(tid, sub_idx, kernel)?;
                    self.release_lock(tid, kernel)?;
                    self.workers.get_mut(&tid).unwrap().phase = WorkerPhase::FinishCallback;
                }
                WorkerPhase::PublishWork => {
                    self.do_publish(tid, sub_idx, kernel)?;
                    self.release_lock(tid, kernel)?;
                    self.workers.get_mut(&tid).unwrap().phase = WorkerPhase::FinishCallback;
                }
                WorkerPhase::FinishCallback => {
                    let sub = &mut self.subs[sub_idx];
                    let msg = sub
                        .msg_slot
                        .take()
                        .expect("finishing worker holds a message");
                    sub.state = SubState::Ready;
                    let topic = self.topic_names[sub.topic.0 as usize].clone();
                    let name = self.sched.thread(tid).name.clone();
                    kernel.record(
                        &name,
                        TraceTag::CbEnd,
                        format!("topic={topic} seq={}", msg.seq),
                    );
                    self.workers.get_mut(&tid).unwrap().phase = WorkerPhase::Idle;
                    self.sched.block_running(tid, kernel)?;
                    return Ok(());
                }
            }
        }
    }

    /// Publishes the callback's reply while holding the middleware lock.
    /// Replies to a ping node's reply topic are delivered to that node;
    /// locally subscribed topics are enqueued; anything else is counted and
    /// discarded.
    fn do_publish(
        &mut self,
        tid: ThreadId,
        sub_idx: usize,
        kernel: &mut Kernel,
    ) -> Result<(), KernelError> {
        let sub = &self.subs[sub_idx];
        let orig = sub.msg_slot.expect("publishing worker holds a message");
        let reply_topic = sub.callback.publishes.expect("publish target configured");
        let name = self.sched.thread(tid).name.clone();
        let now = kernel.now();
        if let Some(&idx) = self.ping_by_reply_topic.get(&reply_topic) {
            let topic = self.topic_name(reply_topic).to_owned();
            kernel.record(
                &name,
                TraceTag::Publish,
                format!("topic={topic} seq={}", orig.seq),
            );
            self.pings[idx].receive(now, orig.publish_time);
        } else if self.queues.contains_key(&reply_topic) {
            let seq = {
                let counter = self.local_publish_seq.entry(reply_topic).or_insert(0);
                *counter += 1;
                *counter
            };
            let topic = self.topic_name(reply_topic).to_owned();
            kernel.record(&name, TraceTag::Publish, format!("topic={topic} seq={seq}"));
            self.enqueue_message(
                Message {
                    topic: reply_topic,
                    seq,
                    publish_time: now,
                },
                kernel,
            )?;
        } else {
            let topic = self.topic_name(reply_topic).to_owned();
            kernel.record(
                &name,
                TraceTag::Publish,
                format!("topic={topic} seq={}", orig.seq),
            );
            self.published_without_subscriber += 1;
        }
        Ok(())
    }

    /// Called when a thread gains the CPU: resume pending work or advance its
    /// program.
    fn on_dispatched(&mut self, tid: ThreadId, kernel: &mut Kernel) -> Result<(), KernelError> {
        match self.sched.thread(tid).work {
            // Mid-work resume: the completion event was re-armed by dispatch.
            Work::Finite(_) | Work::Endless => Ok(()),
            Work::None => {
                if self.exec.as_ref().map(|e| e.thread) == Some(tid) {
                    self.advance_executor(kernel)
                } else if self.workers.contains_key(&tid) {
                    self.advance_worker(tid, kernel)
                } else {
                    // Synthetic load threads have endless work by construction.
                    Err(KernelError::Invariant(format!(
                        "dispatched thread {tid:?} has no program and no work"
                    )))
                }
            }
        }
    }

    /// Dispatch loop run at the end of each instant: preempt when a strictly
    /// higher-priority thread is ready, and keep the CPU busy while anyone is
    /// ready (work conservation).
    fn settle(&mut self, kernel: &mut Kernel) -> Result<(), KernelError> {
        loop {
            let Some(best) = self.sched.pick_next() else {
                return Ok(());
            };
            match self.sched.running() {
                Some(_) if !self.sched.should_preempt(best) => return Ok(()),
                Some(_) => {
                    self.sched.preempt_running(kernel)?;
                    self.sched.dispatch(best, kernel)?;
                    self.on_dispatched(best, kernel)?;
                }
                None => {
                    self.sched.dispatch(best, kernel)?;
                    self.on_dispatched(best, kernel)?;
                }
            }
        }
    }
}

impl EventHandler for World {
    fn on_event(&mut self, kernel: &mut Kernel, event: Event) -> Result<(), KernelError> {
        match event.kind {
            EventKind::Replenishment { thread, .. } => {
                self.sched.on_replenishment(thread, kernel)?
            }
            EventKind::BudgetExhaustion { thread } => {
                self.sched.on_budget_exhausted(thread, kernel)?
            }
            EventKind::LockRelease { .. } => self.grant_lock(kernel)?,
            EventKind::CallbackCompletion { thread } => self.on_completion(thread, kernel)?,
            EventKind::MessageArrival { message } => self.on_arrival(message, kernel)?,
            EventKind::SimulationEnd => {}
        }
        if self.check_invariants {
            self.sched.check_budget_conservation()?;
        }
        Ok(())
    }

    fn on_instant_settled(&mut self, kernel: &mut Kernel, _now: TimeNs) -> Result<(), KernelError> {
        self.settle(kernel)?;
        if self.check_invariants {
            self.sched.check_budget_conservation()?;
        }
        Ok(())
    }
}

/// A world plus its kernel: the runnable simulation.
pub struct Sim {
    pub kernel: Kernel,
    pub world: World,
}

impl Sim {
    pub fn new(world: World) -> Self {
        Sim {
            kernel: Kernel::new(),
            world,
        }
    }

    /// Runs the simulation to the world's configured duration.
    pub fn run(&mut self) -> Result<(), KernelError> {
        let end = self.world.duration;
        self.world.start(&mut self.kernel)?;
        self.kernel.run_until(end, &mut self.world)?;
        self.world.sched.finalize(end, &mut self.kernel)?;
        if self.world.check_invariants {
            self.world.sched.check_budget_conservation()?;
        }
        Ok(())
    }
}
