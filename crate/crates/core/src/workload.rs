//! Scenario construction: ping/pong node models and generators for the three
//! built-in experiments (case 1 budget sweep, case 2 all-FIFO baseline and
//! the work-conserving sleep sweep), plus the scheduler-level enforcement
//! oracle used by the acceptance suite.

use crate::error::ScenarioError;
use crate::event::TopicId;
use crate::executor::MiddlewareCosts;
use crate::frac::Fraction;
use crate::metrics::{Metrics, StreamMetrics};
use crate::sched::SchedParams;
use crate::sim::{Sim, World};
use crate::time::TimeNs;
use crate::trace::Trace;

/// An ideal external traffic source/sink (the Linux-host side of the
/// testbench). Sending and receiving consume no simulated CPU; the first
/// message arrives at t = period.
#[derive(Debug, Clone)]
pub struct PingNodeModel {
    pub send_topic: TopicId,
    pub reply_topic: TopicId,
    pub period: TimeNs,
    pub sent: u64,
    pub received: u64,
    pub received_latencies: Vec<TimeNs>,
}

impl PingNodeModel {
    pub fn new(send_topic: TopicId, reply_topic: TopicId, period: TimeNs) -> Self {
        PingNodeModel {
            send_topic,
            reply_topic,
            period,
            sent: 0,
            received: 0,
            received_latencies: Vec::new(),
        }
    }

    pub fn receive(&mut self, now: TimeNs, ping_publish_time: TimeNs) {
        self.received += 1;
        self.received_latencies.push(now - ping_publish_time);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubscriptionSpec {
    pub topic: String,
    pub worker_name: String,
    pub busy: TimeNs,
    pub sleep: TimeNs,
    pub publishes: Option<String>,
    pub sched: SchedParams,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PingSpec {
    pub send_topic: String,
    pub reply_topic: String,
    pub period: TimeNs,
}

/// Declarative experiment description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub duration: TimeNs,
    pub executor_priority: i64,
    pub wait_timeout: TimeNs,
    pub queue_depth: usize,
    pub costs: MiddlewareCosts,
    pub pings: Vec<PingSpec>,
    pub subscriptions: Vec<SubscriptionSpec>,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.duration.is_zero() {
            return Err(ScenarioError::invalid("duration", "must be > 0"));
        }
        if self.wait_timeout.is_zero() {
            return Err(ScenarioError::invalid("wait_timeout", "must be > 0"));
        }
        if self.queue_depth == 0 {
            return Err(ScenarioError::invalid("queue_depth", "must be >= 1"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for sub in &self.subscriptions {
            if !seen.insert(sub.topic.as_str()) {
                return Err(ScenarioError::DuplicateTopic(sub.topic.clone()));
            }
            sub.sched.validate().map_err(|e| match e {
                crate::error::SchedError::InvalidParams(msg) => {
                    let field = if msg.contains("init_budget") {
                        "init_budget"
                    } else if msg.contains("low_priority") {
                        "low_priority"
                    } else if msg.contains("max_repl") {
                        "max_repl"
                    } else {
                        "sched"
                    };
                    ScenarioError::Invalid {
                        field: format!("{}.{}", sub.topic, field),
                        reason: msg,
                    }
                }
                other => ScenarioError::Sched(other),
            })?;
        }
        for ping in &self.pings {
            if ping.period.is_zero() {
                return Err(ScenarioError::invalid("period", "ping period must be > 0"));
            }
            if !self
                .subscriptions
                .iter()
                .any(|s| s.topic == ping.send_topic)
            {
                return Err(ScenarioError::invalid(
                    "send_topic",
                    format!("ping topic `{}` has no subscription", ping.send_topic),
                ));
            }
        }
        Ok(())
    }

    /// Builds the runnable world for this scenario.
    pub fn build(&self) -> Result<Sim, ScenarioError> {
        self.validate()?;
        let mut world = World::new(self.duration);
        world.queue_depth = self.queue_depth;
        world.set_executor(self.executor_priority, self.wait_timeout, self.costs)?;
        for sub in &self.subscriptions {
            world.add_subscription(
                &sub.topic,
                &sub.worker_name,
                sub.busy,
                sub.sleep,
                sub.publishes.as_deref(),
                sub.sched,
            )?;
        }
        for ping in &self.pings {
            world.add_ping(&ping.send_topic, &ping.reply_topic, ping.period);
        }
        Ok(Sim::new(world))
    }
}

const HPRT_PRIORITY: i64 = 60;
const HPRT_LOW_PRIORITY: i64 = 10;
const LPBE_PRIORITY: i64 = 50;
const EXECUTOR_PRIORITY: i64 = 110;
const REPL_PERIOD: TimeNs = TimeNs::from_millis(100);
const PING_PERIOD: TimeNs = TimeNs::from_millis(10);
const CALLBACK_BUSY: TimeNs = TimeNs::from_millis(10);
const MAX_REPL: u32 = 100;
const RUN_DURATION: TimeNs = TimeNs::from_secs(10);
const WAIT_TIMEOUT: TimeNs = TimeNs::from_millis(100);

fn base_scenario(hprt_sched: SchedParams, lpbe_busy: TimeNs, lpbe_sleep: TimeNs) -> Scenario {
    Scenario {
        duration: RUN_DURATION,
        executor_priority: EXECUTOR_PRIORITY,
        wait_timeout: WAIT_TIMEOUT,
        queue_depth: 16,
        costs: MiddlewareCosts::default(),
        pings: vec![
            PingSpec {
                send_topic: "ping_hprt".into(),
                reply_topic: "pong_hprt".into(),
                period: PING_PERIOD,
            },
            PingSpec {
                send_topic: "ping_lpbe".into(),
                reply_topic: "pong_lpbe".into(),
                period: PING_PERIOD,
            },
        ],
        subscriptions: vec![
            SubscriptionSpec {
                topic: "ping_hprt".into(),
                worker_name: "hprt".into(),
                busy: CALLBACK_BUSY,
                sleep: TimeNs::ZERO,
                publishes: Some("pong_hprt".into()),
                sched: hprt_sched,
            },
            SubscriptionSpec {
                topic: "ping_lpbe".into(),
                worker_name: "lpbe".into(),
                busy: lpbe_busy,
                sleep: lpbe_sleep,
                publishes: Some("pong_lpbe".into()),
                sched: SchedParams::fifo(LPBE_PRIORITY),
            },
        ],
        seed: 0,
    }
}

/// Case 1: HPRT worker under the sporadic policy with
/// `budget = budget_fraction × 100 ms`, LPBE worker under FIFO.
pub fn build_case1(budget_fraction: Fraction) -> Result<Scenario, ScenarioError> {
    if !budget_fraction.gt_zero() || !budget_fraction.le_one() {
        return Err(ScenarioError::invalid(
            "budget_fraction",
            format!("{budget_fraction} is outside (0, 1]"),
        ));
    }
    let budget = budget_fraction
        .of(REPL_PERIOD)
        .map_err(|e| ScenarioError::invalid("budget_fraction", e.to_string()))?;
    let hprt = SchedParams::sporadic(
        HPRT_PRIORITY,
        HPRT_LOW_PRIORITY,
        budget,
        REPL_PERIOD,
        MAX_REPL,
    );
    Ok(base_scenario(hprt, CALLBACK_BUSY, TimeNs::ZERO))
}

/// Case 2: both workers under FIFO (60/50); no budget parameter at all, so
/// metrics are identical for any nominal budget value swept over.
pub fn build_case2() -> Scenario {
    base_scenario(
        SchedParams::fifo(HPRT_PRIORITY),
        CALLBACK_BUSY,
        TimeNs::ZERO,
    )
}

/// Work-conserving sweep: HPRT sporadic with a 30 ms / 100 ms budget, LPBE
/// FIFO with a callback that is busy `(1 − sleep_fraction) × 10 ms` and
/// sleeps the rest.
pub fn build_workconserving(sleep_fraction: Fraction) -> Result<Scenario, ScenarioError> {
    if !sleep_fraction.le_one() {
        return Err(ScenarioError::invalid(
            "sleep_fraction",
            format!("{sleep_fraction} is outside [0, 1]"),
        ));
    }
    let busy = sleep_fraction
        .one_minus()
        .of(PING_PERIOD)
        .map_err(|e| ScenarioError::invalid("sleep_fraction", e.to_string()))?;
    let sleep = sleep_fraction
        .of(PING_PERIOD)
        .map_err(|e| ScenarioError::invalid("sleep_fraction", e.to_string()))?;
    let hprt = SchedParams::sporadic(
        HPRT_PRIORITY,
        HPRT_LOW_PRIORITY,
        TimeNs::from_millis(30),
        REPL_PERIOD,
        MAX_REPL,
    );
    Ok(base_scenario(hprt, busy, sleep))
}

/// Runs a scenario to completion and collects per-topic metrics plus the
/// full event trace. Deterministic: the same scenario yields byte-identical
/// traces and metrics.
pub fn run_scenario(scenario: &Scenario) -> Result<(Metrics, Trace), ScenarioError> {
    run_scenario_checked(scenario, false)
}

/// Like [`run_scenario`], with budget-conservation invariants re-checked
/// after every event (used by the property tests).
pub fn run_scenario_checked(
    scenario: &Scenario,
    check_invariants: bool,
) -> Result<(Metrics, Trace), ScenarioError> {
    let mut sim = scenario.build()?;
    sim.world.check_invariants = check_invariants;
    sim.run()
        .map_err(|e| ScenarioError::invalid("simulation", e.to_string()))?;
    let metrics = collect_metrics(&sim.world);
    Ok((metrics, sim.kernel.take_trace()))
}

fn collect_metrics(world: &World) -> Metrics {
    let mut streams = Vec::new();
    for sub in &world.subs {
        let topic = world.topic_name(sub.topic).to_owned();
        let queue = &world.queues[&sub.topic];
        let thread = world.sched.thread(sub.worker);
        let ping = world.pings.iter().find(|p| p.send_topic == sub.topic);
        let (received, latency_sum_ns, latency_count, max_latency) = match ping {
            Some(p) => {
                let sum: u128 = p
                    .received_latencies
                    .iter()
                    .map(|l| l.as_nanos() as u128)
                    .sum();
                let max = p
                    .received_latencies
                    .iter()
                    .copied()
                    .max()
                    .unwrap_or(TimeNs::ZERO);
                (p.received, sum, p.received, max)
            }
            None => (0, 0, 0, TimeNs::ZERO),
        };
        streams.push(StreamMetrics {
            topic,
            sent: queue.arrivals,
            received,
            dropped: queue.dropped,
            skipped_busy: sub.skipped_busy,
            taken: sub.taken,
            queued_at_end: queue.messages.len() as u64,
            latency_sum_ns,
            latency_count,
            max_latency,
            normal_prio_cpu: thread.cpu.normal_ns,
            low_prio_cpu: thread.cpu.low_ns,
            exhaustions: thread.exhaustion_count,
            replenishments: thread.replenishment_count,
        });
    }
    Metrics {
        streams,
        published_without_subscriber: world.published_without_subscriber,
    }
}

/// Per-thread outcome of the scheduler-level enforcement oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleThreadStats {
    pub name: String,
    pub normal_prio_cpu: TimeNs,
    pub low_prio_cpu: TimeNs,
    pub exhaustions: u64,
    pub replenishments: u64,
}

/// Two always-ready threads on the bare scheduler: a sporadic one
/// (60/10, 30 ms budget, 100 ms period, 100 max replenishments) against an
/// always-ready FIFO(50), both demanding CPU from t = 0. With zero
/// middleware overhead the sporadic thread gets exactly 30 ms of every
/// 100 ms window at its normal priority and the FIFO thread gets the rest.
pub fn enforcement_oracle(
    duration: TimeNs,
) -> Result<(Vec<OracleThreadStats>, Trace), ScenarioError> {
    let mut world = World::new(duration);
    world.check_invariants = true;
    world.add_synthetic_load(
        "sporadic",
        SchedParams::sporadic(
            HPRT_PRIORITY,
            HPRT_LOW_PRIORITY,
            TimeNs::from_millis(30),
            REPL_PERIOD,
            MAX_REPL,
        ),
    )?;
    world.add_synthetic_load("fifo", SchedParams::fifo(LPBE_PRIORITY))?;
    let mut sim = Sim::new(world);
    sim.run()
        .map_err(|e| ScenarioError::invalid("simulation", e.to_string()))?;
    let stats = sim
        .world
        .sched
        .threads()
        .map(|t| OracleThreadStats {
            name: t.name.clone(),
            normal_prio_cpu: t.cpu.normal_ns,
            low_prio_cpu: t.cpu.low_ns,
            exhaustions: t.exhaustion_count,
            replenishments: t.replenishment_count,
        })
        .collect();
    Ok((stats, sim.kernel.take_trace()))
}
