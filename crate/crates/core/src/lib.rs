//! Deterministic discrete-event simulator of a budget-based real-time
//! publish/subscribe executor.
//!
//! The model: a fixed-priority preemptive virtual CPU with FIFO and
//! POSIX-style sporadic-server scheduling, a single-threaded middleware
//! (bounded per-topic queues behind one mutex), one executor thread that
//! takes messages only for READY workers, and dedicated per-subscription
//! worker threads running configurable callbacks. Ping nodes are ideal
//! external hosts exchanging ping/pong traffic with the simulated board.
//!
//! Everything runs on integer-nanosecond virtual time with a documented
//! total event order, so identical scenarios produce byte-identical traces
//! and metrics.

pub mod error;
pub mod event;
pub mod executor;
pub mod frac;
pub mod kernel;
pub mod metrics;
pub mod sched;
pub mod sim;
pub mod time;
pub mod trace;
pub mod workload;

pub use error::{KernelError, ScenarioError, SchedError};
pub use event::{Event, EventHandle, EventKind, Message, ThreadId, TopicId};
pub use frac::Fraction;
pub use kernel::Kernel;
pub use metrics::{Metrics, StreamMetrics, CSV_HEADER};
pub use sched::{CpuScheduler, Policy, SchedParams};
pub use sim::{Sim, World};
pub use time::TimeNs;
pub use trace::{Trace, TraceRecord, TraceTag};
pub use workload::{
    build_case1, build_case2, build_workconserving, enforcement_oracle, run_scenario,
    run_scenario_checked, Scenario,
};
