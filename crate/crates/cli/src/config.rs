//! Scenario config files: flat TOML with sections for the executor,
//! middleware costs, subscriptions and ping streams. Per-subscription
//! scheduling keys mirror the scheduler interface names (`policy`,
//! `priority`, `low_priority`, `repl_period_ns`, `init_budget_ns`,
//! `max_repl`).

use serde::{Deserialize, Serialize};

use budgetsim_core::executor::MiddlewareCosts;
use budgetsim_core::workload::{PingSpec, Scenario, SubscriptionSpec};
use budgetsim_core::{Policy, SchedParams, TimeNs};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub executor: ExecutorSection,
    #[serde(default)]
    pub middleware_costs: CostsSection,
    #[serde(default, rename = "subscription")]
    pub subscriptions: Vec<SubscriptionSection>,
    #[serde(default, rename = "ping")]
    pub pings: Vec<PingSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutorSection {
    #[serde(default = "default_executor_priority")]
    pub priority: i64,
    #[serde(default = "default_wait_timeout")]
    pub wait_timeout_ns: u64,
    #[serde(default = "default_queue_depth")]
    pub queue_depth: usize,
    pub duration_ns: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_executor_priority() -> i64 {
    110
}

fn default_wait_timeout() -> u64 {
    100_000_000
}

fn default_queue_depth() -> usize {
    16
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsSection {
    #[serde(default)]
    pub fill_ns: u64,
    #[serde(default)]
    pub wait_ns: u64,
    #[serde(default)]
    pub take_ns: u64,
    #[serde(default)]
    pub publish_ns: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubscriptionSection {
    pub topic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker: Option<String>,
    #[serde(default)]
    pub busy_ns: u64,
    #[serde(default)]
    pub sleep_ns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publishes: Option<String>,
    pub policy: String,
    pub priority: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_priority: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_budget_ns: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repl_period_ns: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_repl: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PingSection {
    pub send_topic: String,
    pub reply_topic: String,
    pub period_ns: u64,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        let mut subscriptions = Vec::new();
        for sub in &self.subscriptions {
            let sched = sub.to_sched_params()?;
            subscriptions.push(SubscriptionSpec {
                topic: sub.topic.clone(),
                worker_name: sub
                    .worker
                    .clone()
                    .unwrap_or_else(|| format!("w_{}", sub.topic)),
                busy: TimeNs::from_nanos(sub.busy_ns),
                sleep: TimeNs::from_nanos(sub.sleep_ns),
                publishes: sub.publishes.clone(),
                sched,
            });
        }
        let scenario = Scenario {
            duration: TimeNs::from_nanos(self.executor.duration_ns),
            executor_priority: self.executor.priority,
            wait_timeout: TimeNs::from_nanos(self.executor.wait_timeout_ns),
            queue_depth: self.executor.queue_depth,
            costs: MiddlewareCosts {
                fill: TimeNs::from_nanos(self.middleware_costs.fill_ns),
                wait: TimeNs::from_nanos(self.middleware_costs.wait_ns),
                take: TimeNs::from_nanos(self.middleware_costs.take_ns),
                publish: TimeNs::from_nanos(self.middleware_costs.publish_ns),
            },
            pings: self
                .pings
                .iter()
                .map(|p| PingSpec {
                    send_topic: p.send_topic.clone(),
                    reply_topic: p.reply_topic.clone(),
                    period: TimeNs::from_nanos(p.period_ns),
                })
                .collect(),
            subscriptions,
            seed: self.executor.seed,
        };
        scenario
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(scenario)
    }

    pub fn from_scenario(scenario: &Scenario) -> ConfigFile {
        ConfigFile {
            executor: ExecutorSection {
                priority: scenario.executor_priority,
                wait_timeout_ns: scenario.wait_timeout.as_nanos(),
                queue_depth: scenario.queue_depth,
                duration_ns: scenario.duration.as_nanos(),
                seed: scenario.seed,
            },
            middleware_costs: CostsSection {
                fill_ns: scenario.costs.fill.as_nanos(),
                wait_ns: scenario.costs.wait.as_nanos(),
                take_ns: scenario.costs.take.as_nanos(),
                publish_ns: scenario.costs.publish.as_nanos(),
            },
            subscriptions: scenario
                .subscriptions
                .iter()
                .map(|s| {
                    let (policy, low, budget, period, max_repl) = match s.sched.policy {
                        Policy::Fifo => ("fifo".to_owned(), None, None, None, None),
                        Policy::Sporadic {
                            low_priority,
                            init_budget,
                            repl_period,
                            max_repl,
                        } => (
                            "sporadic".to_owned(),
                            Some(low_priority),
                            Some(init_budget.as_nanos()),
                            Some(repl_period.as_nanos()),
                            Some(max_repl),
                        ),
                    };
                    SubscriptionSection {
                        topic: s.topic.clone(),
                        worker: Some(s.worker_name.clone()),
                        busy_ns: s.busy.as_nanos(),
                        sleep_ns: s.sleep.as_nanos(),
                        publishes: s.publishes.clone(),
                        policy,
                        priority: s.sched.priority,
                        low_priority: low,
                        init_budget_ns: budget,
                        repl_period_ns: period,
                        max_repl,
                    }
                })
                .collect(),
            pings: scenario
                .pings
                .iter()
                .map(|p| PingSection {
                    send_topic: p.send_topic.clone(),
                    reply_topic: p.reply_topic.clone(),
                    period_ns: p.period.as_nanos(),
                })
                .collect(),
        }
    }
}

impl SubscriptionSection {
    fn to_sched_params(&self) -> Result<SchedParams, CliError> {
        match self.policy.as_str() {
            "fifo" => Ok(SchedParams::fifo(self.priority)),
            "sporadic" => {
                let require = |name: &str, v: Option<u64>| {
                    v.ok_or_else(|| {
                        CliError::Validation(format!(
                            "subscription `{}`: `{name}` is required for policy = \"sporadic\"",
                            self.topic
                        ))
                    })
                };
                let low_priority = self.low_priority.ok_or_else(|| {
                    CliError::Validation(format!(
                        "subscription `{}`: `low_priority` is required for policy = \"sporadic\"",
                        self.topic
                    ))
                })?;
                let init_budget = require("init_budget_ns", self.init_budget_ns)?;
                let repl_period = require("repl_period_ns", self.repl_period_ns)?;
                let max_repl = self.max_repl.ok_or_else(|| {
                    CliError::Validation(format!(
                        "subscription `{}`: `max_repl` is required for policy = \"sporadic\"",
                        self.topic
                    ))
                })?;
                Ok(SchedParams::sporadic(
                    self.priority,
                    low_priority,
                    TimeNs::from_nanos(init_budget),
                    TimeNs::from_nanos(repl_period),
                    max_repl,
                ))
            }
            other => Err(CliError::Validation(format!(
                "subscription `{}`: unknown policy `{other}` (expected \"fifo\" or \"sporadic\")",
                self.topic
            ))),
        }
    }
}
