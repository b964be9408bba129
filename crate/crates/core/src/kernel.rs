//! Deterministic discrete-event engine: virtual clock, event queue, trace.
//!
//! The kernel owns no domain state. Everything else registers events against
//! it and reacts to them through an [`EventHandler`]. The simulation is
//! single-threaded by contract: one logical thread of control advances the
//! clock, pops events in total order and hands them to the handler.

use crate::error::KernelError;
use crate::event::{CancelOutcome, Event, EventHandle, EventKind, EventQueue};
use crate::time::TimeNs;
use crate::trace::{Trace, TraceTag};

/// Receives events popped by [`Kernel::run_until`].
pub trait EventHandler {
    /// Called once per event, with the clock already advanced to `event.due`.
    fn on_event(&mut self, kernel: &mut Kernel, event: Event) -> Result<(), KernelError>;

    /// Called after all events due at the current instant have been handled.
    ///
    /// This is where dispatch decisions run: state changes from the instant's
    /// events have all landed, so the handler can pick who owns the CPU next.
    /// It may schedule further events at the same instant; the kernel drains
    /// them and calls this hook again until the instant is quiet.
    fn on_instant_settled(&mut self, kernel: &mut Kernel, now: TimeNs) -> Result<(), KernelError>;
}

#[derive(Debug, Default)]
pub struct Kernel {
    now: TimeNs,
    queue: EventQueue,
    trace: Trace,
}

impl Kernel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> TimeNs {
        self.now
    }

    /// Schedules `kind` to fire at `due`. `due` must not be in the past.
    pub fn schedule(&mut self, due: TimeNs, kind: EventKind) -> Result<EventHandle, KernelError> {
        if due < self.now {
            return Err(KernelError::PastDue { due, now: self.now });
        }
        Ok(self.queue.push(due, kind))
    }

    /// Cancels a scheduled event. Cancelling an event that already fired (or
    /// was already cancelled) is a normal outcome, not an error.
    pub fn cancel(&mut self, handle: EventHandle) -> CancelOutcome {
        self.queue.cancel(handle)
    }

    pub fn record(&mut self, thread: &str, tag: TraceTag, detail: String) {
        self.trace.record(self.now, thread, tag, detail);
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Trace {
        std::mem::take(&mut self.trace)
    }

    /// Runs all events with `due <= end` in `(due, kind rank, seq)` order,
    /// settling each instant before moving to the next. On return the clock
    /// sits exactly at `end` and the accumulated trace is available.
    pub fn run_until<H: EventHandler>(
        &mut self,
        end: TimeNs,
        handler: &mut H,
    ) -> Result<&Trace, KernelError> {
        if end < self.now {
            return Err(KernelError::PastDue {
                due: end,
                now: self.now,
            });
        }
        while let Some(due) = self.queue.peek_due() {
            if due > end {
                break;
            }
            self.now = due;
            // Drain the instant, settle, and repeat in case settling produced
            // more same-instant events (lock handover, zero-cost spins).
            loop {
                while let Some(event) = self.queue.pop_due(self.now) {
                    handler.on_event(self, event)?;
                }
                handler.on_instant_settled(self, self.now)?;
                if self.queue.peek_due() != Some(self.now) {
                    break;
                }
            }
        }
        self.now = end;
        Ok(&self.trace)
    }
}
