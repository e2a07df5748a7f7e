//! Thread-local call counters for architectural-isolation checks.
//!
//! The monolithic baseline claims it never touches the sequencing or
//! stage-termination stacks. Rather than trusting call-site inspection,
//! the entry points of those stacks bump a counter here, and a test can
//! assert the counter did not move across a rollout. Counters are
//! thread-local so concurrently running tests cannot contaminate each
//! other's readings.

use std::cell::Cell;

thread_local! {
    static SEQUENCE_CALLS: Cell<u64> = const { Cell::new(0) };
    static TERMINATE_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Record one sequencing invocation on this thread.
pub(crate) fn bump_sequence() {
    SEQUENCE_CALLS.with(|c| c.set(c.get() + 1));
}

/// Record one stage-termination construction or evaluation on this thread.
pub(crate) fn bump_terminate() {
    TERMINATE_CALLS.with(|c| c.set(c.get() + 1));
}

/// Sequencing invocations so far on this thread.
pub fn sequence_calls() -> u64 {
    SEQUENCE_CALLS.with(Cell::get)
}

/// Stage-termination invocations so far on this thread.
pub fn terminate_calls() -> u64 {
    TERMINATE_CALLS.with(Cell::get)
}
