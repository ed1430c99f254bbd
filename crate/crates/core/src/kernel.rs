//! Single-threaded discrete-event scheduler.
//!
//! Events are popped in `(fire_at, seq)` order, so simultaneous events run in
//! insertion order. The kernel owns no randomness.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::types::SimTime;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("event scheduled at {at} but the clock already reads {now}")]
pub struct PastEvent {
    pub at: SimTime,
    pub now: SimTime,
}

struct Entry<E> {
    fire_at: SimTime,
    seq: u64,
    action: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_at, other.seq).cmp(&(self.fire_at, self.seq))
    }
}

pub struct Kernel<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Entry<E>>,
    dispatched: u64,
}

impl<E> Default for Kernel<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Kernel<E> {
    pub fn new() -> Self {
        Self::starting_at(SimTime::ZERO)
    }

    pub fn starting_at(now: SimTime) -> Self {
        Kernel {
            now,
            next_seq: 0,
            queue: BinaryHeap::new(),
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn schedule(&mut self, at: SimTime, action: E) -> Result<(), PastEvent> {
        if at < self.now {
            return Err(PastEvent { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Entry { fire_at: at, seq, action });
        Ok(())
    }

    pub fn schedule_in(&mut self, delay_us: i64, action: E) -> Result<(), PastEvent> {
        self.schedule(self.now + delay_us, action)
    }

    /// Pops the next event if it fires at or before `t_end`, advancing the clock.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<(SimTime, E)> {
        if self.queue.peek()?.fire_at > t_end {
            return None;
        }
        let entry = self.queue.pop()?;
        debug_assert!(entry.fire_at >= self.now);
        self.now = entry.fire_at;
        self.dispatched += 1;
        Some((entry.fire_at, entry.action))
    }

    /// Dispatches every event with `fire_at <= t_end`, including events that
    /// handlers schedule within the horizon, then advances the clock to `t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F)
    where
        F: FnMut(&mut Self, E),
    {
        while let Some((_, action)) = self.pop_until(t_end) {
            handler(self, action);
        }
        if t_end > self.now {
            self.now = t_end;
        }
    }

    /// Dispatches events until the queue is empty.
    pub fn run_to_quiescence<F>(&mut self, mut handler: F)
    where
        F: FnMut(&mut Self, E),
    {
        while let Some((_, action)) = self.pop_until(SimTime(i64::MAX)) {
            handler(self, action);
        }
    }
}
