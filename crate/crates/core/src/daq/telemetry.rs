use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Weak};

use crossbeam_queue::ArrayQueue;
use serde::Serialize;

/// Rows per telemetry batch: 20 batches/s at 1000 Hz.
pub const DEFAULT_BATCH_ROWS: usize = 50;
/// Batches a subscriber may fall behind before the oldest are dropped.
pub const DEFAULT_QUEUE_BATCHES: usize = 64;

/// Consecutive samples, one gauge vector (kPa) per row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBatch {
    /// Time of the first row, s.
    pub t0: f64,
    pub dt_sample: f64,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug)]
struct Shared {
    queue: ArrayQueue<SampleBatch>,
    closed: AtomicBool,
    dropped: AtomicU64,
}

/// Receiving end of a telemetry stream.
#[derive(Debug)]
pub struct Subscription {
    shared: Arc<Shared>,
}

impl Subscription {
    pub fn try_recv(&self) -> Option<SampleBatch> {
        self.shared.queue.pop()
    }

    /// Everything currently queued, oldest first.
    pub fn drain(&self) -> Vec<SampleBatch> {
        std::iter::from_fn(|| self.try_recv()).collect()
    }

    /// True once the session has stopped and every queued batch was taken.
    pub fn is_finished(&self) -> bool {
        self.shared.closed.load(Ordering::Acquire) && self.shared.queue.is_empty()
    }

    /// Batches discarded because this subscriber fell behind.
    pub fn dropped(&self) -> u64 {
        self.shared.dropped.load(Ordering::Relaxed)
    }
}

/// Sending side kept by the session.
#[derive(Debug, Default)]
pub(crate) struct FanOut {
    subscribers: Vec<Weak<Shared>>,
}

impl FanOut {
    pub(crate) fn subscribe(&mut self, capacity: usize) -> Subscription {
        let shared = Arc::new(Shared {
            queue: ArrayQueue::new(capacity.max(1)),
            closed: AtomicBool::new(false),
            dropped: AtomicU64::new(0),
        });
        self.subscribers.push(Arc::downgrade(&shared));
        Subscription { shared }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.subscribers.is_empty()
    }

    /// Never blocks: a full queue loses its oldest batch.
    pub(crate) fn publish(&mut self, batch: &SampleBatch) {
        self.subscribers.retain(|weak| match weak.upgrade() {
            Some(shared) => {
                if shared.queue.force_push(batch.clone()).is_some() {
                    shared.dropped.fetch_add(1, Ordering::Relaxed);
                }
                true
            }
            None => false,
        });
    }

    pub(crate) fn close(&mut self) {
        for shared in self.subscribers.drain(..).filter_map(|w| w.upgrade()) {
            shared.closed.store(true, Ordering::Release);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(t0: f64) -> SampleBatch {
        SampleBatch {
            t0,
            dt_sample: 0.001,
            rows: vec![vec![0.0; 5]],
        }
    }

    #[test]
    fn drop_oldest_when_full() {
        let mut fan = FanOut::default();
        let sub = fan.subscribe(2);
        for i in 0..5 {
            fan.publish(&batch(i as f64));
        }
        assert_eq!(sub.dropped(), 3);
        let t0s: Vec<f64> = sub.drain().iter().map(|b| b.t0).collect();
        assert_eq!(t0s, vec![3.0, 4.0]);
    }

    #[test]
    fn dropped_subscribers_are_forgotten() {
        let mut fan = FanOut::default();
        let sub = fan.subscribe(4);
        drop(sub);
        fan.publish(&batch(0.0));
        assert!(fan.is_empty());
    }

    #[test]
    fn close_marks_finished_after_drain() {
        let mut fan = FanOut::default();
        let sub = fan.subscribe(4);
        fan.publish(&batch(0.0));
        fan.close();
        assert!(!sub.is_finished());
        sub.drain();
        assert!(sub.is_finished());
    }
}
