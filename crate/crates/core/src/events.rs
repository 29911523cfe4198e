//! Fan-out of scene, job and asset notifications to stream subscribers.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::mpsc;

/// Per-subscriber buffer; a subscriber that falls this far behind is dropped.
pub const SUBSCRIBER_BUFFER: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    SceneChanged,
    JobStateChanged,
    AssetAdded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMessage {
    pub seq: u64,
    pub kind: EventKind,
    pub payload: Value,
}

pub type Subscription = mpsc::Receiver<EventMessage>;

#[derive(Default)]
struct Inner {
    next_seq: u64,
    subscribers: Vec<mpsc::Sender<EventMessage>>,
}

/// Publishers never block: delivery uses `try_send`, and subscribers whose
/// buffer is full (or who went away) are disconnected.
pub struct EventBus {
    inner: Mutex<Inner>,
    buffer: usize,
}

impl Default for EventBus {
    fn default() -> Self {
        Self::with_buffer(SUBSCRIBER_BUFFER)
    }
}

impl EventBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_buffer(buffer: usize) -> Self {
        Self {
            inner: Mutex::new(Inner {
                next_seq: 1,
                subscribers: Vec::new(),
            }),
            buffer: buffer.max(1),
        }
    }

    pub fn subscribe(&self) -> Subscription {
        let (tx, rx) = mpsc::channel(self.buffer);
        self.inner.lock().expect("event bus lock").subscribers.push(tx);
        rx
    }

    pub fn subscriber_count(&self) -> usize {
        self.inner.lock().expect("event bus lock").subscribers.len()
    }

    /// Stamps the next sequence number on a new message and delivers it.
    pub fn publish(&self, kind: EventKind, payload: Value) -> EventMessage {
        let mut inner = self.inner.lock().expect("event bus lock");
        let msg = EventMessage {
            seq: inner.next_seq,
            kind,
            payload,
        };
        inner.next_seq += 1;
        Self::deliver(&mut inner, &msg);
        msg
    }

    /// Delivers a pre-stamped message. Messages that would break the
    /// increasing sequence are dropped.
    pub fn publish_event(&self, msg: EventMessage) {
        let mut inner = self.inner.lock().expect("event bus lock");
        if msg.seq < inner.next_seq {
            return;
        }
        inner.next_seq = msg.seq + 1;
        Self::deliver(&mut inner, &msg);
    }

    fn deliver(inner: &mut Inner, msg: &EventMessage) {
        inner.subscribers.retain(|tx| tx.try_send(msg.clone()).is_ok());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn in_order_delivery() {
        let bus = EventBus::new();
        let mut rx = bus.subscribe();
        for i in 1..=5 {
            bus.publish(EventKind::SceneChanged, json!({ "i": i }));
        }
        let got: Vec<u64> = (0..5).map(|_| rx.try_recv().unwrap().seq).collect();
        assert_eq!(got, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn no_subscribers_is_a_no_op() {
        let bus = EventBus::new();
        assert_eq!(bus.publish(EventKind::AssetAdded, Value::Null).seq, 1);
        assert_eq!(bus.subscriber_count(), 0);
    }

    #[test]
    fn stalled_subscriber_is_dropped() {
        let bus = EventBus::new();
        let stalled = bus.subscribe();
        let mut live = bus.subscribe();
        for i in 0..SUBSCRIBER_BUFFER + 10 {
            bus.publish(EventKind::JobStateChanged, json!(i));
            assert_eq!(live.try_recv().unwrap().payload, json!(i));
        }
        assert_eq!(bus.subscriber_count(), 1);
        drop(stalled);
    }

    #[test]
    fn stale_sequence_numbers_are_ignored() {
        let bus = EventBus::new();
        let mut rx = bus.subscribe();
        bus.publish_event(EventMessage { seq: 10, kind: EventKind::SceneChanged, payload: Value::Null });
        bus.publish_event(EventMessage { seq: 3, kind: EventKind::SceneChanged, payload: Value::Null });
        assert_eq!(bus.publish(EventKind::SceneChanged, Value::Null).seq, 11);
        assert_eq!(rx.try_recv().unwrap().seq, 10);
        assert_eq!(rx.try_recv().unwrap().seq, 11);
    }
}
