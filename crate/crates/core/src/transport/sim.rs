use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_size, Endpoint, Transport, TransportError};
use crate::Millis;

/// Per-packet channel behavior. Every draw comes from one seeded stream, so a
/// fixed seed and send schedule always produce the same fates.
///
/// - loss: dropped with probability `loss_prob`
/// - duplication: a second copy with probability `dup_prob`
/// - delay: `delay_mean_ms` plus a uniform draw from
///   [-`delay_jitter_ms`, +`delay_jitter_ms`], clamped at zero, per copy
/// - reordering: each copy may overtake up to `reorder_window` packets
///   still queued for the same destination
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Impairment {
    pub loss_prob: f64,
    pub dup_prob: f64,
    pub delay_mean_ms: f64,
    pub delay_jitter_ms: f64,
    pub reorder_window: usize,
    pub seed: u64,
}

impl Default for Impairment {
    fn default() -> Self {
        Self { loss_prob: 0.0, dup_prob: 0.0, delay_mean_ms: 0.0, delay_jitter_ms: 0.0, reorder_window: 0, seed: 0 }
    }
}

impl Impairment {
    pub fn none() -> Self {
        Self::default()
    }

    /// Drops everything.
    pub fn blackhole() -> Self {
        Self { loss_prob: 1.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [("loss_prob", self.loss_prob), ("dup_prob", self.dup_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must be within [0, 1], got {p}"));
            }
        }
        for (name, v) in [("delay_mean_ms", self.delay_mean_ms), ("delay_jitter_ms", self.delay_jitter_ms)] {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("{name} must be >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SimStats {
    pub sent: u64,
    pub dropped: u64,
    pub duplicated: u64,
    pub delivered: u64,
}

#[derive(Debug, Clone)]
struct InFlight {
    deliver_at: Millis,
    from: Endpoint,
    bytes: Vec<u8>,
}

/// Single-threaded in-process datagram network on a caller-driven clock.
#[derive(Debug)]
pub struct SimNetwork {
    impairment: Impairment,
    rng: ChaCha8Rng,
    // kept sorted by delivery time; position breaks ties
    mailboxes: BTreeMap<u32, Vec<InFlight>>,
    next_id: u32,
    stats: SimStats,
}

impl SimNetwork {
    pub fn new(impairment: Impairment) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(impairment.seed);
        Self { impairment, rng, mailboxes: BTreeMap::new(), next_id: 1, stats: SimStats::default() }
    }

    pub fn shared(impairment: Impairment) -> Rc<RefCell<Self>> {
        Rc::new(RefCell::new(Self::new(impairment)))
    }

    pub fn register(&mut self) -> Endpoint {
        let id = self.next_id;
        self.next_id += 1;
        self.mailboxes.insert(id, Vec::new());
        Endpoint::Mailbox(id)
    }

    pub fn impairment(&self) -> &Impairment {
        &self.impairment
    }

    /// Changes channel behavior for subsequent sends; packets already in
    /// flight keep their fate. The random stream continues uninterrupted.
    pub fn set_impairment(&mut self, impairment: Impairment) {
        self.impairment = impairment;
    }

    pub fn stats(&self) -> SimStats {
        self.stats
    }

    pub fn in_flight(&self) -> usize {
        self.mailboxes.values().map(Vec::len).sum()
    }

    pub fn send(&mut self, from: &Endpoint, to: &Endpoint, bytes: &[u8], now: Millis) -> Result<(), TransportError> {
        check_size(bytes)?;
        let Endpoint::Mailbox(id) = to else {
            return Err(TransportError::IncompatibleEndpoint(to.clone()));
        };
        if !self.mailboxes.contains_key(id) {
            return Err(TransportError::UnknownEndpoint(to.clone()));
        }
        self.stats.sent += 1;

        let imp = &self.impairment;
        if self.rng.random::<f64>() < imp.loss_prob {
            self.stats.dropped += 1;
            return Ok(());
        }
        let copies = if self.rng.random::<f64>() < imp.dup_prob {
            self.stats.duplicated += 1;
            2
        } else {
            1
        };
        for _ in 0..copies {
            let jitter = if imp.delay_jitter_ms > 0.0 {
                self.rng.random_range(-imp.delay_jitter_ms..=imp.delay_jitter_ms)
            } else {
                0.0
            };
            let delay = (imp.delay_mean_ms + jitter).max(0.0).round() as Millis;
            let overtake = if imp.reorder_window > 0 { self.rng.random_range(0..=imp.reorder_window) } else { 0 };

            let queue = self.mailboxes.get_mut(id).expect("checked above");
            let mut packet = InFlight { deliver_at: now + delay, from: from.clone(), bytes: bytes.to_vec() };
            let natural = queue.partition_point(|p| p.deliver_at <= packet.deliver_at);
            let pos = natural.saturating_sub(overtake);
            if pos < natural {
                packet.deliver_at = packet.deliver_at.min(queue[pos].deliver_at);
            }
            queue.insert(pos, packet);
        }
        Ok(())
    }

    pub fn poll_receive(&mut self, at: &Endpoint, now: Millis) -> Vec<(Vec<u8>, Endpoint)> {
        let Endpoint::Mailbox(id) = at else { return Vec::new() };
        let Some(queue) = self.mailboxes.get_mut(id) else { return Vec::new() };
        let due = queue.partition_point(|p| p.deliver_at <= now);
        let ready: Vec<_> = queue.drain(..due).map(|p| (p.bytes, p.from)).collect();
        self.stats.delivered += ready.len() as u64;
        ready
    }
}

/// A [`Transport`] handle bound to one mailbox of a shared [`SimNetwork`].
#[derive(Debug, Clone)]
pub struct SimSocket {
    net: Rc<RefCell<SimNetwork>>,
    local: Endpoint,
}

impl SimSocket {
    pub fn bind(net: &Rc<RefCell<SimNetwork>>) -> Self {
        let local = net.borrow_mut().register();
        Self { net: Rc::clone(net), local }
    }
}

impl Transport for SimSocket {
    fn local(&self) -> Endpoint {
        self.local.clone()
    }

    fn send(&mut self, to: &Endpoint, bytes: &[u8], now: Millis) -> Result<(), TransportError> {
        self.net.borrow_mut().send(&self.local, to, bytes, now)
    }

    fn poll_receive(&mut self, now: Millis) -> Vec<(Vec<u8>, Endpoint)> {
        self.net.borrow_mut().poll_receive(&self.local, now)
    }
}
