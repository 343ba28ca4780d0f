use std::collections::{BTreeMap, VecDeque};

use super::{RlcPdu, RlcUmConfig, RxSduBuf, Sdu};
use crate::sim::{SimTime, Timer};

/// UM transmitter: segmentation only, nothing is kept after sending.
#[derive(Debug)]
pub struct UmTx<P> {
    tx_next: u64,
    queue: VecDeque<Sdu<P>>,
    queue_bytes: u64,
    /// Bytes of the head SDU already sent.
    head_sent: u32,
    sdus_in: u64,
}

impl<P: Clone> Default for UmTx<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P: Clone> UmTx<P> {
    pub fn new() -> Self {
        UmTx {
            tx_next: 0,
            queue: VecDeque::new(),
            queue_bytes: 0,
            head_sent: 0,
            sdus_in: 0,
        }
    }

    pub fn sdus_in(&self) -> u64 {
        self.sdus_in
    }

    pub fn enqueue(&mut self, sdu: Sdu<P>) {
        self.sdus_in += 1;
        self.queue_bytes += u64::from(sdu.bytes);
        self.queue.push_back(sdu);
    }

    pub fn buffered_bytes(&self) -> u64 {
        self.queue_bytes - u64::from(self.head_sent)
    }

    pub fn build(&mut self, budget: u32) -> Vec<RlcPdu<P>> {
        let mut out = Vec::new();
        let mut left = budget;
        while left > 0 {
            let Some(head) = self.queue.front() else {
                break;
            };
            let so = self.head_sent;
            let take = (head.bytes - so).min(left);
            let last = so + take == head.bytes;
            out.push(RlcPdu {
                sn: self.tx_next,
                sdu_id: head.id,
                segment_offset: so,
                len: take,
                is_last_segment: last,
                poll: false,
                payload: head.payload.clone(),
            });
            left -= take;
            if last {
                self.queue_bytes -= u64::from(head.bytes);
                self.queue.pop_front();
                self.head_sent = 0;
                self.tx_next += 1;
            } else {
                self.head_sent += take;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UmRxStats {
    pub pdus_received: u64,
    pub pdus_discarded: u64,
    pub sdus_delivered: u64,
    pub sdus_lost: u64,
}

/// UM receiver: in-order delivery, gaps older than the reassembly timer
/// are given up for good.
#[derive(Debug)]
pub struct UmRx<P> {
    cfg: RlcUmConfig,
    rx_next: u64,
    rx_next_highest: u64,
    trigger: u64,
    buf: BTreeMap<u64, RxSduBuf<P>>,
    pub reassembly_timer: Timer,
    stats: UmRxStats,
}

impl<P: Clone> UmRx<P> {
    pub fn new(cfg: RlcUmConfig) -> Self {
        UmRx {
            cfg,
            rx_next: 0,
            rx_next_highest: 0,
            trigger: 0,
            buf: BTreeMap::new(),
            reassembly_timer: Timer::default(),
            stats: UmRxStats::default(),
        }
    }

    pub fn stats(&self) -> &UmRxStats {
        &self.stats
    }

    fn complete(&self, sn: u64) -> bool {
        self.buf.get(&sn).is_some_and(|b| b.is_complete())
    }

    fn gap_pending(&self) -> bool {
        self.rx_next_highest > self.rx_next + 1
            || (self.rx_next_highest == self.rx_next + 1
                && self.buf.get(&self.rx_next).is_some_and(|b| b.has_hole()))
    }

    fn deliver(&mut self, out: &mut Vec<Sdu<P>>) {
        while self.complete(self.rx_next) {
            let b = self.buf.remove(&self.rx_next).expect("complete entry");
            out.push(b.into_sdu());
            self.stats.sdus_delivered += 1;
            self.rx_next += 1;
        }
    }

    fn rearm(&mut self, now: SimTime) {
        if self.reassembly_timer.is_running() && self.trigger <= self.rx_next {
            self.reassembly_timer.stop();
        }
        if !self.reassembly_timer.is_running() && self.gap_pending() {
            self.reassembly_timer.start(now, self.cfg.t_reassembly());
            self.trigger = self.rx_next_highest;
        }
    }

    pub fn on_pdu(&mut self, now: SimTime, pdu: RlcPdu<P>) -> Vec<Sdu<P>> {
        self.stats.pdus_received += 1;
        let mut out = Vec::new();
        if pdu.sn < self.rx_next {
            self.stats.pdus_discarded += 1;
            return out;
        }
        let sn = pdu.sn;
        let entry = self.buf.entry(sn).or_insert_with(|| RxSduBuf::new(&pdu));
        if entry.insert(pdu.segment_offset, pdu.len, pdu.is_last_segment) == 0 {
            self.stats.pdus_discarded += 1;
            return out;
        }
        self.rx_next_highest = self.rx_next_highest.max(sn + 1);
        self.deliver(&mut out);
        self.rearm(now);
        out
    }

    /// Reassembly expiry: SDUs below the trigger that are still incomplete
    /// are lost; delivery resumes after them.
    pub fn on_reassembly_timer(&mut self, now: SimTime) -> Vec<Sdu<P>> {
        let mut out = Vec::new();
        if !self.reassembly_timer.fires_at(now) {
            return out;
        }
        self.reassembly_timer.stop();
        while self.rx_next < self.trigger {
            match self.buf.remove(&self.rx_next) {
                Some(b) if b.is_complete() => {
                    out.push(b.into_sdu());
                    self.stats.sdus_delivered += 1;
                }
                _ => self.stats.sdus_lost += 1,
            }
            self.rx_next += 1;
        }
        self.deliver(&mut out);
        self.rearm(now);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T0: SimTime = SimTime(0);

    fn whole(sn: u64) -> RlcPdu<u64> {
        RlcPdu {
            sn,
            sdu_id: sn,
            segment_offset: 0,
            len: 100,
            is_last_segment: true,
            poll: false,
            payload: sn,
        }
    }

    fn ids(v: &[Sdu<u64>]) -> Vec<u64> {
        v.iter().map(|s| s.id).collect()
    }

    #[test]
    fn in_order_is_immediate() {
        let mut rx = UmRx::new(RlcUmConfig::default());
        for sn in 0..3 {
            assert_eq!(ids(&rx.on_pdu(T0, whole(sn))), vec![sn]);
        }
        assert!(!rx.reassembly_timer.is_running());
    }

    #[test]
    fn lost_sdu_is_skipped_on_expiry() {
        let mut rx = UmRx::new(RlcUmConfig::default());
        rx.on_pdu(T0, whole(0));
        assert!(rx.on_pdu(T0, whole(2)).is_empty());
        let out = rx.on_reassembly_timer(SimTime::from_millis(50));
        assert_eq!(ids(&out), vec![2]);
        assert_eq!(rx.stats().sdus_lost, 1);
        // A straggler for the lost SN is too late.
        assert!(rx.on_pdu(SimTime::from_millis(60), whole(1)).is_empty());
    }

    #[test]
    fn late_pdu_before_expiry_is_reordered() {
        let mut rx = UmRx::new(RlcUmConfig::default());
        rx.on_pdu(T0, whole(0));
        rx.on_pdu(T0, whole(2));
        let out = rx.on_pdu(SimTime::from_millis(10), whole(1));
        assert_eq!(ids(&out), vec![1, 2]);
        assert!(!rx.reassembly_timer.is_running());
        assert_eq!(rx.stats().sdus_lost, 0);
    }

    #[test]
    fn second_gap_rearms_timer() {
        let mut rx = UmRx::new(RlcUmConfig::default());
        rx.on_pdu(T0, whole(1));
        rx.on_pdu(SimTime::from_millis(20), whole(3));
        let out = rx.on_reassembly_timer(SimTime::from_millis(50));
        assert_eq!(ids(&out), vec![1]);
        assert_eq!(
            rx.reassembly_timer.deadline(),
            Some(SimTime::from_millis(100))
        );
        let out = rx.on_reassembly_timer(SimTime::from_millis(100));
        assert_eq!(ids(&out), vec![3]);
        assert_eq!(rx.stats().sdus_lost, 2);
    }

    #[test]
    fn segmented_roundtrip() {
        let mut tx = UmTx::new();
        let mut rx = UmRx::new(RlcUmConfig::default());
        tx.enqueue(Sdu {
            id: 7,
            bytes: 3000,
            payload: 7u64,
        });
        tx.enqueue(Sdu {
            id: 8,
            bytes: 500,
            payload: 8u64,
        });
        assert_eq!(tx.buffered_bytes(), 3500);
        let mut got = Vec::new();
        while tx.buffered_bytes() > 0 {
            for p in tx.build(1200) {
                got.extend(rx.on_pdu(T0, p));
            }
        }
        assert_eq!(
            got.iter().map(|s| (s.id, s.bytes)).collect::<Vec<_>>(),
            vec![(7, 3000), (8, 500)]
        );
        assert_eq!(tx.sdus_in(), 2);
    }
}
