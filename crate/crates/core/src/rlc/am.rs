use std::collections::{BTreeMap, VecDeque};

use super::{NackEntry, RlcAmConfig, RlcPdu, RlcRxOutput, RxSduBuf, Sdu, StatusPdu};
use crate::sim::{SimTime, Timer};

#[derive(Clone, Debug)]
struct TxEntry<P> {
    sdu: Sdu<P>,
    sent_bytes: u32,
    retx_count: u32,
    /// Retransmission ranges of this SN currently queued.
    queued_retx: u32,
}

#[derive(Clone, Copy, Debug)]
struct RetxItem {
    sn: u64,
    so: u32,
    end: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AmTxStats {
    pub sdus_in: u64,
    pub pdus_sent: u64,
    pub retx_pdus: u64,
    pub retx_bytes: u64,
    pub polls_sent: u64,
    pub poll_expiries: u64,
    pub status_received: u64,
    pub status_malformed: u64,
    pub nacks_ignored: u64,
    pub mac_loss_reports: u64,
    pub window_stalls: u64,
    /// SDUs dropped after exceeding the retransmission limit.
    pub sdus_discarded: u64,
}

/// AM transmitter.
#[derive(Debug)]
pub struct AmTx<P> {
    cfg: RlcAmConfig,
    window: u64,
    tx_next: u64,
    tx_next_ack: u64,
    queue: VecDeque<Sdu<P>>,
    queue_bytes: u64,
    inflight: BTreeMap<u64, TxEntry<P>>,
    /// SN of a new SDU whose first transmission is still incomplete.
    partial: Option<u64>,
    retx: VecDeque<RetxItem>,
    pdu_without_poll: u32,
    poll_sn: Option<u64>,
    poll_pending: bool,
    pub poll_timer: Timer,
    discarded: Vec<u64>,
    stats: AmTxStats,
}

impl<P: Clone> AmTx<P> {
    pub fn new(cfg: RlcAmConfig) -> Self {
        AmTx {
            window: cfg.window(),
            cfg,
            tx_next: 0,
            tx_next_ack: 0,
            queue: VecDeque::new(),
            queue_bytes: 0,
            inflight: BTreeMap::new(),
            partial: None,
            retx: VecDeque::new(),
            pdu_without_poll: 0,
            poll_sn: None,
            poll_pending: false,
            poll_timer: Timer::default(),
            discarded: Vec::new(),
            stats: AmTxStats::default(),
        }
    }

    pub fn stats(&self) -> &AmTxStats {
        &self.stats
    }

    pub fn tx_next(&self) -> u64 {
        self.tx_next
    }

    pub fn tx_next_ack(&self) -> u64 {
        self.tx_next_ack
    }

    pub fn retx_count(&self, sn: u64) -> Option<u32> {
        self.inflight.get(&sn).map(|e| e.retx_count)
    }

    /// Ids of SDUs discarded after too many retransmissions.
    pub fn discarded(&self) -> &[u64] {
        &self.discarded
    }

    pub fn in_flight(&self) -> usize {
        self.inflight.len()
    }

    pub fn enqueue(&mut self, sdu: Sdu<P>) {
        self.stats.sdus_in += 1;
        self.queue_bytes += u64::from(sdu.bytes);
        self.queue.push_back(sdu);
    }

    pub fn buffered_bytes(&self) -> u64 {
        let new = self.queue_bytes;
        let partial = self
            .partial
            .and_then(|sn| self.inflight.get(&sn))
            .map_or(0, |e| u64::from(e.sdu.bytes - e.sent_bytes));
        let retx: u64 = self
            .retx
            .iter()
            .map(|r| u64::from(r.end.saturating_sub(r.so)))
            .sum();
        new + partial + retx
    }

    fn window_stalled(&self) -> bool {
        self.tx_next - self.tx_next_ack >= self.window
    }

    fn nothing_left(&self) -> bool {
        self.queue.is_empty() && self.partial.is_none() && self.retx.is_empty()
    }

    fn segment(entry: &TxEntry<P>, sn: u64, so: u32, len: u32) -> RlcPdu<P> {
        RlcPdu {
            sn,
            sdu_id: entry.sdu.id,
            segment_offset: so,
            len,
            is_last_segment: so + len == entry.sdu.bytes,
            poll: false,
            payload: entry.sdu.payload.clone(),
        }
    }

    /// Builds PDUs for one transmission opportunity of `budget` bytes.
    /// Retransmissions go first, then the rest of a partly sent SDU, then
    /// new SDUs while the window allows.
    pub fn build(&mut self, now: SimTime, budget: u32) -> Vec<RlcPdu<P>> {
        let mut out = Vec::new();
        let mut left = budget;

        while left > 0 {
            let Some(item) = self.retx.front_mut() else {
                break;
            };
            let Some(entry) = self.inflight.get_mut(&item.sn) else {
                self.retx.pop_front();
                continue;
            };
            let end = item.end.min(entry.sent_bytes);
            if item.so >= end {
                entry.queued_retx -= 1;
                self.retx.pop_front();
                continue;
            }
            let take = (end - item.so).min(left);
            out.push(Self::segment(entry, item.sn, item.so, take));
            self.stats.retx_pdus += 1;
            self.stats.retx_bytes += u64::from(take);
            item.so += take;
            left -= take;
            if item.so >= end {
                entry.queued_retx -= 1;
                self.retx.pop_front();
            }
        }

        if left > 0 {
            if let Some(sn) = self.partial {
                let entry = self
                    .inflight
                    .get_mut(&sn)
                    .expect("partial SDU is in flight");
                let take = (entry.sdu.bytes - entry.sent_bytes).min(left);
                out.push(Self::segment(entry, sn, entry.sent_bytes, take));
                entry.sent_bytes += take;
                left -= take;
                if entry.sent_bytes == entry.sdu.bytes {
                    self.partial = None;
                }
            }
        }

        while left > 0 && !self.queue.is_empty() {
            if self.window_stalled() {
                self.stats.window_stalls += 1;
                break;
            }
            let sdu = self.queue.pop_front().expect("non-empty");
            self.queue_bytes -= u64::from(sdu.bytes);
            let sn = self.tx_next;
            self.tx_next += 1;
            let take = sdu.bytes.min(left);
            let entry = TxEntry {
                sdu,
                sent_bytes: take,
                retx_count: 0,
                queued_retx: 0,
            };
            out.push(Self::segment(&entry, sn, 0, take));
            if take < entry.sdu.bytes {
                self.partial = Some(sn);
            }
            self.inflight.insert(sn, entry);
            left -= take;
        }

        if out.is_empty() {
            return out;
        }
        let mut polled = false;
        for pdu in out.iter_mut() {
            self.pdu_without_poll += 1;
            if self.pdu_without_poll >= self.cfg.poll_pdu_every {
                pdu.poll = true;
                self.pdu_without_poll = 0;
                polled = true;
            }
        }
        if self.nothing_left() || self.window_stalled() || self.poll_pending {
            out.last_mut().expect("non-empty").poll = true;
            polled = true;
        }
        if polled {
            self.pdu_without_poll = 0;
            self.poll_pending = false;
            self.poll_sn = Some(self.tx_next - 1);
            self.poll_timer.start(now, self.cfg.t_poll_retransmit());
            self.stats.polls_sent += 1;
        }
        self.stats.pdus_sent += out.len() as u64;
        out
    }

    /// Counts one retransmission consideration for `sn`; discards the SDU
    /// once the limit is exceeded. Returns whether the SN is still alive.
    fn consider_retx(&mut self, sn: u64) -> bool {
        let Some(entry) = self.inflight.get_mut(&sn) else {
            return false;
        };
        entry.retx_count += 1;
        if entry.retx_count > self.cfg.max_retx {
            let entry = self.inflight.remove(&sn).expect("present");
            self.discarded.push(entry.sdu.id);
            self.stats.sdus_discarded += 1;
            if self.partial == Some(sn) {
                self.partial = None;
            }
            self.update_tx_next_ack();
            return false;
        }
        true
    }

    fn queue_retx(&mut self, sn: u64, so: u32, end: u32) {
        if let Some(entry) = self.inflight.get_mut(&sn) {
            let end = end.min(entry.sent_bytes);
            if so < end {
                entry.queued_retx += 1;
                self.retx.push_back(RetxItem { sn, so, end });
            }
        }
    }

    fn update_tx_next_ack(&mut self) {
        self.tx_next_ack = self.inflight.keys().next().copied().unwrap_or(self.tx_next);
    }

    /// Processes a status report. Returns `false` if it was malformed and
    /// discarded.
    pub fn on_status(&mut self, status: &StatusPdu) -> bool {
        if !status.is_well_formed() || status.ack_sn > self.tx_next {
            self.stats.status_malformed += 1;
            return false;
        }
        self.stats.status_received += 1;

        let acked: Vec<u64> = self
            .inflight
            .range(..status.ack_sn)
            .map(|(&sn, _)| sn)
            .filter(|sn| status.nacks.binary_search_by_key(sn, |n| n.sn).is_err())
            .collect();
        for sn in acked {
            self.inflight.remove(&sn);
        }

        let mut i = 0;
        while i < status.nacks.len() {
            let sn = status.nacks[i].sn;
            let mut j = i;
            while j < status.nacks.len() && status.nacks[j].sn == sn {
                j += 1;
            }
            match self.inflight.get(&sn) {
                None => self.stats.nacks_ignored += 1,
                Some(e) if e.queued_retx > 0 => self.stats.nacks_ignored += 1,
                Some(_) => {
                    if self.consider_retx(sn) {
                        for n in &status.nacks[i..j] {
                            let (so, end) = n.range.unwrap_or((0, u32::MAX));
                            self.queue_retx(sn, so, end);
                        }
                    }
                }
            }
            i = j;
        }
        self.update_tx_next_ack();

        if let Some(poll_sn) = self.poll_sn {
            if poll_sn < status.ack_sn {
                self.poll_timer.stop();
                self.poll_sn = None;
            }
        }
        true
    }

    /// Poll-retransmit expiry: solicit a status report again, retransmitting
    /// the highest outstanding SDU if there is nothing else to carry the poll.
    pub fn on_poll_retransmit_timer(&mut self, now: SimTime) {
        if !self.poll_timer.fires_at(now) {
            return;
        }
        self.poll_timer.stop();
        self.stats.poll_expiries += 1;
        if self.inflight.is_empty() && self.nothing_left() {
            return;
        }
        self.poll_pending = true;
        if self.nothing_left() || self.window_stalled() {
            if let Some((&sn, e)) = self.inflight.iter().next_back() {
                if e.queued_retx == 0 && self.consider_retx(sn) {
                    self.queue_retx(sn, 0, u32::MAX);
                }
            }
        }
    }

    /// HARQ gave up on a TB carrying `pdus`; queue their bytes again.
    pub fn on_mac_loss(&mut self, pdus: &[RlcPdu<P>]) {
        self.stats.mac_loss_reports += 1;
        let mut counted: Vec<u64> = Vec::new();
        for p in pdus {
            let Some(e) = self.inflight.get(&p.sn) else {
                continue;
            };
            if e.queued_retx == 0 && !counted.contains(&p.sn) {
                counted.push(p.sn);
                if !self.consider_retx(p.sn) {
                    continue;
                }
            }
            self.queue_retx(p.sn, p.segment_offset, p.segment_offset + p.len);
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AmRxStats {
    pub pdus_received: u64,
    pub duplicates: u64,
    pub out_of_window: u64,
    pub sdus_delivered: u64,
    pub status_on_poll: u64,
    pub status_on_timer: u64,
}

/// AM receiver.
#[derive(Debug)]
pub struct AmRx<P> {
    cfg: RlcAmConfig,
    window: u64,
    rx_next: u64,
    rx_next_highest: u64,
    rx_highest_status: u64,
    rx_next_status_trigger: u64,
    buf: BTreeMap<u64, RxSduBuf<P>>,
    pub reassembly_timer: Timer,
    stats: AmRxStats,
}

impl<P: Clone> AmRx<P> {
    pub fn new(cfg: RlcAmConfig) -> Self {
        AmRx {
            window: cfg.window(),
            cfg,
            rx_next: 0,
            rx_next_highest: 0,
            rx_highest_status: 0,
            rx_next_status_trigger: 0,
            buf: BTreeMap::new(),
            reassembly_timer: Timer::default(),
            stats: AmRxStats::default(),
        }
    }

    pub fn stats(&self) -> &AmRxStats {
        &self.stats
    }

    pub fn rx_next(&self) -> u64 {
        self.rx_next
    }

    pub fn rx_next_highest(&self) -> u64 {
        self.rx_next_highest
    }

    fn complete(&self, sn: u64) -> bool {
        self.buf.get(&sn).is_some_and(|b| b.is_complete())
    }

    fn first_incomplete_from(&self, mut sn: u64) -> u64 {
        while self.complete(sn) {
            sn += 1;
        }
        sn
    }

    fn hole_at(&self, sn: u64) -> bool {
        self.buf.get(&sn).is_some_and(|b| b.has_hole())
    }

    pub fn on_pdu(&mut self, now: SimTime, pdu: RlcPdu<P>) -> RlcRxOutput<P> {
        self.stats.pdus_received += 1;
        let mut out = RlcRxOutput::default();
        let sn = pdu.sn;
        let poll = pdu.poll;

        if sn >= self.rx_next + self.window {
            self.stats.out_of_window += 1;
        } else if sn < self.rx_next {
            self.stats.duplicates += 1;
        } else {
            let entry = self.buf.entry(sn).or_insert_with(|| RxSduBuf::new(&pdu));
            let filled = entry.insert(pdu.segment_offset, pdu.len, pdu.is_last_segment);
            if filled == 0 {
                self.stats.duplicates += 1;
            } else {
                if sn >= self.rx_next_highest {
                    self.rx_next_highest = sn + 1;
                }
                if self.complete(sn) {
                    if sn == self.rx_highest_status {
                        self.rx_highest_status = self.first_incomplete_from(sn + 1);
                    }
                    if sn == self.rx_next {
                        self.deliver_in_order(&mut out.delivered);
                    }
                }
                self.update_reassembly_timer(now);
            }
        }

        if poll {
            self.stats.status_on_poll += 1;
            out.status = Some(self.build_status());
        }
        out
    }

    fn deliver_in_order(&mut self, delivered: &mut Vec<Sdu<P>>) {
        while self.complete(self.rx_next) {
            let b = self.buf.remove(&self.rx_next).expect("complete entry");
            delivered.push(b.into_sdu());
            self.stats.sdus_delivered += 1;
            self.rx_next += 1;
        }
        if self.rx_highest_status < self.rx_next {
            self.rx_highest_status = self.rx_next;
        }
    }

    fn update_reassembly_timer(&mut self, now: SimTime) {
        if self.reassembly_timer.is_running() {
            let trig = self.rx_next_status_trigger;
            if trig <= self.rx_next
                || (trig == self.rx_next + 1 && !self.hole_at(self.rx_next))
                || trig > self.rx_next + self.window
            {
                self.reassembly_timer.stop();
            }
        }
        if !self.reassembly_timer.is_running()
            && (self.rx_next_highest > self.rx_next + 1
                || (self.rx_next_highest == self.rx_next + 1 && self.hole_at(self.rx_next)))
        {
            self.reassembly_timer.start(now, self.cfg.t_reassembly());
            self.rx_next_status_trigger = self.rx_next_highest;
        }
    }

    /// Reassembly expiry: report every gap below the highest received SN.
    pub fn on_reassembly_timer(&mut self, now: SimTime) -> Option<StatusPdu> {
        if !self.reassembly_timer.fires_at(now) {
            return None;
        }
        self.reassembly_timer.stop();
        self.rx_highest_status = self.first_incomplete_from(self.rx_next_highest.max(self.rx_next));
        self.stats.status_on_timer += 1;
        Some(self.build_status())
    }

    pub fn build_status(&self) -> StatusPdu {
        let mut nacks = Vec::new();
        for sn in self.rx_next..self.rx_highest_status {
            match self.buf.get(&sn) {
                None => nacks.push(NackEntry { sn, range: None }),
                Some(b) if b.is_complete() => {}
                Some(b) => nacks.extend(
                    b.missing()
                        .into_iter()
                        .map(|r| NackEntry { sn, range: Some(r) }),
                ),
            }
        }
        StatusPdu {
            ack_sn: self.rx_highest_status,
            nacks,
        }
    }
}
