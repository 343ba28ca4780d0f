//! Radio link control: acknowledged mode (sliding-window ARQ with status
//! reports, polling and reassembly timers) and unacknowledged mode
//! (in-order delivery, no recovery).

mod am;
mod um;

pub use am::{AmRx, AmRxStats, AmTx, AmTxStats};
pub use um::{UmRx, UmRxStats, UmTx};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{SimTime, Timer};

/// Marks a NACK segment range that extends to the end of the SDU.
pub const SO_END: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sdu<P> {
    pub id: u64,
    pub bytes: u32,
    pub payload: P,
}

/// One RLC data PDU: a byte range `[segment_offset, segment_offset + len)`
/// of the SDU numbered `sn`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RlcPdu<P> {
    pub sn: u64,
    pub sdu_id: u64,
    pub segment_offset: u32,
    pub len: u32,
    pub is_last_segment: bool,
    pub poll: bool,
    pub payload: P,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NackEntry {
    pub sn: u64,
    /// Missing byte range; `None` means the whole SDU. An end of
    /// [`SO_END`] means "through the last byte".
    pub range: Option<(u32, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatusPdu {
    /// Everything below `ack_sn` not listed in `nacks` is acknowledged.
    pub ack_sn: u64,
    pub nacks: Vec<NackEntry>,
}

impl StatusPdu {
    /// NACKs sorted by `(sn, range start)`, no duplicates, all below `ack_sn`.
    pub fn is_well_formed(&self) -> bool {
        let key = |n: &NackEntry| (n.sn, n.range.map_or(0, |r| r.0));
        self.nacks.iter().all(|n| n.sn < self.ack_sn)
            && self.nacks.windows(2).all(|w| key(&w[0]) < key(&w[1]))
            && self
                .nacks
                .iter()
                .all(|n| n.range.is_none_or(|(s, e)| s < e))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RlcMode {
    #[default]
    Am,
    Um,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlcAmConfig {
    pub max_retx: u32,
    pub t_poll_retransmit_ms: f64,
    pub t_reassembly_ms: f64,
    pub sn_bits: u32,
    pub poll_pdu_every: u32,
}

impl Default for RlcAmConfig {
    fn default() -> Self {
        RlcAmConfig {
            max_retx: 13,
            t_poll_retransmit_ms: 25.0,
            t_reassembly_ms: 50.0,
            sn_bits: 18,
            poll_pdu_every: 16,
        }
    }
}

impl RlcAmConfig {
    pub fn window(&self) -> u64 {
        1u64 << (self.sn_bits - 1)
    }

    pub fn t_poll_retransmit(&self) -> SimTime {
        SimTime::from_millis_f64(self.t_poll_retransmit_ms)
    }

    pub fn t_reassembly(&self) -> SimTime {
        SimTime::from_millis_f64(self.t_reassembly_ms)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_poll_retransmit_ms > 0.0 && self.t_reassembly_ms > 0.0) {
            return Err(Error::Config("rlc timers must be > 0".into()));
        }
        if !(2..=32).contains(&self.sn_bits) {
            return Err(Error::Config("rlc.am.sn_bits must be in 2..=32".into()));
        }
        if self.poll_pdu_every == 0 {
            return Err(Error::Config("rlc.am.poll_pdu_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlcUmConfig {
    pub t_reassembly_ms: f64,
}

impl Default for RlcUmConfig {
    fn default() -> Self {
        RlcUmConfig {
            t_reassembly_ms: 50.0,
        }
    }
}

impl RlcUmConfig {
    pub fn t_reassembly(&self) -> SimTime {
        SimTime::from_millis_f64(self.t_reassembly_ms)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlcConfig {
    pub mode: RlcMode,
    pub am: RlcAmConfig,
    pub um: RlcUmConfig,
}

impl RlcConfig {
    pub fn validate(&self) -> Result<()> {
        self.am.validate()?;
        if self.um.t_reassembly_ms <= 0.0 {
            return Err(Error::Config("rlc.um.t_reassembly_ms must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RlcRxOutput<P> {
    pub delivered: Vec<Sdu<P>>,
    pub status: Option<StatusPdu>,
}

impl<P> Default for RlcRxOutput<P> {
    fn default() -> Self {
        RlcRxOutput {
            delivered: Vec::new(),
            status: None,
        }
    }
}

/// Receive-side reassembly buffer for one SN.
#[derive(Clone, Debug)]
pub(crate) struct RxSduBuf<P> {
    /// Received byte ranges, sorted and merged.
    ranges: Vec<(u32, u32)>,
    total: Option<u32>,
    sdu_id: u64,
    payload: P,
}

impl<P: Clone> RxSduBuf<P> {
    pub(crate) fn new(pdu: &RlcPdu<P>) -> Self {
        RxSduBuf {
            ranges: Vec::new(),
            total: None,
            sdu_id: pdu.sdu_id,
            payload: pdu.payload.clone(),
        }
    }

    /// Adds a segment; returns the number of previously missing bytes it filled.
    pub(crate) fn insert(&mut self, so: u32, len: u32, is_last: bool) -> u32 {
        let end = so + len;
        if is_last {
            self.total = Some(end);
        }
        let before: u32 = self.ranges.iter().map(|(s, e)| e - s).sum();
        self.ranges.push((so, end));
        self.ranges.sort_unstable();
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(self.ranges.len());
        for &(s, e) in &self.ranges {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        self.ranges = merged;
        let after: u32 = self.ranges.iter().map(|(s, e)| e - s).sum();
        after - before
    }

    pub(crate) fn is_complete(&self) -> bool {
        matches!(self.total, Some(t) if self.ranges.len() == 1 && self.ranges[0] == (0, t))
    }

    /// A gap exists before the last received byte.
    pub(crate) fn has_hole(&self) -> bool {
        self.ranges.len() > 1 || self.ranges.first().is_some_and(|r| r.0 > 0)
    }

    pub(crate) fn missing(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        let mut cursor = 0;
        for &(s, e) in &self.ranges {
            if s > cursor {
                out.push((cursor, s));
            }
            cursor = e;
        }
        match self.total {
            Some(t) if cursor < t => out.push((cursor, t)),
            None => out.push((cursor, SO_END)),
            _ => {}
        }
        out
    }

    pub(crate) fn into_sdu(self) -> Sdu<P> {
        Sdu {
            id: self.sdu_id,
            bytes: self.total.unwrap_or(0),
            payload: self.payload,
        }
    }
}

/// Transmit side of either mode. One exists per user, so the size gap
/// between variants does not matter.
#[derive(Debug)]
#[allow(clippy::large_enum_variant)]
pub enum RlcTx<P> {
    Am(AmTx<P>),
    Um(UmTx<P>),
}

impl<P: Clone> RlcTx<P> {
    pub fn new(cfg: &RlcConfig) -> Self {
        match cfg.mode {
            RlcMode::Am => RlcTx::Am(AmTx::new(cfg.am)),
            RlcMode::Um => RlcTx::Um(UmTx::new()),
        }
    }

    pub fn enqueue(&mut self, sdu: Sdu<P>) {
        match self {
            RlcTx::Am(t) => t.enqueue(sdu),
            RlcTx::Um(t) => t.enqueue(sdu),
        }
    }

    pub fn build(&mut self, now: SimTime, budget: u32) -> Vec<RlcPdu<P>> {
        match self {
            RlcTx::Am(t) => t.build(now, budget),
            RlcTx::Um(t) => t.build(budget),
        }
    }

    /// HARQ gave up on a TB carrying these PDUs.
    pub fn on_mac_loss(&mut self, pdus: &[RlcPdu<P>]) {
        if let RlcTx::Am(t) = self {
            t.on_mac_loss(pdus)
        }
    }

    /// Status report from the peer; UM has no status and ignores it.
    pub fn on_status(&mut self, status: &StatusPdu) -> bool {
        match self {
            RlcTx::Am(t) => t.on_status(status),
            RlcTx::Um(_) => false,
        }
    }

    pub fn on_poll_retransmit_timer(&mut self, now: SimTime) {
        if let RlcTx::Am(t) = self {
            t.on_poll_retransmit_timer(now)
        }
    }

    /// SDUs dropped by the transmitter after too many retransmissions.
    pub fn sdus_discarded(&self) -> u64 {
        match self {
            RlcTx::Am(t) => t.stats().sdus_discarded,
            RlcTx::Um(_) => 0,
        }
    }

    pub fn poll_timer(&self) -> Option<&Timer> {
        match self {
            RlcTx::Am(t) => Some(&t.poll_timer),
            RlcTx::Um(_) => None,
        }
    }

    pub fn buffered_bytes(&self) -> u64 {
        match self {
            RlcTx::Am(t) => t.buffered_bytes(),
            RlcTx::Um(t) => t.buffered_bytes(),
        }
    }

    pub fn sdus_submitted(&self) -> u64 {
        match self {
            RlcTx::Am(t) => t.stats().sdus_in,
            RlcTx::Um(t) => t.sdus_in(),
        }
    }
}

/// Receive side of either mode.
#[derive(Debug)]
pub enum RlcRx<P> {
    Am(AmRx<P>),
    Um(UmRx<P>),
}

impl<P: Clone> RlcRx<P> {
    pub fn new(cfg: &RlcConfig) -> Self {
        match cfg.mode {
            RlcMode::Am => RlcRx::Am(AmRx::new(cfg.am)),
            RlcMode::Um => RlcRx::Um(UmRx::new(cfg.um)),
        }
    }

    pub fn on_pdu(&mut self, now: SimTime, pdu: RlcPdu<P>) -> RlcRxOutput<P> {
        match self {
            RlcRx::Am(r) => r.on_pdu(now, pdu),
            RlcRx::Um(r) => RlcRxOutput {
                delivered: r.on_pdu(now, pdu),
                status: None,
            },
        }
    }

    pub fn on_reassembly_timer(&mut self, now: SimTime) -> RlcRxOutput<P> {
        match self {
            RlcRx::Am(r) => RlcRxOutput {
                delivered: Vec::new(),
                status: r.on_reassembly_timer(now),
            },
            RlcRx::Um(r) => RlcRxOutput {
                delivered: r.on_reassembly_timer(now),
                status: None,
            },
        }
    }

    pub fn reassembly_timer(&self) -> &Timer {
        match self {
            RlcRx::Am(r) => &r.reassembly_timer,
            RlcRx::Um(r) => &r.reassembly_timer,
        }
    }

    /// SDUs given up on by the receiver (UM gap discards).
    pub fn sdus_lost(&self) -> u64 {
        match self {
            RlcRx::Am(_) => 0,
            RlcRx::Um(r) => r.stats().sdus_lost,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pdu(sn: u64, so: u32, len: u32, last: bool) -> RlcPdu<()> {
        RlcPdu {
            sn,
            sdu_id: sn,
            segment_offset: so,
            len,
            is_last_segment: last,
            poll: false,
            payload: (),
        }
    }

    #[test]
    fn reassembly_buffer_tracks_holes() {
        let p = pdu(0, 0, 500, false);
        let mut b = RxSduBuf::new(&p);
        assert_eq!(b.insert(0, 500, false), 500);
        assert!(!b.is_complete());
        assert!(!b.has_hole());
        assert_eq!(b.missing(), vec![(500, SO_END)]);
        assert_eq!(b.insert(1000, 500, true), 500);
        assert!(b.has_hole());
        assert_eq!(b.missing(), vec![(500, 1000)]);
        assert_eq!(b.insert(400, 200, false), 100);
        assert_eq!(b.insert(0, 100, false), 0);
        assert_eq!(b.insert(600, 400, false), 400);
        assert!(b.is_complete());
        assert!(b.missing().is_empty());
        assert_eq!(b.into_sdu().bytes, 1500);
    }

    #[test]
    fn status_well_formedness() {
        let ok = StatusPdu {
            ack_sn: 5,
            nacks: vec![
                NackEntry { sn: 1, range: None },
                NackEntry {
                    sn: 3,
                    range: Some((0, 10)),
                },
                NackEntry {
                    sn: 3,
                    range: Some((20, SO_END)),
                },
            ],
        };
        assert!(ok.is_well_formed());
        let dup = StatusPdu {
            ack_sn: 5,
            nacks: vec![
                NackEntry { sn: 1, range: None },
                NackEntry { sn: 1, range: None },
            ],
        };
        assert!(!dup.is_well_formed());
        let above = StatusPdu {
            ack_sn: 2,
            nacks: vec![NackEntry { sn: 2, range: None }],
        };
        assert!(!above.is_well_formed());
    }

    #[test]
    fn window_size_from_sn_bits() {
        assert_eq!(RlcAmConfig::default().window(), 1 << 17);
    }
}
