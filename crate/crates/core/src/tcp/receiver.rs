use std::collections::BTreeMap;

/// Cumulative-ACK receiver with an unbounded out-of-order buffer.
#[derive(Clone, Debug, Default)]
pub struct TcpReceiver {
    rcv_nxt: u64,
    /// Out-of-order byte ranges keyed by start.
    ooo: BTreeMap<u64, u64>,
    pub duplicate_segments: u64,
}

impl TcpReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bytes delivered in order to the application so far.
    pub fn rcv_nxt(&self) -> u64 {
        self.rcv_nxt
    }

    pub fn buffered_ranges(&self) -> usize {
        self.ooo.len()
    }

    /// Returns the cumulative ACK and the number of bytes this segment
    /// released to the application.
    pub fn on_segment(&mut self, seq: u64, len: u32) -> (u64, u64) {
        let end = seq + u64::from(len);
        let before = self.rcv_nxt;
        if end <= self.rcv_nxt {
            self.duplicate_segments += 1;
            return (self.rcv_nxt, 0);
        }
        if seq <= self.rcv_nxt {
            self.rcv_nxt = end;
            while let Some((&s, &e)) = self.ooo.first_key_value() {
                if s > self.rcv_nxt {
                    break;
                }
                self.ooo.pop_first();
                self.rcv_nxt = self.rcv_nxt.max(e);
            }
        } else {
            let slot = self.ooo.entry(seq).or_insert(end);
            *slot = (*slot).max(end);
        }
        (self.rcv_nxt, self.rcv_nxt - before)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn in_order_advances_by_len() {
        let mut r = TcpReceiver::new();
        assert_eq!(r.on_segment(0, 1500), (1500, 1500));
        assert_eq!(r.on_segment(1500, 1500), (3000, 1500));
    }

    #[test]
    fn gap_gives_duplicate_ack() {
        let mut r = TcpReceiver::new();
        r.on_segment(0, 1500);
        assert_eq!(r.on_segment(3000, 1500), (1500, 0));
        assert_eq!(r.on_segment(4500, 1500), (1500, 0));
    }

    #[test]
    fn filled_gap_jumps_over_buffered_data() {
        let mut r = TcpReceiver::new();
        r.on_segment(0, 1500);
        r.on_segment(3000, 1500);
        r.on_segment(4500, 1500);
        assert_eq!(r.on_segment(1500, 1500), (6000, 4500));
        assert_eq!(r.buffered_ranges(), 0);
    }

    #[test]
    fn old_duplicate_counted() {
        let mut r = TcpReceiver::new();
        r.on_segment(0, 1500);
        assert_eq!(r.on_segment(0, 1500), (1500, 0));
        assert_eq!(r.duplicate_segments, 1);
    }

    #[test]
    fn overlapping_resegmentation() {
        let mut r = TcpReceiver::new();
        r.on_segment(0, 1000);
        r.on_segment(2000, 1000);
        assert_eq!(r.on_segment(500, 1500), (3000, 2000));
    }
}
