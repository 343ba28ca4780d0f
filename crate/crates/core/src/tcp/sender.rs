use super::cubic::CubicEpoch;
use super::{TcpConfig, TcpVariant};
use crate::sim::{SimTime, Timer};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TcpSegment {
    pub seq: u64,
    pub len: u32,
    pub is_retransmission: bool,
    pub sent_at: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    SlowStart,
    CongAvoid,
    FastRecovery,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TcpSenderStats {
    pub segments_sent: u64,
    pub retransmissions: u64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
    pub idle_restarts: u64,
}

/// Byte-stream sender. `cwnd` and `ssthresh` are in MSS.
#[derive(Clone, Debug)]
pub struct TcpSender {
    cfg: TcpConfig,
    cwnd: f64,
    ssthresh: f64,
    phase: Phase,
    snd_una: u64,
    snd_nxt: u64,
    snd_max: u64,
    app_limit: u64,
    dupacks: u32,
    /// After a timeout, duplicate ACKs at or below this point do not start
    /// another fast retransmit.
    recover: Option<u64>,
    retx_head_pending: bool,
    srtt: Option<f64>,
    rttvar: f64,
    rto: SimTime,
    timed: Option<(u64, SimTime)>,
    pub rto_timer: Timer,
    epoch: Option<CubicEpoch>,
    loss_epochs: Vec<CubicEpoch>,
    stats: TcpSenderStats,
}

impl TcpSender {
    pub fn new(cfg: TcpConfig) -> Self {
        TcpSender {
            cwnd: cfg.init_cwnd_mss,
            ssthresh: cfg.ssthresh_init_mss,
            phase: Phase::SlowStart,
            snd_una: 0,
            snd_nxt: 0,
            snd_max: 0,
            app_limit: 0,
            dupacks: 0,
            recover: None,
            retx_head_pending: false,
            srtt: None,
            rttvar: 0.0,
            rto: SimTime::from_millis_f64(cfg.rto_initial_ms),
            timed: None,
            rto_timer: Timer::default(),
            epoch: None,
            loss_epochs: Vec::new(),
            stats: TcpSenderStats::default(),
            cfg,
        }
    }

    pub fn config(&self) -> &TcpConfig {
        &self.cfg
    }

    pub fn cwnd(&self) -> f64 {
        self.cwnd
    }

    pub fn ssthresh(&self) -> f64 {
        self.ssthresh
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }

    pub fn snd_nxt(&self) -> u64 {
        self.snd_nxt
    }

    pub fn snd_max(&self) -> u64 {
        self.snd_max
    }

    pub fn rto(&self) -> SimTime {
        self.rto
    }

    pub fn srtt(&self) -> Option<f64> {
        self.srtt
    }

    pub fn stats(&self) -> &TcpSenderStats {
        &self.stats
    }

    pub fn epoch(&self) -> Option<&CubicEpoch> {
        self.epoch.as_ref()
    }

    /// Every CUBIC epoch opened by a loss, in order.
    pub fn loss_epochs(&self) -> &[CubicEpoch] {
        &self.loss_epochs
    }

    pub fn in_flight(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    /// All written data has been acknowledged.
    pub fn is_idle(&self) -> bool {
        self.snd_una == self.app_limit
    }

    fn mss(&self) -> f64 {
        f64::from(self.cfg.mss_bytes)
    }

    fn window_bytes(&self) -> u64 {
        (self.cwnd * self.mss()).floor() as u64
    }

    /// Appends application data to the stream.
    pub fn write(&mut self, bytes: u64) {
        self.app_limit += bytes;
    }

    /// Congestion state back to its initial values, as at connection start.
    /// Call before `write` when new data arrives on an idle connection.
    pub fn restart_if_idle(&mut self) -> bool {
        if !self.is_idle() {
            return false;
        }
        self.cwnd = self.cfg.init_cwnd_mss;
        self.ssthresh = self.cfg.ssthresh_init_mss;
        self.phase = Phase::SlowStart;
        self.dupacks = 0;
        self.recover = None;
        self.epoch = None;
        self.stats.idle_restarts += 1;
        true
    }

    /// Segments the window currently allows, fast retransmission first.
    pub fn poll_send(&mut self, now: SimTime) -> Vec<TcpSegment> {
        let mss = u64::from(self.cfg.mss_bytes);
        let mut out = Vec::new();
        if self.retx_head_pending {
            self.retx_head_pending = false;
            let len = mss.min(self.snd_max - self.snd_una) as u32;
            if len > 0 {
                out.push(TcpSegment {
                    seq: self.snd_una,
                    len,
                    is_retransmission: true,
                    sent_at: now,
                });
                if self
                    .timed
                    .is_some_and(|(end, _)| end <= self.snd_una + u64::from(len))
                {
                    self.timed = None;
                }
            }
        }
        let wnd = self.window_bytes();
        while self.snd_nxt < self.app_limit {
            let len = mss.min(self.app_limit - self.snd_nxt);
            if self.snd_nxt + len - self.snd_una > wnd {
                break;
            }
            let is_retx = self.snd_nxt < self.snd_max;
            if !is_retx && self.timed.is_none() {
                self.timed = Some((self.snd_nxt + len, now));
            }
            out.push(TcpSegment {
                seq: self.snd_nxt,
                len: len as u32,
                is_retransmission: is_retx,
                sent_at: now,
            });
            self.snd_nxt += len;
            self.snd_max = self.snd_max.max(self.snd_nxt);
        }
        self.stats.segments_sent += out.len() as u64;
        self.stats.retransmissions += out.iter().filter(|s| s.is_retransmission).count() as u64;
        if !out.is_empty() && !self.rto_timer.is_running() {
            self.rto_timer.start(now, self.rto);
        }
        out
    }

    fn rtt_sample(&mut self, r: f64) {
        match self.srtt {
            None => {
                self.srtt = Some(r);
                self.rttvar = r / 2.0;
            }
            Some(s) => {
                self.rttvar = 0.75 * self.rttvar + 0.25 * (s - r).abs();
                self.srtt = Some(0.875 * s + 0.125 * r);
            }
        }
        let rto_ms = (self.srtt.unwrap_or(r) + 4.0 * self.rttvar) * 1e3;
        self.rto = SimTime::from_millis_f64(rto_ms.clamp(self.cfg.rto_min_ms, self.cfg.rto_max_ms));
    }

    /// Window reduction shared by both loss signals. Returns the new ssthresh.
    fn on_loss(&mut self, now: SimTime) -> f64 {
        match self.cfg.variant {
            TcpVariant::Reno => {
                let flight = self.in_flight() as f64 / self.mss();
                self.ssthresh = (flight / 2.0).max(2.0);
            }
            TcpVariant::Cubic => {
                let e =
                    CubicEpoch::after_loss(now, self.cwnd, self.cfg.cubic_beta, self.cfg.cubic_c);
                self.ssthresh = e.reduced_to.max(2.0);
                self.epoch = Some(e);
                self.loss_epochs.push(e);
            }
        }
        self.ssthresh
    }

    fn cubic_increase(&mut self, now: SimTime) {
        let c = self.cfg.cubic_c;
        let epoch = *self
            .epoch
            .get_or_insert_with(|| CubicEpoch::plateau(now, self.cwnd));
        let t = (now - epoch.start).as_secs_f64() + self.srtt.unwrap_or(0.0);
        let target = epoch.window_at(t, c);
        if target > self.cwnd {
            self.cwnd += (target - self.cwnd) / self.cwnd;
        } else {
            self.cwnd += 0.01 / self.cwnd;
        }
    }

    pub fn on_ack(&mut self, now: SimTime, ack: u64) {
        if ack > self.snd_max {
            return;
        }
        if ack > self.snd_una {
            if let Some((end, at)) = self.timed {
                if ack >= end {
                    self.rtt_sample((now - at).as_secs_f64());
                    self.timed = None;
                }
            }
            self.snd_una = ack;
            self.snd_nxt = self.snd_nxt.max(ack);
            self.dupacks = 0;
            if self.recover.is_some_and(|r| ack > r) {
                self.recover = None;
            }
            match self.phase {
                Phase::FastRecovery => {
                    self.cwnd = self.ssthresh;
                    self.phase = Phase::CongAvoid;
                }
                Phase::SlowStart => {
                    self.cwnd += 1.0;
                    if self.cwnd >= self.ssthresh {
                        self.phase = Phase::CongAvoid;
                    }
                }
                Phase::CongAvoid => match self.cfg.variant {
                    TcpVariant::Reno => self.cwnd += 1.0 / self.cwnd,
                    TcpVariant::Cubic => self.cubic_increase(now),
                },
            }
            if self.snd_una < self.snd_max {
                self.rto_timer.start(now, self.rto);
            } else {
                self.rto_timer.stop();
            }
        } else if ack == self.snd_una && self.snd_una < self.snd_max {
            self.dupacks += 1;
            if self.phase == Phase::FastRecovery {
                self.cwnd += 1.0;
            } else if self.dupacks == self.cfg.dupack_threshold
                && self.recover.is_none_or(|r| ack > r)
            {
                let ssthresh = self.on_loss(now);
                self.cwnd = ssthresh + f64::from(self.cfg.dupack_threshold);
                self.phase = Phase::FastRecovery;
                self.retx_head_pending = true;
                self.stats.fast_retransmits += 1;
            }
        }
    }

    /// Retransmission timeout: collapse to one segment and go back to the
    /// oldest unacknowledged byte.
    pub fn on_rto(&mut self, now: SimTime) {
        if !self.rto_timer.fires_at(now) {
            return;
        }
        if self.snd_una >= self.snd_max {
            self.rto_timer.stop();
            return;
        }
        self.stats.timeouts += 1;
        self.on_loss(now);
        self.cwnd = 1.0;
        self.phase = Phase::SlowStart;
        self.dupacks = 0;
        self.recover = Some(self.snd_max);
        self.snd_nxt = self.snd_una;
        self.timed = None;
        self.retx_head_pending = false;
        let doubled = SimTime(self.rto.as_micros() * 2);
        self.rto = doubled.min(SimTime::from_millis_f64(self.cfg.rto_max_ms));
        self.rto_timer.start(now, self.rto);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MSS: u64 = 1500;

    fn reno() -> TcpConfig {
        TcpConfig {
            variant: TcpVariant::Reno,
            ..Default::default()
        }
    }

    fn ms(v: u64) -> SimTime {
        SimTime::from_millis(v)
    }

    #[test]
    fn initial_window_is_three_segments() {
        let mut s = TcpSender::new(reno());
        s.write(100 * MSS);
        let segs = s.poll_send(SimTime::ZERO);
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[2].seq, 2 * MSS);
        assert!(s.rto_timer.is_running());
    }

    #[test]
    fn slow_start_adds_one_mss_per_ack() {
        let mut s = TcpSender::new(reno());
        s.write(100 * MSS);
        s.poll_send(SimTime::ZERO);
        s.on_ack(ms(20), MSS);
        assert_eq!(s.cwnd(), 4.0);
        assert_eq!(s.phase(), Phase::SlowStart);
    }

    #[test]
    fn congestion_avoidance_adds_about_one_mss_per_window() {
        let cfg = TcpConfig {
            init_cwnd_mss: 10.0,
            ssthresh_init_mss: 10.0,
            ..reno()
        };
        let mut s = TcpSender::new(cfg);
        s.write(1000 * MSS);
        s.poll_send(SimTime::ZERO);
        s.phase = Phase::CongAvoid;
        let mut expect = 10.0;
        for i in 1..=10 {
            s.on_ack(ms(20), i * MSS);
            expect += 1.0 / expect;
        }
        assert!((s.cwnd() - expect).abs() < 1e-12);
        assert!((s.cwnd() - 11.0).abs() < 0.05);
    }

    fn sender_at_cwnd(cfg: TcpConfig, cwnd: f64) -> TcpSender {
        let mut s = TcpSender::new(TcpConfig {
            init_cwnd_mss: cwnd,
            ssthresh_init_mss: cwnd,
            ..cfg
        });
        s.write(1000 * MSS);
        s.poll_send(SimTime::ZERO);
        s
    }

    #[test]
    fn triple_dupack_halves_and_retransmits_head() {
        let mut s = sender_at_cwnd(reno(), 20.0);
        assert_eq!(s.in_flight(), 20 * MSS);
        for _ in 0..3 {
            s.on_ack(ms(21), 0);
        }
        assert_eq!(s.phase(), Phase::FastRecovery);
        // Flight was 20 MSS when the third duplicate arrived.
        assert_eq!(s.ssthresh(), 10.0);
        let segs = s.poll_send(ms(21));
        assert_eq!(segs[0].seq, 0);
        assert!(segs[0].is_retransmission);
        assert_eq!(s.stats().fast_retransmits, 1);
    }

    #[test]
    fn new_ack_ends_fast_recovery_with_deflated_window() {
        let mut s = sender_at_cwnd(reno(), 20.0);
        for _ in 0..4 {
            s.on_ack(ms(21), 0);
        }
        assert_eq!(s.phase(), Phase::FastRecovery);
        assert_eq!(s.cwnd(), 10.0 + 3.0 + 1.0);
        s.on_ack(ms(40), 5 * MSS);
        assert_eq!(s.phase(), Phase::CongAvoid);
        assert_eq!(s.cwnd(), 10.0);
    }

    #[test]
    fn timeout_collapses_window() {
        let mut s = sender_at_cwnd(reno(), 40.0);
        let d = s.rto_timer.deadline().unwrap();
        s.on_rto(d);
        assert_eq!(s.cwnd(), 1.0);
        assert_eq!(s.ssthresh(), 20.0);
        assert_eq!(s.phase(), Phase::SlowStart);
        let segs = s.poll_send(d);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].seq, 0);
        assert!(segs[0].is_retransmission);
    }

    #[test]
    fn consecutive_timeouts_back_off() {
        let mut s = sender_at_cwnd(reno(), 4.0);
        let base = s.rto();
        let d1 = s.rto_timer.deadline().unwrap();
        s.on_rto(d1);
        assert_eq!(s.rto(), SimTime(base.as_micros() * 2));
        let d2 = s.rto_timer.deadline().unwrap();
        assert_eq!(d2, d1 + s.rto());
        s.on_rto(d2);
        assert_eq!(s.rto(), SimTime(base.as_micros() * 4));
    }

    #[test]
    fn slow_start_resumes_after_timeout() {
        let mut s = sender_at_cwnd(reno(), 40.0);
        let d = s.rto_timer.deadline().unwrap();
        s.on_rto(d);
        s.poll_send(d);
        s.on_ack(d + ms(20), MSS);
        assert_eq!(s.cwnd(), 2.0);
        assert_eq!(s.phase(), Phase::SlowStart);
        let segs = s.poll_send(d + ms(20));
        assert_eq!(
            segs.iter().map(|x| x.seq).collect::<Vec<_>>(),
            vec![MSS, 2 * MSS]
        );
        assert!(segs.iter().all(|x| x.is_retransmission));
    }

    #[test]
    fn rtt_estimation_and_karn() {
        let mut s = TcpSender::new(reno());
        s.write(10 * MSS);
        s.poll_send(SimTime::ZERO);
        s.on_ack(ms(100), MSS);
        assert_eq!(s.srtt(), Some(0.1));
        // 100 ms + 4 * 50 ms
        assert_eq!(s.rto(), ms(300));
    }

    #[test]
    fn rto_respects_minimum() {
        let mut s = TcpSender::new(reno());
        s.write(10 * MSS);
        s.poll_send(SimTime::ZERO);
        s.on_ack(ms(10), MSS);
        assert_eq!(s.rto(), ms(200));
    }

    #[test]
    fn window_is_respected() {
        let mut s = sender_at_cwnd(reno(), 7.5);
        assert!(s.in_flight() as f64 <= 7.5 * MSS as f64);
        assert_eq!(s.in_flight(), 7 * MSS);
        assert!(s.poll_send(ms(1)).is_empty());
    }

    #[test]
    fn idle_restart_resets_congestion_state() {
        let mut s = sender_at_cwnd(reno(), 40.0);
        assert!(!s.restart_if_idle());
        let mut s2 = TcpSender::new(reno());
        s2.write(MSS);
        s2.poll_send(SimTime::ZERO);
        s2.on_ack(ms(20), MSS);
        assert!(s2.restart_if_idle());
        assert_eq!(s2.cwnd(), 3.0);
        assert_eq!(s2.ssthresh(), 500.0);
        assert!(!s2.rto_timer.is_running());
    }

    #[test]
    fn cubic_loss_opens_epoch() {
        let mut s = sender_at_cwnd(TcpConfig::default(), 100.0);
        for _ in 0..3 {
            s.on_ack(ms(30), 0);
        }
        let e = s.loss_epochs()[0];
        assert_eq!(e.w_max, 100.0);
        assert!((e.k - 50f64.cbrt()).abs() < 1e-12);
        assert!((s.ssthresh() - 80.0).abs() < 1e-12);
        assert_eq!(e.window_at(e.k, 0.4), e.w_max);
        assert!((e.window_at(0.0, 0.4) - 80.0).abs() < 1e-9);
        s.on_ack(ms(40), 10 * MSS);
        assert!((s.cwnd() - 80.0).abs() < 1e-9);
    }

    #[test]
    fn cubic_grows_toward_w_max() {
        let mut s = sender_at_cwnd(TcpConfig::default(), 100.0);
        for _ in 0..3 {
            s.on_ack(ms(0), 0);
        }
        let mut acked = MSS;
        s.on_ack(ms(1), acked);
        let start = s.cwnd();
        let mut t = 1;
        while t < 3_684 {
            t += 10;
            acked += MSS;
            s.poll_send(ms(t));
            s.on_ack(ms(t), acked.min(s.snd_max()));
        }
        assert!(s.cwnd() > start);
        assert!(s.cwnd() <= 100.5, "{}", s.cwnd());
    }
}
