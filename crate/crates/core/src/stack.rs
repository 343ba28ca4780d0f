//! One user's full downlink stack driven by the event queue: FTP source and
//! TCP sender at the server, a wired pipe, RLC and HARQ at the gNB, and the
//! RLC and TCP receivers at the UE.

use crate::analytics::residual_error_exact;
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::harq::{measured_residual_rate, HarqDecision, HarqEntity, HarqOutcomeLog, TbOutcome};
use crate::metrics::{user_throughput, CwndSummary, RunMetrics};
use crate::rlc::{RlcPdu, RlcRx, RlcRxOutput, RlcTx, Sdu, StatusPdu};
use crate::sim::{EventQueue, RngStream, SimTime, TimerSlot};
use crate::tcp::{pipe_transfer, CubicEpoch, TcpReceiver, TcpSegment, TcpSender};
use crate::traffic::{arrival_times, on_file_complete, FileTransfer};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatusCause {
    Poll,
    ReassemblyExpiry,
}

/// Optional per-run event trace.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceEvent {
    /// The UE generated an RLC status report.
    Status {
        at: SimTime,
        cause: StatusCause,
        lost: bool,
    },
    /// A TB was acknowledged without having been decoded.
    ResidualLoss {
        at: SimTime,
    },
    GiveUp {
        at: SimTime,
    },
    /// Congestion state after the server processed a batch of ACKs or a timeout.
    Cwnd {
        at: SimTime,
        cwnd: f64,
        ssthresh: f64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub trace: bool,
}

#[derive(Clone, Debug, Default)]
pub struct UserOutput {
    pub user: u32,
    pub throughput_bps: f64,
    pub delivered_bytes: u64,
    pub files: Vec<FileTransfer>,
    pub loss_epochs: Vec<CubicEpoch>,
    pub harq: HarqOutcomeLog,
    pub sdus_submitted: u64,
    pub sdus_lost: u64,
    pub status_sent: u64,
    pub status_lost: u64,
    /// TCP segments tail-dropped at a full gNB buffer.
    pub gnb_drops: u64,
    pub max_cwnd: f64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
    pub trace: Vec<TraceEvent>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub users: Vec<UserOutput>,
}

#[derive(Debug)]
enum Ev {
    Slot,
    FileArrival(usize),
    SegmentsAtGnb(Vec<TcpSegment>),
    AcksAtServer(Vec<u64>),
    StatusAtGnb(StatusPdu),
    TcpRto,
    PollTimer,
    ReassemblyTimer,
}

struct UserStack {
    cfg: SimConfig,
    warmup: SimTime,
    slot: SimTime,
    uplink_delay: SimTime,
    status_loss_p: f64,
    trace_on: bool,

    phy: RngStream,
    feedback: RngStream,
    uplink: RngStream,

    tcp_tx: TcpSender,
    tcp_rx: TcpReceiver,
    rlc_tx: RlcTx<TcpSegment>,
    rlc_rx: RlcRx<TcpSegment>,
    harq: HarqEntity<RlcPdu<TcpSegment>>,

    rto_slot: TimerSlot,
    poll_slot: TimerSlot,
    reasm_slot: TimerSlot,

    files: Vec<FileTransfer>,
    next_unstarted: usize,
    next_incomplete: usize,
    next_sdu_id: u64,
    written: u64,
    delivered_in_window: u64,
    status_sent: u64,
    status_lost: u64,
    gnb_drops: u64,
    max_cwnd: f64,
    trace: Vec<TraceEvent>,
    fault: Option<Error>,
}

impl UserStack {
    fn new(cfg: &SimConfig, seed: u64, user: u32, opts: RunOptions) -> Result<Self> {
        let status_loss_p = if cfg.ran.status_loss {
            residual_error_exact(&cfg.errors)?.p_re_exact.min(1.0)
        } else {
            0.0
        };
        let mut traffic = RngStream::new(seed, format!("traffic/{user}"));
        let files = arrival_times(&mut traffic, &cfg.traffic, cfg.end())
            .into_iter()
            .enumerate()
            .map(|(i, arrival)| FileTransfer {
                id: i as u64,
                user,
                bytes: cfg.traffic.file_bytes,
                arrival,
                stream_offset: 0,
                first_byte_sent: None,
                last_byte_delivered: None,
            })
            .collect();
        Ok(UserStack {
            cfg: *cfg,
            warmup: cfg.warmup(),
            slot: SimTime(cfg.link.slot_us),
            uplink_delay: SimTime::from_millis_f64(cfg.ran.uplink_delay_ms),
            status_loss_p,
            trace_on: opts.trace,
            phy: RngStream::new(seed, format!("phy/{user}")),
            feedback: RngStream::new(seed, format!("feedback/{user}")),
            uplink: RngStream::new(seed, format!("uplink/{user}")),
            tcp_tx: TcpSender::new(cfg.tcp),
            tcp_rx: TcpReceiver::new(),
            rlc_tx: RlcTx::new(&cfg.rlc),
            rlc_rx: RlcRx::new(&cfg.rlc),
            harq: HarqEntity::new(cfg.harq, &cfg.link),
            rto_slot: TimerSlot::default(),
            poll_slot: TimerSlot::default(),
            reasm_slot: TimerSlot::default(),
            files,
            next_unstarted: 0,
            next_incomplete: 0,
            next_sdu_id: 0,
            written: 0,
            delivered_in_window: 0,
            status_sent: 0,
            status_lost: 0,
            gnb_drops: 0,
            max_cwnd: 0.0,
            trace: Vec::new(),
            fault: None,
        })
    }

    fn schedule(&mut self, q: &mut EventQueue<Ev>, at: SimTime, ev: Ev) {
        if let Err(e) = q.schedule(at, ev) {
            self.fault.get_or_insert(e);
        }
    }

    fn handle(&mut self, q: &mut EventQueue<Ev>, ev: Ev) {
        let now = q.now();
        match ev {
            Ev::Slot => {
                self.on_slot(q, now);
                q.schedule_in(self.slot, Ev::Slot);
            }
            Ev::FileArrival(i) => self.on_file_arrival(q, now, i),
            Ev::SegmentsAtGnb(segs) => {
                let limit = self.cfg.ran.gnb_buffer_bytes;
                for seg in segs {
                    if limit > 0 && self.rlc_tx.buffered_bytes() + u64::from(seg.len) > limit {
                        self.gnb_drops += 1;
                        continue;
                    }
                    let id = self.next_sdu_id;
                    self.next_sdu_id += 1;
                    self.rlc_tx.enqueue(Sdu {
                        id,
                        bytes: seg.len,
                        payload: seg,
                    });
                }
            }
            Ev::AcksAtServer(acks) => {
                for ack in acks {
                    self.tcp_tx.on_ack(now, ack);
                }
                self.after_congestion_change(now);
                self.server_send(q, now);
            }
            Ev::StatusAtGnb(st) => {
                self.rlc_tx.on_status(&st);
            }
            Ev::TcpRto => {
                self.rto_slot.fired(now);
                if self.tcp_tx.rto_timer.fires_at(now) {
                    self.tcp_tx.on_rto(now);
                    self.after_congestion_change(now);
                    self.server_send(q, now);
                }
            }
            Ev::PollTimer => {
                self.poll_slot.fired(now);
                self.rlc_tx.on_poll_retransmit_timer(now);
            }
            Ev::ReassemblyTimer => {
                self.reasm_slot.fired(now);
                let out = self.rlc_rx.on_reassembly_timer(now);
                self.ue_receive(q, now, out, StatusCause::ReassemblyExpiry);
            }
        }
        self.sync_timers(q);
    }

    fn sync_timers(&mut self, q: &mut EventQueue<Ev>) {
        if let Some(d) = self.rto_slot.needs_event(&self.tcp_tx.rto_timer) {
            self.schedule(q, d, Ev::TcpRto);
        }
        if let Some(t) = self.rlc_tx.poll_timer() {
            if let Some(d) = self.poll_slot.needs_event(t) {
                self.schedule(q, d, Ev::PollTimer);
            }
        }
        if let Some(d) = self.reasm_slot.needs_event(self.rlc_rx.reassembly_timer()) {
            self.schedule(q, d, Ev::ReassemblyTimer);
        }
    }

    fn after_congestion_change(&mut self, now: SimTime) {
        let cwnd = self.tcp_tx.cwnd();
        self.max_cwnd = self.max_cwnd.max(cwnd);
        if self.trace_on {
            self.trace.push(TraceEvent::Cwnd {
                at: now,
                cwnd,
                ssthresh: self.tcp_tx.ssthresh(),
            });
        }
    }

    fn on_file_arrival(&mut self, q: &mut EventQueue<Ev>, now: SimTime, i: usize) {
        self.tcp_tx.restart_if_idle();
        self.files[i].stream_offset = self.written;
        self.written += self.files[i].bytes;
        self.tcp_tx.write(self.files[i].bytes);
        self.server_send(q, now);
    }

    fn server_send(&mut self, q: &mut EventQueue<Ev>, now: SimTime) {
        let segs = self.tcp_tx.poll_send(now);
        if segs.is_empty() {
            return;
        }
        let snd_max = self.tcp_tx.snd_max();
        while let Some(f) = self.files.get_mut(self.next_unstarted) {
            if f.arrival > now || f.stream_offset >= snd_max {
                break;
            }
            f.first_byte_sent = Some(now);
            self.next_unstarted += 1;
        }
        let at = pipe_transfer(now, &self.cfg.tcp);
        self.schedule(q, at, Ev::SegmentsAtGnb(segs));
    }

    fn on_slot(&mut self, q: &mut EventQueue<Ev>, now: SimTime) {
        let rlc_tx = &mut self.rlc_tx;
        let report = self.harq.run_slot(
            now,
            &self.cfg.errors,
            &mut self.phy,
            &mut self.feedback,
            |budget| {
                let pdus = rlc_tx.build(now, budget);
                let bytes = pdus.iter().map(|p| p.len).sum();
                (pdus, bytes)
            },
        );
        for d in report.decisions {
            match d {
                HarqDecision::GiveUp { tb, .. } => {
                    self.rlc_tx.on_mac_loss(&tb.payload);
                    if self.trace_on {
                        self.trace.push(TraceEvent::GiveUp { at: now });
                    }
                }
                HarqDecision::Concluded {
                    outcome: TbOutcome::ResidualLoss(_),
                    ..
                } if self.trace_on => self.trace.push(TraceEvent::ResidualLoss { at: now }),
                _ => {}
            }
        }
        if let Some(pdus) = report.newly_delivered {
            let mut acks = Vec::new();
            for pdu in pdus {
                let out = self.rlc_rx.on_pdu(now, pdu);
                self.ue_deliver(now, out.delivered, &mut acks);
                if let Some(st) = out.status {
                    self.send_status(q, now, st, StatusCause::Poll);
                }
            }
            self.send_acks(q, now, acks);
        }
    }

    fn ue_receive(
        &mut self,
        q: &mut EventQueue<Ev>,
        now: SimTime,
        out: RlcRxOutput<TcpSegment>,
        cause: StatusCause,
    ) {
        let mut acks = Vec::new();
        self.ue_deliver(now, out.delivered, &mut acks);
        self.send_acks(q, now, acks);
        if let Some(st) = out.status {
            self.send_status(q, now, st, cause);
        }
    }

    fn ue_deliver(&mut self, now: SimTime, sdus: Vec<Sdu<TcpSegment>>, acks: &mut Vec<u64>) {
        for sdu in sdus {
            let seg = sdu.payload;
            let (ack, newly) = self.tcp_rx.on_segment(seg.seq, seg.len);
            // half-open window [warmup, end) so a slot at `end` is not counted
            if now >= self.warmup && now < self.cfg.end() {
                self.delivered_in_window += newly;
            }
            acks.push(ack);
        }
        let rcv = self.tcp_rx.rcv_nxt();
        while let Some(f) = self.files.get_mut(self.next_incomplete) {
            if f.first_byte_sent.is_none() || f.stream_end() > rcv {
                break;
            }
            f.last_byte_delivered = Some(now);
            self.next_incomplete += 1;
        }
    }

    fn send_acks(&mut self, q: &mut EventQueue<Ev>, now: SimTime, acks: Vec<u64>) {
        if acks.is_empty() {
            return;
        }
        let at = pipe_transfer(now + self.uplink_delay, &self.cfg.tcp);
        self.schedule(q, at, Ev::AcksAtServer(acks));
    }

    fn send_status(
        &mut self,
        q: &mut EventQueue<Ev>,
        now: SimTime,
        st: StatusPdu,
        cause: StatusCause,
    ) {
        self.status_sent += 1;
        let lost = self.uplink.bernoulli(self.status_loss_p);
        if self.trace_on {
            self.trace.push(TraceEvent::Status {
                at: now,
                cause,
                lost,
            });
        }
        if lost {
            self.status_lost += 1;
        } else {
            self.schedule(q, now + self.uplink_delay, Ev::StatusAtGnb(st));
        }
    }

    fn finish(self, user: u32) -> Result<UserOutput> {
        if let Some(e) = self.fault {
            return Err(e);
        }
        let window = self.cfg.end() - self.warmup;
        let stats = *self.tcp_tx.stats();
        Ok(UserOutput {
            user,
            throughput_bps: user_throughput(self.delivered_in_window, window)?,
            delivered_bytes: self.delivered_in_window,
            loss_epochs: self.tcp_tx.loss_epochs().to_vec(),
            harq: *self.harq.log(),
            sdus_submitted: self.rlc_tx.sdus_submitted(),
            sdus_lost: self.rlc_rx.sdus_lost() + self.rlc_tx.sdus_discarded(),
            status_sent: self.status_sent,
            status_lost: self.status_lost,
            gnb_drops: self.gnb_drops,
            max_cwnd: self.max_cwnd,
            fast_retransmits: stats.fast_retransmits,
            timeouts: stats.timeouts,
            files: self.files,
            trace: self.trace,
        })
    }
}

fn run_user(cfg: &SimConfig, seed: u64, user: u32, opts: RunOptions) -> Result<(UserOutput, u64)> {
    let mut st = UserStack::new(cfg, seed, user, opts)?;
    let mut q: EventQueue<Ev> = EventQueue::new();
    q.schedule(SimTime::ZERO, Ev::Slot)?;
    for i in 0..st.files.len() {
        q.schedule(st.files[i].arrival, Ev::FileArrival(i))?;
    }
    q.run_until(cfg.end(), |q, ev| st.handle(q, ev.kind));
    let executed = q.executed();
    Ok((st.finish(user)?, executed))
}

/// Runs every user of one configuration under `seed`.
pub fn run(cfg: &SimConfig, seed: u64, opts: RunOptions) -> Result<RunOutput> {
    cfg.validate()?;
    let mut users = Vec::new();
    let mut events = 0;
    for u in 0..cfg.traffic.n_users {
        let (out, n) = run_user(cfg, seed, u, opts)?;
        events += n;
        users.push(out);
    }
    let warmup = cfg.warmup();
    let beta = cfg.tcp.cubic_beta;
    let c = cfg.tcp.cubic_c;

    let mut m = RunMetrics {
        seed,
        config_key: format!("{cfg:?}"),
        events_executed: events,
        ..Default::default()
    };
    let mut cw = CwndSummary::default();
    for u in &users {
        m.user_throughput_bps += u.throughput_bps / users.len() as f64;
        for f in &u.files {
            if f.last_byte_delivered.is_some_and(|t| t >= warmup) {
                m.per_packet_throughput_bps.push(on_file_complete(f)?);
            }
        }
        m.harq.merge(&u.harq);
        m.sdus_submitted += u.sdus_submitted;
        m.sdus_lost += u.sdus_lost;
        m.files_arrived += u.files.len() as u64;
        m.files_completed += u.files.iter().filter(|f| f.is_complete()).count() as u64;
        for e in &u.loss_epochs {
            cw.loss_epochs += 1;
            cw.max_peak_error = cw.max_peak_error.max((e.window_at(e.k, c) - e.w_max).abs());
            cw.max_start_error = cw
                .max_start_error
                .max((e.window_at(0.0, c) - (1.0 - beta) * e.w_max).abs());
        }
        cw.max_cwnd = cw.max_cwnd.max(u.max_cwnd);
        cw.fast_retransmits += u.fast_retransmits;
        cw.timeouts += u.timeouts;
    }
    m.e2e_file_loss_count = m.files_arrived - m.files_completed;
    m.mac_residual_rate = measured_residual_rate(&m.harq).unwrap_or(f64::NAN);
    m.rlc_sdu_loss_rate = if m.sdus_submitted == 0 {
        0.0
    } else {
        m.sdus_lost as f64 / m.sdus_submitted as f64
    };
    m.cwnd = cw;
    Ok(RunOutput { metrics: m, users })
}
