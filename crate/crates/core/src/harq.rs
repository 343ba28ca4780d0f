//! HARQ entity: parallel stop-and-wait processes, retransmission control
//! and per-TB terminal outcomes (delivered, residual loss, give-up loss).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::{
    attempt_decode, corrupt_feedback, grant_received, ErrorModelParams, FeedbackState, LinkConfig,
    TransmissionAttempt,
};
use crate::sim::{RngStream, SimTime};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarqMode {
    /// Chase combining of all received copies.
    #[default]
    HarqCombining,
    /// Layer-1 ARQ: each attempt decoded on its own.
    L1Arq,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarqConfig {
    pub n_processes: usize,
    pub max_retx: u32,
    pub mode: HarqMode,
    pub feedback_delay_slots: u32,
}

impl Default for HarqConfig {
    fn default() -> Self {
        HarqConfig {
            n_processes: 8,
            max_retx: 6,
            mode: HarqMode::HarqCombining,
            feedback_delay_slots: 4,
        }
    }
}

impl HarqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_processes == 0 {
            return Err(Error::Config("harq.n_processes must be >= 1".into()));
        }
        Ok(())
    }

    /// Link configuration with combining forced off in L1-ARQ mode.
    pub fn effective_link(&self, link: &LinkConfig) -> LinkConfig {
        LinkConfig {
            combining_enabled: link.combining_enabled && self.mode == HarqMode::HarqCombining,
            ..*link
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransportBlock<P> {
    pub tb_id: u64,
    pub payload: Vec<P>,
    pub bytes: u32,
    pub created_at: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProcessState {
    Idle,
    WaitingFeedback,
    RetxPending,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ResidualCause {
    NackToAck,
    DtxToAck,
}

/// Terminal outcome of a transport block, judged by what the receiver
/// actually got rather than what the transmitter believes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TbOutcome {
    Delivered,
    ResidualLoss(ResidualCause),
    GiveUpLoss,
}

impl TbOutcome {
    pub fn is_loss(self) -> bool {
        !matches!(self, TbOutcome::Delivered)
    }
}

#[derive(Debug)]
pub enum HarqDecision<P> {
    /// Feedback read as ACK; the process is free again.
    Concluded {
        outcome: TbOutcome,
        tb: TransportBlock<P>,
    },
    /// Read as NACK or DTX with attempts left.
    Retransmit { process_id: usize },
    /// Attempts exhausted. The transmitter reports the TB's contents lost
    /// even if the receiver happens to hold it.
    GiveUp {
        outcome: TbOutcome,
        tb: TransportBlock<P>,
    },
}

#[derive(Clone, Debug)]
pub struct HarqProcess<P> {
    pub id: usize,
    pub state: ProcessState,
    pub tb: Option<TransportBlock<P>>,
    pub attempt_index: u32,
    pub combined_copies: u32,
    /// Receiver decoded this TB at some attempt.
    pub delivered: bool,
    pub last_true_state: Option<FeedbackState>,
    pub feedback_due: SimTime,
}

impl<P> HarqProcess<P> {
    pub fn new(id: usize) -> Self {
        HarqProcess {
            id,
            state: ProcessState::Idle,
            tb: None,
            attempt_index: 0,
            combined_copies: 0,
            delivered: false,
            last_true_state: None,
            feedback_due: SimTime::ZERO,
        }
    }

    pub fn load(&mut self, tb: TransportBlock<P>) {
        assert!(
            self.tb.is_none(),
            "HARQ process {} already holds a TB",
            self.id
        );
        self.tb = Some(tb);
        self.state = ProcessState::RetxPending;
        self.attempt_index = 0;
        self.combined_copies = 0;
        self.delivered = false;
        self.last_true_state = None;
    }

    /// Starts the next (re)transmission and returns the attempt descriptor;
    /// `combined_copies` assumes the grant gets through.
    pub fn transmit(&mut self, now: SimTime, feedback_delay: SimTime) -> TransmissionAttempt {
        debug_assert_eq!(self.state, ProcessState::RetxPending);
        self.attempt_index += 1;
        self.state = ProcessState::WaitingFeedback;
        self.feedback_due = now + feedback_delay;
        TransmissionAttempt {
            process_id: self.id,
            attempt_index: self.attempt_index,
            combined_copies: self.combined_copies + 1,
        }
    }

    /// Records what happened on the air and returns the true feedback state.
    pub fn on_transmission_outcome(&mut self, grant_ok: bool, decode_ok: bool) -> FeedbackState {
        debug_assert_eq!(self.state, ProcessState::WaitingFeedback);
        let state = if !grant_ok {
            FeedbackState::Dtx
        } else {
            self.combined_copies += 1;
            if decode_ok || self.delivered {
                self.delivered = true;
                FeedbackState::Ack
            } else {
                FeedbackState::Nack
            }
        };
        self.last_true_state = Some(state);
        state
    }

    pub fn on_feedback(&mut self, observed: FeedbackState, max_retx: u32) -> HarqDecision<P> {
        debug_assert_eq!(self.state, ProcessState::WaitingFeedback);
        match observed {
            FeedbackState::Ack => {
                let outcome = if self.delivered {
                    TbOutcome::Delivered
                } else {
                    match self.last_true_state {
                        Some(FeedbackState::Dtx) => {
                            TbOutcome::ResidualLoss(ResidualCause::DtxToAck)
                        }
                        _ => TbOutcome::ResidualLoss(ResidualCause::NackToAck),
                    }
                };
                let tb = self.free();
                HarqDecision::Concluded { outcome, tb }
            }
            FeedbackState::Nack | FeedbackState::Dtx => {
                if self.attempt_index > max_retx {
                    let outcome = if self.delivered {
                        TbOutcome::Delivered
                    } else {
                        TbOutcome::GiveUpLoss
                    };
                    let tb = self.free();
                    HarqDecision::GiveUp { outcome, tb }
                } else {
                    self.state = ProcessState::RetxPending;
                    HarqDecision::Retransmit {
                        process_id: self.id,
                    }
                }
            }
        }
    }

    fn free(&mut self) -> TransportBlock<P> {
        self.state = ProcessState::Idle;
        self.tb.take().expect("non-idle process holds a TB")
    }
}

/// Per-TB outcome counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HarqOutcomeLog {
    pub concluded: u64,
    pub delivered: u64,
    pub residual_nack_ack: u64,
    pub residual_dtx_ack: u64,
    pub give_up_loss: u64,
    /// Give-ups of TBs the receiver already had (spurious, no loss).
    pub give_up_spurious: u64,
    pub transmissions: u64,
    pub missed_grants: u64,
    /// Retransmissions of TBs the receiver already decoded (ACK→NACK).
    pub spurious_retx: u64,
}

impl HarqOutcomeLog {
    pub fn record(&mut self, outcome: TbOutcome) {
        self.concluded += 1;
        match outcome {
            TbOutcome::Delivered => self.delivered += 1,
            TbOutcome::ResidualLoss(ResidualCause::NackToAck) => self.residual_nack_ack += 1,
            TbOutcome::ResidualLoss(ResidualCause::DtxToAck) => self.residual_dtx_ack += 1,
            TbOutcome::GiveUpLoss => self.give_up_loss += 1,
        }
    }

    pub fn residual_losses(&self) -> u64 {
        self.residual_nack_ack + self.residual_dtx_ack
    }

    pub fn lost(&self) -> u64 {
        self.residual_losses() + self.give_up_loss
    }

    pub fn merge(&mut self, other: &HarqOutcomeLog) {
        self.concluded += other.concluded;
        self.delivered += other.delivered;
        self.residual_nack_ack += other.residual_nack_ack;
        self.residual_dtx_ack += other.residual_dtx_ack;
        self.give_up_loss += other.give_up_loss;
        self.give_up_spurious += other.give_up_spurious;
        self.transmissions += other.transmissions;
        self.missed_grants += other.missed_grants;
        self.spurious_retx += other.spurious_retx;
    }
}

/// `(residual + give-up losses) / concluded TBs`.
pub fn measured_residual_rate(log: &HarqOutcomeLog) -> Result<f64> {
    if log.concluded == 0 {
        return Err(Error::Empty("measured_residual_rate"));
    }
    Ok(log.lost() as f64 / log.concluded as f64)
}

/// What happened in one slot.
#[derive(Debug)]
pub struct SlotReport<P> {
    pub decisions: Vec<HarqDecision<P>>,
    pub attempt: Option<TransmissionAttempt>,
    pub true_state: Option<FeedbackState>,
    /// Payload decoded for the first time this slot.
    pub newly_delivered: Option<Vec<P>>,
}

/// Transmitter-side HARQ entity for one single-user link.
#[derive(Debug)]
pub struct HarqEntity<P> {
    cfg: HarqConfig,
    link: LinkConfig,
    processes: Vec<HarqProcess<P>>,
    next_tb_id: u64,
    log: HarqOutcomeLog,
}

impl<P: Clone> HarqEntity<P> {
    pub fn new(cfg: HarqConfig, link: &LinkConfig) -> Self {
        HarqEntity {
            link: cfg.effective_link(link),
            processes: (0..cfg.n_processes).map(HarqProcess::new).collect(),
            cfg,
            next_tb_id: 0,
            log: HarqOutcomeLog::default(),
        }
    }

    pub fn config(&self) -> &HarqConfig {
        &self.cfg
    }

    pub fn link(&self) -> &LinkConfig {
        &self.link
    }

    pub fn processes(&self) -> &[HarqProcess<P>] {
        &self.processes
    }

    pub fn log(&self) -> &HarqOutcomeLog {
        &self.log
    }

    fn feedback_delay(&self) -> SimTime {
        SimTime(self.link.slot_us * u64::from(self.cfg.feedback_delay_slots))
    }

    /// Applies every feedback due at or before `now`, lowest process id first.
    pub fn collect_feedback(
        &mut self,
        now: SimTime,
        params: &ErrorModelParams,
        fb_rng: &mut RngStream,
    ) -> Vec<HarqDecision<P>> {
        let mut out = Vec::new();
        for idx in 0..self.processes.len() {
            let p = &self.processes[idx];
            if p.state != ProcessState::WaitingFeedback || p.feedback_due > now {
                continue;
            }
            let true_state = p
                .last_true_state
                .expect("transmitted process has a true state");
            let signal = corrupt_feedback(true_state, params, fb_rng);
            let decision = self.on_feedback(idx, signal.observed);
            out.push(decision);
        }
        out
    }

    pub fn on_feedback(&mut self, process_id: usize, observed: FeedbackState) -> HarqDecision<P> {
        let decision = self.processes[process_id].on_feedback(observed, self.cfg.max_retx);
        match &decision {
            HarqDecision::Concluded { outcome, .. } => self.log.record(*outcome),
            HarqDecision::GiveUp { outcome, .. } => {
                if *outcome == TbOutcome::Delivered {
                    self.log.give_up_spurious += 1;
                }
                self.log.record(*outcome)
            }
            HarqDecision::Retransmit { .. } => {}
        }
        decision
    }

    /// Picks at most one transmission for this slot: a pending
    /// retransmission first, otherwise a new TB on the lowest idle process
    /// if `fill` yields data for the given byte budget.
    pub fn on_slot<F>(&mut self, now: SimTime, fill: F) -> Option<TransmissionAttempt>
    where
        F: FnOnce(u32) -> (Vec<P>, u32),
    {
        let delay = self.feedback_delay();
        if let Some(p) = self
            .processes
            .iter_mut()
            .find(|p| p.state == ProcessState::RetxPending)
        {
            if p.delivered {
                self.log.spurious_retx += 1;
            }
            return Some(p.transmit(now, delay));
        }
        let idle = self
            .processes
            .iter()
            .position(|p| p.state == ProcessState::Idle)?;
        let (payload, bytes) = fill(self.link.tb_bytes());
        if payload.is_empty() {
            return None;
        }
        debug_assert!(bytes <= self.link.tb_bytes());
        let tb = TransportBlock {
            tb_id: self.next_tb_id,
            payload,
            bytes,
            created_at: now,
        };
        self.next_tb_id += 1;
        let p = &mut self.processes[idle];
        p.load(tb);
        Some(p.transmit(now, delay))
    }

    pub fn on_transmission_outcome(
        &mut self,
        process_id: usize,
        grant_ok: bool,
        decode_ok: bool,
    ) -> FeedbackState {
        self.log.transmissions += 1;
        if !grant_ok {
            self.log.missed_grants += 1;
        }
        self.processes[process_id].on_transmission_outcome(grant_ok, decode_ok)
    }

    /// Full slot: feedback, scheduling, air interface draws.
    pub fn run_slot<F>(
        &mut self,
        now: SimTime,
        params: &ErrorModelParams,
        phy_rng: &mut RngStream,
        fb_rng: &mut RngStream,
        fill: F,
    ) -> SlotReport<P>
    where
        F: FnOnce(u32) -> (Vec<P>, u32),
    {
        let decisions = self.collect_feedback(now, params, fb_rng);
        let attempt = self.on_slot(now, fill);
        let mut report = SlotReport {
            decisions,
            attempt,
            true_state: None,
            newly_delivered: None,
        };
        if let Some(att) = attempt {
            let grant_ok = grant_received(params, phy_rng);
            let decode_ok = attempt_decode(&att, &self.link, params, phy_rng);
            let was_delivered = self.processes[att.process_id].delivered;
            let state = self.on_transmission_outcome(att.process_id, grant_ok, decode_ok);
            report.true_state = Some(state);
            let p = &self.processes[att.process_id];
            if p.delivered && !was_delivered {
                report.newly_delivered = p.tb.as_ref().map(|tb| tb.payload.clone());
            }
        }
        report
    }
}

/// Runs `n_tbs` transport blocks back to back through one process, with no
/// scheduling or payload. This is the same state machine the event-driven
/// stack uses, reduced to the per-TB outcome statistics.
pub fn simulate_tb_outcomes(
    cfg: &HarqConfig,
    link: &LinkConfig,
    params: &ErrorModelParams,
    n_tbs: u64,
    phy_rng: &mut RngStream,
    fb_rng: &mut RngStream,
) -> HarqOutcomeLog {
    let link = cfg.effective_link(link);
    let mut log = HarqOutcomeLog::default();
    let mut proc: HarqProcess<()> = HarqProcess::new(0);
    for tb_id in 0..n_tbs {
        proc.load(TransportBlock {
            tb_id,
            payload: Vec::new(),
            bytes: 0,
            created_at: SimTime::ZERO,
        });
        loop {
            let att = proc.transmit(SimTime::ZERO, SimTime::ZERO);
            if proc.delivered {
                log.spurious_retx += 1;
            }
            let grant_ok = grant_received(params, phy_rng);
            let decode_ok = attempt_decode(&att, &link, params, phy_rng);
            log.transmissions += 1;
            if !grant_ok {
                log.missed_grants += 1;
            }
            let state = proc.on_transmission_outcome(grant_ok, decode_ok);
            let signal = corrupt_feedback(state, params, fb_rng);
            match proc.on_feedback(signal.observed, cfg.max_retx) {
                HarqDecision::Retransmit { .. } => continue,
                HarqDecision::Concluded { outcome, .. } => {
                    log.record(outcome);
                    break;
                }
                HarqDecision::GiveUp { outcome, .. } => {
                    if outcome == TbOutcome::Delivered {
                        log.give_up_spurious += 1;
                    }
                    log.record(outcome);
                    break;
                }
            }
        }
    }
    log
}
