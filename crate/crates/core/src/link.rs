//! Abstract radio link: per-slot transmission opportunities of fixed
//! transport-block size, stochastic decoding at a configured BLER with a
//! Chase-combining abstraction, and lossy grant / feedback channels.

use serde::{Deserialize, Serialize};

use crate::error::{check_prob, Error, Result};
use crate::sim::RngStream;

/// How the give-up exponent relates to the configured retransmission limit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GiveUpCount {
    /// `P_gu = p_e^n_max`, `n_max` being the retransmission limit.
    #[default]
    Retransmissions,
    /// `P_gu = p_e^(n_max + 1)`, counting the initial transmission too.
    Attempts,
}

/// Control-channel and data-channel error probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorModelParams {
    /// Downlink grant (PDCCH) miss probability per transmission.
    pub p_ch: f64,
    /// First-transmission block error rate.
    pub p_e: f64,
    /// NACK read as ACK.
    pub p_na: f64,
    /// DTX read as ACK.
    pub p_da: f64,
    /// ACK read as NACK.
    pub p_an: f64,
    /// Maximum HARQ retransmissions.
    pub n_max: u32,
    pub give_up_count: GiveUpCount,
}

impl Default for ErrorModelParams {
    fn default() -> Self {
        ErrorModelParams {
            p_ch: 0.01,
            p_e: 0.1,
            p_na: 0.0,
            p_da: 0.0,
            p_an: 0.0,
            n_max: 6,
            give_up_count: GiveUpCount::Retransmissions,
        }
    }
}

impl ErrorModelParams {
    pub fn ideal() -> Self {
        ErrorModelParams {
            p_ch: 0.0,
            p_e: 0.0,
            p_na: 0.0,
            p_da: 0.0,
            p_an: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_prob("p_ch", self.p_ch)?;
        check_prob("p_e", self.p_e)?;
        check_prob("p_na", self.p_na)?;
        check_prob("p_da", self.p_da)?;
        check_prob("p_an", self.p_an)?;
        Ok(())
    }

    /// Exponent `n` used in `P_gu = p_e^n`.
    pub fn give_up_exponent(&self) -> u32 {
        match self.give_up_count {
            GiveUpCount::Retransmissions => self.n_max,
            GiveUpCount::Attempts => self.n_max + 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub slot_us: u64,
    /// Transport-block capacity per slot.
    pub tb_bits: u64,
    /// Chase combining gain in (0, 1].
    pub combining_gain: f64,
    pub combining_enabled: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            slot_us: 500,
            tb_bits: 75_000,
            combining_gain: 0.95,
            combining_enabled: true,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slot_us == 0 {
            return Err(Error::Config("link.slot_us must be > 0".into()));
        }
        if self.tb_bits < 8 {
            return Err(Error::Config(
                "link.tb_bits must hold at least one byte".into(),
            ));
        }
        if !(self.combining_gain > 0.0 && self.combining_gain <= 1.0) {
            return Err(Error::Config(
                "link.combining_gain must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn tb_bytes(&self) -> u32 {
        (self.tb_bits / 8) as u32
    }

    /// Peak rate with every slot carrying a full transport block.
    pub fn peak_bps(&self) -> f64 {
        self.tb_bits as f64 * 1e6 / self.slot_us as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransmissionAttempt {
    pub process_id: usize,
    /// 1 for the initial transmission.
    pub attempt_index: u32,
    /// Copies the receiver holds for soft combining, this attempt included
    /// if its grant was received.
    pub combined_copies: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeedbackState {
    Ack,
    Nack,
    Dtx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeedbackSignal {
    pub true_state: FeedbackState,
    pub observed: FeedbackState,
}

/// `false` with probability `p_ch`: the UE missed the grant.
pub fn grant_received(params: &ErrorModelParams, rng: &mut RngStream) -> bool {
    !rng.bernoulli(params.p_ch)
}

/// Decode-failure probability once `combined_copies` copies are combined.
///
/// With combining, failure after `k` copies is `p_e^(1 + gain·(k-1))`; without
/// it every attempt fails independently with `p_e`.
pub fn decode_failure_prob(combined_copies: u32, cfg: &LinkConfig, p_e: f64) -> f64 {
    if !cfg.combining_enabled || combined_copies <= 1 {
        return p_e;
    }
    let exponent = 1.0 + cfg.combining_gain * f64::from(combined_copies - 1);
    p_e.powf(exponent)
}

/// Draws the decode outcome of one attempt; `true` means decoded.
pub fn attempt_decode(
    att: &TransmissionAttempt,
    cfg: &LinkConfig,
    params: &ErrorModelParams,
    rng: &mut RngStream,
) -> bool {
    debug_assert!(att.combined_copies >= 1);
    let p_fail = decode_failure_prob(att.combined_copies.max(1), cfg, params.p_e);
    !rng.bernoulli(p_fail)
}

/// Applies the uplink feedback corruption. Only NACK→ACK, ACK→NACK and
/// DTX→ACK transitions exist.
pub fn corrupt_feedback(
    true_state: FeedbackState,
    params: &ErrorModelParams,
    rng: &mut RngStream,
) -> FeedbackSignal {
    let observed = match true_state {
        FeedbackState::Nack if rng.bernoulli(params.p_na) => FeedbackState::Ack,
        FeedbackState::Ack if rng.bernoulli(params.p_an) => FeedbackState::Nack,
        FeedbackState::Dtx if rng.bernoulli(params.p_da) => FeedbackState::Ack,
        s => s,
    };
    FeedbackSignal {
        true_state,
        observed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ErrorModelParams {
        ErrorModelParams::ideal()
    }

    fn binomial_3sigma(p: f64, n: f64) -> f64 {
        3.0 * (p * (1.0 - p) / n).sqrt()
    }

    #[test]
    fn grant_extremes() {
        let mut rng = RngStream::new(1, "g");
        let mut p = params();
        assert!((0..1000).all(|_| grant_received(&p, &mut rng)));
        p.p_ch = 1.0;
        assert!((0..1000).all(|_| !grant_received(&p, &mut rng)));
    }

    #[test]
    fn grant_miss_frequency() {
        let mut rng = RngStream::new(2, "g");
        let p = ErrorModelParams {
            p_ch: 0.01,
            ..params()
        };
        let n = 1_000_000;
        let misses = (0..n).filter(|_| !grant_received(&p, &mut rng)).count();
        let frac = misses as f64 / n as f64;
        assert!(
            (frac - 0.01).abs() <= binomial_3sigma(0.01, n as f64),
            "{frac}"
        );
    }

    #[test]
    fn failure_prob_values() {
        let mut cfg = LinkConfig {
            combining_enabled: false,
            ..Default::default()
        };
        for k in 1..=7 {
            assert_eq!(decode_failure_prob(k, &cfg, 0.1), 0.1);
        }
        cfg.combining_enabled = true;
        cfg.combining_gain = 1.0;
        assert!((decode_failure_prob(2, &cfg, 0.1) - 1e-2).abs() < 1e-15);
        cfg.combining_gain = 0.95;
        // 10^(-1.95)
        let expected = 1.122_018_454_301_963_3e-2;
        assert!((decode_failure_prob(2, &cfg, 0.1) - expected).abs() < 1e-15);
        assert_eq!(decode_failure_prob(1, &cfg, 0.1), 0.1);
    }

    #[test]
    fn failure_prob_strictly_decreasing_with_copies() {
        let cfg = LinkConfig::default();
        for &p_e in &[0.5, 0.1, 0.01] {
            let probs: Vec<f64> = (1..=7).map(|k| decode_failure_prob(k, &cfg, p_e)).collect();
            assert!(probs.windows(2).all(|w| w[1] < w[0]), "{probs:?}");
        }
    }

    #[test]
    fn independent_attempts_all_fail_like_power_law() {
        // 6 independent attempts at p_e = 0.5: all-fail probability 1/64.
        let cfg = LinkConfig {
            combining_enabled: false,
            ..Default::default()
        };
        let p = ErrorModelParams {
            p_e: 0.5,
            ..params()
        };
        let mut rng = RngStream::new(3, "phy");
        let n = 200_000;
        let mut all_fail = 0;
        for _ in 0..n {
            let failed = (1..=6).all(|k| {
                let att = TransmissionAttempt {
                    process_id: 0,
                    attempt_index: k,
                    combined_copies: k,
                };
                !attempt_decode(&att, &cfg, &p, &mut rng)
            });
            all_fail += failed as u32;
        }
        let frac = f64::from(all_fail) / n as f64;
        let target = 0.5f64.powi(6);
        assert!(
            (frac - target).abs() <= binomial_3sigma(target, n as f64),
            "{frac}"
        );
    }

    #[test]
    fn feedback_corruption_cases() {
        let mut rng = RngStream::new(4, "fb");
        let mut p = params();
        p.p_na = 1.0;
        let s = corrupt_feedback(FeedbackState::Nack, &p, &mut rng);
        assert_eq!(s.observed, FeedbackState::Ack);
        assert_eq!(s.true_state, FeedbackState::Nack);
        let s = corrupt_feedback(FeedbackState::Ack, &p, &mut rng);
        assert_eq!(s.observed, FeedbackState::Ack);
    }

    #[test]
    fn dtx_to_ack_frequency() {
        let mut rng = RngStream::new(5, "fb");
        let p = ErrorModelParams {
            p_da: 1e-2,
            ..params()
        };
        let n = 10_000_000u32;
        let mut acks = 0u32;
        for _ in 0..n {
            if corrupt_feedback(FeedbackState::Dtx, &p, &mut rng).observed == FeedbackState::Ack {
                acks += 1;
            }
        }
        let frac = f64::from(acks) / f64::from(n);
        assert!(
            (frac - 1e-2).abs() <= binomial_3sigma(1e-2, f64::from(n)),
            "{frac}"
        );
    }

    #[test]
    fn no_transitions_outside_matrix() {
        let mut rng = RngStream::new(6, "fb");
        let p = ErrorModelParams {
            p_na: 0.5,
            p_da: 0.5,
            p_an: 0.5,
            ..params()
        };
        for _ in 0..10_000 {
            let s = corrupt_feedback(FeedbackState::Dtx, &p, &mut rng);
            assert_ne!(s.observed, FeedbackState::Nack);
            let s = corrupt_feedback(FeedbackState::Nack, &p, &mut rng);
            assert_ne!(s.observed, FeedbackState::Dtx);
            let s = corrupt_feedback(FeedbackState::Ack, &p, &mut rng);
            assert_ne!(s.observed, FeedbackState::Dtx);
        }
    }

    #[test]
    fn validation() {
        assert!(ErrorModelParams::default().validate().is_ok());
        let bad = ErrorModelParams {
            p_na: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = LinkConfig {
            tb_bits: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
