//! The full per-run configuration, one section per layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harq::HarqConfig;
use crate::link::{ErrorModelParams, LinkConfig};
use crate::rlc::RlcConfig;
use crate::sim::SimTime;
use crate::tcp::TcpConfig;
use crate::traffic::FtpConfig;

/// Radio access plumbing between UE and gNB outside the HARQ loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RanConfig {
    /// UE to gNB latency for TCP ACKs and RLC status reports.
    pub uplink_delay_ms: f64,
    /// Drop RLC status reports with the HARQ residual error probability.
    pub status_loss: bool,
    /// gNB transmit buffer per user; arriving TCP segments that do not fit
    /// are tail-dropped. Zero means unlimited.
    pub gnb_buffer_bytes: u64,
}

impl Default for RanConfig {
    fn default() -> Self {
        RanConfig {
            uplink_delay_ms: 2.0,
            status_loss: true,
            gnb_buffer_bytes: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub sim_seconds: f64,
    pub warmup_seconds: f64,
    pub link: LinkConfig,
    pub errors: ErrorModelParams,
    pub harq: HarqConfig,
    pub rlc: RlcConfig,
    pub tcp: TcpConfig,
    pub traffic: FtpConfig,
    pub ran: RanConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            sim_seconds: 60.0,
            warmup_seconds: 4.0,
            link: LinkConfig::default(),
            errors: ErrorModelParams::default(),
            harq: HarqConfig::default(),
            rlc: RlcConfig::default(),
            tcp: TcpConfig::default(),
            traffic: FtpConfig::default(),
            ran: RanConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.warmup_seconds >= 0.0 && self.sim_seconds > self.warmup_seconds) {
            return Err(Error::Config(format!(
                "sim_seconds ({}) must exceed warmup_seconds ({})",
                self.sim_seconds, self.warmup_seconds
            )));
        }
        if self.errors.n_max != self.harq.max_retx {
            return Err(Error::Config(format!(
                "errors.n_max ({}) must equal harq.max_retx ({})",
                self.errors.n_max, self.harq.max_retx
            )));
        }
        if !(self.ran.uplink_delay_ms >= 0.0 && self.ran.uplink_delay_ms.is_finite()) {
            return Err(Error::Config("ran.uplink_delay_ms must be >= 0".into()));
        }
        self.link.validate()?;
        self.errors.validate()?;
        self.harq.validate()?;
        self.rlc.validate()?;
        self.tcp.validate()?;
        self.traffic.validate()
    }

    pub fn end(&self) -> SimTime {
        SimTime::from_secs_f64(self.sim_seconds)
    }

    pub fn warmup(&self) -> SimTime {
        SimTime::from_secs_f64(self.warmup_seconds)
    }

    /// Sets the HARQ retransmission limit in both places it is used.
    pub fn set_max_retx(&mut self, n: u32) {
        self.harq.max_retx = n;
        self.errors.n_max = n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn warmup_must_precede_end() {
        let c = SimConfig {
            sim_seconds: 4.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn retx_limits_must_agree() {
        let mut c = SimConfig::default();
        c.harq.max_retx = 5;
        assert!(c.validate().is_err());
        c.set_max_retx(5);
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let c = SimConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back: SimConfig = toml::from_str(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(toml::from_str::<SimConfig>("[tcp]\nmss = 3\n").is_err());
    }
}
