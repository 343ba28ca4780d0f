//! TCP over a fixed-delay wired pipe: Reno and CUBIC senders sharing one
//! loss-recovery state machine, and a cumulative-ACK receiver.

mod cubic;
mod receiver;
mod sender;

pub use cubic::{cubic_k, cubic_window, CubicEpoch};
pub use receiver::TcpReceiver;
pub use sender::{Phase, TcpSegment, TcpSender, TcpSenderStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::SimTime;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TcpVariant {
    Reno,
    #[default]
    Cubic,
}

/// How `network_delay_ms` maps onto the two pipe directions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayMode {
    /// The configured delay applies once in each direction.
    #[default]
    OneWay,
    /// The configured delay is the whole round trip, split evenly.
    RoundTrip,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TcpConfig {
    pub mss_bytes: u32,
    pub init_cwnd_mss: f64,
    pub ssthresh_init_mss: f64,
    pub variant: TcpVariant,
    pub cubic_beta: f64,
    pub cubic_c: f64,
    pub network_delay_ms: f64,
    pub delay_mode: DelayMode,
    pub rto_min_ms: f64,
    pub rto_initial_ms: f64,
    pub rto_max_ms: f64,
    pub dupack_threshold: u32,
}

impl Default for TcpConfig {
    fn default() -> Self {
        TcpConfig {
            mss_bytes: 1500,
            init_cwnd_mss: 3.0,
            ssthresh_init_mss: 500.0,
            variant: TcpVariant::Cubic,
            cubic_beta: 0.2,
            cubic_c: 0.4,
            network_delay_ms: 10.0,
            delay_mode: DelayMode::OneWay,
            rto_min_ms: 200.0,
            rto_initial_ms: 1000.0,
            rto_max_ms: 60_000.0,
            dupack_threshold: 3,
        }
    }
}

impl TcpConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tcp.init_cwnd_mss", self.init_cwnd_mss),
            ("tcp.ssthresh_init_mss", self.ssthresh_init_mss),
            ("tcp.cubic_c", self.cubic_c),
            ("tcp.rto_min_ms", self.rto_min_ms),
            ("tcp.rto_initial_ms", self.rto_initial_ms),
            ("tcp.rto_max_ms", self.rto_max_ms),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.mss_bytes == 0 || self.dupack_threshold == 0 {
            return Err(Error::Config(
                "tcp.mss_bytes and tcp.dupack_threshold must be >= 1".into(),
            ));
        }
        if !(self.cubic_beta > 0.0 && self.cubic_beta < 1.0) {
            return Err(Error::Config(format!(
                "tcp.cubic_beta must be in (0,1), got {}",
                self.cubic_beta
            )));
        }
        if !(self.network_delay_ms >= 0.0 && self.network_delay_ms.is_finite()) {
            return Err(Error::Config("tcp.network_delay_ms must be >= 0".into()));
        }
        if self.rto_min_ms > self.rto_max_ms {
            return Err(Error::Config(
                "tcp.rto_min_ms exceeds tcp.rto_max_ms".into(),
            ));
        }
        Ok(())
    }

    /// Delay of one traversal of the server to RAN pipe.
    pub fn one_way_delay(&self) -> SimTime {
        match self.delay_mode {
            DelayMode::OneWay => SimTime::from_millis_f64(self.network_delay_ms),
            DelayMode::RoundTrip => SimTime::from_millis_f64(self.network_delay_ms / 2.0),
        }
    }
}

/// Arrival time of a packet entering the pipe at `now` in either direction.
pub fn pipe_transfer(now: SimTime, cfg: &TcpConfig) -> SimTime {
    now + cfg.one_way_delay()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_delay_is_same_tick() {
        let cfg = TcpConfig {
            network_delay_ms: 0.0,
            ..Default::default()
        };
        assert_eq!(pipe_transfer(SimTime(1234), &cfg), SimTime(1234));
    }

    #[test]
    fn ten_ms_one_way_gives_twenty_ms_round_trip_floor() {
        let cfg = TcpConfig::default();
        let there = pipe_transfer(SimTime::ZERO, &cfg);
        let back = pipe_transfer(there, &cfg);
        assert_eq!(back, SimTime::from_millis(20));
    }

    #[test]
    fn round_trip_mode_halves_each_leg() {
        let cfg = TcpConfig {
            network_delay_ms: 50.0,
            delay_mode: DelayMode::RoundTrip,
            ..Default::default()
        };
        assert_eq!(pipe_transfer(SimTime::ZERO, &cfg), SimTime::from_millis(25));
    }

    #[test]
    fn validation() {
        assert!(TcpConfig::default().validate().is_ok());
        let bad = TcpConfig {
            cubic_beta: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TcpConfig {
            network_delay_ms: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
