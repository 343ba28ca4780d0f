//! FTP model 3 source: fixed-size files with Poisson arrivals.

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{RngStream, SimTime};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FtpConfig {
    pub file_bytes: u64,
    pub lambda_per_s: f64,
    pub n_users: u32,
}

impl Default for FtpConfig {
    fn default() -> Self {
        FtpConfig {
            file_bytes: 35_000_000,
            lambda_per_s: 0.25,
            n_users: 1,
        }
    }
}

impl FtpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.file_bytes == 0 {
            return Err(Error::Config("traffic.file_bytes must be > 0".into()));
        }
        if !(self.lambda_per_s > 0.0 && self.lambda_per_s.is_finite()) {
            return Err(Error::Config("traffic.lambda_per_s must be > 0".into()));
        }
        if self.n_users == 0 {
            return Err(Error::Config("traffic.n_users must be >= 1".into()));
        }
        Ok(())
    }

    pub fn offered_load_bps(&self) -> f64 {
        self.file_bytes as f64 * 8.0 * self.lambda_per_s
    }
}

/// Exponential inter-arrival gap with mean `1 / lambda`.
pub fn next_arrival(rng: &mut RngStream, cfg: &FtpConfig) -> SimTime {
    let exp = Exp::new(cfg.lambda_per_s).expect("lambda validated > 0");
    SimTime::from_secs_f64(exp.sample(rng))
}

/// All arrival instants strictly before `horizon`.
pub fn arrival_times(rng: &mut RngStream, cfg: &FtpConfig, horizon: SimTime) -> Vec<SimTime> {
    let mut out = Vec::new();
    let mut t = SimTime::ZERO;
    loop {
        t += next_arrival(rng, cfg);
        if t >= horizon {
            return out;
        }
        out.push(t);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FileTransfer {
    pub id: u64,
    pub user: u32,
    pub bytes: u64,
    pub arrival: SimTime,
    /// Byte offset of the file in the user's TCP stream.
    pub stream_offset: u64,
    pub first_byte_sent: Option<SimTime>,
    pub last_byte_delivered: Option<SimTime>,
}

impl FileTransfer {
    pub fn stream_end(&self) -> u64 {
        self.stream_offset + self.bytes
    }

    pub fn is_complete(&self) -> bool {
        self.last_byte_delivered.is_some()
    }
}

/// Throughput of one completed file: size over arrival-to-delivery time.
pub fn on_file_complete(ft: &FileTransfer) -> Result<f64> {
    let done = ft
        .last_byte_delivered
        .ok_or_else(|| Error::Config(format!("file {} has not completed", ft.id)))?;
    let secs = done.saturating_sub(ft.arrival).as_secs_f64();
    if secs <= 0.0 {
        return Err(Error::ZeroWindow);
    }
    Ok(ft.bytes as f64 * 8.0 / secs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(arrival_s: u64, done_s: Option<u64>) -> FileTransfer {
        FileTransfer {
            id: 0,
            user: 0,
            bytes: 35_000_000,
            arrival: SimTime::from_secs(arrival_s),
            stream_offset: 0,
            first_byte_sent: None,
            last_byte_delivered: done_s.map(SimTime::from_secs),
        }
    }

    #[test]
    fn offered_load_is_70_mbps() {
        assert_eq!(FtpConfig::default().offered_load_bps(), 70e6);
    }

    #[test]
    fn mean_gap_is_four_seconds() {
        let cfg = FtpConfig::default();
        let mut rng = RngStream::new(1, "traffic");
        let n = 100_000;
        let mean = (0..n)
            .map(|_| next_arrival(&mut rng, &cfg).as_secs_f64())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 4.0).abs() < 3.0 * 4.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn huge_rate_gives_tiny_gaps() {
        let cfg = FtpConfig {
            lambda_per_s: 1e9,
            ..Default::default()
        };
        let mut rng = RngStream::new(1, "traffic");
        assert!((0..100).all(|_| next_arrival(&mut rng, &cfg) <= SimTime(1)));
    }

    #[test]
    fn arrivals_are_reproducible() {
        let cfg = FtpConfig::default();
        let a = arrival_times(
            &mut RngStream::new(5, "traffic"),
            &cfg,
            SimTime::from_secs(60),
        );
        let b = arrival_times(
            &mut RngStream::new(5, "traffic"),
            &cfg,
            SimTime::from_secs(60),
        );
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn per_file_throughput() {
        assert_eq!(on_file_complete(&file(10, Some(14))).unwrap(), 70e6);
        assert_eq!(on_file_complete(&file(10, Some(12))).unwrap(), 140e6);
        assert!(on_file_complete(&file(10, None)).is_err());
        assert!(matches!(
            on_file_complete(&file(10, Some(10))),
            Err(Error::ZeroWindow)
        ));
    }
}
