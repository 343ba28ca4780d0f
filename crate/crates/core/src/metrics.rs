//! Per-run KPIs, empirical CDFs and seed aggregation.

use crate::error::{Error, Result};
use crate::harq::{measured_residual_rate, HarqOutcomeLog};
use crate::sim::SimTime;

/// Summary of one user's CUBIC loss epochs and congestion events.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CwndSummary {
    pub loss_epochs: u64,
    /// Largest `|W(k) - w_max|` over all epochs.
    pub max_peak_error: f64,
    /// Largest `|W(0) - (1 - beta) w_max|` over all epochs.
    pub max_start_error: f64,
    pub max_cwnd: f64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    /// Identifies the configuration apart from the seed; runs aggregate
    /// only with matching keys.
    pub config_key: String,
    pub user_throughput_bps: f64,
    pub per_packet_throughput_bps: Vec<f64>,
    pub harq: HarqOutcomeLog,
    pub mac_residual_rate: f64,
    pub sdus_submitted: u64,
    pub sdus_lost: u64,
    pub rlc_sdu_loss_rate: f64,
    pub files_arrived: u64,
    pub files_completed: u64,
    /// Files whose bytes can never be delivered (unrecoverable stream).
    pub e2e_file_loss_count: u64,
    pub cwnd: CwndSummary,
    pub events_executed: u64,
}

impl RunMetrics {
    pub fn mean_packet_throughput_bps(&self) -> Option<f64> {
        mean(&self.per_packet_throughput_bps)
    }
}

/// Goodput over the observation window.
pub fn user_throughput(delivered_bytes: u64, window: SimTime) -> Result<f64> {
    if window == SimTime::ZERO {
        return Err(Error::ZeroWindow);
    }
    Ok(delivered_bytes as f64 * 8.0 / window.as_secs_f64())
}

fn mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Mean and standard error (`sd / sqrt(n)`, sample sd). SE is NaN for one value.
pub fn mean_se(v: &[f64]) -> Result<(f64, f64)> {
    let m = mean(v).ok_or(Error::Empty("mean_se"))?;
    if v.len() < 2 {
        return Ok((m, f64::NAN));
    }
    let n = v.len() as f64;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    Ok((m, (var / n).sqrt()))
}

/// Step CDF: sorted values paired with cumulative fraction `i / n`.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::Empty("empirical_cdf"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    Ok(v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect())
}

/// Quantile `q` in [0, 1] by linear interpolation between order statistics.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("percentile"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub n_runs: usize,
    pub user_tput_mean: f64,
    pub user_tput_se: f64,
    /// Mean over all completed files of all runs.
    pub pkt_tput_mean: f64,
    /// Standard error of the per-run packet-throughput means.
    pub pkt_tput_se: f64,
    /// Residual losses over concluded TBs, pooled across runs.
    pub residual_rate: f64,
    pub residual_rate_se: f64,
    pub sdu_loss_rate: f64,
    pub sdu_loss_rate_se: f64,
    pub harq: HarqOutcomeLog,
}

/// Combines seeds of one configuration.
pub fn aggregate_seeds(runs: &[RunMetrics]) -> Result<Aggregate> {
    if runs.len() < 2 {
        return Err(Error::Empty("aggregate_seeds (two runs)"));
    }
    aggregate_runs(runs)
}

/// Like [`aggregate_seeds`] but accepts a single run (standard errors NaN).
pub fn aggregate_runs(runs: &[RunMetrics]) -> Result<Aggregate> {
    let first = runs.first().ok_or(Error::Empty("aggregate_runs"))?;
    if runs.iter().any(|r| r.config_key != first.config_key) {
        return Err(Error::MismatchedRuns);
    }
    let user: Vec<f64> = runs.iter().map(|r| r.user_throughput_bps).collect();
    let (user_tput_mean, user_tput_se) = mean_se(&user)?;

    let all_pkts: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.per_packet_throughput_bps.iter().copied())
        .collect();
    let per_run_pkt: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.mean_packet_throughput_bps())
        .collect();
    let pkt_tput_mean = mean(&all_pkts).unwrap_or(f64::NAN);
    let pkt_tput_se = if per_run_pkt.is_empty() {
        f64::NAN
    } else {
        mean_se(&per_run_pkt)?.1
    };

    let mut harq = HarqOutcomeLog::default();
    for r in runs {
        harq.merge(&r.harq);
    }
    let residual_rate = measured_residual_rate(&harq).unwrap_or(f64::NAN);
    let per_run_res: Vec<f64> = runs.iter().map(|r| r.mac_residual_rate).collect();
    let residual_rate_se = mean_se(&per_run_res)?.1;

    let submitted: u64 = runs.iter().map(|r| r.sdus_submitted).sum();
    let lost: u64 = runs.iter().map(|r| r.sdus_lost).sum();
    let sdu_loss_rate = if submitted == 0 {
        0.0
    } else {
        lost as f64 / submitted as f64
    };
    let per_run_sdu: Vec<f64> = runs.iter().map(|r| r.rlc_sdu_loss_rate).collect();
    let sdu_loss_rate_se = mean_se(&per_run_sdu)?.1;

    Ok(Aggregate {
        n_runs: runs.len(),
        user_tput_mean,
        user_tput_se,
        pkt_tput_mean,
        pkt_tput_se,
        residual_rate,
        residual_rate_se,
        sdu_loss_rate,
        sdu_loss_rate_se,
        harq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_with(concluded: u64, lost: u64) -> HarqOutcomeLog {
        HarqOutcomeLog {
            concluded,
            delivered: concluded - lost,
            residual_nack_ack: lost,
            ..Default::default()
        }
    }

    fn run(seed: u64, tput: f64) -> RunMetrics {
        RunMetrics {
            seed,
            config_key: "k".into(),
            user_throughput_bps: tput,
            ..Default::default()
        }
    }

    #[test]
    fn goodput_arithmetic() {
        let bytes = 560_000_000 / 8;
        assert_eq!(
            user_throughput(bytes, SimTime::from_secs(56)).unwrap(),
            10e6
        );
        assert_eq!(user_throughput(0, SimTime::from_secs(56)).unwrap(), 0.0);
        assert!(user_throughput(1, SimTime::ZERO).is_err());
    }

    #[test]
    fn two_seed_mean() {
        let a = aggregate_seeds(&[run(0, 10.0), run(1, 20.0)]).unwrap();
        assert_eq!(a.user_tput_mean, 15.0);
    }

    #[test]
    fn median_interpolates() {
        assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap(), 2.5);
    }

    #[test]
    fn constant_samples_degenerate_cdf() {
        let cdf = empirical_cdf(&[3.0; 4]).unwrap();
        assert!(cdf.iter().all(|&(x, _)| x == 3.0));
        assert_eq!(cdf.last().unwrap().1, 1.0);
        assert_eq!(percentile(&[3.0; 4], 0.05).unwrap(), 3.0);
    }

    #[test]
    fn uniform_fifth_percentile() {
        let mut rng = crate::sim::RngStream::new(3, "cdf");
        let v: Vec<f64> = (0..10_000).map(|_| rng.uniform()).collect();
        let p5 = percentile(&v, 0.05).unwrap();
        assert!((p5 - 0.05).abs() < 0.01, "{p5}");
    }

    #[test]
    fn empty_inputs_error() {
        assert!(empirical_cdf(&[]).is_err());
        assert!(percentile(&[], 0.5).is_err());
        assert!(aggregate_seeds(&[run(0, 1.0)]).is_err());
    }

    #[test]
    fn identical_runs_have_zero_variance() {
        let runs: Vec<_> = (0..5).map(|s| run(s, 42.0)).collect();
        let a = aggregate_seeds(&runs).unwrap();
        assert_eq!(a.user_tput_se, 0.0);
    }

    #[test]
    fn standard_error_formula() {
        let vals: Vec<f64> = (1..=10).map(f64::from).collect();
        let runs: Vec<_> = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| run(i as u64, v))
            .collect();
        let a = aggregate_seeds(&runs).unwrap();
        let m = 5.5;
        let sd = (vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 9.0).sqrt();
        assert!((a.user_tput_se - sd / 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn residual_rate_pooled_by_tb_count() {
        let mut a = run(0, 1.0);
        a.harq = log_with(1000, 1);
        a.mac_residual_rate = 1e-3;
        let mut b = run(1, 1.0);
        b.harq = log_with(9000, 0);
        let agg = aggregate_seeds(&[a, b]).unwrap();
        // Concatenated logs: 1 loss in 10 000 TBs, not the mean of 1e-3 and 0.
        assert_eq!(agg.residual_rate, 1e-4);
    }

    #[test]
    fn mismatched_configs_rejected() {
        let mut b = run(1, 1.0);
        b.config_key = "other".into();
        assert!(matches!(
            aggregate_seeds(&[run(0, 1.0), b]),
            Err(Error::MismatchedRuns)
        ));
    }
}
