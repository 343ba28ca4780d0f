//! Closed-form residual error after HARQ and the design-target grid.

use crate::error::{check_prob, Error, Result};
use crate::link::ErrorModelParams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualErrorResult {
    pub p_re_exact: f64,
    pub p_re_approx: f64,
    pub p_gu: f64,
    /// NACK→ACK, DTX→ACK, give-up and ACK→NACK contributions, in that order.
    pub terms: [f64; 4],
}

/// Probability that all `n` transmissions fail: `p_e^n`.
pub fn give_up_prob(p_e: f64, n: u32) -> f64 {
    p_e.powi(n as i32)
}

pub fn residual_error_exact(p: &ErrorModelParams) -> Result<ResidualErrorResult> {
    p.validate()?;
    let p_gu = give_up_prob(p.p_e, p.give_up_exponent());
    let terms = [
        (1.0 - p.p_ch) * p.p_e * p.p_na,
        p.p_ch * p.p_da,
        p_gu,
        (1.0 - p.p_ch) * (1.0 - p.p_e) * p.p_an,
    ];
    Ok(ResidualErrorResult {
        p_re_exact: terms.iter().sum(),
        p_re_approx: terms[0] + terms[1],
        p_gu,
        terms,
    })
}

/// Two dominant terms only: `(1 - p_ch) p_e p_na + p_ch p_da`.
pub fn residual_error_approx(p: &ErrorModelParams) -> Result<f64> {
    p.validate()?;
    Ok((1.0 - p.p_ch) * p.p_e * p.p_na + p.p_ch * p.p_da)
}

/// The NACK→ACK probability that puts the two-term approximation at `target`.
pub fn p_na_for_target(target: f64, p_ch: f64, p_e: f64, p_da: f64) -> Result<f64> {
    check_prob("p_ch", p_ch)?;
    check_prob("p_e", p_e)?;
    check_prob("p_da", p_da)?;
    let denom = (1.0 - p_ch) * p_e;
    let p_na = (target - p_ch * p_da) / denom;
    if !(0.0..=1.0).contains(&p_na) || !p_na.is_finite() {
        return Err(Error::Unreachable { target, p_na });
    }
    Ok(p_na)
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegradationGrid {
    pub p_na: Vec<f64>,
    pub p_da: Vec<f64>,
    /// `loss_pct[i][j]`: throughput loss in percent at `(p_na[i], p_da[j])`.
    pub loss_pct: Vec<Vec<f64>>,
}

impl DegradationGrid {
    /// Cells whose degradation stays below `level` percent.
    pub fn within(&self, level: f64) -> Vec<Vec<bool>> {
        self.loss_pct
            .iter()
            .map(|row| row.iter().map(|&v| v < level).collect())
            .collect()
    }

    /// For each `p_da` column, the largest `p_na` still below `level`.
    pub fn boundary(&self, level: f64) -> Vec<(f64, Option<f64>)> {
        let ok = self.within(level);
        self.p_da
            .iter()
            .enumerate()
            .map(|(j, &p_da)| {
                let best = (0..self.p_na.len())
                    .rev()
                    .find(|&i| ok[i][j])
                    .map(|i| self.p_na[i]);
                (p_da, best)
            })
            .collect()
    }

    /// Non-decreasing along both axes, allowing `slack` percentage points.
    pub fn is_monotone(&self, slack: f64) -> bool {
        let m = &self.loss_pct;
        (0..m.len()).all(|i| {
            (0..m[i].len()).all(|j| {
                (i == 0 || m[i][j] + slack >= m[i - 1][j])
                    && (j == 0 || m[i][j] + slack >= m[i][j - 1])
            })
        })
    }

    /// Every cell below a "within" cell is also "within".
    pub fn is_downward_closed(&self, level: f64) -> bool {
        let ok = self.within(level);
        (0..ok.len()).all(|i| {
            (0..ok[i].len())
                .all(|j| !ok[i][j] || ((i == 0 || ok[i - 1][j]) && (j == 0 || ok[i][j - 1])))
        })
    }
}

/// Evaluates `tput(p_na, p_da)` on the grid and converts to percent loss
/// relative to `baseline`.
pub fn degradation_grid<F>(
    baseline: f64,
    p_na: &[f64],
    p_da: &[f64],
    mut tput: F,
) -> Result<DegradationGrid>
where
    F: FnMut(f64, f64) -> f64,
{
    if p_na.len() < 2 || p_da.len() < 2 {
        return Err(Error::Config(
            "degradation grid must be at least 2x2".into(),
        ));
    }
    if baseline <= 0.0 {
        return Err(Error::Config(
            "degradation baseline throughput must be > 0".into(),
        ));
    }
    let loss_pct = p_na
        .iter()
        .map(|&na| {
            p_da.iter()
                .map(|&da| 100.0 * (1.0 - tput(na, da) / baseline))
                .collect()
        })
        .collect();
    Ok(DegradationGrid {
        p_na: p_na.to_vec(),
        p_da: p_da.to_vec(),
        loss_pct,
    })
}
