use crate::sim::SimTime;

/// `K = cbrt(w_max * beta / C)`: seconds until the window climbs back to `w_max`.
pub fn cubic_k(w_max: f64, beta: f64, c: f64) -> f64 {
    (w_max * beta / c).cbrt()
}

/// `W(t) = C (t - K)^3 + w_max`, in MSS.
pub fn cubic_window(t_since_epoch_s: f64, w_max: f64, k: f64, c: f64) -> f64 {
    let d = t_since_epoch_s - k;
    c * d * d * d + w_max
}

/// One CUBIC growth epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicEpoch {
    pub start: SimTime,
    pub w_max: f64,
    pub k: f64,
    /// The window (fast recovery) or ssthresh (timeout) set at the loss.
    pub reduced_to: f64,
    /// False for an epoch opened on entering congestion avoidance without
    /// a preceding loss; those have `k = 0`.
    pub from_loss: bool,
}

impl CubicEpoch {
    pub fn after_loss(start: SimTime, w_max: f64, beta: f64, c: f64) -> Self {
        CubicEpoch {
            start,
            w_max,
            k: cubic_k(w_max, beta, c),
            reduced_to: (1.0 - beta) * w_max,
            from_loss: true,
        }
    }

    pub fn plateau(start: SimTime, cwnd: f64) -> Self {
        CubicEpoch {
            start,
            w_max: cwnd,
            k: 0.0,
            reduced_to: cwnd,
            from_loss: false,
        }
    }

    pub fn window_at(&self, t_since_epoch_s: f64, c: f64) -> f64 {
        cubic_window(t_since_epoch_s, self.w_max, self.k, c)
    }
}
