use alloc::vec;
use alloc::vec::Vec;

use super::family::SeparatedFamily;
use super::params::ThresholdRule;
use crate::error::{bail, Result};
use crate::math;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SlackEntry {
    pub k: usize,
    pub theta: f64,
    /// `(n_{k+1} + p_{k+1}) / N_k`.
    pub next_ratio: Option<f64>,
    /// `t_k / N_{k+1}`.
    pub history_ratio: Option<f64>,
}

/// Repetition counts `N_k` and the times `t_k = Σ_{i ≤ k} N_i (n_i + p_i)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Schedule {
    pub orders: Vec<usize>,
    pub lags: Vec<usize>,
    /// `N_1, …, N_K`.
    pub counts: Vec<usize>,
    /// `t_0 = 0, t_1, …, t_K`.
    pub times: Vec<u64>,
    pub slack: Vec<SlackEntry>,
    /// Every ratio is within its threshold.
    pub within_thresholds: bool,
    /// Both ratio sequences are nonincreasing in `k`.
    pub monotone: bool,
    /// Levels kept before `t_k` passed the length cap.
    pub achieved_depth: usize,
}

impl Schedule {
    pub fn depth(&self) -> usize {
        self.counts.len()
    }

    pub fn block_len(&self, k: usize) -> usize {
        self.orders[k - 1] + self.lags[k - 1]
    }

    /// The `k` with `t_k ≤ n < t_{k+1}`.
    pub fn level_of(&self, n: u64) -> Option<usize> {
        (1..self.times.len())
            .find(|&k| n < self.times[k])
            .map(|k| k - 1)
    }
}

/// Smallest counts with `(n_{k+1} + p_{k+1}) / N_k ≤ θ(k)` and
/// `t_{k-1} / N_k ≤ θ(k - 1)`, never decreasing. Levels whose time would
/// exceed `max_time` are dropped and `achieved_depth` records how far it got.
pub fn choose_schedule(
    families: &[SeparatedFamily],
    theta: ThresholdRule,
    max_time: u64,
) -> Result<Schedule> {
    if families.len() < 2 {
        bail!(
            InvalidArgument,
            "a schedule needs at least two levels, got {}",
            families.len()
        );
    }
    let orders: Vec<usize> = families.iter().map(|f| f.n).collect();
    let lags: Vec<usize> = families.iter().map(|f| f.lag).collect();
    let depth = families.len();
    let need = |a: f64, t: f64| math::ceil(a / t - 1e-9).max(0.0) as u64;
    let mut counts: Vec<usize> = Vec::with_capacity(depth);
    let mut times = vec![0u64];
    for k in 1..=depth {
        let mut nk = counts.last().copied().unwrap_or(0).max(1) as u64;
        if k < depth {
            nk = nk.max(need((orders[k] + lags[k]) as f64, theta.theta(k)));
        }
        if k >= 2 {
            nk = nk.max(need(times[k - 1] as f64, theta.theta(k - 1)));
        }
        let t = (nk as u128) * (orders[k - 1] + lags[k - 1]) as u128 + times[k - 1] as u128;
        if t > max_time as u128 {
            break;
        }
        counts.push(nk as usize);
        times.push(t as u64);
    }
    let achieved = counts.len();
    let mut slack = Vec::with_capacity(achieved);
    let mut within = true;
    for k in 1..=achieved {
        let next_ratio = (k < depth).then(|| (orders[k] + lags[k]) as f64 / counts[k - 1] as f64);
        let history_ratio = (k < achieved).then(|| times[k] as f64 / counts[k] as f64);
        let th = theta.theta(k);
        within &= next_ratio.is_none_or(|r| r <= th + 1e-12)
            && history_ratio.is_none_or(|r| r <= th + 1e-12);
        slack.push(SlackEntry {
            k,
            theta: th,
            next_ratio,
            history_ratio,
        });
    }
    let nonincreasing = |vals: Vec<f64>| vals.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let monotone = nonincreasing(slack.iter().filter_map(|s| s.next_ratio).collect())
        && nonincreasing(slack.iter().filter_map(|s| s.history_ratio).collect());
    Ok(Schedule {
        orders,
        lags,
        counts,
        times,
        slack,
        within_thresholds: within,
        monotone,
        achieved_depth: achieved,
    })
}
