use crate::error::{bail, Result};
use crate::math;
use crate::symbolic::Resolution;

/// Finite-depth stand-in for the vanishing ratios that force `N_k` to grow.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "rule", rename_all = "snake_case"))]
pub enum ThresholdRule {
    /// `θ(k) = scale / k`.
    Harmonic {
        scale: f64,
    },
    Constant {
        value: f64,
    },
}

impl ThresholdRule {
    pub fn theta(&self, k: usize) -> f64 {
        match *self {
            ThresholdRule::Harmonic { scale } => scale / k.max(1) as f64,
            ThresholdRule::Constant { value } => value,
        }
    }
}

/// How many good words go into a separated family.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "mode", rename_all = "snake_case"))]
pub enum FamilyMode {
    /// Every good word, one per separation class.
    Maximal,
    /// Good words closest to the target average first, stopping as soon as
    /// the weight bound holds.
    Sufficient { max_members: usize },
}

/// Parameters of the historic-set construction.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConstructionParams {
    pub gamma: f64,
    pub delta: f64,
    /// `ε = 2^-m`; needs `m ≥ 2` so that `4ε` is still a radius.
    pub eps: Resolution,
    /// `δ_k = delta_first · delta_ratio^(k-1)`.
    pub delta_first: f64,
    pub delta_ratio: f64,
    /// Smallest admissible `l_k`; the lag budget raises it further.
    pub l_base: usize,
    pub theta: ThresholdRule,
    pub family: FamilyMode,
    /// Largest `n_k` tried when searching for a level.
    pub n_cap: usize,
    pub depth: usize,
    /// Atoms checked per level; more atoms than this are sampled.
    pub atom_cap: usize,
    /// Forbid sampling: fail instead of checking a subset of atoms.
    pub seedless: bool,
}

impl ConstructionParams {
    pub fn new(gamma: f64, delta: f64, eps: Resolution) -> Self {
        ConstructionParams {
            gamma,
            delta,
            eps,
            delta_first: 0.95 * delta,
            delta_ratio: 0.95,
            l_base: 1,
            theta: ThresholdRule::Harmonic { scale: 1.0 },
            family: FamilyMode::Sufficient {
                max_members: 1 << 14,
            },
            n_cap: 512,
            depth: 3,
            atom_cap: 1 << 16,
            seedless: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            bail!(
                InvalidArgument,
                "gamma must be positive, got {}",
                self.gamma
            );
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            bail!(
                InvalidArgument,
                "delta must be positive, got {}",
                self.delta
            );
        }
        if self.eps.m() < 2 {
            bail!(
                InvalidArgument,
                "the construction needs eps = 2^-m with m >= 2, got m = {}",
                self.eps.m()
            );
        }
        if !(self.delta_first > 0.0 && self.delta_first < self.delta) {
            bail!(
                InvalidArgument,
                "delta_1 must lie in (0, delta), got {}",
                self.delta_first
            );
        }
        if !(self.delta_ratio > 0.0 && self.delta_ratio < 1.0) {
            bail!(
                InvalidArgument,
                "delta_ratio must lie in (0, 1), got {}",
                self.delta_ratio
            );
        }
        let theta_ok = match self.theta {
            ThresholdRule::Harmonic { scale } => scale > 0.0 && scale.is_finite(),
            ThresholdRule::Constant { value } => value > 0.0 && value.is_finite(),
        };
        if !theta_ok {
            bail!(InvalidArgument, "thresholds must be positive");
        }
        if let FamilyMode::Sufficient { max_members } = self.family {
            if max_members < 2 {
                bail!(
                    InvalidArgument,
                    "a family needs room for at least 2 members"
                );
            }
        }
        if self.depth < 2 {
            bail!(
                InvalidArgument,
                "the construction needs depth >= 2, got {}",
                self.depth
            );
        }
        if self.atom_cap < 2 {
            bail!(InvalidArgument, "atom_cap must be at least 2");
        }
        Ok(())
    }

    pub fn delta_k(&self, k: usize) -> f64 {
        self.delta_first * math::pow(self.delta_ratio, k.saturating_sub(1) as f64)
    }

    /// Which measure level `k` follows: 1 for odd `k`, 2 for even `k`.
    pub fn rho(k: usize) -> usize {
        ((k + 1) % 2) + 1
    }

    /// `l_k`: at least `l_base`, past `l_{k-1}`, and long enough that a lag of
    /// `lag` symbols uses less than `2^-k` of the window.
    pub fn l_k(&self, k: usize, lag: usize, previous: usize) -> usize {
        let budget = lag.saturating_mul(1usize << k.min(40)) + 1;
        self.l_base.max(budget).max(previous + 1)
    }

    /// Resolution the orbit segments are shadowed at: `ε/4`.
    pub fn glue_resolution(&self) -> Resolution {
        self.eps.finer(2)
    }

    /// Members of a family must differ within this many symbols past `n`:
    /// `(n, 4ε)`-separation in the dyadic metric.
    pub fn separation_lookahead(&self) -> usize {
        self.eps.m() as usize - 2
    }

    /// Resolution of the balls in the mass bound: `ε/2`.
    pub fn ball_resolution(&self) -> Resolution {
        self.eps.finer(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_alternates() {
        assert_eq!(ConstructionParams::rho(1), 1);
        assert_eq!(ConstructionParams::rho(2), 2);
        assert_eq!(ConstructionParams::rho(3), 1);
    }

    #[test]
    fn deltas_decrease_below_delta() {
        let p = ConstructionParams::new(0.14, 0.1, Resolution(2));
        p.validate().unwrap();
        assert!(p.delta_k(1) < p.delta);
        for k in 1..10 {
            assert!(p.delta_k(k + 1) < p.delta_k(k));
        }
    }

    #[test]
    fn l_k_respects_lag_budget() {
        let p = ConstructionParams::new(0.14, 0.1, Resolution(2));
        let l1 = p.l_k(1, 5, 0);
        let l2 = p.l_k(2, 5, l1);
        let l3 = p.l_k(3, 5, l2);
        assert_eq!((l1, l2, l3), (11, 21, 41));
        assert!(5.0 / (l3 as f64) < 0.125);
    }

    #[test]
    fn rejects_coarse_eps() {
        let p = ConstructionParams::new(0.14, 0.1, Resolution(1));
        assert!(p.validate().is_err());
    }

    #[test]
    fn harmonic_threshold() {
        let t = ThresholdRule::Harmonic { scale: 1.0 };
        assert_eq!(t.theta(1), 1.0);
        assert_eq!(t.theta(4), 0.25);
    }
}
