//! Orbit gluing with exact shadowing.
//!
//! A segment meant to be shadowed for `n` steps at radius `2^-m` is given as
//! a word of length `n + m` (the orbit window plus `m` symbols of lookahead).
//! Gluing copies each segment verbatim and joins consecutive segments by the
//! lexicographically smallest admissible connector, so every window of the
//! glued word agrees with its segment and the Bowen distance is zero on it.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::symbolic::{bowen_distance_words, Dyadic, Resolution, SymbolicSystem, Word};

/// A gap rule `p(x, n, ε)`: how many steps must separate the end of an orbit
/// segment of length `n` starting at `x` from the start of the next one.
pub trait LagRule {
    fn lag(&self, word: &[u8], n: usize) -> usize;

    /// The resolution the rule is valid for.
    fn resolution(&self) -> Resolution;
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum LagKind {
    /// `p = base + m`: a primitive SFT with `A^base > 0` needs `base` steps to
    /// connect any two symbols, plus the `m` lookahead symbols of the window.
    Constant { base: usize },
    /// `p(n) = by_order[n - 1]`, with the last entry reused beyond the table.
    Table { by_order: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LagFunction {
    pub kind: LagKind,
    pub eps: Resolution,
}

impl LagFunction {
    pub fn constant(base: usize, eps: Resolution) -> Result<Self> {
        if base == 0 {
            bail!(InvalidArgument, "a constant lag must be at least 1");
        }
        Ok(LagFunction {
            kind: LagKind::Constant { base },
            eps,
        })
    }

    pub fn table(by_order: Vec<usize>, eps: Resolution) -> Result<Self> {
        if by_order.is_empty() || by_order.contains(&0) {
            bail!(InvalidArgument, "a lag table needs positive entries");
        }
        Ok(LagFunction {
            kind: LagKind::Table { by_order },
            eps,
        })
    }

    /// Tabulates `f(n)` for `n = 1 ..= n_max`.
    pub fn table_from_fn(
        n_max: usize,
        eps: Resolution,
        f: impl Fn(usize) -> usize,
    ) -> Result<Self> {
        Self::table((1..=n_max).map(f).collect(), eps)
    }

    /// The same rule at another resolution. Only the constant kind knows how
    /// to move between resolutions.
    pub fn at(&self, eps: Resolution) -> Result<Self> {
        match &self.kind {
            LagKind::Constant { base } => Self::constant(*base, eps),
            LagKind::Table { .. } if eps == self.eps => Ok(self.clone()),
            LagKind::Table { .. } => bail!(
                InvalidArgument,
                "a lag table is only valid at its own resolution"
            ),
        }
    }

    pub fn value(&self, n: usize) -> usize {
        match &self.kind {
            LagKind::Constant { base } => base + self.eps.m() as usize,
            LagKind::Table { by_order } => by_order[n.clamp(1, by_order.len()) - 1],
        }
    }
}

impl LagRule for LagFunction {
    fn lag(&self, _word: &[u8], n: usize) -> usize {
        self.value(n)
    }

    fn resolution(&self) -> Resolution {
        self.eps
    }
}

/// The constant lag of a primitive SFT: the least `M` with `A^M > 0`, at
/// resolution `2^0`.
pub fn mixing_lag(sys: &SymbolicSystem) -> Result<LagFunction> {
    LagFunction::constant(sys.mixing_exponent()?, Resolution(0))
}

/// Orbit segments and the gaps between them.
#[derive(Clone, Debug, PartialEq)]
pub struct GluingSpec {
    /// Segment `i` has length `orders[i] + m`.
    pub segments: Vec<Word>,
    pub orders: Vec<usize>,
    pub gaps: Vec<usize>,
    pub eps: Resolution,
}

impl GluingSpec {
    pub fn new(
        segments: Vec<Word>,
        orders: Vec<usize>,
        gaps: Vec<usize>,
        eps: Resolution,
    ) -> Result<Self> {
        if segments.is_empty() {
            bail!(InvalidArgument, "nothing to glue");
        }
        if orders.len() != segments.len() {
            bail!(
                InvalidArgument,
                "{} orders for {} segments",
                orders.len(),
                segments.len()
            );
        }
        if gaps.len() + 1 != segments.len() {
            bail!(
                InvalidArgument,
                "{} gaps for {} segments",
                gaps.len(),
                segments.len()
            );
        }
        let m = eps.m() as usize;
        for (i, (s, &n)) in segments.iter().zip(&orders).enumerate() {
            if n == 0 {
                bail!(InvalidArgument, "segment {i} has order 0");
            }
            if s.len() != n + m {
                bail!(
                    InvalidArgument,
                    "segment {i} has length {}, expected order {n} plus {m} lookahead symbols",
                    s.len()
                );
            }
        }
        for (i, &g) in gaps.iter().enumerate() {
            if g < m {
                bail!(
                    InvalidArgument,
                    "gap {i} is {g}, shorter than the {m} lookahead symbols"
                );
            }
        }
        Ok(GluingSpec {
            segments,
            orders,
            gaps,
            eps,
        })
    }

    /// Segments of order `len - m` each, separated by a constant gap.
    pub fn uniform(segments: Vec<Word>, gap: usize, eps: Resolution) -> Result<Self> {
        let m = eps.m() as usize;
        let mut orders = Vec::with_capacity(segments.len());
        for (i, s) in segments.iter().enumerate() {
            if s.len() <= m {
                bail!(
                    InvalidArgument,
                    "segment {i} is not longer than the {m} lookahead symbols"
                );
            }
            orders.push(s.len() - m);
        }
        let gaps = alloc::vec![gap; segments.len().saturating_sub(1)];
        Self::new(segments, orders, gaps, eps)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct WindowCheck {
    pub offset: usize,
    pub order: usize,
    /// Bowen distance of order `order` between the glued word and the segment
    /// on the window.
    pub distance: Dyadic,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ShadowCertificate {
    pub glued: Word,
    pub offsets: Vec<usize>,
    pub windows: Vec<WindowCheck>,
    pub eps: Resolution,
    /// Every gap is at least the lag demanded by the supplied rule.
    pub gaps_meet_lag: bool,
    pub verified: bool,
}

/// Glues the segments, choosing the lexicographically smallest connector of
/// `gap - m` symbols after each one, and checks every window.
pub fn glue(
    spec: &GluingSpec,
    sys: &SymbolicSystem,
    lag: Option<&dyn LagRule>,
) -> Result<ShadowCertificate> {
    let m = spec.eps.m() as usize;
    for s in &spec.segments {
        sys.check_word(s.symbols())?;
    }
    let total: usize = spec.segments.iter().map(Word::len).sum::<usize>()
        + spec.gaps.iter().map(|g| g - m).sum::<usize>();
    let mut z = Vec::with_capacity(total);
    let mut offsets = Vec::with_capacity(spec.segments.len());
    let mut offset = 0;
    for (i, seg) in spec.segments.iter().enumerate() {
        offsets.push(offset);
        if i > 0 {
            let gap = spec.gaps[i - 1];
            let from = *z.last().expect("previous segment is nonempty");
            let conn = sys.connector(from, seg.symbols()[0], gap - m + 1)?;
            z.extend_from_slice(conn.symbols());
        }
        z.extend_from_slice(seg.symbols());
        offset += spec.orders[i] + spec.gaps.get(i).copied().unwrap_or(0);
    }
    let gaps_meet_lag = match lag {
        None => true,
        Some(rule) => {
            if rule.resolution() != spec.eps {
                bail!(
                    InvalidArgument,
                    "lag rule is for resolution 2^-{}, gluing uses 2^-{m}",
                    rule.resolution().m()
                );
            }
            spec.gaps
                .iter()
                .enumerate()
                .all(|(i, &g)| g >= rule.lag(spec.segments[i].symbols(), spec.orders[i]))
        }
    };
    let windows: Vec<WindowCheck> = spec
        .segments
        .iter()
        .zip(&spec.orders)
        .zip(&offsets)
        .map(|((seg, &n), &o)| WindowCheck {
            offset: o,
            order: n,
            distance: bowen_distance_words(&z[o..o + n + m], seg.symbols(), n),
        })
        .collect();
    let radius = spec.eps.radius();
    let verified = sys.is_admissible(&z)
        && windows
            .iter()
            .all(|w| w.distance < radius && w.distance == Dyadic::Zero);
    Ok(ShadowCertificate {
        glued: Word::new(z),
        offsets,
        windows,
        eps: spec.eps,
        gaps_meet_lag,
        verified,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LagDensityReport {
    /// `(n, p(n) / n)` for `n = 1 ..= n_max`.
    pub ratios: Vec<(usize, f64)>,
    pub max_ratio: f64,
    pub final_ratio: f64,
    /// `p(n) / n` keeps shrinking over the second half of the range.
    pub vanishing: bool,
    /// With a level `k`: the least `l` with `p(n) / n < 2^-k` on `[l, n_max]`.
    pub budget_start: Option<usize>,
    pub budget_exhausted: bool,
    pub note: String,
}

/// Tabulates `p(n) / n` up to `n_max` for a fixed word and flags densities
/// that fail to vanish. With `level = Some(k)`, also finds where the ratio
/// drops below `2^-k` for good.
pub fn verify_lag_density(
    lag: &dyn LagRule,
    word: &[u8],
    n_max: usize,
    level: Option<u32>,
) -> Result<LagDensityReport> {
    if n_max < 2 {
        bail!(InvalidArgument, "n_max must be at least 2");
    }
    let ratios: Vec<(usize, f64)> = (1..=n_max)
        .map(|n| (n, lag.lag(word, n) as f64 / n as f64))
        .collect();
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let final_ratio = ratios[n_max - 1].1;
    let half = &ratios[n_max / 2 - 1..];
    let half_max = half.iter().map(|r| r.1).fold(0.0, f64::max);
    let vanishing = final_ratio <= 0.9 * half_max;
    let (budget_start, budget_exhausted) = match level {
        None => (None, false),
        Some(k) => {
            let budget = libm::ldexp(1.0, -(k as i32));
            let start = ratios
                .iter()
                .rposition(|r| r.1 >= budget)
                .map_or(1, |i| i + 2);
            if start > n_max {
                (None, true)
            } else {
                (Some(start), false)
            }
        }
    };
    let note = if vanishing {
        String::from("p(n)/n decreasing over the tested range")
    } else {
        alloc::format!("p(n)/n does not decrease: {final_ratio} at n = {n_max}")
    };
    Ok(LagDensityReport {
        ratios,
        max_ratio,
        final_ratio,
        vanishing,
        budget_start,
        budget_exhausted,
        note,
    })
}

impl ShadowCertificate {
    pub fn ensure_verified(&self) -> Result<()> {
        if self.verified {
            return Ok(());
        }
        let bad: Vec<usize> = self
            .windows
            .iter()
            .filter(|w| w.distance != Dyadic::Zero)
            .map(|w| w.offset)
            .collect();
        Err(Error::Construction(alloc::format!(
            "glued word fails the window checks at offsets {bad:?}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::PointRep;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        Word::parse(s).unwrap()
    }

    #[test]
    fn mixing_lag_examples() {
        assert_eq!(
            mixing_lag(&SymbolicSystem::full_shift(2)).unwrap().value(5),
            1
        );
        assert_eq!(
            mixing_lag(&SymbolicSystem::golden_mean()).unwrap().value(5),
            2
        );
        let chord = SymbolicSystem::new(
            3,
            alloc::vec![
                alloc::vec![0, 1, 0],
                alloc::vec![0, 0, 1],
                alloc::vec![1, 1, 0]
            ],
            "c",
        )
        .unwrap();
        let lag = mixing_lag(&chord).unwrap();
        // Repeated boolean squaring oracle.
        let a = chord.transition_rows();
        let positive = |p: usize| {
            let mut cur: Vec<Vec<bool>> =
                (0..3).map(|i| (0..3).map(|j| i == j).collect()).collect();
            for _ in 0..p {
                cur = (0..3)
                    .map(|i| {
                        (0..3)
                            .map(|j| (0..3).any(|l| cur[i][l] && a[l][j] == 1))
                            .collect()
                    })
                    .collect();
            }
            cur.iter().flatten().all(|&b| b)
        };
        let mv = lag.value(1);
        assert!(positive(mv) && !positive(mv - 1));
        assert!(mixing_lag(
            &SymbolicSystem::new(2, alloc::vec![alloc::vec![0, 1], alloc::vec![1, 0]], "f")
                .unwrap()
        )
        .is_err());
    }

    #[test]
    fn gap_zero_is_concatenation() {
        let sys = SymbolicSystem::full_shift(2);
        let spec = GluingSpec::uniform(alloc::vec![w("000"), w("111")], 0, Resolution(0)).unwrap();
        let cert = glue(&spec, &sys, None).unwrap();
        assert_eq!(cert.glued, w("000111"));
        assert!(cert.verified);
        assert_eq!(cert.offsets, alloc::vec![0, 3]);
    }

    #[test]
    fn golden_mean_connector() {
        let sys = SymbolicSystem::golden_mean();
        let spec = GluingSpec::uniform(alloc::vec![w("101"), w("010")], 1, Resolution(0)).unwrap();
        let lag = mixing_lag(&sys).unwrap();
        let cert = glue(&spec, &sys, Some(&lag)).unwrap();
        assert_eq!(cert.glued, w("1010010"));
        // Two transitions suffice here, though the uniform lag asks for a gap of 2.
        assert!(cert.verified && !cert.gaps_meet_lag);
        let spec = GluingSpec::uniform(alloc::vec![w("101"), w("010")], 2, Resolution(0)).unwrap();
        let cert = glue(&spec, &sys, Some(&lag)).unwrap();
        assert_eq!(cert.glued, w("10100010"));
        assert!(cert.verified && cert.gaps_meet_lag);
        let spec = GluingSpec::uniform(alloc::vec![w("101"), w("101")], 0, Resolution(0)).unwrap();
        assert!(matches!(
            glue(&spec, &sys, None),
            Err(Error::NoConnector { .. })
        ));
    }

    #[test]
    fn offsets_bookkeeping() {
        let sys = SymbolicSystem::full_shift(2);
        let m = 2u32;
        let segs: Vec<Word> = (0..5)
            .map(|i| Word::new(alloc::vec![(i % 2) as u8; 4 + m as usize]))
            .collect();
        let spec = GluingSpec::uniform(segs, 3, Resolution(m)).unwrap();
        let cert = glue(&spec, &sys, None).unwrap();
        assert_eq!(cert.offsets, (0..5).map(|i| i * 7).collect::<Vec<_>>());
        assert_eq!(cert.glued.len(), 5 * 4 + 4 * 3 + m as usize);
        assert!(cert.verified);
    }

    #[test]
    fn short_gap_is_rejected() {
        assert!(GluingSpec::uniform(alloc::vec![w("0000"), w("1111")], 1, Resolution(2)).is_err());
    }

    #[test]
    fn lag_density_examples() {
        let constant = LagFunction::constant(2, Resolution(0)).unwrap();
        let r = verify_lag_density(&constant, &[], 64, None).unwrap();
        assert_eq!(r.max_ratio, 2.0);
        assert_eq!(r.final_ratio, 1.0 / 32.0);
        assert!(r.vanishing);
        let sqrt = LagFunction::table_from_fn(256, Resolution(0), |n| {
            libm::ceil(libm::sqrt(n as f64)) as usize
        })
        .unwrap();
        assert!(verify_lag_density(&sqrt, &[], 256, None).unwrap().vanishing);
        let half = LagFunction::table_from_fn(64, Resolution(0), |n| (n / 2).max(1)).unwrap();
        let r = verify_lag_density(&half, &[], 64, Some(3)).unwrap();
        assert!(!r.vanishing && r.budget_exhausted);
        let r = verify_lag_density(&constant, &[], 64, Some(3)).unwrap();
        assert_eq!(r.budget_start, Some(17));
    }

    #[test]
    fn shadowing_holds_for_points() {
        // The glued word, continued periodically, shadows each segment's point.
        let sys = SymbolicSystem::golden_mean();
        let m = 1;
        let spec = GluingSpec::uniform(
            alloc::vec![w("0100"), w("1010"), w("0010")],
            3,
            Resolution(m),
        )
        .unwrap();
        let cert = glue(&spec, &sys, None).unwrap();
        let z = PointRep::new(&sys, cert.glued.clone(), w("0")).unwrap();
        for (seg, &o) in spec.segments.iter().zip(&cert.offsets) {
            let x = PointRep::new(&sys, seg.clone(), w("0")).unwrap();
            let d =
                crate::symbolic::bowen_distance(&sys, &z.shift_by(o), &x, seg.len() - m as usize)
                    .unwrap();
            assert!(d < Resolution(m).radius());
        }
    }

    fn golden_word(len: usize) -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..2, len).prop_map(|mut v| {
            for i in 1..v.len() {
                if v[i - 1] == 1 {
                    v[i] = 0;
                }
            }
            v
        })
    }

    proptest! {
        #[test]
        fn gluing_is_associative(a in golden_word(5), b in golden_word(6), c in golden_word(4), gap in 2usize..5) {
            let sys = SymbolicSystem::golden_mean();
            let eps = Resolution(1);
            let (a, b, c) = (Word::new(a), Word::new(b), Word::new(c));
            let all = glue(&GluingSpec::uniform(alloc::vec![a.clone(), b.clone(), c.clone()], gap, eps).unwrap(), &sys, None).unwrap();
            let ab = glue(&GluingSpec::uniform(alloc::vec![a, b], gap, eps).unwrap(), &sys, None).unwrap();
            let abc = glue(&GluingSpec::uniform(alloc::vec![ab.glued, c], gap, eps).unwrap(), &sys, None).unwrap();
            prop_assert_eq!(all.glued, abc.glued);
            prop_assert!(all.verified && abc.verified);
        }
    }
}
