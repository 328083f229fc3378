//! Separated families `Θ_k` and their weights `M_k = Σ exp S_{n_k} ψ`.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::ops::Range;

use super::good::GoodSet;
use super::params::FamilyMode;
use crate::error::{bail, Error, Result};
use crate::math;
use crate::symbolic::{first_difference_words, Resolution, SymbolicSystem, Word};
use crate::thermo::Potential;
use crate::DEFAULT_ENUMERATION_CAP;

/// Block lengths of a family built from two glued blocks.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CompositeParts {
    pub n1: usize,
    pub gap: usize,
    pub n2: usize,
    /// Convex weight of the first block.
    pub w1: f64,
    pub log_mass1: f64,
    pub log_mass2: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SeparatedFamily {
    pub k: usize,
    pub n: usize,
    /// Resolution the members are shadowed at when glued.
    pub eps: Resolution,
    /// Gap after every member when glued.
    pub lag: usize,
    /// Distinct members must differ within this many symbols.
    pub separation_depth: usize,
    /// Sorted segments of length `n + m`.
    pub members: Vec<Word>,
    /// `S_n ψ` of each member (for composites, the sum over both blocks).
    pub log_weights: Vec<f64>,
    /// `log M_k`.
    pub log_mass: f64,
    /// The rate `log M_k / n_k` is compared against.
    pub rate_bound: f64,
    pub composite: Option<CompositeParts>,
}

impl SeparatedFamily {
    /// A family from explicit segments. Weights are `S_n ψ` of each segment.
    #[allow(clippy::too_many_arguments)]
    pub fn from_words(
        sys: &SymbolicSystem,
        psi: &Potential,
        k: usize,
        n: usize,
        eps: Resolution,
        lag: usize,
        separation_depth: usize,
        mut words: Vec<Word>,
    ) -> Result<Self> {
        let m = eps.m() as usize;
        if words.is_empty() {
            bail!(InvalidArgument, "a family needs at least one member");
        }
        if n == 0 || lag < m {
            bail!(
                InvalidArgument,
                "need n >= 1 and a lag of at least m = {m}, got n = {n}, lag = {lag}"
            );
        }
        if psi.range() > m + 1 {
            bail!(
                InvalidPotential,
                "weights need range <= {} at this resolution, got {}",
                m + 1,
                psi.range()
            );
        }
        for w in &words {
            if w.len() != n + m {
                bail!(
                    InvalidArgument,
                    "member {w} has length {}, expected {}",
                    w.len(),
                    n + m
                );
            }
            sys.check_word(w.symbols())?;
        }
        words.sort();
        let log_weights: Vec<f64> = words
            .iter()
            .map(|w| psi.birkhoff_sum_unchecked(w.symbols(), n))
            .collect();
        let log_mass = math::log_sum_exp(&log_weights);
        Ok(SeparatedFamily {
            k,
            n,
            eps,
            lag,
            separation_depth,
            members: words,
            log_weights,
            log_mass,
            rate_bound: f64::NEG_INFINITY,
            composite: None,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn seg_len(&self) -> usize {
        self.n + self.eps.m() as usize
    }

    /// Length of one glued block: the orbit window plus the gap.
    pub fn block_len(&self) -> usize {
        self.n + self.lag
    }

    pub fn rate(&self) -> f64 {
        self.log_mass / self.n as f64
    }

    pub fn meets_bound(&self) -> bool {
        self.rate() >= self.rate_bound
    }

    /// First adjacent pair (in sorted order) agreeing on `separation_depth`
    /// symbols. Adjacent pairs have the longest common prefixes, so `None`
    /// certifies every pair.
    pub fn separation_witness(&self) -> Option<(usize, usize)> {
        (1..self.members.len()).find_map(|i| {
            let lcp =
                first_difference_words(self.members[i - 1].symbols(), self.members[i].symbols())
                    .unwrap_or(self.seg_len());
            (lcp >= self.separation_depth).then_some((i - 1, i))
        })
    }

    /// Members starting with `u`, as an index range into the sorted list.
    pub fn prefix_range(&self, u: &[u8]) -> Range<usize> {
        let lo = self
            .members
            .partition_point(|w| &w.symbols()[..u.len().min(w.len())] < u);
        let hi = self
            .members
            .partition_point(|w| &w.symbols()[..u.len().min(w.len())] <= u);
        lo..hi
    }

    /// `log Σ_{x ∈ range} exp S_n ψ(x)`.
    pub fn log_weight_of(&self, range: Range<usize>) -> f64 {
        math::log_sum_exp(&self.log_weights[range])
    }

    /// The same family with its first member listed twice. Used to check that
    /// the construction notices a family that is not separated.
    pub fn with_duplicate(&self) -> Self {
        let mut out = self.clone();
        out.members.insert(0, out.members[0].clone());
        out.log_weights.insert(0, out.log_weights[0]);
        out.log_mass = math::log_sum_exp(&out.log_weights);
        out
    }
}

/// Picks the separated family of a good set and compares `log M_k / n_k`
/// against `rate_bound`.
///
/// Good words are taken closest average first. Each one is extended by the
/// smallest admissible continuation to a segment of length `n + m`, and only
/// the first word of each separation class is kept. `Maximal` keeps every
/// class; `Sufficient` stops once the bound holds with at least two members.
#[allow(clippy::too_many_arguments)]
pub fn select_separated_family(
    good: &GoodSet,
    sys: &SymbolicSystem,
    phi: &Potential,
    psi: &Potential,
    eps: Resolution,
    separation_lookahead: usize,
    rate_bound: f64,
    mode: FamilyMode,
) -> Result<SeparatedFamily> {
    let n = good.n;
    let m = eps.m() as usize;
    let seg_len = n + m;
    if good.word_len > seg_len {
        bail!(
            InvalidPotential,
            "phi has range {} but segments only fix {m} extra symbols",
            phi.range()
        );
    }
    if psi.range() > m + 1 {
        bail!(
            InvalidPotential,
            "psi has range {} but segments only fix {m} extra symbols",
            psi.range()
        );
    }
    let sep = n + separation_lookahead;
    let cap = match mode {
        FamilyMode::Maximal => DEFAULT_ENUMERATION_CAP as usize,
        FamilyMode::Sufficient { max_members } => max_members,
    };
    let target = n as f64 * rate_bound;
    let mut seen: BTreeSet<Vec<u8>> = BTreeSet::new();
    let mut members: Vec<Word> = Vec::new();
    let mut log_mass = f64::NEG_INFINITY;
    let mut overflow = false;
    good.for_each_word(sys, phi, |w| {
        let mut seg = w.to_vec();
        let tail = sys.smallest_continuation(seg.last().copied(), seg_len - seg.len());
        seg.extend_from_slice(&tail);
        if sep < seg_len && !seen.insert(seg[..sep].to_vec()) {
            return true;
        }
        log_mass = math::log_add(log_mass, psi.birkhoff_sum_unchecked(&seg, n));
        members.push(Word::new(seg));
        if members.len() >= cap {
            overflow = matches!(mode, FamilyMode::Maximal);
            return false;
        }
        !(matches!(mode, FamilyMode::Sufficient { .. }) && members.len() >= 2 && log_mass >= target)
    });
    if overflow {
        return Err(Error::EnumerationCap {
            cap: cap as u64,
            requested: good.word_count() as u128,
        });
    }
    if members.is_empty() {
        bail!(
            Construction,
            "level {} has no good words at n = {n}",
            good.k
        );
    }
    let mut fam =
        SeparatedFamily::from_words(sys, psi, good.k, n, eps, good.lag.max(m), sep, members)?;
    fam.rate_bound = rate_bound;
    Ok(fam)
}

/// Glues every member of `first` to every member of `second` with the lag of
/// the first block, giving a family of length `n1 + gap + n2`. Weights
/// multiply; the connector symbols are not weighted.
pub fn compose_block(
    sys: &SymbolicSystem,
    first: &SeparatedFamily,
    second: &SeparatedFamily,
    w1: f64,
    n_hat: usize,
    lag: usize,
) -> Result<SeparatedFamily> {
    if !(w1 > 0.0 && w1 < 1.0) {
        bail!(
            InvalidArgument,
            "the block weight must lie in (0, 1), got {w1}"
        );
    }
    if first.eps != second.eps {
        bail!(
            InvalidArgument,
            "blocks are shadowed at different resolutions"
        );
    }
    let n1 = math::floor(w1 * n_hat as f64) as usize;
    let n2 = math::floor((1.0 - w1) * n_hat as f64) as usize;
    if first.n != n1 || second.n != n2 {
        bail!(
            InvalidArgument,
            "block lengths ({}, {}) do not split {n_hat} as ({n1}, {n2})",
            first.n,
            second.n
        );
    }
    let m = first.eps.m() as usize;
    let gap = first.lag;
    let n = n1 + gap + n2;
    let mut members = Vec::with_capacity(first.len() * second.len());
    let mut log_weights = Vec::with_capacity(members.capacity());
    for (x, &wx) in first.members.iter().zip(&first.log_weights) {
        for (y, &wy) in second.members.iter().zip(&second.log_weights) {
            let conn = sys.connector(*x.symbols().last().unwrap(), y.symbols()[0], gap - m + 1)?;
            let mut seg = Vec::with_capacity(n + m);
            seg.extend_from_slice(x.symbols());
            seg.extend_from_slice(conn.symbols());
            seg.extend_from_slice(y.symbols());
            members.push(Word::new(seg));
            log_weights.push(wx + wy);
        }
    }
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| members[a].cmp(&members[b]));
    let members: Vec<Word> = order.iter().map(|&i| members[i].clone()).collect();
    let log_weights: Vec<f64> = order.iter().map(|&i| log_weights[i]).collect();
    let log_mass = math::log_sum_exp(&log_weights);
    Ok(SeparatedFamily {
        k: second.k,
        n,
        eps: first.eps,
        lag: lag.max(m),
        separation_depth: n + (second.separation_depth - second.n),
        members,
        log_weights,
        log_mass,
        rate_bound: second.rate_bound,
        composite: Some(CompositeParts {
            n1,
            gap,
            n2,
            w1,
            log_mass1: first.log_mass,
            log_mass2: second.log_mass,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::super::good::good_set;
    use super::*;
    use crate::thermo::MarkovMeasure;

    fn words(list: &[&str]) -> Vec<Word> {
        list.iter().map(|s| Word::parse(s).unwrap()).collect()
    }

    #[test]
    fn all_words_unweighted() {
        let sys = SymbolicSystem::full_shift(2);
        let psi = Potential::constant(&sys, 0.0);
        let all: Vec<Word> = sys.enumerate_words(6, 64).unwrap();
        let fam = SeparatedFamily::from_words(&sys, &psi, 1, 6, Resolution(0), 1, 6, all).unwrap();
        assert!((fam.log_mass - 6.0 * 2f64.ln()).abs() < 1e-12);
        let c = 2f64.ln();
        assert!(fam.log_mass >= 6.0 * (c - 0.2));
        assert!(fam.separation_witness().is_none());
    }

    #[test]
    fn weighted_sum_counts_ones() {
        let sys = SymbolicSystem::full_shift(2);
        let psi = Potential::indicator(&sys, 1, 2f64.ln()).unwrap();
        let all: Vec<Word> = sys.enumerate_words(5, 64).unwrap();
        let fam = SeparatedFamily::from_words(&sys, &psi, 1, 5, Resolution(0), 1, 5, all).unwrap();
        // Σ 2^{#1s} over {0,1}^5 = 3^5.
        assert!((fam.log_mass - 5.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn duplicate_breaks_separation() {
        let sys = SymbolicSystem::full_shift(2);
        let psi = Potential::constant(&sys, 0.0);
        let fam = SeparatedFamily::from_words(
            &sys,
            &psi,
            1,
            2,
            Resolution(0),
            0,
            2,
            words(&["00", "11"]),
        )
        .unwrap();
        assert!(fam.separation_witness().is_none());
        assert_eq!(fam.with_duplicate().separation_witness(), Some((0, 1)));
    }

    #[test]
    fn prefix_ranges() {
        let sys = SymbolicSystem::full_shift(2);
        let psi = Potential::constant(&sys, 0.0);
        let fam = SeparatedFamily::from_words(
            &sys,
            &psi,
            1,
            3,
            Resolution(0),
            0,
            3,
            words(&["000", "010", "011", "110"]),
        )
        .unwrap();
        assert_eq!(fam.prefix_range(&[0, 1]), 1..3);
        assert_eq!(fam.prefix_range(&[1]), 3..4);
        assert_eq!(fam.prefix_range(&[1, 0]), 3..3);
        assert_eq!(fam.prefix_range(&[]), 0..4);
    }

    #[test]
    fn good_set_family_counts_good_words() {
        let sys = SymbolicSystem::full_shift(2);
        let mu = MarkovMeasure::bernoulli(&sys, &[0.75, 0.25]).unwrap();
        let phi = Potential::indicator(&sys, 1, 1.0).unwrap();
        let psi = Potential::constant(&sys, 0.0);
        let good = good_set(&sys, &mu, &phi, 0.15, 0.8, 3, 16, 1).unwrap();
        let fam = select_separated_family(
            &good,
            &sys,
            &phi,
            &psi,
            Resolution(2),
            0,
            0.0,
            FamilyMode::Maximal,
        )
        .unwrap();
        // Members are distinct at depth n, one per good word.
        assert_eq!(fam.len() as f64, good.word_count());
        assert!(fam.separation_witness().is_none());
        assert!(fam
            .members
            .iter()
            .all(|w| w.len() == 18 && w.symbols()[16..] == [0, 0]));
        let bound = 2f64.ln() - 4.0 * 0.14;
        assert_eq!(fam.meets_bound(), fam.log_mass >= 16.0 * bound);
    }

    #[test]
    fn sufficient_mode_stops_at_the_bound() {
        let sys = SymbolicSystem::full_shift(2);
        let mu = MarkovMeasure::bernoulli(&sys, &[0.25, 0.75]).unwrap();
        let phi = Potential::indicator(&sys, 1, 1.0).unwrap();
        let psi = Potential::constant(&sys, 0.0);
        let good = good_set(&sys, &mu, &phi, 0.1, 0.5, 1, 20, 1).unwrap();
        let rate = 0.1;
        let fam = select_separated_family(
            &good,
            &sys,
            &phi,
            &psi,
            Resolution(4),
            0,
            rate,
            FamilyMode::Sufficient { max_members: 1000 },
        )
        .unwrap();
        assert!(fam.meets_bound());
        assert_eq!(fam.len(), math::ceil(math::exp(20.0 * rate)) as usize);
        // All members sit in the class closest to 3/4.
        for w in &fam.members {
            assert_eq!(w.symbols()[..20].iter().filter(|&&s| s == 1).count(), 15);
        }
    }

    #[test]
    fn separation_classes_deduplicate() {
        // With lookahead 0 at range-2 phi, words that differ only in the last
        // symbol collapse to one member.
        let sys = SymbolicSystem::full_shift(2);
        let mu = MarkovMeasure::bernoulli(&sys, &[0.5, 0.5]).unwrap();
        let phi = Potential::from_fn(&sys, 2, |w| f64::from(w[0] == w[1])).unwrap();
        let psi = Potential::constant(&sys, 0.0);
        let good = good_set(&sys, &mu, &phi, 2.0, 0.5, 1, 4, 1).unwrap();
        assert_eq!(good.word_count(), 32.0);
        let fam = select_separated_family(
            &good,
            &sys,
            &phi,
            &psi,
            Resolution(2),
            0,
            0.0,
            FamilyMode::Maximal,
        )
        .unwrap();
        assert_eq!(fam.len(), 16);
        assert!(fam.separation_witness().is_none());
    }

    #[test]
    fn composite_blocks_concatenate_without_lag() {
        let sys = SymbolicSystem::full_shift(2);
        let psi = Potential::constant(&sys, 0.0);
        let a = SeparatedFamily::from_words(
            &sys,
            &psi,
            2,
            8,
            Resolution(0),
            0,
            8,
            words(&["00000000", "01010101"]),
        )
        .unwrap();
        let b = SeparatedFamily::from_words(
            &sys,
            &psi,
            2,
            8,
            Resolution(0),
            0,
            8,
            words(&["11111111", "10101010", "11110000"]),
        )
        .unwrap();
        let c = compose_block(&sys, &a, &b, 0.5, 16, 0).unwrap();
        assert_eq!(c.n, 16);
        assert_eq!(c.len(), 6);
        assert!(c
            .members
            .contains(&Word::parse("0000000011111111").unwrap()));
        assert!((c.log_mass - (a.log_mass + b.log_mass)).abs() < 1e-12);
        assert!(c.separation_witness().is_none());
        let mut sorted = c.members.clone();
        sorted.sort();
        assert_eq!(sorted, c.members);
        let phi = Potential::indicator(&sys, 1, 1.0).unwrap();
        let avg = phi.birkhoff_average(c.members[0].symbols(), 16).unwrap();
        let expected = (phi.birkhoff_sum(a.members[0].symbols(), 8).unwrap()
            + phi.birkhoff_sum(b.members[0].symbols(), 8).unwrap())
            / 16.0;
        assert_eq!(avg, expected);
    }
}
