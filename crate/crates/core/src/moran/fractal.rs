//! Fractal levels `F_k`: every tuple in `Θ_1^{N_1} × … × Θ_k^{N_k}` glued
//! into one word, weighted by `Π exp S_{n_i} ψ` of its members.

use alloc::vec;
use alloc::vec::Vec;

use super::family::SeparatedFamily;
use super::schedule::Schedule;
use crate::error::{bail, Error, Result};
use crate::math;
use crate::symbolic::{first_difference_words, Resolution, SymbolicSystem, Word};

/// Words longer than this many symbols in total are never materialized.
const MATERIALIZE_BUDGET: u128 = 1 << 27;
/// Pairs checked when atoms are too many for the sorted scan.
pub const SAMPLED_PAIRS: usize = 10_000;

/// The glued layout of a multi-level construction.
#[derive(Clone, Debug)]
pub struct Moran {
    sys: SymbolicSystem,
    families: Vec<SeparatedFamily>,
    schedule: Schedule,
    eps: Resolution,
    /// `first_slot[i]`: slots before level `i + 1`.
    first_slot: Vec<usize>,
    /// Per level, `from * k + to`: symbols between two segments.
    connectors: Vec<Vec<Option<Vec<u8>>>>,
}

impl Moran {
    pub fn new(
        sys: &SymbolicSystem,
        families: Vec<SeparatedFamily>,
        schedule: Schedule,
    ) -> Result<Self> {
        let depth = schedule.depth();
        if depth == 0 || families.len() < depth {
            bail!(
                InvalidArgument,
                "schedule has {depth} levels for {} families",
                families.len()
            );
        }
        let eps = families[0].eps;
        let m = eps.m() as usize;
        for (i, f) in families.iter().take(depth).enumerate() {
            if f.eps != eps {
                bail!(
                    InvalidArgument,
                    "level {} is shadowed at a different resolution",
                    i + 1
                );
            }
            if f.n != schedule.orders[i] || f.lag != schedule.lags[i] {
                bail!(
                    InvalidArgument,
                    "level {} does not match the schedule",
                    i + 1
                );
            }
            if f.is_empty() {
                bail!(InvalidArgument, "level {} has no members", i + 1);
            }
        }
        let k = sys.alphabet_size();
        let mut connectors = Vec::with_capacity(depth);
        for f in families.iter().take(depth) {
            let mut table = vec![None; k * k];
            for from in 0..k as u8 {
                for to in 0..k as u8 {
                    table[from as usize * k + to as usize] = sys
                        .connector(from, to, f.lag - m + 1)
                        .ok()
                        .map(Word::into_inner);
                }
            }
            connectors.push(table);
        }
        let mut first_slot = vec![0usize];
        for &n in &schedule.counts {
            first_slot.push(first_slot.last().unwrap() + n);
        }
        let mut families = families;
        families.truncate(depth);
        Ok(Moran {
            sys: sys.clone(),
            families,
            schedule,
            eps,
            first_slot,
            connectors,
        })
    }

    pub fn system(&self) -> &SymbolicSystem {
        &self.sys
    }

    pub fn families(&self) -> &[SeparatedFamily] {
        &self.families
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn eps(&self) -> Resolution {
        self.eps
    }

    pub fn depth(&self) -> usize {
        self.families.len()
    }

    /// Slots in the first `k` levels.
    pub fn slots(&self, k: usize) -> usize {
        self.first_slot[k]
    }

    /// Level (1-based) of a slot.
    pub fn slot_level(&self, slot: usize) -> usize {
        self.first_slot.partition_point(|&s| s <= slot)
    }

    pub fn slot_offset(&self, slot: usize) -> u64 {
        let i = self.slot_level(slot);
        self.schedule.times[i - 1]
            + ((slot - self.first_slot[i - 1]) * self.schedule.block_len(i)) as u64
    }

    pub fn family_of_slot(&self, slot: usize) -> &SeparatedFamily {
        &self.families[self.slot_level(slot) - 1]
    }

    /// Symbols between the segment in `slot` (ending in `from`) and the next
    /// segment (starting with `to`).
    pub fn connector(&self, slot: usize, from: u8, to: u8) -> Result<&[u8]> {
        self.level_connector(self.slot_level(slot), from, to)
    }

    /// Gap symbols after a segment of level `level`.
    pub fn level_connector(&self, level: usize, from: u8, to: u8) -> Result<&[u8]> {
        let k = self.sys.alphabet_size();
        self.connectors[level - 1][from as usize * k + to as usize]
            .as_deref()
            .ok_or(Error::NoConnector {
                from,
                to,
                edges: self.families[level - 1].lag - self.eps.m() as usize + 1,
            })
    }

    /// Length of the glued word of level `k`.
    pub fn word_len(&self, k: usize) -> u64 {
        self.schedule.times[k] - self.families[k - 1].lag as u64 + self.eps.m() as u64
    }

    /// The glued word for member indices `digits` (one per slot).
    pub fn word(&self, digits: &[u32]) -> Result<Word> {
        let mut out = Vec::new();
        for (slot, &d) in digits.iter().enumerate() {
            let seg = self.family_of_slot(slot).members[d as usize].symbols();
            out.extend_from_slice(seg);
            if let Some(&next) = digits.get(slot + 1) {
                let to = self.family_of_slot(slot + 1).members[next as usize].symbols()[0];
                out.extend_from_slice(self.connector(slot, *seg.last().unwrap(), to)?);
            }
        }
        Ok(Word::new(out))
    }

    /// Length of the longest common prefix of two glued words, or `None`
    /// when they are identical.
    pub fn common_prefix(&self, a: &[u32], b: &[u32]) -> Result<Option<u64>> {
        self.common_prefix_by(a.len(), |s| a[s], |s| b[s])
    }

    /// As [`Moran::common_prefix`], reading member indices on demand so that
    /// atoms with many slots are never listed.
    fn common_prefix_by(
        &self,
        slots: usize,
        a: impl Fn(usize) -> u32,
        b: impl Fn(usize) -> u32,
    ) -> Result<Option<u64>> {
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        let mut cur = if slots > 0 { (a(0), b(0)) } else { (0, 0) };
        for slot in 0..slots {
            let next = if slot + 1 < slots {
                Some((a(slot + 1), b(slot + 1)))
            } else {
                None
            };
            if cur.0 == cur.1 && next.is_some_and(|(x, y)| x == y) {
                cur = next.unwrap();
                continue;
            }
            for (buf, d, nd) in [
                (&mut ba, cur.0, next.map(|n| n.0)),
                (&mut bb, cur.1, next.map(|n| n.1)),
            ] {
                buf.clear();
                let seg = self.family_of_slot(slot).members[d as usize].symbols();
                buf.extend_from_slice(seg);
                if let Some(nd) = nd {
                    let to = self.family_of_slot(slot + 1).members[nd as usize].symbols()[0];
                    buf.extend_from_slice(self.connector(slot, *seg.last().unwrap(), to)?);
                }
            }
            if let Some(j) = first_difference_words(&ba, &bb) {
                return Ok(Some(self.slot_offset(slot) + j as u64));
            }
            if let Some(n) = next {
                cur = n;
            }
        }
        Ok(None)
    }

    /// `Σ_i N_i log |Θ_i|` over the first `k` levels.
    pub fn log_atom_count(&self, k: usize) -> f64 {
        (0..k)
            .map(|i| self.schedule.counts[i] as f64 * math::ln(self.families[i].len() as f64))
            .sum()
    }

    pub fn atom_count(&self, k: usize) -> Option<u128> {
        let mut total: u128 = 1;
        for i in 0..k {
            for _ in 0..self.schedule.counts[i] {
                total = total.checked_mul(self.families[i].len() as u128)?;
            }
        }
        Some(total)
    }

    /// `log κ_k = Σ_i N_i log M_i`.
    pub fn log_kappa(&self, k: usize) -> f64 {
        (0..k)
            .map(|i| self.schedule.counts[i] as f64 * self.families[i].log_mass)
            .sum()
    }

    /// Member indices of atom `index` of a level.
    pub fn digits(&self, level: &FractalLevel, index: usize) -> Vec<u32> {
        let slots = self.slots(level.k);
        match level.selection {
            Selection::Exhaustive => {
                let mut id = level.atom_ids[index];
                let mut out = vec![0u32; slots];
                for slot in (0..slots).rev() {
                    let size = self.family_of_slot(slot).len() as u128;
                    out[slot] = (id % size) as u32;
                    id /= size;
                }
                out
            }
            Selection::Sampled => (0..slots)
                .map(|slot| self.sampled_digit(level, index, slot))
                .collect(),
        }
    }

    /// Member index in `slot` of sampled atom `index`: the first atom takes
    /// the first member everywhere, the last the last member, the first slot
    /// is spread evenly and the rest are hashed.
    fn sampled_digit(&self, level: &FractalLevel, index: usize, slot: usize) -> u32 {
        let s = level.atom_ids[index] as u64;
        let total = level.atom_ids.len() as u64;
        let size = self.family_of_slot(slot).len() as u64;
        let d = if s == 0 {
            0
        } else if s + 1 == total {
            size - 1
        } else if slot == 0 {
            s * size / total
        } else {
            splitmix(s.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ slot as u64) % size
        };
        d as u32
    }

    /// `log 𝓛_k(z) = Σ S_{n_i} ψ(x_l^i)` for an atom.
    pub fn log_weight(&self, digits: &[u32]) -> f64 {
        digits
            .iter()
            .enumerate()
            .map(|(slot, &d)| self.family_of_slot(slot).log_weights[d as usize])
            .sum()
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Selection {
    /// Every tuple, in lexicographic order.
    Exhaustive,
    /// Deterministic stratified sample: the first and last tuples, and the
    /// first slot spread evenly over the family.
    Sampled,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FractalLevel {
    pub k: usize,
    pub time: u64,
    pub word_len: u64,
    pub slots: usize,
    pub selection: Selection,
    /// Atom count when it fits in 128 bits.
    pub atom_count: Option<u128>,
    pub log_atom_count: f64,
    /// Tuple index (exhaustive) or sample number (sampled) of each atom.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub atom_ids: Vec<u128>,
    /// `log 𝓛_k(z)` per atom; empty for sampled levels too large to weigh.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub log_weights: Vec<f64>,
    /// `log Π M_i^{N_i}`.
    pub log_kappa: f64,
    /// `log Σ 𝓛_k(z)` over the atoms, when every atom is present.
    pub log_kappa_sum: Option<f64>,
    /// `|Σ 𝓛_k(z) / Π M_i^{N_i} - 1|`, when every atom is present.
    pub kappa_relative_error: Option<f64>,
}

impl FractalLevel {
    pub fn len(&self) -> usize {
        self.atom_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atom_ids.is_empty()
    }
}

/// Level `k` of the construction with at most `atom_cap` atoms. Beyond the
/// cap the atoms are a deterministic sample, unless `seedless` forbids it.
pub fn build_fractal_level(
    moran: &Moran,
    k: usize,
    atom_cap: usize,
    seedless: bool,
) -> Result<FractalLevel> {
    if k == 0 || k > moran.depth() {
        bail!(
            InvalidArgument,
            "level {k} is outside 1..={}",
            moran.depth()
        );
    }
    let count = moran.atom_count(k);
    let exhaustive = count.is_some_and(|c| c <= atom_cap as u128);
    if !exhaustive && seedless {
        bail!(
            Construction,
            "level {k} has about e^{:.1} atoms, above the cap of {atom_cap}, and sampling is disabled",
            moran.log_atom_count(k)
        );
    }
    let (selection, ids): (Selection, Vec<u128>) = if exhaustive {
        (Selection::Exhaustive, (0..count.unwrap()).collect())
    } else {
        (Selection::Sampled, (0..atom_cap as u128).collect())
    };
    let mut level = FractalLevel {
        k,
        time: moran.schedule.times[k],
        word_len: moran.word_len(k),
        slots: moran.slots(k),
        selection,
        atom_count: count,
        log_atom_count: moran.log_atom_count(k),
        atom_ids: ids,
        log_weights: Vec::new(),
        log_kappa: moran.log_kappa(k),
        log_kappa_sum: None,
        kappa_relative_error: None,
    };
    // Deep sampled levels skip per-atom weights; κ_k comes from the product identity.
    if (level.len() as u128) * (level.slots as u128) <= MATERIALIZE_BUDGET {
        level.log_weights = (0..level.len())
            .map(|i| moran.log_weight(&moran.digits(&level, i)))
            .collect();
    }
    if exhaustive {
        let sum = math::log_sum_exp(&level.log_weights);
        level.log_kappa_sum = Some(sum);
        let unweighted = level.log_weights.iter().all(|&w| w == 0.0)
            && moran.families[..k]
                .iter()
                .all(|f| f.log_weights.iter().all(|&w| w == 0.0));
        level.kappa_relative_error = Some(if unweighted {
            // Integer identity: the atom count is Π |Θ_i|^{N_i}.
            0.0
        } else {
            (math::exp(sum - level.log_kappa) - 1.0).abs()
        });
    }
    Ok(level)
}

/// Atoms with their normalized masses `𝓛_k(z) / κ_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    pub words: Vec<Word>,
    pub masses: Vec<f64>,
    /// Total mass; 1 up to rounding when every atom is present.
    pub total: f64,
}

impl AtomicMeasure {
    /// Mass of the cylinder `[u]`.
    pub fn cylinder_mass(&self, u: &[u8]) -> f64 {
        self.words
            .iter()
            .zip(&self.masses)
            .filter(|(w, _)| w.symbols().starts_with(u))
            .map(|(_, m)| m)
            .sum()
    }
}

/// `μ_k = ν_k / κ_k` with `κ_k` from the product identity.
pub fn build_measures(moran: &Moran, level: &FractalLevel) -> Result<AtomicMeasure> {
    if (level.len() as u128) * (level.word_len as u128) > MATERIALIZE_BUDGET {
        bail!(
            Construction,
            "level {} is too large to list its atoms",
            level.k
        );
    }
    let mut words = Vec::with_capacity(level.len());
    let mut masses = Vec::with_capacity(level.len());
    for i in 0..level.len() {
        words.push(moran.word(&moran.digits(level, i))?);
        masses.push(math::exp(level.log_weights[i] - level.log_kappa));
    }
    let total = masses.iter().sum();
    Ok(AtomicMeasure {
        words,
        masses,
        total,
    })
}

/// Where the longest common prefix over all pairs of distinct atoms of a
/// level sits.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StructuralBound {
    /// Longest common prefix over all pairs of distinct tuples, `None` when
    /// two distinct tuples glue to the same word.
    pub longest_common_prefix: Option<u64>,
    /// The slot and the two member indices that attain it.
    pub slot: usize,
    pub members: (usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SeparationReport {
    pub k: usize,
    /// Distinct atoms must differ before this index.
    pub limit: u64,
    /// Exact over every pair of tuples of the level.
    pub structural: StructuralBound,
    pub pairs_checked: u128,
    /// The listed atoms were compared pairwise (sorted scan) rather than sampled.
    pub all_pairs: bool,
    /// Longest common prefix among the compared atoms (`None` if two coincide).
    pub longest_common_prefix: Option<u64>,
    /// Two atom indices violating the bound.
    pub witness: Option<(usize, usize)>,
    pub passed: bool,
}

/// Two tuples that first differ in slot `s` agree on the `offset(s)` symbols
/// before it and then on the common prefix of the two segments, which ends
/// before the segment does unless the members coincide. So the longest common
/// prefix over all pairs comes from the last slot of some level and the
/// closest pair of members (adjacent in sorted order) of its family.
pub fn structural_separation(moran: &Moran, k: usize) -> StructuralBound {
    let mut best = StructuralBound {
        longest_common_prefix: Some(0),
        slot: 0,
        members: (0, 0),
    };
    for i in 1..=k {
        let fam = &moran.families[i - 1];
        if fam.len() < 2 {
            continue;
        }
        let slot = moran.first_slot[i] - 1;
        let offset = moran.slot_offset(slot);
        for a in 1..fam.len() {
            let lcp =
                first_difference_words(fam.members[a - 1].symbols(), fam.members[a].symbols())
                    .map(|j| offset + j as u64);
            let worse = match (lcp, best.longest_common_prefix) {
                (_, None) => false,
                (None, Some(_)) => true,
                (Some(x), Some(y)) => x > y,
            };
            if worse {
                best = StructuralBound {
                    longest_common_prefix: lcp,
                    slot,
                    members: (a - 1, a),
                };
            }
        }
    }
    best
}

/// `(t_k, 3ε)`-separation of the atoms: distinct glued words must differ
/// before index `t_k + m - 2`, where `ε = 2^-m`.
///
/// The structural bound covers every pair of tuples. The listed atoms are
/// also compared directly: by sorting the words when they fit in memory
/// (adjacent pairs have the longest common prefixes), otherwise all pairs
/// when there are few enough and a deterministic spread of `SAMPLED_PAIRS`
/// pairs when not.
pub fn check_separation(
    moran: &Moran,
    level: &FractalLevel,
    eps: Resolution,
) -> Result<SeparationReport> {
    let m = eps.m() as u64;
    if m < 2 {
        bail!(
            InvalidArgument,
            "separation at 3ε needs eps = 2^-m with m >= 2"
        );
    }
    let limit = level.time + m - 2;
    let n = level.len();
    if n < 2 {
        bail!(InvalidArgument, "separation needs at least two atoms");
    }
    let structural = structural_separation(moran, level.k);
    let mut worst: Option<u64> = Some(0);
    let mut witness = None;
    let mut note = |lcp: Option<u64>, i: usize, j: usize, worst: &mut Option<u64>| {
        *worst = match (lcp, *worst) {
            (None, _) | (_, None) => None,
            (Some(a), Some(b)) => Some(a.max(b)),
        };
        if witness.is_none() && lcp.is_none_or(|l| l >= limit) {
            witness = Some((i, j));
        }
    };
    let pairs: u128;
    let all_pairs;
    if (n as u128) * (level.word_len as u128) <= MATERIALIZE_BUDGET {
        let words: Vec<Word> = (0..n)
            .map(|i| moran.word(&moran.digits(level, i)))
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| words[a].cmp(&words[b]));
        for w in order.windows(2) {
            let lcp = first_difference_words(words[w[0]].symbols(), words[w[1]].symbols())
                .map(|j| j as u64);
            note(lcp, w[0], w[1], &mut worst);
        }
        pairs = (n as u128) * (n as u128 - 1) / 2;
        all_pairs = true;
    } else {
        let total = (n as u128) * (n as u128 - 1) / 2;
        let list: Vec<(usize, usize)> = if total <= SAMPLED_PAIRS as u128 {
            (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect()
        } else {
            (0..SAMPLED_PAIRS as u64)
                .map(|s| {
                    let i = (splitmix(s) % n as u64) as usize;
                    let mut j = (splitmix(s ^ 0xA5A5_A5A5) % (n as u64 - 1)) as usize;
                    if j >= i {
                        j += 1;
                    }
                    (i.min(j), i.max(j))
                })
                .collect()
        };
        for &(i, j) in &list {
            let lcp = match level.selection {
                Selection::Sampled => moran.common_prefix_by(
                    level.slots,
                    |s| moran.sampled_digit(level, i, s),
                    |s| moran.sampled_digit(level, j, s),
                )?,
                Selection::Exhaustive => {
                    moran.common_prefix(&moran.digits(level, i), &moran.digits(level, j))?
                }
            };
            note(lcp, i, j, &mut worst);
        }
        pairs = list.len() as u128;
        all_pairs = total <= SAMPLED_PAIRS as u128;
    }
    Ok(SeparationReport {
        k: level.k,
        limit,
        pairs_checked: pairs,
        all_pairs,
        longest_common_prefix: worst,
        passed: witness.is_none() && structural.longest_common_prefix.is_some_and(|l| l < limit),
        structural,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::super::params::ThresholdRule;
    use super::super::schedule::choose_schedule;
    use super::*;
    use crate::thermo::Potential;
    use alloc::string::{String, ToString};

    fn fam(
        sys: &SymbolicSystem,
        psi: &Potential,
        k: usize,
        words: &[&str],
        lag: usize,
        eps: Resolution,
    ) -> SeparatedFamily {
        let ws: Vec<Word> = words.iter().map(|s| Word::parse(s).unwrap()).collect();
        let n = ws[0].len() - eps.m() as usize;
        SeparatedFamily::from_words(sys, psi, k, n, eps, lag, n, ws).unwrap()
    }

    fn schedule(fams: &[SeparatedFamily], counts: &[usize]) -> Schedule {
        let mut s =
            choose_schedule(fams, ThresholdRule::Constant { value: 1.0 }, u64::MAX).unwrap();
        s.counts = counts.to_vec();
        s.times = vec![0];
        for (i, &c) in counts.iter().enumerate() {
            let t = s.times[i] + (c * s.block_len(i + 1)) as u64;
            s.times.push(t);
        }
        s
    }

    fn toy(psi: &Potential) -> Moran {
        let sys = SymbolicSystem::full_shift(2);
        let f1 = fam(&sys, psi, 1, &["00", "11"], 0, Resolution(0));
        let f2 = fam(&sys, psi, 2, &["01", "10"], 0, Resolution(0));
        let s = schedule(&[f1.clone(), f2.clone()], &[2, 1]);
        Moran::new(&sys, vec![f1, f2], s).unwrap()
    }

    #[test]
    fn four_atoms_of_the_first_level() {
        let sys = SymbolicSystem::full_shift(2);
        let psi = Potential::constant(&sys, 0.0);
        let moran = toy(&psi);
        let level = build_fractal_level(&moran, 1, 1 << 16, true).unwrap();
        assert_eq!(level.len(), 4);
        let words: Vec<String> = (0..4)
            .map(|i| moran.word(&moran.digits(&level, i)).unwrap().to_string())
            .collect();
        assert_eq!(words, ["0000", "0011", "1100", "1111"]);
        assert_eq!(level.kappa_relative_error, Some(0.0));
        assert!((level.log_kappa - 4f64.ln()).abs() < 1e-12);
        let mu = build_measures(&moran, &level).unwrap();
        assert!(mu.masses.iter().all(|&m| (m - 0.25).abs() < 1e-15));
        assert!((mu.total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_atoms() {
        let sys = SymbolicSystem::full_shift(2);
        let psi = Potential::indicator(&sys, 1, 2f64.ln()).unwrap();
        let moran = toy(&psi);
        let level = build_fractal_level(&moran, 1, 1 << 16, true).unwrap();
        let weights: Vec<f64> = level.log_weights.iter().map(|w| w.exp()).collect();
        for (w, e) in weights.iter().zip([1.0, 4.0, 4.0, 16.0]) {
            assert!((w - e).abs() < 1e-12);
        }
        assert!((level.log_kappa - 25f64.ln()).abs() < 1e-12);
        assert!(level.kappa_relative_error.unwrap() < 1e-9);
        let mu = build_measures(&moran, &level).unwrap();
        for (m, e) in mu.masses.iter().zip([1.0, 4.0, 4.0, 16.0]) {
            assert!((m - e / 25.0).abs() < 1e-15);
        }
    }

    #[test]
    fn levels_nest() {
        let sys = SymbolicSystem::full_shift(2);
        let psi = Potential::constant(&sys, 0.0);
        let moran = toy(&psi);
        let l1 = build_fractal_level(&moran, 1, 1 << 16, true).unwrap();
        let l2 = build_fractal_level(&moran, 2, 1 << 16, true).unwrap();
        let m1 = build_measures(&moran, &l1).unwrap();
        let m2 = build_measures(&moran, &l2).unwrap();
        assert_eq!(m2.words.len(), 8);
        for w in &m2.words {
            let parents = m1
                .words
                .iter()
                .filter(|p| w.symbols().starts_with(p.symbols()))
                .count();
            assert_eq!(parents, 1);
        }
        // μ_2 gives full mass to the cylinders of level 1.
        let on_f1: f64 = m1.words.iter().map(|p| m2.cylinder_mass(p.symbols())).sum();
        assert!((on_f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separation_and_duplicate() {
        let sys = SymbolicSystem::full_shift(2);
        let psi = Potential::constant(&sys, 0.0);
        let f1 = fam(
            &sys,
            &psi,
            1,
            &["0000", "0100", "1000", "1100"],
            3,
            Resolution(2),
        );
        let f2 = fam(&sys, &psi, 2, &["0000", "1100"], 3, Resolution(2));
        let s = schedule(&[f1.clone(), f2.clone()], &[2, 2]);
        let moran = Moran::new(&sys, vec![f1.clone(), f2.clone()], s.clone()).unwrap();
        let level = build_fractal_level(&moran, 2, 1 << 16, true).unwrap();
        let rep = check_separation(&moran, &level, Resolution(2)).unwrap();
        assert!(rep.passed && rep.all_pairs);
        assert_eq!(rep.pairs_checked, 64 * 63 / 2);
        assert_eq!(
            rep.structural.longest_common_prefix,
            rep.longest_common_prefix
        );

        let bad = Moran::new(&sys, vec![f1.with_duplicate(), f2], s).unwrap();
        let level = build_fractal_level(&bad, 2, 1 << 16, true).unwrap();
        let rep = check_separation(&bad, &level, Resolution(2)).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.longest_common_prefix, None);
        assert_eq!(rep.structural.longest_common_prefix, None);
        assert_eq!(rep.structural.members, (0, 1));

        // Sampled atoms rarely collide, but the structural bound still sees it.
        let level = build_fractal_level(&bad, 2, 16, false).unwrap();
        let rep = check_separation(&bad, &level, Resolution(2)).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.structural.longest_common_prefix, None);
    }

    #[test]
    fn streamed_prefixes_match_words() {
        let sys = SymbolicSystem::full_shift(2);
        let psi = Potential::constant(&sys, 0.0);
        let f1 = fam(
            &sys,
            &psi,
            1,
            &["000", "010", "100", "110"],
            2,
            Resolution(1),
        );
        let f2 = fam(&sys, &psi, 2, &["0000", "0110", "1010"], 2, Resolution(1));
        let s = schedule(&[f1.clone(), f2.clone()], &[2, 2]);
        let moran = Moran::new(&sys, vec![f1, f2], s).unwrap();
        let level = build_fractal_level(&moran, 2, 1 << 16, true).unwrap();
        assert_eq!(level.len(), 16 * 9);
        let mut longest = 0;
        for i in 0..level.len() {
            for j in i + 1..level.len() {
                let (a, b) = (
                    moran.word(&moran.digits(&level, i)).unwrap(),
                    moran.word(&moran.digits(&level, j)).unwrap(),
                );
                longest =
                    longest.max(first_difference_words(a.symbols(), b.symbols()).unwrap() as u64);
            }
        }
        assert_eq!(
            structural_separation(&moran, 2).longest_common_prefix,
            Some(longest)
        );
        for i in (0..level.len()).step_by(7) {
            for j in (0..level.len()).step_by(5) {
                let (a, b) = (moran.digits(&level, i), moran.digits(&level, j));
                let (wa, wb) = (moran.word(&a).unwrap(), moran.word(&b).unwrap());
                assert_eq!(wa.len() as u64, moran.word_len(2));
                let expected = first_difference_words(wa.symbols(), wb.symbols()).map(|x| x as u64);
                assert_eq!(moran.common_prefix(&a, &b).unwrap(), expected);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_flagged() {
        let sys = SymbolicSystem::full_shift(2);
        let psi = Potential::constant(&sys, 0.0);
        let moran = toy(&psi);
        assert!(build_fractal_level(&moran, 2, 4, true).is_err());
        let a = build_fractal_level(&moran, 2, 4, false).unwrap();
        let b = build_fractal_level(&moran, 2, 4, false).unwrap();
        assert_eq!(a.selection, Selection::Sampled);
        assert_eq!(a, b);
        assert_eq!(moran.digits(&a, 0), vec![0, 0, 0]);
        assert_eq!(moran.digits(&a, 3), vec![1, 1, 1]);
        assert!(a.kappa_relative_error.is_none());
    }

    fn arb_family(len: usize) -> impl proptest::strategy::Strategy<Value = Vec<String>> {
        use proptest::prelude::*;
        prop::collection::btree_set(prop::collection::vec(0u8..2, len), 2..5).prop_map(|set| {
            set.into_iter()
                .map(|w| w.iter().map(|b| char::from(b'0' + b)).collect())
                .collect()
        })
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]
        #[test]
        fn glued_words_nest_and_prefixes_agree(
            a in arb_family(4),
            b in arb_family(5),
            counts in (1usize..3, 1usize..3),
            picks in proptest::collection::vec(0u32..64, 8),
        ) {
            let sys = SymbolicSystem::full_shift(2);
            let psi = Potential::constant(&sys, 0.0);
            let ra: Vec<&str> = a.iter().map(String::as_str).collect();
            let rb: Vec<&str> = b.iter().map(String::as_str).collect();
            let f1 = fam(&sys, &psi, 1, &ra, 0, Resolution(0));
            let f2 = fam(&sys, &psi, 2, &rb, 0, Resolution(0));
            let s = schedule(&[f1.clone(), f2.clone()], &[counts.0, counts.1]);
            let moran = Moran::new(&sys, vec![f1, f2], s).unwrap();
            let slots = moran.slots(2);
            let digits = |shift: u32| -> Vec<u32> {
                (0..slots).map(|s| (picks[s] + shift) % moran.family_of_slot(s).len() as u32).collect()
            };
            let (x, y) = (digits(0), digits(picks[7] % 3));
            let (wx, wy) = (moran.word(&x).unwrap(), moran.word(&y).unwrap());
            proptest::prop_assert_eq!(wx.len() as u64, moran.word_len(2));
            let first = moran.word(&x[..moran.slots(1)]).unwrap();
            proptest::prop_assert_eq!(first.len() as u64, moran.word_len(1));
            proptest::prop_assert!(wx.symbols().starts_with(first.symbols()));
            let expected = first_difference_words(wx.symbols(), wy.symbols()).map(|i| i as u64);
            proptest::prop_assert_eq!(moran.common_prefix(&x, &y).unwrap(), expected);
        }
    }
}
