//! Good sets: words whose Birkhoff average stays within `δ_k` of the target
//! and whose gluing lag fits the level budget, with their exact measure.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::params::ConstructionParams;
use crate::error::{bail, Error, Result};
use crate::math;
use crate::specification::LagFunction;
use crate::symbolic::SymbolicSystem;
use crate::thermo::{InvariantMeasure, MarkovMeasure, Potential};

/// Birkhoff sums are tracked on `φ` rounded to multiples of `2^-32`, which
/// makes equal sums compare equal.
const SCALE: f64 = 4_294_967_296.0;
const STATE_CAP: usize = 1 << 22;

fn quantize(v: f64) -> i64 {
    math::floor(v * SCALE + 0.5) as i64
}

/// Good words sharing one Birkhoff sum.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GoodClass {
    pub sum: f64,
    pub count: f64,
    pub mass: f64,
}

#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GoodSet {
    pub k: usize,
    pub n: usize,
    /// `n + r - 1`: the symbols `S_n φ` reads.
    pub word_len: usize,
    pub target: f64,
    pub delta_k: f64,
    pub lag: usize,
    /// `lag / n < 2^-k`.
    pub lag_ok: bool,
    /// Exact measure of the union of good cylinders.
    pub measure: f64,
    pub required: f64,
    /// Closest to the target first.
    pub classes: Vec<GoodClass>,
    #[cfg_attr(feature = "serde", serde(skip))]
    reach: Reach,
}

impl GoodSet {
    pub fn passes(&self) -> bool {
        self.lag_ok && self.measure > self.required
    }

    pub fn word_count(&self) -> f64 {
        self.classes.iter().map(|c| c.count).sum()
    }

    /// Visits good words class by class (closest average first), each class
    /// in lexicographic order, until `f` returns `false`.
    pub fn for_each_word(
        &self,
        sys: &SymbolicSystem,
        phi: &Potential,
        mut f: impl FnMut(&[u8]) -> bool,
    ) {
        let mut buf = Vec::with_capacity(self.word_len);
        for class in &self.reach.classes {
            if !self.reach.walk(sys, phi, *class, &mut buf, &mut f) {
                return;
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Reach {
    context: usize,
    range: usize,
    /// `sums[i][ctx]`: sorted quantized sums the last `len - i` windows can add.
    sums: Vec<BTreeMap<Vec<u8>, Vec<i64>>>,
    classes: Vec<i64>,
}

impl Reach {
    fn walk(
        &self,
        sys: &SymbolicSystem,
        phi: &Potential,
        total: i64,
        buf: &mut Vec<u8>,
        f: &mut impl FnMut(&[u8]) -> bool,
    ) -> bool {
        buf.clear();
        self.descend(sys, phi, total, buf, f)
    }

    fn descend(
        &self,
        sys: &SymbolicSystem,
        phi: &Potential,
        rest: i64,
        buf: &mut Vec<u8>,
        f: &mut impl FnMut(&[u8]) -> bool,
    ) -> bool {
        let i = buf.len();
        if i + 1 == self.sums.len() {
            return f(buf);
        }
        for a in 0..sys.alphabet_size() as u8 {
            if let Some(&last) = buf.last() {
                if !sys.allowed(last, a) {
                    continue;
                }
            }
            buf.push(a);
            let gain = if i + 1 >= self.range {
                quantize(phi.value(&buf[i + 1 - self.range..]))
            } else {
                0
            };
            let start = (i + 1).saturating_sub(self.context);
            let ok = self.sums[i + 1]
                .get(&buf[start..])
                .is_some_and(|s| s.binary_search(&(rest - gain)).is_ok());
            if ok && !self.descend(sys, phi, rest - gain, buf, f) {
                return false;
            }
            buf.pop();
        }
        true
    }
}

/// Good set of level `k` at depth `n` for the measure `mu`.
pub fn build_good_sets(
    sys: &SymbolicSystem,
    mu: &MarkovMeasure,
    phi: &Potential,
    params: &ConstructionParams,
    k: usize,
    n: usize,
    lag: &LagFunction,
) -> Result<GoodSet> {
    good_set(
        sys,
        mu,
        phi,
        params.delta_k(k),
        1.0 - params.gamma,
        k,
        n,
        lag.value(n),
    )
}

/// Exact forward pass over `(last symbols, Birkhoff sum)` states.
#[allow(clippy::too_many_arguments)]
pub(crate) fn good_set(
    sys: &SymbolicSystem,
    mu: &MarkovMeasure,
    phi: &Potential,
    delta_k: f64,
    required: f64,
    k: usize,
    n: usize,
    lag: usize,
) -> Result<GoodSet> {
    if n == 0 {
        bail!(InvalidArgument, "good sets need n >= 1");
    }
    if mu.alphabet_size() != sys.alphabet_size() || phi.alphabet_size() != sys.alphabet_size() {
        return Err(Error::AlphabetMismatch {
            left: sys.alphabet_size(),
            right: mu.alphabet_size(),
        });
    }
    let r = phi.range();
    let len = n + r - 1;
    if phi.sup_norm() * len as f64 >= (1u64 << 30) as f64 {
        bail!(
            InvalidPotential,
            "Birkhoff sums of this potential overflow the exact bookkeeping"
        );
    }
    let target = mu.integrate(phi)?;
    let lag_ok = (lag as f64) < n as f64 * math::pow(2.0, -(k as f64));
    let ctx_len = mu.order().max(r - 1).max(1);
    let alphabet = sys.alphabet_size() as u8;

    // Forward: mass and count per (context, sum).
    let mut layer: BTreeMap<(Vec<u8>, i64), (f64, f64)> = BTreeMap::new();
    layer.insert((Vec::new(), 0), (1.0, 1.0));
    let mut contexts: Vec<Vec<Vec<u8>>> = vec![vec![Vec::new()]];
    let mut prefix_buf = Vec::new();
    for i in 0..len {
        let mut next: BTreeMap<(Vec<u8>, i64), (f64, f64)> = BTreeMap::new();
        for ((ctx, q), (mass, count)) in &layer {
            for a in 0..alphabet {
                if ctx.last().is_some_and(|&l| !sys.allowed(l, a)) {
                    continue;
                }
                prefix_buf.clear();
                prefix_buf.extend_from_slice(ctx);
                prefix_buf.push(a);
                let new_mass = if i < ctx_len {
                    mu.word_measure(&prefix_buf)
                } else {
                    mass * mu.conditional(ctx, a)
                };
                let gain = if i + 1 >= r {
                    quantize(phi.value(&prefix_buf[prefix_buf.len() - r..]))
                } else {
                    0
                };
                let keep = prefix_buf.len().saturating_sub(ctx_len);
                let entry = next
                    .entry((prefix_buf[keep..].to_vec(), q + gain))
                    .or_insert((0.0, 0.0));
                entry.0 += new_mass;
                entry.1 += count;
            }
        }
        if next.len() > STATE_CAP {
            return Err(Error::EnumerationCap {
                cap: STATE_CAP as u64,
                requested: next.len() as u128,
            });
        }
        let mut ctxs: Vec<Vec<u8>> = next.keys().map(|(c, _)| c.clone()).collect();
        ctxs.dedup();
        contexts.push(ctxs);
        layer = next;
    }

    let good = |q: i64| (q as f64 / SCALE / n as f64 - target).abs() < delta_k;
    let mut by_sum: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    if lag_ok {
        for ((_, q), (mass, count)) in &layer {
            if good(*q) {
                let e = by_sum.entry(*q).or_insert((0.0, 0.0));
                e.0 += mass;
                e.1 += count;
            }
        }
    }
    let mut order: Vec<i64> = by_sum.keys().copied().collect();
    let closeness = |q: i64| (q as f64 / SCALE / n as f64 - target).abs();
    order.sort_by(|a, b| closeness(*a).total_cmp(&closeness(*b)).then(a.cmp(b)));
    let classes: Vec<GoodClass> = order
        .iter()
        .map(|q| {
            let (mass, count) = by_sum[q];
            GoodClass {
                sum: *q as f64 / SCALE,
                count,
                mass,
            }
        })
        .collect();
    let measure = classes.iter().map(|c| c.mass).sum();

    // Backward: which sums each state can still collect.
    let mut sums: Vec<BTreeMap<Vec<u8>, Vec<i64>>> = vec![BTreeMap::new(); len + 1];
    for ctx in &contexts[len] {
        sums[len].insert(ctx.clone(), vec![0]);
    }
    let mut total = 0usize;
    for i in (0..len).rev() {
        let mut here: BTreeMap<Vec<u8>, Vec<i64>> = BTreeMap::new();
        for ctx in &contexts[i] {
            let mut acc = Vec::new();
            for a in 0..alphabet {
                if ctx.last().is_some_and(|&l| !sys.allowed(l, a)) {
                    continue;
                }
                prefix_buf.clear();
                prefix_buf.extend_from_slice(ctx);
                prefix_buf.push(a);
                let gain = if i + 1 >= r {
                    quantize(phi.value(&prefix_buf[prefix_buf.len() - r..]))
                } else {
                    0
                };
                let keep = prefix_buf.len().saturating_sub(ctx_len);
                if let Some(tail) = sums[i + 1].get(&prefix_buf[keep..]) {
                    acc.extend(tail.iter().map(|s| s + gain));
                }
            }
            acc.sort_unstable();
            acc.dedup();
            total += acc.len();
            here.insert(ctx.clone(), acc);
        }
        if total > STATE_CAP {
            return Err(Error::EnumerationCap {
                cap: STATE_CAP as u64,
                requested: total as u128,
            });
        }
        sums[i] = here;
    }
    let reach = Reach {
        context: ctx_len,
        range: r,
        sums,
        classes: order,
    };
    Ok(GoodSet {
        k,
        n,
        word_len: len,
        target,
        delta_k,
        lag,
        lag_ok,
        measure,
        required,
        classes,
        reach,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    fn setup(p1: f64) -> (SymbolicSystem, MarkovMeasure, Potential) {
        let sys = SymbolicSystem::full_shift(2);
        let mu = MarkovMeasure::bernoulli(&sys, &[1.0 - p1, p1]).unwrap();
        let phi = Potential::indicator(&sys, 1, 1.0).unwrap();
        (sys, mu, phi)
    }

    #[test]
    fn binomial_tail_example() {
        let (sys, mu, phi) = setup(0.25);
        let g = good_set(&sys, &mu, &phi, 0.15, 0.86, 3, 16, 1).unwrap();
        let exact: f64 = (0..=16u64)
            .filter(|&j| (j as f64 / 16.0 - 0.25).abs() < 0.15)
            .map(|j| binom(16, j) * 0.25f64.powi(j as i32) * 0.75f64.powi(16 - j as i32))
            .sum();
        assert!((g.measure - exact).abs() < 1e-12);
        assert!(g.measure >= 0.8);
        assert!(g.lag_ok);
    }

    #[test]
    fn vacuous_delta_keeps_everything() {
        let (sys, mu, phi) = setup(0.25);
        let g = good_set(&sys, &mu, &phi, 1.1, 0.5, 1, 10, 1).unwrap();
        assert!((g.measure - 1.0).abs() < 1e-12);
        assert_eq!(g.word_count(), 1024.0);
    }

    #[test]
    fn lag_budget_is_uniform() {
        let (sys, mu, phi) = setup(0.25);
        let g = good_set(&sys, &mu, &phi, 1.1, 0.5, 3, 16, 1).unwrap();
        assert!(g.lag_ok);
        let g = good_set(&sys, &mu, &phi, 1.1, 0.5, 3, 16, 2).unwrap();
        assert!(!g.lag_ok);
        assert_eq!(g.measure, 0.0);
        assert!(!g.passes());
    }

    #[test]
    fn words_come_closest_class_first_and_match_counts() {
        let (sys, mu, phi) = setup(0.25);
        let g = good_set(&sys, &mu, &phi, 0.2, 0.5, 1, 8, 1).unwrap();
        let mut seen = Vec::new();
        g.for_each_word(&sys, &phi, |w| {
            seen.push(w.to_vec());
            true
        });
        assert_eq!(seen.len() as f64, g.word_count());
        let ones = |w: &Vec<u8>| w.iter().filter(|&&s| s == 1).count();
        assert_eq!(ones(&seen[0]), 2);
        assert_eq!(seen[0], vec![0, 0, 0, 0, 0, 0, 1, 1]);
        let brute: Vec<Vec<u8>> = sys
            .enumerate_words(8, 1 << 10)
            .unwrap()
            .into_iter()
            .map(|w| w.into_inner())
            .filter(|w| (ones(w) as f64 / 8.0 - 0.25).abs() < 0.2)
            .collect();
        let mut sorted = seen.clone();
        sorted.sort();
        assert_eq!(sorted, brute);
    }

    #[test]
    fn golden_mean_markov_range_two() {
        let sys = SymbolicSystem::golden_mean();
        let mu = crate::thermo::equilibrium_measure(&sys, &Potential::constant(&sys, 0.0)).unwrap();
        let phi = Potential::from_fn(&sys, 2, |w| if w == [0, 1] { 1.0 } else { 0.25 }).unwrap();
        let g = good_set(&sys, &mu, &phi, 0.1, 0.5, 1, 9, 1).unwrap();
        let target = mu.integrate(&phi).unwrap();
        let mut brute = 0.0;
        for w in sys.enumerate_words(10, 1 << 12).unwrap() {
            let avg = phi.birkhoff_average(w.symbols(), 9).unwrap();
            if (avg - target).abs() < 0.1 {
                brute += mu.word_measure(w.symbols());
            }
        }
        assert!(
            (g.measure - brute).abs() < 1e-12,
            "{} vs {brute}",
            g.measure
        );
        let mut count = 0;
        g.for_each_word(&sys, &phi, |w| {
            assert!(sys.is_admissible(w));
            assert!((phi.birkhoff_average(w, 9).unwrap() - target).abs() < 0.1);
            count += 1;
            true
        });
        assert_eq!(count as f64, g.word_count());
    }
}
