use alloc::vec::Vec;

use super::{cylinder_birkhoff_bounds, InvariantMeasure, Potential};
use crate::error::{bail, Error, Result};
use crate::math::{self, ln};
use crate::symbolic::{Resolution, SymbolicSystem};

#[derive(Clone, Copy, Debug)]
pub struct KatokOptions {
    /// Largest cylinder count solved exactly.
    pub exact_cap: usize,
    /// Node budget for the exact search before falling back to its incumbent.
    pub node_budget: u64,
    pub enumeration_cap: u64,
}

impl Default for KatokOptions {
    fn default() -> Self {
        KatokOptions {
            exact_cap: 1 << 16,
            node_budget: 5_000_000,
            enumeration_cap: crate::DEFAULT_ENUMERATION_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct KatokValue {
    /// `N^μ(ψ, γ, ε, n)`, or an upper bound for it when `exact` is false.
    pub value: f64,
    pub exact: bool,
    /// Linear-relaxation lower bound.
    pub lower_bound: f64,
    pub cylinders: usize,
    pub classes: usize,
}

impl KatokValue {
    pub fn rate(&self, n: usize) -> f64 {
        ln(self.value) / n as f64
    }
}

/// Items with equal mass and cost are interchangeable; one class per kind.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverClass {
    pub mass: f64,
    pub cost: f64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverSolution {
    pub cost: f64,
    /// Items taken per class, in the caller's class order.
    pub taken: Vec<u64>,
    pub exact: bool,
    pub lower_bound: f64,
}

/// `N^μ(ψ, γ, 2^-m, n)`: the least `Σ exp(sup_{[w]} S_n ψ)` over collections of
/// depth-`(n + m)` cylinders of total mass at least `1 - γ`. Those cylinders
/// are the Bowen balls of order `n` and radius `2^-m`, so this is the
/// cheapest `(n, ε)`-spanning cover of a set of measure `1 - γ`.
pub fn katok_partition(
    sys: &SymbolicSystem,
    mu: &dyn InvariantMeasure,
    psi: &Potential,
    gamma: f64,
    eps: Resolution,
    n: usize,
    opts: &KatokOptions,
) -> Result<KatokValue> {
    if !(gamma > 0.0 && gamma < 1.0) {
        bail!(InvalidArgument, "gamma must lie in (0, 1), got {gamma}");
    }
    if n == 0 {
        bail!(InvalidArgument, "n must be at least 1");
    }
    if mu.alphabet_size() != sys.alphabet_size() {
        return Err(Error::AlphabetMismatch {
            left: sys.alphabet_size(),
            right: mu.alphabet_size(),
        });
    }
    let depth = n + eps.m() as usize;
    let count = sys.count_words(depth);
    if count > opts.enumeration_cap as u128 {
        return Err(Error::EnumerationCap {
            cap: opts.enumeration_cap,
            requested: count,
        });
    }
    let mut items: Vec<(f64, f64)> = Vec::new();
    let mut buf = Vec::with_capacity(depth);
    sys.extend_all(&mut buf, depth, &mut |w| {
        let mass = mu.word_measure(w);
        if mass > 0.0 {
            let (_, sup) = cylinder_birkhoff_bounds(sys, psi, w, n);
            items.push((mass, math::exp(sup)));
        }
    });
    let cylinders = items.len();
    let classes = group_classes(items);
    let need = 1.0 - gamma;
    let sol = if cylinders <= opts.exact_cap {
        min_cost_cover(&classes, need, opts.node_budget)
    } else {
        greedy_cover(&classes, need)
    };
    Ok(KatokValue {
        value: sol.cost,
        exact: sol.exact,
        lower_bound: sol.lower_bound,
        cylinders,
        classes: classes.len(),
    })
}

fn group_classes(mut items: Vec<(f64, f64)>) -> Vec<CoverClass> {
    items.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
    let mut classes: Vec<(f64, f64, u64)> = Vec::new();
    for (mass, cost) in items {
        match classes.last_mut() {
            Some((m, c, k)) if close(*c / *k as f64, cost) && close(*m / *k as f64, mass) => {
                *m += mass;
                *c += cost;
                *k += 1;
            }
            _ => classes.push((mass, cost, 1)),
        }
    }
    classes
        .into_iter()
        .map(|(m, c, k)| CoverClass {
            mass: m / k as f64,
            cost: c / k as f64,
            count: k,
        })
        .collect()
}

const SLACK: f64 = 1e-12;

/// Order of classes by mass per unit cost, best first.
fn ratio_order(classes: &[CoverClass]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = classes[a].mass / classes[a].cost;
        let rb = classes[b].mass / classes[b].cost;
        rb.total_cmp(&ra)
            .then(classes[b].mass.total_cmp(&classes[a].mass))
    });
    order
}

fn lp_bound(classes: &[CoverClass], order: &[usize], from: usize, mut need: f64) -> f64 {
    let mut cost = 0.0;
    for &i in &order[from..] {
        if need <= SLACK {
            return cost;
        }
        let c = &classes[i];
        let take = (need / c.mass).min(c.count as f64);
        cost += take * c.cost;
        need -= take * c.mass;
    }
    if need <= SLACK {
        cost
    } else {
        f64::INFINITY
    }
}

fn greedy_cover(classes: &[CoverClass], need: f64) -> CoverSolution {
    let order = ratio_order(classes);
    let mut taken = alloc::vec![0u64; classes.len()];
    let mut left = need;
    let mut cost = 0.0;
    for &i in &order {
        if left <= SLACK {
            break;
        }
        let c = &classes[i];
        let x = (math::ceil((left - SLACK) / c.mass) as u64).min(c.count);
        taken[i] = x;
        cost += x as f64 * c.cost;
        left -= x as f64 * c.mass;
    }
    CoverSolution {
        cost,
        taken,
        exact: false,
        lower_bound: lp_bound(classes, &order, 0, need),
    }
}

/// Minimizes `Σ x_i cost_i` subject to `Σ x_i mass_i ≥ need`, `0 ≤ x_i ≤ count_i`,
/// by branch and bound over classes in mass-per-cost order with the linear
/// relaxation as bound. Falls back to the best cover found if the node budget
/// runs out, flagging the result as inexact.
pub fn min_cost_cover(classes: &[CoverClass], need: f64, node_budget: u64) -> CoverSolution {
    let order = ratio_order(classes);
    let lower = lp_bound(classes, &order, 0, need);
    let start = greedy_cover(classes, need);
    let mut search = Search {
        classes,
        order: &order,
        best: start.cost,
        best_taken: start.taken,
        current: alloc::vec![0u64; classes.len()],
        nodes: 0,
        budget: node_budget,
        aborted: false,
    };
    if lower.is_finite() {
        search.visit(0, need, 0.0);
    }
    CoverSolution {
        cost: search.best,
        taken: search.best_taken,
        exact: !search.aborted,
        lower_bound: lower,
    }
}

struct Search<'a> {
    classes: &'a [CoverClass],
    order: &'a [usize],
    best: f64,
    best_taken: Vec<u64>,
    current: Vec<u64>,
    nodes: u64,
    budget: u64,
    aborted: bool,
}

impl Search<'_> {
    fn improves(&self, cost: f64) -> bool {
        cost < self.best * (1.0 - 1e-13)
    }

    fn visit(&mut self, pos: usize, need: f64, cost: f64) {
        if need <= SLACK {
            if self.improves(cost) {
                self.best = cost;
                self.best_taken.clone_from(&self.current);
            }
            return;
        }
        if pos == self.order.len() || self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.aborted = true;
            return;
        }
        let i = self.order[pos];
        let c = self.classes[i];
        let most = (math::ceil((need - SLACK) / c.mass) as u64).min(c.count);
        for x in (0..=most).rev() {
            let rest = need - x as f64 * c.mass;
            let here = cost + x as f64 * c.cost;
            // Without overshoot, fewer items from a better class never lowers
            // the bound, so the first pruned count ends the loop.
            if !self.improves(here + lp_bound(self.classes, self.order, pos + 1, rest)) {
                if rest >= 0.0 {
                    break;
                }
                continue;
            }
            self.current[i] = x;
            self.visit(pos + 1, rest, here);
            self.current[i] = 0;
            if self.aborted {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::MarkovMeasure;
    use proptest::prelude::*;

    fn brute_subsets(items: &[(f64, f64)], need: f64) -> f64 {
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << items.len()) {
            let (mut m, mut c) = (0.0, 0.0);
            for (i, &(mass, cost)) in items.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    m += mass;
                    c += cost;
                }
            }
            if m >= need - SLACK {
                best = best.min(c);
            }
        }
        best
    }

    #[test]
    fn uniform_cylinders() {
        let sys = SymbolicSystem::full_shift(2);
        let mu = MarkovMeasure::bernoulli(&sys, &[0.5, 0.5]).unwrap();
        let zero = Potential::constant(&sys, 0.0);
        let opts = KatokOptions::default();
        let v = katok_partition(&sys, &mu, &zero, 0.25, Resolution(2), 3, &opts).unwrap();
        assert_eq!(v.value, 24.0);
        assert!(v.exact);
        assert_eq!(v.cylinders, 32);
        let v = katok_partition(&sys, &mu, &zero, 1e-9, Resolution(2), 3, &opts).unwrap();
        assert_eq!(v.value, 32.0);
    }

    #[test]
    fn bad_gamma_is_rejected() {
        let sys = SymbolicSystem::full_shift(2);
        let mu = MarkovMeasure::bernoulli(&sys, &[0.5, 0.5]).unwrap();
        let zero = Potential::constant(&sys, 0.0);
        assert!(katok_partition(
            &sys,
            &mu,
            &zero,
            1.0,
            Resolution(0),
            3,
            &KatokOptions::default()
        )
        .is_err());
    }

    #[test]
    fn small_instances_match_subset_enumeration() {
        let sys = SymbolicSystem::full_shift(2);
        let psi = Potential::from_fn(&sys, 2, |w| 0.4 * w[0] as f64 + 0.9 * (w[0] & w[1]) as f64)
            .unwrap();
        for (probs, gamma) in [([0.75, 0.25], 0.1), ([0.5, 0.5], 0.3), ([0.3, 0.7], 0.45)] {
            let mu = MarkovMeasure::bernoulli(&sys, &probs).unwrap();
            for n in 1..=3 {
                for m in 0..=1u32 {
                    let depth = n + m as usize;
                    let mut items = Vec::new();
                    for w in sys.enumerate_words(depth, 64).unwrap() {
                        let (_, sup) = cylinder_birkhoff_bounds(&sys, &psi, w.symbols(), n);
                        items.push((mu.word_measure(w.symbols()), math::exp(sup)));
                    }
                    let oracle = brute_subsets(&items, 1.0 - gamma);
                    let v = katok_partition(
                        &sys,
                        &mu,
                        &psi,
                        gamma,
                        Resolution(m),
                        n,
                        &KatokOptions::default(),
                    )
                    .unwrap();
                    assert!(v.exact);
                    assert!(
                        (v.value - oracle).abs() <= 1e-12 * oracle,
                        "n={n} m={m}: {} vs {oracle}",
                        v.value
                    );
                }
            }
        }
    }

    #[test]
    fn greedy_is_an_upper_bound() {
        let sys = SymbolicSystem::full_shift(2);
        let mu = MarkovMeasure::bernoulli(&sys, &[0.7, 0.3]).unwrap();
        let psi = Potential::indicator(&sys, 1, 0.5).unwrap();
        let exact = katok_partition(
            &sys,
            &mu,
            &psi,
            0.2,
            Resolution(1),
            8,
            &KatokOptions::default(),
        )
        .unwrap();
        let opts = KatokOptions {
            exact_cap: 4,
            ..KatokOptions::default()
        };
        let greedy = katok_partition(&sys, &mu, &psi, 0.2, Resolution(1), 8, &opts).unwrap();
        assert!(!greedy.exact);
        assert!(greedy.value >= exact.value * (1.0 - 1e-12));
        assert!(exact.lower_bound <= exact.value * (1.0 + 1e-12));
    }

    proptest! {
        #[test]
        fn cover_matches_subsets(
            raw in prop::collection::vec((1u32..20, 1u32..6), 1..12),
            need in 0.05f64..0.95,
        ) {
            let total: f64 = raw.iter().map(|&(m, _)| m as f64).sum();
            let items: Vec<(f64, f64)> = raw.iter().map(|&(m, c)| (m as f64 / total, c as f64)).collect();
            let classes = group_classes(items.clone());
            let sol = min_cost_cover(&classes, need, 1 << 20);
            let oracle = brute_subsets(&items, need);
            prop_assert!(sol.exact);
            prop_assert!((sol.cost - oracle).abs() < 1e-9, "{} vs {}", sol.cost, oracle);
        }

        #[test]
        fn monotone_in_gamma_n_and_m(
            p in 0.1f64..0.9,
            g1 in 0.05f64..0.9,
            g2 in 0.05f64..0.9,
            n in 1usize..5,
            m in 0u32..3,
        ) {
            let sys = SymbolicSystem::full_shift(2);
            let mu = MarkovMeasure::bernoulli(&sys, &[p, 1.0 - p]).unwrap();
            let psi = Potential::indicator(&sys, 1, 0.3).unwrap();
            let opts = KatokOptions::default();
            let nv = |g: f64, n: usize, m: u32| katok_partition(&sys, &mu, &psi, g, Resolution(m), n, &opts).unwrap().value;
            let (lo, hi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
            let tol = 1.0 + 1e-12;
            prop_assert!(nv(hi, n, m) <= nv(lo, n, m) * tol);
            prop_assert!(nv(lo, n, m) <= nv(lo, n + 1, m) * tol);
            prop_assert!(nv(lo, n, m) <= nv(lo, n, m + 1) * tol);
        }
    }
}
