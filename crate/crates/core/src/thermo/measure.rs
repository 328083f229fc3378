use alloc::vec;
use alloc::vec::Vec;

use super::{encode, Potential};
use crate::error::{bail, Error, Result};
use crate::math::{self, xlogx};
use crate::symbolic::SymbolicSystem;

/// Shift-invariant probability measures that can report cylinder masses.
pub trait InvariantMeasure {
    fn alphabet_size(&self) -> usize;

    /// `μ([w])`; zero for inadmissible words.
    fn word_measure(&self, w: &[u8]) -> f64;

    /// Kolmogorov–Sinai entropy in nats.
    fn entropy_rate(&self) -> f64;

    /// `∫ φ dμ`.
    fn integrate(&self, phi: &Potential) -> Result<f64>;

    fn is_ergodic(&self) -> bool;

    /// `h_μ + ∫ ψ dμ`.
    fn free_energy(&self, psi: &Potential) -> Result<f64> {
        Ok(self.entropy_rate() + self.integrate(psi)?)
    }
}

/// A stationary Markov chain of order `s`: the next symbol depends on the
/// last `s` symbols. States are the admissible words of length `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovMeasure {
    alphabet: usize,
    order: usize,
    states: Vec<Vec<u8>>,
    index: Vec<usize>,
    stochastic: Vec<f64>,
    stationary: Vec<f64>,
}

const NONE: usize = usize::MAX;

impl MarkovMeasure {
    /// First-order chain from a row-stochastic matrix on symbols. The
    /// stationary vector must be unique.
    pub fn new(sys: &SymbolicSystem, rows: Vec<Vec<f64>>) -> Result<Self> {
        let (states, index, p) = first_order(sys, &rows)?;
        let pi = math::stationary_vector(&p, states.len())
            .ok_or_else(|| Error::InvalidMeasure("stationary vector is not unique".into()))?;
        Self::assemble(sys.alphabet_size(), 1, states, index, p, pi)
    }

    /// First-order chain with an explicitly supplied stationary vector, for
    /// reducible chains such as point masses on fixed points.
    pub fn with_stationary(
        sys: &SymbolicSystem,
        rows: Vec<Vec<f64>>,
        stationary: Vec<f64>,
    ) -> Result<Self> {
        let (states, index, p) = first_order(sys, &rows)?;
        if stationary.len() != states.len() {
            bail!(
                InvalidMeasure,
                "stationary vector has {} entries, expected {}",
                stationary.len(),
                states.len()
            );
        }
        Self::assemble(sys.alphabet_size(), 1, states, index, p, stationary)
    }

    /// The product measure with symbol probabilities `probs`.
    pub fn bernoulli(sys: &SymbolicSystem, probs: &[f64]) -> Result<Self> {
        if probs.len() != sys.alphabet_size() {
            bail!(
                InvalidMeasure,
                "{} probabilities for {} symbols",
                probs.len(),
                sys.alphabet_size()
            );
        }
        let rows = vec![probs.to_vec(); probs.len()];
        let (states, index, p) = first_order(sys, &rows)?;
        Self::assemble(sys.alphabet_size(), 1, states, index, p, probs.to_vec())
    }

    /// Chain of order `order` on the admissible `order`-words of `sys`
    /// (lexicographic). `stochastic[u * n + v]` is the probability of moving
    /// from state `u` to state `v`.
    pub fn from_blocks(
        sys: &SymbolicSystem,
        order: usize,
        stochastic: Vec<f64>,
        stationary: Vec<f64>,
    ) -> Result<Self> {
        if order == 0 || order > 16 {
            bail!(
                InvalidMeasure,
                "order must be between 1 and 16, got {order}"
            );
        }
        let k = sys.alphabet_size();
        let mut states = Vec::new();
        let mut buf = Vec::new();
        sys.extend_all(&mut buf, order, &mut |w| states.push(w.to_vec()));
        let n = states.len();
        if stochastic.len() != n * n || stationary.len() != n {
            bail!(
                InvalidMeasure,
                "block chain dimensions do not match {n} states"
            );
        }
        let mut index = vec![NONE; k.pow(order as u32)];
        for (i, s) in states.iter().enumerate() {
            index[encode(s, k)] = i;
        }
        for u in 0..n {
            for v in 0..n {
                if stochastic[u * n + v] > 0.0 && !block_edge(sys, &states[u], &states[v]) {
                    bail!(
                        InvalidMeasure,
                        "positive probability on forbidden move {u} -> {v}"
                    );
                }
            }
        }
        Self::assemble(k, order, states, index, stochastic, stationary)
    }

    fn assemble(
        alphabet: usize,
        order: usize,
        states: Vec<Vec<u8>>,
        index: Vec<usize>,
        stochastic: Vec<f64>,
        stationary: Vec<f64>,
    ) -> Result<Self> {
        let n = states.len();
        for u in 0..n {
            let row = &stochastic[u * n..(u + 1) * n];
            if row.iter().any(|&x| !(0.0..=1.0 + 1e-12).contains(&x)) {
                bail!(InvalidMeasure, "row {u} has an entry outside [0, 1]");
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                bail!(InvalidMeasure, "row {u} sums to {sum}, not 1");
            }
        }
        if stationary.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            bail!(InvalidMeasure, "stationary vector has a negative entry");
        }
        let total: f64 = stationary.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            bail!(InvalidMeasure, "stationary vector sums to {total}, not 1");
        }
        let measure = MarkovMeasure {
            alphabet,
            order,
            states,
            index,
            stochastic,
            stationary,
        };
        let residual = measure.stationarity_residual();
        if residual > 1e-10 {
            bail!(
                InvalidMeasure,
                "stationary vector is not invariant (residual {residual:e})"
            );
        }
        Ok(measure)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn stochastic(&self) -> &[f64] {
        &self.stochastic
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Symbol marginals `μ([a])`.
    pub fn symbol_marginals(&self) -> Vec<f64> {
        (0..self.alphabet as u8)
            .map(|a| self.word_measure(&[a]))
            .collect()
    }

    /// `max_v |(πP)_v - π_v|`.
    pub fn stationarity_residual(&self) -> f64 {
        let n = self.states.len();
        (0..n)
            .map(|v| {
                let flow: f64 = (0..n)
                    .map(|u| self.stationary[u] * self.stochastic[u * n + v])
                    .sum();
                (flow - self.stationary[v]).abs()
            })
            .fold(0.0, f64::max)
    }

    #[inline]
    fn state_of(&self, w: &[u8]) -> usize {
        if w.iter().any(|&s| s as usize >= self.alphabet) {
            return NONE;
        }
        self.index[encode(w, self.alphabet)]
    }

    /// `μ(x_{|ctx|} = a | x_0 … x_{|ctx|-1} = ctx)` for a context of at least
    /// `order` symbols.
    #[inline]
    pub fn conditional(&self, ctx: &[u8], a: u8) -> f64 {
        let s = self.order;
        let u = self.state_of(&ctx[ctx.len() - s..]);
        if u == NONE {
            return 0.0;
        }
        let mut next = [0u8; 16];
        let tail = &ctx[ctx.len() - s + 1..];
        next[..s - 1].copy_from_slice(tail);
        next[s - 1] = a;
        let v = self.state_of(&next[..s]);
        if v == NONE {
            0.0
        } else {
            self.stochastic[u * self.states.len() + v]
        }
    }
}

fn block_edge(sys: &SymbolicSystem, u: &[u8], v: &[u8]) -> bool {
    u[1..] == v[..v.len() - 1] && sys.allowed(u[u.len() - 1], v[v.len() - 1])
}

type FirstOrder = (Vec<Vec<u8>>, Vec<usize>, Vec<f64>);

fn first_order(sys: &SymbolicSystem, rows: &[Vec<f64>]) -> Result<FirstOrder> {
    let k = sys.alphabet_size();
    if rows.len() != k {
        bail!(
            InvalidMeasure,
            "stochastic matrix has {} rows, expected {k}",
            rows.len()
        );
    }
    let mut p = Vec::with_capacity(k * k);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != k {
            bail!(
                InvalidMeasure,
                "row {i} has {} entries, expected {k}",
                row.len()
            );
        }
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                bail!(InvalidMeasure, "row {i}, column {j} is not finite");
            }
            if x > 0.0 && !sys.allowed(i as u8, j as u8) {
                bail!(
                    InvalidMeasure,
                    "row {i}, column {j}: positive probability on a forbidden transition"
                );
            }
            p.push(x);
        }
    }
    let states = (0..k as u8).map(|a| vec![a]).collect();
    let index = (0..k).collect();
    Ok((states, index, p))
}

impl InvariantMeasure for MarkovMeasure {
    fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    fn word_measure(&self, w: &[u8]) -> f64 {
        let s = self.order;
        if w.len() < s {
            return self
                .states
                .iter()
                .zip(&self.stationary)
                .filter(|(st, _)| st.starts_with(w))
                .map(|(_, &p)| p)
                .sum();
        }
        let u = self.state_of(&w[..s]);
        if u == NONE {
            return 0.0;
        }
        let mut mass = self.stationary[u];
        for i in s..w.len() {
            if mass == 0.0 {
                break;
            }
            mass *= self.conditional(&w[..i], w[i]);
        }
        mass
    }

    fn entropy_rate(&self) -> f64 {
        let n = self.states.len();
        let mut h = 0.0;
        for u in 0..n {
            let row: f64 = self.stochastic[u * n..(u + 1) * n]
                .iter()
                .map(|&p| xlogx(p))
                .sum();
            h -= self.stationary[u] * row;
        }
        h.max(0.0)
    }

    fn integrate(&self, phi: &Potential) -> Result<f64> {
        if phi.alphabet_size() != self.alphabet {
            return Err(Error::AlphabetMismatch {
                left: self.alphabet,
                right: phi.alphabet_size(),
            });
        }
        let len = phi.range().max(self.order);
        let work = (self.alphabet as u128).saturating_pow(len as u32);
        if work > crate::DEFAULT_ENUMERATION_CAP as u128 {
            return Err(Error::EnumerationCap {
                cap: crate::DEFAULT_ENUMERATION_CAP,
                requested: work,
            });
        }
        let mut total = 0.0;
        let mut buf = Vec::with_capacity(len);
        for (u, st) in self.states.iter().enumerate() {
            let p = self.stationary[u];
            if p == 0.0 {
                continue;
            }
            buf.clear();
            buf.extend_from_slice(st);
            self.integrate_paths(phi, &mut buf, len, p, &mut total);
        }
        Ok(total)
    }

    fn is_ergodic(&self) -> bool {
        let n = self.states.len();
        let support: Vec<usize> = (0..n).filter(|&u| self.stationary[u] > 0.0).collect();
        let Some(&root) = support.first() else {
            return false;
        };
        let forward = reach(n, root, |u, v| self.stochastic[u * n + v] > 0.0);
        let backward = reach(n, root, |u, v| self.stochastic[v * n + u] > 0.0);
        support.iter().all(|&u| forward[u] && backward[u])
    }
}

impl MarkovMeasure {
    fn integrate_paths(
        &self,
        phi: &Potential,
        buf: &mut Vec<u8>,
        len: usize,
        mass: f64,
        total: &mut f64,
    ) {
        if buf.len() >= len {
            *total += mass * phi.value(buf);
            return;
        }
        for a in 0..self.alphabet as u8 {
            let p = self.conditional(buf, a);
            if p > 0.0 {
                buf.push(a);
                self.integrate_paths(phi, buf, len, mass * p, total);
                buf.pop();
            }
        }
    }
}

fn reach(n: usize, root: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if !seen[v] && edge(u, v) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// A finite convex combination of Markov measures. Entropy and integrals are
/// affine in the weights, so both are taken componentwise.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedMeasure {
    components: Vec<(f64, MarkovMeasure)>,
}

impl MixedMeasure {
    pub fn new(components: Vec<(f64, MarkovMeasure)>) -> Result<Self> {
        if components.is_empty() {
            bail!(InvalidMeasure, "a mixture needs at least one component");
        }
        let k = components[0].1.alphabet;
        if components
            .iter()
            .any(|(w, m)| !(*w >= 0.0) || m.alphabet != k)
        {
            bail!(
                InvalidMeasure,
                "mixture weights must be nonnegative on a common alphabet"
            );
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            bail!(InvalidMeasure, "mixture weights sum to {total}, not 1");
        }
        Ok(MixedMeasure { components })
    }

    pub fn components(&self) -> &[(f64, MarkovMeasure)] {
        &self.components
    }
}

impl InvariantMeasure for MixedMeasure {
    fn alphabet_size(&self) -> usize {
        self.components[0].1.alphabet
    }

    fn word_measure(&self, w: &[u8]) -> f64 {
        self.components
            .iter()
            .map(|(t, m)| t * m.word_measure(w))
            .sum()
    }

    fn entropy_rate(&self) -> f64 {
        self.components
            .iter()
            .map(|(t, m)| t * m.entropy_rate())
            .sum()
    }

    fn integrate(&self, phi: &Potential) -> Result<f64> {
        let mut total = 0.0;
        for (t, m) in &self.components {
            total += t * m.integrate(phi)?;
        }
        Ok(total)
    }

    fn is_ergodic(&self) -> bool {
        let active: Vec<_> = self.components.iter().filter(|(t, _)| *t > 0.0).collect();
        !active.is_empty()
            && active.windows(2).all(|p| p[0].1 == p[1].1)
            && active.iter().all(|(_, m)| m.is_ergodic())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn full2() -> SymbolicSystem {
        SymbolicSystem::full_shift(2)
    }

    #[test]
    fn entropy_examples() {
        let sys = full2();
        let fair = MarkovMeasure::bernoulli(&sys, &[0.5, 0.5]).unwrap();
        assert!((fair.entropy_rate() - math::ln(2.0)).abs() < 1e-15);
        let biased = MarkovMeasure::bernoulli(&sys, &[0.75, 0.25]).unwrap();
        let expected = 0.75 * math::ln(4.0 / 3.0) + 0.25 * math::ln(4.0);
        assert!((biased.entropy_rate() - expected).abs() < 1e-15);
        assert!((biased.entropy_rate() - 0.562335).abs() < 1e-6);
        let point = MarkovMeasure::with_stationary(
            &sys,
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 0.0],
        )
        .unwrap();
        assert_eq!(point.entropy_rate(), 0.0);
        assert!(!MarkovMeasure::new(&sys, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).is_ok());
    }

    #[test]
    fn integral_examples() {
        let sys = full2();
        let phi = Potential::indicator(&sys, 1, 1.0).unwrap();
        let fair = MarkovMeasure::bernoulli(&sys, &[0.5, 0.5]).unwrap();
        let biased = MarkovMeasure::bernoulli(&sys, &[0.75, 0.25]).unwrap();
        assert!((fair.integrate(&phi).unwrap() - 0.5).abs() < 1e-15);
        assert!((biased.integrate(&phi).unwrap() - 0.25).abs() < 1e-15);
        assert!((biased.integrate(&Potential::constant(&sys, 3.5)).unwrap() - 3.5).abs() < 1e-14);
    }

    #[test]
    fn forbidden_transitions_are_rejected() {
        let golden = SymbolicSystem::golden_mean();
        let err = MarkovMeasure::new(&golden, vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap_err();
        assert!(alloc::format!("{err}").contains("row 1, column 1"));
    }

    #[test]
    fn word_measure_of_markov_chain() {
        let golden = SymbolicSystem::golden_mean();
        let mu = MarkovMeasure::new(&golden, vec![vec![0.6, 0.4], vec![1.0, 0.0]]).unwrap();
        let pi = mu.stationary().to_vec();
        assert!((mu.word_measure(&[0, 1, 0]) - pi[0] * 0.4 * 1.0).abs() < 1e-15);
        assert_eq!(mu.word_measure(&[1, 1]), 0.0);
        assert!((mu.word_measure(&[]) - 1.0).abs() < 1e-12);
        assert!(mu.is_ergodic());
    }

    #[test]
    fn mixture_is_not_ergodic() {
        let sys = full2();
        let a = MarkovMeasure::bernoulli(&sys, &[0.25, 0.75]).unwrap();
        let b = MarkovMeasure::bernoulli(&sys, &[0.75, 0.25]).unwrap();
        let mix = MixedMeasure::new(vec![(0.5, a.clone()), (0.5, b)]).unwrap();
        assert!(!mix.is_ergodic());
        assert!(MixedMeasure::new(vec![(1.0, a)]).unwrap().is_ergodic());
        let phi = Potential::indicator(&sys, 1, 1.0).unwrap();
        assert!((mix.integrate(&phi).unwrap() - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn cylinder_masses_are_consistent(p in 0.05f64..0.95, q in 0.05f64..0.95, word in prop::collection::vec(0u8..2, 1..8)) {
            let sys = full2();
            let mu = MarkovMeasure::new(&sys, vec![vec![p, 1.0 - p], vec![q, 1.0 - q]]).unwrap();
            // Additivity over one-symbol extensions on both sides.
            let m = mu.word_measure(&word);
            let right: f64 = (0..2u8).map(|a| { let mut w = word.clone(); w.push(a); mu.word_measure(&w) }).sum();
            let left: f64 = (0..2u8).map(|a| { let mut w = vec![a]; w.extend_from_slice(&word); mu.word_measure(&w) }).sum();
            prop_assert!((m - right).abs() < 1e-14);
            prop_assert!((m - left).abs() < 1e-14);
        }

        #[test]
        fn entropy_is_bounded(p in 0.0f64..=1.0, q in 0.01f64..=1.0) {
            let sys = full2();
            if let Ok(mu) = MarkovMeasure::new(&sys, vec![vec![p, 1.0 - p], vec![q, 1.0 - q]]) {
                let h = mu.entropy_rate();
                prop_assert!(h >= 0.0 && h <= math::ln(2.0) + 1e-12);
            }
        }
    }
}
