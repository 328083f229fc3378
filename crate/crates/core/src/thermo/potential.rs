use alloc::vec;
use alloc::vec::Vec;

use super::encode;
use crate::error::{bail, Error, Result};
use crate::symbolic::{PointRep, Resolution, SymbolicSystem, Word};

/// A locally constant function: `ψ(x)` depends only on `x_0 … x_{r-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    alphabet: usize,
    range: usize,
    table: Vec<f64>,
    defined: Vec<bool>,
}

const MAX_TABLE: usize = 1 << 22;

impl Potential {
    /// Builds a potential from one value per admissible word of length `range`.
    pub fn new(
        sys: &SymbolicSystem,
        range: usize,
        entries: impl IntoIterator<Item = (Word, f64)>,
    ) -> Result<Self> {
        let k = sys.alphabet_size();
        let size = table_size(k, range)?;
        let mut table = vec![0.0; size];
        let mut defined = vec![false; size];
        for (w, v) in entries {
            if w.len() != range {
                bail!(
                    InvalidPotential,
                    "entry \"{w}\" has length {}, expected {range}",
                    w.len()
                );
            }
            if !sys.is_admissible(w.symbols()) {
                bail!(InvalidPotential, "entry \"{w}\" is not an admissible word");
            }
            if !v.is_finite() {
                bail!(InvalidPotential, "entry \"{w}\" has non-finite value {v}");
            }
            let i = encode(w.symbols(), k);
            if defined[i] {
                bail!(InvalidPotential, "entry \"{w}\" appears twice");
            }
            table[i] = v;
            defined[i] = true;
        }
        let mut missing = None;
        let mut buf = Vec::with_capacity(range);
        sys.extend_all(&mut buf, range, &mut |w| {
            if missing.is_none() && !defined[encode(w, k)] {
                missing = Some(Word::from(w));
            }
        });
        if let Some(w) = missing {
            bail!(
                InvalidPotential,
                "no value given for admissible word \"{w}\""
            );
        }
        Ok(Potential {
            alphabet: k,
            range,
            table,
            defined,
        })
    }

    pub fn from_fn(sys: &SymbolicSystem, range: usize, f: impl Fn(&[u8]) -> f64) -> Result<Self> {
        let mut entries = Vec::new();
        let mut buf = Vec::with_capacity(range);
        table_size(sys.alphabet_size(), range)?;
        sys.extend_all(&mut buf, range, &mut |w| {
            entries.push((Word::from(w), f(w)))
        });
        Self::new(sys, range, entries)
    }

    pub fn constant(sys: &SymbolicSystem, c: f64) -> Self {
        Self::from_fn(sys, 1, |_| c).expect("constant potential is valid")
    }

    /// `value · 1_[symbol]`.
    pub fn indicator(sys: &SymbolicSystem, symbol: u8, value: f64) -> Result<Self> {
        if symbol as usize >= sys.alphabet_size() {
            bail!(InvalidPotential, "symbol {symbol} outside the alphabet");
        }
        Self::from_fn(sys, 1, |w| if w[0] == symbol { value } else { 0.0 })
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    /// Value at any point starting with `symbols` (at least `range` long).
    #[inline]
    pub fn value(&self, symbols: &[u8]) -> f64 {
        self.table[encode(&symbols[..self.range], self.alphabet)]
    }

    pub fn entries(&self) -> Vec<(Word, f64)> {
        let mut out = Vec::new();
        for (i, (&v, &d)) in self.table.iter().zip(&self.defined).enumerate() {
            if d {
                out.push((Word::new(decode(i, self.alphabet, self.range)), v));
            }
        }
        out
    }

    fn defined_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.table
            .iter()
            .zip(&self.defined)
            .filter(|(_, &d)| d)
            .map(|(&v, _)| v)
    }

    pub fn max_value(&self) -> f64 {
        self.defined_values().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.defined_values().fold(f64::INFINITY, f64::min)
    }

    /// `‖ψ‖ = max |ψ|`.
    pub fn sup_norm(&self) -> f64 {
        self.defined_values().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn is_constant(&self) -> bool {
        self.max_value() == self.min_value()
    }

    pub fn scaled(&self, c: f64) -> Potential {
        let mut out = self.clone();
        out.table.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn shifted(&self, c: f64) -> Potential {
        let mut out = self.clone();
        for (v, &d) in out.table.iter_mut().zip(&self.defined) {
            if d {
                *v += c;
            }
        }
        out
    }

    /// `self + c · other`, with range the larger of the two.
    pub fn add_scaled(&self, sys: &SymbolicSystem, other: &Potential, c: f64) -> Result<Potential> {
        if other.alphabet != self.alphabet || sys.alphabet_size() != self.alphabet {
            return Err(Error::AlphabetMismatch {
                left: self.alphabet,
                right: other.alphabet,
            });
        }
        let r = self.range.max(other.range);
        Self::from_fn(sys, r, |w| self.value(w) + c * other.value(w))
    }

    /// The same function presented with a longer range.
    pub fn extended(&self, sys: &SymbolicSystem, range: usize) -> Result<Potential> {
        if range < self.range {
            bail!(
                InvalidPotential,
                "cannot shrink range {} to {range}",
                self.range
            );
        }
        Self::from_fn(sys, range, |w| self.value(w))
    }

    /// `S_n ψ` along a word; needs `n + r - 1` symbols.
    pub fn birkhoff_sum(&self, word: &[u8], n: usize) -> Result<f64> {
        if n == 0 {
            bail!(InvalidArgument, "Birkhoff sums need n >= 1");
        }
        let needed = n + self.range - 1;
        if word.len() < needed {
            return Err(Error::WordTooShort {
                needed,
                got: word.len(),
            });
        }
        Ok(self.birkhoff_sum_unchecked(word, n))
    }

    #[inline]
    pub(crate) fn birkhoff_sum_unchecked(&self, word: &[u8], n: usize) -> f64 {
        (0..n).map(|i| self.value(&word[i..])).sum()
    }

    pub fn birkhoff_average(&self, word: &[u8], n: usize) -> Result<f64> {
        Ok(self.birkhoff_sum(word, n)? / n as f64)
    }

    pub fn birkhoff_sum_point(&self, x: &PointRep, n: usize) -> Result<f64> {
        self.birkhoff_sum(x.prefix(n + self.range - 1).symbols(), n)
    }

    /// `Var(ψ, 2^-m) = sup{|ψ(x) - ψ(y)| : d(x, y) < 2^-m}`. Points that close
    /// share their first `m + 1` symbols, so the value is zero once
    /// `m + 1 ≥ r` and otherwise the largest spread among table entries with a
    /// common `(m + 1)`-prefix.
    pub fn oscillation(&self, eps: Resolution) -> f64 {
        let fixed = eps.m() as usize + 1;
        if fixed >= self.range {
            return 0.0;
        }
        let groups = self.alphabet.pow(fixed as u32);
        let tail = self.alphabet.pow((self.range - fixed) as u32);
        let mut worst = 0.0f64;
        for g in 0..groups {
            let vals = (0..tail)
                .map(|t| g * tail + t)
                .filter(|&i| self.defined[i])
                .map(|i| self.table[i]);
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
            if hi >= lo {
                worst = worst.max(hi - lo);
            }
        }
        worst
    }
}

fn table_size(k: usize, range: usize) -> Result<usize> {
    if range == 0 {
        bail!(InvalidPotential, "range must be at least 1");
    }
    match k.checked_pow(range as u32) {
        Some(s) if s <= MAX_TABLE => Ok(s),
        _ => bail!(
            InvalidPotential,
            "range {range} is too large for {k} symbols"
        ),
    }
}

fn decode(mut i: usize, k: usize, len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    for slot in out.iter_mut().rev() {
        *slot = (i % k) as u8;
        i /= k;
    }
    out
}

/// Infimum and supremum of `S_n ψ` over the points of `[w] ∩ X`.
///
/// When `w` already fixes the `n + r - 1` coordinates that `S_n ψ` reads, both
/// are the same value; otherwise the missing coordinates are searched.
pub fn cylinder_birkhoff_bounds(
    sys: &SymbolicSystem,
    psi: &Potential,
    w: &[u8],
    n: usize,
) -> (f64, f64) {
    let needed = n + psi.range() - 1;
    if w.len() >= needed {
        let s = psi.birkhoff_sum_unchecked(w, n);
        return (s, s);
    }
    // Windows fully inside w are common to every extension.
    let inside = (w.len() + 1).saturating_sub(psi.range()).min(n);
    let base = psi.birkhoff_sum_unchecked(w, inside);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut buf = w.to_vec();
    sys.extend_all(&mut buf, needed, &mut |ext| {
        let s = base + (inside..n).map(|i| psi.value(&ext[i..])).sum::<f64>();
        lo = lo.min(s);
        hi = hi.max(s);
    });
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_range(sys: &SymbolicSystem, vals: [f64; 4]) -> Potential {
        Potential::from_fn(sys, 2, |w| vals[(w[0] * 2 + w[1]) as usize]).unwrap()
    }

    #[test]
    fn birkhoff_examples() {
        let sys = SymbolicSystem::full_shift(2);
        let phi = Potential::indicator(&sys, 1, 1.0).unwrap();
        let x = PointRep::parse(&sys, "01").unwrap();
        assert_eq!(phi.birkhoff_sum_point(&x, 4).unwrap() / 4.0, 0.5);
        assert_eq!(phi.birkhoff_average(&[0, 0, 0, 1], 4).unwrap(), 0.25);
        let c = Potential::constant(&sys, 2.5);
        assert_eq!(c.birkhoff_average(&[1, 0, 1], 3).unwrap(), 2.5);
        let psi = two_range(&sys, [0.0, 1.0, 2.0, 3.0]);
        assert!(matches!(
            psi.birkhoff_sum(&[0, 1, 1], 3),
            Err(Error::WordTooShort { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn oscillation_examples() {
        let sys = SymbolicSystem::full_shift(2);
        let r1 = Potential::from_fn(&sys, 1, |w| if w[0] == 0 { 0.0 } else { 5.0 }).unwrap();
        assert_eq!(r1.oscillation(Resolution(0)), 0.0);
        assert_eq!(r1.oscillation(Resolution(3)), 0.0);
        let r2 = two_range(&sys, [0.0, 3.0, 1.0, 2.0]);
        assert_eq!(r2.oscillation(Resolution(0)), 3.0);
        assert_eq!(r2.oscillation(Resolution(1)), 0.0);
    }

    #[test]
    fn oscillation_matches_pairwise_definition() {
        // Brute force over pairs of words of length 4 agreeing on m + 1 symbols.
        let sys = SymbolicSystem::full_shift(2);
        let psi = Potential::from_fn(&sys, 3, |w| {
            (w[0] as f64) * 0.3 + (w[1] as f64) * 1.7 - (w[2] as f64) * 0.9
        })
        .unwrap();
        let words = sys.enumerate_words(4, 64).unwrap();
        for m in 0..4u32 {
            let mut worst = 0.0f64;
            for a in &words {
                for b in &words {
                    if a.symbols()[..=m as usize] == b.symbols()[..=m as usize] {
                        worst = worst.max((psi.value(a.symbols()) - psi.value(b.symbols())).abs());
                    }
                }
            }
            assert!(
                (psi.oscillation(Resolution(m)) - worst).abs() < 1e-12,
                "m = {m}"
            );
        }
    }

    #[test]
    fn incomplete_table_is_rejected() {
        let sys = SymbolicSystem::golden_mean();
        let entries = [
            (Word::parse("00").unwrap(), 1.0),
            (Word::parse("01").unwrap(), 1.0),
        ];
        let err = Potential::new(&sys, 2, entries).unwrap_err();
        assert!(alloc::format!("{err}").contains("\"10\""));
        let bad = [(Word::parse("11").unwrap(), 1.0)];
        assert!(Potential::new(&sys, 2, bad).is_err());
    }

    #[test]
    fn cylinder_bounds_search_extensions() {
        let sys = SymbolicSystem::golden_mean();
        let psi = Potential::from_fn(&sys, 3, |w| w.iter().map(|&s| s as f64).sum()).unwrap();
        // [0] with n = 1 reads x_0 x_1 x_2: sup at 010 (value 1), inf at 000.
        assert_eq!(cylinder_birkhoff_bounds(&sys, &psi, &[0], 1), (0.0, 1.0));
        assert_eq!(
            cylinder_birkhoff_bounds(&sys, &psi, &[1, 0, 1], 1),
            (2.0, 2.0)
        );
    }

    #[test]
    fn entries_round_trip() {
        let sys = SymbolicSystem::golden_mean();
        let psi = Potential::from_fn(&sys, 2, |w| w[0] as f64 - 0.5 * w[1] as f64).unwrap();
        let back = Potential::new(&sys, 2, psi.entries()).unwrap();
        assert_eq!(psi, back);
        assert_eq!(psi.entries().len(), 3);
    }
}
