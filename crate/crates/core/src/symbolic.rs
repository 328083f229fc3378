//! Shift spaces over a finite alphabet.
//!
//! Points are one-sided sequences with the metric `d(x, y) = 2^-j`, where `j`
//! is the first index at which `x` and `y` differ. Under this metric the Bowen
//! ball `B_n(x, 2^-m)` is exactly the cylinder fixed by the first `n + m`
//! coordinates of `x`, so every ball, distance and cover below is exact.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{bail, Error, Result};

/// A finite sequence of symbols. Admissibility is checked against a
/// [`SymbolicSystem`]; the type itself is just storage.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(symbols: Vec<u8>) -> Self {
        Word(symbols)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Parses a word written with one decimal digit per symbol (`"0110"`).
    pub fn parse(text: &str) -> Result<Self> {
        text.bytes()
            .enumerate()
            .map(|(i, b)| {
                if b.is_ascii_digit() {
                    Ok(b - b'0')
                } else {
                    Err(Error::InvalidArgument(alloc::format!(
                        "symbol {:?} at position {i} is not a digit",
                        b as char
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }
}

impl From<&[u8]> for Word {
    fn from(s: &[u8]) -> Self {
        Word(s.to_vec())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word(\"{self}\")")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            if s < 10 {
                write!(f, "{s}")?;
            } else {
                write!(f, "[{s}]")?;
            }
        }
        Ok(())
    }
}

/// A resolution `ε = 2^-m`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Resolution(pub u32);

impl Resolution {
    pub fn m(self) -> u32 {
        self.0
    }

    pub fn radius(self) -> Dyadic {
        Dyadic::Pow2Neg(self.0)
    }

    pub fn value(self) -> f64 {
        libm::ldexp(1.0, -(self.0 as i32))
    }

    /// `ε / 2^steps`.
    pub fn finer(self, steps: u32) -> Resolution {
        Resolution(self.0 + steps)
    }

    /// `ε · 2^steps`, which must still be at most 1.
    pub fn coarser(self, steps: u32) -> Result<Resolution> {
        match self.0.checked_sub(steps) {
            Some(m) => Ok(Resolution(m)),
            None => bail!(
                InvalidArgument,
                "resolution 2^-{} cannot be coarsened by 2^{}",
                self.0,
                steps
            ),
        }
    }
}

/// An exact distance value: zero or a power `2^-e`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Dyadic {
    Zero,
    Pow2Neg(u32),
}

impl Dyadic {
    pub fn to_f64(self) -> f64 {
        match self {
            Dyadic::Zero => 0.0,
            Dyadic::Pow2Neg(e) => libm::ldexp(1.0, -(e as i32)),
        }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Dyadic::Zero, Dyadic::Zero) => Ordering::Equal,
            (Dyadic::Zero, _) => Ordering::Less,
            (_, Dyadic::Zero) => Ordering::Greater,
            (Dyadic::Pow2Neg(a), Dyadic::Pow2Neg(b)) => b.cmp(a),
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A subshift of finite type: the sequences whose consecutive symbols are all
/// allowed by a 0/1 transition matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicSystem {
    alphabet: usize,
    transition: Vec<bool>,
    label: String,
    /// Smallest `M` with `A^M > 0`, `None` when not primitive.
    exponent: Option<usize>,
}

impl SymbolicSystem {
    pub fn new(
        alphabet: usize,
        transition: Vec<Vec<u8>>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if alphabet < 2 {
            bail!(
                InvalidSystem,
                "alphabet must have at least 2 symbols, got {alphabet}"
            );
        }
        if alphabet > 255 {
            bail!(InvalidSystem, "alphabet of {alphabet} symbols is too large");
        }
        if transition.len() != alphabet {
            bail!(
                InvalidSystem,
                "transition has {} rows, expected {alphabet}",
                transition.len()
            );
        }
        let mut flat = Vec::with_capacity(alphabet * alphabet);
        for (i, row) in transition.iter().enumerate() {
            if row.len() != alphabet {
                bail!(
                    InvalidSystem,
                    "row {i} has {} entries, expected {alphabet}",
                    row.len()
                );
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => flat.push(false),
                    1 => flat.push(true),
                    _ => bail!(
                        InvalidSystem,
                        "row {i}, column {j}: entry {v} is not 0 or 1"
                    ),
                }
            }
        }
        for i in 0..alphabet {
            if !(0..alphabet).any(|j| flat[i * alphabet + j]) {
                bail!(InvalidSystem, "row {i} has no allowed transition");
            }
            if !(0..alphabet).any(|j| flat[j * alphabet + i]) {
                bail!(InvalidSystem, "column {i} has no allowed transition");
            }
        }
        let exponent = primitive_exponent(&flat, alphabet);
        Ok(SymbolicSystem {
            alphabet,
            transition: flat,
            label: label.into(),
            exponent,
        })
    }

    pub fn full_shift(alphabet: usize) -> Self {
        Self::new(
            alphabet,
            vec![vec![1; alphabet]; alphabet],
            alloc::format!("full {alphabet}-shift"),
        )
        .expect("full shift is valid")
    }

    /// The golden-mean shift: no two consecutive 1s.
    pub fn golden_mean() -> Self {
        Self::new(2, vec![vec![1, 1], vec![1, 0]], "golden mean").expect("golden mean is valid")
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn allowed(&self, from: u8, to: u8) -> bool {
        self.transition[from as usize * self.alphabet + to as usize]
    }

    pub fn transition_rows(&self) -> Vec<Vec<u8>> {
        (0..self.alphabet)
            .map(|i| {
                (0..self.alphabet)
                    .map(|j| self.transition[i * self.alphabet + j] as u8)
                    .collect()
            })
            .collect()
    }

    pub fn is_primitive(&self) -> bool {
        self.exponent.is_some()
    }

    /// Smallest `M` such that every entry of `A^M` is positive.
    pub fn mixing_exponent(&self) -> Result<usize> {
        self.exponent.ok_or(Error::NotPrimitive)
    }

    pub fn require_primitive(&self) -> Result<()> {
        self.mixing_exponent().map(|_| ())
    }

    /// True when `other` uses the same alphabet and only transitions allowed here.
    pub fn contains_system(&self, other: &SymbolicSystem) -> bool {
        other.alphabet == self.alphabet
            && other
                .transition
                .iter()
                .zip(&self.transition)
                .all(|(&o, &s)| !o || s)
    }

    /// Index of the first offending position, if any.
    pub fn first_violation(&self, symbols: &[u8]) -> Option<usize> {
        for (i, &s) in symbols.iter().enumerate() {
            if s as usize >= self.alphabet {
                return Some(i);
            }
            if i > 0 && !self.allowed(symbols[i - 1], s) {
                return Some(i);
            }
        }
        None
    }

    pub fn is_admissible(&self, symbols: &[u8]) -> bool {
        self.first_violation(symbols).is_none()
    }

    pub fn check_word(&self, symbols: &[u8]) -> Result<()> {
        match self.first_violation(symbols) {
            Some(index) => Err(Error::Inadmissible { index }),
            None => Ok(()),
        }
    }

    /// Parses and validates a word.
    pub fn word(&self, text: &str) -> Result<Word> {
        let w = Word::parse(text)?;
        self.check_word(w.symbols())?;
        Ok(w)
    }

    /// Number of admissible words of length `n` (sum of the entries of
    /// `A^(n-1)`), saturating at `u128::MAX`.
    pub fn count_words(&self, n: usize) -> u128 {
        if n == 0 {
            return 1;
        }
        let k = self.alphabet;
        let mut counts = vec![1u128; k];
        for _ in 1..n {
            let mut next = vec![0u128; k];
            for a in 0..k {
                for b in 0..k {
                    if self.transition[a * k + b] {
                        next[b] = next[b].saturating_add(counts[a]);
                    }
                }
            }
            counts = next;
        }
        counts
            .into_iter()
            .fold(0u128, |acc, c| acc.saturating_add(c))
    }

    /// All admissible words of length `n` in lexicographic order.
    pub fn enumerate_words(&self, n: usize, cap: u64) -> Result<Vec<Word>> {
        if n == 0 {
            bail!(InvalidArgument, "word length must be at least 1");
        }
        let count = self.count_words(n);
        if count > cap as u128 {
            return Err(Error::EnumerationCap {
                cap,
                requested: count,
            });
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut buf = Vec::with_capacity(n);
        self.extend_all(&mut buf, n, &mut |w| out.push(Word(w.to_vec())));
        Ok(out)
    }

    /// Calls `f` on every admissible word of length `n` extending `buf`, in
    /// lexicographic order. `buf` is restored afterwards.
    pub fn extend_all(&self, buf: &mut Vec<u8>, n: usize, f: &mut dyn FnMut(&[u8])) {
        if buf.len() >= n {
            f(buf);
            return;
        }
        for s in 0..self.alphabet as u8 {
            if buf.last().is_none_or(|&p| self.allowed(p, s)) {
                buf.push(s);
                self.extend_all(buf, n, f);
                buf.pop();
            }
        }
    }

    /// Lexicographically smallest path of exactly `edges` transitions from
    /// `from` to `to`, returned as the intermediate symbols (length `edges - 1`).
    pub fn connector(&self, from: u8, to: u8, edges: usize) -> Result<Word> {
        let k = self.alphabet;
        if edges == 0 {
            return if from == to {
                Ok(Word::empty())
            } else {
                Err(Error::NoConnector { from, to, edges })
            };
        }
        // reach[j][s]: `to` is reachable from `s` in exactly j transitions.
        let mut reach = vec![vec![false; k]; edges + 1];
        reach[0][to as usize] = true;
        for j in 1..=edges {
            for s in 0..k {
                reach[j][s] = (0..k).any(|t| self.transition[s * k + t] && reach[j - 1][t]);
            }
        }
        if !reach[edges][from as usize] {
            return Err(Error::NoConnector { from, to, edges });
        }
        let mut path = Vec::with_capacity(edges - 1);
        let mut cur = from;
        for remaining in (1..edges).rev() {
            let next = (0..k as u8)
                .find(|&t| self.allowed(cur, t) && reach[remaining][t as usize])
                .expect("reachability table guarantees a successor");
            path.push(next);
            cur = next;
        }
        Ok(Word(path))
    }

    /// Lexicographically smallest admissible continuation of `len` symbols
    /// after `last` (or from scratch when `last` is `None`).
    pub fn smallest_continuation(&self, last: Option<u8>, len: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(len);
        let mut cur = last;
        for _ in 0..len {
            let s = (0..self.alphabet as u8)
                .find(|&t| cur.is_none_or(|c| self.allowed(c, t)))
                .expect("every row has an allowed transition");
            out.push(s);
            cur = Some(s);
        }
        out
    }
}

fn primitive_exponent(a: &[bool], k: usize) -> Option<usize> {
    let bound = (k - 1) * (k - 1) + 1; // Wielandt
    let mut power = a.to_vec();
    for m in 1..=bound {
        if power.iter().all(|&x| x) {
            return Some(m);
        }
        let mut next = vec![false; k * k];
        for i in 0..k {
            for j in 0..k {
                next[i * k + j] = (0..k).any(|l| power[i * k + l] && a[l * k + j]);
            }
        }
        power = next;
    }
    None
}

/// The eventually periodic point `preperiod · period^∞`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PointRep {
    preperiod: Word,
    period: Word,
}

impl PointRep {
    pub fn new(sys: &SymbolicSystem, preperiod: Word, period: Word) -> Result<Self> {
        if period.is_empty() {
            bail!(InvalidArgument, "period must be nonempty");
        }
        let check = preperiod.concat(&period).concat(&period);
        sys.check_word(check.symbols())?;
        Ok(PointRep { preperiod, period })
    }

    /// Parses `"pre|period"` or just `"period"`.
    pub fn parse(sys: &SymbolicSystem, text: &str) -> Result<Self> {
        let (pre, per) = match text.split_once('|') {
            Some((a, b)) => (a, b),
            None => ("", text),
        };
        Self::new(sys, Word::parse(pre)?, Word::parse(per)?)
    }

    pub fn preperiod(&self) -> &Word {
        &self.preperiod
    }

    pub fn period(&self) -> &Word {
        &self.period
    }

    #[inline]
    pub fn symbol_at(&self, i: usize) -> u8 {
        let pre = self.preperiod.symbols();
        if i < pre.len() {
            pre[i]
        } else {
            let per = self.period.symbols();
            per[(i - pre.len()) % per.len()]
        }
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word((0..n).map(|i| self.symbol_at(i)).collect())
    }

    /// The image under the shift map.
    pub fn shift(&self) -> PointRep {
        if !self.preperiod.is_empty() {
            PointRep {
                preperiod: Word(self.preperiod.symbols()[1..].to_vec()),
                period: self.period.clone(),
            }
        } else {
            let mut p = self.period.symbols().to_vec();
            p.rotate_left(1);
            PointRep {
                preperiod: Word::empty(),
                period: Word(p),
            }
        }
    }

    pub fn shift_by(&self, steps: usize) -> PointRep {
        let pre = self.preperiod.len();
        if steps < pre {
            return PointRep {
                preperiod: Word(self.preperiod.symbols()[steps..].to_vec()),
                period: self.period.clone(),
            };
        }
        let mut p = self.period.symbols().to_vec();
        let rot = (steps - pre) % p.len();
        p.rotate_left(rot);
        PointRep {
            preperiod: Word::empty(),
            period: Word(p),
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// First index where two points differ, `None` if they are equal.
pub fn first_difference(x: &PointRep, y: &PointRep) -> Option<usize> {
    let (px, py) = (x.period.len(), y.period.len());
    let horizon = x.preperiod.len().max(y.preperiod.len()) + px / gcd(px, py) * py;
    (0..horizon).find(|&i| x.symbol_at(i) != y.symbol_at(i))
}

/// First index where two words differ within their common length.
pub fn first_difference_words(a: &[u8], b: &[u8]) -> Option<usize> {
    a.iter().zip(b).position(|(x, y)| x != y)
}

fn check_alphabets(x: &PointRep, y: &PointRep, alphabet: usize) -> Result<()> {
    for p in [x, y] {
        if let Some(&s) = p
            .preperiod
            .symbols()
            .iter()
            .chain(p.period.symbols())
            .find(|&&s| s as usize >= alphabet)
        {
            return Err(Error::AlphabetMismatch {
                left: alphabet,
                right: s as usize + 1,
            });
        }
    }
    Ok(())
}

/// `d(x, y) = 2^-j` with `j` the first differing index, 0 when `x = y`.
pub fn distance(sys: &SymbolicSystem, x: &PointRep, y: &PointRep) -> Result<Dyadic> {
    check_alphabets(x, y, sys.alphabet_size())?;
    Ok(match first_difference(x, y) {
        None => Dyadic::Zero,
        Some(j) => Dyadic::Pow2Neg(j as u32),
    })
}

/// Bowen distance from a first-difference index: `2^-max(0, j-n+1)`.
pub fn bowen_from_difference(j: Option<usize>, n: usize) -> Dyadic {
    match j {
        None => Dyadic::Zero,
        Some(j) => Dyadic::Pow2Neg((j + 1).saturating_sub(n) as u32),
    }
}

/// `d_n(x, y) = max_{0 ≤ i < n} d(T^i x, T^i y)`.
pub fn bowen_distance(
    sys: &SymbolicSystem,
    x: &PointRep,
    y: &PointRep,
    n: usize,
) -> Result<Dyadic> {
    if n == 0 {
        bail!(InvalidArgument, "Bowen distance needs n >= 1");
    }
    check_alphabets(x, y, sys.alphabet_size())?;
    Ok(bowen_from_difference(first_difference(x, y), n))
}

/// Bowen distance between the points represented by two words, judged on
/// their common window. Returns `Zero` when the window shows no difference.
pub fn bowen_distance_words(a: &[u8], b: &[u8], n: usize) -> Dyadic {
    bowen_from_difference(first_difference_words(a, b), n.max(1))
}

/// A cylinder `[w] = {x : x_0 … x_{|w|-1} = w}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cylinder {
    word: Word,
}

impl Cylinder {
    pub fn new(sys: &SymbolicSystem, word: Word) -> Result<Self> {
        sys.check_word(word.symbols())?;
        Ok(Cylinder { word })
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn depth(&self) -> usize {
        self.word.len()
    }

    pub fn contains(&self, x: &PointRep) -> bool {
        self.word
            .symbols()
            .iter()
            .enumerate()
            .all(|(i, &s)| x.symbol_at(i) == s)
    }

    /// Whether every point starting with `w` lies in the cylinder.
    pub fn contains_word(&self, w: &[u8]) -> bool {
        w.len() >= self.word.len() && w.starts_with(self.word.symbols())
    }
}

/// `B_n(x, 2^-m)`, which is the cylinder of the first `n + m` symbols of `x`.
pub fn bowen_ball(x: &PointRep, n: usize, eps: Resolution) -> Result<Cylinder> {
    if n == 0 {
        bail!(InvalidArgument, "Bowen ball needs n >= 1");
    }
    Ok(Cylinder {
        word: x.prefix(n + eps.m() as usize),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(sys: &SymbolicSystem, s: &str) -> PointRep {
        PointRep::parse(sys, s).unwrap()
    }

    #[test]
    fn shift_examples() {
        let sys = SymbolicSystem::full_shift(2);
        assert_eq!(pt(&sys, "0|1").shift(), pt(&sys, "1"));
        assert_eq!(pt(&sys, "01").shift(), pt(&sys, "10"));
        assert_eq!(pt(&sys, "1").shift(), pt(&sys, "1"));
    }

    #[test]
    fn distance_examples() {
        let sys = SymbolicSystem::full_shift(2);
        assert_eq!(
            distance(&sys, &pt(&sys, "0"), &pt(&sys, "1|0")).unwrap(),
            Dyadic::Pow2Neg(0)
        );
        assert_eq!(
            distance(&sys, &pt(&sys, "01|0"), &pt(&sys, "01|1")).unwrap(),
            Dyadic::Pow2Neg(2)
        );
        let x = pt(&sys, "0110|01");
        assert_eq!(distance(&sys, &x, &x).unwrap(), Dyadic::Zero);
        // Same point written two ways.
        assert_eq!(
            distance(&sys, &pt(&sys, "0|10"), &pt(&sys, "01")).unwrap(),
            Dyadic::Zero
        );
    }

    #[test]
    fn alphabet_mismatch_is_reported() {
        let big = SymbolicSystem::full_shift(3);
        let small = SymbolicSystem::full_shift(2);
        let x = pt(&big, "2");
        assert!(matches!(
            distance(&small, &x, &x),
            Err(Error::AlphabetMismatch { .. })
        ));
    }

    #[test]
    fn bowen_distance_examples() {
        let sys = SymbolicSystem::full_shift(2);
        let x = pt(&sys, "0001|0");
        let y = pt(&sys, "0");
        assert_eq!(bowen_distance(&sys, &x, &y, 1).unwrap(), Dyadic::Pow2Neg(3));
        // Brute force over the shifted pairs.
        let brute = (0..4)
            .map(|i| distance(&sys, &x.shift_by(i), &y.shift_by(i)).unwrap())
            .max()
            .unwrap();
        assert_eq!(brute, Dyadic::Pow2Neg(0));
        assert_eq!(bowen_distance(&sys, &x, &y, 4).unwrap(), brute);
        assert_eq!(bowen_distance(&sys, &x, &x, 7).unwrap(), Dyadic::Zero);
        assert!(bowen_distance(&sys, &x, &y, 0).is_err());
    }

    #[test]
    fn bowen_ball_examples() {
        let sys = SymbolicSystem::full_shift(2);
        let x = pt(&sys, "01");
        assert_eq!(
            bowen_ball(&x, 2, Resolution(0)).unwrap().word(),
            &Word::parse("01").unwrap()
        );
        assert_eq!(
            bowen_ball(&x, 1, Resolution(0)).unwrap().word(),
            &Word::parse("0").unwrap()
        );
        let ball = bowen_ball(&x, 2, Resolution(2)).unwrap();
        assert_eq!(ball.word(), &Word::parse("0101").unwrap());
        // Membership of every depth-4 word agrees with the distance rule.
        for w in sys.enumerate_words(4, 64).unwrap() {
            let y = PointRep::new(&sys, w.clone(), Word::parse("0").unwrap()).unwrap();
            let inside = bowen_distance(&sys, &x, &y, 2).unwrap() < Resolution(2).radius();
            assert_eq!(ball.contains_word(w.symbols()), inside, "{w}");
        }
    }

    #[test]
    fn word_counts() {
        assert_eq!(
            SymbolicSystem::full_shift(2)
                .enumerate_words(3, 100)
                .unwrap()
                .len(),
            8
        );
        let golden = SymbolicSystem::golden_mean();
        assert_eq!(golden.enumerate_words(3, 100).unwrap().len(), 5);
        // Oracle: sum of the entries of A^2 = [[2,1],[1,1]].
        assert_eq!(golden.count_words(3), 5);
        assert_eq!(
            SymbolicSystem::full_shift(3)
                .enumerate_words(1, 10)
                .unwrap()
                .len(),
            3
        );
        assert!(matches!(
            SymbolicSystem::full_shift(2).enumerate_words(10, 100),
            Err(Error::EnumerationCap {
                cap: 100,
                requested: 1024
            })
        ));
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let words = SymbolicSystem::golden_mean()
            .enumerate_words(4, 100)
            .unwrap();
        let mut sorted = words.clone();
        sorted.sort();
        assert_eq!(words, sorted);
    }

    #[test]
    fn count_matches_matrix_power() {
        let sys =
            SymbolicSystem::new(3, vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 1]], "t").unwrap();
        let a = sys.transition_rows();
        let mut power = vec![vec![0u128; 3]; 3];
        for (i, row) in power.iter_mut().enumerate() {
            row[i] = 1;
        }
        for n in 1..=20 {
            let total: u128 = power.iter().flatten().sum();
            assert_eq!(sys.count_words(n), total, "n = {n}");
            let mut next = vec![vec![0u128; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    for l in 0..3 {
                        next[i][j] += power[i][l] * a[l][j] as u128;
                    }
                }
            }
            power = next;
        }
    }

    #[test]
    fn primitivity() {
        assert_eq!(SymbolicSystem::full_shift(2).mixing_exponent().unwrap(), 1);
        assert_eq!(SymbolicSystem::golden_mean().mixing_exponent().unwrap(), 2);
        let cycle = SymbolicSystem::new(2, vec![vec![0, 1], vec![1, 0]], "flip").unwrap();
        assert_eq!(cycle.mixing_exponent(), Err(Error::NotPrimitive));
        // 3-cycle with a chord 0 -> 0 ... checked by repeated squaring below.
        let chord = SymbolicSystem::new(
            3,
            vec![vec![1, 1, 0], vec![0, 0, 1], vec![1, 0, 0]],
            "chord",
        )
        .unwrap();
        let m = chord.mixing_exponent().unwrap();
        assert!(boolean_power_positive(&chord.transition_rows(), m));
        assert!(!boolean_power_positive(&chord.transition_rows(), m - 1));
    }

    fn boolean_power_positive(a: &[Vec<u8>], m: usize) -> bool {
        let k = a.len();
        let mut p: Vec<Vec<bool>> = (0..k).map(|i| (0..k).map(|j| i == j).collect()).collect();
        for _ in 0..m {
            p = (0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| (0..k).any(|l| p[i][l] && a[l][j] == 1))
                        .collect()
                })
                .collect();
        }
        p.iter().flatten().all(|&b| b)
    }

    #[test]
    fn malformed_systems_name_the_row() {
        let err = SymbolicSystem::new(2, vec![vec![1, 1], vec![0, 0]], "bad").unwrap_err();
        assert!(alloc::format!("{err}").contains("row 1"));
        assert!(SymbolicSystem::new(2, vec![vec![1, 2], vec![1, 1]], "bad").is_err());
    }

    #[test]
    fn connector_is_lexicographically_smallest() {
        let golden = SymbolicSystem::golden_mean();
        assert_eq!(
            golden.connector(1, 0, 2).unwrap(),
            Word::parse("0").unwrap()
        );
        assert!(golden.connector(1, 1, 1).is_err());
        let full = SymbolicSystem::full_shift(3);
        assert_eq!(full.connector(2, 1, 3).unwrap(), Word::parse("00").unwrap());
    }

    fn arb_point(k: u8) -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
        (
            prop::collection::vec(0..k, 0..5),
            prop::collection::vec(0..k, 1..4),
        )
    }

    proptest! {
        #[test]
        fn ultrametric(a in arb_point(3), b in arb_point(3), c in arb_point(3)) {
            let sys = SymbolicSystem::full_shift(3);
            let p = |(x, y): (Vec<u8>, Vec<u8>)| PointRep::new(&sys, Word::new(x), Word::new(y)).unwrap();
            let (x, y, z) = (p(a), p(b), p(c));
            let dxz = distance(&sys, &x, &z).unwrap();
            let bound = distance(&sys, &x, &y).unwrap().max(distance(&sys, &y, &z).unwrap());
            prop_assert!(dxz <= bound);
            prop_assert_eq!(distance(&sys, &x, &y).unwrap(), distance(&sys, &y, &x).unwrap());
        }

        #[test]
        fn shift_preserves_ball_membership(a in arb_point(2), b in arb_point(2), n in 1usize..6, m in 0u32..4) {
            let sys = SymbolicSystem::full_shift(2);
            let p = |(x, y): (Vec<u8>, Vec<u8>)| PointRep::new(&sys, Word::new(x), Word::new(y)).unwrap();
            let (x, y) = (p(a), p(b));
            let eps = Resolution(m);
            if bowen_ball(&x, n + 1, eps).unwrap().contains(&y) {
                prop_assert!(bowen_ball(&x.shift(), n, eps).unwrap().contains(&y.shift()));
            }
        }
    }

    #[test]
    fn ball_distance_consistency_exhaustive() {
        for sys in [
            SymbolicSystem::full_shift(2),
            SymbolicSystem::full_shift(3),
            SymbolicSystem::golden_mean(),
        ] {
            let k = sys.alphabet_size();
            let max_len = if k == 2 { 12 } else { 8 };
            for n in 1..=4usize {
                for m in 0..=(max_len - n) as u32 {
                    let depth = n + m as usize;
                    let words = sys.enumerate_words(depth, 1 << 20).unwrap();
                    let center = words[words.len() / 2].clone();
                    let cont = sys.smallest_continuation(center.symbols().last().copied(), 2);
                    let x = PointRep::new(&sys, center.clone(), Word::new(cont.clone()))
                        .unwrap_or_else(|_| {
                            let per =
                                sys.smallest_continuation(center.symbols().last().copied(), 1);
                            PointRep::new(&sys, center.clone(), Word::new(per)).unwrap()
                        });
                    let ball = bowen_ball(&x, n, Resolution(m)).unwrap();
                    for w in &words {
                        // Every point with prefix w: its Bowen distance to x is
                        // decided by the first difference inside w, if any.
                        let inside = match first_difference_words(w.symbols(), center.symbols()) {
                            Some(j) => bowen_from_difference(Some(j), n) < Resolution(m).radius(),
                            None => true,
                        };
                        assert_eq!(ball.contains_word(w.symbols()), inside);
                    }
                }
            }
        }
    }
}
