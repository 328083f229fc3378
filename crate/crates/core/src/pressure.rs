//! Carathéodory pressure of cylinder-definable sets.
//!
//! A [`CylinderSet`] is a finite union of pieces `[w] ∩ Y`, where `Y` is the
//! ambient shift or a subshift of finite type inside it. Every Bowen ball of
//! order `k` and radius `2^-m` is a cylinder of depth `k + m`, so the
//! covers used here are covers by cylinders. Sums over all words are carried
//! out by a transfer recursion over `(live pieces, last symbols)` rather than
//! by listing words; the word-listing routes ([`spanning_value`],
//! [`separated_value`]) serve as independent checks.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::math::{self, ln};
use crate::symbolic::{Cylinder, Resolution, SymbolicSystem, Word};
use crate::thermo::Potential;

/// One piece `[word] ∩ Y` of a cylinder set; `restriction: None` means `Y = X`.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub word: Word,
    pub restriction: Option<SymbolicSystem>,
}

impl Piece {
    pub fn cylinder(word: Word) -> Self {
        Piece {
            word,
            restriction: None,
        }
    }

    /// Whether `self ⊆ other`, judged from the words and restrictions.
    pub fn is_within(&self, other: &Piece) -> bool {
        if !self.word.symbols().starts_with(other.word.symbols()) {
            return false;
        }
        match (&self.restriction, &other.restriction) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => b.contains_system(a),
        }
    }
}

/// A finite union of pieces, kept canonical: no piece lies inside another.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderSet {
    system: SymbolicSystem,
    pieces: Vec<Piece>,
}

const MAX_PIECES: usize = 64;

impl CylinderSet {
    pub fn new(sys: &SymbolicSystem, pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            bail!(InvalidArgument, "a cylinder set needs at least one piece");
        }
        let mut clean = Vec::with_capacity(pieces.len());
        for (i, mut p) in pieces.into_iter().enumerate() {
            sys.check_word(p.word.symbols())?;
            if let Some(y) = &p.restriction {
                if !sys.contains_system(y) {
                    bail!(
                        InvalidArgument,
                        "piece {i}: restriction is not a subshift of the ambient system"
                    );
                }
                if y.check_word(p.word.symbols()).is_err() {
                    bail!(
                        InvalidArgument,
                        "piece {i}: word \"{}\" is not admissible in its restriction",
                        p.word
                    );
                }
                if y.contains_system(sys) {
                    p.restriction = None;
                }
            }
            clean.push(p);
        }
        let mut kept: Vec<Piece> = Vec::new();
        for (i, p) in clean.iter().enumerate() {
            let covered = clean
                .iter()
                .enumerate()
                .any(|(j, q)| j != i && p.is_within(q) && (!q.is_within(p) || j < i));
            if !covered {
                kept.push(p.clone());
            }
        }
        if kept.len() > MAX_PIECES {
            bail!(
                InvalidArgument,
                "{} pieces exceed the limit of {MAX_PIECES}",
                kept.len()
            );
        }
        Ok(CylinderSet {
            system: sys.clone(),
            pieces: kept,
        })
    }

    pub fn whole(sys: &SymbolicSystem) -> Self {
        Self::new(sys, vec![Piece::cylinder(Word::empty())]).expect("whole space is valid")
    }

    pub fn from_cylinders(sys: &SymbolicSystem, cylinders: &[Cylinder]) -> Result<Self> {
        Self::new(
            sys,
            cylinders
                .iter()
                .map(|c| Piece::cylinder(c.word().clone()))
                .collect(),
        )
    }

    pub fn from_words(sys: &SymbolicSystem, words: &[Word]) -> Result<Self> {
        Self::new(sys, words.iter().cloned().map(Piece::cylinder).collect())
    }

    /// The subshift `Y` itself, viewed inside the ambient system.
    pub fn subshift(sys: &SymbolicSystem, sub: SymbolicSystem) -> Result<Self> {
        Self::new(
            sys,
            vec![Piece {
                word: Word::empty(),
                restriction: Some(sub),
            }],
        )
    }

    pub fn system(&self) -> &SymbolicSystem {
        &self.system
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn union(&self, other: &CylinderSet) -> Result<CylinderSet> {
        if self.system != other.system {
            return Err(Error::AlphabetMismatch {
                left: self.system.alphabet_size(),
                right: other.system.alphabet_size(),
            });
        }
        let mut all = self.pieces.clone();
        all.extend(other.pieces.iter().cloned());
        Self::new(&self.system, all)
    }

    /// Sufficient test for `other ⊆ self`: every piece of `other` lies in a
    /// piece of `self`.
    pub fn covers(&self, other: &CylinderSet) -> bool {
        other
            .pieces
            .iter()
            .all(|p| self.pieces.iter().any(|q| p.is_within(q)))
    }

    /// Whether `[w]` meets the set.
    pub fn meets(&self, w: &[u8]) -> bool {
        self.pieces.iter().any(|p| piece_meets(p, w))
    }
}

fn piece_meets(p: &Piece, w: &[u8]) -> bool {
    let pw = p.word.symbols();
    let n = pw.len().min(w.len());
    pw[..n] == w[..n] && p.restriction.as_ref().is_none_or(|y| y.is_admissible(w))
}

/// Inf and sup of `S_n ψ` over `[w] ∩ Z`, or `None` if they do not meet.
fn bounds_in_set(z: &CylinderSet, psi: &Potential, w: &[u8], n: usize) -> Option<(f64, f64)> {
    let needed = n + psi.range() - 1;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in &z.pieces {
        if !piece_meets(p, w) {
            continue;
        }
        let y = p.restriction.as_ref().unwrap_or(&z.system);
        let mut base = if p.word.len() > w.len() {
            p.word.symbols().to_vec()
        } else {
            w.to_vec()
        };
        if base.len() >= needed {
            let s = psi.birkhoff_sum_unchecked(&base, n);
            lo = lo.min(s);
            hi = hi.max(s);
            continue;
        }
        y.extend_all(&mut base, needed, &mut |ext| {
            let s = psi.birkhoff_sum_unchecked(ext, n);
            lo = lo.min(s);
            hi = hi.max(s);
        });
    }
    (hi >= lo).then_some((lo, hi))
}

fn enumerate_bounds(
    z: &CylinderSet,
    psi: &Potential,
    eps: Resolution,
    n: usize,
    cap: u64,
    mut f: impl FnMut(f64, f64),
) -> Result<()> {
    if n == 0 {
        bail!(InvalidArgument, "n must be at least 1");
    }
    let depth = n + eps.m() as usize;
    let count = z.system.count_words(depth);
    if count > cap as u128 {
        return Err(Error::EnumerationCap {
            cap,
            requested: count,
        });
    }
    let mut buf = Vec::with_capacity(depth);
    z.system.extend_all(&mut buf, depth, &mut |w| {
        if let Some((lo, hi)) = bounds_in_set(z, psi, w, n) {
            f(lo, hi);
        }
    });
    Ok(())
}

/// `Q_n`: the least `Σ exp S_n ψ(x)` over `(n, ε)`-spanning subsets of `Z`.
/// One point per depth-`(n + m)` cylinder meeting `Z` is needed and enough,
/// and each is placed where `S_n ψ` is smallest.
pub fn spanning_value(
    z: &CylinderSet,
    psi: &Potential,
    eps: Resolution,
    n: usize,
    cap: u64,
) -> Result<f64> {
    let mut total = 0.0;
    enumerate_bounds(z, psi, eps, n, cap, |lo, _| total += math::exp(lo))?;
    Ok(total)
}

/// `P_n`: the largest `Σ exp S_n ψ(x)` over `(n, ε)`-separated subsets of `Z`.
/// Separated points lie in distinct depth-`(n + m)` cylinders, and each is
/// placed where `S_n ψ` is largest.
pub fn separated_value(
    z: &CylinderSet,
    psi: &Potential,
    eps: Resolution,
    n: usize,
    cap: u64,
) -> Result<f64> {
    let mut total = 0.0;
    enumerate_bounds(z, psi, eps, n, cap, |_, hi| total += math::exp(hi))?;
    Ok(total)
}

type State = (u64, Vec<u8>);

/// Transfer recursion over words meeting `Z`, with potential values shifted
/// by `max ψ` to keep weights at most one.
struct CoverSums<'a> {
    z: &'a CylinderSet,
    psi: &'a Potential,
    m: usize,
    ctx_len: usize,
    shift: f64,
    tails: BTreeMap<Vec<u8>, f64>,
}

impl<'a> CoverSums<'a> {
    fn new(z: &'a CylinderSet, psi: &'a Potential, eps: Resolution) -> Result<Self> {
        if psi.alphabet_size() != z.system.alphabet_size() {
            return Err(Error::AlphabetMismatch {
                left: z.system.alphabet_size(),
                right: psi.alphabet_size(),
            });
        }
        let m = eps.m() as usize;
        let ctx_len = m.max(psi.range() - 1).max(1);
        if (z.system.alphabet_size() as u128).pow(ctx_len as u32) > 1 << 20 {
            bail!(InvalidArgument, "context of {ctx_len} symbols is too large");
        }
        Ok(CoverSums {
            z,
            psi,
            m,
            ctx_len,
            shift: psi.max_value(),
            tails: BTreeMap::new(),
        })
    }

    /// Windows of `S_k ψ` fixed by a word of length `len = k + m`.
    fn counted(&self, len: usize) -> usize {
        let r = self.psi.range();
        len.saturating_sub(self.m).min((len + 1).saturating_sub(r))
    }

    fn initial(&self) -> BTreeMap<State, f64> {
        let full = if self.z.pieces.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.z.pieces.len()) - 1
        };
        let mut map = BTreeMap::new();
        map.insert((full, Vec::new()), 1.0);
        map
    }

    /// Appends one symbol to every word of length `len`.
    fn step(&self, len: usize, states: &BTreeMap<State, f64>) -> BTreeMap<State, f64> {
        let sys = &self.z.system;
        let r = self.psi.range();
        let grows = self.counted(len + 1) > self.counted(len);
        let mut next: BTreeMap<State, f64> = BTreeMap::new();
        let mut joined = Vec::with_capacity(self.ctx_len + 1);
        for ((mask, ctx), &weight) in states {
            for a in 0..sys.alphabet_size() as u8 {
                let last = ctx.last().copied();
                if last.is_some_and(|l| !sys.allowed(l, a)) {
                    continue;
                }
                let mut alive = 0u64;
                for (i, p) in self.z.pieces.iter().enumerate() {
                    if mask >> i & 1 == 0 {
                        continue;
                    }
                    let pw = p.word.symbols();
                    let ok = if len < pw.len() {
                        pw[len] == a
                    } else {
                        match (&p.restriction, last) {
                            (Some(y), Some(l)) => y.allowed(l, a),
                            _ => true,
                        }
                    };
                    if ok {
                        alive |= 1 << i;
                    }
                }
                if alive == 0 {
                    continue;
                }
                joined.clear();
                joined.extend_from_slice(ctx);
                joined.push(a);
                let mut w = weight;
                if grows {
                    let start = self.counted(len);
                    let offset = start + joined.len() - (len + 1);
                    w *= math::exp(self.psi.value(&joined[offset..offset + r]) - self.shift);
                }
                let keep = joined.len().min(self.ctx_len);
                let key = (alive, joined[joined.len() - keep..].to_vec());
                *next.entry(key).or_insert(0.0) += w;
            }
        }
        next
    }

    /// `sup exp(Σ (ψ - shift))` over the windows a word of length `len` leaves
    /// open, taken over extensions in the ambient system.
    fn tail(&mut self, len: usize, ctx: &[u8]) -> f64 {
        let open = self.psi.range().saturating_sub(1).saturating_sub(self.m);
        if open == 0 {
            return 1.0;
        }
        if let Some(&v) = self.tails.get(ctx) {
            if len >= self.ctx_len {
                return v;
            }
        }
        let r = self.psi.range();
        let k = len - self.m;
        let first = self.counted(len);
        let base = len - ctx.len();
        let mut best = f64::NEG_INFINITY;
        let mut buf = ctx.to_vec();
        let target = ctx.len() + (k + r - 1 - len);
        self.z.system.extend_all(&mut buf, target, &mut |ext| {
            let s: f64 = (first..k)
                .map(|i| self.psi.value(&ext[i - base..]) - self.shift)
                .sum();
            best = best.max(s);
        });
        let v = math::exp(best);
        if len >= self.ctx_len {
            self.tails.insert(ctx.to_vec(), v);
        }
        v
    }

    /// Length from which the recursion no longer depends on `len`: contexts
    /// are full, piece words are read and every step adds a window.
    fn settled_len(&self) -> usize {
        let longest = self
            .z
            .pieces
            .iter()
            .map(|p| p.word.len())
            .max()
            .unwrap_or(0);
        longest.max(self.ctx_len).max(self.m).max(self.psi.range()) + 1
    }

    /// Cost of one cylinder of depth `len`, relative to its accumulated weight.
    fn own(&mut self, len: usize, ctx: &[u8], t: f64) -> f64 {
        let k = (len - self.m) as f64;
        math::exp((self.shift - t) * k) * self.tail(len, ctx)
    }
}

/// Values of `M(Z, t, ψ, n, ε)` restricted to cylinder covers of orders in
/// `[n, n_max]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CaratheodoryValue {
    pub t: f64,
    pub n: usize,
    pub n_max: usize,
    /// The cover by all cylinders of order exactly `n`.
    pub uniform: f64,
    /// The best single-order cover with order in `[n, n_max]`.
    pub uniform_best: f64,
    /// The best cover mixing orders in `[n, n_max]`, element by element.
    pub mixed: f64,
}

pub fn caratheodory_value(
    z: &CylinderSet,
    t: f64,
    psi: &Potential,
    n: usize,
    n_max: usize,
    eps: Resolution,
) -> Result<CaratheodoryValue> {
    if n == 0 || n_max < n {
        bail!(
            InvalidArgument,
            "need 1 <= n <= n_max, got n = {n}, n_max = {n_max}"
        );
    }
    let mut sums = CoverSums::new(z, psi, eps)?;
    let m = sums.m;
    let mut layers: Vec<BTreeMap<State, f64>> = Vec::with_capacity(n_max + m + 1);
    layers.push(sums.initial());
    for len in 0..n_max + m {
        let next = sums.step(len, &layers[len]);
        layers.push(next);
    }
    let mut uniform_by_order = Vec::new();
    for k in n..=n_max {
        let len = k + m;
        let mut total = 0.0;
        for ((_, ctx), &w) in &layers[len] {
            total += w * sums.own(len, ctx, t);
        }
        uniform_by_order.push(total);
    }
    // Backward pass: g(len, state) = min(own, Σ children), relative weights.
    let top = n_max + m;
    let mut g: BTreeMap<State, f64> = BTreeMap::new();
    for key in layers[top].keys() {
        let v = sums.own(top, &key.1, t);
        g.insert(key.clone(), v);
    }
    for len in (n + m..top).rev() {
        let mut here = BTreeMap::new();
        for key in layers[len].keys() {
            let mut single = BTreeMap::new();
            single.insert(key.clone(), 1.0);
            let children = sums.step(len, &single);
            let split: f64 = children
                .iter()
                .map(|(ck, &w)| w * g.get(ck).copied().unwrap_or(0.0))
                .sum();
            let own = sums.own(len, &key.1, t);
            here.insert(key.clone(), own.min(split));
        }
        g = here;
    }
    let mixed: f64 = layers[n + m].iter().map(|(key, &w)| w * g[key]).sum();
    Ok(CaratheodoryValue {
        t,
        n,
        n_max,
        uniform: uniform_by_order[0],
        uniform_best: uniform_by_order
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
        mixed,
    })
}

/// `log Σ exp(sup S_k ψ)` over the depth-`(k + m)` cylinders meeting `Z`, for
/// `k = 1 ..= n_max`; entry `k - 1` is order `k`.
pub fn log_partition_sums(
    z: &CylinderSet,
    psi: &Potential,
    eps: Resolution,
    n_max: usize,
) -> Result<Vec<f64>> {
    let mut sums = CoverSums::new(z, psi, eps)?;
    let m = sums.m;
    let mut layer = sums.initial();
    let mut out = Vec::with_capacity(n_max);
    for len in 0..n_max + m {
        layer = sums.step(len, &layer);
        let len = len + 1;
        if len > m {
            let k = len - m;
            let mut total = 0.0;
            for ((_, ctx), &w) in &layer {
                total += w * sums.tail(len, ctx);
            }
            out.push(ln(total) + sums.shift * k as f64);
        }
    }
    Ok(out)
}

const MAX_STATES: usize = 4096;

/// `lim (1/k) log Σ exp(sup S_k ψ)` over the depth-`(k + m)` cylinders
/// meeting `Z`: once settled the recursion is a fixed weighted graph on
/// `(live pieces, context)`, every state keeps a positive weight, so the
/// growth rate is the largest Perron root over its strongly connected
/// components. `None` if the set dies out or the graph has more than
/// `4096` states.
pub fn cover_growth_limit(
    z: &CylinderSet,
    psi: &Potential,
    eps: Resolution,
) -> Result<Option<f64>> {
    let sums = CoverSums::new(z, psi, eps)?;
    let start = sums.settled_len();
    let mut layer = sums.initial();
    for len in 0..start {
        layer = sums.step(len, &layer);
    }
    let mut index: BTreeMap<State, usize> = BTreeMap::new();
    let mut states: Vec<State> = Vec::new();
    for key in layer.keys() {
        index.insert(key.clone(), states.len());
        states.push(key.clone());
    }
    let mut edges: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let mut single = BTreeMap::new();
        single.insert(states[i].clone(), 1.0);
        let mut out = Vec::new();
        for (child, w) in sums.step(start, &single) {
            let j = match index.get(&child) {
                Some(&j) => j,
                None => {
                    if states.len() == MAX_STATES {
                        return Ok(None);
                    }
                    index.insert(child.clone(), states.len());
                    states.push(child);
                    states.len() - 1
                }
            };
            out.push((j, w));
        }
        edges.push(out);
        i += 1;
    }
    let mut best: Option<f64> = None;
    for comp in strong_components(&edges) {
        let n = comp.len();
        let local: BTreeMap<usize, usize> = comp.iter().enumerate().map(|(a, &s)| (s, a)).collect();
        let mut b = vec![0.0; n * n];
        let mut cyclic = false;
        for (a, &s) in comp.iter().enumerate() {
            for &(j, w) in &edges[s] {
                if let Some(&c) = local.get(&j) {
                    b[a * n + c] += w;
                    cyclic = true;
                }
            }
        }
        if !cyclic {
            continue;
        }
        let iterations = 100_000;
        let rho =
            math::perron_vector(&b, n, false, iterations).map_err(|gap| Error::NonConvergence {
                best: f64::NAN,
                gap,
                iterations,
            })?;
        let rate = ln(rho.0) + sums.shift;
        best = Some(best.map_or(rate, |r: f64| r.max(rate)));
    }
    Ok(best)
}

/// Strongly connected components by Tarjan's algorithm, iteratively.
fn strong_components(edges: &[Vec<(usize, f64)>]) -> Vec<Vec<usize>> {
    let n = edges.len();
    let mut order = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if order[root] != usize::MAX {
            continue;
        }
        let mut calls = vec![(root, 0usize)];
        order[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut next)) = calls.last_mut() {
            if let Some(&(w, _)) = edges[v].get(*next) {
                *next += 1;
                if order[w] == usize::MAX {
                    order[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    calls.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(order[w]);
                }
                continue;
            }
            calls.pop();
            if let Some(&(parent, _)) = calls.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == order[v] {
                let mut comp = Vec::new();
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comps.push(comp);
            }
        }
    }
    comps
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum EstimateMethod {
    /// Root of the growth of natural cylinder covers.
    NaturalCover,
    /// Lower bound from a measure with controlled ball masses.
    DistributionPrinciple,
}

/// A bracket for `P(Z, ψ, ε)` from orders up to `n_max`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PressureEstimate {
    pub t_lower: f64,
    pub t_upper: f64,
    /// The limiting growth rate of the natural covers when it is computable,
    /// else the root of `M(Z, t, ψ, n_max) = M(Z, t, ψ, n_max / 2)`.
    pub center: f64,
    pub eps: Resolution,
    pub n_range: (usize, usize),
    pub method: EstimateMethod,
    /// The per-window growth rates agree within the tolerance.
    pub settled: bool,
    /// Always set: the bracket describes orders up to `n_max`, not the limit.
    pub finite_n: bool,
}

impl PressureEstimate {
    pub fn width(&self) -> f64 {
        self.t_upper - self.t_lower
    }

    pub fn contains(&self, t: f64) -> bool {
        self.t_lower <= t && t <= self.t_upper
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootOptions {
    pub n_max: usize,
    pub tol: f64,
}

impl RootOptions {
    /// Defaults: tolerance `1e-3`, `n_max` 14 on two symbols and 9 otherwise.
    pub fn for_system(sys: &SymbolicSystem) -> Self {
        RootOptions {
            n_max: if sys.alphabet_size() <= 2 { 14 } else { 9 },
            tol: 1e-3,
        }
    }
}

/// Brackets `P(Z, ψ, ε) = inf{t : M(Z, t, ψ, ε) = 0}`.
///
/// For each `t` the uniform cover value satisfies
/// `log M(n) = Λ(n) - t n` with `Λ` from [`log_partition_sums`], so `M`
/// decays along `n` exactly when `t` exceeds the growth rate of `Λ`. The
/// bracket spans the rates over every window `[n, n_max]`,
/// `n_1 = n_max / 2 ≤ n < n_max`, and the limiting rate from
/// [`cover_growth_limit`], widened by `tol`. The center is the limiting rate,
/// or, when the state graph is too large, the root of `M(n_max) = M(n_1)`.
pub fn pressure_root(
    z: &CylinderSet,
    psi: &Potential,
    eps: Resolution,
    opts: RootOptions,
) -> Result<PressureEstimate> {
    let n_max = opts.n_max;
    if n_max < 2 {
        bail!(InvalidArgument, "n_max must be at least 2");
    }
    if !(opts.tol > 0.0) {
        bail!(InvalidArgument, "tolerance must be positive");
    }
    let lambda = log_partition_sums(z, psi, eps, n_max)?;
    let at = |k: usize| lambda[k - 1];
    let n1 = (n_max / 2).max(1);
    let decay = |t: f64| (at(n_max) - t * n_max as f64) - (at(n1) - t * n1 as f64);
    let span = psi.sup_norm() + ln(z.system.alphabet_size() as f64) + 1.0;
    let (lo, hi) = math::bisect(decay, -span, span, opts.tol * 1e-3, 200);
    let limit = cover_growth_limit(z, psi, eps)?;
    let center = limit.unwrap_or(0.5 * (lo + hi));
    let mut rates: Vec<f64> = (n1..n_max)
        .map(|n| (at(n_max) - at(n)) / (n_max - n) as f64)
        .collect();
    rates.push(0.5 * (lo + hi));
    let min = rates.iter().copied().fold(center, f64::min);
    let max = rates.iter().copied().fold(center, f64::max);
    Ok(PressureEstimate {
        t_lower: min - opts.tol,
        t_upper: max + opts.tol,
        center,
        eps,
        n_range: (n1, n_max),
        method: EstimateMethod::NaturalCover,
        settled: max - min <= opts.tol,
        finite_n: true,
    })
}

/// A bracket for the BS dimension: the zero of `s ↦ P(Z, -s ψ)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DimensionBracket {
    pub lower: f64,
    pub upper: f64,
}

impl DimensionBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, s: f64) -> bool {
        self.lower <= s && s <= self.upper
    }
}

/// Bisection in `s` on both ends of the pressure bracket of `-s ψ`: the zero
/// of the upper end bounds the dimension from above, the zero of the lower
/// end from below.
pub fn bs_dimension(
    z: &CylinderSet,
    psi: &Potential,
    eps: Resolution,
    opts: RootOptions,
) -> Result<DimensionBracket> {
    let min = psi.min_value();
    if !(min > 0.0) {
        bail!(
            InvalidPotential,
            "BS dimension needs a strictly positive potential, minimum is {min}"
        );
    }
    let zero = Potential::constant(&z.system, 0.0);
    let base = pressure_root(z, &zero, eps, opts)?;
    let s_hi = (base.t_upper.max(0.0) + 1.0) / min;
    let mut err = None;
    let mut end = |upper: bool| {
        let f = |s: f64| match pressure_root(z, &psi.scaled(-s), eps, opts) {
            Ok(e) => {
                if upper {
                    e.t_upper
                } else {
                    e.t_lower
                }
            }
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        math::bisect(f, 0.0, s_hi, opts.tol * 1e-2, 100)
    };
    let (lower, _) = end(false);
    let (_, upper) = end(true);
    if let Some(e) = err {
        return Err(e);
    }
    Ok(DimensionBracket { lower, upper })
}
