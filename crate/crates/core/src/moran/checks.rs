//! Exact checks on a built construction: the mass of Bowen balls and the
//! oscillation of Birkhoff averages.
//!
//! Both reduce to dynamic programs over slots. A block (segment plus gap)
//! only interacts with the next block through the first few symbols of the
//! next member, so the state is that head.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::fractal::Moran;
use crate::error::{bail, Result};
use crate::math;
use crate::symbolic::{first_difference_words, Resolution, Word};
use crate::thermo::Potential;

const TOL: f64 = 1e-9;

/// Distinct `c`-prefixes of a family's (sorted) members.
struct Heads {
    list: Vec<Vec<u8>>,
    of: Vec<usize>,
}

impl Heads {
    fn new(members: &[Word], c: usize) -> Self {
        let mut list: Vec<Vec<u8>> = Vec::new();
        let mut of = Vec::with_capacity(members.len());
        for w in members {
            let h = &w.symbols()[..c];
            if list.last().is_none_or(|l| l.as_slice() != h) {
                list.push(h.to_vec());
            }
            of.push(list.len() - 1);
        }
        Heads { list, of }
    }

    fn len(&self) -> usize {
        self.list.len()
    }
}

/// `Σ_{i<B} f(σ^i ·)` over one block, per member and per head of whatever
/// follows it.
struct BlockSums {
    /// Next member from the same family.
    inner: Vec<Vec<f64>>,
    /// Next member from the next level's family.
    outer: Vec<Vec<f64>>,
    /// Last block of the construction, followed by the smallest continuation.
    last: Vec<f64>,
}

fn window_sum(pot: &Potential, bw: &[u8], from: usize, to: usize) -> f64 {
    let r = pot.range();
    (from..to).map(|i| pot.value(&bw[i..i + r])).sum()
}

fn block_sums(moran: &Moran, pot: &Potential, heads: &[Heads]) -> Result<Vec<BlockSums>> {
    let depth = moran.depth();
    let r = pot.range();
    let mut out = Vec::with_capacity(depth);
    let mut bw = Vec::new();
    for i in 1..=depth {
        let fam = &moran.families()[i - 1];
        let b = fam.block_len();
        let mut with_next = |next: &Heads| -> Result<Vec<Vec<f64>>> {
            let mut rows = Vec::with_capacity(fam.len());
            for x in &fam.members {
                let seg = x.symbols();
                let mut row = Vec::with_capacity(next.len());
                for h in &next.list {
                    match moran.level_connector(i, *seg.last().unwrap(), h[0]) {
                        Ok(conn) => {
                            bw.clear();
                            bw.extend_from_slice(seg);
                            bw.extend_from_slice(conn);
                            bw.extend_from_slice(h);
                            row.push(window_sum(pot, &bw, 0, b));
                        }
                        Err(_) => row.push(f64::NAN),
                    }
                }
                rows.push(row);
            }
            Ok(rows)
        };
        let inner = with_next(&heads[i - 1])?;
        let outer = if i < depth {
            with_next(&heads[i])?
        } else {
            Vec::new()
        };
        let last = if i == depth {
            let extra = b - fam.seg_len() + r - 1;
            fam.members
                .iter()
                .map(|x| {
                    let seg = x.symbols();
                    let mut bw = seg.to_vec();
                    bw.extend(
                        moran
                            .system()
                            .smallest_continuation(seg.last().copied(), extra),
                    );
                    window_sum(pot, &bw, 0, b)
                })
                .collect()
        } else {
            Vec::new()
        };
        out.push(BlockSums { inner, outer, last });
    }
    Ok(out)
}

/// One step of the max-plus recursion: `G'(h') = max_x G(head x) + w(x, h')`.
/// NaN entries (no connector) are skipped. Records the maximizing member.
fn step(
    g: &[f64],
    head_of: &[usize],
    table: &[Vec<f64>],
    width: usize,
    arg: Option<&mut Vec<u32>>,
) -> Vec<f64> {
    let mut next = vec![f64::NEG_INFINITY; width];
    let mut best = vec![0u32; width];
    for (x, row) in table.iter().enumerate() {
        let base = g[head_of[x]];
        if base == f64::NEG_INFINITY {
            continue;
        }
        for (h, &w) in row.iter().enumerate() {
            if !w.is_nan() && base + w > next[h] {
                next[h] = base + w;
                best[h] = x as u32;
            }
        }
    }
    if let Some(a) = arg {
        *a = best;
    }
    next
}

/// One row of the ball-bound sweep.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BallRow {
    pub n: u64,
    /// `t_k ≤ n < t_{k+1}`.
    pub k: usize,
    /// Complete blocks of level `k + 1` before `n`.
    pub j: usize,
    /// `log` of the number of balls of order `n` that meet the atoms.
    pub log_balls: f64,
    /// `max_B [log μ(B) - S_n ψ(q)] + log κ_k M_{k+1}^j`.
    pub log_excess: f64,
    /// `log κ_k M_{k+1}^j`.
    pub log_norm: f64,
    /// `2n Var(ψ, ε) + ‖ψ‖ (Σ N_i p_i + j p + n_{k+1} + p)`.
    pub block_rhs: f64,
    /// `Σ n_i · rate_i` over complete blocks; equals `(C - 4γ) n - D - E`
    /// when every family is held to `C - 4γ`.
    pub correction_rhs: f64,
    /// `-n s - max_B [log μ(B) - S_n ψ(q)]` with `s = C - 2Var - 7γ`.
    pub rate_margin: f64,
    /// `D + E + ‖ψ‖(…) ≤ 3γ n`, the condition under which the rate form follows.
    pub rate_condition: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BallBoundReport {
    pub n_start: u64,
    pub n_end: u64,
    /// Balls have radius `ε/2` at this resolution.
    pub ball_resolution: Resolution,
    pub variation: f64,
    pub sup_norm: f64,
    /// `s = C - 2Var(ψ, ε) - 7γ`.
    pub rate: f64,
    pub rows: Vec<BallRow>,
    pub block_violations: usize,
    pub correction_violations: usize,
    /// First `n` from which the rate condition holds for the rest of the sweep.
    pub rate_threshold: Option<u64>,
    /// Rate-form failures at or past the threshold.
    pub rate_violations: usize,
    /// `max_n max_B [log μ(B) - S_n ψ(q) + n s]`: the constant of the mass
    /// distribution principle this construction supports.
    pub implied_log_k: f64,
    pub passed: bool,
}

/// Sweep every Bowen ball `B_n(q, ε/2)` that meets the construction, for
/// `n_start ≤ n ≤ n_end`, against
///
/// `μ(B) ≤ exp{S_n ψ(q) + 2n Var(ψ, ε) + ‖ψ‖(Σ N_i p_i + j p + n_{k+1} + p)} / κ_k M_{k+1}^j`,
///
/// the product bound `κ_k M_{k+1}^j ≥ exp((C - 4γ) n - D - E)`, and the rate
/// form `μ(B) ≤ exp{-n(C - 2Var - 7γ) + S_n ψ(q)}` past its threshold.
/// `family_rate` is the rate every family is held to (`C - 4γ`); the rate
/// form uses `family_rate - 3γ - 2Var`.
/// `μ` is the measure of the deepest level; every `μ_{k+p}` agrees with it on
/// these balls.
pub fn verify_ball_bound(
    moran: &Moran,
    psi: &Potential,
    family_rate: f64,
    gamma: f64,
    eps: Resolution,
    n_start: u64,
    n_end: u64,
) -> Result<BallBoundReport> {
    let depth = moran.depth();
    let times = &moran.schedule().times;
    let m = eps.m() as usize;
    let r = psi.range();
    if r > m + 2 {
        bail!(
            InvalidPotential,
            "ψ of range {r} is not determined by balls at ε/2 with m = {m}"
        );
    }
    if n_start < times[1] || n_end >= times[depth] || n_start > n_end {
        bail!(
            InvalidArgument,
            "sweep {n_start}..={n_end} must lie in [t_1, t_K) = [{}, {})",
            times[1],
            times[depth]
        );
    }
    let fams = moran.families();
    let c = (r - 1).max(1);
    let heads: Vec<Heads> = fams.iter().map(|f| Heads::new(&f.members, c)).collect();
    let sums = block_sums(moran, psi, &heads)?;
    let var = psi.oscillation(eps);
    let sup = psi.sup_norm();
    let rate = family_rate - 3.0 * gamma - 2.0 * var;
    let glue_m = moran.eps().m() as usize;

    // g(x, h) = S_n ψ weight of x minus what the glued block actually collects.
    let g: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = fams
        .iter()
        .zip(&sums)
        .map(|(f, s)| {
            let sub = |t: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
                t.iter()
                    .zip(&f.log_weights)
                    .map(|(row, lw)| row.iter().map(|v| lw - v).collect())
                    .collect()
            };
            (sub(&s.inner), sub(&s.outer))
        })
        .collect();
    // cum[x][a] = Σ_{i<a} ψ(σ^i seg_x) while the window stays in the segment.
    let cum: Vec<Vec<Vec<f64>>> = fams
        .iter()
        .map(|f| {
            f.members
                .iter()
                .map(|x| {
                    let s = x.symbols();
                    let mut acc = vec![0.0];
                    for i in 0..=s.len() - r {
                        acc.push(acc[i] + psi.value(&s[i..i + r]));
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let lcp: Vec<Vec<usize>> = fams
        .iter()
        .map(|f| {
            let mut v = vec![0usize];
            for w in f.members.windows(2) {
                v.push(
                    first_difference_words(w[0].symbols(), w[1].symbols()).unwrap_or(w[0].len()),
                );
            }
            v
        })
        .collect();
    // Groups of the next family's members by their `q`-prefix: (prefix, log W/M).
    let prefix_groups = |level: usize, q: usize| -> Vec<(Vec<u8>, f64)> {
        let f = &fams[level - 1];
        let mut out: Vec<(Vec<u8>, f64)> = Vec::new();
        for (x, lw) in f.members.iter().zip(&f.log_weights) {
            let p = &x.symbols()[..q];
            match out.last_mut() {
                Some((h, w)) if h.as_slice() == p => *w = math::log_add(*w, *lw),
                _ => out.push((p.to_vec(), *lw)),
            }
        }
        for g in &mut out {
            g.1 -= f.log_mass;
        }
        out
    };

    // Best tail per head of the partial slot, and the log count of distinct
    // partial cylinders. `next`: 0 same family follows, 1 next level, 2 none.
    let tail = |level: usize, a: usize, next: u8| -> Result<(Vec<f64>, f64)> {
        let f = &fams[level - 1];
        let hd = &heads[level - 1];
        let seg_len = f.seg_len();
        let conn_len = f.lag - glue_m;
        let l = a + m + 1;
        let mut best = vec![f64::NEG_INFINITY; hd.len()];
        let mut groups = 0f64;
        if l <= seg_len {
            let mut start = 0;
            for x in 1..=f.len() {
                if x < f.len() && lcp[level - 1][x] >= l {
                    continue;
                }
                let w = math::log_sum_exp(&f.log_weights[start..x]);
                let v = w - f.log_mass - cum[level - 1][start][a];
                let h = hd.of[start];
                best[h] = best[h].max(v);
                groups += 1.0;
                start = x;
            }
            return Ok((best, math::ln(groups)));
        }
        let cover = l - seg_len;
        let next_groups = match next {
            0 => prefix_groups(level, (cover.saturating_sub(conn_len)).max(1)),
            1 => prefix_groups(level + 1, (cover.saturating_sub(conn_len)).max(1)),
            _ => Vec::new(),
        };
        let split = seg_len + 1 - r;
        let mut bw = Vec::new();
        for (xi, x) in f.members.iter().enumerate() {
            let seg = x.symbols();
            let last = *seg.last().unwrap();
            // covered suffix → log of the next-member fraction behind it
            let mut suffixes: Vec<(Vec<u8>, f64)> = Vec::new();
            if next == 2 {
                suffixes.push((moran.system().smallest_continuation(Some(last), cover), 0.0));
            } else {
                for (p, frac) in &next_groups {
                    let Ok(conn) = moran.level_connector(level, last, p[0]) else {
                        continue;
                    };
                    let mut s = conn.to_vec();
                    s.extend_from_slice(p);
                    s.truncate(cover);
                    match suffixes.iter_mut().find(|(t, _)| *t == s) {
                        Some((_, w)) => *w = math::log_add(*w, *frac),
                        None => suffixes.push((s, *frac)),
                    }
                }
            }
            for (s, frac) in &suffixes {
                bw.clear();
                bw.extend_from_slice(seg);
                bw.extend_from_slice(s);
                let sum = cum[level - 1][xi][a.min(split)] + window_sum(psi, &bw, split.min(a), a);
                let v = f.log_weights[xi] - f.log_mass + frac - sum;
                let h = hd.of[xi];
                best[h] = best[h].max(v);
            }
            groups += suffixes.len() as f64;
        }
        Ok((best, math::ln(groups)))
    };

    let total_slots = moran.slots(depth);
    let mut slot = 0usize;
    let mut state = vec![0.0; heads[0].len()];
    let (mut log_norm, mut gap_sum, mut rate_sum, mut log_count) = (0.0, 0usize, 0.0, 0.0);
    let mut cache: BTreeMap<(usize, usize, u8), (Vec<f64>, f64)> = BTreeMap::new();
    let mut rows = Vec::with_capacity((n_end - n_start + 1) as usize);
    for n in n_start..=n_end {
        loop {
            let level = moran.slot_level(slot);
            let f = &fams[level - 1];
            if moran.slot_offset(slot) + f.block_len() as u64 > n {
                break;
            }
            let next_level = moran.slot_level(slot + 1);
            let (table, width) = if next_level == level {
                (&g[level - 1].0, heads[level - 1].len())
            } else {
                (&g[level - 1].1, heads[level].len())
            };
            state = step(&state, &heads[level - 1].of, table, width, None);
            log_norm += f.log_mass;
            gap_sum += f.lag + f.composite.as_ref().map_or(0, |c| c.gap);
            rate_sum += f.n as f64 * f.rate_bound;
            log_count += math::ln(f.len() as f64);
            slot += 1;
        }
        let level = moran.slot_level(slot);
        let a = (n - moran.slot_offset(slot)) as usize;
        let next = if slot + 1 >= total_slots {
            2
        } else if moran.slot_level(slot + 1) == level {
            0
        } else {
            1
        };
        if let alloc::collections::btree_map::Entry::Vacant(e) = cache.entry((level, a, next)) {
            let t = tail(level, a, next)?;
            e.insert(t);
        }
        let (tl, groups) = &cache[&(level, a, next)];
        let excess = state
            .iter()
            .zip(tl)
            .map(|(s, t)| s + t)
            .fold(f64::NEG_INFINITY, f64::max);
        let k = level - 1;
        let f = &fams[level - 1];
        let t_term = (gap_sum + f.n + f.lag) as f64;
        let nf = n as f64;
        let dev = excess - log_norm;
        rows.push(BallRow {
            n,
            k,
            j: slot - moran.slots(k),
            log_balls: log_count + groups,
            log_excess: excess,
            log_norm,
            block_rhs: 2.0 * nf * var + sup * t_term,
            correction_rhs: rate_sum,
            rate_margin: -nf * rate - dev,
            rate_condition: family_rate * nf - rate_sum + sup * t_term <= 3.0 * gamma * nf,
        });
    }
    let block_violations = rows
        .iter()
        .filter(|r| r.log_excess > r.block_rhs + TOL)
        .count();
    let correction_violations = rows
        .iter()
        .filter(|r| r.log_norm < r.correction_rhs - TOL)
        .count();
    let mut rate_threshold = None;
    for r in rows.iter().rev() {
        if !r.rate_condition {
            break;
        }
        rate_threshold = Some(r.n);
    }
    let rate_violations = match rate_threshold {
        Some(t) => rows
            .iter()
            .filter(|r| r.n >= t && r.rate_margin < -TOL)
            .count(),
        None => 0,
    };
    let implied_log_k = rows
        .iter()
        .map(|r| -r.rate_margin)
        .fold(f64::NEG_INFINITY, f64::max);
    let passed = block_violations == 0
        && correction_violations == 0
        && rate_violations == 0
        && rate_threshold.is_some();
    Ok(BallBoundReport {
        n_start,
        n_end,
        ball_resolution: eps.finer(1),
        variation: var,
        sup_norm: sup,
        rate,
        rows,
        block_violations,
        correction_violations,
        rate_threshold,
        rate_violations,
        implied_log_k,
        passed,
    })
}

/// `log μ([u])` for the measure of the deepest level, walking the slots the
/// cylinder overlaps. `-∞` when `[u]` misses the construction.
pub fn cylinder_log_mass(moran: &Moran, u: &[u8]) -> Result<f64> {
    let k = moran.system().alphabet_size();
    let l = u.len();
    let total = moran.slots(moran.depth());
    // state[f]: mass of the choices so far, with the current member starting with f.
    let mut state = vec![0.0f64; k];
    for slot in 0..total {
        let level = moran.slot_level(slot);
        let f = &moran.families()[level - 1];
        let o = moran.slot_offset(slot) as usize;
        if o >= l {
            let mut acc = f64::NEG_INFINITY;
            for (x, lw) in f.members.iter().zip(&f.log_weights) {
                acc = math::log_add(acc, state[x.symbols()[0] as usize] + lw - f.log_mass);
            }
            return Ok(acc);
        }
        let seg_len = f.seg_len();
        let mut next = vec![f64::NEG_INFINITY; k];
        let mut done = f64::NEG_INFINITY;
        for (x, lw) in f.members.iter().zip(&f.log_weights) {
            let seg = x.symbols();
            let base = state[seg[0] as usize];
            let overlap = seg_len.min(l - o);
            if base == f64::NEG_INFINITY || seg[..overlap] != u[o..o + overlap] {
                continue;
            }
            let v = base + lw - f.log_mass;
            if o + seg_len >= l {
                done = math::log_add(done, v);
                continue;
            }
            let last = seg[seg_len - 1];
            let rest = &u[o + seg_len..];
            if slot + 1 == total {
                if moran.system().smallest_continuation(Some(last), rest.len()) == rest {
                    done = math::log_add(done, v);
                }
                continue;
            }
            for to in 0..k as u8 {
                let Ok(conn) = moran.level_connector(level, last, to) else {
                    continue;
                };
                let ov = conn.len().min(rest.len());
                if conn[..ov] == rest[..ov] {
                    next[to as usize] = math::log_add(next[to as usize], v);
                }
            }
        }
        if done > f64::NEG_INFINITY || next.iter().all(|&v| v == f64::NEG_INFINITY) {
            return Ok(done);
        }
        state = next;
    }
    Ok(f64::NEG_INFINITY)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OscillationLevel {
    pub k: usize,
    pub time: u64,
    /// `∫ φ dμ_ρ(k)`.
    pub target: f64,
    /// Extremes of `S_{t_k} φ / t_k` over all atoms.
    pub min_average: f64,
    pub max_average: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OscillationPair {
    pub k: usize,
    /// Smallest `|avg_{t_{k+1}} - avg_{t_k}|` over all atoms, signed toward the
    /// change of target.
    pub min_difference: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OscillationWitness {
    pub k: usize,
    pub value: f64,
    /// Member indices of the first slots of an offending atom.
    pub first_digits: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OscillationReport {
    pub delta: f64,
    /// `|∫φ dμ_1 - ∫φ dμ_2| - 2δ`.
    pub required_difference: f64,
    pub levels: Vec<OscillationLevel>,
    pub pairs: Vec<OscillationPair>,
    /// Extremes are exact over every atom of the deepest level.
    pub all_atoms: bool,
    pub witness: Option<OscillationWitness>,
    pub passed: bool,
}

/// `max Σ_{slots < slots(k_end)} coef(level) · block sum` over all atoms.
fn extreme(
    moran: &Moran,
    heads: &[Heads],
    sums: &[BlockSums],
    k_end: usize,
    coef: &dyn Fn(usize) -> f64,
    record: bool,
) -> (f64, Option<Vec<u32>>) {
    let depth = moran.depth();
    let scale = |t: &Vec<Vec<f64>>, c: f64| -> Vec<Vec<f64>> {
        t.iter()
            .map(|row| row.iter().map(|v| c * v).collect())
            .collect()
    };
    let mut state = vec![0.0; heads[0].len()];
    let mut trail: Vec<Vec<u32>> = Vec::new();
    let mut final_best = (f64::NEG_INFINITY, 0usize);
    for i in 1..=k_end {
        let c = coef(i);
        let hd = &heads[i - 1];
        let inner = scale(&sums[i - 1].inner, c);
        let count = moran.schedule().counts[i - 1];
        // Max-plus matrix over heads, so long runs of slots cost |H|² each.
        let mut mat = vec![vec![(f64::NEG_INFINITY, 0u32); hd.len()]; hd.len()];
        for (x, row) in inner.iter().enumerate() {
            for (h, &w) in row.iter().enumerate() {
                let e = &mut mat[hd.of[x]][h];
                if !w.is_nan() && w > e.0 {
                    *e = (w, x as u32);
                }
            }
        }
        for _ in 0..count - 1 {
            let mut next = vec![f64::NEG_INFINITY; hd.len()];
            let mut arg = vec![0u32; hd.len()];
            for (h, row) in mat.iter().enumerate() {
                for (h2, &(w, x)) in row.iter().enumerate() {
                    if state[h] + w > next[h2] {
                        next[h2] = state[h] + w;
                        arg[h2] = x;
                    }
                }
            }
            state = next;
            if record {
                trail.push(arg);
            }
        }
        if i < depth {
            let outer = scale(&sums[i - 1].outer, c);
            let mut arg = Vec::new();
            state = step(&state, &hd.of, &outer, heads[i].len(), Some(&mut arg));
            if record {
                trail.push(arg);
            }
            if i == k_end {
                for (h, &v) in state.iter().enumerate() {
                    if v > final_best.0 {
                        final_best = (v, h);
                    }
                }
            }
        } else {
            for (x, &v) in sums[i - 1].last.iter().enumerate() {
                let total = state[hd.of[x]] + c * v;
                if total > final_best.0 {
                    final_best = (total, x);
                }
            }
        }
    }
    if !record {
        return (final_best.0, None);
    }
    // Walk back: each recorded entry names the member chosen for that slot.
    let slots = moran.slots(k_end);
    let mut digits = vec![0u32; slots];
    let ends_in_last = k_end == depth;
    let mut h = final_best.1;
    let mut slot = slots;
    if ends_in_last {
        slot -= 1;
        digits[slot] = h as u32;
        h = heads[depth - 1].of[h];
    }
    while slot > 0 {
        slot -= 1;
        let x = trail[slot][h];
        digits[slot] = x;
        h = heads[moran.slot_level(slot) - 1].of[x as usize];
    }
    (final_best.0, Some(digits))
}

/// Partial Birkhoff averages at every `t_k` against the alternating targets,
/// exactly over all atoms of the deepest level.
pub fn oscillation_check(
    moran: &Moran,
    phi: &Potential,
    integrals: [f64; 2],
    delta: f64,
) -> Result<OscillationReport> {
    let depth = moran.depth();
    if depth < 2 {
        bail!(InvalidArgument, "oscillation needs at least two levels");
    }
    if integrals[0] == integrals[1] {
        bail!(
            InvalidArgument,
            "the two measures give φ the same integral; nothing can oscillate"
        );
    }
    let c = (phi.range() - 1).max(1);
    let heads: Vec<Heads> = moran
        .families()
        .iter()
        .map(|f| Heads::new(&f.members, c))
        .collect();
    let sums = block_sums(moran, phi, &heads)?;
    let times = &moran.schedule().times;
    let target = |k: usize| integrals[(k + 1) % 2];
    let mut levels = Vec::with_capacity(depth);
    let mut witness = None;
    for k in 1..=depth {
        let t = times[k] as f64;
        let max = extreme(moran, &heads, &sums, k, &|_| 1.0, false).0 / t;
        let min = -extreme(moran, &heads, &sums, k, &|_| -1.0, false).0 / t;
        let within = max - target(k) <= delta + TOL && target(k) - min <= delta + TOL;
        if !within && witness.is_none() {
            let up = max - target(k) > delta + TOL;
            let sign = if up { 1.0 } else { -1.0 };
            let (_, digits) = extreme(moran, &heads, &sums, k, &|_| sign, true);
            let mut d = digits.unwrap_or_default();
            d.truncate(32);
            witness = Some(OscillationWitness {
                k,
                value: if up { max } else { min },
                first_digits: d,
            });
        }
        levels.push(OscillationLevel {
            k,
            time: times[k],
            target: target(k),
            min_average: min,
            max_average: max,
            within,
        });
    }
    let required = (integrals[0] - integrals[1]).abs() - 2.0 * delta;
    let mut pairs = Vec::with_capacity(depth - 1);
    for k in 1..depth {
        let dir = if target(k + 1) > target(k) { 1.0 } else { -1.0 };
        let (tk, tk1) = (times[k] as f64, times[k + 1] as f64);
        let coef = move |i: usize| {
            if i <= k {
                -dir * (1.0 / tk1 - 1.0 / tk)
            } else {
                -dir / tk1
            }
        };
        let (v, _) = extreme(moran, &heads, &sums, k + 1, &coef, false);
        let min_difference = -v;
        let passed = min_difference >= required - TOL;
        if !passed && witness.is_none() {
            let (_, digits) = extreme(moran, &heads, &sums, k + 1, &coef, true);
            let mut d = digits.unwrap_or_default();
            d.truncate(32);
            witness = Some(OscillationWitness {
                k,
                value: min_difference,
                first_digits: d,
            });
        }
        pairs.push(OscillationPair {
            k,
            min_difference,
            passed,
        });
    }
    let passed = levels.iter().all(|l| l.within) && pairs.iter().all(|p| p.passed);
    Ok(OscillationReport {
        delta,
        required_difference: required,
        levels,
        pairs,
        all_atoms: true,
        witness,
        passed,
    })
}
