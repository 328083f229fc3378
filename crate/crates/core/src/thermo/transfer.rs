use alloc::vec;
use alloc::vec::Vec;

use super::{encode, InvariantMeasure, MarkovMeasure, Potential};
use crate::error::{bail, Error, Result};
use crate::math::{self, ln, log_sum_exp};
use crate::symbolic::SymbolicSystem;

/// The higher-block presentation on which a potential becomes a function of
/// edges: states are admissible words of length `s = max(r - 1, 1)`, and the
/// edge `u → v` carries `ψ` of the `(s + 1)`-word it spells.
#[derive(Clone, Debug)]
pub struct BlockGraph {
    order: usize,
    states: Vec<Vec<u8>>,
    /// `(target, ψ(u·a))` per state.
    edges: Vec<Vec<(usize, f64)>>,
}

impl BlockGraph {
    pub fn new(sys: &SymbolicSystem, psi: &Potential) -> Result<Self> {
        if psi.alphabet_size() != sys.alphabet_size() {
            return Err(Error::AlphabetMismatch {
                left: sys.alphabet_size(),
                right: psi.alphabet_size(),
            });
        }
        let k = sys.alphabet_size();
        let order = psi.range().saturating_sub(1).max(1);
        if (k as u128).pow(order as u32) > (1 << 12) {
            bail!(
                InvalidArgument,
                "{} block states are too many for a dense transfer matrix",
                (k as u128).pow(order as u32)
            );
        }
        let mut states = Vec::new();
        let mut buf = Vec::new();
        sys.extend_all(&mut buf, order, &mut |w| states.push(w.to_vec()));
        let mut index = vec![usize::MAX; k.pow(order as u32)];
        for (i, s) in states.iter().enumerate() {
            index[encode(s, k)] = i;
        }
        let mut word = vec![0u8; order + 1];
        let edges = states
            .iter()
            .map(|u| {
                let last = u[order - 1];
                (0..k as u8)
                    .filter(|&a| sys.allowed(last, a))
                    .map(|a| {
                        word[..order].copy_from_slice(u);
                        word[order] = a;
                        (index[encode(&word[1..], k)], psi.value(&word))
                    })
                    .collect()
            })
            .collect();
        Ok(BlockGraph {
            order,
            states,
            edges,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Dense matrix `B_uv = exp(ψ_uv - shift)`.
    fn weights(&self, shift: f64) -> Vec<f64> {
        let n = self.len();
        let mut b = vec![0.0; n * n];
        for (u, out) in self.edges.iter().enumerate() {
            for &(v, w) in out {
                b[u * n + v] = math::exp(w - shift);
            }
        }
        b
    }
}

/// Perron data of the weighted transfer matrix.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EigenData {
    pub spectral_radius: f64,
    /// `log λ`, computed without overflow for large potentials.
    pub pressure: f64,
    pub right_vector: Vec<f64>,
    /// Scaled so that `left · right = 1`.
    pub left_vector: Vec<f64>,
    pub order: usize,
    pub states: Vec<Vec<u8>>,
    /// `max_u |(B r)_u - λ r_u|` relative to `λ max r`.
    pub residual: f64,
}

/// Topological pressure `P(X, ψ) = log λ` of the weighted transfer matrix.
pub fn perron_pressure(sys: &SymbolicSystem, psi: &Potential) -> Result<EigenData> {
    sys.require_primitive()?;
    let graph = BlockGraph::new(sys, psi)?;
    let n = graph.len();
    let shift = psi.max_value();
    let b = graph.weights(shift);
    let iterations = 200_000;
    let (lambda, right) =
        math::perron_vector(&b, n, false, iterations).map_err(|gap| Error::NonConvergence {
            best: f64::NAN,
            gap,
            iterations,
        })?;
    let (_, mut left) =
        math::perron_vector(&b, n, true, iterations).map_err(|gap| Error::NonConvergence {
            best: f64::NAN,
            gap,
            iterations,
        })?;
    let dot: f64 = left.iter().zip(&right).map(|(l, r)| l * r).sum();
    left.iter_mut().for_each(|l| *l /= dot);
    let rmax = right.iter().copied().fold(0.0, f64::max);
    let residual = (0..n)
        .map(|u| {
            let br: f64 = (0..n).map(|v| b[u * n + v] * right[v]).sum();
            (br - lambda * right[u]).abs()
        })
        .fold(0.0, f64::max)
        / (lambda * rmax);
    if residual > 1e-10 {
        return Err(Error::NonConvergence {
            best: ln(lambda) + shift,
            gap: residual,
            iterations,
        });
    }
    let pressure = ln(lambda) + shift;
    Ok(EigenData {
        spectral_radius: math::exp(pressure),
        pressure,
        right_vector: right,
        left_vector: left,
        order: graph.order,
        states: graph.states,
        residual,
    })
}

/// The equilibrium state of `ψ`: the Markov chain
/// `P_uv = B_uv r_v / (λ r_u)` with stationary vector `π_u ∝ l_u r_u`.
pub fn equilibrium_measure(sys: &SymbolicSystem, psi: &Potential) -> Result<MarkovMeasure> {
    let eig = perron_pressure(sys, psi)?;
    let graph = BlockGraph::new(sys, psi)?;
    let n = graph.len();
    let mut p = vec![0.0; n * n];
    for (u, out) in graph.edges.iter().enumerate() {
        let mut row_sum = 0.0;
        for &(v, w) in out {
            let x = math::exp(w - eig.pressure) * eig.right_vector[v] / eig.right_vector[u];
            p[u * n + v] = x;
            row_sum += x;
        }
        // Remove the rounding left by the eigenvector.
        for &(v, _) in out {
            p[u * n + v] /= row_sum;
        }
    }
    let mut pi: Vec<f64> = eig
        .left_vector
        .iter()
        .zip(&eig.right_vector)
        .map(|(l, r)| l * r)
        .collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    // One step of πP polishes the stationary vector to machine precision.
    let mut polished = vec![0.0; n];
    for u in 0..n {
        for v in 0..n {
            polished[v] += pi[u] * p[u * n + v];
        }
    }
    MarkovMeasure::from_blocks(sys, graph.order, p, polished)
}

/// Result of the direct maximization of `h_μ + ∫ ψ dμ` over Markov chains.
#[derive(Clone, Debug)]
pub struct VariationalOptimum {
    pub measure: MarkovMeasure,
    /// `h_μ + ∫ ψ dμ` of the returned chain, a lower bound for the supremum.
    pub value: f64,
    /// An upper bound for the supremum minus `value`.
    pub gap: f64,
    pub iterations: usize,
}

/// Maximizes `h(P) + Σ π_u P_uv ψ_uv` over stochastic matrices supported on
/// the block graph, by soft policy iteration: evaluate the chain (stationary
/// vector and relative values `h`), then replace each row by the softmax of
/// `ψ_uv + h_v`. This never touches eigenvectors, so it checks
/// [`perron_pressure`] independently.
///
/// Every iterate yields the certified bracket
/// `value ≤ sup ≤ max_u [log Σ_v exp(ψ_uv + h_v) - h_u]`, and the loop stops
/// once the bracket is narrower than `tol`.
pub fn maximize_variational(
    sys: &SymbolicSystem,
    psi: &Potential,
    tol: f64,
) -> Result<VariationalOptimum> {
    if !(tol > 0.0) {
        bail!(InvalidArgument, "tolerance must be positive");
    }
    sys.require_primitive()?;
    let graph = BlockGraph::new(sys, psi)?;
    let n = graph.len();
    let mut p = vec![0.0; n * n];
    for (u, out) in graph.edges.iter().enumerate() {
        for &(v, _) in out {
            p[u * n + v] = 1.0 / out.len() as f64;
        }
    }
    let max_iter = 500;
    let mut best = f64::NEG_INFINITY;
    let mut best_gap = f64::INFINITY;
    for iter in 1..=max_iter {
        let pi = math::stationary_vector(&p, n).ok_or(Error::NonConvergence {
            best,
            gap: best_gap,
            iterations: iter,
        })?;
        // Expected one-step reward r_u = Σ_v P_uv (ψ_uv - log P_uv).
        let reward: Vec<f64> = graph
            .edges
            .iter()
            .enumerate()
            .map(|(u, out)| {
                out.iter()
                    .map(|&(v, w)| {
                        let q = p[u * n + v];
                        if q > 0.0 {
                            q * (w - ln(q))
                        } else {
                            0.0
                        }
                    })
                    .sum()
            })
            .collect();
        let value: f64 = pi.iter().zip(&reward).map(|(a, b)| a * b).sum();
        // h_u - Σ_v P_uv h_v + g = r_u with h_0 = 0; unknowns (g, h_1, …).
        let mut a = vec![0.0; n * n];
        for u in 0..n {
            a[u * n] = 1.0;
            for v in 1..n {
                a[u * n + v] = if u == v { 1.0 } else { 0.0 } - p[u * n + v];
            }
        }
        let sol = math::solve(a, reward).ok_or(Error::NonConvergence {
            best,
            gap: best_gap,
            iterations: iter,
        })?;
        let mut h = sol;
        h[0] = 0.0;
        let mut upper = f64::NEG_INFINITY;
        let mut next = vec![0.0; n * n];
        for (u, out) in graph.edges.iter().enumerate() {
            let logits: Vec<f64> = out.iter().map(|&(v, w)| w + h[v]).collect();
            let lse = log_sum_exp(&logits);
            upper = upper.max(lse - h[u]);
            for (&(v, _), l) in out.iter().zip(&logits) {
                next[u * n + v] = math::exp(l - lse);
            }
        }
        let gap = (upper - value).max(0.0);
        if value > best {
            best = value;
        }
        best_gap = best_gap.min(upper - best);
        if gap <= tol {
            let mut pi_fixed = pi;
            pi_fixed.iter_mut().for_each(|x| *x = x.max(0.0));
            let measure = polish(sys, graph.order, p, pi_fixed)?;
            return Ok(VariationalOptimum {
                measure,
                value,
                gap,
                iterations: iter,
            });
        }
        p = next;
    }
    Err(Error::NonConvergence {
        best,
        gap: best_gap,
        iterations: max_iter,
    })
}

fn polish(sys: &SymbolicSystem, order: usize, p: Vec<f64>, pi: Vec<f64>) -> Result<MarkovMeasure> {
    let n = pi.len();
    let total: f64 = pi.iter().sum();
    let mut out = vec![0.0; n];
    for u in 0..n {
        for v in 0..n {
            out[v] += pi[u] / total * p[u * n + v];
        }
    }
    MarkovMeasure::from_blocks(sys, order, p, out)
}

/// Smallest `K` with `K⁻¹ ≤ μ([w]) / exp(-n P + S_n ψ(w)) ≤ K` over all
/// admissible words of length `n + r - 1`, `n ≤ max_n`.
pub fn gibbs_constant(
    sys: &SymbolicSystem,
    psi: &Potential,
    mu: &MarkovMeasure,
    pressure: f64,
    max_n: usize,
) -> f64 {
    let r = psi.range();
    let mut worst = 0.0f64;
    let mut buf = Vec::new();
    for n in 1..=max_n {
        sys.extend_all(&mut buf, n + r - 1, &mut |w| {
            let log_ratio =
                ln(mu.word_measure(w)) + n as f64 * pressure - psi.birkhoff_sum_unchecked(w, n);
            worst = worst.max(log_ratio.abs());
        });
    }
    math::exp(worst)
}

/// Value of the Legendre-type bound `inf_q [P(ψ + qφ) - q α]` for the level set
/// of Birkhoff averages equal to `α`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LevelSetValue {
    pub alpha: f64,
    pub value: f64,
    pub q: f64,
    /// False when the minimizer sits on the search boundary, which happens
    /// when `α` is at or beyond the range of `∫ φ dμ`.
    pub interior: bool,
}

pub fn level_set_pressure(
    sys: &SymbolicSystem,
    phi: &Potential,
    psi: &Potential,
    alpha: f64,
    q_max: f64,
) -> Result<LevelSetValue> {
    let f = |q: f64| -> Result<f64> {
        let pot = psi.add_scaled(sys, phi, q)?;
        Ok(perron_pressure(sys, &pot)?.pressure - q * alpha)
    };
    let ratio = (math::sqrt(5.0) - 1.0) / 2.0;
    let (mut a, mut b) = (-q_max, q_max);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 1e-7 * q_max.max(1.0) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    let q = (a + b) / 2.0;
    let value = f(q)?;
    let interior = q.abs() < q_max * 0.999;
    Ok(LevelSetValue {
        alpha,
        value,
        q,
        interior,
    })
}

impl EigenData {
    /// Free energy of the equilibrium state, for checks against `pressure`.
    pub fn check_variational(&self, mu: &MarkovMeasure, psi: &Potential) -> Result<f64> {
        Ok((mu.free_energy(psi)? - self.pressure).abs())
    }
}
