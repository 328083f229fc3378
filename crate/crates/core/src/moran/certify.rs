//! The full pipeline: hypotheses, good sets, families, schedule, fractal
//! levels, every check, and the resulting lower bound for the pressure of the
//! historic set.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::checks::{oscillation_check, verify_ball_bound, BallBoundReport, OscillationReport};
use super::family::{compose_block, select_separated_family, CompositeParts, SeparatedFamily};
use super::fractal::{
    build_fractal_level, check_separation, FractalLevel, Moran, Selection, SeparationReport,
};
use super::good::{good_set, GoodSet};
use super::params::ConstructionParams;
use super::schedule::{choose_schedule, Schedule};
use crate::error::{bail, Error, Result};
use crate::math;
use crate::specification::mixing_lag;
use crate::symbolic::SymbolicSystem;
use crate::thermo::{perron_pressure, InvariantMeasure, MarkovMeasure, MixedMeasure, Potential};

/// Relative tolerance of the `κ_k = Π M_i^{N_i}` identity.
const KAPPA_TOL: f64 = 1e-9;
/// Largest `|h_μ + ∫ψ dμ - P(ψ)|` accepted from a supplied equilibrium state.
const EQUILIBRIUM_TOL: f64 = 1e-6;

/// The measure the even levels follow.
#[derive(Clone, Debug)]
pub enum SecondMeasure {
    /// An ergodic measure with a different `∫ φ`.
    Ergodic(MarkovMeasure),
    /// `μ_2 = w1 μ_1 + (1 - w1) ν`. Even levels use two-block words, the first
    /// block good for `μ_1` and the second for `ν`.
    Mixture { nu: MarkovMeasure, w1: f64 },
}

#[derive(Clone, Debug)]
pub struct CertifyOptions {
    /// `C`; the Perron pressure of `ψ` when absent.
    pub pressure: Option<f64>,
    /// Candidate equilibrium state for the equality annotation.
    pub equilibrium: Option<MarkovMeasure>,
    /// Largest ball order swept.
    pub sweep_limit: u64,
    /// Largest `t_k` scheduled.
    pub max_time: u64,
    /// Lists a member of `Θ_1` twice, to check that the certificate refuses.
    pub inject_duplicate: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            pressure: None,
            equilibrium: None,
            sweep_limit: 4096,
            max_time: 1 << 31,
            inject_duplicate: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "route", rename_all = "snake_case"))]
pub enum Route {
    Ergodic,
    Composite { w1: f64 },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Hypotheses {
    pub pressure: f64,
    /// `h_μ + ∫ψ dμ` for `μ_1` and `μ_2`.
    pub free_energies: [f64; 2],
    /// `∫ φ dμ_1`, `∫ φ dμ_2`.
    pub integrals: [f64; 2],
    /// `h_ν + ∫ψ dν` and `∫ φ dν` on the composite route.
    pub nu: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LevelRecord {
    pub k: usize,
    /// 1 or 2: which measure the level follows.
    pub measure: usize,
    pub l_k: usize,
    pub delta_k: f64,
    /// Orders tried before this one was accepted.
    pub tried: usize,
    pub n: usize,
    /// Exact measure of the good set (the smaller one for two blocks).
    pub good_measure: f64,
    pub good_required: f64,
    pub lag: usize,
    pub lag_ok: bool,
    pub members: usize,
    pub log_mass: f64,
    pub rate: f64,
    pub rate_bound: f64,
    pub meets_bound: bool,
    pub separated: bool,
    pub composite: Option<CompositeParts>,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LemmaChecks {
    /// Good sets above `1 - γ`, lag budgets, separated families, `M_k` bounds.
    pub families: bool,
    /// Schedule ratios within their thresholds and nonincreasing.
    pub schedule: bool,
    /// Averages at every `t_k` within `δ` of the target, consecutive ones apart.
    pub oscillation: bool,
    /// Atoms of every level pairwise `(t_k, 3ε)`-separated.
    pub separation: bool,
    /// `κ_k = Π M_i^{N_i}` wherever every atom was listed.
    pub kappa: bool,
    /// Ball masses against the block form and the `D`, `E` corrections.
    pub ball_bound: bool,
    /// Ball masses against the rate form past its threshold.
    pub rate_bound: bool,
}

impl LemmaChecks {
    pub fn all(&self) -> bool {
        self.families
            && self.schedule
            && self.oscillation
            && self.separation
            && self.kappa
            && self.ball_bound
            && self.rate_bound
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EqualityClaim {
    pub pressure: f64,
    pub free_energy: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HistoricCertificate {
    pub params: ConstructionParams,
    pub route: Route,
    pub hypotheses: Hypotheses,
    /// The gluing lag `p` at `ε/4`.
    pub lag: usize,
    /// `Var(ψ, ε)`.
    pub variation: f64,
    /// Smallest rate a family was held to: `C - 4γ` on the ergodic route.
    pub family_rate: f64,
    pub levels: Vec<LevelRecord>,
    pub schedule: Option<Schedule>,
    pub achieved_depth: usize,
    pub fractal: Vec<FractalLevel>,
    pub separation: Vec<SeparationReport>,
    pub oscillation: Option<OscillationReport>,
    pub ball_bound: Option<BallBoundReport>,
    pub verified: LemmaChecks,
    /// `family_rate - 3γ - 2Var(ψ, ε)`, i.e. `C - 2Var(ψ, ε) - 7γ`.
    pub lower_bound: Option<f64>,
    /// `family_rate - 5γ`, i.e. `C - 9γ`; valid when `Var(ψ, ε) ≤ γ`.
    pub relaxed_lower_bound: Option<f64>,
    /// Log of the constant in the mass distribution principle.
    pub implied_log_k: Option<f64>,
    pub equality: Option<EqualityClaim>,
    pub caveats: Vec<String>,
    pub transcript: Vec<String>,
}

impl HistoricCertificate {
    /// First failing stage, if any.
    pub fn failure(&self) -> Option<&str> {
        if self.lower_bound.is_some() {
            return None;
        }
        self.transcript
            .iter()
            .find(|l| l.contains("FAIL"))
            .map(String::as_str)
            .or(Some("incomplete"))
    }
}

struct Context<'a> {
    sys: &'a SymbolicSystem,
    phi: &'a Potential,
    psi: &'a Potential,
    params: &'a ConstructionParams,
    lag: usize,
}

impl Context<'_> {
    fn family(&self, good: &GoodSet, rate: f64) -> Result<SeparatedFamily> {
        select_separated_family(
            good,
            self.sys,
            self.phi,
            self.psi,
            self.params.glue_resolution(),
            self.params.separation_lookahead(),
            rate,
            self.params.family,
        )
    }

    fn good(&self, mu: &MarkovMeasure, k: usize, n: usize) -> Result<GoodSet> {
        good_set(
            self.sys,
            mu,
            self.phi,
            self.params.delta_k(k),
            1.0 - self.params.gamma,
            k,
            n,
            self.lag,
        )
    }

    /// Smallest `n ≥ l_k` whose good set and family pass.
    fn search(
        &self,
        mu: &MarkovMeasure,
        k: usize,
        l_k: usize,
        rate: f64,
    ) -> Result<Option<(usize, GoodSet, SeparatedFamily)>> {
        for (tried, n) in (l_k..=self.params.n_cap).enumerate() {
            let good = self.good(mu, k, n)?;
            if !good.passes() {
                continue;
            }
            let fam = match self.family(&good, rate) {
                Ok(f) => f,
                Err(Error::EnumerationCap { .. }) => continue,
                Err(e) => return Err(e),
            };
            if fam.len() >= 2 && fam.meets_bound() {
                return Ok(Some((tried, good, fam)));
            }
        }
        Ok(None)
    }

    /// Smallest `n̂ ≥ l_k` whose two blocks pass and whose product family
    /// meets `rate`.
    #[allow(clippy::type_complexity)]
    fn search_composite(
        &self,
        mu1: &MarkovMeasure,
        nu: &MarkovMeasure,
        w1: f64,
        k: usize,
        l_k: usize,
        rates: [f64; 3],
    ) -> Result<Option<(usize, [GoodSet; 2], SeparatedFamily)>> {
        for (tried, n_hat) in (l_k..=self.params.n_cap).enumerate() {
            let n1 = math::floor(w1 * n_hat as f64) as usize;
            let n2 = math::floor((1.0 - w1) * n_hat as f64) as usize;
            if n1 == 0 || n2 == 0 {
                continue;
            }
            let g1 = self.good(mu1, k, n1)?;
            if !g1.passes() {
                continue;
            }
            let g2 = self.good(nu, k, n2)?;
            if !g2.passes() {
                continue;
            }
            let (f1, f2) = match (self.family(&g1, rates[0]), self.family(&g2, rates[1])) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(Error::EnumerationCap { .. }), _) | (_, Err(Error::EnumerationCap { .. })) => {
                    continue
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            if !f1.meets_bound() || !f2.meets_bound() {
                continue;
            }
            let mut fam = compose_block(self.sys, &f1, &f2, w1, n_hat, self.lag)?;
            fam.rate_bound = rates[2];
            if fam.len() >= 2 && fam.meets_bound() {
                return Ok(Some((tried, [g1, g2], fam)));
            }
        }
        Ok(None)
    }
}

fn record(
    k: usize,
    l_k: usize,
    delta_k: f64,
    tried: usize,
    goods: &[&GoodSet],
    fam: &SeparatedFamily,
) -> LevelRecord {
    LevelRecord {
        k,
        measure: ConstructionParams::rho(k),
        l_k,
        delta_k,
        tried,
        n: fam.n,
        good_measure: goods
            .iter()
            .map(|g| g.measure)
            .fold(f64::INFINITY, f64::min),
        good_required: goods[0].required,
        lag: fam.lag,
        lag_ok: goods.iter().all(|g| g.lag_ok),
        members: fam.len(),
        log_mass: fam.log_mass,
        rate: fam.rate(),
        rate_bound: fam.rate_bound,
        meets_bound: fam.meets_bound(),
        separated: fam.separation_witness().is_none(),
        composite: fam.composite.clone(),
    }
}

/// Runs the construction and every check. Invalid input or a failed
/// hypothesis is an error; a failed check yields a certificate without a
/// lower bound whose transcript names the failing stage.
pub fn certify(
    sys: &SymbolicSystem,
    phi: &Potential,
    psi: &Potential,
    mu1: &MarkovMeasure,
    second: &SecondMeasure,
    params: &ConstructionParams,
    opts: &CertifyOptions,
) -> Result<HistoricCertificate> {
    certify_into(sys, phi, psi, mu1, second, params, opts, &mut None)
}

/// [`certify`] that also hands back the Moran construction, when the run got
/// far enough to build one.
pub fn certify_with_construction(
    sys: &SymbolicSystem,
    phi: &Potential,
    psi: &Potential,
    mu1: &MarkovMeasure,
    second: &SecondMeasure,
    params: &ConstructionParams,
    opts: &CertifyOptions,
) -> Result<(HistoricCertificate, Option<Moran>)> {
    let mut moran = None;
    let cert = certify_into(sys, phi, psi, mu1, second, params, opts, &mut moran)?;
    Ok((cert, moran))
}

#[allow(clippy::too_many_arguments)]
fn certify_into(
    sys: &SymbolicSystem,
    phi: &Potential,
    psi: &Potential,
    mu1: &MarkovMeasure,
    second: &SecondMeasure,
    params: &ConstructionParams,
    opts: &CertifyOptions,
    slot: &mut Option<Moran>,
) -> Result<HistoricCertificate> {
    params.validate()?;
    sys.require_primitive()?;
    let m = params.eps.m() as usize;
    if psi.range() > m + 2 {
        bail!(
            InvalidPotential,
            "ψ has range {} but balls at ε/2 only fix {} symbols past n",
            psi.range(),
            m + 1
        );
    }
    if phi.range() > m + 3 {
        bail!(
            InvalidPotential,
            "φ has range {} but segments only fix {} symbols past n",
            phi.range(),
            m + 2
        );
    }
    let mut transcript = Vec::new();
    let mut caveats = Vec::new();

    // Hypotheses.
    let c = match opts.pressure {
        Some(c) => c,
        None => perron_pressure(sys, psi)?.pressure,
    };
    let gamma = params.gamma;
    if !mu1.is_ergodic() {
        bail!(Hypothesis, "μ_1 is not ergodic");
    }
    let (route, mu2_free, mu2_int, nu_stats) = match second {
        SecondMeasure::Ergodic(mu2) => {
            if !mu2.is_ergodic() {
                bail!(
                    Hypothesis,
                    "μ_2 is not ergodic; give it as a mixture w1 μ_1 + (1 - w1) ν"
                );
            }
            (
                Route::Ergodic,
                mu2.free_energy(psi)?,
                mu2.integrate(phi)?,
                None,
            )
        }
        SecondMeasure::Mixture { nu, w1 } => {
            if !nu.is_ergodic() {
                bail!(Hypothesis, "ν is not ergodic");
            }
            let mix = MixedMeasure::new(vec![(*w1, mu1.clone()), (1.0 - *w1, nu.clone())])?;
            (
                Route::Composite { w1: *w1 },
                mix.free_energy(psi)?,
                mix.integrate(phi)?,
                Some([nu.free_energy(psi)?, nu.integrate(phi)?]),
            )
        }
    };
    let hypotheses = Hypotheses {
        pressure: c,
        free_energies: [mu1.free_energy(psi)?, mu2_free],
        integrals: [mu1.integrate(phi)?, mu2_int],
        nu: nu_stats,
    };
    for (i, f) in hypotheses.free_energies.iter().enumerate() {
        if !(*f > c - gamma) {
            bail!(
                Hypothesis,
                "h + ∫ψ = {f:.6} for μ_{} is not above C - γ = {:.6}",
                i + 1,
                c - gamma
            );
        }
    }
    let gap = (hypotheses.integrals[0] - hypotheses.integrals[1]).abs();
    if gap == 0.0 {
        bail!(
            Hypothesis,
            "both measures give ∫φ = {}; nothing can oscillate",
            hypotheses.integrals[0]
        );
    }
    if !(4.0 * params.delta < gap) {
        bail!(
            Hypothesis,
            "4δ = {} is not below |∫φ dμ_1 - ∫φ dμ_2| = {gap}",
            4.0 * params.delta
        );
    }
    transcript.push(format!(
        "hypotheses: C = {c:.6}, free energies {:.6} / {:.6} > C - γ = {:.6}, integrals {:.6} / {:.6}, 4δ = {} < {gap:.6}",
        hypotheses.free_energies[0],
        hypotheses.free_energies[1],
        c - gamma,
        hypotheses.integrals[0],
        hypotheses.integrals[1],
        4.0 * params.delta
    ));

    let glue = params.glue_resolution();
    let lag = mixing_lag(sys)?.at(glue)?.value(1);
    let ctx = Context {
        sys,
        phi,
        psi,
        params,
        lag,
    };
    let variation = psi.oscillation(params.eps);
    transcript.push(format!(
        "gluing at m = {} with lag p = {lag}; Var(ψ, ε) = {variation}",
        glue.m()
    ));

    let mut cert = HistoricCertificate {
        params: params.clone(),
        route: route.clone(),
        hypotheses: hypotheses.clone(),
        lag,
        variation,
        family_rate: c - 4.0 * gamma,
        levels: Vec::new(),
        schedule: None,
        achieved_depth: 0,
        fractal: Vec::new(),
        separation: Vec::new(),
        oscillation: None,
        ball_bound: None,
        verified: LemmaChecks::default(),
        lower_bound: None,
        relaxed_lower_bound: None,
        implied_log_k: None,
        equality: None,
        caveats: Vec::new(),
        transcript: Vec::new(),
    };

    if let Some(eq) = &opts.equilibrium {
        let f = eq.free_energy(psi)?;
        let gap = (f - c).abs();
        if gap <= EQUILIBRIUM_TOL {
            cert.equality = Some(EqualityClaim {
                pressure: c,
                free_energy: f,
                gap,
            });
            transcript.push(format!(
                "equilibrium state: h + ∫ψ = {f:.9}, gap {gap:.1e}; the historic set carries full pressure {c:.6}"
            ));
        } else {
            caveats.push(format!(
                "supplied equilibrium state misses the pressure by {gap:.3e}; no equality claim"
            ));
        }
    }

    // Levels.
    let mut families = Vec::with_capacity(params.depth);
    let mut previous_l = 0;
    for k in 1..=params.depth {
        let l_k = params.l_k(k, lag, previous_l);
        previous_l = l_k;
        let delta_k = params.delta_k(k);
        let found = match (&route, second, ConstructionParams::rho(k)) {
            (Route::Composite { w1 }, SecondMeasure::Mixture { nu, .. }, 2) => {
                let nu_free = nu_stats_free(&hypotheses);
                let rates = [
                    hypotheses.free_energies[0] - 4.0 * gamma,
                    nu_free - 4.0 * gamma,
                    (1.0 - gamma) * (1.0 - gamma) * (c - 5.0 * gamma),
                ];
                ctx.search_composite(mu1, nu, *w1, k, l_k, rates)?
                    .map(|(t, [g1, g2], f)| {
                        let r = record(k, l_k, delta_k, t, &[&g1, &g2], &f);
                        (r, f)
                    })
            }
            (_, SecondMeasure::Ergodic(mu2), 2) => ctx
                .search(mu2, k, l_k, c - 4.0 * gamma)?
                .map(|(t, g, f)| (record(k, l_k, delta_k, t, &[&g], &f), f)),
            _ => ctx
                .search(mu1, k, l_k, c - 4.0 * gamma)?
                .map(|(t, g, f)| (record(k, l_k, delta_k, t, &[&g], &f), f)),
        };
        let Some((rec, mut fam)) = found else {
            transcript.push(format!(
                "level {k}: FAIL no order in [{l_k}, {}] gives a good set above 1 - γ with a family meeting its bound",
                params.n_cap
            ));
            cert.transcript = transcript;
            cert.caveats = caveats;
            return Ok(cert);
        };
        transcript.push(format!(
            "level {k}: n = {} (l_k = {l_k}, δ_k = {delta_k:.5}), good measure {:.6} > {:.6}, {} members, rate {:.6} >= {:.6}",
            rec.n, rec.good_measure, rec.good_required, rec.members, rec.rate, rec.rate_bound
        ));
        cert.family_rate = cert.family_rate.min(fam.rate_bound);
        if k == 1 && opts.inject_duplicate {
            fam = fam.with_duplicate();
            transcript.push(String::from(
                "level 1: a member was listed twice on request",
            ));
        }
        let mut rec = rec;
        rec.separated = fam.separation_witness().is_none();
        rec.members = fam.len();
        cert.levels.push(rec);
        families.push(fam);
    }
    cert.verified.families = cert
        .levels
        .iter()
        .all(|r| r.lag_ok && r.separated && r.meets_bound && r.good_measure > r.good_required);
    if !cert.verified.families {
        transcript.push(String::from(
            "families: FAIL a family is not separated or misses its bound",
        ));
    }

    // Schedule.
    let schedule = choose_schedule(&families, params.theta, opts.max_time)?;
    cert.achieved_depth = schedule.achieved_depth;
    cert.verified.schedule =
        schedule.within_thresholds && schedule.monotone && schedule.achieved_depth >= 2;
    transcript.push(format!(
        "schedule: N = {:?}, t = {:?}{}",
        schedule.counts,
        &schedule.times[1..],
        if cert.verified.schedule { "" } else { " FAIL" }
    ));
    if schedule.achieved_depth < params.depth {
        caveats.push(format!(
            "only {} of {} levels fit below t = {}",
            schedule.achieved_depth, params.depth, opts.max_time
        ));
    }
    cert.schedule = Some(schedule.clone());
    if schedule.achieved_depth < 2 {
        transcript.push(String::from("schedule: FAIL fewer than two levels"));
        cert.transcript = transcript;
        cert.caveats = caveats;
        return Ok(cert);
    }
    families.truncate(schedule.achieved_depth);
    let moran: &Moran = slot.insert(Moran::new(sys, families, schedule.clone())?);
    let depth = moran.depth();

    // Fractal levels and separation.
    cert.verified.separation = true;
    cert.verified.kappa = true;
    for k in 1..=depth {
        let level = match build_fractal_level(moran, k, params.atom_cap, params.seedless) {
            Ok(l) => l,
            Err(Error::Construction(msg)) => {
                transcript.push(format!("level {k} atoms: FAIL {msg}"));
                cert.verified.separation = false;
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(err) = level.kappa_relative_error {
            if err > KAPPA_TOL {
                cert.verified.kappa = false;
                transcript.push(format!(
                    "level {k}: FAIL κ differs from Π M_i^N_i by {err:.3e}"
                ));
            }
        }
        if level.selection == Selection::Sampled {
            caveats.push(format!(
                "level {k}: {} of about e^{:.1} atoms sampled; κ_{k} from the product identity",
                level.len(),
                level.log_atom_count
            ));
        }
        let sep = check_separation(moran, &level, params.eps)?;
        transcript.push(format!(
            "level {k} atoms: {} {}, {} pairs, separation {}",
            level.len(),
            if level.selection == Selection::Exhaustive {
                "(all)"
            } else {
                "(sampled)"
            },
            sep.pairs_checked,
            if sep.passed { "ok" } else { "FAIL" }
        ));
        cert.verified.separation &= sep.passed;
        cert.separation.push(sep);
        cert.fractal.push(level);
    }

    // Oscillation.
    let osc = oscillation_check(moran, phi, hypotheses.integrals, params.delta)?;
    cert.verified.oscillation = osc.passed;
    for l in &osc.levels {
        transcript.push(format!(
            "oscillation t_{} = {}: averages in [{:.6}, {:.6}], target {:.6}{}",
            l.k,
            l.time,
            l.min_average,
            l.max_average,
            l.target,
            if l.within { "" } else { " FAIL" }
        ));
    }
    cert.oscillation = Some(osc);

    // Ball bound.
    let times = &moran.schedule().times;
    let n_start = times[1];
    let n_end = (times[depth] - 1).min(opts.sweep_limit.max(n_start));
    let balls = verify_ball_bound(
        moran,
        psi,
        cert.family_rate,
        gamma,
        params.eps,
        n_start,
        n_end,
    )?;
    cert.verified.ball_bound = balls.block_violations == 0 && balls.correction_violations == 0;
    cert.verified.rate_bound = balls.rate_threshold.is_some() && balls.rate_violations == 0;
    transcript.push(format!(
        "ball bound n in [{n_start}, {n_end}]: {} block and {} correction violations; rate form from n = {} with {} violations; log K = {:.6}",
        balls.block_violations,
        balls.correction_violations,
        balls.rate_threshold.map_or(String::from("never"), |t| format!("{t}")),
        balls.rate_violations,
        balls.implied_log_k
    ));
    cert.implied_log_k = Some(balls.implied_log_k);
    cert.ball_bound = Some(balls);

    if cert.verified.all() {
        let tight = cert.family_rate - 3.0 * gamma - 2.0 * variation;
        cert.lower_bound = Some(tight);
        if variation <= gamma {
            cert.relaxed_lower_bound = Some(cert.family_rate - 5.0 * gamma);
        }
        transcript.push(format!("lower bound: P(historic set, ψ) >= {tight:.6}"));
    } else {
        transcript.push(String::from(
            "lower bound: FAIL not emitted, a check failed",
        ));
    }
    cert.transcript = transcript;
    cert.caveats = caveats;
    Ok(cert)
}

fn nu_stats_free(h: &Hypotheses) -> f64 {
    h.nu.map_or(f64::NAN, |v| v[0])
}

#[cfg(test)]
mod tests {
    use super::super::params::ThresholdRule;
    use super::*;

    fn desk(
        gamma: f64,
        delta: f64,
    ) -> (
        SymbolicSystem,
        Potential,
        Potential,
        MarkovMeasure,
        MarkovMeasure,
        ConstructionParams,
    ) {
        let sys = SymbolicSystem::full_shift(2);
        let phi = Potential::indicator(&sys, 1, 1.0).unwrap();
        let psi = Potential::constant(&sys, 0.0);
        let mu1 = MarkovMeasure::bernoulli(&sys, &[0.25, 0.75]).unwrap();
        let mu2 = MarkovMeasure::bernoulli(&sys, &[0.75, 0.25]).unwrap();
        let params = ConstructionParams::new(gamma, delta, crate::symbolic::Resolution(2));
        (sys, phi, psi, mu1, mu2, params)
    }

    #[test]
    fn two_level_certificate() {
        let (sys, phi, psi, mu1, mu2, mut params) = desk(0.14, 0.1);
        params.depth = 2;
        let cert = certify(
            &sys,
            &phi,
            &psi,
            &mu1,
            &SecondMeasure::Ergodic(mu2),
            &params,
            &CertifyOptions::default(),
        )
        .unwrap();
        assert!(cert.verified.all(), "{:#?}", cert.transcript);
        let c = 2f64.ln();
        assert!((cert.lower_bound.unwrap() - (c - 7.0 * 0.14)).abs() < 1e-12);
        assert!((cert.relaxed_lower_bound.unwrap() - (c - 9.0 * 0.14)).abs() < 1e-12);
        assert_eq!(cert.variation, 0.0);
        assert!(cert.failure().is_none());
    }

    #[test]
    fn duplicate_member_is_refused() {
        let (sys, phi, psi, mu1, mu2, mut params) = desk(0.14, 0.1);
        params.depth = 2;
        let opts = CertifyOptions {
            inject_duplicate: true,
            ..CertifyOptions::default()
        };
        let cert = certify(
            &sys,
            &phi,
            &psi,
            &mu1,
            &SecondMeasure::Ergodic(mu2),
            &params,
            &opts,
        )
        .unwrap();
        assert!(cert.lower_bound.is_none());
        assert!(!cert.verified.families);
        assert!(!cert.verified.separation);
        assert!(cert.failure().is_some());
    }

    #[test]
    fn hypotheses_are_checked() {
        let (sys, phi, psi, mu1, mu2, params) = desk(0.05, 0.1);
        // γ too small for Bernoulli(1/4, 3/4) to be near-optimal.
        let err = certify(
            &sys,
            &phi,
            &psi,
            &mu1,
            &SecondMeasure::Ergodic(mu2.clone()),
            &params,
            &CertifyOptions::default(),
        );
        assert!(matches!(err, Err(Error::Hypothesis(_))));
        let (_, _, _, _, _, params) = desk(0.14, 0.2);
        let err = certify(
            &sys,
            &phi,
            &psi,
            &mu1,
            &SecondMeasure::Ergodic(mu2),
            &params,
            &CertifyOptions::default(),
        );
        assert!(matches!(err, Err(Error::Hypothesis(_))));
        let flat = Potential::constant(&sys, 1.0);
        let (_, _, _, _, mu2, params) = desk(0.14, 0.1);
        let err = certify(
            &sys,
            &flat,
            &psi,
            &mu1,
            &SecondMeasure::Ergodic(mu2),
            &params,
            &CertifyOptions::default(),
        );
        assert!(matches!(err, Err(Error::Hypothesis(_))));
    }

    #[test]
    fn equality_annotation() {
        let (sys, phi, psi, mu1, mu2, mut params) = desk(0.14, 0.1);
        params.depth = 2;
        let eq = crate::thermo::equilibrium_measure(&sys, &psi).unwrap();
        let opts = CertifyOptions {
            equilibrium: Some(eq),
            ..CertifyOptions::default()
        };
        let cert = certify(
            &sys,
            &phi,
            &psi,
            &mu1,
            &SecondMeasure::Ergodic(mu2.clone()),
            &params,
            &opts,
        )
        .unwrap();
        let claim = cert.equality.unwrap();
        assert!((claim.pressure - 2f64.ln()).abs() < 1e-12);
        let opts = CertifyOptions {
            equilibrium: Some(mu2.clone()),
            ..CertifyOptions::default()
        };
        let cert = certify(
            &sys,
            &phi,
            &psi,
            &mu1,
            &SecondMeasure::Ergodic(mu2),
            &params,
            &opts,
        )
        .unwrap();
        assert!(cert.equality.is_none());
    }

    #[test]
    fn composite_route() {
        let (sys, phi, psi, mu1, nu, mut params) = desk(0.17, 0.06);
        params.depth = 2;
        params.theta = ThresholdRule::Harmonic { scale: 1.0 };
        let second = SecondMeasure::Mixture { nu, w1: 0.5 };
        let cert = certify(
            &sys,
            &phi,
            &psi,
            &mu1,
            &second,
            &params,
            &CertifyOptions::default(),
        )
        .unwrap();
        assert_eq!(cert.route, Route::Composite { w1: 0.5 });
        assert!((cert.hypotheses.integrals[1] - 0.5).abs() < 1e-12);
        assert!(cert.levels[1].composite.is_some());
        assert!(cert.verified.all(), "{:#?}", cert.transcript);
    }
}
