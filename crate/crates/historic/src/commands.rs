//! One function per subcommand. Each writes its artifacts and reports
//! whether the checks it ran passed.

use std::path::PathBuf;

use historic_core::moran::{certify, CertifyOptions, HistoricCertificate, LevelRecord};
use historic_core::pressure::{
    bs_dimension, caratheodory_value, pressure_root, CylinderSet, RootOptions,
};
use historic_core::specification::{glue, mixing_lag, GluingSpec};
use historic_core::thermo::{
    equilibrium_measure, gibbs_constant, katok_partition, level_set_pressure, maximize_variational,
    perron_pressure, InvariantMeasure, KatokOptions, KatokValue, MixedMeasure,
};
use historic_core::{MarkovMeasure, Resolution};
use serde::Serialize;

use crate::config::{build_potential, build_system, Loaded, MeasureChoice, Overrides};
use crate::error::CliError;
use crate::output::Artifacts;

/// What a command reports back to the caller.
pub struct Outcome {
    pub summary: String,
    /// Failing stage and the file describing it.
    pub failure: Option<(String, PathBuf)>,
}

fn core<T>(context: &str, r: historic_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::from_core(context, e))
}

fn outcome(summary: String, passed: bool, stage: &str, report: PathBuf) -> Outcome {
    Outcome {
        summary,
        failure: (!passed).then(|| (stage.to_string(), report)),
    }
}

#[derive(Serialize)]
struct MeasureReport {
    order: usize,
    states: Vec<String>,
    stationary: Vec<f64>,
    /// Row-major over `states`.
    stochastic: Vec<f64>,
}

fn measure_report(mu: &MarkovMeasure) -> MeasureReport {
    MeasureReport {
        order: mu.order(),
        states: mu.states().iter().map(|s| state_name(s)).collect(),
        stationary: mu.stationary().to_vec(),
        stochastic: mu.stochastic().to_vec(),
    }
}

fn state_name(s: &[u8]) -> String {
    s.iter()
        .map(|&b| char::from_digit(b as u32, 36).unwrap_or('?'))
        .collect()
}

#[derive(Serialize)]
struct VariationalReport {
    value: f64,
    gap: f64,
    iterations: usize,
    measure: MeasureReport,
}

#[derive(Serialize)]
struct PressureReport {
    system: String,
    psi_range: usize,
    perron: historic_core::EigenData,
    variational: VariationalReport,
    difference: f64,
    agrees: bool,
    cover_bracket: historic_core::pressure::PressureEstimate,
    bracket_contains_perron: bool,
    passed: bool,
}

#[derive(Serialize)]
struct CoverRow {
    n: usize,
    t: f64,
    m: f64,
}

pub fn pressure(l: &Loaded, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let sys = &l.system;
    let psi = l.psi()?;
    let spec = &l.config.pressure;
    let perron = core("perron pressure", perron_pressure(sys, &psi))?;
    let var = core(
        "variational maximum",
        maximize_variational(sys, &psi, spec.variational_tol),
    )?;
    let z = CylinderSet::whole(sys);
    let mut opts = RootOptions::for_system(sys);
    if let Some(n) = spec.n_max {
        opts.n_max = n;
    }
    opts.tol = spec.tol;
    let eps = Resolution(spec.m);
    let bracket = core("cover bracket", pressure_root(&z, &psi, eps, opts))?;
    let difference = (perron.pressure - var.value).abs();
    let agrees = difference <= var.gap + spec.agreement;
    let contains = bracket.contains(perron.pressure);
    let mut grid = Vec::new();
    for t in [bracket.t_lower, bracket.center, bracket.t_upper] {
        for n in 1..=opts.n_max {
            let v = core("cover value", caratheodory_value(&z, t, &psi, n, n, eps))?;
            grid.push(CoverRow { n, t, m: v.uniform });
        }
    }
    let passed = agrees && contains;
    let summary = format!(
        "P(X, psi) = {:.9} (perron), {:.9} (variational, gap {:.1e}); cover bracket [{:.6}, {:.6}]",
        perron.pressure, var.value, var.gap, bracket.t_lower, bracket.t_upper
    );
    let report = PressureReport {
        system: sys.label().to_string(),
        psi_range: psi.range(),
        variational: VariationalReport {
            value: var.value,
            gap: var.gap,
            iterations: var.iterations,
            measure: measure_report(&var.measure),
        },
        perron,
        difference,
        agrees,
        cover_bracket: bracket,
        bracket_contains_perron: contains,
        passed,
    };
    let path = out.json("pressure.json", &report)?;
    out.csv("pressure_grid.csv", &grid)?;
    Ok(outcome(summary, passed, "pressure cross-check", path))
}

#[derive(Serialize)]
struct EquilibriumReport {
    pressure: f64,
    entropy: f64,
    integral_psi: f64,
    free_energy: f64,
    variational_gap: f64,
    gibbs_constant: f64,
    gibbs_max_n: usize,
    measure: MeasureReport,
    passed: bool,
}

#[derive(Serialize)]
struct TransitionRow {
    from: String,
    to: String,
    probability: f64,
    stationary_from: f64,
}

pub fn equilibrium(l: &Loaded, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let sys = &l.system;
    let psi = l.psi()?;
    let spec = &l.config.equilibrium;
    let eigen = core("perron pressure", perron_pressure(sys, &psi))?;
    let mu = core("equilibrium state", equilibrium_measure(sys, &psi))?;
    let gap = core("variational gap", eigen.check_variational(&mu, &psi))?;
    let integral = core("integral", mu.integrate(&psi))?;
    let free_energy = core("free energy", mu.free_energy(&psi))?;
    let gibbs = gibbs_constant(sys, &psi, &mu, eigen.pressure, spec.gibbs_n);
    let passed = gap <= spec.gap_tol;
    let n = mu.states().len();
    let mut rows = Vec::new();
    for u in 0..n {
        for v in 0..n {
            let p = mu.stochastic()[u * n + v];
            if p > 0.0 {
                rows.push(TransitionRow {
                    from: state_name(&mu.states()[u]),
                    to: state_name(&mu.states()[v]),
                    probability: p,
                    stationary_from: mu.stationary()[u],
                });
            }
        }
    }
    let summary = format!(
        "equilibrium state: h = {:.9}, h + int psi = {:.9}, P = {:.9}, gap {:.1e}, Gibbs constant {:.4}",
        mu.entropy_rate(),
        free_energy,
        eigen.pressure,
        gap,
        gibbs
    );
    let report = EquilibriumReport {
        pressure: eigen.pressure,
        entropy: mu.entropy_rate(),
        integral_psi: integral,
        free_energy,
        variational_gap: gap,
        gibbs_constant: gibbs,
        gibbs_max_n: spec.gibbs_n,
        measure: measure_report(&mu),
        passed,
    };
    let path = out.json("equilibrium.json", &report)?;
    out.csv("equilibrium.csv", &rows)?;
    Ok(outcome(summary, passed, "variational gap", path))
}

#[derive(Serialize)]
struct KatokRow {
    n: usize,
    value: f64,
    rate: f64,
    exact: bool,
    lower_bound: f64,
    cylinders: usize,
    classes: usize,
}

#[derive(Serialize)]
struct KatokReport {
    measure: String,
    gamma: f64,
    m: u32,
    free_energy: f64,
    rows: Vec<KatokRow>,
    final_gap: f64,
    allowed_gap: f64,
    passed: bool,
}

pub fn katok(l: &Loaded, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let sys = &l.system;
    let psi = l.psi()?;
    let spec = &l.config.katok;
    if spec.n_min == 0 || spec.n_max < spec.n_min {
        return Err(CliError::Config(format!(
            "katok: need 1 <= n_min <= n_max, got {}..{}",
            spec.n_min, spec.n_max
        )));
    }
    let mu: Box<dyn InvariantMeasure> = match l.named_second_or_first(&spec.measure)? {
        MeasureChoice::Markov(m) => Box::new(m),
        MeasureChoice::Mixture { mu1, nu, w1 } => Box::new(core(
            "mixture",
            MixedMeasure::new(vec![(w1, mu1), (1.0 - w1, nu)]),
        )?),
    };
    let target = core("free energy", mu.free_energy(&psi))?;
    let opts = KatokOptions::default();
    let mut rows = Vec::new();
    for n in spec.n_min..=spec.n_max {
        let v: KatokValue = core(
            "katok",
            katok_partition(
                sys,
                mu.as_ref(),
                &psi,
                spec.gamma,
                Resolution(spec.m),
                n,
                &opts,
            ),
        )?;
        rows.push(KatokRow {
            n,
            value: v.value,
            rate: v.rate(n),
            exact: v.exact,
            lower_bound: v.lower_bound,
            cylinders: v.cylinders,
            classes: v.classes,
        });
    }
    let last = rows.last().map(|r| r.rate).unwrap_or(f64::NAN);
    let final_gap = (last - target).abs();
    let passed = final_gap <= spec.final_gap;
    let summary = format!(
        "(1/n) log N at n = {}: {:.6}; h + int psi = {:.6}; gap {:.4}",
        spec.n_max, last, target, final_gap
    );
    let report = KatokReport {
        measure: spec.measure.clone(),
        gamma: spec.gamma,
        m: spec.m,
        free_energy: target,
        rows,
        final_gap,
        allowed_gap: spec.final_gap,
        passed,
    };
    let path = out.json("katok.json", &report)?;
    out.csv("katok.csv", &report.rows)?;
    Ok(outcome(summary, passed, "katok rate", path))
}

#[derive(Serialize)]
struct WindowRow {
    segment: usize,
    offset: usize,
    order: usize,
    distance: f64,
}

pub fn glue_cmd(l: &Loaded, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let sys = &l.system;
    let spec = l
        .config
        .glue
        .as_ref()
        .ok_or_else(|| CliError::Config("glue: section missing".into()))?;
    let eps = Resolution(spec.m);
    let mut segments = Vec::with_capacity(spec.segments.len());
    for (i, s) in spec.segments.iter().enumerate() {
        segments.push(core(&format!("glue: segment {i}"), sys.word(s))?);
    }
    let lag = core("lag", mixing_lag(sys).and_then(|f| f.at(eps)))?;
    let gluing = match (&spec.gaps, spec.gap) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("glue: give gap or gaps, not both".into()))
        }
        (Some(gaps), None) => {
            let m = spec.m as usize;
            let orders = segments.iter().map(|s| s.len().saturating_sub(m)).collect();
            GluingSpec::new(segments, orders, gaps.clone(), eps)
        }
        (None, gap) => GluingSpec::uniform(segments, gap.unwrap_or_else(|| lag.value(1)), eps),
    };
    let gluing = core("glue", gluing)?;
    let cert = core("glue", glue(&gluing, sys, Some(&lag)))?;
    let rows: Vec<WindowRow> = cert
        .windows
        .iter()
        .enumerate()
        .map(|(i, w)| WindowRow {
            segment: i,
            offset: w.offset,
            order: w.order,
            distance: w.distance.to_f64(),
        })
        .collect();
    let summary = format!(
        "glued {} segments into {} symbols; shadowing {}; gaps meet the lag: {}",
        cert.windows.len(),
        cert.glued.len(),
        if cert.verified { "verified" } else { "FAILED" },
        cert.gaps_meet_lag
    );
    let passed = cert.verified;
    let path = out.json("glue.json", &cert)?;
    out.csv("glue_windows.csv", &rows)?;
    Ok(outcome(summary, passed, "shadowing", path))
}

#[derive(Serialize)]
struct BsDimReport {
    m: u32,
    n_max: usize,
    tol: f64,
    set: String,
    bracket: historic_core::pressure::DimensionBracket,
    width: f64,
}

pub fn bs_dim(l: &Loaded, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let sys = &l.system;
    let spec = &l.config.bs_dim;
    let psi = match &spec.psi {
        Some(p) => build_potential(sys, &p.resolve(&l.base, "bs_dim.psi")?, "bs_dim.psi")?,
        None => l.psi()?,
    };
    let (z, set) = match (&spec.subshift, spec.words.is_empty()) {
        (Some(_), false) => {
            return Err(CliError::Config(
                "bs_dim: give words or subshift, not both".into(),
            ))
        }
        (Some(sub), true) => {
            let sub = build_system(sub)?;
            let label = format!("subshift {}", sub.label());
            (core("bs_dim", CylinderSet::subshift(sys, sub))?, label)
        }
        (None, false) => {
            let mut words = Vec::new();
            for w in &spec.words {
                words.push(core("bs_dim: word", sys.word(w))?);
            }
            (
                core("bs_dim", CylinderSet::from_words(sys, &words))?,
                format!("cylinders {:?}", spec.words),
            )
        }
        (None, true) => (CylinderSet::whole(sys), "whole space".to_string()),
    };
    let mut opts = RootOptions::for_system(sys);
    if let Some(n) = spec.n_max {
        opts.n_max = n;
    }
    opts.tol = spec.tol;
    let bracket = core("bs_dim", bs_dimension(&z, &psi, Resolution(spec.m), opts))?;
    let summary = format!(
        "BS dimension of {set} in [{:.6}, {:.6}]",
        bracket.lower, bracket.upper
    );
    let report = BsDimReport {
        m: spec.m,
        n_max: opts.n_max,
        tol: opts.tol,
        set,
        width: bracket.width(),
        bracket,
    };
    out.json("bs_dim.json", &report)?;
    out.csv("bs_dim.csv", &[&report.bracket])?;
    Ok(Outcome {
        summary,
        failure: None,
    })
}

#[derive(Serialize)]
struct SpectrumReport {
    pressure: f64,
    q_max: f64,
    rows: Vec<historic_core::thermo::LevelSetValue>,
}

pub fn spectrum(l: &Loaded, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let sys = &l.system;
    let psi = l.psi()?;
    let phi = l.phi()?;
    let spec = &l.config.spectrum;
    let lo = spec.alpha_min.unwrap_or(phi.min_value());
    let hi = spec.alpha_max.unwrap_or(phi.max_value());
    if spec.steps < 2 || lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(CliError::Config(format!(
            "spectrum: need steps >= 2 and alpha_min < alpha_max, got {lo}..{hi}"
        )));
    }
    let pressure = core("perron pressure", perron_pressure(sys, &psi))?.pressure;
    let mut rows = Vec::with_capacity(spec.steps);
    for i in 0..spec.steps {
        let alpha = lo + (hi - lo) * i as f64 / (spec.steps - 1) as f64;
        rows.push(core(
            "level set",
            level_set_pressure(sys, &phi, &psi, alpha, spec.q_max),
        )?);
    }
    let summary = format!(
        "{} level-set values over [{lo}, {hi}]; P(X, psi) = {pressure:.9}",
        rows.len()
    );
    let report = SpectrumReport {
        pressure,
        q_max: spec.q_max,
        rows,
    };
    out.json("spectrum.json", &report)?;
    out.csv("spectrum.csv", &report.rows)?;
    Ok(Outcome {
        summary,
        failure: None,
    })
}

#[derive(Serialize)]
struct OscillationRow {
    k: usize,
    t_k: u64,
    target: f64,
    min_average: f64,
    max_average: f64,
    within: bool,
}

#[derive(Serialize)]
struct LevelRow {
    k: usize,
    measure: usize,
    n: usize,
    lag: usize,
    members: usize,
    good_measure: f64,
    good_required: f64,
    delta_k: f64,
    rate: f64,
    rate_bound: f64,
    meets_bound: bool,
    separated: bool,
    composite: bool,
}

impl From<&LevelRecord> for LevelRow {
    fn from(r: &LevelRecord) -> Self {
        LevelRow {
            k: r.k,
            measure: r.measure,
            n: r.n,
            lag: r.lag,
            members: r.members,
            good_measure: r.good_measure,
            good_required: r.good_required,
            delta_k: r.delta_k,
            rate: r.rate,
            rate_bound: r.rate_bound,
            meets_bound: r.meets_bound,
            separated: r.separated,
            composite: r.composite.is_some(),
        }
    }
}

#[derive(Serialize)]
struct SlackRow {
    k: usize,
    t_k: u64,
    count: usize,
    theta: f64,
    next_ratio: Option<f64>,
    history_ratio: Option<f64>,
}

fn certificate_summary(cert: &HistoricCertificate) -> String {
    let mut s = String::new();
    let v = &cert.verified;
    s.push_str(&format!("route: {:?}\n", cert.route));
    s.push_str(&format!(
        "C = {:.9}, Var(psi, eps) = {}\n",
        cert.hypotheses.pressure, cert.variation
    ));
    s.push_str(&format!(
        "free energies: {:.6}, {:.6}; integrals of phi: {:.6}, {:.6}\n",
        cert.hypotheses.free_energies[0],
        cert.hypotheses.free_energies[1],
        cert.hypotheses.integrals[0],
        cert.hypotheses.integrals[1]
    ));
    s.push_str(&format!("achieved depth: {}\n", cert.achieved_depth));
    for (name, ok) in [
        ("families", v.families),
        ("schedule", v.schedule),
        ("oscillation", v.oscillation),
        ("separation", v.separation),
        ("kappa", v.kappa),
        ("ball_bound", v.ball_bound),
        ("rate_bound", v.rate_bound),
    ] {
        s.push_str(&format!(
            "  {name:<12} {}\n",
            if ok { "pass" } else { "FAIL" }
        ));
    }
    match (cert.lower_bound, cert.relaxed_lower_bound) {
        (Some(lb), relaxed) => {
            s.push_str(&format!("lower bound: {lb:.9}\n"));
            if let Some(r) = relaxed {
                s.push_str(&format!("relaxed lower bound: {r:.9}\n"));
            }
        }
        (None, _) => s.push_str("lower bound: not emitted\n"),
    }
    if let Some(k) = cert.implied_log_k {
        s.push_str(&format!("implied log K: {k:.6}\n"));
    }
    if let Some(eq) = &cert.equality {
        s.push_str(&format!(
            "equality: P(historic, psi) = P(X, psi) = {:.9}\n",
            eq.pressure
        ));
    }
    for c in &cert.caveats {
        s.push_str(&format!("caveat: {c}\n"));
    }
    s
}

pub fn certify_cmd(
    l: &Loaded,
    overrides: &Overrides,
    out: &mut Artifacts,
) -> Result<Outcome, CliError> {
    let sys = &l.system;
    let params = l.params(overrides)?;
    let phi = l.phi()?;
    let psi = l.psi()?;
    let mu1 = l.mu1()?;
    let second = l.second()?;
    let spec = &l.config.certify;
    let equilibrium = match &spec.equilibrium {
        Some(m) => Some(l.markov(m, "certify.equilibrium")?),
        None => None,
    };
    let opts = CertifyOptions {
        pressure: spec.pressure,
        equilibrium,
        sweep_limit: spec.sweep_limit,
        max_time: spec.max_time,
        inject_duplicate: spec.inject_duplicate,
    };
    let cert = match certify(sys, &phi, &psi, &mu1, &second, &params, &opts) {
        Ok(c) => c,
        Err(historic_core::Error::Construction(msg)) => {
            let line = format!("construction FAIL: {msg}");
            let path = out.transcript("transcript.txt", std::slice::from_ref(&line))?;
            return Ok(Outcome {
                summary: line.clone(),
                failure: Some((line, path)),
            });
        }
        Err(e) => return Err(CliError::from_core("certify", e)),
    };
    let transcript = out.transcript("transcript.txt", &cert.transcript)?;
    out.json("certificate.json", &cert)?;
    let summary = certificate_summary(&cert);
    out.text("certificate.txt", &summary)?;
    if let Some(osc) = &cert.oscillation {
        let rows: Vec<OscillationRow> = osc
            .levels
            .iter()
            .map(|o| OscillationRow {
                k: o.k,
                t_k: o.time,
                target: o.target,
                min_average: o.min_average,
                max_average: o.max_average,
                within: o.within,
            })
            .collect();
        out.csv("oscillation.csv", &rows)?;
    }
    if let Some(ball) = &cert.ball_bound {
        out.csv("ball_sweep.csv", &ball.rows)?;
    }
    let levels: Vec<LevelRow> = cert.levels.iter().map(LevelRow::from).collect();
    out.csv("levels.csv", &levels)?;
    if let Some(s) = &cert.schedule {
        let rows: Vec<SlackRow> = s
            .slack
            .iter()
            .map(|e| SlackRow {
                k: e.k,
                t_k: s.times[e.k],
                count: s.counts[e.k - 1],
                theta: e.theta,
                next_ratio: e.next_ratio,
                history_ratio: e.history_ratio,
            })
            .collect();
        out.csv("slack.csv", &rows)?;
    }
    let failure = cert.failure().map(|f| (f.to_string(), transcript));
    Ok(Outcome { summary, failure })
}
