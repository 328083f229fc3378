//! JSON run configuration.
//!
//! Every component (system, potential, measure) is given inline or as a
//! string naming a JSON file with the inline form, relative to the config
//! file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use historic_core::moran::{ConstructionParams, FamilyMode, SecondMeasure, ThresholdRule};
use historic_core::thermo::equilibrium_measure;
use historic_core::{MarkovMeasure, Potential, Resolution, SymbolicSystem, Word};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Source<SystemSpec>,
    #[serde(default)]
    pub psi: Option<Source<PotentialSpec>>,
    #[serde(default)]
    pub phi: Option<Source<PotentialSpec>>,
    #[serde(default)]
    pub measures: MeasureSpecs,
    #[serde(default)]
    pub params: ParamsSpec,
    #[serde(default)]
    pub pressure: PressureSpec,
    #[serde(default)]
    pub equilibrium: EquilibriumSpec,
    #[serde(default)]
    pub katok: KatokSpec,
    #[serde(default)]
    pub glue: Option<GlueSpec>,
    #[serde(default)]
    pub bs_dim: BsDimSpec,
    #[serde(default)]
    pub spectrum: SpectrumSpec,
    #[serde(default)]
    pub certify: CertifySpec,
}

/// Inline value, or a string naming a JSON file that holds it.
#[derive(Debug, Deserialize)]
#[serde(transparent, bound = "")]
pub struct Source<T> {
    raw: serde_json::Value,
    #[serde(skip)]
    kind: std::marker::PhantomData<T>,
}

impl<T: DeserializeOwned> Source<T> {
    pub fn resolve(&self, base: &Path, what: &str) -> Result<T, CliError> {
        let inline = T::deserialize(&self.raw);
        match (&self.raw, inline) {
            (_, Ok(v)) => Ok(v),
            (serde_json::Value::String(p), Err(_)) => {
                let path = base.join(p);
                let text = fs::read_to_string(&path).map_err(|e| {
                    CliError::Config(format!("{what}: cannot read {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::Config(format!("{what}: {} does not parse: {e}", path.display()))
                })
            }
            (_, Err(e)) => Err(CliError::Config(format!("{what}: {e}"))),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub alphabet: Option<usize>,
    /// 0/1 transition matrix, row `i` listing the symbols allowed after `i`.
    #[serde(default)]
    pub transitions: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    FullShift,
    GoldenMean,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant(f64),
    Indicator {
        symbol: u8,
        value: f64,
    },
    /// One value per admissible word of length `range`.
    Table {
        range: usize,
        values: BTreeMap<String, f64>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Bernoulli(Vec<f64>),
    /// First-order chain from a row-stochastic matrix.
    Markov {
        rows: Vec<Vec<f64>>,
    },
    /// The equilibrium state of `ψ`.
    Equilibrium,
    /// `w1 μ_1 + (1 - w1) ν`; only meaningful as the second measure.
    Mixture {
        w1: f64,
        nu: Box<MeasureSpec>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpecs {
    #[serde(default)]
    pub mu1: Option<Source<MeasureSpec>>,
    #[serde(default)]
    pub mu2: Option<Source<MeasureSpec>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    /// `ε = 2^-m`.
    pub m: Option<u32>,
    pub delta_first: Option<f64>,
    pub delta_ratio: Option<f64>,
    pub l_base: Option<usize>,
    pub theta: Option<ThetaSpec>,
    pub family: Option<FamilySpec>,
    pub n_cap: Option<usize>,
    pub depth: Option<usize>,
    pub atom_cap: Option<usize>,
    pub seedless: Option<bool>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSpec {
    Harmonic { scale: f64 },
    Constant { value: f64 },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Maximal,
    Sufficient { max_members: usize },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressureSpec {
    pub m: u32,
    pub n_max: Option<usize>,
    pub tol: f64,
    pub variational_tol: f64,
    /// Largest allowed `|perron - variational|` beyond the certified gap.
    pub agreement: f64,
}

impl Default for PressureSpec {
    fn default() -> Self {
        PressureSpec {
            m: 0,
            n_max: None,
            tol: 1e-3,
            variational_tol: 1e-9,
            agreement: 2e-6,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumSpec {
    /// Word lengths checked for the Gibbs property.
    pub gibbs_n: usize,
    pub gap_tol: f64,
}

impl Default for EquilibriumSpec {
    fn default() -> Self {
        EquilibriumSpec {
            gibbs_n: 10,
            gap_tol: 1e-6,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KatokSpec {
    /// `mu1` or `mu2`.
    pub measure: String,
    pub gamma: f64,
    pub m: u32,
    pub n_min: usize,
    pub n_max: usize,
    /// Largest allowed `|rate(n_max) - (h + ∫ψ)|`.
    pub final_gap: f64,
}

impl Default for KatokSpec {
    fn default() -> Self {
        KatokSpec {
            measure: "mu1".into(),
            gamma: 0.3,
            m: 0,
            n_min: 4,
            n_max: 14,
            final_gap: 0.08,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueSpec {
    pub segments: Vec<String>,
    pub m: u32,
    #[serde(default)]
    pub gap: Option<usize>,
    #[serde(default)]
    pub gaps: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BsDimSpec {
    pub m: u32,
    pub n_max: Option<usize>,
    pub tol: f64,
    /// Cylinder words making up `Z`; the whole space when empty.
    pub words: Vec<String>,
    /// Restrict `Z` to a sub-shift.
    pub subshift: Option<SystemSpec>,
    /// Defaults to the top-level `ψ`.
    pub psi: Option<Source<PotentialSpec>>,
}

impl Default for BsDimSpec {
    fn default() -> Self {
        BsDimSpec {
            m: 0,
            n_max: None,
            tol: 1e-3,
            words: Vec::new(),
            subshift: None,
            psi: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSpec {
    /// Defaults to the range of `φ`.
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub steps: usize,
    pub q_max: f64,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        SpectrumSpec {
            alpha_min: None,
            alpha_max: None,
            steps: 21,
            q_max: 40.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifySpec {
    pub pressure: Option<f64>,
    pub equilibrium: Option<MeasureSpec>,
    pub sweep_limit: u64,
    pub max_time: u64,
    pub inject_duplicate: bool,
}

impl Default for CertifySpec {
    fn default() -> Self {
        CertifySpec {
            pressure: None,
            equilibrium: None,
            sweep_limit: 4096,
            max_time: 1 << 31,
            inject_duplicate: false,
        }
    }
}

/// A parsed config together with the directory its relative paths use.
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
    pub system: SymbolicSystem,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let spec = config.system.resolve(&base, "system")?;
    let system = build_system(&spec)?;
    Ok(Loaded {
        config,
        base,
        system,
    })
}

pub fn build_system(spec: &SystemSpec) -> Result<SymbolicSystem, CliError> {
    match (spec.preset, &spec.transitions) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "system: give either a preset or transitions, not both".into(),
        )),
        (Some(Preset::FullShift), None) => {
            let k = spec.alphabet.unwrap_or(2);
            if !(2..=255).contains(&k) {
                return Err(CliError::Config(format!(
                    "system: full shift needs 2..=255 symbols, got {k}"
                )));
            }
            Ok(SymbolicSystem::full_shift(k))
        }
        (Some(Preset::GoldenMean), None) => Ok(SymbolicSystem::golden_mean()),
        (None, Some(rows)) => {
            let mut matrix = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let mut out = Vec::with_capacity(row.len());
                for (j, &v) in row.iter().enumerate() {
                    if v == 0.0 || v == 1.0 {
                        out.push(v as u8);
                    } else {
                        return Err(CliError::Config(format!(
                            "system: transition row {i}, column {j}: entry {v} is not 0 or 1"
                        )));
                    }
                }
                matrix.push(out);
            }
            let alphabet = spec.alphabet.unwrap_or(matrix.len());
            let label = spec
                .label
                .clone()
                .unwrap_or_else(|| format!("SFT on {alphabet} symbols"));
            SymbolicSystem::new(alphabet, matrix, label)
                .map_err(|e| CliError::Config(format!("system: {e}")))
        }
        (None, None) => Err(CliError::Config(
            "system: needs a preset or transitions".into(),
        )),
    }
}

pub fn build_potential(
    sys: &SymbolicSystem,
    spec: &PotentialSpec,
    what: &str,
) -> Result<Potential, CliError> {
    let built = match spec {
        PotentialSpec::Constant(c) => {
            if !c.is_finite() {
                return Err(CliError::Config(format!("{what}: constant must be finite")));
            }
            Ok(Potential::constant(sys, *c))
        }
        PotentialSpec::Indicator { symbol, value } => Potential::indicator(sys, *symbol, *value),
        PotentialSpec::Table { range, values } => {
            let mut entries = Vec::with_capacity(values.len());
            for (w, &v) in values {
                let word = Word::parse(w)
                    .map_err(|e| CliError::Config(format!("{what}: word \"{w}\": {e}")))?;
                entries.push((word, v));
            }
            Potential::new(sys, *range, entries)
        }
    };
    built.map_err(|e| CliError::Config(format!("{what}: {e}")))
}

impl Loaded {
    pub fn psi(&self) -> Result<Potential, CliError> {
        match &self.config.psi {
            Some(s) => build_potential(&self.system, &s.resolve(&self.base, "psi")?, "psi"),
            None => Ok(Potential::constant(&self.system, 0.0)),
        }
    }

    pub fn phi(&self) -> Result<Potential, CliError> {
        match &self.config.phi {
            Some(s) => build_potential(&self.system, &s.resolve(&self.base, "phi")?, "phi"),
            None => Err(CliError::Config("phi: required for this command".into())),
        }
    }

    fn measure_spec(&self, which: &str) -> Result<MeasureSpec, CliError> {
        let src = match which {
            "mu1" => &self.config.measures.mu1,
            "mu2" => &self.config.measures.mu2,
            other => {
                return Err(CliError::Config(format!(
                    "unknown measure \"{other}\", expected mu1 or mu2"
                )))
            }
        };
        src.as_ref()
            .ok_or_else(|| {
                CliError::Config(format!("measures.{which}: required for this command"))
            })?
            .resolve(&self.base, which)
    }

    /// A single Markov measure; mixtures are rejected.
    pub fn markov(&self, spec: &MeasureSpec, what: &str) -> Result<MarkovMeasure, CliError> {
        let built = match spec {
            MeasureSpec::Bernoulli(p) => MarkovMeasure::bernoulli(&self.system, p),
            MeasureSpec::Markov { rows } => MarkovMeasure::new(&self.system, rows.clone()),
            MeasureSpec::Equilibrium => equilibrium_measure(&self.system, &self.psi()?),
            MeasureSpec::Mixture { .. } => {
                return Err(CliError::Config(format!(
                    "{what}: a mixture is only allowed as mu2"
                )));
            }
        };
        built.map_err(|e| CliError::Config(format!("{what}: {e}")))
    }

    pub fn mu1(&self) -> Result<MarkovMeasure, CliError> {
        self.markov(&self.measure_spec("mu1")?, "mu1")
    }

    /// The second measure: ergodic, or a mixture with `μ_1`.
    pub fn second(&self) -> Result<SecondMeasure, CliError> {
        match self.measure_spec("mu2")? {
            MeasureSpec::Mixture { w1, nu } => {
                if !(w1 > 0.0 && w1 < 1.0) {
                    return Err(CliError::Config(format!(
                        "mu2: mixture weight w1 must lie in (0, 1), got {w1}"
                    )));
                }
                Ok(SecondMeasure::Mixture {
                    nu: self.markov(&nu, "mu2.nu")?,
                    w1,
                })
            }
            spec => Ok(SecondMeasure::Ergodic(self.markov(&spec, "mu2")?)),
        }
    }

    pub fn named_second_or_first(&self, which: &str) -> Result<MeasureChoice, CliError> {
        match which {
            "mu1" => Ok(MeasureChoice::Markov(self.mu1()?)),
            "mu2" => match self.second()? {
                SecondMeasure::Ergodic(m) => Ok(MeasureChoice::Markov(m)),
                SecondMeasure::Mixture { nu, w1 } => Ok(MeasureChoice::Mixture {
                    mu1: self.mu1()?,
                    nu,
                    w1,
                }),
            },
            other => Err(CliError::Config(format!(
                "unknown measure \"{other}\", expected mu1 or mu2"
            ))),
        }
    }

    pub fn params(&self, overrides: &Overrides) -> Result<ConstructionParams, CliError> {
        let p = &self.config.params;
        let gamma = p.gamma.unwrap_or(0.14);
        let delta = p.delta.unwrap_or(0.1);
        let mut params = ConstructionParams::new(gamma, delta, Resolution(p.m.unwrap_or(2)));
        if let Some(v) = p.delta_first {
            params.delta_first = v;
        }
        if let Some(v) = p.delta_ratio {
            params.delta_ratio = v;
        }
        if let Some(v) = p.l_base {
            params.l_base = v;
        }
        if let Some(t) = p.theta {
            params.theta = match t {
                ThetaSpec::Harmonic { scale } => ThresholdRule::Harmonic { scale },
                ThetaSpec::Constant { value } => ThresholdRule::Constant { value },
            };
        }
        if let Some(f) = p.family {
            params.family = match f {
                FamilySpec::Maximal => FamilyMode::Maximal,
                FamilySpec::Sufficient { max_members } => FamilyMode::Sufficient { max_members },
            };
        }
        if let Some(v) = p.n_cap {
            params.n_cap = v;
        }
        params.depth = overrides.depth.or(p.depth).unwrap_or(params.depth);
        params.atom_cap = overrides.atom_cap.or(p.atom_cap).unwrap_or(params.atom_cap);
        params.seedless = overrides.seedless || p.seedless.unwrap_or(false);
        params
            .validate()
            .map_err(|e| CliError::Config(format!("params: {e}")))?;
        Ok(params)
    }
}

pub enum MeasureChoice {
    Markov(MarkovMeasure),
    Mixture {
        mu1: MarkovMeasure,
        nu: MarkovMeasure,
        w1: f64,
    },
}

/// Command line values that take precedence over the config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub depth: Option<usize>,
    pub atom_cap: Option<usize>,
    pub seedless: bool,
}
