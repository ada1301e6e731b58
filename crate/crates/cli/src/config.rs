//! Experiment configuration.
//!
//! A config is one JSON document with a `model` block, exactly one protocol
//! under `protocol`, and optional `disorder` and `output` blocks. Parsing
//! resolves every default, so the echoed config is complete and parses back
//! to the same value.

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use topochain::dynamics::default_start_cell;
use topochain::model::{Boundary, ChainSpec, DisorderSpec};
use topochain::pump::{DEFAULT_OMEGA, DEFAULT_SAMPLE_EVERY, DEFAULT_STEPS_PER_CYCLE};

use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "TOPOCHAIN_SEED";
pub const DEFAULT_OUT_DIR: &str = "topochain-out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub protocol: Protocol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Effective seed after flag, config and environment precedence.
    #[serde(skip)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub p: usize,
    #[serde(rename = "N")]
    pub cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g1: Option<f64>,
    /// Radians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Multiples of π; resolved into `theta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_pi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
}

impl ModelConfig {
    /// Chain of the resolved model.
    pub fn chain(&self) -> topochain::Result<ChainSpec> {
        ChainSpec::new(
            self.p,
            self.cells,
            self.g0.unwrap_or(1.0),
            self.g1.unwrap_or(1.0),
            self.theta.unwrap_or(0.0),
            self.boundary.unwrap_or(Boundary::Open),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Protocol {
    Quench(QuenchConfig),
    Pump(PumpConfig),
    Winding(WindingConfig),
    Chern(ChernConfig),
    Bands(BandsConfig),
    Sweep(SweepConfig),
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Quench(_) => "quench",
            Self::Pump(_) => "pump",
            Self::Winding(_) => "winding",
            Self::Chern(_) => "chern",
            Self::Bands(_) => "bands",
            Self::Sweep(_) => "sweep",
        }
    }

    fn needs_theta(&self) -> bool {
        match self {
            Self::Quench(_) | Self::Winding(_) => true,
            Self::Bands(b) => b.ntheta.is_none(),
            Self::Pump(_) | Self::Chern(_) => false,
            Self::Sweep(s) => {
                !matches!(s.parameter, SweepParameter::Theta | SweepParameter::ThetaPi)
                    && s.experiment.needs_theta()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sublattice {
    A,
    B,
}

impl Sublattice {
    pub fn index(self) -> usize {
        match self {
            Self::A => 1,
            Self::B => 2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuenchConfig {
    /// Chain lengths `L = 2N`; defaults to the model chain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<usize>>,
    /// Starting cell per length; defaults to the middle cell.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_cells: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sublattice: Option<Sublattice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Largest critical-time index reported.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_s_max: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Radians.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi0_pi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_per_cycle: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<Vec<usize>>,
    /// Exit with a contract violation when the state leaves its band.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub require_adiabatic: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindingConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nk: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChernConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nq: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ntheta: Option<usize>,
    /// Also evaluate on the doubled grid and report agreement.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_doubled: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nq: Option<usize>,
    /// Phase grid size; without it bands are taken at the model phase.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ntheta: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    W,
    #[serde(rename = "g0")]
    G0,
    #[serde(rename = "g1")]
    G1,
    #[serde(rename = "theta")]
    Theta,
    #[serde(rename = "theta_pi")]
    ThetaPi,
}

impl SweepParameter {
    pub fn column(self) -> &'static str {
        match self {
            Self::W => "W",
            Self::G0 => "g0",
            Self::G1 => "g1",
            Self::Theta => "theta",
            Self::ThetaPi => "theta_pi",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub experiment: Box<Protocol>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    #[serde(rename = "W", default)]
    pub strength: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub samples: usize,
}

fn one() -> usize {
    1
}

impl DisorderConfig {
    pub fn spec(&self, seed: u64) -> topochain::Result<DisorderSpec> {
        DisorderSpec::new(self.strength, self.seed.unwrap_or(seed), self.samples)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Values supplied outside the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub env_seed: Option<u64>,
    pub steps: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Reads the environment seed; a malformed value is a config error.
    pub fn with_env(mut self) -> Result<Self> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            let seed = raw
                .trim()
                .parse()
                .map_err(|_| CliError::config(SEED_ENV, format!("`{raw}` is not a u64 seed")))?;
            self.env_seed = Some(seed);
        }
        Ok(self)
    }
}

/// Parses, resolves defaults and validates.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(path, e.into_inner().to_string())
    })?;
    resolve(raw, overrides)
}

/// Normalized JSON echo of a resolved config.
pub fn echo(config: &ExperimentConfig) -> String {
    let mut s = serde_json::to_string_pretty(config).expect("config serializes");
    s.push('\n');
    s
}

fn positive(path: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::config(
            path,
            format!("{x} must be positive and finite"),
        ))
    }
}

fn finite(path: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::config(path, "must be finite"))
    }
}

fn at_least(path: &str, n: usize, min: usize) -> Result<usize> {
    if n >= min {
        Ok(n)
    } else {
        Err(CliError::config(
            path,
            format!("{n} is below the minimum {min}"),
        ))
    }
}

fn in_range(path: &str, n: usize, max: usize) -> Result<usize> {
    if (1..=max).contains(&n) {
        Ok(n)
    } else {
        Err(CliError::config(path, format!("{n} not in 1..={max}")))
    }
}

fn exclusive_angle(
    path: &str,
    radians: Option<f64>,
    multiples_of_pi: Option<f64>,
) -> Result<Option<f64>> {
    match (radians, multiples_of_pi) {
        (Some(_), Some(_)) => Err(CliError::config(
            path,
            "give the angle in radians or in multiples of π, not both",
        )),
        (Some(r), None) => finite(path, r).map(Some),
        (None, Some(m)) => finite(path, m).map(|m| Some(m * PI)),
        (None, None) => Ok(None),
    }
}

fn resolve(mut cfg: ExperimentConfig, ov: &Overrides) -> Result<ExperimentConfig> {
    let needs_theta = cfg.protocol.needs_theta();
    let m = &mut cfg.model;
    at_least("model.p", m.p, 2)?;
    at_least("model.N", m.cells, 1)?;
    m.g0 = Some(finite("model.g0", m.g0.unwrap_or(1.0))?);
    m.g1 = Some(finite("model.g1", m.g1.unwrap_or(1.0))?);
    let theta = exclusive_angle("model.theta", m.theta, m.theta_pi.take())?;
    m.theta = match (theta, needs_theta) {
        (Some(t), _) => Some(t),
        (None, false) => Some(0.0),
        (None, true) => {
            return Err(CliError::config(
                "model",
                format!(
                    "missing field `theta` (or `theta_pi`), required by {}",
                    cfg.protocol.name()
                ),
            ))
        }
    };
    m.boundary = Some(m.boundary.unwrap_or(Boundary::Open));

    cfg.seed = ov
        .seed
        .or(cfg.disorder.as_ref().and_then(|d| d.seed))
        .or(ov.env_seed)
        .unwrap_or(0);
    if let Some(d) = &mut cfg.disorder {
        d.seed = Some(cfg.seed);
        if !(d.strength >= 0.0 && d.strength.is_finite()) {
            return Err(CliError::config(
                "disorder.W",
                format!("{} must be >= 0", d.strength),
            ));
        }
        at_least("disorder.samples", d.samples, 1)?;
    }

    if let Some(out) = &ov.out {
        cfg.output.dir = Some(out.clone());
    }
    cfg.output.dir = Some(
        cfg.output
            .dir
            .take()
            .unwrap_or_else(|| DEFAULT_OUT_DIR.into()),
    );

    let model = cfg.model.clone();
    let has_disorder = cfg.disorder.is_some();
    resolve_protocol(&mut cfg.protocol, &model, has_disorder, ov, "protocol")?;
    Ok(cfg)
}

fn require_open(model: &ModelConfig, what: &str) -> Result<()> {
    if model.boundary != Some(Boundary::Open) {
        return Err(CliError::config(
            "model.boundary",
            format!("{what} runs on open chains"),
        ));
    }
    Ok(())
}

fn resolve_protocol(
    protocol: &mut Protocol,
    model: &ModelConfig,
    has_disorder: bool,
    ov: &Overrides,
    prefix: &str,
) -> Result<()> {
    let key = protocol.name();
    let path = |field: &str| format!("{prefix}.{key}.{field}");
    match protocol {
        Protocol::Quench(q) => {
            if model.p != 2 {
                return Err(CliError::config(
                    "model.p",
                    "quench dynamics needs two-site cells (p = 2)",
                ));
            }
            require_open(model, "quench dynamics")?;
            let lengths = q.lengths.take().unwrap_or_else(|| vec![2 * model.cells]);
            if lengths.is_empty() {
                return Err(CliError::config(path("lengths"), "must not be empty"));
            }
            for (i, &l) in lengths.iter().enumerate() {
                if l < 2 || l % 2 != 0 {
                    return Err(CliError::config(
                        format!("{}[{i}]", path("lengths")),
                        format!("chain length {l} must be a positive even number"),
                    ));
                }
            }
            let starts = q
                .start_cells
                .take()
                .unwrap_or_else(|| lengths.iter().map(|l| default_start_cell(l / 2)).collect());
            if starts.len() != lengths.len() {
                return Err(CliError::config(
                    path("start_cells"),
                    format!("{} entries for {} lengths", starts.len(), lengths.len()),
                ));
            }
            for (i, (&c, &l)) in starts.iter().zip(&lengths).enumerate() {
                in_range(&format!("{}[{i}]", path("start_cells")), c, l / 2)?;
            }
            let t_max = positive(&path("t_max"), q.t_max.unwrap_or(50.0))?;
            let dt = match ov.steps {
                Some(n) => t_max / at_least("--steps", n, 1)? as f64,
                None => positive(&path("dt"), q.dt.unwrap_or(0.02))?,
            };
            if dt > t_max {
                return Err(CliError::config(path("dt"), "exceeds t_max"));
            }
            q.lengths = Some(lengths);
            q.start_cells = Some(starts);
            q.sublattice = Some(q.sublattice.unwrap_or(Sublattice::A));
            q.t_max = Some(t_max);
            q.dt = Some(dt);
            q.critical_s_max = Some(q.critical_s_max.unwrap_or(0));
        }
        Protocol::Pump(pc) => {
            require_open(model, "pumping")?;
            let phi0 = exclusive_angle(&path("phi0"), pc.phi0, pc.phi0_pi.take())?.unwrap_or(PI);
            let off = (phi0 - PI).rem_euclid(TAU);
            if off.min(TAU - off) > 1e-9 {
                return Err(CliError::config(
                    path("phi0"),
                    format!(
                        "{phi0} must equal π: the cell states are prepared as eigenstates of the \
                         decoupled chain at θ = π"
                    ),
                ));
            }
            pc.phi0 = Some(phi0);
            pc.omega = Some(positive(&path("omega"), pc.omega.unwrap_or(DEFAULT_OMEGA))?);
            pc.cycles = Some(at_least(&path("cycles"), pc.cycles.unwrap_or(1), 1)?);
            let steps = ov
                .steps
                .or(pc.steps_per_cycle)
                .unwrap_or(DEFAULT_STEPS_PER_CYCLE);
            pc.steps_per_cycle = Some(at_least(&path("steps_per_cycle"), steps, 1)?);
            pc.sample_every = Some(at_least(
                &path("sample_every"),
                pc.sample_every.unwrap_or(DEFAULT_SAMPLE_EVERY),
                1,
            )?);
            let cell = pc.cell.unwrap_or(model.cells.div_ceil(2));
            pc.cell = Some(in_range(&path("cell"), cell, model.cells)?);
            let bands = pc.bands.take().unwrap_or_else(|| (1..=model.p).collect());
            if bands.is_empty() {
                return Err(CliError::config(path("bands"), "must not be empty"));
            }
            for (i, &b) in bands.iter().enumerate() {
                in_range(&format!("{}[{i}]", path("bands")), b, model.p)?;
            }
            pc.bands = Some(bands);
            pc.require_adiabatic = Some(pc.require_adiabatic.unwrap_or(true));
        }
        Protocol::Winding(w) => {
            if model.p != 2 {
                return Err(CliError::config(
                    "model.p",
                    "the winding number needs p = 2",
                ));
            }
            w.nk = Some(at_least(&path("nk"), w.nk.unwrap_or(256), 16)?);
        }
        Protocol::Chern(c) => {
            c.nq = Some(at_least(&path("nq"), c.nq.unwrap_or(24), 12)?);
            c.ntheta = Some(at_least(&path("ntheta"), c.ntheta.unwrap_or(24), 12)?);
            c.check_doubled = Some(c.check_doubled.unwrap_or(true));
        }
        Protocol::Bands(b) => {
            b.nq = Some(at_least(&path("nq"), b.nq.unwrap_or(64), 1)?);
            if let Some(n) = b.ntheta {
                at_least(&path("ntheta"), n, 1)?;
            }
        }
        Protocol::Sweep(s) => {
            if s.values.is_empty() {
                return Err(CliError::config(path("values"), "sweep grid is empty"));
            }
            for (i, &v) in s.values.iter().enumerate() {
                finite(&format!("{}[{i}]", path("values")), v)?;
            }
            if s.parameter == SweepParameter::W {
                if !has_disorder {
                    return Err(CliError::config(
                        "disorder",
                        "a W sweep needs a disorder block for the seed and sample count",
                    ));
                }
                if let Some(i) = s.values.iter().position(|&v| v < 0.0) {
                    return Err(CliError::config(
                        format!("{}[{i}]", path("values")),
                        "W must be >= 0",
                    ));
                }
            }
            let sub = format!("{prefix}.sweep.experiment");
            match s.experiment.as_ref() {
                Protocol::Sweep(_) | Protocol::Bands(_) => {
                    return Err(CliError::config(
                        sub,
                        format!("{} cannot be swept", s.experiment.name()),
                    ))
                }
                _ => {}
            }
            let probe = apply_parameter(model, s.parameter, s.values[0]);
            resolve_protocol(&mut s.experiment, &probe, has_disorder, ov, &sub)?;
        }
    }
    Ok(())
}

/// Model with the swept parameter set to `value`; `W` leaves it unchanged.
pub fn apply_parameter(model: &ModelConfig, parameter: SweepParameter, value: f64) -> ModelConfig {
    let mut m = model.clone();
    match parameter {
        SweepParameter::W => {}
        SweepParameter::G0 => m.g0 = Some(value),
        SweepParameter::G1 => m.g1 = Some(value),
        SweepParameter::Theta => m.theta = Some(value),
        SweepParameter::ThetaPi => m.theta = Some(value * PI),
    }
    m
}
