//! Run configuration in a line-based `section.key = value` format.
//!
//! ```text
//! # unforced circular run
//! period = 6.283185307179586
//! minimize.winding = 1
//! potential.kind = linear
//! forcing.fourier.cos = 0.001,0
//! ```
//!
//! Vectors are written `x,y`; vector lists separate entries with `;`, scalar
//! lists with `,`. The forcing series is
//! `p(t) = constant + Σ_k (cos_k cos(2πkt/T) + sin_k sin(2πkt/T))`, `k ≥ 1`.

use std::fmt::Write as _;
use std::str::FromStr;

use forced_kepler::minimizer::{MinimizeConfig, RegularizationKind};
use forced_kepler::potentials::{linear_potential, ForcingTerm, Potential, PotentialKind};
use forced_kepler::Vec2;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{key}: {message}")]
    Validation { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation { key: key.to_string(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Minimize,
    Arcs,
    Analyze,
    Surgery,
    Verify,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Minimize => "minimize",
            Command::Arcs => "arcs",
            Command::Analyze => "analyze",
            Command::Surgery => "surgery",
            Command::Verify => "verify",
        }
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "minimize" => Command::Minimize,
            "arcs" => Command::Arcs,
            "analyze" => Command::Analyze,
            "surgery" => Command::Surgery,
            "verify" => Command::Verify,
            _ => return Err(format!("unknown command `{s}`")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialFamily {
    Zero,
    /// `⟨p(t), x⟩` with `p` from the `forcing.fourier` block.
    Linear,
    /// `coef·|x|^beta`.
    RadialPower,
    /// Linear forcing plus radial power.
    Sum,
}

impl PotentialFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            PotentialFamily::Zero => "zero",
            PotentialFamily::Linear => "linear",
            PotentialFamily::RadialPower => "radial_power",
            PotentialFamily::Sum => "sum",
        }
    }
}

impl FromStr for PotentialFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "zero" => PotentialFamily::Zero,
            "linear" => PotentialFamily::Linear,
            "radial_power" => PotentialFamily::RadialPower,
            "sum" => PotentialFamily::Sum,
            _ => return Err(format!("unknown potential kind `{s}`")),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialConfig {
    pub kind: PotentialFamily,
    pub coef: f64,
    pub beta: f64,
    pub forcing_constant: Vec2<f64>,
    pub forcing_cos: Vec<Vec2<f64>>,
    pub forcing_sin: Vec<Vec2<f64>>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            kind: PotentialFamily::Zero,
            coef: 0.0,
            beta: 1.5,
            forcing_constant: Vec2::zero(),
            forcing_cos: Vec::new(),
            forcing_sin: Vec::new(),
        }
    }
}

impl PotentialConfig {
    pub fn forcing(&self, period: f64) -> forced_kepler::Result<ForcingTerm<f64>> {
        ForcingTerm::new(period, self.forcing_constant, self.forcing_cos.clone(), self.forcing_sin.clone())
    }

    pub fn build(&self, period: f64) -> forced_kepler::Result<Potential<f64>> {
        let radial = PotentialKind::RadialPower { coef: self.coef, beta: self.beta };
        match self.kind {
            PotentialFamily::Zero => Ok(Potential::zero(period)),
            PotentialFamily::Linear => Ok(linear_potential(self.forcing(period)?)),
            PotentialFamily::RadialPower => Potential::radial_power(period, self.coef, self.beta),
            PotentialFamily::Sum => {
                Potential::from_kind(period, PotentialKind::Sum(vec![PotentialKind::Linear(self.forcing(period)?), radial]))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalysisSource {
    /// `ζ₀` bounce between `dir_minus` and `dir_plus`.
    Bounce,
    /// Degenerate Kepler orbit along `dir_minus`.
    Radial,
    /// Collision along `dir_minus` with an amplified outgoing branch.
    EnergyJump,
    /// Trajectory CSV at `analysis.path`.
    File,
}

impl AnalysisSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AnalysisSource::Bounce => "bounce",
            AnalysisSource::Radial => "radial",
            AnalysisSource::EnergyJump => "energy_jump",
            AnalysisSource::File => "file",
        }
    }
}

impl FromStr for AnalysisSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "bounce" => AnalysisSource::Bounce,
            "radial" => AnalysisSource::Radial,
            "energy_jump" => AnalysisSource::EnergyJump,
            "file" => AnalysisSource::File,
            _ => return Err(format!("unknown analysis source `{s}`")),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub source: AnalysisSource,
    pub path: String,
    /// Grid size of synthetic sources.
    pub n: usize,
    pub dir_minus: Vec2<f64>,
    pub dir_plus: Vec2<f64>,
    pub jump_factor: f64,
    /// Blow-up scales; empty selects the default sequence per event.
    pub deltas: Vec<f64>,
    pub delta_terms: usize,
    pub surgery_deltas: Vec<f64>,
    pub direction_gap_tol: f64,
    pub energy_gap_tol: f64,
    pub equation_tol: f64,
    pub exclusion_cells: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            source: AnalysisSource::Bounce,
            path: String::new(),
            n: 1 << 18,
            dir_minus: Vec2::new(1.0, 0.0),
            dir_plus: Vec2::new(0.0, 1.0),
            jump_factor: 1.1,
            deltas: Vec::new(),
            delta_terms: 6,
            surgery_deltas: vec![0.2, 0.1, 0.05],
            direction_gap_tol: 1e-2,
            energy_gap_tol: 1e-2,
            equation_tol: 1e-2,
            exclusion_cells: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArcsConfig {
    pub x_minus: Vec2<f64>,
    pub x_plus: Vec2<f64>,
}

impl Default for ArcsConfig {
    fn default() -> Self {
        Self { x_minus: Vec2::new(1.0, 0.0), x_plus: Vec2::new(0.0, 1.0) }
    }
}

/// Validated run configuration. `minimize.n` and `minimize.seed` are
/// written as the top-level `n` and `seed` keys.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub period: f64,
    pub out: String,
    pub potential: PotentialConfig,
    pub minimize: MinimizeConfig<f64>,
    pub arcs: ArcsConfig,
    pub analysis: AnalysisConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Verify,
            period: std::f64::consts::TAU,
            out: "out".to_string(),
            potential: PotentialConfig::default(),
            minimize: MinimizeConfig::default(),
            arcs: ArcsConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| invalid(key, format!("cannot parse `{value}`")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse_num(key, value)?;
    if !v.is_finite() {
        return Err(invalid(key, "must be finite"));
    }
    Ok(v)
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

fn parse_vec2(key: &str, value: &str) -> Result<Vec2<f64>, ConfigError> {
    match parse_list(key, value)?.as_slice() {
        [x, y] => Ok(Vec2::new(*x, *y)),
        _ => Err(invalid(key, format!("expected `x,y`, got `{value}`"))),
    }
}

fn parse_vec2_list(key: &str, value: &str) -> Result<Vec<Vec2<f64>>, ConfigError> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(';').map(|s| parse_vec2(key, s.trim())).collect()
}

fn parse_enum<T: FromStr<Err = String>>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|m| invalid(key, m))
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn fmt_vec2(v: Vec2<f64>) -> String {
    format!("{},{}", v.x, v.y)
}

fn fmt_vec2_list(v: &[Vec2<f64>]) -> String {
    v.iter().map(|p| fmt_vec2(*p)).collect::<Vec<_>>().join(";")
}

impl RunConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let m = &mut self.minimize;
        let a = &mut self.analysis;
        let p = &mut self.potential;
        match key {
            "command" => self.command = parse_enum(key, value)?,
            "period" => self.period = parse_f64(key, value)?,
            "n" => m.n = parse_num(key, value)?,
            "seed" => m.seed = parse_num(key, value)?,
            "out" => self.out = value.to_string(),
            "potential.kind" => p.kind = parse_enum(key, value)?,
            "potential.params.coef" => p.coef = parse_f64(key, value)?,
            "potential.params.beta" => p.beta = parse_f64(key, value)?,
            "forcing.fourier.constant" => p.forcing_constant = parse_vec2(key, value)?,
            "forcing.fourier.cos" => p.forcing_cos = parse_vec2_list(key, value)?,
            "forcing.fourier.sin" => p.forcing_sin = parse_vec2_list(key, value)?,
            "minimize.winding" => m.winding = parse_num(key, value)?,
            "minimize.max_iters" => m.max_iters = parse_num(key, value)?,
            "minimize.tol_grad" => m.tol_grad = parse_f64(key, value)?,
            "minimize.tol_step" => m.tol_step = parse_f64(key, value)?,
            "minimize.starts" => m.starts = parse_num(key, value)?,
            "minimize.softening_schedule" => m.softening_schedule = parse_list(key, value)?,
            "minimize.regularization" => {
                m.regularization =
                    RegularizationKind::parse(value).ok_or_else(|| invalid(key, format!("unknown regularization `{value}`")))?
            }
            "minimize.init_degree" => m.init_degree = parse_num(key, value)?,
            "minimize.init_perturbation" => m.init_perturbation = parse_f64(key, value)?,
            "arcs.x_minus" => self.arcs.x_minus = parse_vec2(key, value)?,
            "arcs.x_plus" => self.arcs.x_plus = parse_vec2(key, value)?,
            "analysis.source" => a.source = parse_enum(key, value)?,
            "analysis.path" => a.path = value.to_string(),
            "analysis.n" => a.n = parse_num(key, value)?,
            "analysis.dir_minus" => a.dir_minus = parse_vec2(key, value)?,
            "analysis.dir_plus" => a.dir_plus = parse_vec2(key, value)?,
            "analysis.jump_factor" => a.jump_factor = parse_f64(key, value)?,
            "analysis.deltas" => a.deltas = parse_list(key, value)?,
            "analysis.delta_terms" => a.delta_terms = parse_num(key, value)?,
            "analysis.surgery_deltas" => a.surgery_deltas = parse_list(key, value)?,
            "analysis.direction_gap_tol" => a.direction_gap_tol = parse_f64(key, value)?,
            "analysis.energy_gap_tol" => a.energy_gap_tol = parse_f64(key, value)?,
            "analysis.equation_tol" => a.equation_tol = parse_f64(key, value)?,
            "analysis.exclusion_cells" => a.exclusion_cells = parse_num(key, value)?,
            _ => return Err(invalid(key, "unknown key")),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (m, a, p) = (&self.minimize, &self.analysis, &self.potential);
        vec![
            ("command", self.command.as_str().to_string()),
            ("period", self.period.to_string()),
            ("n", m.n.to_string()),
            ("seed", m.seed.to_string()),
            ("out", self.out.clone()),
            ("potential.kind", p.kind.as_str().to_string()),
            ("potential.params.coef", p.coef.to_string()),
            ("potential.params.beta", p.beta.to_string()),
            ("forcing.fourier.constant", fmt_vec2(p.forcing_constant)),
            ("forcing.fourier.cos", fmt_vec2_list(&p.forcing_cos)),
            ("forcing.fourier.sin", fmt_vec2_list(&p.forcing_sin)),
            ("minimize.winding", m.winding.to_string()),
            ("minimize.max_iters", m.max_iters.to_string()),
            ("minimize.tol_grad", m.tol_grad.to_string()),
            ("minimize.tol_step", m.tol_step.to_string()),
            ("minimize.starts", m.starts.to_string()),
            ("minimize.softening_schedule", fmt_list(&m.softening_schedule)),
            ("minimize.regularization", m.regularization.as_str().to_string()),
            ("minimize.init_degree", m.init_degree.to_string()),
            ("minimize.init_perturbation", m.init_perturbation.to_string()),
            ("arcs.x_minus", fmt_vec2(self.arcs.x_minus)),
            ("arcs.x_plus", fmt_vec2(self.arcs.x_plus)),
            ("analysis.source", a.source.as_str().to_string()),
            ("analysis.path", a.path.clone()),
            ("analysis.n", a.n.to_string()),
            ("analysis.dir_minus", fmt_vec2(a.dir_minus)),
            ("analysis.dir_plus", fmt_vec2(a.dir_plus)),
            ("analysis.jump_factor", a.jump_factor.to_string()),
            ("analysis.deltas", fmt_list(&a.deltas)),
            ("analysis.delta_terms", a.delta_terms.to_string()),
            ("analysis.surgery_deltas", fmt_list(&a.surgery_deltas)),
            ("analysis.direction_gap_tol", a.direction_gap_tol.to_string()),
            ("analysis.energy_gap_tol", a.energy_gap_tol.to_string()),
            ("analysis.equation_tol", a.equation_tol.to_string()),
            ("analysis.exclusion_cells", a.exclusion_cells.to_string()),
        ]
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.period > 0.0) {
            return Err(invalid("period", "must be positive"));
        }
        self.minimize.validate().map_err(|e| {
            let key = match &e {
                forced_kepler::Error::InvalidArgument(m) if m.starts_with("winding") => "minimize.winding",
                forced_kepler::Error::InvalidArgument(m) if m.starts_with("grid") => "n",
                forced_kepler::Error::InvalidArgument(m) if m.starts_with("softening") => "minimize.softening_schedule",
                _ => "minimize",
            };
            invalid(key, e.to_string())
        })?;
        let p = &self.potential;
        if matches!(p.kind, PotentialFamily::RadialPower | PotentialFamily::Sum) && !(p.beta > 0.0 && p.beta < 2.0) {
            return Err(invalid("potential.params.beta", "must lie in (0, 2)"));
        }
        for (key, v) in [("arcs.x_minus", self.arcs.x_minus), ("arcs.x_plus", self.arcs.x_plus)] {
            if !(v.norm() > 0.0) {
                return Err(invalid(key, "must be nonzero"));
            }
        }
        let a = &self.analysis;
        for (key, v) in [("analysis.dir_minus", a.dir_minus), ("analysis.dir_plus", a.dir_plus)] {
            if !(v.norm() > 0.0) {
                return Err(invalid(key, "must be nonzero"));
            }
        }
        if a.source == AnalysisSource::File && a.path.is_empty() {
            return Err(invalid("analysis.path", "required when analysis.source = file"));
        }
        if !a.n.is_multiple_of(2) || a.n < 64 {
            return Err(invalid("analysis.n", "must be even and at least 64"));
        }
        if !(a.jump_factor > 0.0) {
            return Err(invalid("analysis.jump_factor", "must be positive"));
        }
        for (key, list) in [("analysis.deltas", &a.deltas), ("analysis.surgery_deltas", &a.surgery_deltas)] {
            if list.iter().any(|d| !(*d > 0.0)) || list.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(invalid(key, "must be positive and strictly decreasing"));
            }
        }
        if a.delta_terms == 0 {
            return Err(invalid("analysis.delta_terms", "must be positive"));
        }
        for (key, v) in [
            ("analysis.direction_gap_tol", a.direction_gap_tol),
            ("analysis.energy_gap_tol", a.energy_gap_tol),
            ("analysis.equation_tol", a.equation_tol),
        ] {
            if !(v > 0.0) {
                return Err(invalid(key, "must be positive"));
            }
        }
        Ok(())
    }
}

/// Parses and validates `text`; absent keys keep their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse { line: i + 1, message: format!("expected `key = value`, got `{line}`") })?;
        let key = key.trim();
        if seen.iter().any(|k| k == key) {
            return Err(ConfigError::Parse { line: i + 1, message: format!("duplicate key `{key}`") });
        }
        cfg.set(key, value.trim())?;
        seen.push(key.to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}
