//! The run configuration: one TOML document per run.

use lpkato::geometry::{Domain, MeasureSpec};
use lpkato::kernels::ProcessSpec;
use lpkato::stochastic::Potential;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Command {
    Classify,
    Potential,
    Embed,
    Fk,
    B0,
    KernelsSelftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Potential => "potential",
            Command::Embed => "embed",
            Command::Fk => "fk",
            Command::B0 => "b0",
            Command::KernelsSelftest => "kernels-selftest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Record,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    /// Report directory; stdout only when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Exit 1 when the headline verdict is OUT.
    #[serde(default)]
    pub assert_in: bool,
    #[serde(default)]
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default)]
    pub classify: ClassifySection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub embed: EmbedSection,
    #[serde(default)]
    pub fk: FkSection,
    #[serde(default)]
    pub b0: B0Section,
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassName {
    #[default]
    SK,
    SEk,
    SD,
    SD0,
    KLocal,
    KTail,
    Zhao,
    Chen,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    /// Class whose verdict sets the exit status.
    #[serde(default)]
    pub class: ClassName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelChoice {
    /// 0-order kernel of the process.
    #[default]
    Green,
    Resolvent { lambda: f64 },
    /// `|x-y|^{β-d}`.
    Reference { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialMode {
    /// `r ↦ sup_x ∫_{B_r(x)} k^p dμ`.
    #[default]
    Local,
    /// `R ↦ sup_x ∫_{|y-o|≥R} k^p dμ`.
    Tail,
    /// `sup_x ∫ k^p dμ`.
    Sup,
    /// `∫ k(x, y)^p μ(dy)` at `x`.
    Point,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(default)]
    pub mode: PotentialMode,
    #[serde(default)]
    pub kernel: KernelChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedMode {
    /// Singular values on growing truncations (compactness signature).
    #[default]
    Truncation,
    /// Dirichlet eigenvalues with grid refinement.
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedSection {
    #[serde(default)]
    pub mode: EmbedMode,
    #[serde(default = "default_lengths")]
    pub lengths: Vec<f64>,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_spacings")]
    pub spacings: Vec<f64>,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_lengths() -> Vec<f64> {
    vec![10.0, 20.0, 40.0]
}
fn default_h() -> f64 {
    0.1
}
fn default_spacings() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}
fn default_k() -> usize {
    20
}

impl Default for EmbedSection {
    fn default() -> Self {
        EmbedSection {
            mode: EmbedMode::default(),
            lengths: default_lengths(),
            h: default_h(),
            spacings: default_spacings(),
            k: default_k(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FkMode {
    /// `P_t^{-V} 1(x0)` on the time ladder.
    #[default]
    Value,
    /// Ground-state decay rate from the ladder.
    Decay,
    /// `E_{x0}[τ_D]`.
    Exit,
    /// `sup_x E_x[τ_D]` over `points` with the volume cap.
    GreenProbe,
    /// `sup_x P_x(ζ ≤ t)` over `points`.
    Lifetime,
    /// One sample path, written as a trace.
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkSection {
    #[serde(default)]
    pub mode: FkMode,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Probe points; defaults to `[x0]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_potential")]
    pub potential: Potential,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_paths() -> usize {
    100_000
}
fn default_horizon() -> f64 {
    100.0
}
fn default_times() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}
fn default_potential() -> Potential {
    Potential::Zero
}

impl Default for FkSection {
    fn default() -> Self {
        FkSection {
            mode: FkMode::default(),
            dt: default_dt(),
            paths: default_paths(),
            horizon: default_horizon(),
            times: default_times(),
            x0: None,
            points: None,
            potential: default_potential(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct B0Section {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
}

/// Error with the dotted path of the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub reason: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error at `{}`: {}", self.path, self.reason)
    }
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            seed: default_seed(),
            threads: None,
            assert_in: false,
            output: Output::default(),
            process: None,
            measure: None,
            domain: None,
            p: None,
            classify: ClassifySection::default(),
            potential: PotentialSection::default(),
            embed: EmbedSection::default(),
            fk: FkSection::default(),
            b0: B0Section::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e: toml::de::Error| {
            let path = e
                .span()
                .map(|s| field_at(text, s.start))
                .unwrap_or_else(|| "<document>".into());
            ConfigError {
                path,
                reason: e.message().to_string(),
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks the fields the command needs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |path: &str, reason: String| ConfigError {
            path: path.into(),
            reason,
        };
        let need_process = !matches!(self.command, Command::B0 | Command::KernelsSelftest | Command::Embed);
        if need_process {
            let spec = self.process.ok_or_else(|| err("process", "missing".into()))?;
            spec.validate().map_err(|e| err("process", e.to_string()))?;
        }
        if matches!(self.command, Command::Classify | Command::Potential) {
            let m = self.measure.as_ref().ok_or_else(|| err("measure", "missing".into()))?;
            m.validate().map_err(|e| err("measure", e.to_string()))?;
            let p = self.p.ok_or_else(|| err("p", "missing".into()))?;
            if !(p >= 1.0) {
                return Err(err("p", format!("need p ≥ 1, got {p}")));
            }
            if let Some(spec) = self.process {
                if spec.dim != m.dim {
                    return Err(err("measure.dim", format!("process has d = {}, measure d = {}", spec.dim, m.dim)));
                }
            }
        }
        if matches!(self.command, Command::Embed | Command::B0) || matches!(self.fk.mode, FkMode::Exit | FkMode::GreenProbe) && self.command == Command::Fk {
            let d = self.domain.as_ref().ok_or_else(|| err("domain", "missing".into()))?;
            d.validate().map_err(|e| err("domain", e.to_string()))?;
        }
        if let (Some(d), Some(spec)) = (&self.domain, self.process) {
            if d.dim != spec.dim && self.command == Command::Fk {
                return Err(err("domain.dim", format!("process has d = {}, domain d = {}", spec.dim, d.dim)));
            }
        }
        if self.command == Command::Fk {
            let f = &self.fk;
            if !(f.dt > 0.0) {
                return Err(err("fk.dt", "must be positive".into()));
            }
            if f.paths == 0 {
                return Err(err("fk.paths", "must be positive".into()));
            }
            if f.times.is_empty() || f.times.windows(2).any(|w| !(w[1] > w[0])) || !(f.times[0] > 0.0) {
                return Err(err("fk.times", "need positive increasing times".into()));
            }
            f.potential.validate().map_err(|e| err("fk.potential", e.to_string()))?;
        }
        if self.command == Command::Embed && !(self.embed.h > 0.0) {
            return Err(err("embed.h", "must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(err("threads", "must be positive".into()));
        }
        Ok(())
    }
}

/// Dotted key path of the table entry enclosing byte `pos`.
fn field_at(text: &str, pos: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with('[') {
            table = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_string();
        }
        if offset + line.len() > pos {
            break;
        }
        offset += line.len();
    }
    match (table.is_empty(), key.is_empty()) {
        (true, true) => "<document>".into(),
        (true, false) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}
