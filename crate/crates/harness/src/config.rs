use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fracwave::problems::ProblemSpec;
use fracwave::stepper::KernelMode;
use fracwave::SchemeKind;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Grading parameter, either absolute or a multiple of the scheme's optimal value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GammaSpec {
    Value(f64),
    /// `factor * gamma_opt`.
    Optimal(f64),
}

impl GammaSpec {
    pub fn resolve(self, problem: &ProblemSpec<f64>, scheme: SchemeKind) -> f64 {
        match self {
            GammaSpec::Value(g) => g,
            GammaSpec::Optimal(factor) => factor * problem.optimal_gamma(scheme),
        }
    }
}

fn parse_factor(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
        None => s.trim().parse().ok(),
    }
}

impl FromStr for GammaSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || HarnessError::Config(format!("cannot read grading '{s}'"));
        if s == "opt" {
            return Ok(GammaSpec::Optimal(1.0));
        }
        if let Some(factor) = s.strip_suffix("opt") {
            let factor = factor.trim_end().strip_suffix('*').ok_or_else(bad)?;
            return parse_factor(factor).map(GammaSpec::Optimal).ok_or_else(bad);
        }
        let g = parse_factor(s).ok_or_else(bad)?;
        if !(g >= 1.0) {
            return Err(HarnessError::Config(format!(
                "grading {g} must be at least 1"
            )));
        }
        Ok(GammaSpec::Value(g))
    }
}

impl TryFrom<String> for GammaSpec {
    type Error = HarnessError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<GammaSpec> for String {
    fn from(g: GammaSpec) -> String {
        g.to_string()
    }
}

impl fmt::Display for GammaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaSpec::Value(g) => write!(f, "{g}"),
            GammaSpec::Optimal(x) if *x == 1.0 => f.write_str("opt"),
            GammaSpec::Optimal(x) if *x == 1.125 => f.write_str("9/8*opt"),
            GammaSpec::Optimal(x) => write!(f, "{x}*opt"),
        }
    }
}

/// Time mesh used by a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshFamily {
    /// Graded start on `[0, T0]` followed by a random tail.
    TwoPart,
    /// Graded mesh over the whole interval.
    Graded,
}

impl FromStr for MeshFamily {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-part" => Ok(MeshFamily::TwoPart),
            "graded" => Ok(MeshFamily::Graded),
            other => Err(HarnessError::Config(format!(
                "unknown mesh family '{other}'"
            ))),
        }
    }
}

pub(crate) mod scheme_serde {
    use fracwave::SchemeKind;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &SchemeKind, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(v.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SchemeKind, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

pub(crate) mod kernels_serde {
    use fracwave::stepper::KernelMode;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &KernelMode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(v.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<KernelMode, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

pub(crate) mod keep_serde {
    use fracwave::KeepPolicy;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn name(v: KeepPolicy) -> &'static str {
        match v {
            KeepPolicy::Alikhanov => "u2",
            KeepPolicy::L1 => "u1",
            KeepPolicy::Independent => "independent",
        }
    }

    pub fn serialize<S: Serializer>(v: &KeepPolicy, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(name(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<KeepPolicy, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

fn default_problem() -> String {
    "example1-grid".into()
}

fn default_ns() -> Vec<usize> {
    vec![16, 32, 64, 128]
}

fn default_m() -> usize {
    128
}

fn default_seed() -> u64 {
    2024
}

fn default_kernels() -> KernelMode {
    KernelMode::fast()
}

fn default_mesh() -> MeshFamily {
    MeshFamily::TwoPart
}

fn default_scheme() -> SchemeKind {
    SchemeKind::L1
}

fn default_gammas() -> Vec<GammaSpec> {
    vec![
        GammaSpec::Value(1.0),
        GammaSpec::Optimal(1.0),
        GammaSpec::Optimal(1.125),
    ]
}

/// Configuration of a convergence study; the JSON form mirrors the fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_problem")]
    pub problem: String,
    pub alphas: Vec<f64>,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<GammaSpec>,
    #[serde(default = "default_ns")]
    pub ns: Vec<usize>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_scheme", with = "scheme_serde")]
    pub scheme: SchemeKind,
    #[serde(default = "default_kernels", with = "kernels_serde")]
    pub kernels: KernelMode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_mesh")]
    pub mesh: MeshFamily,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl StudyConfig {
    pub fn new(problem: &str, alphas: Vec<f64>, scheme: SchemeKind) -> Self {
        Self {
            problem: problem.into(),
            alphas,
            gammas: default_gammas(),
            ns: default_ns(),
            m: default_m(),
            scheme,
            kernels: default_kernels(),
            seed: default_seed(),
            mesh: default_mesh(),
            horizon: None,
            out: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: StudyConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.alphas.is_empty() || self.gammas.is_empty() || self.ns.is_empty() {
            return Err(HarnessError::Config(
                "alpha, gamma and N lists must be nonempty".into(),
            ));
        }
        if let Some(&a) = self.alphas.iter().find(|&&a| !(a > 1.0 && a < 2.0)) {
            return Err(HarnessError::Config(format!(
                "alpha = {a} must lie in (1, 2)"
            )));
        }
        for w in self.ns.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(HarnessError::Config(format!(
                    "N list must double at every entry, found {} after {}",
                    w[1], w[0]
                )));
            }
        }
        if self.ns[0] == 0 || self.m < 2 {
            return Err(HarnessError::Config(
                "N and M must be positive (M >= 2)".into(),
            ));
        }
        Ok(())
    }

    pub fn problem_for(&self, alpha: f64) -> Result<ProblemSpec<f64>, HarnessError> {
        Ok(fracwave::problems::by_name(
            &self.problem,
            alpha,
            self.m,
            self.horizon,
        )?)
    }
}

/// Parses a comma separated list.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, HarnessError>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|e| HarnessError::Config(format!("cannot read '{p}': {e}")))
        })
        .collect()
}
