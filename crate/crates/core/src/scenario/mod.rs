//! Scenarios: a validated problem bundle plus the analysis it is meant
//! for. Scenarios come from the builtin corpus or from TOML files.

mod builtins;
mod file;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::bias::{EvidenceSymbol, PolarizationAgent, SignalModel, StatusQuoInstance};
use crate::conversation::{ConversationConfig, Informant, InteractiveEntry};
use crate::decision::{ComputationalProblem, OutcomeDistribution, StandardProblem};
use crate::error::{Error, Result};
use crate::info::Partition;
use crate::speedup::SpeedupFunction;
use crate::zk::CompositionRule;
use crate::Exact;

pub use builtins::{safe_closed_form, SafeClosedForm, BUILTINS};

/// The operations a scenario can be run through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Eval,
    Best,
    Voi,
    Voci,
    Voc,
    Speedup,
    Bias,
    ZkCheck,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Eval,
        Command::Best,
        Command::Voi,
        Command::Voci,
        Command::Voc,
        Command::Speedup,
        Command::Bias,
        Command::ZkCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Eval => "eval",
            Command::Best => "best",
            Command::Voi => "voi",
            Command::Voci => "voci",
            Command::Voc => "voc",
            Command::Speedup => "speedup",
            Command::Bias => "bias",
            Command::ZkCheck => "zk-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
                Error::Scenario(format!(
                    "unknown command `{s}`; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Which value of computational information `voci` reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VociMode {
    #[default]
    Post,
    Pre,
    Both,
}

impl FromStr for VociMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "post" => Ok(VociMode::Post),
            "pre" => Ok(VociMode::Pre),
            "both" => Ok(VociMode::Both),
            _ => Err(Error::Scenario(format!(
                "unknown voci mode `{s}`; expected post, pre or both"
            ))),
        }
    }
}

/// An informant together with the interactive machines that converse
/// with it.
#[derive(Debug, Clone)]
pub struct ConversationSetup {
    pub informant: Arc<dyn Informant>,
    pub machines: Vec<InteractiveEntry>,
    pub config: ConversationConfig,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum BiasSetup {
    FirstImpressions(SignalModel<Exact>),
    Polarization {
        agents: [PolarizationAgent<Exact>; 2],
        evidence: Vec<EvidenceSymbol<Exact>>,
    },
    StatusQuo(StatusQuoInstance<Exact>),
}

/// Generated zero-knowledge families checked by `zk-check`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZkSetup {
    pub seed: u64,
    pub count: u64,
    /// Verifier whose simulator is replaced by a precision-violating one.
    pub inject: Option<usize>,
    pub rule: CompositionRule,
}

/// Randomized machines given directly by their outcome distributions,
/// aligned with `ids`.
#[derive(Debug, Clone)]
pub struct RandomizedMachines {
    pub ids: Vec<String>,
    pub dists: Vec<OutcomeDistribution>,
}

/// A fully validated scenario. Which parts are present decides which
/// commands apply to it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    /// Parameters as given, echoed in reports.
    pub params: Vec<(String, String)>,
    pub default_command: Command,
    pub standard: Option<StandardProblem<Exact>>,
    pub problem: Option<ComputationalProblem<Exact>>,
    pub randomized: Option<RandomizedMachines>,
    pub partition: Option<Partition>,
    pub conversation: Option<ConversationSetup>,
    pub bias: Option<BiasSetup>,
    pub zk: Option<ZkSetup>,
    pub speedup: Option<SpeedupFunction>,
    pub voci_mode: VociMode,
    /// Recorded headline value of the default analysis.
    pub expected: Option<Exact>,
}

impl Scenario {
    pub(crate) fn empty(name: impl Into<String>, default_command: Command) -> Self {
        Scenario {
            name: name.into(),
            params: Vec::new(),
            default_command,
            standard: None,
            problem: None,
            randomized: None,
            partition: None,
            conversation: None,
            bias: None,
            zk: None,
            speedup: None,
            voci_mode: VociMode::Post,
            expected: None,
        }
    }
}

/// Loads a builtin by name (optionally `name:key=value,...`) or, when the
/// argument names an existing file or ends in `.toml`, a scenario file.
pub fn load_scenario(source: &str) -> Result<Scenario> {
    let path = Path::new(source);
    if path.is_file() || source.ends_with(".toml") {
        return file::load_file(path);
    }
    let (name, params) = split_params(source)?;
    builtins::builtin(name, &params)
}

/// Parses a scenario from TOML text. Relative program paths resolve
/// against `base`.
pub fn parse_scenario(text: &str, base: &Path) -> Result<Scenario> {
    file::parse(text, base)
}

fn split_params(source: &str) -> Result<(&str, Vec<(String, String)>)> {
    let Some((name, rest)) = source.split_once(':') else {
        return Ok((source, Vec::new()));
    };
    let mut params = Vec::new();
    for item in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| {
            Error::Scenario(format!("parameter `{item}` is not of the form key=value"))
        })?;
        params.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok((name, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commands_round_trip_through_their_names() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("evaluate".parse::<Command>().is_err());
    }

    #[test]
    fn builtin_parameters_are_split() {
        let (name, params) = split_params("safe:B=12, K=6").unwrap();
        assert_eq!(name, "safe");
        assert_eq!(
            params,
            vec![("B".into(), "12".into()), ("K".into(), "6".into())]
        );
        assert!(split_params("safe:B").is_err());
    }
}
