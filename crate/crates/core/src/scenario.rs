//! Scenario files: an environment, a type distribution, an optional extra
//! experiment menu and run options, stored as JSON with rationals as "p/q".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library;
use crate::model::{Belief, PayoffEnvironment, TypeDistribution};
use crate::profile::NamedExperiment;
use crate::rational::{q, serde_q, Q};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Grid size for credibility frontiers and constrained LPs.
    #[serde(default = "default_grid")]
    pub grid: u64,
    /// Node budget for truncated games.
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Perturbation size for the near-commitment construction.
    #[serde(default = "default_eps", with = "serde_q")]
    pub eps: Q,
    /// Type cap for truncated games; defaults to the highest type, or a
    /// cap leaving tail mass below 1/1000 for unbounded distributions.
    #[serde(default)]
    pub type_cap: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// State used by the threshold bounds.
    #[serde(default)]
    pub theta: Option<usize>,
    /// Non-credible belief and ball radius for the approximation constants.
    #[serde(default)]
    pub low_belief: Option<Belief>,
    #[serde(default, with = "opt_q")]
    pub radius: Option<Q>,
}

fn default_grid() -> u64 {
    300
}
fn default_budget() -> usize {
    crate::verifier::DEFAULT_NODE_BUDGET
}
fn default_eps() -> Q {
    q(1, 10)
}
fn default_samples() -> usize {
    100_000
}

mod opt_q {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    use crate::rational::{fmt_q, parse_q, Q};

    pub fn serialize<S: Serializer>(v: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_some(&fmt_q(x)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Q>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|t| parse_q(&t).map_err(D::Error::custom))
            .transpose()
    }
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            grid: default_grid(),
            budget: default_budget(),
            eps: default_eps(),
            type_cap: None,
            seed: 0,
            samples: default_samples(),
            theta: None,
            low_belief: None,
            radius: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub environment: PayoffEnvironment,
    pub types: TypeDistribution,
    /// Experiments available besides the fully informative and
    /// uninformative ones.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub menu: Vec<NamedExperiment>,
    /// Path of a candidate profile, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default)]
    pub options: RunOptions,
}

impl Scenario {
    pub fn new(name: &str, environment: PayoffEnvironment, types: TypeDistribution) -> Self {
        Scenario {
            name: name.into(),
            environment,
            types,
            menu: vec![],
            profile: None,
            options: RunOptions::default(),
        }
    }

    /// Type cap for truncated games.
    pub fn type_cap(&self) -> u64 {
        if let Some(c) = self.options.type_cap {
            return c;
        }
        if let Some(m) = self.types.max_support() {
            return m;
        }
        let tol = q(1, 1000);
        (0..).find(|&t| self.types.tail_mass_above(t) < tol).unwrap()
    }

    pub fn validate(&self, text: Option<&str>) -> Result<()> {
        let at = |field: &str, e: Error| Error::Scenario {
            field: field.into(),
            line: text.map_or(0, |t| line_of_key(t, field)),
            message: e.to_string(),
        };
        self.environment.validate().map_err(|e| at("environment", e))?;
        self.types.validate().map_err(|e| at("types", e))?;
        for m in &self.menu {
            m.experiment.validate().map_err(|e| at("menu", e))?;
            if m.experiment.likelihood.len() != self.environment.n_states() {
                return Err(at(
                    "menu",
                    Error::InvalidInput(format!(
                        "experiment {:?} has the wrong number of states",
                        m.name
                    )),
                ));
            }
        }
        if let Some(t) = self.options.theta {
            if t >= self.environment.n_states() {
                return Err(at("theta", Error::InvalidInput(format!("no state {t}"))));
            }
        }
        if let Some(b) = &self.options.low_belief {
            if b.len() != self.environment.n_states() {
                return Err(at(
                    "low_belief",
                    Error::InvalidInput("belief length differs from states".into()),
                ));
            }
            Belief::new(b.0.clone()).map_err(|e| at("low_belief", e))?;
        }
        Ok(())
    }
}

/// 1-based line of the first `"key":` occurrence, or 0.
fn line_of_key(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map_or(0, |i| i + 1)
}

/// Field name from a serde message such as "missing field `prior`".
fn field_of(message: &str) -> String {
    let mut parts = message.split('`');
    parts.next();
    parts.next().unwrap_or("scenario").to_string()
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        Error::Scenario {
            field: field_of(&message),
            line: e.line(),
            message,
        }
    })?;
    scenario.validate(Some(text))?;
    Ok(scenario)
}

pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenarios serialize")
}

/// Names of the built-in scenarios.
pub const BUILTIN: &[&str] = &[
    "prosecutor",
    "three-action",
    "three-action-low-prior",
    "four-action",
    "four-action-near-commitment",
    "four-action-low-prior",
];

pub fn builtin(name: &str) -> Option<Scenario> {
    let two_types = || TypeDistribution::finite([(0, q(1, 3)), (1, q(2, 3))]).unwrap();
    let s = match name {
        "prosecutor" => Scenario::new(name, library::prosecutor(), library::prosecutor_types()),
        "three-action" => {
            let mut s = Scenario::new(name, library::three_action(q(1, 2)), library::geometric_types());
            s.options.type_cap = Some(6);
            s.options.low_belief = Some(Belief::two(q(1, 3)));
            s.options.radius = Some(q(1, 12));
            s.options.theta = Some(1);
            s.options.grid = 100;
            s
        }
        "three-action-low-prior" => {
            let (env, p) = library::three_action_low_prior();
            let mut s = Scenario::new(name, env, p);
            s.options.theta = Some(1);
            s
        }
        "four-action" => Scenario::new(name, library::four_action(q(3, 8)), two_types()),
        "four-action-near-commitment" => {
            let (env, p) = library::four_action_near_commitment();
            Scenario::new(name, env, p)
        }
        "four-action-low-prior" => {
            let mut s = Scenario::new(name, library::four_action(q(1, 8)), two_types());
            s.options.theta = Some(1);
            s
        }
        _ => return None,
    };
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_round_trip() {
        for name in BUILTIN {
            let s = builtin(name).unwrap();
            let text = scenario_to_json(&s);
            assert_eq!(parse_scenario(&text).unwrap(), s, "{name}");
        }
        assert!(builtin("missing").is_none());
    }

    #[test]
    fn parse_errors_name_field_and_line() {
        let text = "{\n  \"name\": \"x\",\n  \"types\": {\"finite\": {\"0\": \"1\"}}\n}";
        match parse_scenario(text) {
            Err(Error::Scenario { field, line, .. }) => {
                assert_eq!(field, "environment");
                assert!(line >= 1);
            }
            other => panic!("expected scenario error, got {other:?}"),
        }
        let mut s = builtin("prosecutor").unwrap();
        s.environment.sender_u.pop();
        let text = scenario_to_json(&s);
        match parse_scenario(&text) {
            Err(Error::Scenario { field, line, .. }) => {
                assert_eq!(field, "environment");
                assert_eq!(line, 3);
            }
            other => panic!("expected scenario error, got {other:?}"),
        }
    }

    #[test]
    fn bad_rational_is_reported() {
        let s = builtin("prosecutor").unwrap();
        let text = scenario_to_json(&s).replacen("\"3/10\"", "\"3/0\"", 1);
        assert!(matches!(parse_scenario(&text), Err(Error::Scenario { .. })));
    }
}
