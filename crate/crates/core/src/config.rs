//! TOML experiment files.
//!
//! ```toml
//! n_relays = 2
//!
//! # either explicit broadcast lists ...
//! [[broadcast]]
//! node = 1
//! outcome = [{ set = [0, 1], p = 0.5 }, { set = [1], p = 0.5 }]
//!
//! # ... or independent links (from, to, success probability)
//! links = [[2, 1, 0.5]]
//!
//! [weight]
//! family = "geometric"   # or "custom" with table = [[m, n, value], ...]
//! K = 3.0                # or K = "orcd" for ceil(1 + 1/p_min)
//!
//! [arrivals]
//! kind = "bernoulli"     # or "batch-uniform" with a_max
//! rates = [0.1, 0.1]
//!
//! [policy]
//! name = "fpolicy"
//! tie = "lowest-index"
//!
//! [sim]
//! horizon = 100000
//! warmup = 10000
//! seed = 1
//! ```
//!
//! `broadcast` and `links` may be combined as long as no node appears in both.

use serde::Deserialize;
use thiserror::Error;

use crate::model::{ModelError, NetworkModel};
use crate::nodeset::NodeSet;
use crate::policies::{Policy, PolicyError, PolicySpec, TieRule};
use crate::sim::{ArrivalKind, ArrivalProcess};
use crate::weights::{WeightError, WeightTable};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSpec {
    pub set: Vec<usize>,
    pub p: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BroadcastSpec {
    pub node: usize,
    pub outcome: Vec<OutcomeSpec>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum KSpec {
    Value(f64),
    Rule(String),
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(rename = "K")]
    pub k: Option<KSpec>,
    pub table: Option<Vec<(usize, usize, f64)>>,
}

fn default_family() -> String {
    "geometric".into()
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec {
            family: default_family(),
            k: None,
            table: None,
        }
    }
}

impl WeightSpec {
    /// Geometric base this spec resolves to on `m`, if geometric.
    pub fn geometric_k(&self, m: &NetworkModel) -> Result<Option<f64>, ConfigError> {
        if self.family != "geometric" {
            return Ok(None);
        }
        Ok(Some(match &self.k {
            None => 3.0,
            Some(KSpec::Value(k)) => *k,
            Some(KSpec::Rule(r)) if r == "orcd" => WeightTable::orcd_base(m.p_min()?),
            Some(KSpec::Rule(r)) => return Err(ConfigError::Invalid(format!("unknown K rule {r:?}"))),
        }))
    }

    pub fn build(&self, m: &NetworkModel) -> Result<WeightTable<f64>, ConfigError> {
        let n = m.n_relays();
        match self.family.as_str() {
            "geometric" => Ok(WeightTable::geometric(self.geometric_k(m)?.expect("geometric"), n)?),
            "custom" => {
                let table = self
                    .table
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("custom weight needs a table".into()))?;
                Ok(WeightTable::from_triples("custom", n, table)?)
            }
            other => Err(ConfigError::Invalid(format!("unknown weight family {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSpec {
    #[serde(default)]
    pub kind: ArrivalKind,
    pub rates: Vec<f64>,
    #[serde(default = "default_a_max")]
    pub a_max: u32,
}

fn default_a_max() -> u32 {
    1
}

impl ArrivalSpec {
    pub fn build(&self) -> ArrivalProcess {
        ArrivalProcess {
            kind: self.kind,
            rates: self.rates.clone(),
            a_max: match self.kind {
                ArrivalKind::Bernoulli => 1,
                ArrivalKind::BatchUniform => self.a_max,
            },
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub name: String,
    #[serde(default)]
    pub tie: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub horizon: Option<u64>,
    pub warmup: Option<u64>,
    pub seed: Option<u64>,
}

/// Grid of runs for the `sweep` subcommand.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub policies: Vec<String>,
    pub direction: Vec<f64>,
    /// Multiples of the direction; of `θ*·direction` when `relative` is set.
    pub scalings: Vec<f64>,
    #[serde(default)]
    pub relative: bool,
    pub seeds: Vec<u64>,
    pub horizon: u64,
    pub warmup: Option<u64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub n_relays: usize,
    #[serde(default)]
    pub broadcast: Vec<BroadcastSpec>,
    #[serde(default)]
    pub links: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub weight: WeightSpec,
    pub arrivals: Option<ArrivalSpec>,
    pub policy: Option<PolicySection>,
    #[serde(default)]
    pub sim: SimSection,
    pub sweep: Option<SweepSection>,
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn model(&self) -> Result<NetworkModel, ConfigError> {
        let n = self.n_relays;
        let mut entries: Vec<(usize, Vec<(NodeSet, f64)>)> = self
            .broadcast
            .iter()
            .map(|b| {
                let outs = b
                    .outcome
                    .iter()
                    .map(|o| (NodeSet::from_nodes(o.set.iter().copied()), o.p))
                    .collect();
                (b.node, outs)
            })
            .collect();
        if !self.links.is_empty() {
            let linked = NetworkModel::from_link_probabilities(n, &self.links)?;
            for i in 1..=n {
                if !self.links.iter().any(|l| l.0 == i) {
                    continue;
                }
                if entries.iter().any(|e| e.0 == i) {
                    return Err(ConfigError::Invalid(format!(
                        "node {i} has both broadcast and link entries"
                    )));
                }
                entries.push((i, linked.outcomes(i).iter().map(|o| (o.set, o.prob)).collect()));
            }
        }
        for i in 1..=n {
            if !entries.iter().any(|e| e.0 == i) {
                // a relay with no listed outcome never gets its packet anywhere
                entries.push((i, vec![(NodeSet::singleton(i), 1.0)]));
            }
        }
        Ok(NetworkModel::new(n, &entries)?)
    }

    pub fn policy(&self, m: &NetworkModel) -> Result<Policy, ConfigError> {
        let section = self
            .policy
            .clone()
            .unwrap_or(PolicySection {
                name: "fpolicy".into(),
                tie: None,
            });
        policy_from(&section.name, section.tie.as_deref(), &self.weight, m)
    }
}

/// Builds a policy from its config string, tie rule and weight spec.
pub fn policy_from(name: &str, tie: Option<&str>, weight: &WeightSpec, m: &NetworkModel) -> Result<Policy, ConfigError> {
    let spec: PolicySpec = name.parse()?;
    let tie = match tie {
        Some(t) => t.parse()?,
        None => TieRule::default(),
    };
    Ok(Policy::new(spec, weight.build(m)?, tie))
}
